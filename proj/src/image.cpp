#include "laeo/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace laeo {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  data_.assign(static_cast<size_t>(height) * width * channels, fill);
}

Image Image::FlippedHorizontally() const {
  Image out(height_, width_, channels_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      for (int c = 0; c < channels_; ++c) {
        out.at(y, x, c) = at(y, width_ - 1 - x, c);
      }
    }
  }
  return out;
}

namespace {

// Skips whitespace and '#' comments in a PPM header.
void SkipHeaderSpace(std::istream& in) {
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

Image ReadPpm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") {
    throw std::runtime_error(path.string() + ": not a binary PPM (P6)");
  }
  int width = 0, height = 0, maxval = 0;
  SkipHeaderSpace(in);
  in >> width;
  SkipHeaderSpace(in);
  in >> height;
  SkipHeaderSpace(in);
  in >> maxval;
  in.get();
  if (!in || width <= 0 || height <= 0 || maxval != 255) {
    throw std::runtime_error(path.string() + ": unsupported PPM header");
  }
  std::vector<unsigned char> raw(static_cast<size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated PPM data");
  Image image(height, width, 3);
  auto data = image.data();
  for (size_t i = 0; i < raw.size(); ++i) data[i] = raw[i];
  return image;
}

void WritePpm(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) {
    throw std::invalid_argument("PPM export needs a 3-channel image");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image " + path.string());
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  auto data = image.data();
  for (size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::clamp(std::lround(data[i]), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

}  // namespace laeo
