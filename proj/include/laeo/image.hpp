#ifndef LAEO_IMAGE_HPP_
#define LAEO_IMAGE_HPP_

#include <filesystem>
#include <span>
#include <vector>

namespace laeo {

// Dense HxWxC float image, row-major with interleaved channels.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  float& at(int y, int x, int c) {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  Image FlippedHorizontally() const;

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Binary PPM (P6, 8 bit) I/O. Reading yields values in [0,255]; writing
// rounds and clamps to that range.
Image ReadPpm(const std::filesystem::path& path);
void WritePpm(const std::filesystem::path& path, const Image& image);

}  // namespace laeo

#endif  // LAEO_IMAGE_HPP_
