#include <cstring>
#include <stdexcept>

#include "laeo/io.hpp"

namespace laeo {
namespace {

constexpr const char* kCheckpointTag = "laeo-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr const char* kSamplesTag = "laeo-samples";
constexpr int kSamplesVersion = 1;

// host byte order; everything we build for is little-endian
template <typename T>
Json::binary_t PackBinary(std::span<const T> values) {
  std::vector<uint8_t> bytes(values.size() * sizeof(T));
  if (!bytes.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return Json::binary_t(std::move(bytes));
}

template <typename T>
std::vector<T> UnpackBinary(const Json& j, size_t expected) {
  if (!j.is_binary()) throw std::runtime_error("expected a binary block");
  const auto& bytes = j.get_binary();
  if (bytes.size() != expected * sizeof(T)) {
    throw std::runtime_error("binary block has " + std::to_string(bytes.size()) +
                             " bytes, expected " +
                             std::to_string(expected * sizeof(T)));
  }
  std::vector<T> out(expected);
  if (expected) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

size_t ShapeSize(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::runtime_error("negative dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

Json ArraysToJson(const std::vector<ParamArray>& arrays) {
  Json out = Json::array();
  for (const auto& a : arrays) {
    out.push_back({{"name", a.name},
                   {"group", ToString(a.group)},
                   {"shape", a.shape},
                   {"data", PackBinary<double>(a.values)}});
  }
  return out;
}

std::vector<ParamArray> ArraysFromJson(const Json& j) {
  std::vector<ParamArray> out;
  for (const auto& e : j) {
    ParamArray a;
    a.name = e.at("name").get<std::string>();
    a.group = ParamGroupFromString(e.at("group").get<std::string>());
    a.shape = e.at("shape").get<std::vector<int>>();
    a.values = UnpackBinary<double>(e.at("data"), ShapeSize(a.shape));
    out.push_back(std::move(a));
  }
  return out;
}

Json ImageToJson(const Image& im) {
  return {{"shape", {im.height(), im.width(), im.channels()}},
          {"data", PackBinary<float>(im.data())}};
}

Image ImageFromJson(const Json& j) {
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 3) throw std::runtime_error("image shape needs 3 dims");
  Image im(shape[0], shape[1], shape[2]);
  const auto values = UnpackBinary<float>(j.at("data"), im.size());
  std::copy(values.begin(), values.end(), im.data().begin());
  return im;
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& c) {
  Json frozen = Json::array();
  for (ParamGroup g : c.params.frozen) frozen.push_back(ToString(g));
  Json j = {{"format", kCheckpointTag},
            {"version", kCheckpointVersion},
            {"config_digest", ConfigDigest(c.config)},
            {"config", ToJson(c.config)},
            {"arrays", ArraysToJson(c.params.arrays)},
            {"frozen", frozen},
            {"metadata", c.metadata}};
  if (c.pose_head) j["pose_head"] = ArraysToJson(c.pose_head->arrays);
  const auto bytes = Json::to_cbor(j);
  WriteFile(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                   bytes.size()));
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  const std::string bytes = ReadFile(path);
  const std::string where = path.string() + ": ";
  Checkpoint c;
  try {
    const Json j = Json::from_cbor(bytes);
    if (!j.is_object() || j.value("format", "") != kCheckpointTag) {
      throw std::runtime_error("not a checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw std::runtime_error("unsupported checkpoint version " +
                               std::to_string(version));
    }
    c.config = LaeoNetConfigFromJson(j.at("config"));
    const std::string stored = j.at("config_digest").get<std::string>();
    if (stored != ConfigDigest(c.config)) {
      throw std::runtime_error("config digest does not match stored config");
    }
    c.params.arrays = ArraysFromJson(j.at("arrays"));
    for (const auto& g : j.at("frozen")) {
      c.params.frozen.insert(ParamGroupFromString(g.get<std::string>()));
    }
    if (j.contains("pose_head")) {
      c.pose_head = PoseHead{ArraysFromJson(j.at("pose_head"))};
    }
    c.metadata = j.value("metadata", Json::object());
  } catch (const Json::exception& e) {
    throw std::runtime_error(where + "damaged checkpoint: " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + e.what());
  }
  // array layout must match what the config builds
  const auto fresh = LaeoNet(c.config).InitParams(0);
  if (fresh.arrays.size() != c.params.arrays.size()) {
    throw std::runtime_error(where + "array count does not match config");
  }
  for (size_t i = 0; i < fresh.arrays.size(); ++i) {
    if (fresh.arrays[i].name != c.params.arrays[i].name ||
        fresh.arrays[i].shape != c.params.arrays[i].shape) {
      throw std::runtime_error(where + "array '" + c.params.arrays[i].name +
                               "' does not match config");
    }
  }
  return c;
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path,
                          const LaeoNetConfig& expected) {
  Checkpoint c = LoadCheckpoint(path);
  if (ConfigDigest(c.config) != ConfigDigest(expected)) {
    throw std::runtime_error(path.string() +
                             ": checkpoint config digest " +
                             ConfigDigest(c.config) + " differs from " +
                             ConfigDigest(expected));
  }
  return c;
}

std::string SerializeSamples(const SampleArchive& a) {
  if (!a.provenance.empty() && a.provenance.size() != a.samples.size()) {
    throw std::invalid_argument("provenance needs one entry per sample");
  }
  Json samples = Json::array();
  for (const auto& s : a.samples) {
    Json left = Json::array(), right = Json::array();
    for (const auto& im : s.left_crops) left.push_back(ImageToJson(im));
    for (const auto& im : s.right_crops) right.push_back(ImageToJson(im));
    samples.push_back({{"left", left},
                       {"right", right},
                       {"head_map", ImageToJson(s.head_map)},
                       {"geometry",
                        {s.geometry.dx, s.geometry.dy, s.geometry.scale_ratio}},
                       {"label", static_cast<int>(s.label)}});
  }
  const Json j = {{"format", kSamplesTag},
                  {"version", kSamplesVersion},
                  {"samples", samples},
                  {"provenance", a.provenance}};
  const auto bytes = Json::to_cbor(j);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

SampleArchive DeserializeSamples(std::string_view bytes) {
  SampleArchive a;
  try {
    const Json j = Json::from_cbor(bytes);
    if (!j.is_object() || j.value("format", "") != kSamplesTag) {
      throw std::runtime_error("not a sample archive");
    }
    if (j.at("version").get<int>() != kSamplesVersion) {
      throw std::runtime_error("unsupported sample archive version");
    }
    for (const auto& e : j.at("samples")) {
      TrackPairSample s;
      for (const auto& im : e.at("left")) s.left_crops.push_back(ImageFromJson(im));
      for (const auto& im : e.at("right")) s.right_crops.push_back(ImageFromJson(im));
      s.head_map = ImageFromJson(e.at("head_map"));
      const auto g = e.at("geometry").get<std::vector<double>>();
      if (g.size() != 3) throw std::runtime_error("geometry needs 3 values");
      s.geometry = {g[0], g[1], g[2]};
      const int label = e.at("label").get<int>();
      if (label < 0 || label > 2) throw std::runtime_error("bad label");
      s.label = static_cast<PairLabel>(label);
      s.Validate();
      a.samples.push_back(std::move(s));
    }
    a.provenance = j.at("provenance").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("damaged sample archive: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("bad sample: ") + e.what());
  }
  if (!a.provenance.empty() && a.provenance.size() != a.samples.size()) {
    throw std::runtime_error("provenance count does not match samples");
  }
  return a;
}

void SaveSamples(const std::filesystem::path& path, const SampleArchive& a) {
  WriteFile(path, SerializeSamples(a));
}

SampleArchive LoadSamples(const std::filesystem::path& path) {
  try {
    return DeserializeSamples(ReadFile(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace laeo
