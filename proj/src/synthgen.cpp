#include "laeo/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace laeo {
namespace {

using Rgb = std::array<float, 3>;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double Sign(double v) { return (v > 0.0) - (v < 0.0); }

Image ResizeTo64(const Image& im) {
  return CropAndResize(im, BoundingBox(0, 0, im.width(), im.height()));
}

LabeledHeadImage Mirrored(const LabeledHeadImage& h) {
  LabeledHeadImage m = h;
  m.image = h.image.FlippedHorizontally();
  m.pose = PoseAngles(-h.pose.yaw, h.pose.pitch, -h.pose.roll);
  return m;
}

std::vector<Image> Normalized(const std::vector<Image>& crops) {
  std::vector<Image> out;
  out.reserve(crops.size());
  for (const auto& c : crops) out.push_back(NormalizeCrop(c));
  return out;
}

BoundingBox SquareBox(double cx, double cy, double w) {
  return BoundingBox(cx - w / 2, cy - w / 2, cx + w / 2, cy + w / 2);
}

}  // namespace

void AugmentationSpec::Validate() const {
  if (max_shift < 0.0 || max_zoom < 0.0 || max_brightness_delta < 0.0) {
    throw std::invalid_argument("augmentation magnitudes must be >= 0");
  }
  if (max_zoom >= 1.0 || max_brightness_delta >= 1.0) {
    throw std::invalid_argument("zoom and brightness deltas must be < 1");
  }
}

void CompatibilitySpec::Validate() const {
  if (yaw_margin < 0.0 || yaw_margin >= 1.0) {
    throw std::invalid_argument("yaw margin must lie in [0,1)");
  }
  if (!(max_pitch_diff > 0.0)) {
    throw std::invalid_argument("max pitch difference must be positive");
  }
}

bool LaeoCompatible(const PoseAngles& left, const PoseAngles& right,
                    const CompatibilitySpec& spec) {
  const auto l = left.normalized();
  const auto r = right.normalized();
  return l[0] > spec.yaw_margin && r[0] < -spec.yaw_margin &&
         std::abs(l[1] - r[1]) < spec.max_pitch_diff;
}

void SynthConfig::Validate() const {
  if (K < 2) throw std::invalid_argument("synthetic K must be >= 2");
  if (!(frame_width > 0.0) || !(frame_height > 0.0)) {
    throw std::invalid_argument("synthetic frame size must be positive");
  }
  if (!(min_head_width > 0.0) || max_head_width < min_head_width) {
    throw std::invalid_argument("bad synthetic head width range");
  }
  if (3.0 * max_head_width > frame_width ||
      max_head_width > frame_height) {
    throw std::invalid_argument("synthetic heads do not fit the frame");
  }
  if (max_bystanders < 0) {
    throw std::invalid_argument("max_bystanders must be >= 0");
  }
  compatibility.Validate();
  augment.Validate();
  head_map.Validate();
}

PairPlacement SamplePlacement(const SynthConfig& c, std::mt19937_64& rng) {
  const double W = c.frame_width, H = c.frame_height;
  const double w1 = Uniform(rng, c.min_head_width, c.max_head_width);
  const double w2 = std::clamp(w1 * Uniform(rng, 0.8, 1.25), c.min_head_width,
                               c.max_head_width);
  const double x1 = Uniform(rng, 0.5 * w1, 0.45 * W);
  const double x2_lo = std::max(0.55 * W, x1 + 0.5 * (w1 + w2));
  const double x2 = Uniform(rng, x2_lo, W - 0.5 * w2);
  const double y1 = Uniform(rng, 0.5 * w1, H - 0.5 * w1);
  const double y2 =
      std::clamp(y1 + Uniform(rng, -0.15, 0.15) * H, 0.5 * w2, H - 0.5 * w2);
  PairPlacement p{{0, 0, W, H}, SquareBox(x1, y1, w1), SquareBox(x2, y2, w2),
                  {}};
  const int n = std::uniform_int_distribution<int>(0, c.max_bystanders)(rng);
  for (int i = 0; i < n; ++i) {
    const double w = Uniform(rng, c.min_head_width, c.max_head_width);
    p.others.push_back(SquareBox(Uniform(rng, 0.5 * w, W - 0.5 * w),
                                 Uniform(rng, 0.5 * w, H - 0.5 * w), w));
  }
  return p;
}

Image RenderProceduralHead(const PoseAngles& pose, uint64_t style_seed,
                           int size) {
  std::mt19937_64 rng(style_seed);
  const Rgb bg{float(Uniform(rng, 20, 235)), float(Uniform(rng, 20, 235)),
               float(Uniform(rng, 20, 235))};
  const double tone = Uniform(rng, 0.45, 1.0);
  const Rgb skin{float(235 * tone), float(190 * tone), float(160 * tone)};
  const double hair_tone = Uniform(rng, 0.05, 0.6);
  const Rgb hair{float(120 * hair_tone), float(80 * hair_tone),
                 float(50 * hair_tone)};
  const double scale = Uniform(rng, 0.82, 0.98);

  const double yaw = pose.yaw, pitch = pose.pitch;
  const double cr = std::cos(pose.roll), sr = std::sin(pose.roll);
  const double face_rx = 0.46 * std::max(0.0, (std::cos(yaw) + 0.25) / 1.25);
  const double face_cx = 0.30 * std::sin(yaw);
  const double face_cy = 0.08 + 0.12 * std::sin(pitch);

  struct Feature {
    double x, y, rx, ry;
    bool visible;
  };
  auto eye = [&](double offset) {
    const double a = yaw + offset;
    return Feature{0.48 * std::sin(a), -0.02 + 0.3 * std::sin(pitch), 0.09,
                   0.07, std::cos(a) > 0.1};
  };
  const Feature eyes[] = {eye(-0.45), eye(0.45)};
  const Feature nose{0.62 * std::sin(yaw), 0.18 + 0.32 * std::sin(pitch),
                     0.07, 0.09, std::cos(yaw) > 0.0};
  const Feature mouth{0.45 * std::sin(yaw), 0.38 + 0.25 * std::sin(pitch),
                      0.2 * std::max(0.0, std::cos(yaw)), 0.04,
                      std::cos(yaw) > 0.2};
  auto inside = [](const Feature& f, double u, double v) {
    if (!f.visible || f.rx <= 0.0) return false;
    const double du = (u - f.x) / f.rx, dv = (v - f.y) / f.ry;
    return du * du + dv * dv <= 1.0;
  };

  Image im(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = ((x + 0.5) / size * 2.0 - 1.0) / scale;
      const double py = ((y + 0.5) / size * 2.0 - 1.0) / scale;
      // undo the in-plane rotation
      const double u = cr * px + sr * py;
      const double v = -sr * px + cr * py;
      Rgb c = bg;
      const double hu = u / 0.66, hv = (v + 0.04) / 0.8;
      const double hr = hu * hu + hv * hv;
      if (hr <= 1.0) {
        c = hair;
        const double fu = face_rx > 0 ? (u - face_cx) / face_rx : 1e9;
        const double fv = (v - face_cy) / 0.6;
        const double fr = fu * fu + fv * fv;
        if (fr <= 1.0) {
          // brighter toward the facing direction
          const double shade =
              0.7 + 0.3 * (1.0 - fr) + 0.1 * Sign(yaw) * (u - face_cx);
          for (int k = 0; k < 3; ++k) {
            c[k] = static_cast<float>(std::clamp(skin[k] * shade, 0.0, 255.0));
          }
          if (inside(nose, u, v)) {
            for (int k = 0; k < 3; ++k) c[k] *= 0.6f;
          }
          for (const auto& e : eyes) {
            if (inside(e, u, v)) c = {25.0f, 20.0f, 20.0f};
          }
          if (inside(mouth, u, v)) c = {150.0f, 40.0f, 45.0f};
        }
      }
      for (int k = 0; k < 3; ++k) im.at(y, x, k) = c[k];
    }
  }
  return im;
}

std::vector<LabeledHeadImage> ProceduralHeadSet(int n, uint64_t seed) {
  if (n < 0) throw std::invalid_argument("head count must be >= 0");
  std::mt19937_64 rng(seed);
  std::vector<LabeledHeadImage> heads;
  heads.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto pose = PoseAngles::FromNormalized(
        Uniform(rng, -0.5, 0.5), Uniform(rng, -0.2, 0.2),
        Uniform(rng, -0.1, 0.1));
    const uint64_t style = rng();
    heads.push_back({RenderProceduralHead(pose, style), pose,
                     "procedural-" + std::to_string(i)});
  }
  return heads;
}

std::vector<Image> ReplicateToSequence(const LabeledHeadImage& head, int K,
                                       const AugmentationSpec& aug,
                                       uint64_t seed) {
  if (K < 2) throw std::invalid_argument("replication needs K >= 2");
  aug.Validate();
  const Image base = ResizeTo64(head.image);
  std::mt19937_64 rng(seed);
  std::vector<Image> out;
  out.reserve(K);
  for (int k = 0; k < K; ++k) {
    if (k == K / 2 - 1 || k == K / 2 || aug.is_identity()) {
      out.push_back(base);
      continue;
    }
    const double dx = Uniform(rng, -aug.max_shift, aug.max_shift);
    const double dy = Uniform(rng, -aug.max_shift, aug.max_shift);
    const double zoom = Uniform(rng, 1.0 - aug.max_zoom, 1.0 + aug.max_zoom);
    const double gain = Uniform(rng, 1.0 - aug.max_brightness_delta,
                                1.0 + aug.max_brightness_delta);
    const double side = kCropSize / zoom;
    const double cx = kCropSize / 2.0 - dx, cy = kCropSize / 2.0 - dy;
    Image warped = CropAndResize(
        base, BoundingBox(cx - side / 2, cy - side / 2, cx + side / 2,
                          cy + side / 2));
    for (float& v : warped.data()) {
      v = static_cast<float>(std::clamp(v * gain, 0.0, 255.0));
    }
    out.push_back(std::move(warped));
  }
  return out;
}

std::optional<TrackPairSample> MakePositivePair(const LabeledHeadImage& a,
                                                const LabeledHeadImage& b,
                                                const PairPlacement& placement,
                                                const SynthConfig& config,
                                                uint64_t seed) {
  config.Validate();
  const bool a_left = IsLeftOf(placement.first, placement.second);
  const LabeledHeadImage& left = a_left ? a : b;
  const LabeledHeadImage& right = a_left ? b : a;
  const BoundingBox& left_box = a_left ? placement.first : placement.second;
  const BoundingBox& right_box = a_left ? placement.second : placement.first;
  if (!LaeoCompatible(left.pose, right.pose, config.compatibility)) {
    return std::nullopt;
  }
  TrackPairSample s;
  s.left_crops = Normalized(
      ReplicateToSequence(left, config.K, config.augment, DeriveSeed(seed, 1)));
  s.right_crops = Normalized(ReplicateToSequence(right, config.K,
                                                 config.augment,
                                                 DeriveSeed(seed, 2)));
  std::vector<BoundingBox> heads{left_box, right_box};
  heads.insert(heads.end(), placement.others.begin(), placement.others.end());
  s.head_map = RenderHeadMap(heads, 0, 1, placement.frame, config.head_map);
  s.geometry = ComputeGeometryTuple(left_box, right_box, placement.frame);
  s.label = PairLabel::kLaeo;
  return s;
}

std::optional<TrackPairSample> MakePositivePair(const LabeledHeadImage& a,
                                                const LabeledHeadImage& b,
                                                const SynthConfig& config,
                                                uint64_t seed) {
  std::mt19937_64 rng(DeriveSeed(seed, 0));
  const PairPlacement placement = SamplePlacement(config, rng);
  const bool mirror = config.augment.mirror &&
                      std::bernoulli_distribution(0.5)(rng);
  if (mirror) {
    const LabeledHeadImage ma = Mirrored(a), mb = Mirrored(b);
    return ma.pose.yaw >= mb.pose.yaw
               ? MakePositivePair(ma, mb, placement, config, seed)
               : MakePositivePair(mb, ma, placement, config, seed);
  }
  return a.pose.yaw >= b.pose.yaw
             ? MakePositivePair(a, b, placement, config, seed)
             : MakePositivePair(b, a, placement, config, seed);
}

std::string_view ToString(NegativeMode m) {
  switch (m) {
    case NegativeMode::kMirrorOne:
      return "mirror_one";
    case NegativeMode::kSameDirection:
      return "same_direction";
    case NegativeMode::kInconsistentGeometry:
      return "inconsistent_geometry";
  }
  return "unknown";
}

NegativeMode NegativeModeFromString(std::string_view s) {
  for (auto m : {NegativeMode::kMirrorOne, NegativeMode::kSameDirection,
                 NegativeMode::kInconsistentGeometry}) {
    if (ToString(m) == s) return m;
  }
  throw std::invalid_argument("unknown negative mode '" + std::string(s) +
                              "'");
}

TrackPairSample MirrorOne(const TrackPairSample& positive, bool flip_left) {
  TrackPairSample s = positive;
  for (auto& crop : flip_left ? s.left_crops : s.right_crops) {
    crop = crop.FlippedHorizontally();
  }
  s.label = PairLabel::kNotLaeo;
  return s;
}

TrackPairSample MakeNegativePair(const LabeledHeadImage& a,
                                 const LabeledHeadImage& b, NegativeMode mode,
                                 const SynthConfig& config, uint64_t seed) {
  switch (mode) {
    case NegativeMode::kMirrorOne: {
      auto pos = MakePositivePair(a, b, config, seed);
      if (!pos) throw std::invalid_argument("mirror_one needs a LAEO pair");
      std::mt19937_64 rng(DeriveSeed(seed, 3));
      return MirrorOne(*pos, std::bernoulli_distribution(0.5)(rng));
    }
    case NegativeMode::kSameDirection: {
      const double sa = Sign(a.pose.yaw), sb = Sign(b.pose.yaw);
      if (sa == 0.0 || sa != sb) {
        throw std::invalid_argument("same_direction needs equal yaw signs");
      }
      config.Validate();
      std::mt19937_64 rng(DeriveSeed(seed, 0));
      const PairPlacement p = SamplePlacement(config, rng);
      TrackPairSample s;
      s.left_crops = Normalized(
          ReplicateToSequence(a, config.K, config.augment, DeriveSeed(seed, 1)));
      s.right_crops = Normalized(
          ReplicateToSequence(b, config.K, config.augment, DeriveSeed(seed, 2)));
      std::vector<BoundingBox> heads{p.first, p.second};
      heads.insert(heads.end(), p.others.begin(), p.others.end());
      s.head_map = RenderHeadMap(heads, 0, 1, p.frame, config.head_map);
      s.geometry = ComputeGeometryTuple(p.first, p.second, p.frame);
      s.label = PairLabel::kNotLaeo;
      return s;
    }
    case NegativeMode::kInconsistentGeometry: {
      // The two heads trade boxes, so each looks away from the other.
      auto pos = MakePositivePair(a, b, config, seed);
      if (!pos) {
        throw std::invalid_argument("inconsistent_geometry needs a LAEO pair");
      }
      TrackPairSample s = std::move(*pos);
      std::swap(s.left_crops, s.right_crops);
      s.label = PairLabel::kNotLaeo;
      return s;
    }
  }
  throw std::invalid_argument("unknown negative mode");
}

SyntheticCorpus GenerateSyntheticCorpus(
    const std::vector<LabeledHeadImage>& heads, int n_pos, int n_neg,
    const SynthConfig& config, uint64_t seed) {
  if (heads.size() < 2) {
    throw std::invalid_argument("synthetic corpus needs at least two heads");
  }
  if (n_pos < 0 || n_neg < 0) {
    throw std::invalid_argument("sample counts must be >= 0");
  }
  config.Validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, heads.size() - 1);
  const int max_attempts = 10000;

  auto draw = [&](auto&& accept) -> std::pair<size_t, size_t> {
    for (int t = 0; t < max_attempts; ++t) {
      const size_t i = pick(rng), j = pick(rng);
      if (i != j && accept(heads[i], heads[j])) return {i, j};
    }
    throw std::runtime_error("could not draw a suitable head pair");
  };
  auto compatible = [&](const LabeledHeadImage& x, const LabeledHeadImage& y) {
    const auto& l = x.pose.yaw >= y.pose.yaw ? x : y;
    const auto& r = x.pose.yaw >= y.pose.yaw ? y : x;
    return LaeoCompatible(l.pose, r.pose, config.compatibility) ||
           (config.augment.mirror &&
            LaeoCompatible(Mirrored(r).pose, Mirrored(l).pose,
                           config.compatibility));
  };
  auto same_dir = [](const LabeledHeadImage& x, const LabeledHeadImage& y) {
    return Sign(x.pose.yaw) != 0.0 && Sign(x.pose.yaw) == Sign(y.pose.yaw);
  };

  SyntheticCorpus corpus;
  uint64_t stream = 100;
  for (int k = 0; k < n_pos; ++k) {
    for (;;) {
      const auto [i, j] = draw(compatible);
      auto s = MakePositivePair(heads[i], heads[j], config,
                                DeriveSeed(seed, stream++));
      if (!s) continue;  // mirrored draw may fail the predicate
      corpus.samples.push_back(std::move(*s));
      corpus.provenance.push_back("pos " + heads[i].source_id + " " +
                                  heads[j].source_id);
      break;
    }
  }
  const NegativeMode modes[] = {NegativeMode::kMirrorOne,
                                NegativeMode::kSameDirection,
                                NegativeMode::kInconsistentGeometry};
  for (int k = 0; k < n_neg; ++k) {
    const NegativeMode mode = modes[k % 3];
    for (;;) {
      const auto [i, j] = mode == NegativeMode::kSameDirection
                              ? draw(same_dir)
                              : draw(compatible);
      const uint64_t s = DeriveSeed(seed, stream++);
      if (mode != NegativeMode::kSameDirection &&
          !MakePositivePair(heads[i], heads[j], config, s)) {
        continue;
      }
      corpus.samples.push_back(
          MakeNegativePair(heads[i], heads[j], mode, config, s));
      corpus.provenance.push_back(std::string(ToString(mode)) + " " +
                                  heads[i].source_id + " " +
                                  heads[j].source_id);
      break;
    }
  }
  return corpus;
}

std::vector<PoseSequence> MakePoseSequences(
    const std::vector<LabeledHeadImage>& heads, int K,
    const AugmentationSpec& aug, uint64_t seed) {
  std::vector<PoseSequence> out;
  out.reserve(heads.size());
  for (size_t i = 0; i < heads.size(); ++i) {
    out.push_back({Normalized(ReplicateToSequence(heads[i], K, aug,
                                                  DeriveSeed(seed, i))),
                   heads[i].pose});
  }
  return out;
}

std::vector<LabeledHeadImage> LoadPoseList(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose list " + path.string());
  std::vector<LabeledHeadImage> heads;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string image_path;
    double x1, y1, x2, y2, yaw, pitch, roll;
    if (!(fields >> image_path >> x1 >> y1 >> x2 >> y2 >> yaw >> pitch >>
          roll)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'image x1 y1 x2 y2 yaw pitch roll'");
    }
    try {
      const Image frame = ReadPpm(path.parent_path() / image_path);
      heads.push_back({CropAndResize(frame, BoundingBox(x1, y1, x2, y2)),
                       PoseAngles(yaw, pitch, roll),
                       image_path + "@" + std::to_string(line_no)});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return heads;
}

}  // namespace laeo
