#include "laeo/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace laeo {

BoundingBox::BoundingBox(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2)) {
    throw std::invalid_argument("bounding box coordinates must be finite");
  }
  if (!(x2 > x1) || !(y2 > y1)) {
    throw std::invalid_argument("degenerate bounding box");
  }
}

BoundingBox BoundingBox::FromXYWH(double x, double y, double w, double h) {
  return BoundingBox(x, y, x + w, y + h);
}

BoundingBox BoundingBox::Scaled(double factor) const {
  const double hw = width() * factor / 2.0;
  const double hh = height() * factor / 2.0;
  return BoundingBox(center_x() - hw, center_y() - hh, center_x() + hw,
                     center_y() + hh);
}

BoundingBox BoundingBox::Translated(double dx, double dy) const {
  return BoundingBox(x1_ + dx, y1_ + dy, x2_ + dx, y2_ + dy);
}

double IntersectionArea(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double Iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = IntersectionArea(a, b);
  if (inter == 0.0) return 0.0;
  // a.area() + b.area() is commutative, so the result is exactly symmetric.
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double IntersectionOverHeadArea(const BoundingBox& head,
                                const BoundingBox& body) {
  return std::clamp(IntersectionArea(head, body) / head.area(), 0.0, 1.0);
}

BoundingBox Lerp(const BoundingBox& a, const BoundingBox& b, double t) {
  auto mix = [t](double u, double v) { return u + (v - u) * t; };
  return BoundingBox(mix(a.x1(), b.x1()), mix(a.y1(), b.y1()),
                     mix(a.x2(), b.x2()), mix(a.y2(), b.y2()));
}

HeadDetection::HeadDetection(int frame, BoundingBox b, double s)
    : frame_index(frame), box(b), score(s) {
  if (frame < 0) throw std::invalid_argument("negative frame index");
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("detection score must lie in [0,1]");
  }
}

double HeadTrack::score() const {
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < per_frame_scores.size(); ++i) {
    if (!interpolated_mask[i]) {
      sum += per_frame_scores[i];
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

void HeadTrack::Validate() const {
  if (boxes.empty()) throw std::logic_error("empty head track");
  if (per_frame_scores.size() != boxes.size() ||
      interpolated_mask.size() != boxes.size() ||
      source_detection.size() != boxes.size()) {
    throw std::logic_error("head track arrays disagree in length");
  }
}

PoseAngles::PoseAngles(double yaw_rad, double pitch_rad, double roll_rad)
    : yaw(yaw_rad), pitch(pitch_rad), roll(roll_rad) {
  constexpr double pi = std::numbers::pi;
  for (double a : {yaw, pitch, roll}) {
    if (!(a >= -pi && a <= pi)) {
      throw std::invalid_argument("pose angle outside [-pi, pi]");
    }
  }
}

PoseAngles PoseAngles::FromNormalized(double yaw, double pitch, double roll) {
  constexpr double pi = std::numbers::pi;
  return PoseAngles(yaw * pi, pitch * pi, roll * pi);
}

std::array<double, 3> PoseAngles::normalized() const {
  constexpr double pi = std::numbers::pi;
  return {yaw / pi, pitch / pi, roll / pi};
}

std::string_view ToString(PairLabel label) {
  switch (label) {
    case PairLabel::kLaeo:
      return "laeo";
    case PairLabel::kNotLaeo:
      return "not_laeo";
    case PairLabel::kAmbiguous:
      return "ambiguous";
  }
  return "unknown";
}

PairLabel PairLabelFromString(std::string_view s) {
  if (s == "laeo") return PairLabel::kLaeo;
  if (s == "not_laeo") return PairLabel::kNotLaeo;
  if (s == "ambiguous") return PairLabel::kAmbiguous;
  throw std::invalid_argument("unknown pair label '" + std::string(s) + "'");
}

void TrackPairSample::Validate() const {
  if (left_crops.empty() || left_crops.size() != right_crops.size()) {
    throw std::logic_error("crop sequences must be nonempty and equal length");
  }
  auto check = [](const Image& im, const char* what) {
    if (im.height() != kCropSize || im.width() != kCropSize ||
        im.channels() != 3) {
      throw std::logic_error(std::string(what) + " must be 64x64x3");
    }
  };
  for (const auto& c : left_crops) check(c, "left crop");
  for (const auto& c : right_crops) check(c, "right crop");
  check(head_map, "head map");
  if (!(geometry.scale_ratio > 0.0)) {
    throw std::logic_error("geometry scale ratio must be positive");
  }
}

bool IsLeftOf(const BoundingBox& a, const BoundingBox& b) {
  if (a.center_x() != b.center_x()) return a.center_x() < b.center_x();
  return a.center_y() < b.center_y();
}

Image NormalizeCrop(const Image& pixels) {
  Image out = pixels;
  for (float& v : out.data()) v = v / 127.5f - 1.0f;
  return out;
}

uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer over the combined words
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Image CropAndResize(const Image& frame, const BoundingBox& box, int size) {
  const FrameRect bounds{0.0, 0.0, static_cast<double>(frame.width()),
                         static_cast<double>(frame.height())};
  if (box.x2() <= bounds.x0 || box.x1() >= bounds.width ||
      box.y2() <= bounds.y0 || box.y1() >= bounds.height) {
    throw std::invalid_argument("crop box lies entirely outside the frame");
  }
  const int channels = frame.channels();
  Image out(size, size, channels);
  const double sx = box.width() / size;
  const double sy = box.height() / size;
  auto pixel = [&](int y, int x, int c) -> double {
    if (x < 0 || y < 0 || x >= frame.width() || y >= frame.height()) {
      return 0.0;
    }
    return frame.at(y, x, c);
  };
  for (int i = 0; i < size; ++i) {
    const double y = box.y1() + (i + 0.5) * sy - 0.5;
    const double yf = std::floor(y);
    const int y0 = static_cast<int>(yf);
    const double wy = y - yf;
    for (int j = 0; j < size; ++j) {
      const double x = box.x1() + (j + 0.5) * sx - 0.5;
      const double xf = std::floor(x);
      const int x0 = static_cast<int>(xf);
      const double wx = x - xf;
      for (int c = 0; c < channels; ++c) {
        double v = (1.0 - wy) * (1.0 - wx) * pixel(y0, x0, c);
        if (wx > 0.0) v += (1.0 - wy) * wx * pixel(y0, x0 + 1, c);
        if (wy > 0.0) {
          v += wy * (1.0 - wx) * pixel(y0 + 1, x0, c);
          if (wx > 0.0) v += wy * wx * pixel(y0 + 1, x0 + 1, c);
        }
        out.at(i, j, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace laeo
