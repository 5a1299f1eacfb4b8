#include "laeo/headmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace laeo {
namespace {

constexpr double kTruncateSigmas = 3.0;
constexpr double kMinValue = 1e-4;

void AddGaussian(Image& map, int channel, const BoundingBox& head,
                 const FrameRect& frame, const HeadMapSpec& spec) {
  const double sx = spec.map_size / frame.width;
  const double sy = spec.map_size / frame.height;
  const double cx = (head.center_x() - frame.x0) * sx;
  const double cy = (head.center_y() - frame.y0) * sy;
  const double sigma = spec.sigma_factor * head.width() * sx;
  const double reach = kTruncateSigmas * sigma;
  const int x_lo = std::max(0, static_cast<int>(std::ceil(cx - reach)));
  const int x_hi =
      std::min(spec.map_size - 1, static_cast<int>(std::floor(cx + reach)));
  const int y_lo = std::max(0, static_cast<int>(std::ceil(cy - reach)));
  const int y_hi =
      std::min(spec.map_size - 1, static_cast<int>(std::floor(cy + reach)));
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (int y = y_lo; y <= y_hi; ++y) {
    const double ddy = y - cy;
    for (int x = x_lo; x <= x_hi; ++x) {
      const double ddx = x - cx;
      const double d2 = ddx * ddx + ddy * ddy;
      if (d2 > reach * reach) continue;
      const double v = std::exp(-d2 * inv_two_var);
      if (v < kMinValue) continue;
      map.at(y, x, channel) += static_cast<float>(v);
    }
  }
}

}  // namespace

void HeadMapSpec::Validate() const {
  if (map_size != kCropSize) {
    throw std::invalid_argument("head map size must be 64");
  }
  if (!(sigma_factor > 0.0)) {
    throw std::invalid_argument("head map sigma factor must be positive");
  }
}

Image RenderHeadMap(std::span<const BoundingBox> heads, size_t left_idx,
                    size_t right_idx, const FrameRect& frame,
                    const HeadMapSpec& spec) {
  spec.Validate();
  if (left_idx >= heads.size() || right_idx >= heads.size()) {
    throw std::out_of_range("head map target index out of range");
  }
  if (left_idx == right_idx) {
    throw std::invalid_argument("head map targets must be distinct");
  }
  if (!(frame.width > 0.0) || !(frame.height > 0.0)) {
    throw std::invalid_argument("frame size must be positive");
  }
  Image map(spec.map_size, spec.map_size, 3);
  for (size_t i = 0; i < heads.size(); ++i) {
    const int channel = i == left_idx ? 0 : i == right_idx ? 1 : 2;
    AddGaussian(map, channel, heads[i], frame, spec);
  }
  for (float& v : map.data()) v = std::min(v, 1.0f);
  return map;
}

GeometryTuple ComputeGeometryTuple(const BoundingBox& left,
                                   const BoundingBox& right,
                                   const FrameRect& frame) {
  if (!(frame.width > 0.0) || !(frame.height > 0.0)) {
    throw std::invalid_argument("frame size must be positive");
  }
  GeometryTuple g;
  g.dx = (right.center_x() - left.center_x()) / frame.width;
  g.dy = (right.center_y() - left.center_y()) / frame.height;
  g.scale_ratio = left.width() / right.width();
  return g;
}

Image HeadMapToRgb(const Image& map) {
  Image rgb(map.height(), map.width(), 3);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      rgb.at(y, x, 0) = 255.0f * map.at(y, x, 2);
      rgb.at(y, x, 1) = 255.0f * map.at(y, x, 1);
      rgb.at(y, x, 2) = 255.0f * map.at(y, x, 0);
    }
  }
  return rgb;
}

}  // namespace laeo
