#ifndef LAEO_HEADMAP_HPP_
#define LAEO_HEADMAP_HPP_

#include <span>

#include "laeo/core.hpp"

namespace laeo {

// Channel 0 holds the left target head, channel 1 the right target head,
// channel 2 every other head in the frame.
struct HeadMapSpec {
  int map_size = kCropSize;
  double sigma_factor = 0.5;  // Gaussian sigma as a fraction of head width

  void Validate() const;
};

// Renders the pair-context map for one frame. Each head is an unnormalized
// isotropic Gaussian (peak 1) at its box center, scaled from frame to map
// coordinates. Gaussians are truncated at 3 sigma, values under 1e-4 are
// dropped, and overlapping heads in one channel are summed then clipped to 1.
Image RenderHeadMap(std::span<const BoundingBox> heads, size_t left_idx,
                    size_t right_idx, const FrameRect& frame,
                    const HeadMapSpec& spec = {});

// Displacement from left to right head center in frame-normalized units, plus
// the left/right width ratio.
GeometryTuple ComputeGeometryTuple(const BoundingBox& left,
                                   const BoundingBox& right,
                                   const FrameRect& frame);

// Debug view with the usual color coding: left head blue, right head green,
// other heads red. Values are scaled to [0,255].
Image HeadMapToRgb(const Image& map);

}  // namespace laeo

#endif  // LAEO_HEADMAP_HPP_
