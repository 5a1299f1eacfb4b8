#ifndef LAEO_CORE_HPP_
#define LAEO_CORE_HPP_

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "laeo/image.hpp"

namespace laeo {

// Axis-aligned box in image pixels, corner form, origin top-left.
class BoundingBox {
 public:
  BoundingBox(double x1, double y1, double x2, double y2);

  static BoundingBox FromXYWH(double x, double y, double w, double h);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }
  double center_x() const { return (x1_ + x2_) / 2.0; }
  double center_y() const { return (y1_ + y2_) / 2.0; }

  // Grows (factor > 1) or shrinks the box about its center.
  BoundingBox Scaled(double factor) const;
  BoundingBox Translated(double dx, double dy) const;

  bool operator==(const BoundingBox&) const = default;

 private:
  double x1_, y1_, x2_, y2_;
};

double IntersectionArea(const BoundingBox& a, const BoundingBox& b);

// Intersection-over-union, symmetric, in [0,1].
double Iou(const BoundingBox& a, const BoundingBox& b);

// Intersection divided by the head area. Used when ground truth annotates
// whole bodies instead of heads.
double IntersectionOverHeadArea(const BoundingBox& head,
                                const BoundingBox& body);

// Corner-wise linear interpolation, t in [0,1].
BoundingBox Lerp(const BoundingBox& a, const BoundingBox& b, double t);

// The visible frame region in pixels. Heads are placed relative to its
// origin, so translating heads and frame together is a no-op for anything
// derived from relative positions.
struct FrameRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;
};

struct HeadDetection {
  int frame_index = 0;
  BoundingBox box;
  double score = 0.0;

  HeadDetection(int frame, BoundingBox b, double s);
};

// A head track over consecutive frames. Frames that were filled by
// interpolation are flagged in interpolated_mask. source_detection holds the
// per-frame index into the (filtered) detection list of that frame, or -1 for
// interpolated frames.
struct HeadTrack {
  int track_id = 0;
  int start_frame = 0;
  std::vector<BoundingBox> boxes;
  std::vector<double> per_frame_scores;
  std::vector<bool> interpolated_mask;
  std::vector<int> source_detection;

  int length() const { return static_cast<int>(boxes.size()); }
  int end_frame() const { return start_frame + length() - 1; }
  bool covers(int frame) const {
    return frame >= start_frame && frame <= end_frame();
  }
  const BoundingBox& box_at(int frame) const {
    return boxes.at(static_cast<size_t>(frame - start_frame));
  }
  // Mean score over non-interpolated frames.
  double score() const;

  // Throws std::logic_error when the per-frame arrays disagree in length or
  // the track is empty.
  void Validate() const;
};

// Head orientation in radians. Positive yaw means the head is turned toward
// the right side of the image.
struct PoseAngles {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  PoseAngles() = default;
  PoseAngles(double yaw_rad, double pitch_rad, double roll_rad);

  static PoseAngles FromNormalized(double yaw, double pitch, double roll);

  // Angles divided by pi, each in [-1,1].
  std::array<double, 3> normalized() const;
};

struct GeometryTuple {
  double dx = 0.0;
  double dy = 0.0;
  double scale_ratio = 1.0;  // left width / right width
};

enum class PairLabel { kNotLaeo = 0, kLaeo = 1, kAmbiguous = 2 };

std::string_view ToString(PairLabel label);
PairLabel PairLabelFromString(std::string_view s);

inline constexpr int kCropSize = 64;
inline constexpr int kDefaultK = 10;

// Two aligned K-frame head-crop sequences plus the pair context. Crops are
// 64x64x3 with values in [-1,1]; the head map is 64x64x3 with values in [0,1].
struct TrackPairSample {
  std::vector<Image> left_crops;
  std::vector<Image> right_crops;
  Image head_map;
  GeometryTuple geometry;
  PairLabel label = PairLabel::kNotLaeo;

  int K() const { return static_cast<int>(left_crops.size()); }
  void Validate() const;
};

// Independent sub-seed for stream `stream` of a run seeded with `seed`.
uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

// Left/right ordering of two heads in the same frame: smaller center x is
// left, ties go to the smaller center y. Returns true when a is left of b.
bool IsLeftOf(const BoundingBox& a, const BoundingBox& b);

// Maps [0,255] pixel values to [-1,1].
Image NormalizeCrop(const Image& pixels);

// Bilinear resize of the boxed region to size x size. Samples falling outside
// the frame read as zero. Throws std::invalid_argument when the box does not
// intersect the frame at all.
Image CropAndResize(const Image& frame, const BoundingBox& box,
                    int size = kCropSize);

}  // namespace laeo

#endif  // LAEO_CORE_HPP_
