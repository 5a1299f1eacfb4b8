#ifndef LAEO_SYNTHGEN_HPP_
#define LAEO_SYNTHGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "laeo/core.hpp"
#include "laeo/headmap.hpp"

namespace laeo {

struct LabeledHeadImage {
  Image image;  // RGB, [0,255]
  PoseAngles pose;
  std::string source_id;
};

struct AugmentationSpec {
  double max_shift = 4.0;              // pixels, on the 64x64 crop
  double max_zoom = 0.05;              // zoom drawn from [1 - z, 1 + z]
  double max_brightness_delta = 0.10;  // gain drawn from [1 - b, 1 + b]
  bool mirror = false;  // randomly mirror whole synthetic scenes

  void Validate() const;
  bool is_identity() const {
    return max_shift == 0.0 && max_zoom == 0.0 && max_brightness_delta == 0.0;
  }
};

// Normalized-unit thresholds of the mutual-gaze pose test.
struct CompatibilitySpec {
  double yaw_margin = 0.1;
  double max_pitch_diff = 0.25;

  void Validate() const;
};

// True when a head looking right sits on the left and one looking left sits
// on the right, with similar pitch.
bool LaeoCompatible(const PoseAngles& left, const PoseAngles& right,
                    const CompatibilitySpec& spec = {});

// Boxes for heads a and b (and optional bystanders) in a virtual frame.
struct PairPlacement {
  FrameRect frame;
  BoundingBox first;
  BoundingBox second;
  std::vector<BoundingBox> others;
};

struct SynthConfig {
  int K = kDefaultK;
  double frame_width = 640.0;
  double frame_height = 360.0;
  double min_head_width = 40.0;
  double max_head_width = 110.0;
  int max_bystanders = 2;
  CompatibilitySpec compatibility;
  AugmentationSpec augment;
  HeadMapSpec head_map;

  void Validate() const;
};

// Random placement with the first box strictly left of the second.
PairPlacement SamplePlacement(const SynthConfig& config, std::mt19937_64& rng);

// Renders a 64x64 cartoon head at the given pose. style_seed varies skin,
// hair, background and head size.
Image RenderProceduralHead(const PoseAngles& pose, uint64_t style_seed,
                           int size = kCropSize);

// n heads with random poses (|yaw| <= 0.5, |pitch| <= 0.2, |roll| <= 0.1 in
// normalized units).
std::vector<LabeledHeadImage> ProceduralHeadSet(int n, uint64_t seed);

// K pixel-range 64x64 replicas of the head. The two middle replicas
// (K/2 - 1 and K/2) equal the head resized to 64x64; the others get an
// independent shift, zoom and brightness change. Throws when K < 2.
std::vector<Image> ReplicateToSequence(const LabeledHeadImage& head, int K,
                                       const AugmentationSpec& aug,
                                       uint64_t seed);

// Builds a positive sample with a in placement.first and b in
// placement.second. Whichever box is further left holds the left head. Returns nullopt when the poses are
// not compatible under that ordering.
std::optional<TrackPairSample> MakePositivePair(
    const LabeledHeadImage& a, const LabeledHeadImage& b,
    const PairPlacement& placement, const SynthConfig& config,
    uint64_t seed);

// Same, with a sampled placement that puts the head with the larger yaw on
// the left.
std::optional<TrackPairSample> MakePositivePair(const LabeledHeadImage& a,
                                                const LabeledHeadImage& b,
                                                const SynthConfig& config,
                                                uint64_t seed);

enum class NegativeMode { kMirrorOne, kSameDirection, kInconsistentGeometry };

std::string_view ToString(NegativeMode m);
NegativeMode NegativeModeFromString(std::string_view s);

// Flips one head's crop sequence horizontally and relabels as negative.
TrackPairSample MirrorOne(const TrackPairSample& positive, bool flip_left);

// kMirrorOne and kInconsistentGeometry need a compatible (a, b) pair and
// throw std::invalid_argument otherwise. kSameDirection needs yaws of the
// same strict sign.
TrackPairSample MakeNegativePair(const LabeledHeadImage& a,
                                 const LabeledHeadImage& b, NegativeMode mode,
                                 const SynthConfig& config, uint64_t seed);

struct SyntheticCorpus {
  std::vector<TrackPairSample> samples;
  std::vector<std::string> provenance;  // "pos a b" / "<mode> a b" per sample
};

// Balanced corpus drawn from the head set: n_pos positives then n_neg
// negatives cycling through the three modes.
SyntheticCorpus GenerateSyntheticCorpus(
    const std::vector<LabeledHeadImage>& heads, int n_pos, int n_neg,
    const SynthConfig& config, uint64_t seed);

// A K-crop sequence with its pose label for head-pose pretraining.
struct PoseSequence {
  std::vector<Image> crops;  // normalized to [-1,1]
  PoseAngles pose;
};

std::vector<PoseSequence> MakePoseSequences(
    const std::vector<LabeledHeadImage>& heads, int K,
    const AugmentationSpec& aug, uint64_t seed);

// Reads a pose list with one head per line:
//   image_path x1 y1 x2 y2 yaw pitch roll
// Angles are in radians, image paths (binary PPM) relative to the list file.
// Blank lines and lines starting with '#' are skipped.
std::vector<LabeledHeadImage> LoadPoseList(const std::filesystem::path& path);

}  // namespace laeo

#endif  // LAEO_SYNTHGEN_HPP_
