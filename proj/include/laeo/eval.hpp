#ifndef LAEO_EVAL_HPP_
#define LAEO_EVAL_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "laeo/core.hpp"

namespace laeo {

struct ScoredPair {
  std::string video_id;
  int frame = 0;
  BoundingBox left_box{0, 0, 1, 1};
  BoundingBox right_box{0, 0, 1, 1};
  double score = 0.0;
};

struct GroundTruthPair {
  std::string video_id;
  int frame = 0;
  BoundingBox box_a{0, 0, 1, 1};
  BoundingBox box_b{0, 0, 1, 1};
  PairLabel label = PairLabel::kNotLaeo;
};

// How predicted heads are compared with annotated boxes.
enum class MatchMode { kIouHeads, kIohaBodies };

std::string_view ToString(MatchMode m);
MatchMode MatchModeFromString(std::string_view s);

// Both predicted heads overlap their annotated boxes by more than 0.5, in
// either pairing. Frame and video must agree.
bool MatchPair(const ScoredPair& pred, const GroundTruthPair& gt,
               MatchMode mode);

struct RankedPrediction {
  double score = 0.0;
  bool correct = false;
};

struct PrPoint {
  double threshold;
  double recall;
  double precision;
};

// Precision/recall at every distinct score threshold, highest first.
std::vector<PrPoint> PrCurve(std::span<const RankedPrediction> preds,
                             int num_positives);

// All-point interpolated average precision. Predictions with equal scores
// enter the ranking together. num_positives counts every ground-truth
// positive, matched or not; zero throws std::domain_error.
double ComputeAp(std::span<const RankedPrediction> preds, int num_positives);

struct EvalReport {
  std::optional<double> ap;  // empty when there are no positives
  int num_positives = 0;
  int num_predictions = 0;  // after dropping those matched to ambiguous pairs
  int true_positives = 0;
  std::vector<PrPoint> curve;
};

// Frame-level protocol: predictions are taken in score order (ties by frame,
// then left-box x1) and each claims at most one unclaimed LAEO pair of its
// frame. Predictions that only match ambiguous pairs are ignored; all other
// unmatched ones are false positives.
EvalReport EvaluateFrameLevel(std::span<const ScoredPair> preds,
                              std::span<const GroundTruthPair> gt,
                              MatchMode mode);

// Per-window score of one track pair.
struct WindowScore {
  std::string video_id;
  int left_track = 0;
  int right_track = 0;
  int start_frame = 0;
  int K = kDefaultK;
  double score = 0.0;

  int center_frame() const { return start_frame + K / 2; }
};

struct FramePairScore {
  std::string video_id;
  int left_track = 0;
  int right_track = 0;
  int frame = 0;
  double score = 0.0;
};

// Gives every frame covered by a track pair's windows the score of the
// nearest window center (ties to the earlier center). Output is ordered by
// video, pair, then frame.
std::vector<FramePairScore> FrameLevelScores(
    std::span<const WindowScore> windows);

// Centered moving average of length `window`, shrinking at the ends.
std::vector<double> SmoothScores(std::span<const double> scores,
                                 int window = 5);

// Maximum smoothed score over the per-pair frame-score sequences of a shot.
// Throws std::invalid_argument for an empty shot.
double ShotLevelScore(const std::vector<std::vector<double>>& pair_scores);

struct Shot {
  std::string video_id;
  std::string shot_id;
  int start_frame = 0;
  int end_frame = 0;
  PairLabel label = PairLabel::kNotLaeo;
};

// Shot-level protocol: one score per shot (0 when no pair was scored in it),
// LAEO shots are the positives, ambiguous shots are skipped.
EvalReport EvaluateShotLevel(std::span<const FramePairScore> frame_scores,
                             std::span<const Shot> shots);

}  // namespace laeo

#endif  // LAEO_EVAL_HPP_
