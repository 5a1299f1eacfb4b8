#ifndef LAEO_TRACKER_HPP_
#define LAEO_TRACKER_HPP_

#include <string_view>
#include <vector>

#include "laeo/core.hpp"

namespace laeo {

enum class LinkDirection { kForward, kBackward, kBidirectional };

std::string_view ToString(LinkDirection d);
LinkDirection LinkDirectionFromString(std::string_view s);

struct LinkerConfig {
  int top_n = 10;
  double overlap_threshold = 0.3;
  int max_gap = 5;
  LinkDirection direction = LinkDirection::kBidirectional;

  void Validate() const;
};

// Per-frame detection lists for one video over consecutive frames starting at
// first_frame. Frames without detections hold empty lists.
struct DetectionSequence {
  int first_frame = 0;
  std::vector<std::vector<HeadDetection>> frames;

  int num_frames() const { return static_cast<int>(frames.size()); }
};

// Keeps the top_n highest-scored detections per frame, ordered by score
// descending with ties broken by smaller x1.
DetectionSequence FilterTopN(const DetectionSequence& seq, int top_n);

// Greedy online linking. At every frame, live tracks (by descending mean
// detection score, then id) each claim the highest-scored unclaimed detection
// whose IoU with the track's last matched box reaches the overlap threshold.
// A track missing max_gap consecutive frames ends at its last match; shorter
// gaps are filled by linear interpolation. Unclaimed detections start new
// tracks. Input is filtered with FilterTopN first.
std::vector<HeadTrack> LinkTracks(const DetectionSequence& seq,
                                  const LinkerConfig& config);

// Links forward and on the time-reversed sequence, then pairs each forward
// track with at most one backward track whose mean IoU over their common
// frames reaches the overlap threshold (best pairs first). Paired frames get
// the corner-wise mean box. Every forward track is kept; backward tracks only
// contribute corrections, since each of their detections already belongs to
// a forward track.
std::vector<HeadTrack> LinkBidirectional(const DetectionSequence& seq,
                                         const LinkerConfig& config);

// Dispatches on config.direction.
std::vector<HeadTrack> RunLinker(const DetectionSequence& seq,
                                 const LinkerConfig& config);

// A K-frame window over which two tracks coexist. Indices refer to the track
// list passed to ExtractPairWindows; left/right is decided at center_frame.
struct PairWindow {
  size_t left_track = 0;
  size_t right_track = 0;
  int start_frame = 0;
  int K = kDefaultK;

  int center_frame() const { return start_frame + K / 2; }
  int end_frame() const { return start_frame + K - 1; }
};

std::vector<PairWindow> ExtractPairWindows(const std::vector<HeadTrack>& tracks,
                                           int K, int stride = 1);

}  // namespace laeo

#endif  // LAEO_TRACKER_HPP_
