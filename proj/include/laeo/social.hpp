#ifndef LAEO_SOCIAL_HPP_
#define LAEO_SOCIAL_HPP_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "laeo/eval.hpp"

namespace laeo {

// Temporal extent of one head track.
struct TrackSpan {
  std::string video_id;
  int track_id = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
};

using TrackKey = std::pair<std::string, int>;  // (video_id, track_id)

// Track-to-character assignment. Labels without a video apply to the track id
// in every video; a per-video entry takes precedence.
struct CharacterLabels {
  std::map<TrackKey, std::string> by_track;  // "" marks a dropped track
  std::map<int, std::string> any_video;

  // Character of a track, or nullptr when unlabeled.
  const std::string* Find(const std::string& video_id, int track_id) const;
};

// Reads "track_id,name" or "video_id,track_id,name" rows (a header row is
// optional). Tracks labeled WRONG or IGNORED are left out. Errors cite the
// line number.
CharacterLabels ReadCharacterLabels(const std::filesystem::path& path);
CharacterLabels ParseCharacterLabels(std::string_view csv,
                                     std::string_view source = "<labels>");

using CharacterPair = std::pair<std::string, std::string>;  // a < b

// Frames (per video) in which both characters have an active track.
std::map<CharacterPair, int> CoOccurrence(std::span<const TrackSpan> tracks,
                                          const CharacterLabels& labels);

struct SocialEdge {
  std::string a, b;  // a < b
  int cooccur_frames = 0;
  int laeo_frames = 0;
  double ratio = 0.0;            // laeo_frames / cooccur_frames
  double mean_laeo_score = 0.0;  // graph weight
};

// Aggregates per-frame pair scores into one edge per co-occurring character
// pair. A frame's pair score is the highest score among track pairs of the
// two characters, 0 when none was scored.
std::vector<SocialEdge> Friendsness(std::span<const TrackSpan> tracks,
                                    const CharacterLabels& labels,
                                    std::span<const FramePairScore> scores,
                                    double laeo_threshold = 0.5);

struct SocialGraph {
  std::vector<std::string> nodes;  // sorted
  std::vector<SocialEdge> edges;   // weight desc, then (a, b) ascending
};

SocialGraph BuildGraph(std::vector<std::string> characters,
                       std::vector<SocialEdge> edges);

// {nodes:[...], edges:[{a,b,weight,ratio,frames,laeo_frames}]}
std::string GraphToJson(const SocialGraph& g);
SocialGraph GraphFromJson(std::string_view json);

// Rank-ordered edge table.
std::string EdgeTableCsv(const SocialGraph& g);

// Circular layout; edge stroke width grows with the weight.
std::string GraphToSvg(const SocialGraph& g, int size = 600);

}  // namespace laeo

#endif  // LAEO_SOCIAL_HPP_
