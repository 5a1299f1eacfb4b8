#include "laeo/tracker.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

namespace laeo {

std::string_view ToString(LinkDirection d) {
  switch (d) {
    case LinkDirection::kForward:
      return "forward";
    case LinkDirection::kBackward:
      return "backward";
    case LinkDirection::kBidirectional:
      return "bidirectional";
  }
  return "unknown";
}

LinkDirection LinkDirectionFromString(std::string_view s) {
  if (s == "forward") return LinkDirection::kForward;
  if (s == "backward") return LinkDirection::kBackward;
  if (s == "bidirectional") return LinkDirection::kBidirectional;
  throw std::invalid_argument("unknown link direction '" + std::string(s) +
                              "'");
}

void LinkerConfig::Validate() const {
  if (top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  if (!(overlap_threshold > 0.0 && overlap_threshold < 1.0)) {
    throw std::invalid_argument("overlap threshold must lie in (0,1)");
  }
  if (max_gap < 1) throw std::invalid_argument("max_gap must be >= 1");
}

DetectionSequence FilterTopN(const DetectionSequence& seq, int top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  DetectionSequence out;
  out.first_frame = seq.first_frame;
  out.frames.reserve(seq.frames.size());
  for (const auto& dets : seq.frames) {
    std::vector<HeadDetection> kept = dets;
    std::stable_sort(kept.begin(), kept.end(),
                     [](const HeadDetection& a, const HeadDetection& b) {
                       if (a.score != b.score) return a.score > b.score;
                       return a.box.x1() < b.box.x1();
                     });
    if (kept.size() > static_cast<size_t>(top_n))
      kept.erase(kept.begin() + top_n, kept.end());
    out.frames.push_back(std::move(kept));
  }
  return out;
}

namespace {

struct Match {
  int frame_offset;
  int detection;
};

struct LiveTrack {
  int id;
  std::vector<Match> matches;
  double score_sum = 0.0;
  int misses = 0;
  bool alive = true;

  double mean_score() const { return score_sum / matches.size(); }
};

HeadTrack Materialize(const LiveTrack& live, const DetectionSequence& seq) {
  HeadTrack track;
  track.track_id = live.id;
  track.start_frame = seq.first_frame + live.matches.front().frame_offset;
  for (size_t m = 0; m < live.matches.size(); ++m) {
    const Match& cur = live.matches[m];
    const HeadDetection& det = seq.frames[cur.frame_offset][cur.detection];
    if (m > 0) {
      const Match& prev = live.matches[m - 1];
      const HeadDetection& pdet =
          seq.frames[prev.frame_offset][prev.detection];
      const int gap = cur.frame_offset - prev.frame_offset;
      for (int g = 1; g < gap; ++g) {
        const double t = static_cast<double>(g) / gap;
        track.boxes.push_back(Lerp(pdet.box, det.box, t));
        track.per_frame_scores.push_back(pdet.score +
                                         (det.score - pdet.score) * t);
        track.interpolated_mask.push_back(true);
        track.source_detection.push_back(-1);
      }
    }
    track.boxes.push_back(det.box);
    track.per_frame_scores.push_back(det.score);
    track.interpolated_mask.push_back(false);
    track.source_detection.push_back(cur.detection);
  }
  return track;
}

DetectionSequence Reversed(const DetectionSequence& seq) {
  DetectionSequence rev;
  rev.first_frame = seq.first_frame;
  rev.frames.assign(seq.frames.rbegin(), seq.frames.rend());
  return rev;
}

// Maps a track linked on the reversed sequence back to forward time.
HeadTrack Unreverse(HeadTrack track, const DetectionSequence& seq) {
  const int last = seq.first_frame + seq.num_frames() - 1;
  const int end = track.end_frame();
  track.start_frame = seq.first_frame + (last - end);
  std::reverse(track.boxes.begin(), track.boxes.end());
  std::reverse(track.per_frame_scores.begin(), track.per_frame_scores.end());
  std::reverse(track.interpolated_mask.begin(), track.interpolated_mask.end());
  std::reverse(track.source_detection.begin(), track.source_detection.end());
  return track;
}

}  // namespace

std::vector<HeadTrack> LinkTracks(const DetectionSequence& input,
                                  const LinkerConfig& config) {
  config.Validate();
  const DetectionSequence seq = FilterTopN(input, config.top_n);
  std::vector<LiveTrack> tracks;
  for (int f = 0; f < seq.num_frames(); ++f) {
    const auto& dets = seq.frames[f];
    std::vector<bool> claimed(dets.size(), false);

    std::vector<size_t> order;
    for (size_t t = 0; t < tracks.size(); ++t) {
      if (tracks[t].alive) order.push_back(t);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const double sa = tracks[a].mean_score();
      const double sb = tracks[b].mean_score();
      if (sa != sb) return sa > sb;
      return tracks[a].id < tracks[b].id;
    });

    for (size_t t : order) {
      LiveTrack& track = tracks[t];
      const Match& last = track.matches.back();
      const BoundingBox& last_box =
          seq.frames[last.frame_offset][last.detection].box;
      int best = -1;
      for (size_t d = 0; d < dets.size(); ++d) {
        if (claimed[d]) continue;
        if (Iou(last_box, dets[d].box) < config.overlap_threshold) continue;
        if (best < 0 || dets[d].score > dets[best].score) {
          best = static_cast<int>(d);
        }
      }
      if (best >= 0) {
        claimed[best] = true;
        track.matches.push_back({f, best});
        track.score_sum += dets[best].score;
        track.misses = 0;
      } else if (++track.misses >= config.max_gap) {
        track.alive = false;
      }
    }

    for (size_t d = 0; d < dets.size(); ++d) {
      if (claimed[d]) continue;
      LiveTrack fresh{static_cast<int>(tracks.size()), {}, 0.0, 0, true};
      fresh.matches.push_back({f, static_cast<int>(d)});
      fresh.score_sum = dets[d].score;
      tracks.push_back(std::move(fresh));
    }
  }

  std::vector<HeadTrack> out;
  out.reserve(tracks.size());
  for (const auto& live : tracks) out.push_back(Materialize(live, seq));
  return out;
}

std::vector<HeadTrack> LinkBidirectional(const DetectionSequence& seq,
                                         const LinkerConfig& config) {
  std::vector<HeadTrack> forward = LinkTracks(seq, config);
  std::vector<HeadTrack> backward;
  for (auto& t : LinkTracks(Reversed(seq), config)) {
    backward.push_back(Unreverse(std::move(t), seq));
  }

  struct Candidate {
    double mean_iou;
    size_t f;
    size_t b;
  };
  std::vector<Candidate> candidates;
  for (size_t f = 0; f < forward.size(); ++f) {
    for (size_t b = 0; b < backward.size(); ++b) {
      const int lo = std::max(forward[f].start_frame, backward[b].start_frame);
      const int hi = std::min(forward[f].end_frame(), backward[b].end_frame());
      if (lo > hi) continue;
      double sum = 0.0;
      for (int fr = lo; fr <= hi; ++fr) {
        sum += Iou(forward[f].box_at(fr), backward[b].box_at(fr));
      }
      const double mean = sum / (hi - lo + 1);
      if (mean >= config.overlap_threshold) candidates.push_back({mean, f, b});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) {
              return std::tie(y.mean_iou, x.f, x.b) <
                     std::tie(x.mean_iou, y.f, y.b);
            });

  std::vector<bool> f_used(forward.size(), false);
  std::vector<bool> b_used(backward.size(), false);
  for (const Candidate& c : candidates) {
    if (f_used[c.f] || b_used[c.b]) continue;
    f_used[c.f] = b_used[c.b] = true;
    HeadTrack& fw = forward[c.f];
    const HeadTrack& bw = backward[c.b];
    const int lo = std::max(fw.start_frame, bw.start_frame);
    const int hi = std::min(fw.end_frame(), bw.end_frame());
    for (int fr = lo; fr <= hi; ++fr) {
      const BoundingBox& p = fw.box_at(fr);
      const BoundingBox& q = bw.box_at(fr);
      fw.boxes[fr - fw.start_frame] =
          BoundingBox((p.x1() + q.x1()) / 2.0, (p.y1() + q.y1()) / 2.0,
                      (p.x2() + q.x2()) / 2.0, (p.y2() + q.y2()) / 2.0);
    }
  }
  return forward;
}

std::vector<HeadTrack> RunLinker(const DetectionSequence& seq,
                                 const LinkerConfig& config) {
  switch (config.direction) {
    case LinkDirection::kForward:
      return LinkTracks(seq, config);
    case LinkDirection::kBackward: {
      std::vector<HeadTrack> out;
      for (auto& t : LinkTracks(Reversed(seq), config)) {
        out.push_back(Unreverse(std::move(t), seq));
      }
      return out;
    }
    case LinkDirection::kBidirectional:
      return LinkBidirectional(seq, config);
  }
  return {};
}

std::vector<PairWindow> ExtractPairWindows(const std::vector<HeadTrack>& tracks,
                                           int K, int stride) {
  if (K < 1) throw std::invalid_argument("window length K must be >= 1");
  if (stride < 1) throw std::invalid_argument("window stride must be >= 1");
  std::vector<PairWindow> windows;
  for (size_t i = 0; i < tracks.size(); ++i) {
    for (size_t j = i + 1; j < tracks.size(); ++j) {
      const int lo = std::max(tracks[i].start_frame, tracks[j].start_frame);
      const int hi = std::min(tracks[i].end_frame(), tracks[j].end_frame());
      for (int s = lo; s + K - 1 <= hi; s += stride) {
        PairWindow w;
        w.start_frame = s;
        w.K = K;
        const int c = w.center_frame();
        const bool i_left = IsLeftOf(tracks[i].box_at(c), tracks[j].box_at(c));
        w.left_track = i_left ? i : j;
        w.right_track = i_left ? j : i;
        windows.push_back(w);
      }
    }
  }
  return windows;
}

}  // namespace laeo
