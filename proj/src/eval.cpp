#include "laeo/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace laeo {
namespace {

double Overlap(const BoundingBox& head, const BoundingBox& annotated,
               MatchMode mode) {
  return mode == MatchMode::kIouHeads
             ? Iou(head, annotated)
             : IntersectionOverHeadArea(head, annotated);
}

}  // namespace

std::string_view ToString(MatchMode m) {
  return m == MatchMode::kIouHeads ? "iou_heads" : "ioha_bodies";
}

MatchMode MatchModeFromString(std::string_view s) {
  if (s == "iou_heads") return MatchMode::kIouHeads;
  if (s == "ioha_bodies") return MatchMode::kIohaBodies;
  throw std::invalid_argument("unknown match mode '" + std::string(s) + "'");
}

bool MatchPair(const ScoredPair& pred, const GroundTruthPair& gt,
               MatchMode mode) {
  if (pred.frame != gt.frame || pred.video_id != gt.video_id) return false;
  auto ok = [&](const BoundingBox& head, const BoundingBox& box) {
    return Overlap(head, box, mode) > 0.5;
  };
  return (ok(pred.left_box, gt.box_a) && ok(pred.right_box, gt.box_b)) ||
         (ok(pred.left_box, gt.box_b) && ok(pred.right_box, gt.box_a));
}

std::vector<PrPoint> PrCurve(std::span<const RankedPrediction> preds,
                             int num_positives) {
  if (num_positives <= 0) {
    throw std::domain_error("precision/recall undefined without positives");
  }
  std::vector<RankedPrediction> sorted(preds.begin(), preds.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  std::vector<PrPoint> curve;
  int tp = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == t; ++i) tp += sorted[i].correct;
    curve.push_back({t, static_cast<double>(tp) / num_positives,
                     static_cast<double>(tp) / static_cast<double>(i)});
  }
  return curve;
}

double ComputeAp(std::span<const RankedPrediction> preds, int num_positives) {
  const auto curve = PrCurve(preds, num_positives);
  // precision envelope from the right
  std::vector<double> env(curve.size());
  double best = 0.0;
  for (size_t k = curve.size(); k-- > 0;) {
    best = std::max(best, curve[k].precision);
    env[k] = best;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (size_t k = 0; k < curve.size(); ++k) {
    ap += (curve[k].recall - prev_recall) * env[k];
    prev_recall = curve[k].recall;
  }
  return ap;
}

EvalReport EvaluateFrameLevel(std::span<const ScoredPair> preds,
                              std::span<const GroundTruthPair> gt,
                              MatchMode mode) {
  using Key = std::pair<std::string, int>;
  std::map<Key, std::vector<size_t>> by_frame;
  EvalReport report;
  for (size_t g = 0; g < gt.size(); ++g) {
    by_frame[{gt[g].video_id, gt[g].frame}].push_back(g);
    report.num_positives += gt[g].label == PairLabel::kLaeo;
  }

  std::vector<size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::tuple(-preds[a].score, preds[a].frame,
                      preds[a].left_box.x1()) <
           std::tuple(-preds[b].score, preds[b].frame,
                      preds[b].left_box.x1());
  });

  std::vector<bool> claimed(gt.size(), false);
  std::vector<RankedPrediction> ranked;
  for (size_t p : order) {
    const ScoredPair& pred = preds[p];
    bool correct = false, ambiguous = false;
    const auto it = by_frame.find({pred.video_id, pred.frame});
    if (it != by_frame.end()) {
      for (size_t g : it->second) {
        if (!MatchPair(pred, gt[g], mode)) continue;
        if (gt[g].label == PairLabel::kLaeo && !claimed[g]) {
          claimed[g] = true;
          correct = true;
          break;
        }
        ambiguous |= gt[g].label == PairLabel::kAmbiguous;
      }
    }
    if (!correct && ambiguous) continue;
    ranked.push_back({pred.score, correct});
    report.true_positives += correct;
  }
  report.num_predictions = static_cast<int>(ranked.size());
  if (report.num_positives > 0) {
    report.curve = PrCurve(ranked, report.num_positives);
    report.ap = ComputeAp(ranked, report.num_positives);
  }
  return report;
}

std::vector<FramePairScore> FrameLevelScores(
    std::span<const WindowScore> windows) {
  using Key = std::tuple<std::string, int, int>;
  std::map<Key, std::vector<const WindowScore*>> groups;
  for (const auto& w : windows) {
    if (w.K < 1) throw std::invalid_argument("window length must be >= 1");
    groups[{w.video_id, std::min(w.left_track, w.right_track),
            std::max(w.left_track, w.right_track)}]
        .push_back(&w);
  }
  std::vector<FramePairScore> out;
  for (auto& [key, ws] : groups) {
    std::stable_sort(ws.begin(), ws.end(), [](const auto* a, const auto* b) {
      return a->center_frame() < b->center_frame();
    });
    int lo = ws.front()->start_frame, hi = lo;
    for (const auto* w : ws) {
      lo = std::min(lo, w->start_frame);
      hi = std::max(hi, w->start_frame + w->K - 1);
    }
    size_t near = 0;
    for (int f = lo; f <= hi; ++f) {
      // centers are sorted, so the nearest one only moves forward
      while (near + 1 < ws.size() &&
             std::abs(ws[near + 1]->center_frame() - f) <
                 std::abs(ws[near]->center_frame() - f)) {
        ++near;
      }
      const WindowScore& w = *ws[near];
      out.push_back({w.video_id, w.left_track, w.right_track, f, w.score});
    }
  }
  return out;
}

std::vector<double> SmoothScores(std::span<const double> scores, int window) {
  if (window < 1) throw std::invalid_argument("smoothing window must be >= 1");
  const int n = static_cast<int>(scores.size());
  const int half = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int a = std::max(0, i - half);
    const int b = std::min(n - 1, i + (window - 1 - half));
    double s = 0.0;
    for (int j = a; j <= b; ++j) s += scores[j];
    out[i] = s / (b - a + 1);
  }
  return out;
}

double ShotLevelScore(const std::vector<std::vector<double>>& pair_scores) {
  bool any = false;
  double best = 0.0;
  for (const auto& seq : pair_scores) {
    for (double v : SmoothScores(seq)) {
      best = any ? std::max(best, v) : v;
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("shot has no scored frames");
  return best;
}

EvalReport EvaluateShotLevel(std::span<const FramePairScore> frame_scores,
                             std::span<const Shot> shots) {
  EvalReport report;
  std::vector<RankedPrediction> ranked;
  for (const auto& shot : shots) {
    if (shot.label == PairLabel::kAmbiguous) continue;
    std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> pairs;
    for (const auto& fs : frame_scores) {
      if (fs.video_id != shot.video_id || fs.frame < shot.start_frame ||
          fs.frame > shot.end_frame)
        continue;
      pairs[{std::min(fs.left_track, fs.right_track),
             std::max(fs.left_track, fs.right_track)}]
          .push_back({fs.frame, fs.score});
    }
    double score = 0.0;
    if (!pairs.empty()) {
      std::vector<std::vector<double>> seqs;
      for (auto& [k, v] : pairs) {
        std::sort(v.begin(), v.end());
        std::vector<double> s;
        for (const auto& [f, x] : v) s.push_back(x);
        seqs.push_back(std::move(s));
      }
      score = ShotLevelScore(seqs);
    }
    const bool positive = shot.label == PairLabel::kLaeo;
    report.num_positives += positive;
    report.true_positives += positive;
    ranked.push_back({score, positive});
  }
  report.num_predictions = static_cast<int>(ranked.size());
  if (report.num_positives > 0) {
    report.curve = PrCurve(ranked, report.num_positives);
    report.ap = ComputeAp(ranked, report.num_positives);
  }
  return report;
}

}  // namespace laeo
