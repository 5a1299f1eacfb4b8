#ifndef LAEO_PIPELINE_HPP_
#define LAEO_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "laeo/losses.hpp"
#include "laeo/model.hpp"
#include "laeo/synthgen.hpp"

namespace laeo {

// Adaptive-moment optimizer over a list of parameter arrays.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  // Arrays whose group is in `frozen` are left untouched.
  void Step(std::vector<ParamArray>& arrays, const ParamGrads& grads,
            double lr, const std::set<ParamGroup>& frozen = {});

  // Updates applied to array `a` so far.
  long steps(size_t a) const { return a < t_.size() ? t_[a] : 0; }

 private:
  double beta1_, beta2_, eps_;
  std::vector<long> t_;
  std::vector<std::vector<double>> m_, v_;
};

struct PretrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-4;
  PoseLossWeights weights;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void Validate() const;
};

struct PretrainLogEntry {
  int epoch = 0;
  long step = 0;
  double train_loss = 0.0;  // mean batch loss, dropout on
  double eval_loss = 0.0;   // training set, inference mode
  double val_loss = 0.0;    // NaN without a validation set
  double lr = 0.0;
};

struct PretrainResult {
  LaeoNetParams params;  // head-pose group trained and marked frozen
  PoseHead head;
  std::vector<PretrainLogEntry> log;
};

// Fits the head-pose branch plus the pose output stage to the pose labels.
// Throws std::invalid_argument on an empty dataset and std::runtime_error on
// a non-finite loss.
PretrainResult PretrainHeadPose(const LaeoNet& net, LaeoNetParams params,
                                PoseHead head,
                                std::span<const PoseSequence> train,
                                std::span<const PoseSequence> validation,
                                const PretrainConfig& config, uint64_t seed);

// Mean inference-mode pose loss over a dataset.
double PoseDatasetLoss(const LaeoNet& net, const LaeoNetParams& params,
                       const PoseHead& head,
                       std::span<const PoseSequence> data,
                       const PoseLossWeights& weights = {});

struct TrainConfig {
  int batch_positives = 4;
  int batch_negatives = 4;
  int batch_hard = 1;
  double lr_init = 1e-4;
  double lr_factor = 0.2;
  int lr_patience = 5;  // validation checks without improvement
  double lr_min = 1e-8;
  int synthetic_only_epochs = 2;
  int curriculum_step_epochs = 2;
  double tau_start = 0.5;
  double tau_step = 0.1;
  bool freeze_head_pose = true;
  int epochs = 50;
  int steps_per_epoch = 0;  // 0: one pass over the larger label pool
  int refine_epochs = 0;    // extra epochs with validation added to real
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  int batch_size() const {
    return batch_positives + batch_negatives + batch_hard;
  }
  void Validate() const;
};

// Curriculum difficulty for an epoch, in [0,1].
double CurriculumTau(int epoch, const TrainConfig& config);

enum class PoolSource { kReal, kSynthetic };
std::string_view ToString(PoolSource s);

// Indices of positive and negative samples in one dataset.
struct LabelPool {
  std::vector<size_t> positives;
  std::vector<size_t> negatives;

  bool empty() const { return positives.empty() || negatives.empty(); }
};

// Ambiguous samples are left out.
LabelPool MakeLabelPool(std::span<const TrackPairSample> samples);

struct ScoredNegative {
  PoolSource source = PoolSource::kSynthetic;
  size_t index = 0;
  double score = 0.0;  // model p_LAEO
};

// Negatives the model scores at least 1 - tau.
std::vector<ScoredNegative> MineHardNegatives(
    std::span<const ScoredNegative> scored, double tau);

struct BatchEntry {
  PoolSource source = PoolSource::kSynthetic;
  size_t index = 0;
  int label = 0;
  bool hard = false;         // occupies the hard-negative slot
  bool substituted = false;  // hard slot filled by an ordinary negative
};

struct Batch {
  PoolSource source = PoolSource::kSynthetic;  // of the ordinary entries
  std::vector<BatchEntry> entries;
};

// Which pool feeds the ordinary entries of a step. Steps count from 1
// within an epoch; odd steps use real data once the synthetic-only phase is
// over. Without real data everything is synthetic.
PoolSource BatchSource(int epoch, int step, const TrainConfig& config,
                       bool real_available);

// Draws one batch with replacement. The hard slot takes a uniformly drawn
// entry of hard_pool (restricted to synthetic entries while the batch is
// synthetic-only), or an ordinary negative when none qualifies.
Batch ComposeBatch(const LabelPool& real, const LabelPool& synthetic,
                   std::span<const ScoredNegative> hard_pool, int epoch,
                   int step, const TrainConfig& config, uint64_t seed);

// Network inputs for one sample. With a frozen head-pose branch the crops
// are replaced by the branch's conv output.
struct CachedSample {
  nn::Volume left;
  nn::Volume right;
  bool features = false;
  nn::Volume head_map;
  GeometryTuple geometry;
  int label = 0;

  PairInput Input() const;
};

CachedSample CacheSample(const LaeoNet& net, const LaeoNetParams& params,
                         const TrackPairSample& sample, bool head_features);
std::vector<CachedSample> CacheSamples(const LaeoNet& net,
                                       const LaeoNetParams& params,
                                       std::span<const TrackPairSample> samples,
                                       bool head_features);

struct TrainLogEntry {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;       // mean batch loss over the epoch
  double val_ap = 0.0;     // NaN without validation positives
  double lr = 0.0;         // rate used during the epoch
  double train_acc = 0.0;  // inference mode, threshold 0.5
};

struct TrainHooks {
  std::function<void(int epoch, int step, const Batch&)> on_batch;
  std::function<void(int epoch, std::span<const ScoredNegative> hard_pool)>
      on_hard_pool;
  std::function<void(const TrainLogEntry&)> on_epoch;
};

struct TrainData {
  std::vector<CachedSample> real;
  std::vector<CachedSample> synthetic;
  std::vector<CachedSample> validation;
};

struct TrainResult {
  LaeoNetParams params;
  std::vector<TrainLogEntry> log;
};

// Optimizes the pair loss over the unfrozen groups. The validation AP drives
// the plateau schedule; without validation data the rate stays at lr_init.
// Throws std::runtime_error on a non-finite loss and std::logic_error if a
// frozen parameter changes.
TrainResult TrainLaeo(const LaeoNet& net, LaeoNetParams params,
                      const TrainData& data, const TrainConfig& config,
                      uint64_t seed, const TrainHooks& hooks = {});

// Inference-mode accuracy at threshold 0.5 and AP of a cached set.
double Accuracy(const LaeoNet& net, const LaeoNetParams& params,
                std::span<const CachedSample> samples);
double AveragePrecision(const LaeoNet& net, const LaeoNetParams& params,
                        std::span<const CachedSample> samples);

}  // namespace laeo

#endif  // LAEO_PIPELINE_HPP_
