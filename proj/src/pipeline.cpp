#include "laeo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "laeo/eval.hpp"

namespace laeo {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void Scale(ParamGrads& g, double s) {
  for (auto& a : g) {
    for (double& v : a) v *= s;
  }
}

std::set<ParamGroup> AllGroupsExcept(ParamGroup keep) {
  std::set<ParamGroup> s{ParamGroup::kHeadPose, ParamGroup::kHeadMap,
                         ParamGroup::kGeometry, ParamGroup::kFusion,
                         ParamGroup::kPoseOutput};
  s.erase(keep);
  return s;
}

std::vector<std::vector<double>> SnapshotGroup(const LaeoNetParams& p,
                                               ParamGroup g) {
  std::vector<std::vector<double>> out;
  for (const auto& a : p.arrays) {
    if (a.group == g) out.push_back(a.values);
  }
  return out;
}

}  // namespace

Adam::Adam(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0)) {
    throw std::invalid_argument("bad Adam coefficients");
  }
}

void Adam::Step(std::vector<ParamArray>& arrays, const ParamGrads& grads,
                double lr, const std::set<ParamGroup>& frozen) {
  if (grads.size() != arrays.size()) {
    throw std::invalid_argument("gradient list does not match parameters");
  }
  if (m_.empty()) {
    m_ = ZeroGradsLike(arrays);
    v_ = ZeroGradsLike(arrays);
    t_.assign(arrays.size(), 0);
  }
  for (size_t a = 0; a < arrays.size(); ++a) {
    if (frozen.contains(arrays[a].group)) continue;
    const double t = static_cast<double>(++t_[a]);
    const double c1 = 1.0 - std::pow(beta1_, t);
    const double c2 = 1.0 - std::pow(beta2_, t);
    auto& w = arrays[a].values;
    auto& m = m_[a];
    auto& v = v_[a];
    const auto& g = grads[a];
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void PretrainConfig::Validate() const {
  if (epochs < 0) throw std::invalid_argument("pretrain epochs must be >= 0");
  if (batch_size < 1) {
    throw std::invalid_argument("pretrain batch size must be >= 1");
  }
  if (!(lr >= 0.0)) throw std::invalid_argument("pretrain lr must be >= 0");
  weights.Validate();
}

double PoseDatasetLoss(const LaeoNet& net, const LaeoNetParams& params,
                       const PoseHead& head,
                       std::span<const PoseSequence> data,
                       const PoseLossWeights& weights) {
  if (data.empty()) return kNaN;
  double sum = 0.0;
  for (const auto& s : data) {
    const auto out = net.PredictPose(nn::StackFrames(s.crops), params, head);
    sum += HeadPoseLoss(out, s.pose.normalized(), weights);
  }
  return sum / static_cast<double>(data.size());
}

PretrainResult PretrainHeadPose(const LaeoNet& net, LaeoNetParams params,
                                PoseHead head,
                                std::span<const PoseSequence> train,
                                std::span<const PoseSequence> validation,
                                const PretrainConfig& config, uint64_t seed) {
  config.Validate();
  if (train.empty()) throw std::invalid_argument("empty pretraining dataset");
  net.CheckParams(params);
  params.frozen.erase(ParamGroup::kHeadPose);

  std::vector<nn::Volume> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(nn::StackFrames(s.crops));

  Adam branch_opt(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  Adam head_opt(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  const auto not_head_pose = AllGroupsExcept(ParamGroup::kHeadPose);
  std::mt19937_64 rng(seed);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  PretrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      auto grads = ZeroGradsLike(params.arrays);
      auto head_grads = ZeroGradsLike(head.arrays);
      double batch_loss = 0.0;
      for (size_t k = start; k < end; ++k) {
        const size_t i = order[k];
        std::mt19937_64 drop(rng());
        const auto trace = net.PoseForward(inputs[i], params, head, &drop);
        const auto target = train[i].pose.normalized();
        const double loss = HeadPoseLoss(trace.output, target, config.weights);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite pose loss at epoch " << epoch << ", step "
              << step << ", sample " << i;
          throw std::runtime_error(msg.str());
        }
        batch_loss += loss;
        net.PoseBackward(trace,
                         HeadPoseLossGrad(trace.output, target, config.weights),
                         params, head, grads, head_grads);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      Scale(grads, inv);
      Scale(head_grads, inv);
      branch_opt.Step(params.arrays, grads, config.lr, not_head_pose);
      head_opt.Step(head.arrays, head_grads, config.lr);
      loss_sum += batch_loss * inv;
      ++batches;
      ++step;
    }
    PretrainLogEntry e;
    e.epoch = epoch;
    e.step = step;
    e.train_loss = loss_sum / batches;
    e.eval_loss = PoseDatasetLoss(net, params, head, train, config.weights);
    e.val_loss = PoseDatasetLoss(net, params, head, validation, config.weights);
    e.lr = config.lr;
    result.log.push_back(e);
  }

  if (!net.config().share_head_pose_weights) {
    // the right branch starts from the pretrained left one
    for (auto& a : params.arrays) {
      const std::string prefix = "head_pose_right.";
      if (a.name.starts_with(prefix)) {
        a.values =
            params.Get("head_pose." + a.name.substr(prefix.size())).values;
      }
    }
  }
  params.frozen.insert(ParamGroup::kHeadPose);
  result.params = std::move(params);
  result.head = std::move(head);
  return result;
}

void TrainConfig::Validate() const {
  if (batch_positives < 1 || batch_negatives < 1 || batch_hard < 0) {
    throw std::invalid_argument("bad batch composition");
  }
  if (!(lr_init > 0.0) || !(lr_min > 0.0) || lr_min > lr_init) {
    throw std::invalid_argument("need 0 < lr_min <= lr_init");
  }
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) {
    throw std::invalid_argument("lr_factor must lie in (0,1)");
  }
  if (lr_patience < 1) throw std::invalid_argument("lr_patience must be >= 1");
  if (synthetic_only_epochs < 0 || curriculum_step_epochs < 1) {
    throw std::invalid_argument("bad curriculum epochs");
  }
  if (tau_start < 0.0 || tau_start > 1.0 || tau_step < 0.0) {
    throw std::invalid_argument("bad curriculum tau schedule");
  }
  if (epochs < 0 || steps_per_epoch < 0 || refine_epochs < 0) {
    throw std::invalid_argument("epoch and step counts must be >= 0");
  }
}

double CurriculumTau(int epoch, const TrainConfig& config) {
  return std::min(1.0, config.tau_start +
                           config.tau_step *
                               (epoch / config.curriculum_step_epochs));
}

std::string_view ToString(PoolSource s) {
  return s == PoolSource::kReal ? "real" : "synthetic";
}

LabelPool MakeLabelPool(std::span<const TrackPairSample> samples) {
  LabelPool pool;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == PairLabel::kLaeo) pool.positives.push_back(i);
    if (samples[i].label == PairLabel::kNotLaeo) pool.negatives.push_back(i);
  }
  return pool;
}

std::vector<ScoredNegative> MineHardNegatives(
    std::span<const ScoredNegative> scored, double tau) {
  std::vector<ScoredNegative> out;
  const double lower = 1.0 - tau;
  for (const auto& s : scored) {
    if (s.score >= lower) out.push_back(s);
  }
  return out;
}

PoolSource BatchSource(int epoch, int step, const TrainConfig& config,
                       bool real_available) {
  if (!real_available || epoch < config.synthetic_only_epochs) {
    return PoolSource::kSynthetic;
  }
  return step % 2 == 1 ? PoolSource::kReal : PoolSource::kSynthetic;
}

Batch ComposeBatch(const LabelPool& real, const LabelPool& synthetic,
                   std::span<const ScoredNegative> hard_pool, int epoch,
                   int step, const TrainConfig& config, uint64_t seed) {
  const bool real_available = !real.empty();
  Batch batch;
  batch.source = BatchSource(epoch, step, config, real_available);
  const LabelPool& pool =
      batch.source == PoolSource::kReal ? real : synthetic;
  if (pool.empty()) {
    throw std::invalid_argument(std::string(ToString(batch.source)) +
                                " pool lacks positives or negatives");
  }
  const bool synthetic_only =
      !real_available || epoch < config.synthetic_only_epochs;

  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<size_t>& v) {
    return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
  };
  for (int i = 0; i < config.batch_positives; ++i) {
    batch.entries.push_back({batch.source, pick(pool.positives), 1});
  }
  for (int i = 0; i < config.batch_negatives; ++i) {
    batch.entries.push_back({batch.source, pick(pool.negatives), 0});
  }
  std::vector<const ScoredNegative*> eligible;
  for (const auto& h : hard_pool) {
    if (!synthetic_only || h.source == PoolSource::kSynthetic) {
      eligible.push_back(&h);
    }
  }
  for (int i = 0; i < config.batch_hard; ++i) {
    if (eligible.empty()) {
      batch.entries.push_back(
          {batch.source, pick(pool.negatives), 0, true, true});
    } else {
      const auto* h = eligible[std::uniform_int_distribution<size_t>(
          0, eligible.size() - 1)(rng)];
      batch.entries.push_back({h->source, h->index, 0, true, false});
    }
  }
  return batch;
}

PairInput CachedSample::Input() const {
  PairInput in;
  if (features) {
    in.left_features = &left;
    in.right_features = &right;
  } else {
    in.left_crops = &left;
    in.right_crops = &right;
  }
  in.head_map = &head_map;
  in.geometry = geometry;
  return in;
}

CachedSample CacheSample(const LaeoNet& net, const LaeoNetParams& params,
                         const TrackPairSample& sample, bool head_features) {
  sample.Validate();
  if (sample.label == PairLabel::kAmbiguous) {
    throw std::invalid_argument("ambiguous samples cannot be trained on");
  }
  CachedSample c;
  SampleVolumes v = ToVolumes(sample);
  c.features = head_features;
  if (head_features) {
    c.left = net.HeadPoseFeatures(v.left, params, 0);
    c.right = net.HeadPoseFeatures(v.right, params, 1);
  } else {
    c.left = std::move(v.left);
    c.right = std::move(v.right);
  }
  c.head_map = std::move(v.head_map);
  c.geometry = sample.geometry;
  c.label = sample.label == PairLabel::kLaeo ? 1 : 0;
  return c;
}

std::vector<CachedSample> CacheSamples(const LaeoNet& net,
                                       const LaeoNetParams& params,
                                       std::span<const TrackPairSample> samples,
                                       bool head_features) {
  std::vector<CachedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(CacheSample(net, params, s, head_features));
  }
  return out;
}

double Accuracy(const LaeoNet& net, const LaeoNetParams& params,
                std::span<const CachedSample> samples) {
  if (samples.empty()) return kNaN;
  int right = 0;
  for (const auto& s : samples) {
    const int predicted = net.Score(s.Input(), params) >= 0.5 ? 1 : 0;
    right += predicted == s.label;
  }
  return static_cast<double>(right) / static_cast<double>(samples.size());
}

double AveragePrecision(const LaeoNet& net, const LaeoNetParams& params,
                        std::span<const CachedSample> samples) {
  std::vector<RankedPrediction> ranked;
  int positives = 0;
  for (const auto& s : samples) {
    ranked.push_back({net.Score(s.Input(), params), s.label == 1});
    positives += s.label;
  }
  if (positives == 0) return kNaN;
  return ComputeAp(ranked, positives);
}

TrainResult TrainLaeo(const LaeoNet& net, LaeoNetParams params,
                      const TrainData& data, const TrainConfig& config,
                      uint64_t seed, const TrainHooks& hooks) {
  config.Validate();
  net.CheckParams(params);
  if (config.freeze_head_pose) params.frozen.insert(ParamGroup::kHeadPose);
  const bool head_frozen = params.IsFrozen(ParamGroup::kHeadPose);
  for (const auto* set : {&data.real, &data.synthetic, &data.validation}) {
    for (const auto& s : *set) {
      if (s.features && !head_frozen) {
        throw std::invalid_argument(
            "cached head-pose features need a frozen head-pose branch");
      }
    }
  }

  std::vector<const CachedSample*> real, synthetic;
  for (const auto& s : data.real) real.push_back(&s);
  for (const auto& s : data.synthetic) synthetic.push_back(&s);
  auto pool_of = [](const std::vector<const CachedSample*>& v) {
    LabelPool p;
    for (size_t i = 0; i < v.size(); ++i) {
      (v[i]->label == 1 ? p.positives : p.negatives).push_back(i);
    }
    return p;
  };

  std::vector<std::vector<double>> frozen_before;
  if (head_frozen) frozen_before = SnapshotGroup(params, ParamGroup::kHeadPose);

  Adam opt(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  double lr = config.lr_init;
  double best_ap = -1.0;
  int bad_checks = 0;
  long global_step = 0;
  uint64_t stream = 0;
  TrainResult result;

  const int refine = data.validation.empty() ? 0 : config.refine_epochs;
  for (int epoch = 0; epoch < config.epochs + refine; ++epoch) {
    const bool refining = epoch >= config.epochs;
    if (refining && epoch == config.epochs) {
      for (const auto& s : data.validation) real.push_back(&s);
    }
    const LabelPool real_pool = pool_of(real);
    const LabelPool synth_pool = pool_of(synthetic);
    const bool real_available = !real_pool.empty();
    if (synth_pool.empty() &&
        (!real_available || config.synthetic_only_epochs > epoch)) {
      throw std::invalid_argument(
          "synthetic data needs positives and negatives");
    }
    const double tau = CurriculumTau(epoch, config);

    std::vector<ScoredNegative> hard;
    if (config.batch_hard > 0) {
      std::vector<ScoredNegative> scored;
      for (size_t i : synth_pool.negatives) {
        scored.push_back({PoolSource::kSynthetic, i,
                          net.Score(synthetic[i]->Input(), params)});
      }
      if (real_available && epoch >= config.synthetic_only_epochs) {
        for (size_t i : real_pool.negatives) {
          scored.push_back(
              {PoolSource::kReal, i, net.Score(real[i]->Input(), params)});
        }
      }
      hard = MineHardNegatives(scored, tau);
    }
    if (hooks.on_hard_pool) hooks.on_hard_pool(epoch, hard);

    size_t largest = 0;
    for (const auto* p : {&real_pool, &synth_pool}) {
      largest = std::max({largest, p->positives.size(), p->negatives.size()});
    }
    const int per_batch = std::max(config.batch_positives,
                                   config.batch_negatives);
    const int steps = config.steps_per_epoch > 0
                          ? config.steps_per_epoch
                          : std::max<int>(1, static_cast<int>(
                                                 (largest + per_batch - 1) /
                                                 per_batch));

    double loss_sum = 0.0;
    for (int step = 1; step <= steps; ++step) {
      const Batch batch =
          ComposeBatch(real_pool, synth_pool, hard, epoch, step, config,
                       DeriveSeed(seed, 2 * stream));
      std::mt19937_64 drop(DeriveSeed(seed, 2 * stream + 1));
      ++stream;
      if (hooks.on_batch) hooks.on_batch(epoch, step, batch);

      auto grads = ZeroGradsLike(params.arrays);
      double batch_loss = 0.0;
      for (const auto& e : batch.entries) {
        const CachedSample& s = e.source == PoolSource::kReal
                                    ? *real[e.index]
                                    : *synthetic[e.index];
        const PairInput in = s.Input();
        const PairTrace t = net.Forward(in, params, &drop);
        const double loss = LaeoLoss(s.label, t.probs[1]);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", step " << step
              << " (" << ToString(e.source) << " sample " << e.index << ")";
          throw std::runtime_error(msg.str());
        }
        batch_loss += loss;
        net.Backward(in, t, LaeoLossGradLogits(s.label, t.probs), params,
                     grads);
      }
      const double inv = 1.0 / static_cast<double>(batch.entries.size());
      Scale(grads, inv);
      opt.Step(params.arrays, grads, lr, params.frozen);
      loss_sum += batch_loss * inv;
      ++global_step;
    }

    std::vector<const CachedSample*> train_set = real;
    train_set.insert(train_set.end(), synthetic.begin(), synthetic.end());
    int right = 0;
    for (const auto* s : train_set) {
      right += (net.Score(s->Input(), params) >= 0.5 ? 1 : 0) == s->label;
    }

    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.step = global_step;
    entry.loss = loss_sum / steps;
    entry.lr = lr;
    entry.train_acc = train_set.empty()
                          ? kNaN
                          : static_cast<double>(right) / train_set.size();
    entry.val_ap = refining ? kNaN
                            : AveragePrecision(net, params, data.validation);
    result.log.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);

    if (!std::isnan(entry.val_ap)) {
      if (entry.val_ap > best_ap) {
        best_ap = entry.val_ap;
        bad_checks = 0;
      } else if (++bad_checks >= config.lr_patience) {
        lr = std::max(lr * config.lr_factor, config.lr_min);
        bad_checks = 0;
      }
    }

    if (head_frozen &&
        SnapshotGroup(params, ParamGroup::kHeadPose) != frozen_before) {
      throw std::logic_error("frozen head-pose parameters changed");
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace laeo
