#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "laeo/pipeline.hpp"

using namespace laeo;

namespace {

// Smaller network for the pose-pretraining runs.
LaeoNetConfig SmallConfig() {
  LaeoNetConfig c;
  c.K = 4;
  c.head_pose_layers = {{8, 5, 5, 2, 2, 2, 1, nn::Padding::kValid},
                        {8, 3, 3, 1, 2, 2, 1, nn::Padding::kValid}};
  c.fusion_hidden_units = 16;
  return c;
}

std::vector<std::vector<double>> GroupValues(const LaeoNetParams& p,
                                             ParamGroup g) {
  std::vector<std::vector<double>> out;
  for (const auto& a : p.arrays) {
    if (a.group == g) out.push_back(a.values);
  }
  return out;
}

LabelPool Pool(size_t pos, size_t neg) {
  LabelPool p;
  for (size_t i = 0; i < pos; ++i) p.positives.push_back(i);
  for (size_t i = 0; i < neg; ++i) p.negatives.push_back(pos + i);
  return p;
}

struct Corpus {
  LaeoNet net{LaeoNetConfig{}};
  LaeoNetParams init;
  TrainData data;
};

// 16 positive / 16 negative synthetic samples with cached head features.
const Corpus& TinyCorpus() {
  static const Corpus corpus = [] {
    Corpus c;
    c.init = c.net.InitParams(11);
    c.init.frozen.insert(ParamGroup::kHeadPose);
    const auto heads = ProceduralHeadSet(24, 5);
    const auto synth = GenerateSyntheticCorpus(heads, 16, 16, SynthConfig{}, 9);
    c.data.synthetic = CacheSamples(c.net, c.init, synth.samples, true);
    return c;
  }();
  return corpus;
}

}  // namespace

TEST_CASE("Adam with zero learning rate leaves parameters unchanged") {
  std::vector<ParamArray> arrays{{"w", ParamGroup::kFusion, {3}, {1, 2, 3}}};
  ParamGrads g{{0.5, -1.0, 2.0}};
  Adam opt;
  opt.Step(arrays, g, 0.0);
  CHECK(arrays[0].values == std::vector<double>{1, 2, 3});
  opt.Step(arrays, g, 0.1, {ParamGroup::kFusion});
  CHECK(arrays[0].values == std::vector<double>{1, 2, 3});
  opt.Step(arrays, g, 0.1);
  // with constant gradients the bias-corrected step has size lr
  CHECK(arrays[0].values[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(arrays[0].values[1] == doctest::Approx(2.1).epsilon(1e-6));
  CHECK(arrays[0].values[2] == doctest::Approx(2.9).epsilon(1e-6));
  CHECK_THROWS_AS(Adam(1.0), std::invalid_argument);
}

TEST_CASE("pretraining") {
  const LaeoNet net(SmallConfig());
  const auto heads = ProceduralHeadSet(3, 2);
  const auto seqs = MakePoseSequences(heads, 4, AugmentationSpec{}, 3);
  const LaeoNetParams params = net.InitParams(1);
  const PoseHead head = net.InitPoseHead(2);

  SUBCASE("zero learning rate is a no-op") {
    PretrainConfig cfg;
    cfg.epochs = 2;
    cfg.lr = 0.0;
    const auto r = PretrainHeadPose(net, params, head, seqs, {}, cfg, 4);
    for (size_t a = 0; a < params.arrays.size(); ++a) {
      CHECK(r.params.arrays[a].values == params.arrays[a].values);
    }
    for (size_t a = 0; a < head.arrays.size(); ++a) {
      CHECK(r.head.arrays[a].values == head.arrays[a].values);
    }
    CHECK(r.params.IsFrozen(ParamGroup::kHeadPose));
    CHECK(std::isnan(r.log.back().val_loss));
  }

  SUBCASE("single sample is fitted within 500 steps") {
    PretrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 1;
    std::vector<PoseSequence> one{seqs[0]};
    const auto r = PretrainHeadPose(net, params, head, one, one, cfg, 4);
    REQUIRE(r.log.size() == 500);
    CHECK(r.log.back().step == 500);
    double tail = 0.0;
    for (size_t i = 450; i < 500; ++i) tail += r.log[i].train_loss / 50.0;
    CHECK(tail < 1e-3);
    CHECK(r.log.back().eval_loss < r.log.front().eval_loss);
    CHECK(r.log.back().val_loss == r.log.back().eval_loss);
  }

  SUBCASE("fixed seed gives identical parameters") {
    PretrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.lr = 1e-3;
    const auto a = PretrainHeadPose(net, params, head, seqs, {}, cfg, 7);
    const auto b = PretrainHeadPose(net, params, head, seqs, {}, cfg, 7);
    for (size_t i = 0; i < a.params.arrays.size(); ++i) {
      CHECK(a.params.arrays[i].values == b.params.arrays[i].values);
    }
    CHECK(a.head.arrays[0].values == b.head.arrays[0].values);
    CHECK(GroupValues(a.params, ParamGroup::kFusion) ==
          GroupValues(params, ParamGroup::kFusion));
    CHECK(GroupValues(a.params, ParamGroup::kHeadPose) !=
          GroupValues(params, ParamGroup::kHeadPose));
  }

  SUBCASE("errors") {
    PretrainConfig cfg;
    CHECK_THROWS_AS(PretrainHeadPose(net, params, head, {}, {}, cfg, 1),
                    std::invalid_argument);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(PretrainHeadPose(net, params, head, seqs, {}, cfg, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("unshared right branch starts from the pretrained left branch") {
  LaeoNetConfig c = SmallConfig();
  c.share_head_pose_weights = false;
  const LaeoNet net(c);
  const auto seqs =
      MakePoseSequences(ProceduralHeadSet(2, 1), 4, AugmentationSpec{}, 1);
  PretrainConfig cfg;
  cfg.epochs = 1;
  const auto r = PretrainHeadPose(net, net.InitParams(3), net.InitPoseHead(3),
                                  seqs, {}, cfg, 2);
  CHECK(r.params.Get("head_pose_right.conv1.weight").values ==
        r.params.Get("head_pose.conv1.weight").values);
}

TEST_CASE("config validation and curriculum") {
  TrainConfig cfg;
  CHECK(cfg.batch_size() == 9);
  CHECK_NOTHROW(cfg.Validate());
  CHECK(CurriculumTau(0, cfg) == doctest::Approx(0.5));
  CHECK(CurriculumTau(1, cfg) == doctest::Approx(0.5));
  CHECK(CurriculumTau(2, cfg) == doctest::Approx(0.6));
  CHECK(CurriculumTau(5, cfg) == doctest::Approx(0.7));
  CHECK(CurriculumTau(100, cfg) == 1.0);
  TrainConfig bad = cfg;
  bad.lr_min = 1e-3;
  CHECK_THROWS_AS(bad.Validate(), std::invalid_argument);
  bad = cfg;
  bad.lr_factor = 1.0;
  CHECK_THROWS_AS(bad.Validate(), std::invalid_argument);
  bad = cfg;
  bad.batch_negatives = 0;
  CHECK_THROWS_AS(bad.Validate(), std::invalid_argument);
}

TEST_CASE("hard-negative mining") {
  std::vector<ScoredNegative> scored{{PoolSource::kReal, 0, 1.0},
                                     {PoolSource::kReal, 1, 0.99},
                                     {PoolSource::kSynthetic, 0, 0.0},
                                     {PoolSource::kSynthetic, 1, 0.4}};
  CHECK(MineHardNegatives(scored, 0.0).size() == 1);
  CHECK(MineHardNegatives(scored, 1.0).size() == 4);
  CHECK(MineHardNegatives(scored, 0.6).size() == 3);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredNegative> pool;
    const int n = 1 + trial % 30;
    for (int i = 0; i < n; ++i) {
      pool.push_back({i % 2 ? PoolSource::kReal : PoolSource::kSynthetic,
                      static_cast<size_t>(i), u(rng)});
    }
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto a = MineHardNegatives(pool, t1);
    const auto b = MineHardNegatives(pool, t2);
    for (const auto& x : a) {
      CHECK(std::any_of(b.begin(), b.end(), [&](const ScoredNegative& y) {
        return y.source == x.source && y.index == x.index;
      }));
    }
    CHECK(a.size() <= b.size());
  }
}

TEST_CASE("batch composition") {
  TrainConfig cfg;
  const LabelPool real = Pool(6, 7);
  const LabelPool synth = Pool(5, 9);
  std::vector<ScoredNegative> hard{{PoolSource::kReal, 8, 0.9},
                                   {PoolSource::kSynthetic, 12, 0.8}};

  SUBCASE("epoch 0 is all synthetic") {
    for (int step = 1; step <= 6; ++step) {
      const Batch b = ComposeBatch(real, synth, hard, 0, step, cfg, step);
      CHECK(b.source == PoolSource::kSynthetic);
      for (const auto& e : b.entries) CHECK(e.source == PoolSource::kSynthetic);
    }
  }

  SUBCASE("epoch 3 step 1 draws real positives and negatives") {
    const Batch b = ComposeBatch(real, synth, hard, 3, 1, cfg, 1);
    CHECK(b.source == PoolSource::kReal);
    int real_ordinary = 0, hard_slots = 0;
    for (const auto& e : b.entries) {
      if (e.hard) {
        ++hard_slots;
        CHECK(e.label == 0);
      } else {
        real_ordinary += e.source == PoolSource::kReal;
      }
    }
    CHECK(real_ordinary == 8);
    CHECK(hard_slots == 1);
    CHECK(ComposeBatch(real, synth, hard, 3, 2, cfg, 1).source ==
          PoolSource::kSynthetic);
  }

  SUBCASE("auditor over many steps") {
    for (int epoch = 0; epoch < 6; ++epoch) {
      for (int step = 1; step <= 10; ++step) {
        const Batch b = ComposeBatch(real, synth, hard, epoch, step, cfg,
                                     DeriveSeed(epoch, step));
        const PoolSource expected =
            epoch < 2 ? PoolSource::kSynthetic
                      : (step % 2 ? PoolSource::kReal : PoolSource::kSynthetic);
        REQUIRE(b.entries.size() == 9);
        CHECK(b.source == expected);
        int pos = 0, neg = 0, hard_n = 0;
        for (const auto& e : b.entries) {
          const LabelPool& p = e.source == PoolSource::kReal ? real : synth;
          const auto& members = e.label == 1 ? p.positives : p.negatives;
          CHECK(std::find(members.begin(), members.end(), e.index) !=
                members.end());
          if (e.hard) {
            ++hard_n;
            if (epoch < 2) CHECK(e.source == PoolSource::kSynthetic);
          } else {
            CHECK(e.source == expected);
            (e.label == 1 ? pos : neg)++;
          }
        }
        CHECK(pos == 4);
        CHECK(neg == 4);
        CHECK(hard_n == 1);
      }
    }
  }

  SUBCASE("empty hard pool substitutes an ordinary negative") {
    const Batch b = ComposeBatch(real, synth, {}, 4, 2, cfg, 5);
    const auto& last = b.entries.back();
    CHECK(last.hard);
    CHECK(last.substituted);
    CHECK(last.label == 0);
    CHECK(last.source == PoolSource::kSynthetic);
  }

  SUBCASE("no real data means synthetic throughout") {
    const Batch b = ComposeBatch({}, synth, hard, 5, 1, cfg, 5);
    CHECK(b.source == PoolSource::kSynthetic);
    CHECK(b.entries.back().source == PoolSource::kSynthetic);
  }

  SUBCASE("same seed, same batch") {
    const Batch a = ComposeBatch(real, synth, hard, 4, 3, cfg, 99);
    const Batch b = ComposeBatch(real, synth, hard, 4, 3, cfg, 99);
    for (size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(a.entries[i].index == b.entries[i].index);
      CHECK(a.entries[i].source == b.entries[i].source);
    }
  }

  SUBCASE("missing synthetic pool throws") {
    CHECK_THROWS_AS(ComposeBatch(real, {}, hard, 0, 1, cfg, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("label multiset property") {
  TrainConfig cfg;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const LabelPool real = Pool(1 + rng() % 5, 1 + rng() % 5);
    const LabelPool synth = Pool(1 + rng() % 5, 1 + rng() % 5);
    std::vector<ScoredNegative> hard;
    if (trial % 3) hard.push_back({PoolSource::kSynthetic, synth.negatives[0], 1});
    const Batch b = ComposeBatch(real, synth, hard, rng() % 8, 1 + rng() % 9,
                                 cfg, rng());
    std::map<int, int> counts;
    for (const auto& e : b.entries) counts[e.label]++;
    CHECK(counts[1] == 4);
    CHECK(counts[0] == 5);
  }
}

TEST_CASE("cached sample matches direct scoring") {
  const auto& c = TinyCorpus();
  const auto synth = GenerateSyntheticCorpus(ProceduralHeadSet(24, 5), 1, 1,
                                             SynthConfig{}, 9);
  const auto& s = synth.samples[0];
  const auto with = CacheSample(c.net, c.init, s, true);
  const auto without = CacheSample(c.net, c.init, s, false);
  const double direct = ScoreTrackPair(c.net, s, c.init);
  CHECK(c.net.Score(with.Input(), c.init) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(c.net.Score(without.Input(), c.init) == direct);
  TrackPairSample amb = s;
  amb.label = PairLabel::kAmbiguous;
  CHECK_THROWS_AS(CacheSample(c.net, c.init, amb, true), std::invalid_argument);
}

TEST_CASE("training contracts") {
  const auto& c = TinyCorpus();
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.lr_patience = 1;
  cfg.lr_init = 1e-4;
  cfg.lr_min = 5e-6;

  std::vector<std::tuple<int, int, PoolSource, size_t>> audit;
  std::vector<double> pool_sizes;
  TrainHooks hooks;
  hooks.on_batch = [&](int epoch, int step, const Batch& b) {
    audit.emplace_back(epoch, step, b.source, b.entries.size());
  };
  hooks.on_hard_pool = [&](int, std::span<const ScoredNegative> pool) {
    pool_sizes.push_back(static_cast<double>(pool.size()));
  };
  TrainData data = c.data;
  data.validation.assign(c.data.synthetic.begin() + 12,
                         c.data.synthetic.begin() + 20);
  const auto r = TrainLaeo(c.net, c.init, data, cfg, 21, hooks);

  CHECK(GroupValues(r.params, ParamGroup::kHeadPose) ==
        GroupValues(c.init, ParamGroup::kHeadPose));
  CHECK(GroupValues(r.params, ParamGroup::kFusion) !=
        GroupValues(c.init, ParamGroup::kFusion));
  REQUIRE(r.log.size() == 6);
  CHECK(pool_sizes.size() == 6);
  // 16 per label pool and 4 per draw
  CHECK(audit.size() == 6 * 4);
  for (const auto& [epoch, step, source, n] : audit) {
    CHECK(source == PoolSource::kSynthetic);
    CHECK(n == 9);
  }
  for (size_t i = 0; i < r.log.size(); ++i) {
    const auto& e = r.log[i];
    CHECK(e.lr >= cfg.lr_min);
    CHECK(std::isfinite(e.loss));
    CHECK(e.val_ap >= 0.0);
    CHECK(e.val_ap <= 1.0);
    if (i > 0) {
      const double prev = r.log[i - 1].lr;
      CHECK((e.lr == prev ||
             e.lr == std::max(prev * cfg.lr_factor, cfg.lr_min)));
    }
  }

  // patience 1 must have triggered at least one reduction
  CHECK(r.log.back().lr < cfg.lr_init);

  const auto again = TrainLaeo(c.net, c.init, data, cfg, 21);
  for (size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].loss == again.log[i].loss);
    CHECK(r.log[i].val_ap == again.log[i].val_ap);
  }
}

TEST_CASE("cached features need a frozen branch") {
  const auto& c = TinyCorpus();
  LaeoNetParams unfrozen = c.init;
  unfrozen.frozen.clear();
  TrainConfig cfg;
  cfg.freeze_head_pose = false;
  cfg.epochs = 1;
  CHECK_THROWS_AS(TrainLaeo(c.net, unfrozen, c.data, cfg, 1),
                  std::invalid_argument);
}

TEST_CASE("32-sample corpus is overfitted") {
  const auto& c = TinyCorpus();
  TrainConfig cfg;
  cfg.epochs = 200;
  double acc = 0.0;
  int epochs_used = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const TrainLogEntry& e) {
    acc = e.train_acc;
    epochs_used = e.epoch + 1;
  };
  const auto r = TrainLaeo(c.net, c.init, c.data, cfg, 3, hooks);
  CHECK(std::isnan(r.log.back().val_ap));
  CHECK(r.log.back().lr == cfg.lr_init);
  MESSAGE("train accuracy " << acc << " after " << epochs_used << " epochs");
  CHECK(acc >= 0.95);
  CHECK(Accuracy(c.net, r.params, c.data.synthetic) == acc);
  CHECK(GroupValues(r.params, ParamGroup::kHeadPose) ==
        GroupValues(c.init, ParamGroup::kHeadPose));
}
