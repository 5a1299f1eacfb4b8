#include "laeo/model.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace laeo {

std::vector<ConvLayerSpec> DefaultHeadPoseLayers() {
  using nn::Padding;
  // filters, kh, kw, kt, sh, sw, st, padding
  return {
      {16, 5, 5, 3, 2, 2, 1, Padding::kSame},
      {24, 3, 3, 3, 2, 2, 1, Padding::kSame},
      {32, 3, 3, 3, 2, 2, 1, Padding::kSame},
      {12, 6, 6, 1, 1, 1, 1, Padding::kValid},
  };
}

std::vector<ConvLayerSpec> DefaultHeadMapLayers() {
  using nn::Padding;
  return {
      {8, 5, 5, 1, 2, 2, 1, Padding::kSame},
      {16, 3, 3, 1, 2, 2, 1, Padding::kSame},
      {24, 3, 3, 1, 2, 2, 1, Padding::kSame},
      {16, 3, 3, 1, 4, 4, 1, Padding::kSame},
  };
}

void LaeoNetConfig::Validate() const {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (head_pose_layers.empty() || head_map_layers.empty()) {
    throw std::invalid_argument("branches need at least one conv stage");
  }
  for (const auto& l : head_map_layers) {
    if (l.kt != 1 || l.st != 1) {
      throw std::invalid_argument("head-map stages are 2D (kt = st = 1)");
    }
  }
  if (fusion_hidden_units < 1) {
    throw std::invalid_argument("fusion_hidden_units must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0,1)");
  }
  if (geometry_hidden.size() != 2 || geometry_hidden[0] < 1 ||
      geometry_hidden[1] < 1) {
    throw std::invalid_argument("geometry_hidden needs two positive sizes");
  }
}

std::string_view ToString(ParamGroup g) {
  switch (g) {
    case ParamGroup::kHeadPose:
      return "head_pose";
    case ParamGroup::kHeadMap:
      return "head_map";
    case ParamGroup::kGeometry:
      return "geometry";
    case ParamGroup::kFusion:
      return "fusion";
    case ParamGroup::kPoseOutput:
      return "pose_output";
  }
  return "unknown";
}

ParamGroup ParamGroupFromString(std::string_view s) {
  for (auto g : {ParamGroup::kHeadPose, ParamGroup::kHeadMap,
                 ParamGroup::kGeometry, ParamGroup::kFusion,
                 ParamGroup::kPoseOutput}) {
    if (ToString(g) == s) return g;
  }
  throw std::invalid_argument("unknown parameter group '" + std::string(s) +
                              "'");
}

size_t LaeoNetParams::ParameterCount() const {
  size_t n = 0;
  for (const auto& a : arrays) n += a.values.size();
  return n;
}

const ParamArray& LaeoNetParams::Get(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw std::out_of_range("no parameter array named '" + std::string(name) +
                          "'");
}

ParamArray& LaeoNetParams::Get(std::string_view name) {
  return const_cast<ParamArray&>(std::as_const(*this).Get(name));
}

ParamGrads ZeroGradsLike(const std::vector<ParamArray>& arrays) {
  ParamGrads g;
  g.reserve(arrays.size());
  for (const auto& a : arrays) g.emplace_back(a.values.size(), 0.0);
  return g;
}

void AddInto(ParamGrads& dst, const ParamGrads& src) {
  for (size_t i = 0; i < dst.size(); ++i) {
    for (size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
  }
}

namespace {

std::vector<nn::ConvGeometry> ChainGeometries(
    const std::vector<ConvLayerSpec>& layers, int c, int t, int h, int w) {
  std::vector<nn::ConvGeometry> geoms;
  for (const auto& l : layers) {
    auto g = nn::ConvGeometry::Make(c, t, h, w, l.filters, l.kt, l.kh, l.kw,
                                    l.st, l.sh, l.sw, l.padding);
    c = g.out_c;
    t = g.out_t;
    h = g.out_h;
    w = g.out_w;
    geoms.push_back(g);
  }
  return geoms;
}

int OutputSize(const nn::ConvGeometry& g) {
  return g.out_c * g.out_t * g.out_h * g.out_w;
}

void CheckVolume(const nn::Volume& v, int c, int t, int h, int w,
                 const char* what) {
  if (v.c_dim != c || v.t_dim != t || v.h_dim != h || v.w_dim != w) {
    throw std::invalid_argument(std::string(what) + " has the wrong shape");
  }
}

}  // namespace

LaeoNet::LaeoNet(LaeoNetConfig config) : config_(std::move(config)) {
  config_.Validate();
  head_pose_geoms_ =
      ChainGeometries(config_.head_pose_layers, 3, config_.K, kCropSize,
                      kCropSize);
  head_pose_dim_ = OutputSize(head_pose_geoms_.back());

  const int branches = config_.share_head_pose_weights ? 1 : 2;
  for (int b = 0; b < branches; ++b) {
    const std::string prefix = b == 0 ? "head_pose" : "head_pose_right";
    for (size_t l = 0; l < head_pose_geoms_.size(); ++l) {
      head_pose_slots_[b].push_back(
          AddConv(prefix + ".conv" + std::to_string(l + 1),
                  ParamGroup::kHeadPose, head_pose_geoms_[l]));
    }
  }
  if (config_.share_head_pose_weights) {
    head_pose_slots_[1] = head_pose_slots_[0];
  }

  if (config_.use_geometry_branch) {
    const int h1 = config_.geometry_hidden[0];
    const int h2 = config_.geometry_hidden[1];
    geometry_slots_.push_back(
        AddDense("geometry.fc1", ParamGroup::kGeometry, 3, h1));
    geometry_slots_.push_back(
        AddDense("geometry.fc2", ParamGroup::kGeometry, h1, h2));
  } else {
    head_map_geoms_ = ChainGeometries(config_.head_map_layers, 3, 1,
                                      kCropSize, kCropSize);
    head_map_dim_ = OutputSize(head_map_geoms_.back());
    for (size_t l = 0; l < head_map_geoms_.size(); ++l) {
      head_map_slots_.push_back(AddConv("head_map.conv" + std::to_string(l + 1),
                                        ParamGroup::kHeadMap,
                                        head_map_geoms_[l]));
    }
  }

  fusion_hidden_ = AddDense("fusion.hidden", ParamGroup::kFusion,
                            fusion_input_dim(), config_.fusion_hidden_units);
  fusion_out_ = AddDense("fusion.output", ParamGroup::kFusion,
                         config_.fusion_hidden_units, 2);
}

int LaeoNet::context_dim() const {
  return config_.use_geometry_branch ? config_.geometry_hidden[1]
                                     : head_map_dim_;
}

size_t LaeoNet::AddArray(std::string name, ParamGroup group,
                         std::vector<int> shape, int fan_in, int fan_out) {
  layout_.push_back({std::move(name), group, std::move(shape), fan_in,
                     fan_out});
  return layout_.size() - 1;
}

LaeoNet::Slots LaeoNet::AddConv(const std::string& prefix, ParamGroup group,
                                const nn::ConvGeometry& g) {
  const int receptive = g.kt * g.kh * g.kw;
  Slots s;
  s.w = AddArray(prefix + ".weight", group,
                 {g.out_c, g.in_c, g.kt, g.kh, g.kw}, g.in_c * receptive,
                 g.out_c * receptive);
  s.b = AddArray(prefix + ".bias", group, {g.out_c}, 0, 0);
  return s;
}

LaeoNet::Slots LaeoNet::AddDense(const std::string& prefix, ParamGroup group,
                                 int in, int out) {
  Slots s;
  s.w = AddArray(prefix + ".weight", group, {out, in}, in, out);
  s.b = AddArray(prefix + ".bias", group, {out}, 0, 0);
  return s;
}

LaeoNetParams LaeoNet::InitParams(uint64_t seed) const {
  std::mt19937_64 rng(seed);
  LaeoNetParams params;
  for (const auto& info : layout_) {
    ParamArray a;
    a.name = info.name;
    a.group = info.group;
    a.shape = info.shape;
    const size_t n = std::accumulate(info.shape.begin(), info.shape.end(),
                                     size_t{1}, std::multiplies<>());
    a.values.assign(n, 0.0);
    if (info.shape.size() > 1) {
      nn::GlorotUniform(a.values, info.fan_in, info.fan_out, rng);
    }
    params.arrays.push_back(std::move(a));
  }
  return params;
}

PoseHead LaeoNet::InitPoseHead(uint64_t seed) const {
  std::mt19937_64 rng(seed);
  PoseHead head;
  ParamArray w{"pose_output.weight", ParamGroup::kPoseOutput,
               {3, head_pose_dim_},
               std::vector<double>(3 * static_cast<size_t>(head_pose_dim_))};
  nn::GlorotUniform(w.values, head_pose_dim_, 3, rng);
  ParamArray b{"pose_output.bias", ParamGroup::kPoseOutput, {3},
               std::vector<double>(3, 0.0)};
  head.arrays.push_back(std::move(w));
  head.arrays.push_back(std::move(b));
  return head;
}

size_t LaeoNet::ParameterCount() const {
  size_t n = 0;
  for (const auto& info : layout_) {
    n += std::accumulate(info.shape.begin(), info.shape.end(), size_t{1},
                         std::multiplies<>());
  }
  return n;
}

void LaeoNet::CheckParams(const LaeoNetParams& params) const {
  if (params.arrays.size() != layout_.size()) {
    throw std::invalid_argument("parameter set does not match architecture");
  }
  for (size_t i = 0; i < layout_.size(); ++i) {
    const auto& a = params.arrays[i];
    const auto& info = layout_[i];
    const size_t n = std::accumulate(info.shape.begin(), info.shape.end(),
                                     size_t{1}, std::multiplies<>());
    if (a.name != info.name || a.shape != info.shape || a.values.size() != n ||
        a.group != info.group) {
      throw std::invalid_argument("parameter array '" + a.name +
                                  "' does not match architecture");
    }
  }
}

const std::vector<LaeoNet::Slots>& LaeoNet::head_pose_slots(int branch) const {
  return head_pose_slots_[branch == 0 ? 0 : 1];
}

nn::Volume LaeoNet::RunConvStack(const std::vector<nn::ConvGeometry>& geoms,
                                 const std::vector<Slots>& slots,
                                 const nn::Volume& input,
                                 const LaeoNetParams& params,
                                 std::vector<nn::Volume>* keep) const {
  nn::Volume x = input;
  if (keep != nullptr) keep->push_back(input);
  for (size_t l = 0; l < geoms.size(); ++l) {
    nn::Volume y = nn::ConvForward(geoms[l], params.arrays[slots[l].w].values,
                                   params.arrays[slots[l].b].values, x);
    nn::ReluInPlace(y.data);
    if (keep != nullptr) keep->push_back(y);
    x = std::move(y);
  }
  return x;
}

BranchTrace LaeoNet::RunConvBranch(const std::vector<nn::ConvGeometry>& geoms,
                                   const std::vector<Slots>& slots,
                                   const nn::Volume& input,
                                   bool input_is_features,
                                   const LaeoNetParams& params,
                                   std::mt19937_64* rng) const {
  BranchTrace trace;
  trace.from_features = input_is_features;
  const nn::Volume* features = nullptr;
  if (input_is_features) {
    const auto& g = geoms.back();
    CheckVolume(input, g.out_c, g.out_t, g.out_h, g.out_w, "cached features");
    trace.activations.push_back(input);
  } else {
    RunConvStack(geoms, slots, input, params, &trace.activations);
  }
  features = &trace.activations.back();
  trace.dropped = features->data;
  if (rng != nullptr && config_.dropout_rate > 0.0) {
    trace.dropout_mask =
        nn::DropoutMask(trace.dropped.size(), config_.dropout_rate, *rng);
    for (size_t i = 0; i < trace.dropped.size(); ++i) {
      trace.dropped[i] *= trace.dropout_mask[i];
    }
  }
  trace.embedding = nn::L2Normalize(trace.dropped, &trace.norm);
  return trace;
}

void LaeoNet::BackwardConvBranch(const std::vector<nn::ConvGeometry>& geoms,
                                 const std::vector<Slots>& slots,
                                 const BranchTrace& trace,
                                 std::span<const double> d_embedding,
                                 const LaeoNetParams& params,
                                 ParamGrads& grads) const {
  if (trace.from_features) {
    throw std::logic_error(
        "cannot backpropagate into a branch run from cached features");
  }
  std::vector<double> d =
      nn::L2NormalizeBackward(trace.dropped, trace.norm, d_embedding);
  if (!trace.dropout_mask.empty()) {
    for (size_t i = 0; i < d.size(); ++i) d[i] *= trace.dropout_mask[i];
  }
  const auto& last = trace.activations.back();
  nn::Volume dy(last.c_dim, last.t_dim, last.h_dim, last.w_dim);
  dy.data = std::move(d);
  for (size_t l = geoms.size(); l-- > 0;) {
    nn::ReluBackwardInPlace(trace.activations[l + 1].data, dy.data);
    nn::Volume dx;
    nn::ConvBackward(geoms[l], params.arrays[slots[l].w].values,
                     trace.activations[l], dy, grads[slots[l].w],
                     grads[slots[l].b], l > 0 ? &dx : nullptr);
    if (l > 0) dy = std::move(dx);
  }
}

nn::Volume LaeoNet::HeadPoseFeatures(const nn::Volume& crops,
                                     const LaeoNetParams& params,
                                     int branch) const {
  CheckVolume(crops, 3, config_.K, kCropSize, kCropSize, "head crops");
  return RunConvStack(head_pose_geoms_, head_pose_slots(branch), crops, params,
                      nullptr);
}

std::vector<double> LaeoNet::EmbedHeadSequence(const nn::Volume& crops,
                                               const LaeoNetParams& params,
                                               int branch) const {
  CheckVolume(crops, 3, config_.K, kCropSize, kCropSize, "head crops");
  return RunConvBranch(head_pose_geoms_, head_pose_slots(branch), crops, false,
                       params, nullptr)
      .embedding;
}

std::vector<double> LaeoNet::EmbedHeadMap(const nn::Volume& map,
                                          const LaeoNetParams& params) const {
  if (config_.use_geometry_branch) {
    throw std::logic_error("network was built with the geometry branch");
  }
  CheckVolume(map, 3, 1, kCropSize, kCropSize, "head map");
  return RunConvBranch(head_map_geoms_, head_map_slots_, map, false, params,
                       nullptr)
      .embedding;
}

std::vector<double> LaeoNet::EmbedGeometry(const GeometryTuple& g,
                                           const LaeoNetParams& params) const {
  if (!config_.use_geometry_branch) {
    throw std::logic_error("network was built with the head-map branch");
  }
  const std::vector<double> in = {g.dx, g.dy, g.scale_ratio};
  auto h = nn::DenseForward(params.arrays[geometry_slots_[0].w].values,
                            params.arrays[geometry_slots_[0].b].values, in);
  nn::ReluInPlace(h);
  auto out = nn::DenseForward(params.arrays[geometry_slots_[1].w].values,
                              params.arrays[geometry_slots_[1].b].values, h);
  nn::ReluInPlace(out);
  return out;
}

std::array<double, 2> LaeoNet::FuseAndClassify(
    std::span<const double> e_left, std::span<const double> e_right,
    std::span<const double> e_context, const LaeoNetParams& params) const {
  if (e_left.size() != static_cast<size_t>(head_pose_dim_) ||
      e_right.size() != static_cast<size_t>(head_pose_dim_) ||
      e_context.size() != static_cast<size_t>(context_dim())) {
    throw std::invalid_argument("embedding dimensions do not match config");
  }
  std::vector<double> fused;
  fused.reserve(fusion_input_dim());
  fused.insert(fused.end(), e_left.begin(), e_left.end());
  fused.insert(fused.end(), e_right.begin(), e_right.end());
  fused.insert(fused.end(), e_context.begin(), e_context.end());
  auto hidden = nn::DenseForward(params.arrays[fusion_hidden_.w].values,
                                 params.arrays[fusion_hidden_.b].values, fused);
  nn::ReluInPlace(hidden);
  auto logits = nn::DenseForward(params.arrays[fusion_out_.w].values,
                                 params.arrays[fusion_out_.b].values, hidden);
  auto p = nn::Softmax(logits);
  return {p[0], p[1]};
}

PairTrace LaeoNet::Forward(const PairInput& input, const LaeoNetParams& params,
                           std::mt19937_64* dropout_rng) const {
  PairTrace t;
  auto run_head = [&](const nn::Volume* crops, const nn::Volume* features,
                      int branch) {
    if (features != nullptr) {
      return RunConvBranch(head_pose_geoms_, head_pose_slots(branch),
                           *features, true, params, dropout_rng);
    }
    if (crops == nullptr) throw std::invalid_argument("missing head crops");
    CheckVolume(*crops, 3, config_.K, kCropSize, kCropSize, "head crops");
    return RunConvBranch(head_pose_geoms_, head_pose_slots(branch), *crops,
                         false, params, dropout_rng);
  };
  t.left = run_head(input.left_crops, input.left_features, 0);
  t.right = run_head(input.right_crops, input.right_features, 1);

  const std::vector<double>* context = nullptr;
  if (config_.use_geometry_branch) {
    t.geometry_input = {input.geometry.dx, input.geometry.dy,
                        input.geometry.scale_ratio};
    t.geometry_hidden =
        nn::DenseForward(params.arrays[geometry_slots_[0].w].values,
                         params.arrays[geometry_slots_[0].b].values,
                         t.geometry_input);
    nn::ReluInPlace(t.geometry_hidden);
    t.geometry_out =
        nn::DenseForward(params.arrays[geometry_slots_[1].w].values,
                         params.arrays[geometry_slots_[1].b].values,
                         t.geometry_hidden);
    nn::ReluInPlace(t.geometry_out);
    context = &t.geometry_out;
  } else {
    if (input.head_map == nullptr) {
      throw std::invalid_argument("missing head map");
    }
    CheckVolume(*input.head_map, 3, 1, kCropSize, kCropSize, "head map");
    t.head_map = RunConvBranch(head_map_geoms_, head_map_slots_,
                               *input.head_map, false, params, dropout_rng);
    context = &t.head_map.embedding;
  }

  t.fused.reserve(fusion_input_dim());
  t.fused.insert(t.fused.end(), t.left.embedding.begin(),
                 t.left.embedding.end());
  t.fused.insert(t.fused.end(), t.right.embedding.begin(),
                 t.right.embedding.end());
  t.fused.insert(t.fused.end(), context->begin(), context->end());

  t.hidden = nn::DenseForward(params.arrays[fusion_hidden_.w].values,
                              params.arrays[fusion_hidden_.b].values, t.fused);
  nn::ReluInPlace(t.hidden);
  t.hidden_dropped = t.hidden;
  if (dropout_rng != nullptr && config_.dropout_rate > 0.0) {
    t.hidden_mask = nn::DropoutMask(t.hidden.size(), config_.dropout_rate,
                                    *dropout_rng);
    for (size_t i = 0; i < t.hidden.size(); ++i) {
      t.hidden_dropped[i] *= t.hidden_mask[i];
    }
  }
  const auto logits =
      nn::DenseForward(params.arrays[fusion_out_.w].values,
                       params.arrays[fusion_out_.b].values, t.hidden_dropped);
  const auto probs = nn::Softmax(logits);
  t.logits = {logits[0], logits[1]};
  t.probs = {probs[0], probs[1]};
  return t;
}

void LaeoNet::Backward(const PairInput& input, const PairTrace& t,
                       const std::array<double, 2>& dlogits,
                       const LaeoNetParams& params, ParamGrads& grads) const {
  (void)input;
  std::vector<double> d_hidden;
  nn::DenseBackward(params.arrays[fusion_out_.w].values, t.hidden_dropped,
                    dlogits, grads[fusion_out_.w], grads[fusion_out_.b],
                    &d_hidden);
  if (!t.hidden_mask.empty()) {
    for (size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= t.hidden_mask[i];
  }
  nn::ReluBackwardInPlace(t.hidden, d_hidden);
  std::vector<double> d_fused;
  nn::DenseBackward(params.arrays[fusion_hidden_.w].values, t.fused, d_hidden,
                    grads[fusion_hidden_.w], grads[fusion_hidden_.b],
                    &d_fused);

  const std::span<const double> all(d_fused);
  const auto d_left = all.subspan(0, head_pose_dim_);
  const auto d_right = all.subspan(head_pose_dim_, head_pose_dim_);
  const auto d_context = all.subspan(2 * head_pose_dim_);

  if (!params.IsFrozen(ParamGroup::kHeadPose)) {
    BackwardConvBranch(head_pose_geoms_, head_pose_slots(0), t.left, d_left,
                       params, grads);
    BackwardConvBranch(head_pose_geoms_, head_pose_slots(1), t.right, d_right,
                       params, grads);
  }

  if (config_.use_geometry_branch) {
    if (params.IsFrozen(ParamGroup::kGeometry)) return;
    std::vector<double> d_out(d_context.begin(), d_context.end());
    nn::ReluBackwardInPlace(t.geometry_out, d_out);
    std::vector<double> d_h;
    nn::DenseBackward(params.arrays[geometry_slots_[1].w].values,
                      t.geometry_hidden, d_out, grads[geometry_slots_[1].w],
                      grads[geometry_slots_[1].b], &d_h);
    nn::ReluBackwardInPlace(t.geometry_hidden, d_h);
    nn::DenseBackward(params.arrays[geometry_slots_[0].w].values,
                      t.geometry_input, d_h, grads[geometry_slots_[0].w],
                      grads[geometry_slots_[0].b], nullptr);
  } else if (!params.IsFrozen(ParamGroup::kHeadMap)) {
    BackwardConvBranch(head_map_geoms_, head_map_slots_, t.head_map,
                       d_context, params, grads);
  }
}

double LaeoNet::Score(const PairInput& input,
                      const LaeoNetParams& params) const {
  return Forward(input, params, nullptr).probs[1];
}

PoseTrace LaeoNet::PoseForward(const nn::Volume& crops,
                               const LaeoNetParams& params,
                               const PoseHead& head,
                               std::mt19937_64* dropout_rng) const {
  CheckVolume(crops, 3, config_.K, kCropSize, kCropSize, "head crops");
  PoseTrace t;
  t.branch = RunConvBranch(head_pose_geoms_, head_pose_slots(0), crops, false,
                           params, dropout_rng);
  const auto out = nn::DenseForward(head.arrays[0].values,
                                    head.arrays[1].values, t.branch.embedding);
  t.output = {out[0], out[1], out[2]};
  return t;
}

void LaeoNet::PoseBackward(const PoseTrace& trace,
                           const std::array<double, 3>& dout,
                           const LaeoNetParams& params, const PoseHead& head,
                           ParamGrads& branch_grads,
                           ParamGrads& head_grads) const {
  std::vector<double> d_embedding;
  nn::DenseBackward(head.arrays[0].values, trace.branch.embedding, dout,
                    head_grads[0], head_grads[1], &d_embedding);
  BackwardConvBranch(head_pose_geoms_, head_pose_slots(0), trace.branch,
                     d_embedding, params, branch_grads);
}

std::array<double, 3> LaeoNet::PredictPose(const nn::Volume& crops,
                                           const LaeoNetParams& params,
                                           const PoseHead& head) const {
  return PoseForward(crops, params, head, nullptr).output;
}

SampleVolumes ToVolumes(const TrackPairSample& sample) {
  SampleVolumes v;
  v.left = nn::StackFrames(sample.left_crops);
  v.right = nn::StackFrames(sample.right_crops);
  v.head_map = nn::FromImage(sample.head_map);
  return v;
}

double ScoreTrackPair(const LaeoNet& net, const TrackPairSample& sample,
                      const LaeoNetParams& params) {
  sample.Validate();
  const SampleVolumes v = ToVolumes(sample);
  PairInput in;
  in.left_crops = &v.left;
  in.right_crops = &v.right;
  in.head_map = &v.head_map;
  in.geometry = sample.geometry;
  return net.Score(in, params);
}

}  // namespace laeo
