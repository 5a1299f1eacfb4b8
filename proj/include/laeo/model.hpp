#ifndef LAEO_MODEL_HPP_
#define LAEO_MODEL_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "laeo/core.hpp"
#include "laeo/nn.hpp"

namespace laeo {

// Kernel h x w x t and stride h x w x t of one convolution stage. 2D stages
// use kt = st = 1.
struct ConvLayerSpec {
  int filters = 0;
  int kh = 1, kw = 1, kt = 1;
  int sh = 1, sw = 1, st = 1;
  nn::Padding padding = nn::Padding::kSame;

  bool operator==(const ConvLayerSpec&) const = default;
};

std::vector<ConvLayerSpec> DefaultHeadPoseLayers();
std::vector<ConvLayerSpec> DefaultHeadMapLayers();

struct LaeoNetConfig {
  int K = kDefaultK;
  std::vector<ConvLayerSpec> head_pose_layers = DefaultHeadPoseLayers();
  std::vector<ConvLayerSpec> head_map_layers = DefaultHeadMapLayers();
  int fusion_hidden_units = 128;
  double dropout_rate = 0.5;
  // Replaces the head-map branch with the (dx, dy, s_r) geometry branch.
  bool use_geometry_branch = false;
  std::vector<int> geometry_hidden = {64, 16};
  // When false the right head gets its own copy of the head-pose branch.
  bool share_head_pose_weights = true;

  void Validate() const;
  bool operator==(const LaeoNetConfig&) const = default;
};

enum class ParamGroup { kHeadPose, kHeadMap, kGeometry, kFusion, kPoseOutput };

std::string_view ToString(ParamGroup g);
ParamGroup ParamGroupFromString(std::string_view s);

struct ParamArray {
  std::string name;
  ParamGroup group = ParamGroup::kFusion;
  std::vector<int> shape;
  std::vector<double> values;
};

struct LaeoNetParams {
  std::vector<ParamArray> arrays;
  std::set<ParamGroup> frozen;

  bool IsFrozen(ParamGroup g) const { return frozen.contains(g); }
  size_t ParameterCount() const;
  const ParamArray& Get(std::string_view name) const;
  ParamArray& Get(std::string_view name);
};

// One gradient buffer per parameter array, aligned by index.
using ParamGrads = std::vector<std::vector<double>>;
ParamGrads ZeroGradsLike(const std::vector<ParamArray>& arrays);
void AddInto(ParamGrads& dst, const ParamGrads& src);

// Pretraining-only linear stage from the head-pose embedding to
// (yaw, pitch, roll) / pi.
struct PoseHead {
  std::vector<ParamArray> arrays;  // weight [3 x D], bias [3]
};

// Activations of one convolutional branch kept for the backward pass.
struct BranchTrace {
  std::vector<nn::Volume> activations;  // [0] is the branch input
  bool from_features = false;           // started from cached conv output
  std::vector<double> dropout_mask;     // empty in inference
  std::vector<double> dropped;          // flattened features after dropout
  double norm = 0.0;
  std::vector<double> embedding;
};

struct PairInput {
  const nn::Volume* left_crops = nullptr;   // (3, K, 64, 64)
  const nn::Volume* right_crops = nullptr;  // (3, K, 64, 64)
  // Cached head-pose conv outputs; when set they replace the crops.
  const nn::Volume* left_features = nullptr;
  const nn::Volume* right_features = nullptr;
  const nn::Volume* head_map = nullptr;  // (3, 1, 64, 64)
  GeometryTuple geometry;
};

struct PairTrace {
  BranchTrace left;
  BranchTrace right;
  BranchTrace head_map;
  std::vector<double> geometry_input;
  std::vector<double> geometry_hidden;
  std::vector<double> geometry_out;
  std::vector<double> fused;
  std::vector<double> hidden;  // after ReLU
  std::vector<double> hidden_mask;
  std::vector<double> hidden_dropped;
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};  // (p_notLAEO, p_LAEO)
};

struct PoseTrace {
  BranchTrace branch;
  std::array<double, 3> output{};
};

// The three-branch pair classifier. Holds the architecture only; parameters
// live in LaeoNetParams so they can be shared read-only across workers.
class LaeoNet {
 public:
  explicit LaeoNet(LaeoNetConfig config);

  const LaeoNetConfig& config() const { return config_; }

  LaeoNetParams InitParams(uint64_t seed) const;
  PoseHead InitPoseHead(uint64_t seed) const;
  size_t ParameterCount() const;

  int head_pose_dim() const { return head_pose_dim_; }
  int head_map_dim() const { return head_map_dim_; }
  int context_dim() const;
  int fusion_input_dim() const { return 2 * head_pose_dim_ + context_dim(); }

  // Output of the last head-pose conv stage (post ReLU, before dropout).
  // branch 0 is the left head, 1 the right one.
  nn::Volume HeadPoseFeatures(const nn::Volume& crops,
                              const LaeoNetParams& params,
                              int branch = 0) const;

  // Unit-norm embeddings in inference mode.
  std::vector<double> EmbedHeadSequence(const nn::Volume& crops,
                                        const LaeoNetParams& params,
                                        int branch = 0) const;
  std::vector<double> EmbedHeadMap(const nn::Volume& map,
                                   const LaeoNetParams& params) const;
  std::vector<double> EmbedGeometry(const GeometryTuple& g,
                                    const LaeoNetParams& params) const;
  std::array<double, 2> FuseAndClassify(std::span<const double> e_left,
                                        std::span<const double> e_right,
                                        std::span<const double> e_context,
                                        const LaeoNetParams& params) const;

  // Full pass. A null rng means inference (dropout off).
  PairTrace Forward(const PairInput& input, const LaeoNetParams& params,
                    std::mt19937_64* dropout_rng) const;

  // Accumulates parameter gradients for d(loss)/d(logits). Frozen groups are
  // skipped.
  void Backward(const PairInput& input, const PairTrace& trace,
                const std::array<double, 2>& dlogits,
                const LaeoNetParams& params, ParamGrads& grads) const;

  // p_LAEO in inference mode.
  double Score(const PairInput& input, const LaeoNetParams& params) const;

  PoseTrace PoseForward(const nn::Volume& crops, const LaeoNetParams& params,
                        const PoseHead& head,
                        std::mt19937_64* dropout_rng) const;
  // Gradients w.r.t. the head-pose branch (into branch_grads, aligned with
  // params.arrays) and the pose head (into head_grads).
  void PoseBackward(const PoseTrace& trace, const std::array<double, 3>& dout,
                    const LaeoNetParams& params, const PoseHead& head,
                    ParamGrads& branch_grads, ParamGrads& head_grads) const;

  // Normalized (yaw, pitch, roll) in inference mode.
  std::array<double, 3> PredictPose(const nn::Volume& crops,
                                    const LaeoNetParams& params,
                                    const PoseHead& head) const;

  // Throws std::invalid_argument when the arrays do not match this
  // architecture.
  void CheckParams(const LaeoNetParams& params) const;

 private:
  struct Slots {
    size_t w = 0;
    size_t b = 0;
  };
  struct ArrayInfo {
    std::string name;
    ParamGroup group;
    std::vector<int> shape;
    int fan_in = 0;
    int fan_out = 0;
  };

  size_t AddArray(std::string name, ParamGroup group, std::vector<int> shape,
                  int fan_in, int fan_out);
  Slots AddConv(const std::string& prefix, ParamGroup group,
                const nn::ConvGeometry& g);
  Slots AddDense(const std::string& prefix, ParamGroup group, int in, int out);

  BranchTrace RunConvBranch(const std::vector<nn::ConvGeometry>& geoms,
                            const std::vector<Slots>& slots,
                            const nn::Volume& input, bool input_is_features,
                            const LaeoNetParams& params,
                            std::mt19937_64* rng) const;
  nn::Volume RunConvStack(const std::vector<nn::ConvGeometry>& geoms,
                          const std::vector<Slots>& slots,
                          const nn::Volume& input,
                          const LaeoNetParams& params,
                          std::vector<nn::Volume>* keep) const;
  void BackwardConvBranch(const std::vector<nn::ConvGeometry>& geoms,
                          const std::vector<Slots>& slots,
                          const BranchTrace& trace,
                          std::span<const double> d_embedding,
                          const LaeoNetParams& params,
                          ParamGrads& grads) const;
  const std::vector<Slots>& head_pose_slots(int branch) const;

  LaeoNetConfig config_;
  std::vector<ArrayInfo> layout_;
  std::vector<nn::ConvGeometry> head_pose_geoms_;
  std::vector<nn::ConvGeometry> head_map_geoms_;
  std::array<std::vector<Slots>, 2> head_pose_slots_;
  std::vector<Slots> head_map_slots_;
  std::vector<Slots> geometry_slots_;
  Slots fusion_hidden_{};
  Slots fusion_out_{};
  int head_pose_dim_ = 0;
  int head_map_dim_ = 0;
};

// Packs a sample's crops and map into network input volumes.
struct SampleVolumes {
  nn::Volume left;
  nn::Volume right;
  nn::Volume head_map;
};
SampleVolumes ToVolumes(const TrackPairSample& sample);

// Inference-mode p_LAEO for a filled sample.
double ScoreTrackPair(const LaeoNet& net, const TrackPairSample& sample,
                      const LaeoNetParams& params);

}  // namespace laeo

#endif  // LAEO_MODEL_HPP_
