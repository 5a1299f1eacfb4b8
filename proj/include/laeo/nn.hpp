#ifndef LAEO_NN_HPP_
#define LAEO_NN_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "laeo/image.hpp"

// Minimal double-precision layer kernels with explicit backward passes.
namespace laeo::nn {

// Channel-major activation volume: data[((c * t_dim + t) * h_dim + y) * w_dim
// + x]. 2D maps use t_dim = 1.
struct Volume {
  int c_dim = 0;
  int t_dim = 0;
  int h_dim = 0;
  int w_dim = 0;
  std::vector<double> data;

  Volume() = default;
  Volume(int c, int t, int h, int w, double fill = 0.0);

  size_t size() const { return data.size(); }
  double& at(int c, int t, int y, int x) {
    return data[((static_cast<size_t>(c) * t_dim + t) * h_dim + y) * w_dim +
                x];
  }
  double at(int c, int t, int y, int x) const {
    return data[((static_cast<size_t>(c) * t_dim + t) * h_dim + y) * w_dim +
                x];
  }
};

// Stacks HxWxC images along time into a (C, T, H, W) volume.
Volume StackFrames(std::span<const Image> frames);
Volume FromImage(const Image& image);

enum class Padding { kSame, kValid };

std::string_view ToString(Padding p);
Padding PaddingFromString(std::string_view s);

// Shape bookkeeping for a 3D convolution. "Same" padding follows the usual
// convention: out = ceil(in / stride), with the extra pad going after.
struct ConvGeometry {
  int in_c = 0, in_t = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_t = 0, out_h = 0, out_w = 0;
  int kt = 1, kh = 1, kw = 1;
  int st = 1, sh = 1, sw = 1;
  int pad_t = 0, pad_h = 0, pad_w = 0;  // leading pads

  static ConvGeometry Make(int in_c, int in_t, int in_h, int in_w, int out_c,
                           int kt, int kh, int kw, int st, int sh, int sw,
                           Padding padding);

  size_t weight_count() const {
    return static_cast<size_t>(out_c) * in_c * kt * kh * kw;
  }
  size_t patch_size() const { return static_cast<size_t>(in_c) * kt * kh * kw; }
};

// Weights are laid out [out_c][in_c][kt][kh][kw].
Volume ConvForward(const ConvGeometry& g, std::span<const double> weights,
                   std::span<const double> bias, const Volume& x);

// Accumulates into dweights/dbias. dx may be null when the input gradient is
// not needed.
void ConvBackward(const ConvGeometry& g, std::span<const double> weights,
                  const Volume& x, const Volume& dy,
                  std::span<double> dweights, std::span<double> dbias,
                  Volume* dx);

// Row-major weights [out][in].
std::vector<double> DenseForward(std::span<const double> weights,
                                 std::span<const double> bias,
                                 std::span<const double> x);

void DenseBackward(std::span<const double> weights, std::span<const double> x,
                   std::span<const double> dy, std::span<double> dweights,
                   std::span<double> dbias, std::vector<double>* dx);

void ReluInPlace(std::span<double> v);
// Zeroes gradient entries where the activation output is not positive.
void ReluBackwardInPlace(std::span<const double> output,
                         std::span<double> grad);

inline constexpr double kL2Epsilon = 1e-8;

// v / (||v|| + eps). Also returns ||v|| through norm_out.
std::vector<double> L2Normalize(std::span<const double> v, double* norm_out);
std::vector<double> L2NormalizeBackward(std::span<const double> v, double norm,
                                        std::span<const double> dy);

// Inverted dropout mask: entries are 0 with probability rate and 1/(1-rate)
// otherwise.
std::vector<double> DropoutMask(size_t n, double rate, std::mt19937_64& rng);

std::vector<double> Softmax(std::span<const double> logits);

// Glorot-uniform initialization.
void GlorotUniform(std::span<double> w, int fan_in, int fan_out,
                   std::mt19937_64& rng);

}  // namespace laeo::nn

#endif  // LAEO_NN_HPP_
