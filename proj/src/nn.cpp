#include "laeo/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace laeo::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

void SamePad(int in, int k, int s, int* out, int* pad) {
  *out = (in + s - 1) / s;
  const int total = std::max((*out - 1) * s + k - in, 0);
  *pad = total / 2;
}

void ValidPad(int in, int k, int s, int* out, int* pad) {
  if (in < k) throw std::invalid_argument("valid convolution kernel too big");
  *out = (in - k) / s + 1;
  *pad = 0;
}

// Fills col (patch_size x out_h*out_w) for output time step ot.
void Im2Col(const ConvGeometry& g, const Volume& x, int ot, RowMat& col) {
  const int plane = g.out_h * g.out_w;
  int r = 0;
  for (int ci = 0; ci < g.in_c; ++ci) {
    for (int dt = 0; dt < g.kt; ++dt) {
      const int it = ot * g.st - g.pad_t + dt;
      const bool t_ok = it >= 0 && it < g.in_t;
      for (int dh = 0; dh < g.kh; ++dh) {
        for (int dw = 0; dw < g.kw; ++dw, ++r) {
          double* row = col.data() + static_cast<size_t>(r) * plane;
          if (!t_ok) {
            std::fill(row, row + plane, 0.0);
            continue;
          }
          const double* src =
              x.data.data() +
              (static_cast<size_t>(ci) * g.in_t + it) * g.in_h * g.in_w;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.sh - g.pad_h + dh;
            double* dst = row + oh * g.out_w;
            if (ih < 0 || ih >= g.in_h) {
              std::fill(dst, dst + g.out_w, 0.0);
              continue;
            }
            const double* src_row = src + static_cast<size_t>(ih) * g.in_w;
            for (int ow = 0; ow < g.out_w; ++ow) {
              const int iw = ow * g.sw - g.pad_w + dw;
              dst[ow] = (iw >= 0 && iw < g.in_w) ? src_row[iw] : 0.0;
            }
          }
        }
      }
    }
  }
}

void Col2ImAdd(const ConvGeometry& g, const RowMat& col, int ot, Volume& dx) {
  const int plane = g.out_h * g.out_w;
  int r = 0;
  for (int ci = 0; ci < g.in_c; ++ci) {
    for (int dt = 0; dt < g.kt; ++dt) {
      const int it = ot * g.st - g.pad_t + dt;
      const bool t_ok = it >= 0 && it < g.in_t;
      for (int dh = 0; dh < g.kh; ++dh) {
        for (int dw = 0; dw < g.kw; ++dw, ++r) {
          if (!t_ok) continue;
          const double* row = col.data() + static_cast<size_t>(r) * plane;
          double* dst =
              dx.data.data() +
              (static_cast<size_t>(ci) * g.in_t + it) * g.in_h * g.in_w;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.sh - g.pad_h + dh;
            if (ih < 0 || ih >= g.in_h) continue;
            double* dst_row = dst + static_cast<size_t>(ih) * g.in_w;
            const double* src = row + oh * g.out_w;
            for (int ow = 0; ow < g.out_w; ++ow) {
              const int iw = ow * g.sw - g.pad_w + dw;
              if (iw >= 0 && iw < g.in_w) dst_row[iw] += src[ow];
            }
          }
        }
      }
    }
  }
}

void CheckInput(const ConvGeometry& g, const Volume& x) {
  if (x.c_dim != g.in_c || x.t_dim != g.in_t || x.h_dim != g.in_h ||
      x.w_dim != g.in_w) {
    throw std::invalid_argument("convolution input shape mismatch");
  }
}

}  // namespace

Volume::Volume(int c, int t, int h, int w, double fill)
    : c_dim(c), t_dim(t), h_dim(h), w_dim(w) {
  data.assign(static_cast<size_t>(c) * t * h * w, fill);
}

Volume StackFrames(std::span<const Image> frames) {
  if (frames.empty()) throw std::invalid_argument("no frames to stack");
  const int h = frames[0].height(), w = frames[0].width();
  const int c = frames[0].channels();
  const int t = static_cast<int>(frames.size());
  Volume v(c, t, h, w);
  for (int ti = 0; ti < t; ++ti) {
    const Image& im = frames[ti];
    if (im.height() != h || im.width() != w || im.channels() != c) {
      throw std::invalid_argument("frames differ in shape");
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int ci = 0; ci < c; ++ci) v.at(ci, ti, y, x) = im.at(y, x, ci);
      }
    }
  }
  return v;
}

Volume FromImage(const Image& image) {
  return StackFrames(std::span<const Image>(&image, 1));
}

std::string_view ToString(Padding p) {
  return p == Padding::kSame ? "same" : "valid";
}

Padding PaddingFromString(std::string_view s) {
  if (s == "same") return Padding::kSame;
  if (s == "valid") return Padding::kValid;
  throw std::invalid_argument("unknown padding '" + std::string(s) + "'");
}

ConvGeometry ConvGeometry::Make(int in_c, int in_t, int in_h, int in_w,
                                int out_c, int kt, int kh, int kw, int st,
                                int sh, int sw, Padding padding) {
  if (in_c <= 0 || in_t <= 0 || in_h <= 0 || in_w <= 0 || out_c <= 0 ||
      kt <= 0 || kh <= 0 || kw <= 0 || st <= 0 || sh <= 0 || sw <= 0) {
    throw std::invalid_argument("convolution dimensions must be positive");
  }
  ConvGeometry g;
  g.in_c = in_c;
  g.in_t = in_t;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_c = out_c;
  g.kt = kt;
  g.kh = kh;
  g.kw = kw;
  g.st = st;
  g.sh = sh;
  g.sw = sw;
  auto pad = padding == Padding::kSame ? SamePad : ValidPad;
  pad(in_t, kt, st, &g.out_t, &g.pad_t);
  pad(in_h, kh, sh, &g.out_h, &g.pad_h);
  pad(in_w, kw, sw, &g.out_w, &g.pad_w);
  return g;
}

Volume ConvForward(const ConvGeometry& g, std::span<const double> weights,
                   std::span<const double> bias, const Volume& x) {
  CheckInput(g, x);
  const int plane = g.out_h * g.out_w;
  const int patch = static_cast<int>(g.patch_size());
  Volume y(g.out_c, g.out_t, g.out_h, g.out_w);
  Eigen::Map<const RowMat> w(weights.data(), g.out_c, patch);
  Eigen::Map<const Eigen::VectorXd> b(bias.data(), g.out_c);
  RowMat col(patch, plane);
  for (int ot = 0; ot < g.out_t; ++ot) {
    Im2Col(g, x, ot, col);
    StridedMap out(y.data.data() + static_cast<size_t>(ot) * plane, g.out_c,
                   plane, Eigen::OuterStride<>(g.out_t * plane));
    out.noalias() = w * col;
    out.colwise() += b;
  }
  return y;
}

void ConvBackward(const ConvGeometry& g, std::span<const double> weights,
                  const Volume& x, const Volume& dy,
                  std::span<double> dweights, std::span<double> dbias,
                  Volume* dx) {
  CheckInput(g, x);
  const int plane = g.out_h * g.out_w;
  const int patch = static_cast<int>(g.patch_size());
  Eigen::Map<const RowMat> w(weights.data(), g.out_c, patch);
  Eigen::Map<RowMat> dw(dweights.data(), g.out_c, patch);
  Eigen::Map<Eigen::VectorXd> db(dbias.data(), g.out_c);
  if (dx != nullptr) *dx = Volume(g.in_c, g.in_t, g.in_h, g.in_w);
  RowMat col(patch, plane);
  RowMat dcol(patch, plane);
  for (int ot = 0; ot < g.out_t; ++ot) {
    Im2Col(g, x, ot, col);
    ConstStridedMap grad(dy.data.data() + static_cast<size_t>(ot) * plane,
                         g.out_c, plane,
                         Eigen::OuterStride<>(g.out_t * plane));
    dw.noalias() += grad * col.transpose();
    db += grad.rowwise().sum();
    if (dx != nullptr) {
      dcol.noalias() = w.transpose() * grad;
      Col2ImAdd(g, dcol, ot, *dx);
    }
  }
}

std::vector<double> DenseForward(std::span<const double> weights,
                                 std::span<const double> bias,
                                 std::span<const double> x) {
  const auto out_n = static_cast<Eigen::Index>(bias.size());
  const auto in_n = static_cast<Eigen::Index>(x.size());
  if (weights.size() != static_cast<size_t>(out_n * in_n)) {
    throw std::invalid_argument("dense layer input size mismatch");
  }
  std::vector<double> y(bias.begin(), bias.end());
  Eigen::Map<const RowMat> w(weights.data(), out_n, in_n);
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), in_n);
  Eigen::Map<Eigen::VectorXd> yv(y.data(), out_n);
  yv.noalias() += w * xv;
  return y;
}

void DenseBackward(std::span<const double> weights, std::span<const double> x,
                   std::span<const double> dy, std::span<double> dweights,
                   std::span<double> dbias, std::vector<double>* dx) {
  const auto out_n = static_cast<Eigen::Index>(dy.size());
  const auto in_n = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const RowMat> w(weights.data(), out_n, in_n);
  Eigen::Map<RowMat> dw(dweights.data(), out_n, in_n);
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), in_n);
  Eigen::Map<const Eigen::VectorXd> g(dy.data(), out_n);
  dw.noalias() += g * xv.transpose();
  Eigen::Map<Eigen::VectorXd>(dbias.data(), out_n) += g;
  if (dx != nullptr) {
    dx->assign(static_cast<size_t>(in_n), 0.0);
    Eigen::Map<Eigen::VectorXd>(dx->data(), in_n).noalias() =
        w.transpose() * g;
  }
}

void ReluInPlace(std::span<double> v) {
  for (double& e : v) e = e > 0.0 ? e : 0.0;
}

void ReluBackwardInPlace(std::span<const double> output,
                         std::span<double> grad) {
  for (size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > 0.0)) grad[i] = 0.0;
  }
}

std::vector<double> L2Normalize(std::span<const double> v, double* norm_out) {
  double sq = 0.0;
  for (double e : v) sq += e * e;
  const double norm = std::sqrt(sq);
  if (norm_out != nullptr) *norm_out = norm;
  const double denom = norm + kL2Epsilon;
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / denom;
  return out;
}

std::vector<double> L2NormalizeBackward(std::span<const double> v, double norm,
                                        std::span<const double> dy) {
  const double denom = norm + kL2Epsilon;
  std::vector<double> dv(v.size());
  double dot = 0.0;
  for (size_t i = 0; i < v.size(); ++i) dot += dy[i] * v[i];
  const double coeff = norm > 0.0 ? dot / (norm * denom * denom) : 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    dv[i] = dy[i] / denom - v[i] * coeff;
  }
  return dv;
}

std::vector<double> DropoutMask(size_t n, double rate, std::mt19937_64& rng) {
  std::vector<double> mask(n, 1.0);
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& m : mask) m = u(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

std::vector<double> Softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& e : p) e /= sum;
  return p;
}

void GlorotUniform(std::span<double> w, int fan_in, int fan_out,
                   std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& e : w) e = u(rng);
}

}  // namespace laeo::nn
