#include "laeo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace laeo {
namespace {

int Sign(double x) { return (x > 0.0) - (x < 0.0); }

void CheckLabel(int label) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("LAEO label must be 0 or 1");
  }
}

}  // namespace

double LaeoLoss(int label, double p_laeo) {
  CheckLabel(label);
  const double p =
      std::clamp(p_laeo, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double LaeoLossGrad(int label, double p_laeo) {
  CheckLabel(label);
  if (p_laeo < kProbabilityClamp || p_laeo > 1.0 - kProbabilityClamp) {
    return 0.0;
  }
  return label == 1 ? -1.0 / p_laeo : 1.0 / (1.0 - p_laeo);
}

std::array<double, 2> LaeoLossGradLogits(int label,
                                         const std::array<double, 2>& probs) {
  // dp1/dz1 = p1 p0, dp1/dz0 = -p1 p0.
  const double d = LaeoLossGrad(label, probs[1]) * probs[0] * probs[1];
  return {-d, d};
}

double SmoothL1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double SmoothL1Grad(double x) {
  return std::abs(x) < 1.0 ? x : static_cast<double>(Sign(x));
}

double SignLoss(double predicted, double target) {
  return std::max(0.0, -static_cast<double>(Sign(predicted) * Sign(target)));
}

void PoseLossWeights::Validate() const {
  if (yaw < 0.0 || pitch < 0.0 || roll < 0.0 || sign < 0.0) {
    throw std::invalid_argument("pose loss weights must be nonnegative");
  }
}

double HeadPoseLoss(const std::array<double, 3>& predicted,
                    const std::array<double, 3>& target,
                    const PoseLossWeights& w) {
  w.Validate();
  return w.yaw * SmoothL1(predicted[0] - target[0]) +
         w.pitch * SmoothL1(predicted[1] - target[1]) +
         w.roll * SmoothL1(predicted[2] - target[2]) +
         w.sign * SignLoss(predicted[0], target[0]);
}

double HeadPoseLoss(const PoseAngles& predicted, const PoseAngles& target,
                    const PoseLossWeights& w) {
  return HeadPoseLoss(predicted.normalized(), target.normalized(), w);
}

std::array<double, 3> HeadPoseLossGrad(const std::array<double, 3>& predicted,
                                       const std::array<double, 3>& target,
                                       const PoseLossWeights& w) {
  w.Validate();
  return {w.yaw * SmoothL1Grad(predicted[0] - target[0]),
          w.pitch * SmoothL1Grad(predicted[1] - target[1]),
          w.roll * SmoothL1Grad(predicted[2] - target[2])};
}

}  // namespace laeo
