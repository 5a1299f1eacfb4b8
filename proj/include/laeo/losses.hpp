#ifndef LAEO_LOSSES_HPP_
#define LAEO_LOSSES_HPP_

#include <array>

#include "laeo/core.hpp"

namespace laeo {

inline constexpr double kProbabilityClamp = 1e-7;

// Binary cross entropy: -log of the probability given to the true class.
// p_laeo is clamped to [eps, 1 - eps].
double LaeoLoss(int label, double p_laeo);
// d LaeoLoss / d p_laeo; zero where the clamp is active.
double LaeoLossGrad(int label, double p_laeo);
// Gradient with respect to the two logits (notLAEO, LAEO) of a softmax.
std::array<double, 2> LaeoLossGradLogits(int label,
                                         const std::array<double, 2>& probs);

// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double SmoothL1(double x);
double SmoothL1Grad(double x);

// max(0, -sign(predicted) * sign(target)); 1 only when the signs strictly
// disagree. Piecewise constant, so it carries no gradient.
double SignLoss(double predicted, double target);

struct PoseLossWeights {
  double yaw = 0.6;
  double pitch = 0.3;
  double roll = 0.1;
  double sign = 0.1;

  // Throws std::invalid_argument on negative weights.
  void Validate() const;
};

// Weighted smooth-L1 on each normalized angle error plus the yaw sign term.
// Inputs are normalized angles (radians / pi), ordered (yaw, pitch, roll).
double HeadPoseLoss(const std::array<double, 3>& predicted,
                    const std::array<double, 3>& target,
                    const PoseLossWeights& w = {});
double HeadPoseLoss(const PoseAngles& predicted, const PoseAngles& target,
                    const PoseLossWeights& w = {});
std::array<double, 3> HeadPoseLossGrad(const std::array<double, 3>& predicted,
                                       const std::array<double, 3>& target,
                                       const PoseLossWeights& w = {});

}  // namespace laeo

#endif  // LAEO_LOSSES_HPP_
