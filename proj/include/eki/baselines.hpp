#pragma once

#include <optional>
#include <span>
#include <vector>

#include "eki/field.hpp"
#include "eki/forward.hpp"
#include "eki/method.hpp"

namespace eki {

struct LsSettings {
  int max_lm_iterations = 50;
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 0.1;
  double fd_step = 1e-6;  // per-coefficient step is fd_step * (1 + |c_j|)
  StoppingRule stopping;  // tau and noise level for the discrepancy variant
};

enum class LsRegularization {
  /// Stop the iteration at the discrepancy bound tau * noise_level; each step
  /// picks the damping so the linearized residual shrinks by a fixed factor
  /// and never crosses the bound, which is what makes the truncated iteration
  /// act as the regularizer.
  discrepancy_stop,
  /// Minimize the Tikhonov-Phillips functional
  /// ||y - G(u)||_Gamma^2 + ||u - mean||_C^2 over the subspace.
  tikhonov,
};

struct LsResult {
  Field estimate;
  std::vector<double> coefficients;
  double misfit = 0.0;  // data misfit ||y - G(u)||_Gamma at the returned point
  int iterations = 0;
  bool converged = false;
};

/// Closed-form solution mean + C G^T (G C G^T + Gamma)^{-1} (y - G mean) for a
/// linear diagonal model; throws NotLinearModel otherwise. With the canonical
/// spectral prior this reduces to an independent scalar solve per mode.
Field tikhonov_linear(const ForwardModel& model, const GaussianMeasure& prior,
                      std::span<const double> y, const WeightedNorm& gamma);

/// Levenberg-Marquardt over the subspace coefficients c (u = sum c_j psi_j)
/// with a forward-difference Jacobian. The tikhonov variant needs the prior.
LsResult subspace_ls(const ForwardModel& model, const Subspace& span,
                     std::span<const double> y, const WeightedNorm& gamma,
                     const LsSettings& settings, LsRegularization regularization,
                     const GaussianMeasure* prior = nullptr);

/// L2 projection of the truth onto the span (Gram pseudo-solve).
Field best_approximation(const Subspace& span, const Field& truth);

}  // namespace eki
