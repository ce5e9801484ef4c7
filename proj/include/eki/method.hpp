#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "eki/field.hpp"
#include "eki/forward.hpp"

namespace eki {

struct Diagnostics {
  int iteration = 0;
  std::optional<double> relative_error;  // ||u_n - truth|| / ||truth||, when truth known
  double misfit = 0.0;                   // ||y - G(u_n)||_Gamma at the ensemble mean
  std::vector<double> member_misfits;    // ||y - p^(j)||_Gamma on the current p-blocks
};

/// Discrepancy-principle stop: first n with misfit <= tau * noise_level.
struct StoppingRule {
  double tau = 1.1;
  double noise_level = 0.0;  // ||eta||_Gamma in synthetic mode, else sqrt(kappa)
  int max_iterations = 30;
};

/// Ensemble of augmented states (u^(j), p^(j)) packed column-wise, the
/// iteration counter, and the span of the initial ensemble.
class EkiState {
 public:
  EkiState(Subspace initial_span, DenseMatrix u_block, DenseMatrix p_block);

  int ensemble_size() const { return static_cast<int>(u_block_.cols()); }
  int iteration() const { return iteration_; }
  const Basis& basis() const { return span_.basis(); }
  const Subspace& initial_span() const { return span_; }

  const DenseMatrix& u_block() const { return u_block_; }
  const DenseMatrix& p_block() const { return p_block_; }
  DenseMatrix& u_block() { return u_block_; }
  DenseMatrix& p_block() { return p_block_; }

  Field member_u(int j) const;
  std::vector<double> member_p(int j) const;
  void advance_iteration() { ++iteration_; }

 private:
  Subspace span_;
  DenseMatrix u_block_;  // dim x J
  DenseMatrix p_block_;  // kappa x J
  int iteration_ = 0;
};

struct EnsembleStats {
  Field u_mean;
  std::vector<double> p_mean;
  DenseMatrix c_up;  // dim x kappa
  DenseMatrix c_pp;  // kappa x kappa, symmetrized
};

/// Initial ensemble z0^(j) = (psi^(j), G(psi^(j))), iteration 0.
EkiState eki_init(const Subspace& initial_span, const ForwardModel& model);

/// Prediction step: p^(j) <- G(u^(j)), u-blocks untouched.
void predict(EkiState& state, const ForwardModel& model);

/// Sample mean and the covariance blocks in deviation form with 1/J
/// normalization: C^up = (1/J) sum u^(j) (ptilde^(j))^T and
/// C^pp = (1/J) sum p^(j) (ptilde^(j))^T, the latter symmetrized.
EnsembleStats ensemble_stats(const EkiState& state);

/// Analysis step with per-member perturbed data y + eta^(j); eta^(j) is drawn
/// from stream.with_member(j).with_iteration(n+1) so the update is
/// order-independent, or zero when perturb is false.
void analyze(EkiState& state, std::span<const double> y, const WeightedNorm& gamma,
             const RandomStream& stream, bool perturb);

/// Ensemble mean of the parameter block.
Field estimate(const EkiState& state);

struct RunOptions {
  bool perturb = true;
  /// Keep iterating to max_iterations after the discrepancy stop fires
  /// (the stop iteration is still recorded); used for error-curve studies.
  bool continue_to_max = false;
  bool store_ensemble_history = false;
  std::function<void(const EkiState&)> observer;  // called after init and each analysis
};

struct EkiRunResult {
  std::vector<Diagnostics> history;  // entries n = 0 .. last recorded iteration
  std::vector<Field> estimates;      // estimate per recorded iteration
  int stopped_iteration = 0;         // discrepancy crossing, or last iteration run
  bool converged = false;            // discrepancy met within max_iterations
  std::vector<DenseMatrix> ensemble_history;  // u-blocks per iteration, when requested
  EkiState final_state;

  const Field& estimate_at_stop() const {
    return estimates[static_cast<std::size_t>(stopped_iteration)];
  }
};

/// Full iteration: predict / analyze / estimate with diagnostics, terminated
/// by the discrepancy principle or max_iterations.
EkiRunResult run(const Subspace& initial_span, const ForwardModel& model,
                 std::span<const double> y, const WeightedNorm& gamma,
                 const StoppingRule& rule, const RandomStream& stream,
                 const std::optional<Field>& truth, const RunOptions& options = {});

}  // namespace eki
