#include "eki/method.hpp"

#include <cmath>

#include "eki/errors.hpp"

namespace eki {

EkiState::EkiState(Subspace initial_span, DenseMatrix u_block, DenseMatrix p_block)
    : span_(std::move(initial_span)), u_block_(std::move(u_block)), p_block_(std::move(p_block)) {
  if (u_block_.cols() != p_block_.cols())
    throw DimensionMismatch("EkiState: u and p blocks disagree on ensemble size");
  if (u_block_.rows() != span_.basis().dimension())
    throw DimensionMismatch("EkiState: u block rows do not match basis");
}

Field EkiState::member_u(int j) const {
  return Field(basis(), u_block_.column(static_cast<std::size_t>(j)));
}

std::vector<double> EkiState::member_p(int j) const {
  return p_block_.column(static_cast<std::size_t>(j));
}

EkiState eki_init(const Subspace& initial_span, const ForwardModel& model) {
  const int J = initial_span.size();
  const std::size_t kappa = model.observation_spec().size;
  DenseMatrix p(kappa, static_cast<std::size_t>(J));
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < J; ++j) {
    const std::vector<double> pj = model.evaluate(initial_span.member(j));
    p.set_column(static_cast<std::size_t>(j), pj);
  }
  return EkiState(initial_span, initial_span.members(), std::move(p));
}

void predict(EkiState& state, const ForwardModel& model) {
  const int J = state.ensemble_size();
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < J; ++j) {
    const std::vector<double> pj = model.evaluate(state.member_u(j));
    state.p_block().set_column(static_cast<std::size_t>(j), pj);
  }
}

namespace {

EnsembleStats compute_stats(const EkiState& state) {
  const std::size_t J = static_cast<std::size_t>(state.ensemble_size());
  const auto& U = state.u_block();
  const auto& P = state.p_block();
  const double inv_j = 1.0 / static_cast<double>(J);

  std::vector<double> u_mean(U.rows(), 0.0);
  for (std::size_t i = 0; i < U.rows(); ++i) {
    const double* row = U.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += row[j];
    u_mean[i] = s * inv_j;
  }
  std::vector<double> p_mean(P.rows(), 0.0);
  for (std::size_t i = 0; i < P.rows(); ++i) {
    const double* row = P.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += row[j];
    p_mean[i] = s * inv_j;
  }

  DenseMatrix p_dev = P;
  for (std::size_t i = 0; i < P.rows(); ++i) {
    double* row = p_dev.row(i);
    const double mean = p_mean[i];
    for (std::size_t j = 0; j < J; ++j) row[j] -= mean;
  }

  DenseMatrix c_up = matmul_nt(U, p_dev);
  DenseMatrix c_pp = matmul_nt(P, p_dev);
  for (double& v : c_up.data()) v *= inv_j;
  for (double& v : c_pp.data()) v *= inv_j;
  for (std::size_t i = 0; i < c_pp.rows(); ++i)
    for (std::size_t j = i + 1; j < c_pp.cols(); ++j) {
      const double v = 0.5 * (c_pp(i, j) + c_pp(j, i));
      c_pp(i, j) = v;
      c_pp(j, i) = v;
    }

  return EnsembleStats{Field(state.basis(), std::move(u_mean)), std::move(p_mean),
                       std::move(c_up), std::move(c_pp)};
}

}  // namespace

EnsembleStats ensemble_stats(const EkiState& state) {
  if (state.ensemble_size() < 2)
    throw EnsembleTooSmall("ensemble_stats: need at least two members");
  return compute_stats(state);
}

void analyze(EkiState& state, std::span<const double> y, const WeightedNorm& gamma,
             const RandomStream& stream, bool perturb) {
  const std::size_t kappa = state.p_block().rows();
  if (y.size() != kappa) throw DimensionMismatch("analyze: data length mismatch");
  gamma.check_length(kappa);
  const std::size_t J = static_cast<std::size_t>(state.ensemble_size());
  if (J < 2) throw EnsembleTooSmall("analyze: need at least two members");

  EnsembleStats stats = compute_stats(state);

  DenseMatrix m = stats.c_pp;
  for (std::size_t i = 0; i < kappa; ++i) m(i, i) += gamma.variance(i);

  // Right-hand sides y^(j) - p^(j), perturbations keyed by (member, iteration).
  const auto next_iter = static_cast<std::uint32_t>(state.iteration() + 1);
  DenseMatrix rhs(kappa, J);
  const auto& P = state.p_block();
#pragma omp parallel for schedule(static)
  for (long long jj = 0; jj < static_cast<long long>(J); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    std::vector<double> eta;
    if (perturb) {
      eta = gaussian_draws(
          stream.with_member(static_cast<std::uint32_t>(j)).with_iteration(next_iter), kappa);
      for (std::size_t i = 0; i < kappa; ++i)
        eta[i] *= std::sqrt(gamma.variance(i));
    }
    for (std::size_t i = 0; i < kappa; ++i)
      rhs(i, j) = y[i] + (perturb ? eta[i] : 0.0) - P(i, j);
  }

  // d^(j) = (C^pp + Gamma)^{-1} (y^(j) - p^(j)) for all members at once
  CholeskyFactor factor(m);
  factor.solve_in_place(rhs);

  matmul_accumulate(state.u_block(), stats.c_up, rhs);
  matmul_accumulate(state.p_block(), stats.c_pp, rhs);
  state.advance_iteration();
}

Field estimate(const EkiState& state) {
  const auto& U = state.u_block();
  const std::size_t J = U.cols();
  std::vector<double> mean(U.rows(), 0.0);
  const double inv_j = 1.0 / static_cast<double>(J);
  for (std::size_t i = 0; i < U.rows(); ++i) {
    const double* row = U.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += row[j];
    mean[i] = s * inv_j;
  }
  return Field(state.basis(), std::move(mean));
}

namespace {

Diagnostics make_diagnostics(const EkiState& state, const Field& est,
                             std::span<const double> y, const WeightedNorm& gamma,
                             const ForwardModel& model, const std::optional<Field>& truth) {
  Diagnostics d;
  d.iteration = state.iteration();
  const std::vector<double> response = model.evaluate(est);
  d.misfit = weighted_misfit(y, response, gamma);
  if (truth) {
    const double tn = truth->norm();
    d.relative_error = tn > 0.0 ? (est - *truth).norm() / tn : (est - *truth).norm();
  }
  const int J = state.ensemble_size();
  d.member_misfits.resize(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    const std::vector<double> pj = state.member_p(j);
    d.member_misfits[static_cast<std::size_t>(j)] = weighted_misfit(y, pj, gamma);
  }
  return d;
}

}  // namespace

EkiRunResult run(const Subspace& initial_span, const ForwardModel& model,
                 std::span<const double> y, const WeightedNorm& gamma,
                 const StoppingRule& rule, const RandomStream& stream,
                 const std::optional<Field>& truth, const RunOptions& options) {
  if (!(rule.tau > 1.0)) throw Error("run: stopping rule requires tau > 1");
  if (rule.max_iterations < 1) throw Error("run: max_iterations must be at least 1");

  EkiState state = eki_init(initial_span, model);

  EkiRunResult result{.history = {},
                      .estimates = {},
                      .stopped_iteration = 0,
                      .converged = false,
                      .ensemble_history = {},
                      .final_state = state};

  auto record = [&](const EkiState& s) {
    Field est = estimate(s);
    result.history.push_back(make_diagnostics(s, est, y, gamma, model, truth));
    result.estimates.push_back(std::move(est));
    if (options.store_ensemble_history) result.ensemble_history.push_back(s.u_block());
    if (options.observer) options.observer(s);
  };

  record(state);
  const double threshold = rule.tau * rule.noise_level;
  bool met = result.history.back().misfit <= threshold;
  result.converged = met;
  result.stopped_iteration = 0;

  while (state.iteration() < rule.max_iterations && (!met || options.continue_to_max)) {
    predict(state, model);
    analyze(state, y, gamma, stream, options.perturb);
    record(state);
    if (!met && result.history.back().misfit <= threshold) {
      met = true;
      result.converged = true;
      result.stopped_iteration = state.iteration();
    }
  }
  if (!met) result.stopped_iteration = state.iteration();

  result.final_state = std::move(state);
  return result;
}

}  // namespace eki
