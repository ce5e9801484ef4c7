#include "eki/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "eki/errors.hpp"

namespace eki {

Field tikhonov_linear(const ForwardModel& model, const GaussianMeasure& prior,
                      std::span<const double> y, const WeightedNorm& gamma) {
  const auto* linear = dynamic_cast<const DiagonalLinearModel*>(&model);
  if (!linear)
    throw NotLinearModel("tikhonov_linear: model is not certified linear");
  if (prior.basis() != model.input_basis())
    throw BasisMismatch("tikhonov_linear: prior basis differs from model basis");
  const std::size_t dim = model.input_basis().dimension();
  if (y.size() != dim) throw DimensionMismatch("tikhonov_linear: data length mismatch");
  gamma.check_length(dim);
  const auto& g = linear->diagonal();
  const Field& mean = prior.mean();

  if (prior.canonical_eigenfields()) {
    // G and C share the coordinate basis, so Eq. u = mean + CG(GCG+Gamma)^{-1}(y-G mean)
    // decouples into one scalar update per mode.
    std::vector<double> u(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const double lam = k < prior.n_modes() ? prior.eigenvalue(k) : 0.0;
      const double denom = g[k] * lam * g[k] + gamma.variance(k);
      u[k] = mean[k] + lam * g[k] * (y[k] - g[k] * mean[k]) / denom;
    }
    return Field(model.input_basis(), std::move(u));
  }

  // Dense fallback: C = Phi Lambda Phi^T.
  const DenseMatrix& phi = prior.eigenfield_matrix();
  DenseMatrix scaled = phi;  // columns scaled by lambda
  for (std::size_t j = 0; j < scaled.cols(); ++j)
    for (std::size_t i = 0; i < scaled.rows(); ++i)
      scaled(i, j) *= prior.eigenvalue(j);
  DenseMatrix c = matmul_nt(scaled, phi);
  DenseMatrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = g[i] * c(i, j) * g[j];
  for (std::size_t i = 0; i < dim; ++i) m(i, i) += gamma.variance(i);
  std::vector<double> innovation(dim);
  for (std::size_t i = 0; i < dim; ++i) innovation[i] = y[i] - g[i] * mean[i];
  CholeskyFactor factor(m);
  const std::vector<double> w = factor.solve(innovation);
  std::vector<double> u(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += c(i, j) * g[j] * w[j];
    u[i] = mean[i] + s;
  }
  return Field(model.input_basis(), std::move(u));
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Residual whose squared norm is the objective: the Gamma-weighted data
/// residual, optionally followed by the C-weighted prior residual.
class LsResidual {
 public:
  LsResidual(const ForwardModel& model, const Subspace& span, std::span<const double> y,
             const WeightedNorm& gamma, const GaussianMeasure* prior)
      : model_(model), span_(span), y_(y), gamma_(gamma), prior_(prior) {}

  std::size_t size() const {
    return y_.size() + (prior_ ? prior_->n_modes() : 0);
  }

  std::vector<double> operator()(std::span<const double> c) const {
    Field u = span_.combine(c);
    const std::vector<double> response = model_.evaluate(u);
    std::vector<double> r(size());
    for (std::size_t i = 0; i < y_.size(); ++i)
      r[i] = (y_[i] - response[i]) / std::sqrt(gamma_.variance(i));
    if (prior_) {
      // C^{-1/2}(u - mean) in the prior eigenbasis
      const Field& mean = prior_->mean();
      std::vector<double> diff(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - mean[i];
      for (std::size_t q = 0; q < prior_->n_modes(); ++q) {
        double proj;
        if (prior_->canonical_eigenfields()) {
          proj = diff[q];
        } else {
          proj = 0.0;
          for (std::size_t i = 0; i < diff.size(); ++i)
            proj += prior_->eigenfield_matrix()(i, q) * diff[i];
        }
        r[y_.size() + q] = proj / std::sqrt(prior_->eigenvalue(q));
      }
    }
    return r;
  }

  double data_misfit(std::span<const double> c) const {
    Field u = span_.combine(c);
    return weighted_misfit(y_, model_.evaluate(u), gamma_);
  }

 private:
  const ForwardModel& model_;
  const Subspace& span_;
  std::span<const double> y_;
  const WeightedNorm& gamma_;
  const GaussianMeasure* prior_;
};

DenseMatrix fd_jacobian(const LsResidual& residual, std::span<const double> c,
                        const std::vector<double>& r0, double fd_step) {
  const std::size_t n = c.size();
  DenseMatrix jac(r0.size(), n);
  std::vector<double> cp(c.begin(), c.end());
#pragma omp parallel for schedule(dynamic) firstprivate(cp)
  for (long long qq = 0; qq < static_cast<long long>(n); ++qq) {
    const auto q = static_cast<std::size_t>(qq);
    const double h = fd_step * (1.0 + std::abs(c[q]));
    const double saved = cp[q];
    cp[q] = saved + h;
    const std::vector<double> r1 = residual(cp);
    cp[q] = saved;
    for (std::size_t i = 0; i < r1.size(); ++i) jac(i, q) = (r1[i] - r0[i]) / h;
  }
  return jac;
}

std::vector<double> lm_step(const DenseMatrix& jtj, std::span<const double> grad, double mu) {
  DenseMatrix damped = jtj;
  for (std::size_t i = 0; i < damped.rows(); ++i) damped(i, i) += mu;
  CholeskyFactor factor(damped);
  std::vector<double> neg(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) neg[i] = -grad[i];
  return factor.solve(neg);
}

double linearized_norm(const DenseMatrix& jac, const std::vector<double>& r0,
                       std::span<const double> step) {
  double s = 0.0;
  for (std::size_t i = 0; i < jac.rows(); ++i) {
    double v = r0[i];
    const double* row = jac.row(i);
    for (std::size_t q = 0; q < jac.cols(); ++q) v += row[q] * step[q];
    s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

LsResult subspace_ls(const ForwardModel& model, const Subspace& span,
                     std::span<const double> y, const WeightedNorm& gamma,
                     const LsSettings& settings, LsRegularization regularization,
                     const GaussianMeasure* prior) {
  const int J = span.size();
  if (J > 200) throw Error("subspace_ls: subspace dimension exceeds 200");
  if (regularization == LsRegularization::tikhonov && !prior)
    throw Error("subspace_ls: tikhonov regularization needs the prior");
  if (y.size() != model.observation_spec().size)
    throw DimensionMismatch("subspace_ls: data length mismatch");

  LsResidual residual(model, span, y, gamma,
                      regularization == LsRegularization::tikhonov ? prior : nullptr);

  // Start at the ensemble mean: u(c0) = mean of the members.
  std::vector<double> c(static_cast<std::size_t>(J), 1.0 / static_cast<double>(J));
  std::vector<double> r0 = residual(c);
  double f0 = norm2(r0);

  const bool discrepancy = regularization == LsRegularization::discrepancy_stop;
  const double bound = discrepancy
                           ? settings.stopping.tau * settings.stopping.noise_level
                           : 0.0;

  double mu = settings.initial_damping;
  double rho = 0.8;  // per-step linearized reduction factor (discrepancy mode)
  int iterations = 0;
  bool converged = !discrepancy ? false : norm2(r0) <= bound;
  int accepted_steps = 0;

  for (int it = 0; it < settings.max_lm_iterations && !converged; ++it) {
    if (discrepancy && norm2(r0) <= bound) {
      converged = true;
      break;
    }
    const DenseMatrix jac = fd_jacobian(residual, c, r0, settings.fd_step);
    const DenseMatrix jtj = matmul_nt(transpose(jac), transpose(jac));
    std::vector<double> grad(static_cast<std::size_t>(J), 0.0);
    for (std::size_t i = 0; i < jac.rows(); ++i)
      for (std::size_t q = 0; q < jac.cols(); ++q) grad[q] += jac(i, q) * r0[i];
    const double gmax = *std::max_element(grad.begin(), grad.end(),
                                          [](double a, double b) {
                                            return std::abs(a) < std::abs(b);
                                          });
    if (!discrepancy && std::abs(gmax) <= 1e-12 * std::max(1.0, f0)) break;

    bool accepted = false;
    if (discrepancy) {
      // Pick the damping so the linearized residual lands at
      // max(rho * ||r||, bound): modest per-step reduction, never past the
      // discrepancy bound. Retries move rho toward 1 (smaller steps); when a
      // step's actual reduction matches the linearized prediction, rho is
      // tightened so near-linear problems converge fast.
      for (double rho_try : {rho, 0.9, 0.95, 0.99}) {
        const double target = std::max(rho_try * f0, bound);
        double lo = 1e-14, hi = 1e14;
        double mu_sel;
        if (linearized_norm(jac, r0, lm_step(jtj, grad, lo)) >= target) {
          mu_sel = lo;  // even the near-Gauss-Newton step stays above the target
        } else {
          for (int b = 0; b < 90 && hi / lo > 1.0001; ++b) {
            const double mid = std::sqrt(lo * hi);
            if (linearized_norm(jac, r0, lm_step(jtj, grad, mid)) < target)
              lo = mid;
            else
              hi = mid;
          }
          mu_sel = hi;  // the damped side of the bracket never crosses the bound
        }
        const std::vector<double> step = lm_step(jtj, grad, mu_sel);
        const double predicted = linearized_norm(jac, r0, step);
        std::vector<double> trial(c);
        for (std::size_t q = 0; q < trial.size(); ++q) trial[q] += step[q];
        const std::vector<double> r1 = residual(trial);
        const double f1 = norm2(r1);
        if (f1 < f0) {
          const double gain = (f0 - f1) / std::max(f0 - predicted, 1e-300);
          rho = gain > 0.9 ? std::max(0.5 * rho, 0.05) : 0.8;
          c = std::move(trial);
          r0 = r1;
          f0 = f1;
          accepted = true;
          ++accepted_steps;
          break;
        }
      }
      ++iterations;
      if (!accepted) {
        if (accepted_steps == 0)
          throw LmStalled("subspace_ls: no acceptable step from the initial point");
        break;  // local noise floor above the bound; return the best iterate
      }
      if (norm2(r0) <= bound) converged = true;
    } else {
      double step_norm = 0.0;
      while (true) {
        const std::vector<double> step = lm_step(jtj, grad, mu);
        std::vector<double> trial(c);
        for (std::size_t q = 0; q < trial.size(); ++q) trial[q] += step[q];
        const std::vector<double> r1 = residual(trial);
        const double f1 = norm2(r1);
        if (f1 < f0) {
          step_norm = norm2(step);
          c = std::move(trial);
          r0 = r1;
          f0 = f1;
          mu = std::max(mu * settings.damping_decrease, 1e-14);
          accepted = true;
          ++accepted_steps;
          break;
        }
        mu *= settings.damping_increase;
        if (mu > 1e12) break;
      }
      ++iterations;
      if (!accepted) {
        if (accepted_steps == 0)
          throw LmStalled("subspace_ls: damping exceeded 1e12 with no accepted step");
        converged = true;  // cannot improve further; treat as converged
        break;
      }
      double cnorm = norm2(c);
      if (step_norm <= 1e-12 * (1.0 + cnorm)) {
        converged = true;
        break;
      }
    }
  }
  if (discrepancy && norm2(r0) <= bound) converged = true;

  const double final_misfit = residual.data_misfit(c);
  Field u = span.combine(c);
  return LsResult{std::move(u), std::move(c), final_misfit, iterations, converged};
}

Field best_approximation(const Subspace& span, const Field& truth) {
  Projection proj = span.project(truth);
  return span.combine(proj.coefficients);
}

}  // namespace eki
