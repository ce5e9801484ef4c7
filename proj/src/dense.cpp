#include "eki/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eki/errors.hpp"

namespace eki {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> DenseMatrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_) throw DimensionMismatch("set_column: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols(), 0.0);
  matmul_accumulate(c, a, b, 1.0);
  return c;
}

void matmul_accumulate(DenseMatrix& c, const DenseMatrix& a, const DenseMatrix& b,
                       double scale) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
    throw DimensionMismatch("matmul_accumulate: shape mismatch");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  // Column panels keep the active slice of b cache-resident when m is the
  // ensemble count; within a panel the i-k-j order vectorizes over j while
  // each c entry accumulates in plain ascending-k order.
  constexpr std::size_t kPanel = 256;
  for (std::size_t j0 = 0; j0 < m; j0 += kPanel) {
    const std::size_t j1 = std::min(m, j0 + kPanel);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      double* ci = c.row(i);
      const double* ai = a.row(i);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = scale * ai[kk];
        if (av == 0.0) continue;
        const double* bk = b.row(kk);
        for (std::size_t j = j0; j < j1; ++j) ci[j] += av * bk[j];
      }
    }
  }
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("matmul_nt: contraction dims differ");
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  DenseMatrix c(n, m, 0.0);
  // Blocks of a rows stay cache-resident while the rows of b stream past
  // once per block; the contraction axis k is the long one here.
  constexpr std::size_t kBlock = 16;
  const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (long long bb = 0; bb < static_cast<long long>(n_blocks); ++bb) {
    const std::size_t i0 = static_cast<std::size_t>(bb) * kBlock;
    const std::size_t i1 = std::min(n, i0 + kBlock);
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.row(j);
      for (std::size_t i = i0; i < i1; ++i) {
        const double* ai = a.row(i);
        // four independent accumulators so the reduction vectorizes without
        // the compiler having to reassociate a single running sum
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t kk = 0;
        for (; kk + 4 <= k; kk += 4) {
          s0 += ai[kk] * bj[kk];
          s1 += ai[kk + 1] * bj[kk + 1];
          s2 += ai[kk + 2] * bj[kk + 2];
          s3 += ai[kk + 3] * bj[kk + 3];
        }
        double s = (s0 + s1) + (s2 + s3);
        for (; kk < k; ++kk) s += ai[kk] * bj[kk];
        c(i, j) = s;
      }
    }
  }
  return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matvec: shape mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double symmetry_defect(const DenseMatrix& a) {
  if (a.rows() != a.cols()) return 1.0;
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = a(i, j) - a(j, i);
      diff += d * d;
      norm += a(i, j) * a(i, j);
    }
  }
  if (norm == 0.0) return 0.0;
  return std::sqrt(diff / norm);
}

namespace {

void require_symmetric(const DenseMatrix& a, const char* who) {
  if (a.rows() != a.cols()) throw DimensionMismatch(std::string(who) + ": matrix not square");
  if (symmetry_defect(a) > 1e-12)
    throw NonSymmetric(std::string(who) + ": matrix not symmetric within 1e-12");
}

}  // namespace

CholeskyFactor::CholeskyFactor(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix not square");
  if (try_factor(a)) return;
  // Gamma > 0 makes true singularity impossible in the intended uses; the
  // jitter only guards against roundoff on nearly rank-deficient ensembles.
  double trace = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) trace += a(i, i);
  const double delta = 1e-12 * trace / static_cast<double>(a.rows());
  DenseMatrix jittered = a;
  for (std::size_t i = 0; i < a.rows(); ++i) jittered(i, i) += delta;
  if (!try_factor(jittered))
    throw NotSpd("cholesky: factorization failed after jitter retry");
}

bool CholeskyFactor::try_factor(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  lower_ = DenseMatrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double* li = lower_.row(i);
      const double* lj = lower_.row(j);
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        lower_(i, i) = std::sqrt(s);
      } else {
        lower_(i, j) = s / lower_(j, j);
      }
    }
  }
  return true;
}

void CholeskyFactor::solve_in_place(DenseMatrix& rhs) const {
  const std::size_t n = lower_.rows();
  if (rhs.rows() != n) throw DimensionMismatch("cholesky solve: rhs rows mismatch");
  const std::size_t m = rhs.cols();
  // Forward then back substitution, vectorized across right-hand sides and
  // processed in column panels so the active panel stays cache-resident.
  constexpr std::size_t kPanel = 256;
#pragma omp parallel for schedule(static)
  for (long long pp = 0; pp < static_cast<long long>((m + kPanel - 1) / kPanel); ++pp) {
    const std::size_t j0 = static_cast<std::size_t>(pp) * kPanel;
    const std::size_t j1 = std::min(m, j0 + kPanel);
    for (std::size_t i = 0; i < n; ++i) {
      double* xi = rhs.row(i);
      const double* li = lower_.row(i);
      for (std::size_t k = 0; k < i; ++k) {
        const double l = li[k];
        if (l == 0.0) continue;
        const double* xk = rhs.row(k);
        for (std::size_t j = j0; j < j1; ++j) xi[j] -= l * xk[j];
      }
      const double inv = 1.0 / li[i];
      for (std::size_t j = j0; j < j1; ++j) xi[j] *= inv;
    }
    for (std::size_t ri = n; ri-- > 0;) {
      double* xi = rhs.row(ri);
      for (std::size_t k = ri + 1; k < n; ++k) {
        const double l = lower_(k, ri);
        if (l == 0.0) continue;
        const double* xk = rhs.row(k);
        for (std::size_t j = j0; j < j1; ++j) xi[j] -= l * xk[j];
      }
      const double inv = 1.0 / lower_(ri, ri);
      for (std::size_t j = j0; j < j1; ++j) xi[j] *= inv;
    }
  }
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
  DenseMatrix rhs(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) rhs(i, 0) = b[i];
  solve_in_place(rhs);
  return rhs.column(0);
}

DenseMatrix spd_solve(const DenseMatrix& a, const DenseMatrix& b) {
  require_symmetric(a, "spd_solve");
  if (b.rows() != a.rows()) throw DimensionMismatch("spd_solve: rhs rows mismatch");
  CholeskyFactor factor(a);
  DenseMatrix x = b;
  factor.solve_in_place(x);
  return x;
}

SymEigen sym_eigen(const DenseMatrix& a) {
  require_symmetric(a, "sym_eigen");
  const std::size_t n = a.rows();
  DenseMatrix d = a;
  DenseMatrix v = DenseMatrix::identity(n);

  const double off_tol = 1e-15 * std::max(1.0, frobenius_norm(a));
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
    if (std::sqrt(2.0 * off) <= off_tol) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = d(p, q);
        if (apq == 0.0) continue;
        const double theta = (d(q, q) - d(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double dkp = d(k, p), dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double dpk = d(p, k), dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d(x, x) > d(y, y); });

  SymEigen out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

void BandMatrix::factor() {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > bw_ ? i - bw_ : 0;
    for (std::size_t j = lo; j <= i; ++j) {
      double s = at(i, i - j);
      const std::size_t klo = std::max(lo, j > bw_ ? j - bw_ : 0);
      for (std::size_t k = klo; k < j; ++k) s -= at(i, i - k) * at(j, j - k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s))
          throw SolveFailure("band cholesky: matrix not positive definite");
        at(i, 0) = std::sqrt(s);
      } else {
        at(i, i - j) = s / at(j, 0);
      }
    }
  }
  factored_ = true;
}

void BandMatrix::solve(std::vector<double>& rhs) const {
  if (!factored_) throw SolveFailure("band solve: factor() not called");
  if (rhs.size() != n_) throw DimensionMismatch("band solve: rhs length mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > bw_ ? i - bw_ : 0;
    double s = rhs[i];
    for (std::size_t k = lo; k < i; ++k) s -= at(i, i - k) * rhs[k];
    rhs[i] = s / at(i, 0);
  }
  for (std::size_t ri = n_; ri-- > 0;) {
    const std::size_t hi = std::min(n_ - 1, ri + bw_);
    double s = rhs[ri];
    for (std::size_t k = ri + 1; k <= hi; ++k) s -= at(k, k - ri) * rhs[k];
    rhs[ri] = s / at(ri, 0);
  }
}

}  // namespace eki
