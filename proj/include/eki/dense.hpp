#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eki {

/// Row-major dense matrix of doubles. Small and unclever on purpose: the
/// matrices in this project are at most a few hundred rows on one side
/// (covariance blocks, Gram matrices) with the ensemble count on the other.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::vector<double> column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix transpose(const DenseMatrix& a);

/// c = a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// c = a * b^T  (contraction over the shared column count)
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

/// c += scale * a * b
void matmul_accumulate(DenseMatrix& c, const DenseMatrix& a, const DenseMatrix& b,
                       double scale = 1.0);

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);

double frobenius_norm(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);

/// Largest relative asymmetry |a - a^T| / |a| measured in Frobenius norm.
double symmetry_defect(const DenseMatrix& a);

/// Cholesky factor of a symmetric positive-definite matrix (lower triangle).
class CholeskyFactor {
 public:
  /// Factors `a`; if the factorization breaks down, retries once with jitter
  /// delta*I, delta = 1e-12 * trace(a)/n, then throws NotSpd.
  explicit CholeskyFactor(const DenseMatrix& a);

  std::size_t size() const { return lower_.rows(); }

  /// Solves A x = b in place, one right-hand side per column of `rhs`.
  void solve_in_place(DenseMatrix& rhs) const;
  std::vector<double> solve(std::span<const double> b) const;

 private:
  bool try_factor(const DenseMatrix& a);
  DenseMatrix lower_;
};

/// Solves A X = B for symmetric positive-definite A via Cholesky.
/// Requires A symmetric within 1e-12 relative and B.rows == A.rows.
DenseMatrix spd_solve(const DenseMatrix& a, const DenseMatrix& b);

struct SymEigen {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // orthonormal columns, vectors(:,k) pairs with values[k]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Requires symmetry within 1e-12 relative; throws NonSymmetric otherwise.
SymEigen sym_eigen(const DenseMatrix& a);

/// Symmetric positive-definite band matrix (lower band storage), used by the
/// grid solver where the 5-point stencil gives bandwidth = cells per side.
class BandMatrix {
 public:
  BandMatrix(std::size_t n, std::size_t bandwidth)
      : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return bw_; }

  /// Entry (i, i-d) for 0 <= d <= bandwidth.
  double& at(std::size_t i, std::size_t d) { return data_[i * (bw_ + 1) + d]; }
  double at(std::size_t i, std::size_t d) const { return data_[i * (bw_ + 1) + d]; }

  /// In-place Cholesky of the band; throws SolveFailure on breakdown.
  void factor();

  /// Solves with the factored band, in place.
  void solve(std::vector<double>& rhs) const;

 private:
  std::size_t n_;
  std::size_t bw_;
  std::vector<double> data_;
  bool factored_ = false;
};

}  // namespace eki
