#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eki/dense.hpp"
#include "eki/random.hpp"

namespace eki {

enum class BasisKind { sine_1d, cosine_tensor_2d, nodal_grid_2d };

/// Discrete function basis. Sine modes live on (0, pi); the cosine tensor
/// basis and the nodal cell-center grid live on [0,6]^2. The cosine basis
/// excludes the constant (0,0) mode: those fields are zero-mean by
/// construction, matching the domain of the Neumann Laplacian used to build
/// the 2d covariance.
class Basis {
 public:
  static Basis sine(int modes);
  static Basis cosine_tensor(int modes_per_side);
  static Basis nodal(int cells_per_side);

  BasisKind kind() const { return kind_; }
  int truncation() const { return truncation_; }
  std::size_t dimension() const;

  bool operator==(const Basis& o) const {
    return kind_ == o.kind_ && truncation_ == o.truncation_;
  }
  bool operator!=(const Basis& o) const { return !(*this == o); }

  std::string describe() const;

 private:
  Basis(BasisKind kind, int truncation) : kind_(kind), truncation_(truncation) {}
  BasisKind kind_;
  int truncation_;  // sine: mode count; cosine: modes per side; nodal: cells per side
};

/// Cosine tensor modes (k1,k2) != (0,0) in canonical order: ascending
/// k1^2+k2^2, ties broken lexicographically, so the order coincides with
/// descending covariance eigenvalue for any decreasing spectral law.
std::vector<std::pair<int, int>> cosine_mode_table(int modes_per_side);

/// A function represented by its coefficients in a basis (cell values for the
/// nodal kind). L2 inner products are Euclidean on coefficients, which is
/// exact for the orthonormal sine/cosine families.
class Field {
 public:
  Field(Basis basis, std::vector<double> coeffs);
  static Field zero(Basis basis);

  const Basis& basis() const { return basis_; }
  std::span<const double> coeffs() const { return coeffs_; }
  std::vector<double>& mutable_coeffs() { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  double operator[](std::size_t i) const { return coeffs_[i]; }

  double norm() const;

 private:
  Basis basis_;
  std::vector<double> coeffs_;
};

double inner_product(const Field& a, const Field& b);
Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double s, const Field& a);

/// Gaussian measure N(mean, C) with C given spectrally: eigenvalues in
/// descending order, eigenfields orthonormal in L2 and stored as the columns
/// of a (dimension x modes) matrix.
class GaussianMeasure {
 public:
  GaussianMeasure(Field mean, std::vector<double> eigenvalues, DenseMatrix eigenfields);

  const Basis& basis() const { return mean_.basis(); }
  const Field& mean() const { return mean_; }
  std::size_t n_modes() const { return eigenvalues_.size(); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t j) const { return eigenvalues_[j]; }
  Field eigenfield(std::size_t j) const;
  const DenseMatrix& eigenfield_matrix() const { return eigenfields_; }

  /// True when eigenfield j is exactly the j-th coordinate vector, which both
  /// built-in covariances produce; sampling then skips the dense synthesis.
  bool canonical_eigenfields() const { return canonical_; }

 private:
  Field mean_;
  std::vector<double> eigenvalues_;
  DenseMatrix eigenfields_;
  bool canonical_;
};

/// Prior for the 1d problem: C = beta * (-d^2/dx^2)^{-1} on (0,pi) with
/// Dirichlet conditions, i.e. lambda_k = beta / k^2 on normalized sin(kx).
GaussianMeasure covariance_elliptic(double beta, int modes);

/// Prior for the 2d problem: C = beta * L^{-alpha} with L the Neumann
/// Laplacian on [0,6]^2 restricted to zero-mean functions;
/// lambda_{k1,k2} = beta * ((pi/6)^2 (k1^2+k2^2))^{-alpha}.
/// Requires alpha > 1 (trace class in 2d).
GaussianMeasure covariance_darcy(double beta, double alpha, int modes_per_side);

/// One draw mean + sum_j sqrt(lambda_j) xi_j phi_j with xi from the stream.
Field sample_prior(const GaussianMeasure& measure, const RandomStream& stream);

/// J draws packed as columns; column j uses stream.with_member(j), so the
/// result is identical to J independent sample_prior calls.
DenseMatrix sample_prior_ensemble(const GaussianMeasure& measure, int count,
                                  const RandomStream& stream);

struct Projection {
  std::vector<double> coefficients;
  double residual_norm = 0.0;
};

/// Span of fields psi^(1..J); carries a lazily built Gram factorization used
/// for L2 projections. Copies share the underlying data.
class Subspace {
 public:
  Subspace(Basis basis, DenseMatrix members);

  const Basis& basis() const;
  int size() const;
  const DenseMatrix& members() const;  // dimension x J, column j = psi^(j)
  Field member(int j) const;

  const DenseMatrix& gram() const;

  /// Least-squares coefficients onto the span and the residual norm.
  /// Rank-deficient Gram matrices are handled by an eigenvalue pseudo-solve
  /// with cutoff 1e-12 * lambda_max.
  Projection project(const Field& u) const;

  /// Reconstruction sum_j c_j psi^(j).
  Field combine(std::span<const double> coefficients) const;

 private:
  struct Data;
  std::shared_ptr<Data> data_;
};

Projection project(const Subspace& span, const Field& u);

/// KL subspace: members mean + sqrt(lambda_j) phi_j, j = 1..J in descending
/// eigenvalue order.
Subspace kl_ensemble(const GaussianMeasure& measure, int count);

/// Diagonal observation-noise (or prior) covariance used as a weighted norm
/// ||v||_Gamma = ||Gamma^{-1/2} v||. Either white noise gamma^2 I or an
/// explicit positive variance per component.
class WeightedNorm {
 public:
  static WeightedNorm white_noise(double gamma);
  static WeightedNorm diagonal(std::vector<double> variances);

  bool is_white() const { return variances_.empty(); }
  double variance(std::size_t i) const {
    return variances_.empty() ? scalar_variance_ : variances_[i];
  }
  double norm(std::span<const double> v) const;

  void check_length(std::size_t n) const;

 private:
  WeightedNorm() = default;
  double scalar_variance_ = 1.0;
  std::vector<double> variances_;
};

/// ||Gamma^{-1/2} (y - Gu)||, the square root of the data misfit functional.
double weighted_misfit(std::span<const double> y, std::span<const double> gu,
                       const WeightedNorm& gamma);

}  // namespace eki
