#include "eki/field.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "eki/errors.hpp"

namespace eki {

Basis Basis::sine(int modes) {
  if (modes < 1) throw Error("Basis::sine: need at least one mode");
  return Basis(BasisKind::sine_1d, modes);
}

Basis Basis::cosine_tensor(int modes_per_side) {
  if (modes_per_side < 2)
    throw Error("Basis::cosine_tensor: need at least 2 modes per side");
  return Basis(BasisKind::cosine_tensor_2d, modes_per_side);
}

Basis Basis::nodal(int cells_per_side) {
  if (cells_per_side < 8) throw Error("Basis::nodal: need at least 8 cells per side");
  return Basis(BasisKind::nodal_grid_2d, cells_per_side);
}

std::size_t Basis::dimension() const {
  const auto k = static_cast<std::size_t>(truncation_);
  switch (kind_) {
    case BasisKind::sine_1d:
      return k;
    case BasisKind::cosine_tensor_2d:
      return k * k - 1;  // (0,0) excluded
    case BasisKind::nodal_grid_2d:
      return k * k;
  }
  return 0;
}

std::string Basis::describe() const {
  switch (kind_) {
    case BasisKind::sine_1d:
      return "sine-1d K=" + std::to_string(truncation_);
    case BasisKind::cosine_tensor_2d:
      return "cosine-tensor-2d K=" + std::to_string(truncation_);
    case BasisKind::nodal_grid_2d:
      return "nodal-grid-2d m=" + std::to_string(truncation_);
  }
  return "?";
}

std::vector<std::pair<int, int>> cosine_mode_table(int modes_per_side) {
  std::vector<std::pair<int, int>> modes;
  modes.reserve(static_cast<std::size_t>(modes_per_side) * modes_per_side - 1);
  for (int k1 = 0; k1 < modes_per_side; ++k1)
    for (int k2 = 0; k2 < modes_per_side; ++k2)
      if (k1 != 0 || k2 != 0) modes.emplace_back(k1, k2);
  std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) {
    const long sa = static_cast<long>(a.first) * a.first + static_cast<long>(a.second) * a.second;
    const long sb = static_cast<long>(b.first) * b.first + static_cast<long>(b.second) * b.second;
    if (sa != sb) return sa < sb;
    return a < b;
  });
  return modes;
}

Field::Field(Basis basis, std::vector<double> coeffs)
    : basis_(basis), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != basis_.dimension())
    throw DimensionMismatch("Field: coefficient count does not match basis dimension");
  for (double v : coeffs_)
    if (!std::isfinite(v)) throw Error("Field: non-finite coefficient");
}

Field Field::zero(Basis basis) {
  return Field(basis, std::vector<double>(basis.dimension(), 0.0));
}

double Field::norm() const {
  double s = 0.0;
  for (double v : coeffs_) s += v * v;
  return std::sqrt(s);
}

double inner_product(const Field& a, const Field& b) {
  if (a.basis() != b.basis()) throw BasisMismatch("inner_product: bases differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Field operator+(const Field& a, const Field& b) {
  if (a.basis() != b.basis()) throw BasisMismatch("field +: bases differ");
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return Field(a.basis(), std::move(c));
}

Field operator-(const Field& a, const Field& b) {
  if (a.basis() != b.basis()) throw BasisMismatch("field -: bases differ");
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return Field(a.basis(), std::move(c));
}

Field operator*(double s, const Field& a) {
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = s * a[i];
  return Field(a.basis(), std::move(c));
}

namespace {

bool is_canonical(const DenseMatrix& eigenfields) {
  for (std::size_t j = 0; j < eigenfields.cols(); ++j)
    for (std::size_t i = 0; i < eigenfields.rows(); ++i)
      if (eigenfields(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

}  // namespace

GaussianMeasure::GaussianMeasure(Field mean, std::vector<double> eigenvalues,
                                 DenseMatrix eigenfields)
    : mean_(std::move(mean)),
      eigenvalues_(std::move(eigenvalues)),
      eigenfields_(std::move(eigenfields)) {
  if (eigenfields_.rows() != mean_.size() || eigenfields_.cols() != eigenvalues_.size())
    throw DimensionMismatch("GaussianMeasure: eigenfield matrix shape mismatch");
  for (std::size_t j = 0; j < eigenvalues_.size(); ++j) {
    if (!(eigenvalues_[j] > 0.0))
      throw Error("GaussianMeasure: eigenvalues must be strictly positive");
    if (j > 0 && eigenvalues_[j] > eigenvalues_[j - 1])
      throw Error("GaussianMeasure: eigenvalues must be descending");
  }
  canonical_ = is_canonical(eigenfields_);
  if (!canonical_) {
    // Orthonormality check, skipped for the canonical unit-vector case where
    // it holds exactly.
    DenseMatrix gram = matmul_nt(transpose(eigenfields_), transpose(eigenfields_));
    for (std::size_t i = 0; i < gram.rows(); ++i)
      for (std::size_t j = 0; j < gram.cols(); ++j) {
        const double want = i == j ? 1.0 : 0.0;
        if (std::abs(gram(i, j) - want) > 1e-10)
          throw Error("GaussianMeasure: eigenfields not orthonormal within 1e-10");
      }
  }
}

Field GaussianMeasure::eigenfield(std::size_t j) const {
  return Field(basis(), eigenfields_.column(j));
}

GaussianMeasure covariance_elliptic(double beta, int modes) {
  if (!(beta > 0.0)) throw Error("covariance_elliptic: beta must be positive");
  Basis basis = Basis::sine(modes);
  std::vector<double> lambda(static_cast<std::size_t>(modes));
  for (int k = 1; k <= modes; ++k)
    lambda[static_cast<std::size_t>(k - 1)] = beta / (static_cast<double>(k) * k);
  return GaussianMeasure(Field::zero(basis), std::move(lambda),
                         DenseMatrix::identity(static_cast<std::size_t>(modes)));
}

GaussianMeasure covariance_darcy(double beta, double alpha, int modes_per_side) {
  if (!(beta > 0.0)) throw Error("covariance_darcy: beta must be positive");
  if (!(alpha > 1.0)) throw AlphaTooSmall("covariance_darcy: alpha must exceed 1");
  Basis basis = Basis::cosine_tensor(modes_per_side);
  const auto modes = cosine_mode_table(modes_per_side);
  std::vector<double> lambda(modes.size());
  const double scale = (3.14159265358979323846 / 6.0) * (3.14159265358979323846 / 6.0);
  for (std::size_t q = 0; q < modes.size(); ++q) {
    const auto [k1, k2] = modes[q];
    const double s = scale * (static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2);
    lambda[q] = beta * std::pow(s, -alpha);
  }
  return GaussianMeasure(Field::zero(basis), std::move(lambda),
                         DenseMatrix::identity(modes.size()));
}

namespace {

/// xi column for one draw: sqrt(lambda_q) * standard normal from the stream.
void fill_scaled_normals(const GaussianMeasure& measure, const RandomStream& stream,
                         DenseMatrix& xi, std::size_t column) {
  GaussianSource src(stream);
  for (std::size_t q = 0; q < measure.n_modes(); ++q)
    xi(q, column) = std::sqrt(measure.eigenvalue(q)) * src.next();
}

DenseMatrix synthesize_draws(const GaussianMeasure& measure, DenseMatrix xi) {
  const std::size_t dim = measure.basis().dimension();
  const std::size_t cols = xi.cols();
  const Field& mean = measure.mean();
  DenseMatrix out(dim, cols, 0.0);
  if (measure.canonical_eigenfields()) {
    for (std::size_t q = 0; q < measure.n_modes(); ++q)
      for (std::size_t j = 0; j < cols; ++j) out(q, j) = xi(q, j);
  } else {
    matmul_accumulate(out, measure.eigenfield_matrix(), xi);
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double m = mean[i];
    if (m == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) out(i, j) += m;
  }
  return out;
}

}  // namespace

Field sample_prior(const GaussianMeasure& measure, const RandomStream& stream) {
  DenseMatrix xi(measure.n_modes(), 1);
  fill_scaled_normals(measure, stream, xi, 0);
  return Field(measure.basis(), synthesize_draws(measure, std::move(xi)).column(0));
}

DenseMatrix sample_prior_ensemble(const GaussianMeasure& measure, int count,
                                  const RandomStream& stream) {
  if (count < 1) throw Error("sample_prior_ensemble: count must be positive");
  DenseMatrix xi(measure.n_modes(), static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (int j = 0; j < count; ++j)
    fill_scaled_normals(measure, stream.with_member(static_cast<std::uint32_t>(j)), xi,
                        static_cast<std::size_t>(j));
  return synthesize_draws(measure, std::move(xi));
}

struct Subspace::Data {
  Basis basis;
  DenseMatrix members;
  mutable std::once_flag gram_once;
  mutable DenseMatrix gram;
  mutable SymEigen gram_eigen;

  Data(Basis b, DenseMatrix m) : basis(b), members(std::move(m)) {}

  void ensure_gram() const {
    std::call_once(gram_once, [this] {
      DenseMatrix mt = transpose(members);
      gram = matmul_nt(mt, mt);
      // exact symmetrization before the eigensolve
      for (std::size_t i = 0; i < gram.rows(); ++i)
        for (std::size_t j = i + 1; j < gram.cols(); ++j) {
          const double v = 0.5 * (gram(i, j) + gram(j, i));
          gram(i, j) = v;
          gram(j, i) = v;
        }
      gram_eigen = sym_eigen(gram);
    });
  }
};

Subspace::Subspace(Basis basis, DenseMatrix members)
    : data_(std::make_shared<Data>(basis, std::move(members))) {
  if (data_->members.rows() != basis.dimension())
    throw DimensionMismatch("Subspace: member rows do not match basis dimension");
  if (data_->members.cols() == 0) throw Error("Subspace: need at least one member");
}

const Basis& Subspace::basis() const { return data_->basis; }
int Subspace::size() const { return static_cast<int>(data_->members.cols()); }
const DenseMatrix& Subspace::members() const { return data_->members; }

Field Subspace::member(int j) const {
  return Field(data_->basis, data_->members.column(static_cast<std::size_t>(j)));
}

const DenseMatrix& Subspace::gram() const {
  data_->ensure_gram();
  return data_->gram;
}

Projection Subspace::project(const Field& u) const {
  if (u.basis() != data_->basis) throw BasisMismatch("project: field basis differs");
  data_->ensure_gram();
  const std::size_t J = data_->members.cols();
  const std::size_t dim = data_->members.rows();

  std::vector<double> rhs(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += data_->members(i, j) * u[i];
    rhs[j] = s;
  }

  const auto& eig = data_->gram_eigen;
  const double cutoff = 1e-12 * std::max(0.0, eig.values.empty() ? 0.0 : eig.values[0]);
  std::vector<double> coeffs(J, 0.0);
  for (std::size_t k = 0; k < J; ++k) {
    if (!(eig.values[k] > cutoff)) continue;
    double vk_rhs = 0.0;
    for (std::size_t j = 0; j < J; ++j) vk_rhs += eig.vectors(j, k) * rhs[j];
    const double w = vk_rhs / eig.values[k];
    for (std::size_t j = 0; j < J; ++j) coeffs[j] += w * eig.vectors(j, k);
  }

  double res2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double r = u[i];
    for (std::size_t j = 0; j < J; ++j) r -= data_->members(i, j) * coeffs[j];
    res2 += r * r;
  }
  return Projection{std::move(coeffs), std::sqrt(res2)};
}

Field Subspace::combine(std::span<const double> coefficients) const {
  if (coefficients.size() != static_cast<std::size_t>(size()))
    throw DimensionMismatch("combine: coefficient count mismatch");
  std::vector<double> out(data_->members.rows(), 0.0);
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    const double c = coefficients[j];
    if (c == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * data_->members(i, j);
  }
  return Field(data_->basis, std::move(out));
}

Projection project(const Subspace& span, const Field& u) { return span.project(u); }

Subspace kl_ensemble(const GaussianMeasure& measure, int count) {
  if (count < 1) throw Error("kl_ensemble: count must be positive");
  if (static_cast<std::size_t>(count) > measure.n_modes())
    throw TooFewModes("kl_ensemble: requested more members than stored eigenpairs");
  const std::size_t dim = measure.basis().dimension();
  DenseMatrix members(dim, static_cast<std::size_t>(count));
  const Field& mean = measure.mean();
  for (int j = 0; j < count; ++j) {
    const auto q = static_cast<std::size_t>(j);
    const double s = std::sqrt(measure.eigenvalue(q));
    for (std::size_t i = 0; i < dim; ++i)
      members(i, q) = mean[i] + s * measure.eigenfield_matrix()(i, q);
  }
  return Subspace(measure.basis(), std::move(members));
}

WeightedNorm WeightedNorm::white_noise(double gamma) {
  if (!(gamma > 0.0)) throw Error("WeightedNorm: gamma must be positive");
  WeightedNorm w;
  w.scalar_variance_ = gamma * gamma;
  return w;
}

WeightedNorm WeightedNorm::diagonal(std::vector<double> variances) {
  if (variances.empty()) throw Error("WeightedNorm: empty variance list");
  for (double v : variances)
    if (!(v > 0.0)) throw Error("WeightedNorm: variances must be strictly positive");
  WeightedNorm w;
  w.variances_ = std::move(variances);
  return w;
}

void WeightedNorm::check_length(std::size_t n) const {
  if (!variances_.empty() && variances_.size() != n)
    throw DimensionMismatch("WeightedNorm: vector length does not match variances");
}

double WeightedNorm::norm(std::span<const double> v) const {
  check_length(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * v[i] / variance(i);
  return std::sqrt(s);
}

double weighted_misfit(std::span<const double> y, std::span<const double> gu,
                       const WeightedNorm& gamma) {
  if (y.size() != gu.size()) throw DimensionMismatch("weighted_misfit: length mismatch");
  gamma.check_length(y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - gu[i];
    s += d * d / gamma.variance(i);
  }
  return std::sqrt(s);
}

}  // namespace eki
