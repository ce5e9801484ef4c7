#include "eki/forward.hpp"

#include <cmath>

#include "eki/errors.hpp"

namespace eki {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Benchmark recharge, piecewise constant in x2.
double source_term(double x2) {
  if (x2 <= 4.0) return 0.0;
  if (x2 < 5.0) return 137.0;
  return 274.0;
}

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

ObservationSpec ObservationSpec::all_coefficients(std::size_t n) {
  if (n < 1) throw Error("ObservationSpec: size must be at least 1");
  ObservationSpec spec;
  spec.kind = Kind::all_coefficients;
  spec.size = n;
  return spec;
}

ObservationSpec ObservationSpec::point_values(std::vector<std::array<double, 2>> pts) {
  if (pts.empty()) throw Error("ObservationSpec: need at least one point");
  for (const auto& p : pts)
    if (p[0] < 0.0 || p[0] > 6.0 || p[1] < 0.0 || p[1] > 6.0)
      throw PointOutsideDomain("ObservationSpec: point outside [0,6]^2");
  ObservationSpec spec;
  spec.kind = Kind::point_values;
  spec.size = pts.size();
  spec.points = std::move(pts);
  return spec;
}

ObservationSpec well_lattice(int per_side) {
  if (per_side < 1) throw Error("well_lattice: per_side must be positive");
  const double step = 6.0 / per_side;
  std::vector<std::array<double, 2>> pts;
  pts.reserve(static_cast<std::size_t>(per_side) * per_side);
  for (int i = 1; i <= per_side; ++i)
    for (int j = 1; j <= per_side; ++j)
      pts.push_back({(i - 0.5) * step, (j - 0.5) * step});
  return ObservationSpec::point_values(std::move(pts));
}

DarcyGrid::DarcyGrid(int cells_per_side) : cells(cells_per_side) {
  if (cells_per_side < 8) throw Error("DarcyGrid: need at least 8 cells per side");
}

std::vector<double> ForwardModel::evaluate(const Field& u) const {
  if (u.basis() != input_basis_)
    throw BasisMismatch(name_ + ": field basis does not match model input basis");
  std::vector<double> out = do_evaluate(u);
  if (out.size() != observation_.size)
    throw DimensionMismatch(name_ + ": response length does not match observation spec");
  return out;
}

std::vector<double> forward_response(const ForwardModel& model, const Field& u) {
  return model.evaluate(u);
}

Field elliptic_apply(const Field& u) {
  if (u.basis().kind() != BasisKind::sine_1d)
    throw BasisMismatch("elliptic_apply: expects the sine basis");
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double k = static_cast<double>(i) + 1.0;
    out[i] = u[i] / (1.0 + k * k);
  }
  return Field(u.basis(), std::move(out));
}

DiagonalLinearModel::DiagonalLinearModel(std::string name, Basis basis,
                                         std::vector<double> diagonal)
    : ForwardModel(std::move(name), basis, ObservationSpec::all_coefficients(diagonal.size())),
      diagonal_(std::move(diagonal)) {
  if (diagonal_.size() != basis.dimension())
    throw DimensionMismatch("DiagonalLinearModel: diagonal length mismatch");
}

std::vector<double> DiagonalLinearModel::do_evaluate(const Field& u) const {
  std::vector<double> out(diagonal_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = diagonal_[i] * u[i];
  return out;
}

std::unique_ptr<DiagonalLinearModel> make_elliptic_model(int modes) {
  std::vector<double> diag(static_cast<std::size_t>(modes));
  for (int k = 1; k <= modes; ++k)
    diag[static_cast<std::size_t>(k - 1)] = 1.0 / (1.0 + static_cast<double>(k) * k);
  return std::make_unique<DiagonalLinearModel>("elliptic", Basis::sine(modes),
                                               std::move(diag));
}

namespace {

struct Assembled {
  BandMatrix matrix;
  std::vector<double> rhs;
};

/// 5-point conservative scheme with harmonic-mean face transmissibilities.
/// Square cells make the geometric factor (face length / distance) equal 1
/// between neighboring centers and 2 to a boundary face.
Assembled assemble(const Field& log_conductivity, const DarcyGrid& grid, bool paper_bc,
                   const std::vector<double>& source_cells,
                   const std::function<double(double, double)>& boundary_value) {
  const int m = grid.cells;
  const double width = grid.cell_width();
  const std::size_t n = grid.n_cells();
  if (log_conductivity.basis().kind() != BasisKind::nodal_grid_2d ||
      log_conductivity.size() != n)
    throw BasisMismatch("darcy assembly: expects a nodal field on the grid");
  if (source_cells.size() != n) throw DimensionMismatch("darcy assembly: source size");

  std::vector<double> k(n);
  for (std::size_t c = 0; c < n; ++c) k[c] = std::exp(log_conductivity[c]);

  Assembled out{BandMatrix(n, static_cast<std::size_t>(m)), std::vector<double>(n, 0.0)};
  auto idx = [m](int i, int j) { return static_cast<std::size_t>(j) * m + i; };
  auto center = [width](int i) { return (i + 0.5) * width; };

  auto& A = out.matrix;
  auto& b = out.rhs;
  auto add_diag = [&](std::size_t p, double v) { A.at(p, 0) += v; };
  auto add_off = [&](std::size_t p, std::size_t q, double v) {
    // lower band storage; each face visited from both sides writes the same value
    if (p > q) A.at(p, p - q) += v;
  };

  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const std::size_t p = idx(i, j);
      b[p] += source_cells[p] * width * width;

      if (i + 1 < m) {
        const double t = harmonic_mean(k[p], k[idx(i + 1, j)]);
        add_diag(p, t);
        add_off(p, idx(i + 1, j), -t);
      } else if (!paper_bc) {
        const double t = 2.0 * k[p];
        add_diag(p, t);
        b[p] += t * boundary_value(6.0, center(j));
      }  // paper right edge: zero flux

      if (i - 1 >= 0) {
        const double t = harmonic_mean(k[p], k[idx(i - 1, j)]);
        add_diag(p, t);
        add_off(p, idx(i - 1, j), -t);
      } else if (paper_bc) {
        b[p] += 500.0 * width;  // prescribed inflow per unit edge length
      } else {
        const double t = 2.0 * k[p];
        add_diag(p, t);
        b[p] += t * boundary_value(0.0, center(j));
      }

      if (j + 1 < m) {
        const double t = harmonic_mean(k[p], k[idx(i, j + 1)]);
        add_diag(p, t);
        add_off(p, idx(i, j + 1), -t);
      } else if (!paper_bc) {
        const double t = 2.0 * k[p];
        add_diag(p, t);
        b[p] += t * boundary_value(center(i), 6.0);
      }  // paper top edge: zero flux

      if (j - 1 >= 0) {
        const double t = harmonic_mean(k[p], k[idx(i, j - 1)]);
        add_diag(p, t);
        add_off(p, idx(i, j - 1), -t);
      } else {
        // bottom Dirichlet via ghost-value elimination
        const double t = 2.0 * k[p];
        const double g = paper_bc ? 100.0 : boundary_value(center(i), 0.0);
        add_diag(p, t);
        b[p] += t * g;
      }
    }
  }
  return out;
}

std::vector<double> paper_source_cells(const DarcyGrid& grid) {
  const int m = grid.cells;
  const double width = grid.cell_width();
  std::vector<double> f(grid.n_cells());
  for (int j = 0; j < m; ++j) {
    const double fv = source_term((j + 0.5) * width);
    for (int i = 0; i < m; ++i) f[static_cast<std::size_t>(j) * m + i] = fv;
  }
  return f;
}

}  // namespace

Field darcy_solve(const Field& log_conductivity, const DarcyGrid& grid) {
  Assembled sys = assemble(log_conductivity, grid, /*paper_bc=*/true,
                           paper_source_cells(grid), {});
  sys.matrix.factor();
  sys.matrix.solve(sys.rhs);
  return Field(Basis::nodal(grid.cells), std::move(sys.rhs));
}

Field darcy_solve_dirichlet(const Field& log_conductivity, const DarcyGrid& grid,
                            const std::vector<double>& source_cells,
                            const std::function<double(double, double)>& boundary_value) {
  Assembled sys = assemble(log_conductivity, grid, /*paper_bc=*/false, source_cells,
                           boundary_value);
  sys.matrix.factor();
  sys.matrix.solve(sys.rhs);
  return Field(Basis::nodal(grid.cells), std::move(sys.rhs));
}

DarcyFluxBalance darcy_flux_balance(const Field& log_conductivity, const DarcyGrid& grid,
                                    const Field& head) {
  const int m = grid.cells;
  const double width = grid.cell_width();
  DarcyFluxBalance bal;
  for (int i = 0; i < m; ++i) {
    const std::size_t p = static_cast<std::size_t>(i);  // bottom row, j = 0
    const double t = 2.0 * std::exp(log_conductivity[p]);
    bal.bottom_outflow += t * (head[p] - 100.0);
  }
  const auto f = paper_source_cells(grid);
  for (double fv : f) bal.total_source += fv * width * width;
  bal.total_source += 500.0 * 6.0;
  return bal;
}

std::vector<double> observe(const Field& state, const ObservationSpec& spec) {
  if (spec.kind == ObservationSpec::Kind::all_coefficients) {
    if (spec.size != state.size())
      throw DimensionMismatch("observe: coefficient count does not match spec");
    return std::vector<double>(state.coeffs().begin(), state.coeffs().end());
  }
  if (state.basis().kind() != BasisKind::nodal_grid_2d)
    throw BasisMismatch("observe: point values need a nodal field");
  const int m = state.basis().truncation();
  const double width = 6.0 / m;
  std::vector<double> out;
  out.reserve(spec.points.size());
  for (const auto& pt : spec.points) {
    if (pt[0] < 0.0 || pt[0] > 6.0 || pt[1] < 0.0 || pt[1] > 6.0)
      throw PointOutsideDomain("observe: point outside [0,6]^2");
    const double gx = pt[0] / width - 0.5;
    const double gy = pt[1] / width - 0.5;
    int i0 = static_cast<int>(std::floor(gx));
    int j0 = static_cast<int>(std::floor(gy));
    i0 = std::min(std::max(i0, 0), m - 2);
    j0 = std::min(std::max(j0, 0), m - 2);
    const double tx = gx - i0;
    const double ty = gy - j0;
    auto v = [&](int i, int j) { return state[static_cast<std::size_t>(j) * m + i]; };
    out.push_back((1.0 - tx) * (1.0 - ty) * v(i0, j0) + tx * (1.0 - ty) * v(i0 + 1, j0) +
                  (1.0 - tx) * ty * v(i0, j0 + 1) + tx * ty * v(i0 + 1, j0 + 1));
  }
  return out;
}

DarcyModel::DarcyModel(DarcyGrid grid, int kl_modes_per_side, double mean_log_conductivity,
                       ObservationSpec observation)
    : ForwardModel("darcy", Basis::cosine_tensor(kl_modes_per_side), std::move(observation)),
      grid_(grid),
      mean_log_conductivity_(mean_log_conductivity),
      cos_x_(static_cast<std::size_t>(kl_modes_per_side), static_cast<std::size_t>(grid.cells)) {
  // Normalized 1d cosine table: row k = c_k cos(pi k x / 6) at cell centers,
  // with c_0 = sqrt(1/6) and c_k = sqrt(1/3) otherwise.
  const int m = grid_.cells;
  const double width = grid_.cell_width();
  for (int k = 0; k < kl_modes_per_side; ++k) {
    const double ck = k == 0 ? std::sqrt(1.0 / 6.0) : std::sqrt(1.0 / 3.0);
    for (int i = 0; i < m; ++i) {
      const double x = (i + 0.5) * width;
      cos_x_(static_cast<std::size_t>(k), static_cast<std::size_t>(i)) =
          ck * std::cos(kPi * k * x / 6.0);
    }
  }
}

Field DarcyModel::synthesize_log_conductivity(const Field& coeffs) const {
  if (coeffs.basis() != input_basis())
    throw BasisMismatch("darcy: coefficient field basis mismatch");
  const int m = grid_.cells;
  const int K = input_basis().truncation();
  const auto modes = cosine_mode_table(K);

  // Separable synthesis: fold k2 first, then k1.
  DenseMatrix partial(static_cast<std::size_t>(K), static_cast<std::size_t>(m), 0.0);
  for (std::size_t q = 0; q < modes.size(); ++q) {
    const double c = coeffs[q];
    if (c == 0.0) continue;
    const auto [k1, k2] = modes[q];
    const double* cy = cos_x_.row(static_cast<std::size_t>(k2));
    double* row = partial.row(static_cast<std::size_t>(k1));
    for (int j = 0; j < m; ++j) row[static_cast<std::size_t>(j)] += c * cy[j];
  }

  std::vector<double> cells(grid_.n_cells(), mean_log_conductivity_);
  for (int k1 = 0; k1 < K; ++k1) {
    const double* cx = cos_x_.row(static_cast<std::size_t>(k1));
    const double* row = partial.row(static_cast<std::size_t>(k1));
    for (int j = 0; j < m; ++j) {
      const double py = row[j];
      if (py == 0.0) continue;
      double* dst = cells.data() + static_cast<std::size_t>(j) * m;
      for (int i = 0; i < m; ++i) dst[i] += cx[i] * py;
    }
  }
  return Field(Basis::nodal(m), std::move(cells));
}

std::vector<double> DarcyModel::do_evaluate(const Field& u) const {
  Field cells = synthesize_log_conductivity(u);
  Field head = darcy_solve(cells, grid_);
  return observe(head, observation_spec());
}

}  // namespace eki
