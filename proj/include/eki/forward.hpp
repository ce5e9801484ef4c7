#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eki/field.hpp"

namespace eki {

/// What a forward model reports: either the full coefficient vector of its
/// output field, or interpolated values at a list of points in [0,6]^2.
struct ObservationSpec {
  enum class Kind { all_coefficients, point_values };

  Kind kind = Kind::all_coefficients;
  std::vector<std::array<double, 2>> points;
  std::size_t size = 0;

  static ObservationSpec all_coefficients(std::size_t n);
  static ObservationSpec point_values(std::vector<std::array<double, 2>> pts);
};

/// Uniform lattice of observation wells at ((i-0.5)*6/n, (j-0.5)*6/n).
ObservationSpec well_lattice(int per_side);

struct DarcyGrid {
  int cells = 0;

  explicit DarcyGrid(int cells_per_side);
  double cell_width() const { return 6.0 / cells; }
  std::size_t n_cells() const { return static_cast<std::size_t>(cells) * cells; }
};

/// Forward response operator G: parameter field -> observed data vector.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  const std::string& name() const { return name_; }
  const Basis& input_basis() const { return input_basis_; }
  const ObservationSpec& observation_spec() const { return observation_; }

  /// Deterministic evaluation; output length equals observation_spec().size.
  std::vector<double> evaluate(const Field& u) const;

 protected:
  ForwardModel(std::string name, Basis input_basis, ObservationSpec observation)
      : name_(std::move(name)), input_basis_(input_basis), observation_(std::move(observation)) {}

  virtual std::vector<double> do_evaluate(const Field& u) const = 0;

 private:
  std::string name_;
  Basis input_basis_;
  ObservationSpec observation_;
};

std::vector<double> forward_response(const ForwardModel& model, const Field& u);

/// Applies (-d^2/dx^2 + 1)^{-1} with Dirichlet conditions on (0,pi):
/// coefficient k of the output is u_k / (1 + k^2), exactly.
Field elliptic_apply(const Field& u);

/// Linear model, diagonal in its input basis, observing all coefficients.
class DiagonalLinearModel final : public ForwardModel {
 public:
  DiagonalLinearModel(std::string name, Basis basis, std::vector<double> diagonal);
  const std::vector<double>& diagonal() const { return diagonal_; }

 private:
  std::vector<double> do_evaluate(const Field& u) const override;
  std::vector<double> diagonal_;
};

/// The 1d benchmark model: G = (-d^2/dx^2 + 1)^{-1} in the sine basis with
/// all K coefficients observed.
std::unique_ptr<DiagonalLinearModel> make_elliptic_model(int modes);

/// Head solve for -div(e^u grad h) = f on the cell-centered grid with the
/// groundwater benchmark data: bottom Dirichlet h=100, left inflow flux 500,
/// zero flux right/top, f piecewise constant in x2 (0 / 137 / 274).
/// `log_conductivity` holds cell-center values of u (nodal basis).
Field darcy_solve(const Field& log_conductivity, const DarcyGrid& grid);

/// All-Dirichlet variant with caller-supplied source cells and boundary
/// values; used for manufactured-solution and symmetry checks.
Field darcy_solve_dirichlet(const Field& log_conductivity, const DarcyGrid& grid,
                            const std::vector<double>& source_cells,
                            const std::function<double(double, double)>& boundary_value);

/// Assembled system diagnostics for the benchmark boundary conditions:
/// total flux out through the bottom Dirichlet boundary and total source
/// (cell sources plus left inflow). Discrete conservation makes them equal.
struct DarcyFluxBalance {
  double bottom_outflow = 0.0;
  double total_source = 0.0;
};
DarcyFluxBalance darcy_flux_balance(const Field& log_conductivity, const DarcyGrid& grid,
                                    const Field& head);

/// Coefficient vector / point values of a field per the observation spec.
/// Point observations use bilinear interpolation between cell centers.
std::vector<double> observe(const Field& state, const ObservationSpec& spec);

/// 2d groundwater model: input is a zero-mean cosine-coefficient field, the
/// physical log conductivity is mean + synthesis at cell centers, and the
/// response is the head at the observation wells.
class DarcyModel final : public ForwardModel {
 public:
  DarcyModel(DarcyGrid grid, int kl_modes_per_side, double mean_log_conductivity,
             ObservationSpec observation);

  const DarcyGrid& grid() const { return grid_; }
  double mean_log_conductivity() const { return mean_log_conductivity_; }

  /// mean + cosine synthesis evaluated at cell centers, as a nodal field.
  Field synthesize_log_conductivity(const Field& coeffs) const;

 private:
  std::vector<double> do_evaluate(const Field& u) const override;

  DarcyGrid grid_;
  double mean_log_conductivity_;
  DenseMatrix cos_x_;  // truncation x cells tables of normalized cosines
};

}  // namespace eki
