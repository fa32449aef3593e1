#pragma once

#include <complex>
#include <memory>
#include <stdexcept>
#include <vector>

#include "floquet/molecule.hpp"

namespace floquet {

using cplx = std::complex<double>;

enum class Character { Feshbach, Shape, Unclassified };

const char* to_string(Character c);

/// Complex quasienergy E = E_R - i Gamma / 2 of a Floquet resonance.
struct Resonance {
  cplx energy{};
  int label = -1;
  Character character = Character::Unclassified;
  double residual = 0.0;  ///< |matching determinant| at the returned energy
  int iterations = 0;

  double width() const { return -2.0 * energy.imag(); }
  double width_cm() const { return width() * units::kHartreeToInvCm; }
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Curves sampled on the exterior-scaled contour plus per-point three-term Numerov
/// coefficients. Field independent, so one instance serves every (wavelength, intensity).
class Discretization {
 public:
  Discretization(MoleculeModel model, RadialGrid grid);

  const MoleculeModel& model() const { return model_; }
  const RadialGrid& grid() const { return grid_; }
  int size() const { return static_cast<int>(z_.size()); }
  cplx z(int i) const { return z_[static_cast<std::size_t>(i)]; }
  cplx vg(int i) const { return vg_[static_cast<std::size_t>(i)]; }
  cplx vu(int i) const { return vu_[static_cast<std::size_t>(i)]; }
  cplx dipole(int i) const { return mu_[static_cast<std::size_t>(i)]; }
  /// Index of the grid point closest to the ground-state minimum.
  int equilibrium_index() const { return equilibrium_index_; }

  // Row i of the recurrence, divided by s_i = (a_i + b_i) / 2 with a_i = z_i - z_{i-1},
  // b_i = z_{i+1} - z_i:
  //   (a I - c1 G_{i+1}) phi_{i+1} - ((a + b) I + c0 G_i) phi_i + (b I - c2 G_{i-1}) phi_{i-1} = 0
  // with d^2 phi / dz^2 = G phi. At uniform spacing this is Numerov; at the scaling kink it is
  // the three-point formula exact through fourth order in the local steps.
  struct Row {
    cplx a, b, c1, c0, c2;
  };
  const Row& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

 private:
  MoleculeModel model_;
  RadialGrid grid_;
  std::vector<cplx> z_, vg_, vu_, mu_;
  std::vector<Row> rows_;
  int equilibrium_index_ = 0;
};

/// Coupled Fourier-block system at one field point.
class CoupledSystem {
 public:
  CoupledSystem(std::shared_ptr<const Discretization> disc, FieldPoint field, int n_blocks);

  CoupledSystem with_field(const FieldPoint& field) const { return {disc_, field, n_blocks()}; }

  const FieldPoint& field() const { return field_; }
  const Discretization& discretization() const { return *disc_; }
  std::shared_ptr<const Discretization> shared_discretization() const { return disc_; }
  const std::vector<PhotonBlock>& blocks() const { return blocks_; }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  double reduced_mass() const { return disc_->model().reduced_mass; }

  int matching_index() const { return disc_->equilibrium_index() + matching_offset_; }
  void set_matching_offset(int offset) { matching_offset_ = offset; }

  /// Potential-plus-coupling matrix (hartree) at grid point i; diagonal V_k + n_k hbar omega,
  /// -E0 mu / 2 between adjacent blocks.
  std::vector<cplx> potential_matrix(int i) const;

  struct Evaluation {
    cplx det;             ///< determinant of the matching matrix
    cplx log_derivative;  ///< d/dE log det of the full discretised operator
  };
  Evaluation evaluate(cplx energy, bool with_derivative) const;

 private:
  template <int Nc>
  Evaluation propagate(cplx energy, bool with_derivative) const;

  std::shared_ptr<const Discretization> disc_;
  FieldPoint field_;
  std::vector<PhotonBlock> blocks_;
  std::vector<cplx> potential_;  // 2M * potential matrix, column-major, per grid point
  int matching_offset_ = 0;
};

/// Blocks for an even count: photon index from n_blocks/2 - 1 down to -n_blocks/2, g on even n.
std::vector<PhotonBlock> floquet_blocks(int n_blocks);

/// Checks the de Broglie resolution and builds the system. Throws std::invalid_argument when the
/// grid is too coarse.
CoupledSystem build_system(const MoleculeModel& model, const FieldPoint& field, const RadialGrid& grid,
                           int n_blocks = 2);

cplx matching_determinant(const CoupledSystem& system, cplx energy);

struct SolverOptions {
  double tolerance = 1e-12;
  int max_iterations = 50;
  double initial_step = 1e-6;
  double max_step = 2e-3;
  /// Converged roots with Im E above this are rejected as unphysical.
  double im_tolerance = 1e-10;
};

/// Complex secant iteration on the matching determinant.
Resonance find_resonance(const CoupledSystem& system, cplx guess, const SolverOptions& options = {});

/// Power sums of the roots inside |E - center| < radius, relative to center, from the trapezoid
/// rule applied to the log-derivative of the characteristic function.
struct RootMoments {
  cplx center;
  double count = 0.0;
  cplx sum;     ///< sum (E_k - center)
  cplx sum_sq;  ///< sum (E_k - center)^2

  /// (E_1 - E_2)^2 when exactly two roots are enclosed.
  cplx gap_sq() const { return 2.0 * sum_sq - sum * sum; }
  cplx midpoint() const { return center + 0.5 * sum; }
};

RootMoments root_moments(const CoupledSystem& system, cplx center, double radius, int nodes = 48);

/// Systems at varying field for one model and grid.
class SystemFamily {
 public:
  SystemFamily(const MoleculeModel& model, const RadialGrid& grid, int n_blocks = 2);

  CoupledSystem at(const FieldPoint& field) const { return {disc_, field, n_blocks_}; }
  CoupledSystem at(double wavelength_nm, double intensity) const { return at(FieldPoint{wavelength_nm, intensity}); }

  const MoleculeModel& model() const { return disc_->model(); }
  const RadialGrid& grid() const { return disc_->grid(); }
  int n_blocks() const { return n_blocks_; }

 private:
  std::shared_ptr<const Discretization> disc_;
  int n_blocks_;
};

struct ClassifyOptions {
  /// Changes below this (hartree) count as no change.
  double noise = 1e-11;
};

/// Feshbach when E_R rises and Gamma falls between I and I + dI; Shape for the opposite signs.
Character classify_resonance(const SystemFamily& family, double wavelength_nm, const Resonance& res,
                             double intensity, double d_intensity, const SolverOptions& solver = {},
                             const ClassifyOptions& options = {});

}  // namespace floquet
