#pragma once

#include <filesystem>
#include <string>

#include "floquet/curve.hpp"
#include "floquet/units.hpp"

namespace floquet {

/// Uniform radial grid with exterior complex scaling beyond `ecs_radius`.
struct RadialGrid {
  double r_min = 0.5;
  double r_max = 25.0;
  int n_points = 3001;
  double ecs_radius = 15.0;
  double ecs_angle = 0.3;

  double step() const { return (r_max - r_min) / (n_points - 1); }
  double point(int i) const { return r_min + i * step(); }

  /// Throws std::invalid_argument on r_min < ecs_radius < r_max, n_points >= 500, 0 < angle < pi/4.
  void validate() const;

  /// Same extent with the step halved.
  RadialGrid refined() const;
};

enum class Electronic { g, u };

/// Two-state diatomic: potentials referenced to the common dissociation limit (0), transition
/// dipole, and reduced mass, all in atomic units.
struct MoleculeModel {
  std::string name;
  CurvePtr vg;
  CurvePtr vu;
  CurvePtr dipole;
  double reduced_mass = 0.0;

  const RadialFunction& curve(Electronic s) const { return s == Electronic::g ? *vg : *vu; }

  /// Checks the model invariants on [r_lo, r_hi]; throws std::invalid_argument naming the violation.
  void validate(double r_lo, double r_hi) const;

  /// Position of the ground-state minimum on [r_lo, r_hi].
  double equilibrium(double r_lo, double r_hi) const;

  std::uint64_t fingerprint() const;
};

/// Morse ground state, exponential repulsive excited state, linear dipole.
struct AnalyticModelParams {
  double morse_depth = 0.1026;
  double morse_a = 0.72;
  double morse_re = 2.0;
  double repulsive_amplitude = 1.2;
  double repulsive_b = 0.71;
  double dipole_c0 = 0.0;
  double dipole_c1 = 0.5;
  double reduced_mass = units::kProtonMass / 2.0;
};

MoleculeModel make_analytic_model(const AnalyticModelParams& p, std::string name = "analytic");

/// Loads a model from a key = value descriptor file, or one of the bundled names
/// "h2plus" (tabulated Born-Oppenheimer curves) and "h2plus-morse" (analytic fallback).
MoleculeModel load_molecule(const std::string& descriptor);

/// Directory holding the bundled curve tables.
std::filesystem::path bundled_data_dir();

struct PhotonBlock {
  Electronic state;
  int photons;
};

/// V_{state}(R) + n hbar omega.
double dressed_diabatic(const MoleculeModel& model, const FieldPoint& field, PhotonBlock block, double r);

struct AdiabaticPair {
  double v_plus;
  double v_minus;
};

/// Eigenvalues of [[V_g, -E0 mu / 2], [-E0 mu / 2, V_u - hbar omega]] at R, upper first.
AdiabaticPair adiabatic_potentials(const MoleculeModel& model, const FieldPoint& field, double r);

/// R where V_g(R) = V_u(R) - hbar omega, searched outward from the ground equilibrium;
/// NaN when there is no crossing on [r_lo, r_hi].
double diabatic_crossing(const MoleculeModel& model, double omega, double r_lo, double r_hi);

}  // namespace floquet
