#pragma once

#include <functional>
#include <span>
#include <vector>

#include "floquet/molecule.hpp"

namespace floquet {

struct BoundLevel {
  int v = 0;
  double energy = 0.0;  ///< hartree, same reference as the potential
  int nodes = 0;        ///< sign changes of the eigenfunction on the finest grid used
};

struct LevelSet {
  std::vector<BoundLevel> levels;
  bool truncated = false;  ///< fewer bound levels than requested

  double energy(int v) const { return levels.at(static_cast<std::size_t>(v)).energy; }
};

struct LevelOptions {
  /// Number of successively halved grids combined by Richardson extrapolation (1 = none).
  int richardson = 3;
  double tolerance = 1e-13;
};

/// Bound levels 0..v_max of a single-channel potential in a box [r_min, r_max]. Levels are
/// bracketed by Sturm counting of the Numerov pencil and bisected; the dissociation threshold
/// is taken as the potential at r_max.
LevelSet vibrational_levels(const std::function<double(double)>& potential, double mass, int v_max,
                            const RadialGrid& grid, const LevelOptions& options = {});

/// Same, for a potential already sampled on a uniform grid with spacing h (no extrapolation).
LevelSet vibrational_levels_sampled(std::span<const double> samples, double h, double mass, int v_max,
                                    double tolerance = 1e-13);

/// Levels of the upper adiabatic potential V+ (box boundary at r_max).
LevelSet adiabatic_levels(const MoleculeModel& model, const FieldPoint& field, int vplus_max, const RadialGrid& grid,
                          const LevelOptions& options = {});

/// Field-free levels of the ground curve.
LevelSet field_free_levels(const MoleculeModel& model, int v_max, const RadialGrid& grid,
                           const LevelOptions& options = {});

}  // namespace floquet
