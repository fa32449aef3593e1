#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "floquet/bound_states.hpp"
#include "floquet/continuation.hpp"
#include "floquet/ep_locator.hpp"
#include "floquet/floquet.hpp"
#include "floquet/loop_engine.hpp"

namespace fixtures {

using floquet::cplx;

// Bundled H2+ model on the default grid, shared by the molecular tests.
struct H2Plus {
  floquet::MoleculeModel model = floquet::load_molecule("h2plus");
  floquet::RadialGrid grid;
  floquet::SystemFamily family{model, grid, 2};
  floquet::LevelSet levels = floquet::field_free_levels(model, 16, grid);

  static const H2Plus& get() {
    static const H2Plus instance;
    return instance;
  }

  // Resonance born from level v, continued in intensity at fixed wavelength.
  cplx continued(int v, double lambda_nm, double intensity_1e13, int steps = 40) const {
    auto at = [&](double s) { return family.at(floquet::FieldPoint::in_1e13(lambda_nm, s)); };
    const auto track = floquet::track_branch(at, 0.0, intensity_1e13, steps, levels.energy(v));
    if (!track.complete) throw std::runtime_error("fixture continuation failed: " + track.error);
    return track.points.back().energy;
  }
};

// Two-level non-Hermitian toy: H = E0 - i g0 + [[eps, g], [g, -eps]] with
// eps = a (lambda - lambda0) + c (I - gamma / b) - i gamma and g = b I.
// Its only EP in the upper half plane sits at (lambda0, gamma / b).
struct ToyEP {
  double lambda0 = 600.0, a = 2e-5, c = 1e-3, gamma = 1e-4, b = 5e-4, e0 = -0.01, g0 = 5e-4;

  double lambda_ep() const { return lambda0; }
  double intensity_ep() const { return gamma / b; }

  cplx eps(double lambda, double intensity) const {
    return {a * (lambda - lambda0) + c * (intensity - gamma / b), -gamma};
  }
  cplx gap_sq(double lambda, double intensity) const {
    const cplx e = eps(lambda, intensity);
    const double g = b * intensity;
    return 4.0 * (e * e + g * g);
  }
  // Branches labelled by continuity from I = 0, the first being E0 - i g0 + eps there. The root
  // is followed in small intensity steps because the principal square root has a cut on the path.
  std::pair<cplx, cplx> pair(double lambda, double intensity) const {
    auto root = [&](double s) {
      const cplx e = eps(lambda, s);
      const double g = b * s;
      return std::sqrt(e * e + g * g);
    };
    cplx r = eps(lambda, 0.0);
    const int n = std::max(1, static_cast<int>(std::ceil(intensity / 1e-3)));
    for (int k = 1; k <= n; ++k) {
      const cplx next = root(intensity * k / n);
      r = std::abs(next - r) <= std::abs(next + r) ? next : -next;
    }
    const cplx centre{e0, -g0};
    return {centre + r, centre - r};
  }
};

}  // namespace fixtures
