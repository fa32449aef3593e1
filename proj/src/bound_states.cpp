#include "floquet/bound_states.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace floquet {

namespace {

// Numerov pencil in the renormalised variable u = (1 - h^2 G / 12) phi, G = 2M (V - E):
//   u_{i+1} + u_{i-1} + T_i(E) u_i = 0,  T_i = -2 - h^2 G_i / (1 - h^2 G_i / 12).
// T is symmetric tridiagonal with unit off-diagonals and increases monotonically with E, so the
// number of its positive eigenvalues equals the number of levels below E.
class NumerovPencil {
 public:
  NumerovPencil(std::span<const double> v, double h, double mass) : v_(v.begin(), v.end()), h2_(h * h), mass_(mass) {}

  double diag(std::size_t i, double e) const {
    const double q = h2_ * 2.0 * mass_ * (v_[i] - e);
    const double denom = 1.0 - q / 12.0;
    if (denom < 0.05) throw std::invalid_argument("bound states: grid too coarse for the potential");
    return -2.0 - q / denom;
  }

  int count_below(double e) const {
    const std::size_t n = v_.size();
    int count = 0;
    double d = diag(1, e);
    count += d > 0.0;
    for (std::size_t i = 2; i + 1 < n; ++i) {
      if (d == 0.0) d = 1e-300;
      d = diag(i, e) - 1.0 / d;
      count += d > 0.0;
    }
    return count;
  }

  // Sign changes of the eigenfunction at energy e, joined at the outer turning point.
  int nodes(double e) const {
    const std::size_t n = v_.size();
    std::size_t m = 1;
    for (std::size_t i = 1; i + 1 < n; ++i)
      if (v_[i] < e) m = i;
    m = std::min(m + 1, n - 2);
    auto sweep = [&](std::size_t from, std::size_t to, int dir) {
      double prev = 0.0, cur = 1.0;
      int changes = 0;
      for (std::size_t i = from; i != to; i += static_cast<std::size_t>(dir)) {
        const double next = -diag(i, e) * cur - prev;
        if ((next < 0.0) != (cur < 0.0) && next != 0.0) ++changes;
        prev = cur;
        cur = next;
        if (std::abs(cur) > 1e100) {
          prev *= 1e-100;
          cur *= 1e-100;
        }
      }
      return changes;
    };
    return sweep(1, m, 1) + sweep(n - 2, m, -1);
  }

  std::size_t size() const { return v_.size(); }
  double min() const { return *std::min_element(v_.begin() + 1, v_.end() - 1); }
  double threshold() const { return v_.back(); }

 private:
  std::vector<double> v_;
  double h2_, mass_;
};

struct RawLevels {
  std::vector<double> energies;
  std::vector<int> nodes;
  bool truncated = false;
};

RawLevels solve_pencil(const NumerovPencil& p, int v_max, double tol) {
  RawLevels out;
  const double lo0 = p.min(), hi0 = p.threshold();
  if (!(hi0 > lo0)) throw std::invalid_argument("bound states: potential has no minimum");
  const int available = p.count_below(hi0);
  const int top = std::min(v_max, available - 1);
  out.truncated = top < v_max;
  double lo = lo0;
  for (int v = 0; v <= top; ++v) {
    double hi = hi0;
    while (hi - lo > tol * std::max(1.0, std::abs(lo))) {
      const double mid = 0.5 * (lo + hi);
      if (p.count_below(mid) >= v + 1)
        hi = mid;
      else
        lo = mid;
    }
    const double e = 0.5 * (lo + hi);
    out.energies.push_back(e);
    out.nodes.push_back(p.nodes(e));
    lo = hi;
  }
  return out;
}

void check_has_minimum(std::span<const double> v) {
  const auto it = std::min_element(v.begin(), v.end());
  const auto i = std::distance(v.begin(), it);
  if (i == 0 || i == static_cast<std::ptrdiff_t>(v.size()) - 1)
    throw std::invalid_argument("bound states: potential has no minimum");
}

LevelSet assemble(const std::vector<RawLevels>& runs) {
  LevelSet set;
  std::size_t count = runs.front().energies.size();
  for (const auto& r : runs) count = std::min(count, r.energies.size());
  set.truncated = runs.front().truncated || count < runs.front().energies.size();
  for (std::size_t v = 0; v < count; ++v) {
    // Richardson table over h, h/2, h/4, ... with Numerov's h^4, h^6, ... expansion
    std::vector<double> col;
    for (const auto& r : runs) col.push_back(r.energies[v]);
    int order = 4;
    while (col.size() > 1) {
      const double f = std::pow(2.0, order);
      std::vector<double> next;
      for (std::size_t k = 0; k + 1 < col.size(); ++k) next.push_back((f * col[k + 1] - col[k]) / (f - 1.0));
      col = std::move(next);
      order += 2;
    }
    set.levels.push_back({static_cast<int>(v), col.front(), runs.back().nodes[v]});
  }
  for (const auto& l : set.levels)
    if (l.nodes != l.v) throw std::runtime_error("bound states: node count does not match level index");
  return set;
}

}  // namespace

LevelSet vibrational_levels_sampled(std::span<const double> samples, double h, double mass, int v_max,
                                    double tolerance) {
  if (samples.size() < 8) throw std::invalid_argument("bound states: too few grid points");
  check_has_minimum(samples);
  NumerovPencil p(samples, h, mass);
  return assemble({solve_pencil(p, v_max, tolerance)});
}

LevelSet vibrational_levels(const std::function<double(double)>& potential, double mass, int v_max,
                            const RadialGrid& grid, const LevelOptions& options) {
  if (!(mass > 0.0)) throw std::invalid_argument("bound states: mass must be positive");
  if (v_max < 0) return {};
  std::vector<RawLevels> runs;
  RadialGrid g = grid;
  for (int k = 0; k < std::max(options.richardson, 1); ++k) {
    std::vector<double> v(static_cast<std::size_t>(g.n_points));
    for (int i = 0; i < g.n_points; ++i) v[static_cast<std::size_t>(i)] = potential(g.point(i));
    check_has_minimum(v);
    runs.push_back(solve_pencil(NumerovPencil(v, g.step(), mass), v_max, options.tolerance));
    g = g.refined();
  }
  return assemble(runs);
}

LevelSet adiabatic_levels(const MoleculeModel& model, const FieldPoint& field, int vplus_max, const RadialGrid& grid,
                          const LevelOptions& options) {
  if (field.intensity == 0.0) throw std::invalid_argument("zero-field adiabat undefined at crossing");
  auto vplus = [&](double r) { return adiabatic_potentials(model, field, r).v_plus; };
  try {
    return vibrational_levels(vplus, model.reduced_mass, vplus_max, grid, options);
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).find("no minimum") != std::string::npos) return {{}, true};
    throw;
  }
}

LevelSet field_free_levels(const MoleculeModel& model, int v_max, const RadialGrid& grid,
                           const LevelOptions& options) {
  const auto& vg = *model.vg;
  return vibrational_levels([&](double r) { return vg(r); }, model.reduced_mass, v_max, grid, options);
}

}  // namespace floquet
