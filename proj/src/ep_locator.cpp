#include "floquet/ep_locator.hpp"

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace floquet {

// ---------------------------------------------------------------------------------------------
// Coarse stage

namespace {

struct AdiabaticScan {
  std::vector<double> lambda;
  std::vector<std::vector<double>> energy;  // [point][v+], NaN where V+ holds fewer levels
};

std::vector<double> upper_levels(const MoleculeModel& model, double lambda, double intensity, int vplus_max,
                                 const RadialGrid& grid, const LevelOptions& opts) {
  std::vector<double> out(static_cast<std::size_t>(vplus_max + 1), std::nan(""));
  const auto set = adiabatic_levels(model, FieldPoint{lambda, intensity}, vplus_max, grid, opts);
  for (const auto& l : set.levels) out[static_cast<std::size_t>(l.v)] = l.energy;
  return out;
}

}  // namespace

std::vector<EPCandidate> approximate_eps(const MoleculeModel& model, int v_min, int v_max, int vplus_max,
                                         double lambda_lo, double lambda_hi, const RadialGrid& grid,
                                         const ApproximateOptions& options) {
  std::vector<EPCandidate> out;
  if (!(lambda_hi > lambda_lo) || v_max <= v_min) return out;
  const auto levels = field_free_levels(model, v_max, grid, options.levels);
  const double re = model.equilibrium(grid.r_min, grid.ecs_radius);

  AdiabaticScan scan;
  const int n = std::max(1, static_cast<int>(std::ceil((lambda_hi - lambda_lo) / options.scan_step_nm)));
  for (int k = 0; k <= n; ++k) {
    const double lam = lambda_lo + (lambda_hi - lambda_lo) * k / n;
    scan.lambda.push_back(lam);
    scan.energy.push_back(upper_levels(model, lam, options.reference_intensity, vplus_max, grid, options.levels));
  }

  for (int v = v_min; v < v_max && v + 1 < static_cast<int>(levels.levels.size()); ++v) {
    const double ev = levels.energy(v);
    for (int vp = 0; vp <= vplus_max; ++vp) {
      const auto k_vp = static_cast<std::size_t>(vp);
      for (std::size_t k = 0; k + 1 < scan.lambda.size(); ++k) {
        const double f0 = ev - scan.energy[k][k_vp], f1 = ev - scan.energy[k + 1][k_vp];
        if (!std::isfinite(f0) || !std::isfinite(f1) || (f0 > 0) == (f1 > 0)) continue;
        double a = scan.lambda[k], b = scan.lambda[k + 1], fa = f0;
        while (b - a > options.tolerance_nm) {
          const double m = 0.5 * (a + b);
          const double fm = ev - upper_levels(model, m, options.reference_intensity, vp, grid, options.levels)[k_vp];
          if (!std::isfinite(fm)) break;
          if ((fm > 0) == (fa > 0)) {
            a = m, fa = fm;
          } else {
            b = m;
          }
        }
        const double lam = 0.5 * (a + b);
        const double rx = diabatic_crossing(model, FieldPoint{lam, 1.0}.omega(), grid.r_min, grid.ecs_radius);
        if (!std::isfinite(rx) || rx <= re) continue;  // c+ crossings only
        out.push_back({v, v + 1, vp, lam, rx});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Newton on the squared gap

namespace {

struct NmContext {
  const GapFunction* f;
  int evaluations = 0;
};

double nm_objective(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  ++ctx->evaluations;
  const double lam = gsl_vector_get(x, 0), inten = gsl_vector_get(x, 1);
  if (!(inten > 0.0) || !(lam > 0.0)) return 1e300;
  try {
    return std::abs((*ctx->f)(lam, inten));
  } catch (const std::exception&) {
    return 1e300;
  }
}

NewtonResult nelder_mead(const GapFunction& f, double lam, double inten, const NewtonOptions& o, int prior) {
  NmContext ctx{&f};
  gsl_multimin_function fn{&nm_objective, 2, &ctx};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, lam);
  gsl_vector_set(x, 1, inten);
  gsl_vector_set(step, 0, std::max(10.0 * o.fd_step_nm, 0.05));
  gsl_vector_set(step, 1, std::max(10.0 * o.fd_step_intensity, 0.002));
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  const double target = o.gap_tolerance * o.gap_tolerance;
  int it = 0;
  for (; it < 2000; ++it) {
    if (gsl_multimin_fminimizer_iterate(s)) break;
    if (s->fval < target || gsl_multimin_fminimizer_size(s) < 1e-12) break;
  }
  NewtonResult r{gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1), 0.0, prior + it, "nelder-mead", false};
  r.gap_sq = f(r.lambda_nm, r.intensity);
  r.converged = std::abs(r.gap_sq) < target;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return r;
}

}  // namespace

NewtonResult solve_ep(const GapFunction& f, double lambda0, double intensity0, const NewtonOptions& o) {
  double lam = lambda0, inten = intensity0;
  cplx fx = f(lam, inten);
  const double target = o.gap_tolerance * o.gap_tolerance;
  int it = 0;
  bool stalled = false;
  for (; it < o.max_iterations && std::abs(fx) >= target; ++it) {
    const double hl = o.fd_step_nm, hi = std::min(o.fd_step_intensity, 0.5 * inten);
    const cplx dl = (f(lam + hl, inten) - f(lam - hl, inten)) / (2.0 * hl);
    const cplx di = (f(lam, inten + hi) - f(lam, inten - hi)) / (2.0 * hi);
    // [Re dl, Re di; Im dl, Im di] (dlam, dI) = -(Re f, Im f)
    const double det = dl.real() * di.imag() - di.real() * dl.imag();
    if (det == 0.0 || !std::isfinite(det)) {
      stalled = true;
      break;
    }
    double sl = -(fx.real() * di.imag() - di.real() * fx.imag()) / det;
    double si = -(dl.real() * fx.imag() - fx.real() * dl.imag()) / det;
    const double scale = std::max({1.0, std::abs(sl) / o.max_step_nm, std::abs(si) / o.max_step_intensity});
    sl /= scale, si /= scale;
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls, t *= 0.5) {
      const double nl = lam + t * sl, ni = inten + t * si;
      if (!(ni > 0.0)) continue;
      cplx fn;
      try {
        fn = f(nl, ni);
      } catch (const std::exception&) {
        continue;
      }
      if (std::abs(fn) < std::abs(fx) || ls == 7) {
        lam = nl, inten = ni, fx = fn;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
  }
  NewtonResult r{lam, inten, fx, it, "newton", std::abs(fx) < target};
  if (!r.converged && o.allow_fallback && (stalled || it >= o.max_iterations)) return nelder_mead(f, lam, inten, o, it);
  return r;
}

// ---------------------------------------------------------------------------------------------
// Molecular pair gap

PairGap::PairGap(const SystemFamily& family, cplx center, double radius, const RefineOptions& options)
    : family_(family), center_(center), radius_(std::max(radius, options.min_radius)), options_(options) {}

cplx PairGap::operator()(double lambda_nm, double intensity_1e13) {
  const auto sys = family_.at(FieldPoint::in_1e13(lambda_nm, intensity_1e13));
  // Re-locate the pair by secant from the two roots of the previous circle.
  const cplx half = 0.5 * radius_;
  cplx c = center_;
  double r = radius_;
  try {
    const auto e1 = find_resonance(sys, center_ + half, options_.continuation.solver).energy;
    const auto e2 = find_resonance(sys, center_ - half, options_.continuation.solver).energy;
    if (std::abs(e1 - center_) < 4.0 * radius_ && std::abs(e2 - center_) < 4.0 * radius_) {
      c = 0.5 * (e1 + e2);
      r = std::max(std::abs(e1 - e2), options_.min_radius);
    }
  } catch (const ConvergenceError&) {
  }
  for (int attempt = 0; attempt < 10; ++attempt) {
    const auto m = root_moments(sys, c, r, options_.contour_nodes);
    const double n = std::round(m.count);
    if (std::abs(m.count - n) > 0.05) {
      r *= 1.25;
      continue;
    }
    if (n == 2.0) {
      const cplx g2 = m.gap_sq();
      const double gap = std::sqrt(std::abs(g2));
      // Recentre if the pair sits off-centre, which costs trapezoid accuracy.
      if (std::abs(m.midpoint() - c) > 0.25 * r || r > 3.0 * std::max(gap, options_.min_radius)) {
        c = m.midpoint();
        r = std::max(gap, options_.min_radius);
        const auto m2 = root_moments(sys, c, r, options_.contour_nodes);
        if (std::abs(m2.count - 2.0) < 0.05) {
          center_ = c, radius_ = r;
          return m2.gap_sq();
        }
        r *= 1.25;
        continue;
      }
      center_ = m.midpoint();
      radius_ = std::max(gap, options_.min_radius);
      return g2;
    }
    r *= n < 2.0 ? 2.0 : 0.6;
  }
  throw ConvergenceError("pair gap: contour lost the coalescing pair at lambda = " + std::to_string(lambda_nm) +
                         " nm, I = " + std::to_string(intensity_1e13));
}

EPRecord refine_ep(const SystemFamily& family, const LevelSet& levels, const EPCandidate& candidate,
                   const RefineOptions& options) {
  EPRecord rec;
  rec.v_low = std::min(candidate.v, candidate.v_partner);
  rec.v_high = std::max(candidate.v, candidate.v_partner);
  rec.v_plus = candidate.v_plus;
  const double lam = candidate.lambda_guess;
  auto at = [&](double s) { return family.at(FieldPoint::in_1e13(lam, s)); };
  // Scan windows of growing length until the smallest gap is bracketed away from the far edge.
  std::vector<PairPoint> pts;
  double s0 = 0.0, len = options.scan_max_intensity;
  cplx a0 = levels.energy(rec.v_low), b0 = levels.energy(rec.v_high);
  const int n = std::max(1, static_cast<int>(std::lround(options.scan_max_intensity / options.scan_step)));
  for (int window = 0; window < options.scan_windows; ++window, len *= 2.0) {
    const auto track = track_pair(at, s0, s0 + len, n, a0, b0, options.continuation);
    if (track.points.size() < 2) break;
    pts.insert(pts.end(), track.points.begin() + (pts.empty() ? 0 : 1), track.points.end());
    const auto best = std::min_element(pts.begin() + 1, pts.end(), [](const PairPoint& x, const PairPoint& y) {
      return std::abs(x.a - x.b) < std::abs(y.a - y.b);
    });
    if (!track.complete || best->s < s0 + 0.9 * len) break;
    s0 = pts.back().s, a0 = pts.back().a, b0 = pts.back().b;
  }
  if (pts.size() < 3) throw ContinuationError("refine_ep: zero-field continuation failed at " + std::to_string(lam) + " nm");
  const auto best = std::min_element(pts.begin() + 1, pts.end(), [](const PairPoint& x, const PairPoint& y) {
    return std::abs(x.a - x.b) < std::abs(y.a - y.b);
  });

  PairGap gap(family, 0.5 * (best->a + best->b), std::abs(best->a - best->b), options);
  const auto sol = solve_ep(std::ref(gap), lam, best->s, options.newton);
  rec.lambda_nm = sol.lambda_nm;
  rec.intensity = sol.intensity;
  rec.gap_residual = std::sqrt(std::abs(sol.gap_sq));
  rec.energy = gap.midpoint();
  rec.iterations = sol.iterations;
  rec.method = sol.method;
  rec.valid = sol.converged && sol.intensity > 0.0;
  if (!sol.converged) rec.note = "gap above tolerance";
  return rec;
}

// ---------------------------------------------------------------------------------------------
// Signature

PairSpectrum molecular_spectrum(const SystemFamily& family, const LevelSet& levels, int v_low, int v_high,
                                const ContinuationOptions& options) {
  struct State {
    double lambda = std::nan("");
    double intensity = 0.0;
    cplx a, b;
  };
  auto state = std::make_shared<State>();
  const cplx ea = levels.energy(v_low), eb = levels.energy(v_high);
  return [&family, options, state, ea, eb](double lambda, double intensity) -> std::pair<cplx, cplx> {
    if (lambda != state->lambda || intensity < state->intensity) {
      state->lambda = lambda;
      state->intensity = 0.0;
      state->a = ea;
      state->b = eb;
    }
    if (intensity > state->intensity) {
      auto at = [&](double s) { return family.at(FieldPoint::in_1e13(lambda, s)); };
      const int n = std::max(2, static_cast<int>(std::ceil((intensity - state->intensity) / 0.004)));
      const auto track = track_pair(at, state->intensity, intensity, n, state->a, state->b, options);
      if (!track.complete) throw ContinuationError("molecular_spectrum: " + track.error);
      state->a = track.points.back().a;
      state->b = track.points.back().b;
      state->intensity = intensity;
    } else if (state->intensity == 0.0) {
      const auto sys = family.at(FieldPoint::in_1e13(lambda, 0.0));
      state->a = find_resonance(sys, ea, options.solver).energy;
      state->b = find_resonance(sys, eb, options.solver).energy;
    }
    return {state->a, state->b};
  };
}

namespace {

bool sign_change(const std::vector<double>& x) {
  for (std::size_t i = 1; i < x.size(); ++i)
    if ((x[i] > 0) != (x[i - 1] > 0)) return true;
  return false;
}

// Net change from index `from` to the end of the scan.
Character net_character(const std::vector<cplx>& e, std::size_t from) {
  const double de = e.back().real() - e[from].real();
  const double dw = -2.0 * (e.back().imag() - e[from].imag());
  if (de > 0 && dw < 0) return Character::Feshbach;
  if (de < 0 && dw > 0) return Character::Shape;
  return Character::Unclassified;
}

SideScan scan_side(const PairSpectrum& spectrum, double lambda, double i_lo, double i_hi, double i_ep, int n) {
  SideScan side;
  side.lambda_nm = lambda;
  std::vector<double> dre, dim;
  for (int k = 0; k < n; ++k) {
    const double inten = i_lo + (i_hi - i_lo) * k / (n - 1);
    const auto [a, b] = spectrum(lambda, inten);
    side.intensity.push_back(inten);
    side.a.push_back(a);
    side.b.push_back(b);
    dre.push_back(a.real() - b.real());
    dim.push_back(a.imag() - b.imag());
  }
  side.real_crossing = sign_change(dre);
  side.width_crossing = sign_change(dim);
  // Characters are judged past the coalescence intensity, where the branches have separated again.
  std::size_t from = 0;
  while (from + 2 < side.intensity.size() && side.intensity[from] < i_ep) ++from;
  side.char_a = net_character(side.a, from);
  side.char_b = net_character(side.b, from);
  return side;
}

}  // namespace

SignatureReport verify_signature(const PairSpectrum& spectrum, const EPRecord& ep, double d_lambda,
                                 double half_window, int n_points, const std::vector<EPRecord>& neighbours) {
  if (!(d_lambda > 0.0)) throw std::invalid_argument("verify_signature: d_lambda must be positive");
  if (n_points < 3) throw std::invalid_argument("verify_signature: need at least 3 scan points");
  SignatureReport rep;
  const double i_lo = std::max(ep.intensity - half_window, 0.0);
  const double i_hi = ep.intensity + half_window;
  rep.below = scan_side(spectrum, ep.lambda_nm - d_lambda, i_lo, i_hi, ep.intensity, n_points);
  rep.above = scan_side(spectrum, ep.lambda_nm + d_lambda, i_lo, i_hi, ep.intensity, n_points);
  auto crossing_only = [](const SideScan& s) { return s.real_crossing && !s.width_crossing; };
  auto tweezer_only = [](const SideScan& s) { return s.width_crossing && !s.real_crossing; };
  rep.present = (crossing_only(rep.below) && tweezer_only(rep.above)) ||
                (tweezer_only(rep.below) && crossing_only(rep.above));
  const auto u = Character::Unclassified;
  rep.interchanged = rep.below.char_a != u && rep.below.char_b != u && rep.below.char_a != rep.below.char_b &&
                     rep.above.char_a == rep.below.char_b && rep.above.char_b == rep.below.char_a;
  for (const auto& nb : neighbours) {
    const bool same = nb.v_low == ep.v_low && nb.v_high == ep.v_high && std::abs(nb.lambda_nm - ep.lambda_nm) < 1e-6 &&
                      std::abs(nb.intensity - ep.intensity) < 1e-6;
    if (!same && std::abs(nb.lambda_nm - ep.lambda_nm) <= d_lambda) rep.contaminated = true;
  }
  rep.summary = rep.contaminated ? "signature contaminated"
                : rep.present    ? (rep.interchanged ? "signature present, characters interchanged"
                                                     : "signature present, characters not interchanged")
                                 : "signature absent";
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Map

std::vector<EPRecord> map_eps(const MoleculeModel& model, const RadialGrid& grid, const MapOptions& options) {
  const auto candidates = approximate_eps(model, options.v_min, options.v_max, options.vplus_max, options.lambda_lo,
                                          options.lambda_hi, grid, options.approximate);
  const SystemFamily family(model, grid);
  const auto levels = field_free_levels(model, options.v_max, grid);
  std::vector<std::optional<EPRecord>> results(candidates.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      std::optional<EPRecord> rec;
      std::string error;
      if (options.cached) rec = options.cached(candidates[i]);
      if (!rec) {
        try {
          rec = refine_ep(family, levels, candidates[i], options.refine);
        } catch (const std::exception& e) {
          error = e.what();
        }
      }
      results[i] = rec;
      if (options.progress) {
        std::lock_guard lock(report);
        options.progress(candidates[i], rec, error);
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<EPRecord> out;
  for (const auto& r : results) {
    if (!r || !r->valid) continue;
    bool dup = false;
    for (auto& o : out)
      if (o.v_low == r->v_low && std::abs(o.lambda_nm - r->lambda_nm) < 0.5 && std::abs(o.intensity - r->intensity) < 5e-3) {
        if (r->gap_residual < o.gap_residual) o = *r;
        dup = true;
      }
    if (!dup) out.push_back(*r);
  }
  std::sort(out.begin(), out.end(), [](const EPRecord& a, const EPRecord& b) {
    return a.v_low != b.v_low ? a.v_low < b.v_low : a.lambda_nm < b.lambda_nm;
  });
  return out;
}

std::vector<Cluster> group_clusters(const std::vector<EPRecord>& records, double max_gap_nm) {
  std::map<int, std::vector<EPRecord>> by_diagonal;
  for (const auto& r : records) by_diagonal[r.v_low - r.v_plus].push_back(r);
  std::vector<Cluster> out;
  for (auto& [diag, recs] : by_diagonal) {
    std::sort(recs.begin(), recs.end(), [](const EPRecord& a, const EPRecord& b) { return a.lambda_nm < b.lambda_nm; });
    Cluster cur{diag, {}};
    for (const auto& r : recs) {
      if (!cur.members.empty() && r.lambda_nm - cur.members.back().lambda_nm >= max_gap_nm) {
        out.push_back(cur);
        cur.members.clear();
      }
      cur.members.push_back(r);
    }
    if (!cur.members.empty()) out.push_back(cur);
  }
  for (auto& c : out)
    std::sort(c.members.begin(), c.members.end(), [](const EPRecord& a, const EPRecord& b) { return a.v_low < b.v_low; });
  std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
    return a.members.front().lambda_nm > b.members.front().lambda_nm;
  });
  return out;
}

std::vector<Cluster> map_clusters(const MoleculeModel& model, const RadialGrid& grid, const MapOptions& options,
                                  double max_gap_nm) {
  return group_clusters(map_eps(model, grid, options), max_gap_nm);
}

}  // namespace floquet
