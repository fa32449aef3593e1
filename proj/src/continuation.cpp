#include "floquet/continuation.hpp"

#include <cmath>

namespace floquet {

void Extrapolator::push(double s, cplx e) {
  s_.push_back(s);
  e_.push_back(e);
  if (s_.size() > 3) {
    s_.erase(s_.begin());
    e_.erase(e_.begin());
  }
}

cplx Extrapolator::predict(double s) const {
  if (s_.empty()) throw std::logic_error("Extrapolator: no points");
  // Lagrange interpolation through the stored points.
  cplx out = 0.0;
  for (std::size_t i = 0; i < s_.size(); ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < s_.size(); ++j)
      if (j != i) w *= (s - s_[j]) / (s_[i] - s_[j]);
    out += w * e_[i];
  }
  return out;
}

namespace {

// Drives the nominal/sub-step schedule shared by the single and paired trackers. `attempt`
// returns true when the step to s was accepted.
template <class Attempt>
void march(double s0, double s1, int n_steps, const ContinuationOptions& options, Attempt&& attempt) {
  if (n_steps < 1) throw std::invalid_argument("continuation: n_steps must be positive");
  const double h_nom = (s1 - s0) / n_steps;
  double s = s0, h = h_nom;
  for (int k = 1; k <= n_steps; ++k) {
    const double target = k == n_steps ? s1 : s0 + k * h_nom;
    while (s != target) {
      const double s_try = std::abs(target - s) <= std::abs(h) * (1.0 + 1e-12) ? target : s + h;
      if (attempt(s_try)) {
        s = s_try;
        if (std::abs(h) < std::abs(h_nom)) h *= 2.0;
      } else {
        h *= 0.5;
        if (std::abs(h) < options.min_step_fraction * std::abs(h_nom))
          throw ContinuationError("continuation: step refinement exhausted near s = " + std::to_string(s));
      }
    }
  }
}

template <class Track, class Attempt>
void guarded_march(Track& track, double s0, double s1, int n_steps, const ContinuationOptions& options,
                   Attempt&& attempt) {
  try {
    march(s0, s1, n_steps, options, attempt);
  } catch (const ContinuationError& e) {
    track.complete = false;
    track.error = e.what();
  }
}

bool continuous(double jump, double& running, const ContinuationOptions& options) {
  return jump <= std::max(options.continuity_factor * running, options.continuity_floor);
}

}  // namespace

BranchTrack track_branch(const std::function<CoupledSystem(double)>& at, double s0, double s1, int n_steps,
                         cplx start, const ContinuationOptions& options) {
  BranchTrack track;
  auto& out = track.points;
  Resonance first;
  try {
    first = find_resonance(at(s0), start, options.solver);
  } catch (const ConvergenceError& e) {
    track.complete = false;
    track.error = e.what();
    return track;
  }
  out.push_back({s0, first.energy});
  Extrapolator ex;
  ex.push(s0, first.energy);
  double running = 0.0;
  guarded_march(track, s0, s1, n_steps, options, [&](double s) {
    const cplx pred = ex.predict(s);
    Resonance r;
    try {
      r = find_resonance(at(s), pred, options.solver);
    } catch (const ConvergenceError&) {
      return false;
    }
    const double jump = std::abs(r.energy - pred);
    if (!continuous(jump, running, options)) return false;
    running = jump;
    ex.push(s, r.energy);
    out.push_back({s, r.energy});
    return true;
  });
  return track;
}

namespace {

// Both roots inside a circle around the predictions, from contour moments.
bool split_pair(const CoupledSystem& sys, cplx pa, cplx pb, cplx& ea, cplx& eb) {
  const cplx center = 0.5 * (pa + pb);
  double radius = std::max(1.5 * std::abs(pa - pb), 1e-6);
  for (int attempt = 0; attempt < 6; ++attempt) {
    const auto m = root_moments(sys, center, radius);
    const double n = std::round(m.count);
    if (std::abs(m.count - n) > 0.05) {
      radius *= 1.3;
      continue;
    }
    if (n == 2.0) {
      const cplx half = 0.5 * std::sqrt(m.gap_sq());
      const cplx r1 = m.midpoint() + half, r2 = m.midpoint() - half;
      if (std::abs(r1 - pa) + std::abs(r2 - pb) <= std::abs(r1 - pb) + std::abs(r2 - pa)) {
        ea = r1, eb = r2;
      } else {
        ea = r2, eb = r1;
      }
      return true;
    }
    radius *= n < 2.0 ? 2.0 : 0.5;
  }
  return false;
}

}  // namespace

PairTrack track_pair(const std::function<CoupledSystem(double)>& at, double s0, double s1, int n_steps,
                     cplx start_a, cplx start_b, const ContinuationOptions& options) {
  PairTrack track;
  auto& out = track.points;
  try {
    const auto sys = at(s0);
    const auto ra = find_resonance(sys, start_a, options.solver);
    const auto rb = find_resonance(sys, start_b, options.solver);
    if (std::abs(ra.energy - rb.energy) < 1e-10)
      throw ConvergenceError("track_pair: both seeds converge to the same resonance");
    out.push_back({s0, ra.energy, rb.energy});
  } catch (const ConvergenceError& e) {
    track.complete = false;
    track.error = e.what();
    return track;
  }
  Extrapolator xa, xb;
  xa.push(s0, out.back().a);
  xb.push(s0, out.back().b);
  double run_a = 0.0, run_b = 0.0;
  guarded_march(track, s0, s1, n_steps, options, [&](double s) {
    const cplx pa = xa.predict(s), pb = xb.predict(s);
    const auto sys = at(s);
    cplx ea, eb;
    bool collapsed = false;
    try {
      ea = find_resonance(sys, pa, options.solver).energy;
      eb = find_resonance(sys, pb, options.solver).energy;
      collapsed = std::abs(ea - eb) < 1e-10 + 1e-6 * std::abs(pa - pb);
    } catch (const ConvergenceError&) {
      collapsed = true;
    }
    if (collapsed) {
      if (!split_pair(sys, pa, pb, ea, eb)) return false;
    } else if (std::abs(ea - pb) + std::abs(eb - pa) < std::abs(ea - pa) + std::abs(eb - pb)) {
      std::swap(ea, eb);
    }
    const double ja = std::abs(ea - pa), jb = std::abs(eb - pb);
    // Near coalescence the two branches are closer than the generic floor; require each to
    // stay nearer its own prediction than its partner's.
    if (!continuous(ja, run_a, options) || !continuous(jb, run_b, options)) return false;
    if (ja > 0.5 * std::abs(pa - pb) || jb > 0.5 * std::abs(pa - pb)) {
      if (std::abs(pa - pb) > 1e-9) return false;
    }
    run_a = ja, run_b = jb;
    xa.push(s, ea);
    xb.push(s, eb);
    out.push_back({s, ea, eb});
    return true;
  });
  return track;
}

}  // namespace floquet
