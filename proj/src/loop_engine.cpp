#include "floquet/loop_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace floquet {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void LoopSpec::validate() const {
  if (n_steps < 100) throw std::invalid_argument("LoopSpec: n_steps must be at least 100");
  if (!(t_f > 0.0)) throw std::invalid_argument("LoopSpec: t_f must be positive");
  if (!(i_max >= 0.0)) throw std::invalid_argument("LoopSpec: i_max must be non-negative");
  if (!(lambda0 - std::abs(d_lambda) > 0.0)) throw std::invalid_argument("LoopSpec: wavelengths must stay positive");
}

double LoopSpec::lambda_at(double phi) const { return lambda0 + d_lambda * std::sin(phi); }

double LoopSpec::intensity_at(double phi) const {
  // sin(pi) is not exactly zero in floating point; the endpoints are field-free by construction.
  if (phi <= 0.0 || phi >= kTwoPi) return 0.0;
  return std::max(0.0, i_max * std::sin(0.5 * phi));
}

double LoopSpec::phi_start() const { return reversed ? kTwoPi : 0.0; }
double LoopSpec::phi_end() const { return reversed ? 0.0 : kTwoPi; }
double LoopSpec::time_at(double phi) const { return t_f * std::abs(phi - phi_start()) / kTwoPi; }

int LoopSpec::handedness() const {
  if (d_lambda == 0.0 || i_max == 0.0) return 0;
  return (d_lambda > 0.0) != reversed ? 1 : -1;
}

void LoopSpec::orient(bool anticlockwise) { reversed = (d_lambda > 0.0) != anticlockwise; }

std::vector<LoopPoint> make_loop(const LoopSpec& spec) {
  spec.validate();
  std::vector<LoopPoint> out;
  out.reserve(static_cast<std::size_t>(spec.n_steps) + 1);
  for (int k = 0; k <= spec.n_steps; ++k) {
    const double phi = k == spec.n_steps ? spec.phi_end()
                                         : spec.phi_start() + (spec.phi_end() - spec.phi_start()) * k / spec.n_steps;
    out.push_back({phi, spec.time_at(phi), spec.lambda_at(phi), spec.intensity_at(phi)});
  }
  return out;
}

int winding_number(const std::vector<LoopPoint>& contour, double lambda_nm, double intensity) {
  double total = 0.0;
  for (std::size_t k = 0; k < contour.size(); ++k) {
    const auto& p = contour[k];
    const auto& q = contour[(k + 1) % contour.size()];
    const double a = std::atan2(p.intensity - intensity, p.lambda_nm - lambda_nm);
    const double b = std::atan2(q.intensity - intensity, q.lambda_nm - lambda_nm);
    double d = b - a;
    if (d > std::numbers::pi) d -= kTwoPi;
    if (d < -std::numbers::pi) d += kTwoPi;
    total += d;
  }
  return static_cast<int>(std::lround(total / kTwoPi));
}

std::vector<double> survival_series(const std::vector<double>& t_fs, const std::vector<double>& width_hartree) {
  if (t_fs.size() != width_hartree.size()) throw std::invalid_argument("survival: size mismatch");
  std::vector<double> p;
  p.reserve(t_fs.size());
  double integral = 0.0;
  for (std::size_t k = 0; k < t_fs.size(); ++k) {
    if (width_hartree[k] < 0.0)
      throw std::invalid_argument("survival: negative width " + std::to_string(width_hartree[k]) + " at sample " +
                                  std::to_string(k));
    if (k > 0) {
      const double dt = (t_fs[k] - t_fs[k - 1]) * units::kFemtosecondAu;
      if (dt < 0.0) throw std::invalid_argument("survival: time decreases at sample " + std::to_string(k));
      integral += 0.5 * dt * (width_hartree[k] + width_hartree[k - 1]);
    }
    p.push_back(std::exp(-integral));
  }
  return p;
}

void survival(Trajectory& traj) {
  std::vector<double> t, w;
  for (const auto& s : traj.samples) {
    t.push_back(s.t_fs);
    w.push_back(s.width());
  }
  traj.p_nd = survival_series(t, w);
}

Trajectory follow_resonance(const SystemFamily& family, const LevelSet& levels, const LoopSpec& spec, int v_start,
                            const FollowOptions& options) {
  spec.validate();
  Trajectory traj;
  traj.spec = spec;
  traj.v_start = v_start;
  if (spec.t_f < options.adiabatic_t_f)
    traj.warnings.push_back("t_f = " + std::to_string(spec.t_f) + " fs is below the adiabatic threshold of " +
                            std::to_string(options.adiabatic_t_f) + " fs");
  auto at = [&](double phi) { return family.at(FieldPoint::in_1e13(spec.lambda_at(phi), spec.intensity_at(phi))); };
  const auto track = track_branch(at, spec.phi_start(), spec.phi_end(), spec.n_steps, levels.energy(v_start),
                                  options.continuation);
  for (const auto& p : track.points)
    traj.samples.push_back({p.s, spec.time_at(p.s), spec.lambda_at(p.s), spec.intensity_at(p.s), p.energy});
  traj.complete = track.complete;
  traj.error = track.error;
  survival(traj);

  if (traj.complete) {
    const cplx e = traj.samples.back().energy;
    double best = options.level_match;
    for (const auto& l : levels.levels) {
      const double d = std::abs(e - cplx(l.energy, 0.0));
      if (d < best) best = d, traj.v_end = l.v;
    }
    if (traj.v_end < 0) traj.error = "final energy matches no field-free level";
  }

  const double dI = 1e-3 * std::max(spec.i_max, 1e-3) * units::kIntensityUnit;
  auto classify = [&](const TrajectorySample& s) {
    Resonance res;
    res.energy = s.energy;
    try {
      return classify_resonance(family, s.lambda_nm, res, s.intensity * units::kIntensityUnit, dI,
                                options.continuation.solver);
    } catch (const ConvergenceError&) {
      return Character::Unclassified;
    }
  };
  if (options.classify_samples)
    for (auto& s : traj.samples) s.character = classify(s);
  if (options.classify_quarters && traj.complete) {
    for (int q = 0; q < 4; ++q) {
      // Middle of the q-th quarter in traversal order.
      const double target = spec.phi_start() + (spec.phi_end() - spec.phi_start()) * (2 * q + 1) / 8.0;
      const TrajectorySample* near = &traj.samples.front();
      for (const auto& s : traj.samples)
        if (std::abs(s.phi - target) < std::abs(near->phi - target)) near = &s;
      traj.quarter_characters.push_back(options.classify_samples ? near->character : classify(*near));
    }
  }
  return traj;
}

Trajectory follow_family(const SystemFamily& family, const LevelSet& levels, LoopSpec spec, int v_start,
                         Character want, const FollowOptions& options) {
  FollowOptions opts = options;
  opts.classify_quarters = true;
  auto score = [&](const Trajectory& t) {
    if (!t.complete) return -1;
    return static_cast<int>(std::count(t.quarter_characters.begin(), t.quarter_characters.end(), want));
  };
  spec.orient(true);
  auto a = follow_resonance(family, levels, spec, v_start, opts);
  spec.orient(false);
  auto c = follow_resonance(family, levels, spec, v_start, opts);
  return score(c) > score(a) ? c : a;
}

void validate_chain(const std::vector<ScenarioLoop>& loops) {
  for (std::size_t k = 1; k < loops.size(); ++k)
    if (loops[k].v_start != loops[k - 1].v_expected)
      throw std::invalid_argument("scenario: loop " + std::to_string(k + 1) + " starts from v = " +
                                  std::to_string(loops[k].v_start) + " but the previous loop ends in v = " +
                                  std::to_string(loops[k - 1].v_expected));
}

ScenarioReport run_scenario(const SystemFamily& family, const LevelSet& levels, const std::string& name,
                            const std::vector<ScenarioLoop>& loops, int jobs, const FollowOptions& options) {
  validate_chain(loops);
  ScenarioReport rep;
  rep.name = name;
  rep.loops = loops;
  rep.trajectories.resize(loops.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < loops.size(); i = next++)
      rep.trajectories[i] = loops[i].family
                                ? follow_family(family, levels, loops[i].spec, loops[i].v_start, *loops[i].family, options)
                                : follow_resonance(family, levels, loops[i].spec, loops[i].v_start, options);
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < loops.size(); ++i) {
    const auto& tr = rep.trajectories[i];
    rep.cumulative_survival *= tr.final_survival();
    if (rep.ok && (!tr.complete || tr.v_end != loops[i].v_expected)) {
      rep.ok = false;
      rep.error = "chain broken at loop " + std::to_string(i + 1) + ": expected v = " +
                  std::to_string(loops[i].v_expected) + ", got " +
                  (tr.v_end >= 0 ? "v = " + std::to_string(tr.v_end) : std::string("no label")) +
                  (tr.error.empty() ? "" : " (" + tr.error + ")");
    }
  }
  rep.final_label = rep.trajectories.empty() ? -1 : rep.trajectories.back().v_end;
  return rep;
}

}  // namespace floquet
