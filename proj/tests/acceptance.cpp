// Acceptance gate: one PASS/FAIL line per criterion, followed by indented detail lines.
// The process exits 0 once every line has been printed; the verdicts are in the output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "floquet/strategies.hpp"

using namespace floquet;

namespace {

int n_pass = 0, n_fail = 0;

void verdict(int id, bool pass, const std::string& what) {
  std::printf("%s %2d  %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  (pass ? n_pass : n_fail)++;
}

void detail(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void detail(const char* fmt, ...) {
  std::printf("        ");
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
  std::fflush(stdout);
}

// Runs one criterion; an exception is a FAIL with its message.
void guarded(int id, const std::string& what, const std::function<bool()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  try {
    pass = body();
  } catch (const std::exception& e) {
    detail("error: %s", e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  verdict(id, pass, what + " [" + std::to_string(static_cast<int>(std::lround(secs))) + " s]");
}

double morse_level(double depth, double a, double mass, int v) {
  const double w = a * std::sqrt(2.0 * depth / mass);
  const double x = w * (v + 0.5);
  return -depth + x - x * x / (4.0 * depth);
}

const EPRecord* find_ep(const std::vector<EPRecord>& eps, int v_low, double lo, double hi) {
  for (const auto& e : eps)
    if (e.v_low == v_low && e.lambda_nm >= lo && e.lambda_nm <= hi) return &e;
  return nullptr;
}

// Map EPs around which the contour winds, as "(v,v+1)@lambda".
std::vector<const EPRecord*> enclosed(const LoopSpec& spec, const std::vector<EPRecord>& eps) {
  const auto contour = make_loop(spec);
  std::vector<const EPRecord*> out;
  for (const auto& e : eps)
    if (winding_number(contour, e.lambda_nm, e.intensity) != 0) out.push_back(&e);
  return out;
}

std::string describe(const std::vector<const EPRecord*>& eps) {
  std::string s;
  for (const auto* e : eps) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s(%d,%d)@%.2f", s.empty() ? "" : " ", e->v_low, e->v_high, e->lambda_nm);
    s += buf;
  }
  return s.empty() ? "none" : s;
}

int signed_winding(const LoopSpec& spec, const EPRecord& ep) {
  return winding_number(make_loop(spec), ep.lambda_nm, ep.intensity);
}

}  // namespace

int main() {
  const auto& h = fixtures::H2Plus::get();
  std::printf("acceptance: model %s, grid r %.2f..%.2f n %d, ECS R0 %.1f angle %.2f\n", h.model.name.c_str(),
              h.grid.r_min, h.grid.r_max, h.grid.n_points, h.grid.ecs_radius, h.grid.ecs_angle);

  // EP map shared by the cluster, strategy and topology criteria.
  std::vector<EPRecord> map;
  std::vector<Cluster> clusters;
  {
    const auto t0 = std::chrono::steady_clock::now();
    MapOptions o;
    o.v_min = 10;
    o.v_max = 16;
    o.lambda_lo = 520.0;
    o.lambda_hi = 900.0;
    try {
      map = map_eps(h.model, h.grid, o);
    } catch (const std::exception& e) {
      std::printf("EP map failed: %s\n", e.what());
    }
    clusters = group_clusters(map);
    std::printf("EP map v 10..16, 520..900 nm: %zu EPs in %.0f s\n", map.size(),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (const auto& e : map)
      std::printf("  (%d,%d) v+=%d  lambda %.4f nm  I %.5f  gap %.1e  %s\n", e.v_low, e.v_high, e.v_plus, e.lambda_nm,
                  e.intensity, e.gap_residual, e.method.c_str());
  }

  // 1. Bound levels.
  guarded(1, "field-free ground curve supports >= 17 bound levels", [&] {
    const auto all = field_free_levels(h.model, 40, h.grid);
    detail("%zu bound levels (v = 0..%d), E_16 = %.10f hartree", all.levels.size(),
           static_cast<int>(all.levels.size()) - 1, all.levels.size() > 16 ? all.energy(16) : NAN);
    return all.levels.size() >= 17;
  });

  // 2. EP(12,13) coordinates.
  guarded(2, "EP(12,13) at 575 +- 15 nm / 0.261 +- 0.05, second EP(12,13) at 788 +- 15 nm", [&] {
    const auto* a = find_ep(map, 12, 560.0, 590.0);
    const auto* b = find_ep(map, 12, 773.0, 803.0);
    const bool ok_a = a && std::abs(a->intensity - 0.261) <= 0.05;
    for (const auto& e : map)
      if (e.v_low == 12) detail("located EP(12,13): %.4f nm, I = %.5f x 1e13 W/cm^2", e.lambda_nm, e.intensity);
    detail("in 575 +- 15 nm window: %s; in 788 +- 15 nm window: %s", a ? "yes" : "none", b ? "yes" : "none");
    return ok_a && b;
  });

  // 3. Cluster ordering.
  guarded(3, "(12..16) cluster: lambda_EP strictly decreasing, I_EP strictly increasing in v", [&] {
    const auto picked = select_cluster(clusters, reference_table(), 575.0);
    bool ok = picked.size() == 4;
    for (std::size_t k = 0; k < picked.size(); ++k) {
      detail("(%d,%d) %.4f nm  I %.5f", picked[k].v_low, picked[k].v_low + 1, picked[k].lambda_nm, picked[k].intensity);
      if (k > 0)
        ok = ok && picked[k].lambda_nm < picked[k - 1].lambda_nm && picked[k].intensity > picked[k - 1].intensity;
    }
    return ok;
  });

  // 4. Strategy survivals on loops carried onto the located cluster.
  const auto reference = reference_table();
  StrategyTable mapped;
  ScenarioReport chain, whole;
  guarded(4, "t_f = 30 fs: single 12->13 P_ND in [0.10, 0.25], cluster P_ND in [0.02, 0.10] and > chained", [&] {
    mapped = map_table(reference, select_cluster(clusters, reference, 575.0));
    const auto& s0 = mapped.successive.front();
    detail("mapped single loops: lambda0 = lambda_EP, d_lambda %.4f nm, I_max %.5f; cluster %.4f / %.4f / %.5f",
           s0.d_lambda, s0.i_max, mapped.cluster.lambda0, mapped.cluster.d_lambda, mapped.cluster.i_max);
    chain = run_scenario(h.family, h.levels, "successive", successive_loops(mapped, 30.0, 400));
    whole = run_scenario(h.family, h.levels, "cluster", cluster_loop(mapped, 30.0, 400));
    for (const auto& t : chain.trajectories)
      detail("  successive loop %.4f nm: %d -> %d, P_ND %.6f, %s", t.spec.lambda0, t.v_start, t.v_end,
             t.final_survival(), t.spec.handedness() > 0 ? "anticlockwise" : "clockwise");
    detail("successive chain: final v %d, cumulative P_ND %.7f%s", chain.final_label, chain.cumulative_survival,
           chain.ok ? "" : (", failed: " + chain.error).c_str());
    detail("cluster loop: final v %d, P_ND %.7f%s", whole.final_label, whole.cumulative_survival,
           whole.ok ? "" : (", failed: " + whole.error).c_str());
    // The literal reference loops, for comparison.
    const auto lit_single = run_scenario(h.family, h.levels, "lit-single", {successive_loops(reference, 30.0, 400)[0]});
    const auto lit_cluster = run_scenario(h.family, h.levels, "lit-cluster", cluster_loop(reference, 30.0, 400));
    for (const auto* r : {&lit_single, &lit_cluster}) {
      const auto& t = r->trajectories.front();
      detail("literal reference loop %.1f/%.1f/%.2f from v=%d: final v %d, P_ND %.6f (encloses %s)", t.spec.lambda0,
             t.spec.d_lambda, t.spec.i_max, t.v_start, t.v_end, t.final_survival(),
             describe(enclosed(t.spec, map)).c_str());
    }
    if (!chain.ok || !whole.ok || chain.trajectories.empty()) return false;
    const double single = chain.trajectories.front().final_survival();
    const bool single_ok = chain.trajectories.front().v_end == 13 && single >= 0.10 && single <= 0.25;
    const bool cluster_ok = whole.cumulative_survival >= 0.02 && whole.cumulative_survival <= 0.10;
    return single_ok && cluster_ok && whole.cumulative_survival > chain.cumulative_survival;
  });

  // 5. Feshbach vs shape widths at matched phi.
  guarded(5, "Feshbach-family widths below shape-family widths at matched phi on the single-EP loops", [&] {
    if (mapped.successive.empty()) throw std::runtime_error("no mapped loops");
    FollowOptions fo;
    fo.classify_samples = true;
    int matched = 0, violations = 0;
    double f_peak = 0.0, s_peak = 0.0;
    for (const auto& row : mapped.successive) {
      LoopSpec spec{row.lambda0, row.d_lambda, row.i_max, 30.0, 400, false};
      const auto fwd = follow_resonance(h.family, h.levels, spec, row.v_start, fo);
      spec.reversed = true;
      const auto rev = follow_resonance(h.family, h.levels, spec, row.v_start, fo);
      auto score = [](const Trajectory& t) {
        int s = 0;
        for (const auto& x : t.samples) s += (x.character == Character::Feshbach) - (x.character == Character::Shape);
        return s;
      };
      const bool fwd_is_f = score(fwd) >= score(rev);
      const auto& f = fwd_is_f ? fwd : rev;
      const auto& s = fwd_is_f ? rev : fwd;
      int m = 0, v = 0;
      double fp = 0.0, sp = 0.0;
      for (const auto& a : f.samples) fp = std::max(fp, a.width_cm());
      for (const auto& b : s.samples) sp = std::max(sp, b.width_cm());
      for (const auto& a : f.samples) {
        if (a.character != Character::Feshbach) continue;
        for (const auto& b : s.samples)
          if (std::abs(a.phi - b.phi) < 1e-12 && b.character == Character::Shape) {
            ++m;
            v += a.width() >= b.width();
          }
      }
      detail("loop %.4f nm from v=%d: Feshbach family %s (peak %.0f cm-1), shape family %s (peak %.0f cm-1), "
             "matched %d, violations %d",
             row.lambda0, row.v_start, f.spec.handedness() > 0 ? "anticlockwise" : "clockwise", fp,
             s.spec.handedness() > 0 ? "anticlockwise" : "clockwise", sp, m, v);
      matched += m;
      violations += v;
      f_peak = std::max(f_peak, fp);
      s_peak = std::max(s_peak, sp);
    }
    detail("total matched F/S samples %d, violations %d; peak widths F %.0f vs S %.0f cm-1", matched, violations,
           f_peak, s_peak);
    return matched > 0 && violations == 0;
  });

  // 6. Zero-field limit.
  guarded(6, "I = 1e6 W/cm^2 (575 nm): |E_R - E_v| < 1e-8 and Gamma < 1e-10 hartree for v <= 16", [&] {
    double de = 0.0, gmax = 0.0;
    int worst = -1, over = 0;
    for (int v = 0; v <= 16; ++v) {
      const auto r = find_resonance(h.family.at(FieldPoint(575.0, 1e6)), h.levels.energy(v));
      de = std::max(de, std::abs(r.energy.real() - h.levels.energy(v)));
      if (r.width() > gmax) gmax = r.width(), worst = v;
      over += r.width() >= 1e-10;
    }
    detail("max |E_R - E_v| = %.2e hartree; max Gamma = %.3e hartree (v = %d); %d levels with Gamma >= 1e-10", de,
           gmax, worst, over);
    return de < 1e-8 && gmax < 1e-10;
  });

  // 7. Closed-form oracles.
  guarded(7, "Morse levels to 1e-8 relative; toy EP coordinates to 1e-6 relative", [&] {
    AnalyticModelParams p;
    const auto morse = make_analytic_model(p);
    RadialGrid g;
    g.r_min = 0.2;  // the closed form assumes the whole line
    const auto levels = field_free_levels(morse, 16, g);
    double worst = 0.0;
    for (const auto& l : levels.levels) {
      const double exact = morse_level(p.morse_depth, p.morse_a, p.reduced_mass, l.v);
      worst = std::max(worst, std::abs(l.energy - exact) / std::abs(exact));
    }
    const fixtures::ToyEP toy;
    double toy_worst = 0.0;
    for (auto [l0, i0] : std::vector<std::pair<double, double>>{{603.0, 0.15}, {596.0, 0.26}, {600.5, 0.2}}) {
      const auto r = solve_ep([&](double l, double i) { return toy.gap_sq(l, i); }, l0, i0);
      toy_worst = std::max({toy_worst, std::abs(r.lambda_nm - toy.lambda_ep()) / toy.lambda_ep(),
                            std::abs(r.intensity - toy.intensity_ep()) / toy.intensity_ep()});
    }
    detail("Morse: %zu levels, max relative error %.2e; toy EP: max relative error %.2e", levels.levels.size(), worst,
           toy_worst);
    return levels.levels.size() == 17 && worst < 1e-8 && toy_worst < 1e-6;
  });

  // 8. ECS angle and grid invariance.
  guarded(8, "resonances stable to 1e-8 hartree under ecs_angle +- 0.05 and grid doubling", [&] {
    struct Probe {
      int v;
      double lambda, intensity;
    };
    const std::vector<Probe> probes{{12, 634.5513, 0.10}, {12, 634.5513, 0.15}, {13, 634.5513, 0.15},
                                    {3, 634.5513, 0.20},  {16, 634.5513, 0.20}, {14, 583.1170, 0.15}};
    double worst = 0.0, worst_fine = 0.0;
    for (const auto& pr : probes) {
      const cplx e = h.continued(pr.v, pr.lambda, pr.intensity);
      const auto field = FieldPoint::in_1e13(pr.lambda, pr.intensity);
      double d = 0.0;
      for (double da : {-0.05, 0.05}) {
        auto g = h.grid;
        g.ecs_angle += da;
        d = std::max(d, std::abs(find_resonance(build_system(h.model, field, g), e).energy - e));
      }
      const auto fine = h.grid.refined();
      const cplx ef = find_resonance(build_system(h.model, field, fine), e).energy;
      d = std::max(d, std::abs(ef - e));
      const cplx eff = find_resonance(build_system(h.model, field, fine.refined()), ef).energy;
      detail("v=%d %.4f nm I %.2f: Gamma %.0f cm-1, max change %.2e; n=%d vs %d: %.2e", pr.v, pr.lambda,
             pr.intensity, -2.0 * e.imag() * units::kHartreeToInvCm, d, fine.n_points, fine.refined().n_points,
             std::abs(eff - ef));
      worst = std::max(worst, d);
      worst_fine = std::max(worst_fine, std::abs(eff - ef));
    }
    detail("max change at the default grid %.2e hartree; at n = %d: %.2e", worst, h.grid.refined().n_points,
           worst_fine);
    return worst < 1e-8;
  });

  // 9. Topology.
  guarded(9, ">= 5 EPs: winding-1 loops exchange the pair, winding-0 identity, reversal inverts, repeat restores",
          [&] {
            const Cluster* d10 = nullptr;
            for (const auto& c : clusters)
              if (c.diagonal == 10) d10 = &c;
            if (!d10) throw std::runtime_error("no v - v+ = 10 cluster in the map");
            int good = 0;
            for (const auto& ep : d10->members) {
              LoopSpec spec{ep.lambda_nm, 6.1, 1.25 * ep.intensity, 30.0, 400, false};
              const auto around = enclosed(spec, map);
              const bool only = around.size() == 1 && around[0]->v_low == ep.v_low &&
                                std::abs(around[0]->lambda_nm - ep.lambda_nm) < 1e-9 &&
                                signed_winding(spec, ep) == 1;
              const int a = ep.v_low, b = ep.v_high;
              const auto fwd_a = follow_resonance(h.family, h.levels, spec, a);
              const auto fwd_b = follow_resonance(h.family, h.levels, spec, fwd_a.v_end >= 0 ? fwd_a.v_end : b);
              const auto fwd_b0 = follow_resonance(h.family, h.levels, spec, b);
              LoopSpec back = spec;
              back.reversed = true;
              const auto rev_b = follow_resonance(h.family, h.levels, back, b);
              LoopSpec below{ep.lambda_nm, 6.1, 0.5 * ep.intensity, 30.0, 400, false};
              const bool below_clear = enclosed(below, map).empty();
              const auto id_a = follow_resonance(h.family, h.levels, below, a);
              const auto id_b = follow_resonance(h.family, h.levels, below, b);
              const bool exchange = fwd_a.v_end == b && fwd_b0.v_end == a;
              const bool inverse = rev_b.v_end == a;
              const bool restore = fwd_a.v_end == b && fwd_b.v_end == a;
              const bool identity = below_clear && id_a.v_end == a && id_b.v_end == b;
              detail("EP(%d,%d)@%.4f/%.5f: encloses %s; %d->%d, %d->%d; reversed %d->%d; twice %d->%d->%d; "
                     "winding-0 %d->%d, %d->%d",
                     a, b, ep.lambda_nm, ep.intensity, describe(around).c_str(), a, fwd_a.v_end, b, fwd_b0.v_end, b,
                     rev_b.v_end, a, fwd_a.v_end, fwd_b.v_end, a, id_a.v_end, b, id_b.v_end);
              good += only && exchange && inverse && restore && identity;
            }
            detail("%d of %zu EPs satisfy every topological property", good, d10->members.size());
            return d10->members.size() >= 5 && good == static_cast<int>(d10->members.size());
          });

  // 10. Survival quadrature.
  guarded(10, "survival: constant Gamma to 1e-12, n_steps doubling to 1e-4, log P_ND linear in t_f", [&] {
    std::vector<double> t, w;
    for (int k = 0; k <= 400; ++k) t.push_back(30.0 * k / 400), w.push_back(2.5e-4);
    const auto p = survival_series(t, w);
    double analytic = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double exact = std::exp(-2.5e-4 * t[k] * units::kFemtosecondAu);
      analytic = std::max(analytic, std::abs(p[k] - exact) / exact);
    }
    if (chain.trajectories.empty()) throw std::runtime_error("no single-loop trajectory");
    LoopSpec spec = chain.trajectories.front().spec;
    const int v0 = chain.trajectories.front().v_start;
    const double p400 = follow_resonance(h.family, h.levels, spec, v0).final_survival();
    spec.n_steps = 800;
    const double p800 = follow_resonance(h.family, h.levels, spec, v0).final_survival();
    const double conv = std::abs(p800 - p400) / p800;
    spec.n_steps = 400;
    std::vector<double> rate;
    for (double tf : {30.0, 60.0, 120.0}) {
      spec.t_f = tf;
      rate.push_back(std::log(follow_resonance(h.family, h.levels, spec, v0).final_survival()) / tf);
    }
    const double lin = std::max(std::abs(rate[1] - rate[0]), std::abs(rate[2] - rate[0])) / std::abs(rate[0]);
    detail("constant Gamma max relative error %.2e; P_ND(400) %.8f vs P_ND(800) %.8f, relative %.2e; "
           "log P_ND / t_f spread %.2e",
           analytic, p400, p800, conv, lin);
    return analytic < 1e-12 && conv < 1e-4 && lin < 1e-12;
  });

  std::printf("acceptance: %d PASS, %d FAIL\n", n_pass, n_fail);
  return 0;
}
