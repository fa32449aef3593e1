#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "floquet/bound_states.hpp"
#include "floquet/ep_locator.hpp"
#include "floquet/floquet.hpp"
#include "floquet/io.hpp"
#include "floquet/loop_engine.hpp"
#include "floquet/strategies.hpp"

namespace fs = std::filesystem;
using namespace floquet;
using io::json;

namespace {

const char* kCommands[] = {"levels", "adiabatic", "resonance", "ep-map", "ep-refine", "loop", "scenario"};

struct Common {
  std::string model = "h2plus";
  std::string out = "out";
  int jobs = 1;
  RadialGrid grid;
  int blocks = 2;
  std::string cache;
  std::string config;
  int richardson = 2;
};

struct Context {
  MoleculeModel model;
  RadialGrid grid;
  int blocks;
  fs::path out;
  int jobs;
  io::ResultCache cache;
  LevelOptions levels;

  json provenance() const { return io::provenance(model, grid, blocks); }
};

Context make_context(const Common& c) {
  Context ctx{load_molecule(c.model), c.grid, c.blocks, c.out, std::max(1, c.jobs), {}, {c.richardson, 1e-13}};
  ctx.grid.validate();
  ctx.model.validate(ctx.grid.r_min, ctx.grid.r_max);
  if (!c.cache.empty()) ctx.cache = io::ResultCache(c.cache, io::content_key(ctx.model, ctx.grid, ctx.blocks));
  fs::create_directories(ctx.out);
  return ctx;
}

// Runs f(i) for i in [0, n) on a pool of `jobs` workers.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) f(i);
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

json config_echo(const CLI::App& app, const CLI::App* sub) {
  json out = json::object();
  for (const CLI::App* a : {&app, sub}) {
    for (const CLI::Option* o : a->get_options()) {
      const auto name = o->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      const auto res = o->results();
      if (!res.empty()) {
        // Options given several times (config file, then command line) keep the last value.
        out[name] = o->get_multi_option_policy() == CLI::MultiOptionPolicy::TakeAll ? json(res) : json(res.back());
      } else if (!o->get_default_str().empty()) {
        out[name] = o->get_default_str();
      }
    }
  }
  return out;
}

void write_run_json(const Context& ctx, const std::string& file, const std::string& command, const json& config,
                    json results) {
  io::write_json(ctx.out / file,
                 {{"command", command}, {"config", config}, {"results", std::move(results)}, {"provenance", ctx.provenance()}});
}

std::string character_name(Character c) { return to_string(c); }

json to_json(cplx e) { return {{"re_hartree", e.real()}, {"im_hartree", e.imag()}, {"gamma_cm1", -2.0 * e.imag() * units::kHartreeToInvCm}}; }

json to_json(const EPRecord& r) {
  return {{"pair", {r.v_low, r.v_high}},
          {"v_plus", r.v_plus},
          {"lambda_nm", r.lambda_nm},
          {"intensity_1e13Wcm2", r.intensity},
          {"gap_residual_hartree", r.gap_residual},
          {"energy", to_json(r.energy)},
          {"iterations", r.iterations},
          {"method", r.method},
          {"valid", r.valid},
          {"note", r.note}};
}

EPRecord ep_from_json(const json& j) {
  EPRecord r;
  r.v_low = j.at("pair")[0];
  r.v_high = j.at("pair")[1];
  r.v_plus = j.at("v_plus");
  r.lambda_nm = j.at("lambda_nm");
  r.intensity = j.at("intensity_1e13Wcm2");
  r.gap_residual = j.at("gap_residual_hartree");
  r.energy = {j.at("energy").at("re_hartree").get<double>(), j.at("energy").at("im_hartree").get<double>()};
  r.iterations = j.at("iterations");
  r.method = j.at("method");
  r.valid = j.at("valid");
  r.note = j.value("note", "");
  return r;
}

std::string candidate_id(const EPCandidate& c) {
  return "ep:" + std::to_string(c.v) + ":" + std::to_string(c.v_plus) + ":" + io::format_number(c.lambda_guess);
}

std::string pair_name(int a, int b) { return std::to_string(a) + "-" + std::to_string(b); }

// EP records from an ep-map CSV written by this tool.
std::vector<EPRecord> read_ep_csv(const fs::path& path) {
  const auto csv = io::read_csv(path);
  std::vector<EPRecord> out;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    EPRecord r;
    r.v_low = static_cast<int>(csv.number(i, "v_low"));
    r.v_high = static_cast<int>(csv.number(i, "v_high"));
    r.v_plus = static_cast<int>(csv.number(i, "v_plus"));
    r.lambda_nm = csv.number(i, "lambda_nm");
    r.intensity = csv.number(i, "intensity_1e13Wcm2");
    r.gap_residual = csv.number(i, "gap_residual_hartree");
    r.energy = {csv.number(i, "ReE_hartree"), -0.5 * csv.number(i, "Gamma_cm1") / units::kHartreeToInvCm};
    out.push_back(r);
  }
  return out;
}

std::pair<double, double> parse_point(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--ep", "expected LAMBDA:INTENSITY, got " + s);
  return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
}

// ---------------------------------------------------------------------------------------------
// levels

struct LevelsArgs {
  int v_max = 16, vplus_max = 8;
  double lambda_min = 110, lambda_max = 900, lambda_step = 2, reference_intensity = 1e3;
};

int cmd_levels(Context& ctx, const LevelsArgs& a, const json& config) {
  const auto ff = field_free_levels(ctx.model, a.v_max, ctx.grid, ctx.levels);
  io::CsvTable lv({"v", "energy_hartree", "energy_cm1"});
  for (const auto& l : ff.levels) lv.add_row({static_cast<long long>(l.v), l.energy, l.energy * units::kHartreeToInvCm});
  lv.write(ctx.out / "levels.csv");

  std::vector<double> lambdas;
  if (a.lambda_max > a.lambda_min && a.lambda_step > 0)
    for (double l = a.lambda_min; l <= a.lambda_max + 1e-9; l += a.lambda_step) lambdas.push_back(l);
  std::vector<LevelSet> upper(lambdas.size());
  parallel_for(lambdas.size(), ctx.jobs, [&](std::size_t i) {
    LevelOptions o{1, 1e-11};
    upper[i] = adiabatic_levels(ctx.model, FieldPoint{lambdas[i], a.reference_intensity}, a.vplus_max, ctx.grid, o);
  });
  io::CsvTable ad({"lambda_nm", "v_plus", "energy_hartree"});
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    for (const auto& l : upper[i].levels) ad.add_row({lambdas[i], static_cast<long long>(l.v), l.energy});
  ad.write(ctx.out / "adiabatic_levels.csv");

  std::vector<EPCandidate> cands;
  if (!lambdas.empty()) {
    ApproximateOptions o;
    o.reference_intensity = a.reference_intensity;
    o.scan_step_nm = a.lambda_step;
    cands = approximate_eps(ctx.model, 0, a.v_max, a.vplus_max, a.lambda_min, a.lambda_max, ctx.grid, o);
  }
  io::CsvTable cc({"v", "v_partner", "v_plus", "lambda_nm", "crossing_radius_bohr"});
  for (const auto& c : cands)
    cc.add_row({static_cast<long long>(c.v), static_cast<long long>(c.v_partner), static_cast<long long>(c.v_plus),
                c.lambda_guess, c.crossing_radius});
  cc.write(ctx.out / "ep_candidates.csv");

  io::SvgPlot plot("Field-free levels and upper adiabatic levels", "wavelength (nm)", "energy (hartree)");
  if (!lambdas.empty()) {
    for (const auto& l : ff.levels)
      plot.add_line({lambdas.front(), lambdas.back()}, {l.energy, l.energy}, "v=" + std::to_string(l.v), true);
    for (int vp = 0; vp <= a.vplus_max; ++vp) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < lambdas.size(); ++i) {
        x.push_back(lambdas[i]);
        y.push_back(vp < static_cast<int>(upper[i].levels.size()) ? upper[i].energy(vp) : NAN);
      }
      plot.add_line(x, y, "v+=" + std::to_string(vp));
    }
    for (const auto& c : cands) plot.add_marker(c.lambda_guess, ff.energy(c.v), pair_name(c.v, c.v_partner));
  }
  plot.write(ctx.out / "levels.svg");

  json res;
  res["field_free"] = json::array();
  for (const auto& l : ff.levels) res["field_free"].push_back({{"v", l.v}, {"energy_hartree", l.energy}});
  res["n_bound"] = ff.levels.size();
  res["truncated"] = ff.truncated;
  res["candidates"] = json::array();
  for (const auto& c : cands)
    res["candidates"].push_back({{"v", c.v}, {"v_partner", c.v_partner}, {"v_plus", c.v_plus}, {"lambda_nm", c.lambda_guess}});
  write_run_json(ctx, "levels.json", "levels", config, res);
  std::cout << ff.levels.size() << " bound levels, " << cands.size() << " EP candidates -> " << ctx.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------------------------
// adiabatic

struct AdiabaticArgs {
  double lambda = 800, intensity = 0.1, r_min = 0.5, r_max = 15.0;
  int points = 500;
};

int cmd_adiabatic(Context& ctx, const AdiabaticArgs& a, const json& config) {
  const auto field = FieldPoint::in_1e13(a.lambda, a.intensity);
  io::CsvTable t({"r_bohr", "vg_hartree", "vu_minus_photon_hartree", "vplus_hartree", "vminus_hartree"});
  std::vector<double> r, g, u, p, m;
  for (int i = 0; i < a.points; ++i) {
    const double x = a.r_min + (a.r_max - a.r_min) * i / std::max(1, a.points - 1);
    const auto pr = adiabatic_potentials(ctx.model, field, x);
    r.push_back(x);
    g.push_back(dressed_diabatic(ctx.model, field, {Electronic::g, 0}, x));
    u.push_back(dressed_diabatic(ctx.model, field, {Electronic::u, -1}, x));
    p.push_back(pr.v_plus);
    m.push_back(pr.v_minus);
    t.add_row({x, g.back(), u.back(), p.back(), m.back()});
  }
  t.write(ctx.out / "adiabatic.csv");
  io::SvgPlot plot("Dressed potentials", "R (bohr)", "energy (hartree)");
  plot.add_line(r, g, "Vg", true);
  plot.add_line(r, u, "Vu - photon", true);
  plot.add_line(r, p, "V+");
  plot.add_line(r, m, "V-");
  plot.write(ctx.out / "adiabatic.svg");
  const double rx = diabatic_crossing(ctx.model, field.omega(), ctx.grid.r_min, ctx.grid.r_max);
  write_run_json(ctx, "adiabatic.json", "adiabatic", config,
                 {{"crossing_radius_bohr", std::isfinite(rx) ? json(rx) : json(nullptr)}, {"points", a.points}});
  std::cout << "adiabatic potentials at " << a.lambda << " nm -> " << (ctx.out / "adiabatic.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------------------------
// resonance

struct ResonanceArgs {
  double lambda = 800, intensity = 0.0, intensity_max = -1;
  int v = 12, steps = 50;
  std::string guess;
  bool classify = false;
};

int cmd_resonance(Context& ctx, const ResonanceArgs& a, const json& config) {
  const SystemFamily family(ctx.model, ctx.grid, ctx.blocks);
  cplx seed;
  if (!a.guess.empty()) {
    const auto comma = a.guess.find(',');
    seed = {std::stod(a.guess.substr(0, comma)), comma == std::string::npos ? 0.0 : std::stod(a.guess.substr(comma + 1))};
  } else {
    seed = field_free_levels(ctx.model, a.v, ctx.grid, ctx.levels).energy(a.v);
  }
  const double top = a.intensity_max > a.intensity ? a.intensity_max : a.intensity;
  const int n = a.intensity_max > a.intensity ? std::max(1, a.steps) : 0;

  std::vector<BranchPoint> pts;
  std::string error;
  const std::string id = "res:" + io::format_number(a.lambda) + ":" + io::format_number(a.intensity) + ":" +
                         io::format_number(top) + ":" + std::to_string(n) + ":" + io::format_number(seed.real()) + ":" +
                         io::format_number(seed.imag());
  if (auto hit = ctx.cache.lookup(id)) {
    for (const auto& p : *hit) pts.push_back({p[0], {p[1].get<double>(), p[2].get<double>()}});
  } else {
    if (n == 0) {
      pts.push_back({a.intensity, find_resonance(family.at(FieldPoint::in_1e13(a.lambda, a.intensity)), seed).energy});
    } else {
      // Continue from the seed's own field (zero intensity when seeded by a level) to the scan.
      auto at = [&](double s) { return family.at(FieldPoint::in_1e13(a.lambda, s)); };
      const auto track = track_branch(at, 0.0, top, std::max(n, static_cast<int>(std::ceil(top / 0.005))), seed);
      error = track.error;
      for (const auto& p : track.points)
        if (p.s >= a.intensity - 1e-12) pts.push_back(p);
    }
    if (error.empty()) {
      json store = json::array();
      for (const auto& p : pts) store.push_back({p.s, p.energy.real(), p.energy.imag()});
      ctx.cache.store(id, store);
    }
  }

  io::CsvTable t({"lambda_nm", "intensity_1e13Wcm2", "ReE_hartree", "ImE_hartree", "Gamma_cm1", "character"});
  json rows = json::array();
  std::vector<double> xi, er, gw;
  for (const auto& p : pts) {
    Character ch = Character::Unclassified;
    if (a.classify) {
      Resonance r;
      r.energy = p.energy;
      try {
        ch = classify_resonance(family, a.lambda, r, p.s * units::kIntensityUnit, 1e-4 * units::kIntensityUnit);
      } catch (const ConvergenceError&) {
      }
    }
    t.add_row({a.lambda, p.s, p.energy.real(), p.energy.imag(), -2.0 * p.energy.imag() * units::kHartreeToInvCm,
               std::string(character_name(ch))});
    auto row = to_json(p.energy);
    row["intensity_1e13Wcm2"] = p.s;
    row["character"] = character_name(ch);
    rows.push_back(row);
    xi.push_back(p.s);
    er.push_back(p.energy.real());
    gw.push_back(-2.0 * p.energy.imag() * units::kHartreeToInvCm);
  }
  t.write(ctx.out / "resonance.csv");
  if (pts.size() > 1) {
    io::SvgPlot pe("Resonance position", "intensity (1e13 W/cm2)", "Re E (hartree)");
    pe.add_line(xi, er, "Re E");
    pe.write(ctx.out / "resonance_energy.svg");
    io::SvgPlot pw("Resonance width", "intensity (1e13 W/cm2)", "Gamma (cm-1)");
    pw.add_line(xi, gw, "Gamma");
    pw.write(ctx.out / "resonance_width.svg");
  }
  write_run_json(ctx, "resonance.json", "resonance", config,
                 {{"seed", {seed.real(), seed.imag()}}, {"points", rows}, {"error", error}});
  if (!pts.empty()) {
    const auto& e = pts.back().energy;
    std::printf("E = %.12g %+.12gi hartree, Gamma = %.6g cm-1 at I = %.6g\n", e.real(), e.imag(),
                -2.0 * e.imag() * units::kHartreeToInvCm, pts.back().s);
  }
  if (!error.empty()) {
    std::cerr << "continuation stopped: " << error << "\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------------------------
// ep-map

struct MapArgs {
  int v_min = 0, v_max = 16, vplus_max = 8;
  double lambda_min = 110, lambda_max = 900;
};

void write_ep_table(const fs::path& path, const std::vector<EPRecord>& recs, const std::vector<Cluster>& clusters) {
  std::map<std::pair<int, double>, int> cluster_of;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto& m : clusters[c].members) cluster_of[{m.v_low, m.lambda_nm}] = static_cast<int>(c);
  io::CsvTable t({"pair", "v_low", "v_high", "v_plus", "lambda_nm", "intensity_1e13Wcm2", "gap_residual_hartree",
                  "ReE_hartree", "Gamma_cm1", "method", "cluster"});
  for (const auto& r : recs) {
    const auto it = cluster_of.find({r.v_low, r.lambda_nm});
    t.add_row({pair_name(r.v_low, r.v_high), static_cast<long long>(r.v_low), static_cast<long long>(r.v_high),
               static_cast<long long>(r.v_plus), r.lambda_nm, r.intensity, r.gap_residual, r.energy.real(),
               -2.0 * r.energy.imag() * units::kHartreeToInvCm, r.method,
               static_cast<long long>(it == cluster_of.end() ? -1 : it->second)});
  }
  t.write(path);
}

int cmd_ep_map(Context& ctx, const MapArgs& a, const json& config) {
  MapOptions o;
  o.v_min = a.v_min, o.v_max = a.v_max, o.vplus_max = a.vplus_max;
  o.lambda_lo = a.lambda_min, o.lambda_hi = a.lambda_max;
  o.jobs = ctx.jobs;
  json failures = json::array();
  std::size_t done = 0;
  o.cached = [&](const EPCandidate& c) -> std::optional<EPRecord> {
    if (auto hit = ctx.cache.lookup(candidate_id(c))) {
      if (hit->contains("error")) return EPRecord{c.v, c.v_partner, 0, 0, 0, {}, c.v_plus, 0, "", false, hit->at("error").get<std::string>()};
      return ep_from_json(*hit);
    }
    return std::nullopt;
  };
  o.progress = [&](const EPCandidate& c, const std::optional<EPRecord>& r, const std::string& err) {
    ++done;
    std::cerr << "[" << done << "] EP(" << c.v << "," << c.v_partner << ") v+=" << c.v_plus << " guess "
              << io::format_number(c.lambda_guess) << " nm: ";
    if (r && r->valid) {
      std::cerr << io::format_number(r->lambda_nm) << " nm, I = " << io::format_number(r->intensity) << "\n";
    } else {
      const auto why = r ? (r->note.empty() ? std::string("not converged") : r->note) : err;
      std::cerr << "failed (" << why << ")\n";
      failures.push_back({{"v", c.v}, {"v_plus", c.v_plus}, {"lambda_guess_nm", c.lambda_guess}, {"error", why}});
    }
    if (!ctx.cache.lookup(candidate_id(c)))
      ctx.cache.store(candidate_id(c), r ? to_json(*r) : json{{"error", err}});
  };
  const auto recs = map_eps(ctx.model, ctx.grid, o);
  const auto clusters = group_clusters(recs);
  write_ep_table(ctx.out / "ep_map.csv", recs, clusters);

  io::SvgPlot plot("Exceptional points", "wavelength (nm)", "intensity (1e13 W/cm2)");
  for (const auto& c : clusters) {
    std::vector<double> x, y;
    for (const auto& m : c.members) x.push_back(m.lambda_nm), y.push_back(m.intensity);
    plot.add_line(x, y, "v-v+=" + std::to_string(c.diagonal), true);
  }
  for (const auto& r : recs) plot.add_marker(r.lambda_nm, r.intensity, pair_name(r.v_low, r.v_high));
  plot.write(ctx.out / "ep_map.svg");

  json res;
  res["eps"] = json::array();
  for (const auto& r : recs) res["eps"].push_back(to_json(r));
  res["clusters"] = json::array();
  for (const auto& c : clusters) {
    json members = json::array();
    for (const auto& m : c.members) members.push_back(pair_name(m.v_low, m.v_high) + "@" + io::format_number(m.lambda_nm));
    res["clusters"].push_back({{"diagonal", c.diagonal}, {"members", members}});
  }
  res["failures"] = failures;
  write_run_json(ctx, "ep_map.json", "ep-map", config, res);
  std::cout << recs.size() << " EPs in " << clusters.size() << " clusters, " << failures.size()
            << " failed candidates -> " << ctx.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------------------------
// ep-refine

struct RefineArgs {
  int v = 12, v_plus = -1;
  double lambda_guess = -1, lambda_min = 110, lambda_max = 900;
  double signature_dl = 2.0, signature_window = 0.1;
  int signature_points = 41;
  bool signature = true;
};

int cmd_ep_refine(Context& ctx, const RefineArgs& a, const json& config) {
  std::vector<EPCandidate> cands;
  if (a.lambda_guess > 0) {
    cands.push_back({a.v, a.v + 1, a.v_plus, a.lambda_guess, NAN});
  } else {
    for (const auto& c : approximate_eps(ctx.model, a.v, a.v + 1, std::max(a.v_plus, 8), a.lambda_min, a.lambda_max, ctx.grid))
      if (a.v_plus < 0 || c.v_plus == a.v_plus) cands.push_back(c);
  }
  if (cands.empty()) {
    std::cerr << "no EP candidate for v = " << a.v << " in the wavelength window\n";
    return 1;
  }
  const SystemFamily family(ctx.model, ctx.grid, ctx.blocks);
  const auto levels = field_free_levels(ctx.model, a.v + 1, ctx.grid, ctx.levels);
  json results = json::array();
  io::CsvTable sig({"ep", "side", "lambda_nm", "intensity_1e13Wcm2", "ReE_low_hartree", "Gamma_low_cm1",
                    "ReE_high_hartree", "Gamma_high_cm1"});
  int status = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const auto& c = cands[k];
    json entry{{"candidate", {{"v", c.v}, {"v_plus", c.v_plus}, {"lambda_guess_nm", c.lambda_guess}}}};
    try {
      auto rec = refine_ep(family, levels, c);
      if (rec.valid && a.signature) {
        auto spec = molecular_spectrum(family, levels, rec.v_low, rec.v_high);
        const auto rep = verify_signature(spec, rec, a.signature_dl, a.signature_window, a.signature_points);
        if (!rep.present) rec.valid = false, rec.note = rep.summary;
        entry["signature"] = {{"present", rep.present},
                              {"interchanged", rep.interchanged},
                              {"summary", rep.summary},
                              {"below", {{"lambda_nm", rep.below.lambda_nm}, {"real_crossing", rep.below.real_crossing},
                                         {"width_crossing", rep.below.width_crossing},
                                         {"characters", {to_string(rep.below.char_a), to_string(rep.below.char_b)}}}},
                              {"above", {{"lambda_nm", rep.above.lambda_nm}, {"real_crossing", rep.above.real_crossing},
                                         {"width_crossing", rep.above.width_crossing},
                                         {"characters", {to_string(rep.above.char_a), to_string(rep.above.char_b)}}}}};
        const std::string tag = std::to_string(k);
        io::SvgPlot pe("Energies near EP " + pair_name(rec.v_low, rec.v_high), "intensity (1e13 W/cm2)", "Re E (hartree)");
        io::SvgPlot pw("Widths near EP " + pair_name(rec.v_low, rec.v_high), "intensity (1e13 W/cm2)", "Gamma (cm-1)");
        for (const auto* side : {&rep.below, &rep.above}) {
          const std::string name = side == &rep.below ? "below" : "above";
          std::vector<double> ra, rb, ga, gb;
          for (std::size_t i = 0; i < side->intensity.size(); ++i) {
            ra.push_back(side->a[i].real()), rb.push_back(side->b[i].real());
            ga.push_back(-2.0 * side->a[i].imag() * units::kHartreeToInvCm);
            gb.push_back(-2.0 * side->b[i].imag() * units::kHartreeToInvCm);
            sig.add_row({static_cast<long long>(k), name, side->lambda_nm, side->intensity[i], ra.back(), ga.back(),
                         rb.back(), gb.back()});
          }
          const std::string l = io::format_number(side->lambda_nm) + " nm";
          pe.add_line(side->intensity, ra, "v=" + std::to_string(rec.v_low) + " " + l, name == "above");
          pe.add_line(side->intensity, rb, "v=" + std::to_string(rec.v_high) + " " + l, name == "above");
          pw.add_line(side->intensity, ga, "v=" + std::to_string(rec.v_low) + " " + l, name == "above");
          pw.add_line(side->intensity, gb, "v=" + std::to_string(rec.v_high) + " " + l, name == "above");
        }
        pe.write(ctx.out / ("signature_energy_" + tag + ".svg"));
        pw.write(ctx.out / ("signature_width_" + tag + ".svg"));
      }
      entry["ep"] = to_json(rec);
      std::printf("EP(%d,%d) v+=%d: lambda = %.6f nm, I = %.6f, |E1-E2| = %.2e, %s%s\n", rec.v_low, rec.v_high,
                  rec.v_plus, rec.lambda_nm, rec.intensity, rec.gap_residual, rec.valid ? "valid" : "INVALID ",
                  rec.note.c_str());
      if (!rec.valid) status = 1;
    } catch (const std::exception& e) {
      entry["error"] = e.what();
      std::cerr << "refinement failed: " << e.what() << "\n";
      status = 1;
    }
    results.push_back(entry);
  }
  sig.write(ctx.out / "signature.csv");
  write_run_json(ctx, "ep_refine.json", "ep-refine", config, results);
  return status;
}

// ---------------------------------------------------------------------------------------------
// loop

struct LoopArgs {
  double lambda0 = 575, d_lambda = 5, i_max = 0.30, t_f = 30;
  int steps = 400, v = 12;
  bool reversed = false, classify = false;
  std::vector<std::string> eps;
  std::string ep_map;
};

void write_trajectory(const fs::path& path, const Trajectory& tr) {
  io::CsvTable t({"phi", "t_fs", "lambda_nm", "intensity_1e13", "ReE_hartree", "Gamma_cm1", "P_ND", "character"});
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const auto& s = tr.samples[i];
    t.add_row({s.phi, s.t_fs, s.lambda_nm, s.intensity, s.energy.real(), s.width_cm(), tr.p_nd[i],
               std::string(to_string(s.character))});
  }
  t.write(path);
}

json trajectory_summary(const Trajectory& tr) {
  json q = json::array();
  for (auto c : tr.quarter_characters) q.push_back(to_string(c));
  const auto& s = tr.spec;
  double wmax = 0.0;
  for (const auto& x : tr.samples) wmax = std::max(wmax, x.width_cm());
  return {{"spec", {{"lambda0_nm", s.lambda0}, {"d_lambda_nm", s.d_lambda}, {"i_max_1e13Wcm2", s.i_max}, {"t_f_fs", s.t_f},
                    {"n_steps", s.n_steps}, {"reversed", s.reversed},
                    {"orientation", s.handedness() > 0 ? "anticlockwise" : s.handedness() < 0 ? "clockwise" : "degenerate"}}},
          {"v_start", tr.v_start},
          {"v_end", tr.v_end >= 0 ? json(tr.v_end) : json(nullptr)},
          {"complete", tr.complete},
          {"error", tr.error},
          {"p_nd_final", tr.final_survival()},
          {"max_gamma_cm1", wmax},
          {"quarter_characters", q},
          {"warnings", tr.warnings}};
}

void plot_trajectory(const fs::path& dir, const std::string& stem, const std::vector<Trajectory>& trs,
                     const std::vector<EPRecord>& eps) {
  io::SvgPlot contour("Loop in the parameter plane", "wavelength (nm)", "intensity (1e13 W/cm2)");
  io::SvgPlot energy("Resonance path", "Re E (hartree)", "Gamma (cm-1)");
  io::SvgPlot surv("Non-dissociated fraction", "t (fs)", "P_ND");
  double t0 = 0.0;
  for (const auto& tr : trs) {
    std::vector<double> l, i, e, g, t, p;
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
      const auto& s = tr.samples[k];
      l.push_back(s.lambda_nm), i.push_back(s.intensity), e.push_back(s.energy.real()), g.push_back(s.width_cm());
      t.push_back(t0 + s.t_fs), p.push_back(tr.p_nd[k]);
    }
    const std::string name = std::to_string(tr.v_start) + "->" + (tr.v_end >= 0 ? std::to_string(tr.v_end) : "?");
    contour.add_line(l, i, name);
    energy.add_line(e, g, name);
    surv.add_line(t, p, name);
    t0 += tr.spec.t_f;
  }
  for (const auto& ep : eps) contour.add_marker(ep.lambda_nm, ep.intensity, pair_name(ep.v_low, ep.v_high));
  contour.write(dir / (stem + "_contour.svg"));
  energy.write(dir / (stem + "_energy.svg"));
  surv.write(dir / (stem + "_survival.svg"));
}

std::vector<EPRecord> ep_markers(const std::vector<std::string>& points, const std::string& map_file) {
  std::vector<EPRecord> eps;
  if (!map_file.empty()) eps = read_ep_csv(map_file);
  for (const auto& s : points) {
    EPRecord r;
    std::tie(r.lambda_nm, r.intensity) = parse_point(s);
    r.v_low = r.v_high = -1;
    eps.push_back(r);
  }
  return eps;
}

int cmd_loop(Context& ctx, const LoopArgs& a, const json& config) {
  const LoopSpec spec{a.lambda0, a.d_lambda, a.i_max, a.t_f, a.steps, a.reversed};
  spec.validate();
  const SystemFamily family(ctx.model, ctx.grid, ctx.blocks);
  const auto levels = field_free_levels(ctx.model, 20, ctx.grid, ctx.levels);
  if (a.v >= static_cast<int>(levels.levels.size())) throw std::invalid_argument("loop: v is not a bound level");
  FollowOptions opts;
  opts.classify_samples = a.classify;
  const auto tr = follow_resonance(family, levels, spec, a.v, opts);
  for (const auto& w : tr.warnings) std::cerr << "warning: " << w << "\n";
  write_trajectory(ctx.out / "trajectory.csv", tr);
  const auto eps = ep_markers(a.eps, a.ep_map);
  plot_trajectory(ctx.out, "loop", {tr}, eps);
  auto res = trajectory_summary(tr);
  const auto contour = make_loop(spec);
  res["winding"] = json::array();
  for (const auto& ep : eps)
    res["winding"].push_back({{"lambda_nm", ep.lambda_nm}, {"intensity_1e13Wcm2", ep.intensity},
                              {"pair", ep.v_low >= 0 ? pair_name(ep.v_low, ep.v_high) : ""},
                              {"winding_number", winding_number(contour, ep.lambda_nm, ep.intensity)}});
  write_run_json(ctx, "loop.json", "loop", config, res);
  std::printf("v = %d -> %s, P_ND(t_f) = %.6g%s\n", tr.v_start, tr.v_end >= 0 ? std::to_string(tr.v_end).c_str() : "?",
              tr.final_survival(), tr.complete ? "" : " (continuation aborted)");
  if (!tr.complete || tr.v_end < 0) {
    std::cerr << "loop failed: " << tr.error << "\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------------------------
// scenario

struct ScenarioArgs {
  std::string preset = "reference";
  std::vector<std::string> loops;
  std::string ep_map;
  double t_f = 30;
  int steps = 400;
  std::string successive_family = "feshbach";
  std::string cluster_family = "shape";
};

std::optional<Character> family_option(const std::string& s, bool& reversed) {
  reversed = false;
  if (s == "feshbach") return Character::Feshbach;
  if (s == "shape") return Character::Shape;
  if (s == "anticlockwise") return std::nullopt;
  if (s == "clockwise") {
    reversed = true;
    return std::nullopt;
  }
  throw std::invalid_argument("unknown traversal '" + s + "' (feshbach, shape, anticlockwise, clockwise)");
}

void apply_orientation(std::vector<ScenarioLoop>& loops, bool clockwise) {
  for (auto& l : loops)
    if (!l.family) l.spec.orient(!clockwise);
}

// NAME:lambda0,d_lambda,i_max,v_start,v_expected[,traversal]
std::pair<std::string, ScenarioLoop> parse_loop(const std::string& s, double t_f, int steps) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--loop expects NAME:lambda0,d_lambda,i_max,v_start,v_expected");
  std::vector<std::string> f;
  std::stringstream ss(s.substr(colon + 1));
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  if (f.size() < 5 || f.size() > 6) throw std::invalid_argument("--loop: expected 5 or 6 fields in " + s);
  ScenarioLoop l;
  l.spec = {std::stod(f[0]), std::stod(f[1]), std::stod(f[2]), t_f, steps, false};
  l.v_start = std::stoi(f[3]);
  l.v_expected = std::stoi(f[4]);
  bool cw = false;
  l.family = family_option(f.size() == 6 ? f[5] : "anticlockwise", cw);
  if (!l.family) l.spec.orient(!cw);
  return {s.substr(0, colon), l};
}

int cmd_scenario(Context& ctx, const ScenarioArgs& a, const json& config) {
  std::vector<std::pair<std::string, std::vector<ScenarioLoop>>> strategies;
  std::vector<EPRecord> eps;
  if (!a.ep_map.empty()) eps = read_ep_csv(a.ep_map);
  if (!a.loops.empty()) {
    for (const auto& s : a.loops) {
      auto [name, loop] = parse_loop(s, a.t_f, a.steps);
      auto it = std::find_if(strategies.begin(), strategies.end(), [&](const auto& p) { return p.first == name; });
      if (it == strategies.end()) {
        strategies.push_back({name, {}});
        it = strategies.end() - 1;
      }
      it->second.push_back(loop);
    }
  } else {
    StrategyTable table = reference_table();
    if (a.preset == "located") {
      if (eps.empty()) throw std::invalid_argument("scenario: preset 'located' needs --ep-map");
      table = map_table(table, select_cluster(group_clusters(eps), table, table.eps.front().lambda_nm));
    } else if (a.preset != "reference") {
      throw std::invalid_argument("scenario: unknown preset '" + a.preset + "' (reference, located)");
    }
    bool cw_s = false, cw_c = false;
    const auto fs_ = family_option(a.successive_family, cw_s);
    const auto fc = family_option(a.cluster_family, cw_c);
    auto succ = successive_loops(table, a.t_f, a.steps, fs_);
    auto clus = cluster_loop(table, a.t_f, a.steps, fc);
    apply_orientation(succ, cw_s);
    apply_orientation(clus, cw_c);
    strategies.push_back({"successive", succ});
    strategies.push_back({"cluster", clus});
  }
  for (const auto& [name, loops] : strategies) validate_chain(loops);

  const SystemFamily family(ctx.model, ctx.grid, ctx.blocks);
  const auto levels = field_free_levels(ctx.model, 20, ctx.grid, ctx.levels);
  io::CsvTable cmp({"strategy", "loops", "v_start", "v_final", "cumulative_P_ND", "ok"});
  json reports = json::array();
  int status = 0;
  for (const auto& [name, loops] : strategies) {
    const auto rep = run_scenario(family, levels, name, loops, ctx.jobs);
    json per = json::array();
    for (std::size_t i = 0; i < rep.trajectories.size(); ++i) {
      const auto& tr = rep.trajectories[i];
      write_trajectory(ctx.out / (name + "_loop" + std::to_string(i + 1) + ".csv"), tr);
      auto j = trajectory_summary(tr);
      j["v_expected"] = loops[i].v_expected;
      const auto contour = make_loop(tr.spec);
      j["winding"] = json::array();
      for (const auto& ep : eps)
        if (const int w = winding_number(contour, ep.lambda_nm, ep.intensity))
          j["winding"].push_back({{"pair", pair_name(ep.v_low, ep.v_high)}, {"lambda_nm", ep.lambda_nm}, {"winding_number", w}});
      per.push_back(j);
    }
    plot_trajectory(ctx.out, name, rep.trajectories, eps);
    cmp.add_row({name, static_cast<long long>(loops.size()), static_cast<long long>(loops.front().v_start),
                 static_cast<long long>(rep.final_label), rep.cumulative_survival, std::string(rep.ok ? "true" : "false")});
    reports.push_back({{"strategy", name}, {"loops", per}, {"cumulative_p_nd", rep.cumulative_survival},
                       {"final_label", rep.final_label}, {"ok", rep.ok}, {"error", rep.error}});
    std::printf("%-12s %zu loop(s): v %d -> %d, cumulative P_ND = %.6g%s\n", name.c_str(), loops.size(),
                loops.front().v_start, rep.final_label, rep.cumulative_survival, rep.ok ? "" : "  [chain broken]");
    if (!rep.ok) {
      std::cerr << name << ": " << rep.error << "\n";
      status = 1;
    }
  }
  cmp.write(ctx.out / "scenario.csv");
  write_run_json(ctx, "scenario.json", "scenario", config, reports);
  return status;
}

// ---------------------------------------------------------------------------------------------
// config file: key = value lines; keys are long option names without the leading dashes

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(path + ":" + std::to_string(n) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

// Inserts config entries right after the subcommand so that later command-line flags override them.
std::vector<std::string> merge_config(const CLI::App& app, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;
  auto sub_pos = std::find_if(args.begin(), args.end(), [](const std::string& s) {
    return std::find(std::begin(kCommands), std::end(kCommands), s) != std::end(kCommands);
  });
  if (sub_pos == args.end()) return args;
  const CLI::App* sub = app.get_subcommand(*sub_pos);
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config(config)) {
    const std::string flag = "--" + key;
    if (!sub->get_option_no_throw(flag) && !app.get_option_no_throw(flag)) {
      std::cerr << "config: ignoring '" << key << "' (not an option of " << sub->get_name() << ")\n";
      continue;
    }
    extra.push_back(flag + "=" + value);
  }
  args.insert(sub_pos + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laser-dressed Floquet resonances, exceptional points and loop transfers of a two-state diatomic"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Common c;
  app.add_option("--model", c.model, "Model descriptor file, or a bundled name (h2plus, h2plus-morse)")->capture_default_str();
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_option("--jobs", c.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--grid.r_min", c.grid.r_min, "Inner grid radius (bohr)")->capture_default_str();
  app.add_option("--grid.r_max", c.grid.r_max, "Outer grid radius (bohr)")->capture_default_str();
  app.add_option("--grid.n_points", c.grid.n_points, "Grid points")->capture_default_str();
  app.add_option("--grid.ecs_radius", c.grid.ecs_radius, "Complex scaling radius (bohr)")->capture_default_str();
  app.add_option("--grid.ecs_angle", c.grid.ecs_angle, "Complex scaling angle (rad)")->capture_default_str();
  app.add_option("--blocks", c.blocks, "Floquet blocks (even)")->capture_default_str();
  app.add_option("--richardson", c.richardson, "Richardson stages for bound levels")->capture_default_str();
  app.add_option("--cache", c.cache, "JSON-lines cache file");
  app.add_option("--config", c.config, "key = value configuration file; command-line flags take precedence");

  LevelsArgs la;
  auto* levels = app.add_subcommand("levels", "Field-free levels, upper adiabatic levels vs wavelength, EP candidates");
  levels->add_option("--v-max", la.v_max)->capture_default_str();
  levels->add_option("--vplus-max", la.vplus_max)->capture_default_str();
  levels->add_option("--lambda-min", la.lambda_min, "nm")->capture_default_str();
  levels->add_option("--lambda-max", la.lambda_max, "nm")->capture_default_str();
  levels->add_option("--lambda-step", la.lambda_step, "nm")->capture_default_str();
  levels->add_option("--reference-intensity", la.reference_intensity, "W/cm2")->capture_default_str();

  AdiabaticArgs aa;
  auto* adiabatic = app.add_subcommand("adiabatic", "Dressed diabatic and adiabatic potentials");
  adiabatic->add_option("--lambda", aa.lambda, "nm")->capture_default_str();
  adiabatic->add_option("--intensity", aa.intensity, "1e13 W/cm2")->capture_default_str();
  adiabatic->add_option("--r-min", aa.r_min)->capture_default_str();
  adiabatic->add_option("--r-max", aa.r_max)->capture_default_str();
  adiabatic->add_option("--points", aa.points)->capture_default_str();

  ResonanceArgs ra;
  auto* resonance = app.add_subcommand("resonance", "Floquet resonance at one field point, or continued over intensity");
  resonance->add_option("--lambda", ra.lambda, "nm")->capture_default_str();
  resonance->add_option("--intensity", ra.intensity, "1e13 W/cm2")->capture_default_str();
  resonance->add_option("--intensity-max", ra.intensity_max, "Continue up to this intensity");
  resonance->add_option("--steps", ra.steps, "Output points of an intensity scan")->capture_default_str();
  resonance->add_option("--v", ra.v, "Seed from this field-free level")->capture_default_str();
  resonance->add_option("--guess", ra.guess, "Seed energy RE,IM (hartree)");
  resonance->add_flag("--classify", ra.classify, "Report Feshbach/shape character");

  MapArgs ma;
  auto* ep_map = app.add_subcommand("ep-map", "Locate and refine all EPs in a wavelength window");
  ep_map->add_option("--v-min", ma.v_min, "Lowest level of a pair")->capture_default_str();
  ep_map->add_option("--v-max", ma.v_max, "Highest level of a pair")->capture_default_str();
  ep_map->add_option("--vplus-max", ma.vplus_max)->capture_default_str();
  ep_map->add_option("--lambda-min", ma.lambda_min, "nm")->capture_default_str();
  ep_map->add_option("--lambda-max", ma.lambda_max, "nm")->capture_default_str();

  RefineArgs fa;
  auto* ep_refine = app.add_subcommand("ep-refine", "Refine the EP(s) of one pair and check the signature");
  ep_refine->add_option("--v", fa.v, "Lower label of the pair (v, v+1)")->capture_default_str();
  ep_refine->add_option("--vplus", fa.v_plus, "Upper-adiabat level of the candidate (all if omitted)");
  ep_refine->add_option("--lambda-guess", fa.lambda_guess, "Skip the coarse stage and start here (nm)");
  ep_refine->add_option("--lambda-min", fa.lambda_min)->capture_default_str();
  ep_refine->add_option("--lambda-max", fa.lambda_max)->capture_default_str();
  ep_refine->add_option("--signature-dl", fa.signature_dl, "Wavelength offset of the signature scans (nm)")->capture_default_str();
  ep_refine->add_option("--signature-window", fa.signature_window, "Half-width of the intensity scans")->capture_default_str();
  ep_refine->add_option("--signature-points", fa.signature_points)->capture_default_str();
  ep_refine->add_flag("!--no-signature", fa.signature, "Skip the signature check");

  LoopArgs lo;
  auto* loop = app.add_subcommand("loop", "Follow a resonance around one loop and integrate the survival");
  loop->add_option("--lambda0", lo.lambda0, "nm")->capture_default_str();
  loop->add_option("--dlambda", lo.d_lambda, "nm (sign selects handedness)")->capture_default_str();
  loop->add_option("--imax", lo.i_max, "1e13 W/cm2")->capture_default_str();
  loop->add_option("--tf", lo.t_f, "Pulse duration (fs)")->capture_default_str();
  loop->add_option("--steps", lo.steps)->capture_default_str();
  loop->add_option("--v", lo.v, "Starting field-free level")->capture_default_str();
  loop->add_flag("--reversed", lo.reversed, "Traverse phi from 2 pi down to 0");
  loop->add_flag("--classify", lo.classify, "Classify every sample as Feshbach or shape");
  loop->add_option("--ep", lo.eps, "EP marker LAMBDA:INTENSITY (repeatable)")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  loop->add_option("--ep-map", lo.ep_map, "ep_map.csv for markers and winding numbers");

  ScenarioArgs sa;
  auto* scenario = app.add_subcommand("scenario", "Compare transfer strategies (successive single-EP loops vs one cluster loop)");
  scenario->add_option("--preset", sa.preset, "reference or located (needs --ep-map)")->capture_default_str();
  scenario->add_option("--loop", sa.loops, "NAME:lambda0,d_lambda,i_max,v_start,v_expected[,traversal] (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  scenario->add_option("--ep-map", sa.ep_map, "ep_map.csv from ep-map");
  scenario->add_option("--tf", sa.t_f, "Duration of each loop (fs)")->capture_default_str();
  scenario->add_option("--steps", sa.steps)->capture_default_str();
  scenario->add_option("--successive", sa.successive_family, "feshbach, shape, anticlockwise or clockwise")->capture_default_str();
  scenario->add_option("--cluster", sa.cluster_family, "feshbach, shape, anticlockwise or clockwise")->capture_default_str();

  try {
    auto args = merge_config(app, argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    auto ctx = make_context(c);
    const CLI::App* sub = app.get_subcommands().front();
    const auto config = config_echo(app, sub);
    const std::string name = sub->get_name();
    if (name == "levels") return cmd_levels(ctx, la, config);
    if (name == "adiabatic") return cmd_adiabatic(ctx, aa, config);
    if (name == "resonance") return cmd_resonance(ctx, ra, config);
    if (name == "ep-map") return cmd_ep_map(ctx, ma, config);
    if (name == "ep-refine") return cmd_ep_refine(ctx, fa, config);
    if (name == "loop") return cmd_loop(ctx, lo, config);
    if (name == "scenario") return cmd_scenario(ctx, sa, config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
