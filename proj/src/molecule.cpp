#include "floquet/molecule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#ifndef FLOQUET_DATA_DIR
#define FLOQUET_DATA_DIR "data"
#endif

namespace floquet {

void RadialGrid::validate() const {
  if (!(r_min > 0.0 && r_min < ecs_radius && ecs_radius < r_max))
    throw std::invalid_argument("radial grid: require 0 < r_min < ecs_radius < r_max");
  if (n_points < 500) throw std::invalid_argument("radial grid: n_points must be at least 500");
  if (!(ecs_angle > 0.0 && ecs_angle < std::numbers::pi / 4))
    throw std::invalid_argument("radial grid: ecs_angle must lie in (0, pi/4)");
}

RadialGrid RadialGrid::refined() const {
  RadialGrid g = *this;
  g.n_points = 2 * n_points - 1;
  return g;
}

void MoleculeModel::validate(double r_lo, double r_hi) const {
  if (!vg || !vu || !dipole) throw std::invalid_argument("molecule: missing curve");
  if (!(reduced_mass > 0.0)) throw std::invalid_argument("molecule: reduced_mass must be positive");
  if (r_lo < vg->lower_bound() || r_lo < vu->lower_bound() || r_lo < dipole->lower_bound())
    throw std::invalid_argument("molecule: curves do not cover the grid start");

  constexpr int n = 4000;
  const double dr = (r_hi - r_lo) / n;
  std::vector<double> g(n + 1), u(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double r = r_lo + i * dr;
    g[i] = (*vg)(r);
    u[i] = (*vu)(r);
    if (!std::isfinite(g[i]) || !std::isfinite(u[i]))
      throw std::invalid_argument("molecule: non-finite potential at R = " + std::to_string(r));
    if (!((*dipole)(r) > 0.0))
      throw std::invalid_argument("molecule: dipole must be positive, fails at R = " + std::to_string(r));
  }
  const auto imin = static_cast<std::size_t>(std::distance(g.begin(), std::min_element(g.begin(), g.end())));
  if (imin == 0 || imin == g.size() - 1) throw std::invalid_argument("molecule: ground curve has no interior minimum");
  const double depth = g.back() - g[imin];
  const double slack = 1e-9 * std::max(depth, 1.0);
  for (std::size_t i = 1; i <= imin; ++i)
    if (g[i] > g[i - 1] + slack) throw std::invalid_argument("molecule: ground curve has more than one minimum");
  for (std::size_t i = imin + 1; i < g.size(); ++i)
    if (g[i] < g[i - 1] - slack) throw std::invalid_argument("molecule: ground curve has more than one minimum");
  // Long-range polarisation wells (a few 1e-5 hartree for H2+ 2p sigma_u) are tolerated.
  constexpr double kShallowWell = 1e-4;
  double lowest = u.front();
  for (std::size_t i = 1; i < u.size(); ++i) {
    if (u[i] > lowest + std::max(slack, kShallowWell)) throw std::invalid_argument("molecule: excited curve is not repulsive");
    lowest = std::min(lowest, u[i]);
  }
  if (std::abs(g.back() - u.back()) > 1e-2 * std::max(depth, 1e-3))
    throw std::invalid_argument("molecule: curves do not share a dissociation limit");
}

double MoleculeModel::equilibrium(double r_lo, double r_hi) const {
  constexpr int n = 2000;
  const double dr = (r_hi - r_lo) / n;
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if ((*vg)(r_lo + i * dr) < (*vg)(r_lo + best * dr)) best = i;
  double a = r_lo + std::max(best - 1, 0) * dr, b = r_lo + std::min(best + 1, n) * dr;
  // golden section on the bracketing cells
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
    if ((*vg)(c) < (*vg)(d))
      b = d;
    else
      a = c;
    c = b - gr * (b - a);
    d = a + gr * (b - a);
  }
  return 0.5 * (a + b);
}

std::uint64_t MoleculeModel::fingerprint() const {
  auto h = fnv1a(name);
  for (const auto& c : {vg, vu, dipole}) {
    const auto f = c->fingerprint();
    h = fnv1a(&f, sizeof f, h);
  }
  return fnv1a(&reduced_mass, sizeof reduced_mass, h);
}

MoleculeModel make_analytic_model(const AnalyticModelParams& p, std::string name) {
  MoleculeModel m;
  m.name = std::move(name);
  m.vg = morse_curve(p.morse_depth, p.morse_a, p.morse_re);
  m.vu = exponential_curve(p.repulsive_amplitude, p.repulsive_b);
  m.dipole = linear_curve(p.dipole_c0, p.dipole_c1);
  m.reduced_mass = p.reduced_mass;
  return m;
}

std::filesystem::path bundled_data_dir() {
  if (const char* env = std::getenv("FLOQUET_DATA_DIR"); env && *env) return env;
  return FLOQUET_DATA_DIR;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> numbers(std::istringstream& ss, std::size_t count, const std::string& what) {
  std::vector<double> v(count);
  for (auto& x : v)
    if (!(ss >> x)) throw std::invalid_argument("model descriptor: " + what + " expects " + std::to_string(count) + " numbers");
  return v;
}

// "table <path>" | "morse D a re" | "exponential A b" | "linear c0 c1" | "harmonic k re" | "<path>"
CurvePtr parse_curve(const std::string& spec, const std::filesystem::path& base, TailKind tail) {
  std::istringstream ss(spec);
  std::string kind;
  ss >> kind;
  if (kind == "morse") {
    auto p = numbers(ss, 3, kind);
    return morse_curve(p[0], p[1], p[2]);
  }
  if (kind == "exponential") {
    auto p = numbers(ss, 2, kind);
    return exponential_curve(p[0], p[1]);
  }
  if (kind == "linear") {
    auto p = numbers(ss, 2, kind);
    return linear_curve(p[0], p[1]);
  }
  if (kind == "harmonic") {
    auto p = numbers(ss, 2, kind);
    return harmonic_curve(p[0], p[1]);
  }
  std::string path = kind;
  if (kind == "table") ss >> path;
  if (path.empty()) throw std::invalid_argument("model descriptor: empty curve specification");
  std::filesystem::path p(path);
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::exists(p)) throw std::runtime_error("model descriptor: missing file " + p.string());
  return TabulatedCurve::load(p, tail, 0.0);
}

MoleculeModel parse_descriptor(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open model descriptor: " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("model descriptor: expected key = value: " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const auto& [k, v] : kv)
    if (k != "name" && k != "vg" && k != "vu" && k != "dipole" && k != "reduced_mass")
      throw std::invalid_argument("model descriptor: unknown key '" + k + "'");
  for (const char* k : {"vg", "vu", "dipole", "reduced_mass"})
    if (!kv.count(k)) throw std::invalid_argument(std::string("model descriptor: missing key '") + k + "'");

  const auto base = file.parent_path();
  MoleculeModel m;
  m.name = kv.count("name") ? kv["name"] : file.stem().string();
  m.vg = parse_curve(kv["vg"], base, TailKind::Asymptotic);
  m.vu = parse_curve(kv["vu"], base, TailKind::Asymptotic);
  m.dipole = parse_curve(kv["dipole"], base, TailKind::Linear);
  m.reduced_mass = std::stod(kv["reduced_mass"]);
  return m;
}

}  // namespace

MoleculeModel load_molecule(const std::string& descriptor) {
  MoleculeModel m;
  if (descriptor == "h2plus")
    m = parse_descriptor(bundled_data_dir() / "h2plus.model");
  else if (descriptor == "h2plus-morse")
    m = make_analytic_model({}, "h2plus-morse");
  else
    m = parse_descriptor(descriptor);
  const double lo = std::max({m.vg->lower_bound(), m.vu->lower_bound(), m.dipole->lower_bound(), 0.5});
  m.validate(lo, 25.0);
  return m;
}

namespace {

void check_r(double r) {
  if (!std::isfinite(r) || !(r > 0.0)) throw std::out_of_range("R outside grid: " + std::to_string(r));
}

}  // namespace

double dressed_diabatic(const MoleculeModel& model, const FieldPoint& field, PhotonBlock block, double r) {
  check_r(r);
  const auto& c = model.curve(block.state);
  if (r < c.lower_bound()) throw std::out_of_range("R outside grid: " + std::to_string(r));
  return c(r) + block.photons * field.omega();
}

AdiabaticPair adiabatic_potentials(const MoleculeModel& model, const FieldPoint& field, double r) {
  check_r(r);
  const double a = (*model.vg)(r);
  const double b = (*model.vu)(r) - field.omega();
  const double c = -0.5 * field.e0() * (*model.dipole)(r);
  const double mean = 0.5 * (a + b);
  const double half = std::hypot(0.5 * (a - b), c);
  return {mean + half, mean - half};
}

double diabatic_crossing(const MoleculeModel& model, double omega, double r_lo, double r_hi) {
  auto f = [&](double r) { return (*model.vg)(r) - (*model.vu)(r) + omega; };
  double a = model.equilibrium(r_lo, r_hi);
  if (f(a) >= 0.0) return std::nan("");
  const double dr = 0.01;
  double b = a;
  while (f(b) < 0.0) {
    a = b;
    b += dr;
    if (b > r_hi) return std::nan("");
  }
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    const double m = 0.5 * (a + b);
    (f(m) < 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace floquet
