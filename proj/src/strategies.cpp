#include "floquet/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace floquet {

StrategyTable reference_table() {
  StrategyTable t;
  t.eps = {{12, 575.0, 0.261}, {13, 552.0, 0.272}, {14, 533.0, 0.283}, {15, 520.0, 0.290}};
  for (const auto& ep : t.eps) t.successive.push_back({ep.v_low, ep.v_low + 1, ep.lambda_nm, 5.0, 0.30});
  t.cluster = {12, 16, 545.0, 40.0, 0.32};
  return t;
}

namespace {

struct Span {
  double centre, half;
};

Span wavelength_span(const std::vector<EPCoordinate>& eps) {
  const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end(), [](const EPCoordinate& a, const EPCoordinate& b) {
    return a.lambda_nm < b.lambda_nm;
  });
  return {0.5 * (lo->lambda_nm + hi->lambda_nm), 0.5 * (hi->lambda_nm - lo->lambda_nm)};
}

double max_intensity(const std::vector<EPCoordinate>& eps) {
  double m = 0.0;
  for (const auto& e : eps) m = std::max(m, e.intensity);
  return m;
}

}  // namespace

StrategyTable map_table(const StrategyTable& reference, const std::vector<EPCoordinate>& target) {
  if (target.size() != reference.eps.size()) throw std::invalid_argument("map_table: cluster sizes differ");
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i].v_low != reference.eps[i].v_low) throw std::invalid_argument("map_table: cluster labels differ");
  const auto from = wavelength_span(reference.eps), to = wavelength_span(target);
  if (!(from.half > 0.0) || !(to.half > 0.0)) throw std::invalid_argument("map_table: degenerate cluster");
  const double s = to.half / from.half;
  const double k = max_intensity(target) / max_intensity(reference.eps);
  auto map_row = [&](const LoopRow& r) {
    return LoopRow{r.v_start, r.v_expected, to.centre + s * (r.lambda0 - from.centre), s * r.d_lambda, k * r.i_max};
  };
  StrategyTable out;
  out.eps = target;
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto row = map_row(reference.successive[i]);
    row.lambda0 = target[i].lambda_nm;  // single-EP loops stay centred on their EP
    out.successive.push_back(row);
  }
  out.cluster = map_row(reference.cluster);
  return out;
}

std::vector<EPCoordinate> select_cluster(const std::vector<Cluster>& clusters, const StrategyTable& reference,
                                         double near_nm) {
  const std::vector<EPCoordinate>* best = nullptr;
  std::vector<std::vector<EPCoordinate>> found;
  for (const auto& c : clusters) {
    std::vector<EPCoordinate> picked;
    for (const auto& want : reference.eps) {
      const auto it = std::find_if(c.members.begin(), c.members.end(),
                                   [&](const EPRecord& r) { return r.v_low == want.v_low; });
      if (it == c.members.end()) break;
      picked.push_back({it->v_low, it->lambda_nm, it->intensity});
    }
    if (picked.size() == reference.eps.size()) found.push_back(std::move(picked));
  }
  for (const auto& f : found)
    if (!best || std::abs(f.front().lambda_nm - near_nm) < std::abs(best->front().lambda_nm - near_nm)) best = &f;
  if (!best) throw std::runtime_error("select_cluster: no mapped cluster holds all reference pairs");
  return *best;
}

std::vector<ScenarioLoop> successive_loops(const StrategyTable& table, double t_f, int n_steps,
                                           std::optional<Character> family) {
  std::vector<ScenarioLoop> out;
  for (const auto& r : table.successive) {
    LoopSpec spec{r.lambda0, r.d_lambda, r.i_max, t_f, n_steps, false};
    out.push_back({spec, r.v_start, r.v_expected, family});
  }
  return out;
}

std::vector<ScenarioLoop> cluster_loop(const StrategyTable& table, double t_f, int n_steps,
                                       std::optional<Character> family) {
  const auto& r = table.cluster;
  LoopSpec spec{r.lambda0, r.d_lambda, r.i_max, t_f, n_steps, false};
  return {{spec, r.v_start, r.v_expected, family}};
}

}  // namespace floquet
