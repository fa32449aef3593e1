#pragma once

#include <vector>

#include "floquet/ep_locator.hpp"
#include "floquet/loop_engine.hpp"

namespace floquet {

struct EPCoordinate {
  int v_low = 0;
  double lambda_nm = 0.0;
  double intensity = 0.0;  ///< 1e13 W/cm^2
};

struct LoopRow {
  int v_start = 0;
  int v_expected = 1;
  double lambda0 = 0.0, d_lambda = 0.0, i_max = 0.0;
};

/// EP cluster with one single-EP loop per member and one loop around the whole cluster.
struct StrategyTable {
  std::vector<EPCoordinate> eps;   ///< ordered by v_low
  std::vector<LoopRow> successive;  ///< v -> v+1 for each member
  LoopRow cluster;                  ///< first v_low -> last v_low + 1
};

/// H2+ (12..16) cluster coordinates and loops of the reference calculation.
StrategyTable reference_table();

/// Carries the reference loop geometry onto another cluster: wavelengths by the affine map that
/// takes the reference extreme-EP midpoint and half-span onto the target's, intensities scaled
/// by the ratio of the largest EP intensities. Requires the same v_low labels in both.
StrategyTable map_table(const StrategyTable& reference, const std::vector<EPCoordinate>& target);

/// Cluster from an EP map holding every v_low of the reference, with the reference's first EP
/// wavelength closest to `near_nm`. Throws std::runtime_error when none qualifies.
std::vector<EPCoordinate> select_cluster(const std::vector<Cluster>& clusters, const StrategyTable& reference,
                                         double near_nm);

/// Successive single-EP loops, each oriented to follow `family` resonances.
std::vector<ScenarioLoop> successive_loops(const StrategyTable& table, double t_f, int n_steps,
                                           std::optional<Character> family = Character::Feshbach);

/// One loop around the cluster.
std::vector<ScenarioLoop> cluster_loop(const StrategyTable& table, double t_f, int n_steps,
                                       std::optional<Character> family = Character::Shape);

}  // namespace floquet
