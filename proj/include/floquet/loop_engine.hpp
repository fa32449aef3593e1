#pragma once

#include <optional>
#include <string>
#include <vector>

#include "floquet/bound_states.hpp"
#include "floquet/continuation.hpp"
#include "floquet/floquet.hpp"

namespace floquet {

/// Closed contour I = i_max sin(phi/2), lambda = lambda0 + d_lambda sin(phi), phi in [0, 2 pi].
/// With d_lambda > 0 and ascending phi the contour runs anticlockwise in the (lambda, I) plane.
struct LoopSpec {
  double lambda0 = 575.0;  ///< nm
  double d_lambda = 5.0;   ///< nm, sign selects handedness
  double i_max = 0.30;     ///< 1e13 W/cm^2
  double t_f = 30.0;       ///< fs
  int n_steps = 400;
  bool reversed = false;  ///< sample phi descending from 2 pi

  /// Throws std::invalid_argument on n_steps < 100, t_f <= 0, i_max < 0, non-positive wavelengths.
  void validate() const;

  double lambda_at(double phi) const;
  double intensity_at(double phi) const;
  /// Elapsed time (fs) at phi under the linear schedule, honouring the traversal direction.
  double time_at(double phi) const;
  double phi_start() const;
  double phi_end() const;
  /// +1 anticlockwise, -1 clockwise in the (lambda right, I up) plane, 0 for a degenerate contour.
  int handedness() const;
  /// Sets `reversed` so the traversal has the requested handedness.
  void orient(bool anticlockwise);
};

struct LoopPoint {
  double phi;
  double t_fs;
  double lambda_nm;
  double intensity;  ///< 1e13 W/cm^2
};

/// n_steps + 1 uniform samples in traversal order.
std::vector<LoopPoint> make_loop(const LoopSpec& spec);

/// Winding number of a closed polygon in the (lambda, I) plane about a point.
int winding_number(const std::vector<LoopPoint>& contour, double lambda_nm, double intensity);

struct TrajectorySample {
  double phi;
  double t_fs;
  double lambda_nm;
  double intensity;
  cplx energy;
  Character character = Character::Unclassified;  ///< filled when per-sample classification is on

  double width() const { return -2.0 * energy.imag(); }
  double width_cm() const { return width() * units::kHartreeToInvCm; }
};

struct Trajectory {
  LoopSpec spec;
  std::vector<TrajectorySample> samples;
  int v_start = -1;
  int v_end = -1;         ///< -1 when the final energy matches no field-free level
  bool complete = false;  ///< the continuation reached the end of the contour
  std::string error;
  std::vector<double> p_nd;  ///< survival at each sample
  /// Character at the middle of each quarter of the contour (empty if not requested).
  std::vector<Character> quarter_characters;
  std::vector<std::string> warnings;

  double final_survival() const { return p_nd.empty() ? 1.0 : p_nd.back(); }
  bool transferred() const { return v_end >= 0 && v_end != v_start; }
};

struct FollowOptions {
  ContinuationOptions continuation{};
  double level_match = 1e-6;  ///< hartree
  bool classify_quarters = true;
  /// Classify every sample (one extra solve each).
  bool classify_samples = false;
  /// Shortest duration treated as adiabatic; shorter pulses are flagged.
  double adiabatic_t_f = 30.0;
};

/// Continues the resonance born from field-free level v_start around the loop.
Trajectory follow_resonance(const SystemFamily& family, const LevelSet& levels, const LoopSpec& spec, int v_start,
                            const FollowOptions& options = {});

/// P(t) = exp(-int_0^t Gamma dt') by the trapezoid rule; widths in hartree, times in fs.
/// Throws std::invalid_argument on a negative width or decreasing time.
std::vector<double> survival_series(const std::vector<double>& t_fs, const std::vector<double>& width_hartree);

/// Fills traj.p_nd from its samples.
void survival(Trajectory& traj);

/// Traces both orientations and keeps the one whose quarter-turn characters best match `want`
/// (ties go to the anticlockwise orientation).
Trajectory follow_family(const SystemFamily& family, const LevelSet& levels, LoopSpec spec, int v_start,
                         Character want, const FollowOptions& options = {});

struct ScenarioLoop {
  LoopSpec spec;
  int v_start = 0;
  int v_expected = 1;
  /// When set, the orientation is chosen by resonance character instead of spec.reversed.
  std::optional<Character> family;
};

struct ScenarioReport {
  std::string name;
  std::vector<ScenarioLoop> loops;
  std::vector<Trajectory> trajectories;
  double cumulative_survival = 1.0;
  int final_label = -1;
  bool ok = true;
  std::string error;
};

/// Throws std::invalid_argument when a loop's v_start differs from the previous loop's v_expected.
void validate_chain(const std::vector<ScenarioLoop>& loops);

/// Runs the loops (concurrently when jobs > 1); a loop missing its expected transfer marks the
/// report failed. Cumulative survival is the product over loops.
ScenarioReport run_scenario(const SystemFamily& family, const LevelSet& levels, const std::string& name,
                            const std::vector<ScenarioLoop>& loops, int jobs = 1, const FollowOptions& options = {});

}  // namespace floquet
