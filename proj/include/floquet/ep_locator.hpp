#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "floquet/bound_states.hpp"
#include "floquet/continuation.hpp"
#include "floquet/floquet.hpp"

namespace floquet {

/// Coarse EP guess from a coincidence of a field-free level with a level of the upper adiabat.
struct EPCandidate {
  int v = 0;
  int v_partner = 1;
  int v_plus = 0;
  double lambda_guess = 0.0;     ///< nm
  double crossing_radius = 0.0;  ///< bohr, diabatic crossing at lambda_guess
};

struct EPRecord {
  int v_low = 0, v_high = 1;
  double lambda_nm = 0.0;
  double intensity = 0.0;  ///< 1e13 W/cm^2
  double gap_residual = 0.0;
  cplx energy{};
  int v_plus = -1;
  int iterations = 0;
  std::string method;  ///< "newton" or "nelder-mead"
  bool valid = true;
  std::string note;
};

struct ApproximateOptions {
  double reference_intensity = 1e3;  ///< W/cm^2
  double scan_step_nm = 2.0;
  double tolerance_nm = 1e-3;
  LevelOptions levels{1, 1e-11};
};

/// Roots of E_v - E_{v+}(lambda) = 0 for v in [v_min, v_max], v+ in [0, vplus_max], restricted to
/// crossings beyond the ground-state equilibrium.
std::vector<EPCandidate> approximate_eps(const MoleculeModel& model, int v_min, int v_max, int vplus_max,
                                         double lambda_lo, double lambda_hi, const RadialGrid& grid,
                                         const ApproximateOptions& options = {});

/// Squared eigenvalue gap as a function of (wavelength nm, intensity 1e13 W/cm^2).
using GapFunction = std::function<cplx(double, double)>;

struct NewtonOptions {
  double fd_step_nm = 1e-3;
  double fd_step_intensity = 1e-4;
  double gap_tolerance = 1e-8;  ///< on |E1 - E2|
  int max_iterations = 40;
  double max_step_nm = 5.0;
  double max_step_intensity = 0.05;
  bool allow_fallback = true;
};

struct NewtonResult {
  double lambda_nm, intensity;
  cplx gap_sq;
  int iterations;
  std::string method;
  bool converged;
};

/// Newton iteration on Re/Im of the squared gap with a central-difference Jacobian and step
/// damping; falls back to Nelder-Mead on |gap^2| when Newton stalls.
NewtonResult solve_ep(const GapFunction& gap_sq, double lambda0, double intensity0, const NewtonOptions& options = {});

struct RefineOptions {
  NewtonOptions newton{};
  ContinuationOptions continuation{};
  /// First intensity window (1e13 W/cm^2) and its step; later windows double in length and step.
  double scan_max_intensity = 0.8;
  double scan_step = 0.005;
  int scan_windows = 5;
  /// Radius floor (hartree) of the contour enclosing the coalescing pair.
  double min_radius = 2e-5;
  int contour_nodes = 48;
};

/// Squared gap of the pair near (center) on a contour, tracking center and radius between calls.
class PairGap {
 public:
  PairGap(const SystemFamily& family, cplx center, double radius, const RefineOptions& options);
  cplx operator()(double lambda_nm, double intensity_1e13);
  cplx midpoint() const { return center_; }
  double radius() const { return radius_; }

 private:
  const SystemFamily& family_;
  cplx center_;
  double radius_;
  RefineOptions options_;
};

/// Zero-field continuation at the candidate wavelength, then Newton in (lambda, I).
EPRecord refine_ep(const SystemFamily& family, const LevelSet& levels, const EPCandidate& candidate,
                   const RefineOptions& options = {});

/// Abstraction over the two coalescing eigenvalues, so the signature logic also runs on toy models.
using PairSpectrum = std::function<std::pair<cplx, cplx>(double lambda_nm, double intensity_1e13)>;

struct SideScan {
  double lambda_nm;
  std::vector<double> intensity;
  std::vector<cplx> a, b;  ///< branches labelled by their zero-field origin (v_low, v_high)
  bool real_crossing = false;
  bool width_crossing = false;
  Character char_a = Character::Unclassified, char_b = Character::Unclassified;
};

struct SignatureReport {
  SideScan below, above;
  bool present = false;
  bool interchanged = false;
  bool contaminated = false;
  std::string summary;
};

/// Intensity scans on both sides of the EP; checks the crossing / tweezer pattern and the
/// Feshbach-shape interchange.
SignatureReport verify_signature(const PairSpectrum& spectrum, const EPRecord& ep, double d_lambda,
                                 double half_window, int n_points = 81,
                                 const std::vector<EPRecord>& neighbours = {});

/// PairSpectrum of a molecular family: both branches continued from zero field at each wavelength.
PairSpectrum molecular_spectrum(const SystemFamily& family, const LevelSet& levels, int v_low, int v_high,
                                const ContinuationOptions& options = {});

struct MapOptions {
  int v_min = 0;
  int v_max = 16;
  int vplus_max = 8;
  double lambda_lo = 110.0;
  double lambda_hi = 900.0;
  int jobs = 1;
  ApproximateOptions approximate{};
  RefineOptions refine{};
  /// Called after each refinement (from the worker that produced it).
  std::function<void(const EPCandidate&, const std::optional<EPRecord>&, const std::string& error)> progress;
  /// Lookup of an already refined candidate; returning a record skips the refinement.
  std::function<std::optional<EPRecord>(const EPCandidate&)> cached;
};

struct Cluster {
  int diagonal = 0;  ///< v - v+ shared by the members
  std::vector<EPRecord> members;  ///< ordered by v
};

std::vector<EPRecord> map_eps(const MoleculeModel& model, const RadialGrid& grid, const MapOptions& options);

/// map_eps followed by group_clusters.
std::vector<Cluster> map_clusters(const MoleculeModel& model, const RadialGrid& grid, const MapOptions& options,
                                  double max_gap_nm = 50.0);

/// Groups by the shared v - v+ offset and wavelength gaps below max_gap_nm; members ordered by v.
std::vector<Cluster> group_clusters(const std::vector<EPRecord>& records, double max_gap_nm = 50.0);

}  // namespace floquet
