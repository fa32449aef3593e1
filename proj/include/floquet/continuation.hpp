#pragma once

#include <functional>
#include <string>
#include <vector>

#include "floquet/floquet.hpp"

namespace floquet {

/// Polynomial predictor through the last (up to three) accepted points of a branch.
class Extrapolator {
 public:
  void push(double s, cplx e);
  cplx predict(double s) const;
  std::size_t size() const { return s_.size(); }
  void clear() { s_.clear(), e_.clear(); }

 private:
  std::vector<double> s_;
  std::vector<cplx> e_;
};

struct ContinuationOptions {
  SolverOptions solver{};
  /// A step is rejected when |E - E_predicted| exceeds max(factor * running residual, floor).
  double continuity_factor = 5.0;
  double continuity_floor = 1e-4;
  /// Smallest allowed fraction of the nominal step before the continuation is abandoned.
  double min_step_fraction = 1.0 / 1024.0;
};

class ContinuationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BranchPoint {
  double s;
  cplx energy;
};

struct BranchTrack {
  std::vector<BranchPoint> points;
  bool complete = true;
  std::string error;  ///< why the track stopped early
};

/// Follows one resonance along a one-parameter family of systems from s0 to s1 (either
/// direction) in nominal steps of (s1 - s0) / n_steps, halving the step when the continuity
/// test fails. Returns every accepted point including intermediate ones; the nominal grid
/// points are always among them. A breakdown ends the track early with complete = false.
BranchTrack track_branch(const std::function<CoupledSystem(double)>& at, double s0, double s1, int n_steps,
                         cplx start, const ContinuationOptions& options = {});

struct PairPoint {
  double s;
  cplx a, b;
};

struct PairTrack {
  std::vector<PairPoint> points;
  bool complete = true;
  std::string error;
};

/// Follows two resonances together. When the two secant solves collapse onto one root the pair
/// is recovered from contour moments and assigned by nearest extrapolation.
PairTrack track_pair(const std::function<CoupledSystem(double)>& at, double s0, double s1, int n_steps,
                     cplx start_a, cplx start_b, const ContinuationOptions& options = {});

}  // namespace floquet
