#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace floquet {

/// How a tabulated curve is continued past its last node.
enum class TailKind {
  Asymptotic,  ///< f_inf + (f_last - f_inf) (r_last / r)^4
  Linear,      ///< tangent line at the last node
};

/// Real radial function with an analytic continuation onto an exterior complex-scaled contour.
class RadialFunction {
 public:
  virtual ~RadialFunction() = default;

  virtual double operator()(double r) const = 0;
  virtual double derivative(double r) const = 0;

  /// Value at complex z = anchor + (r - anchor) e^{i theta}. The continuation must be
  /// analytic in z and agree with the real curve at z = anchor.
  virtual std::complex<double> continued(std::complex<double> z, double anchor) const = 0;

  /// Smallest r at which the curve may be evaluated.
  virtual double lower_bound() const { return 0.0; }

  /// Stable content hash, used for cache keys.
  virtual std::uint64_t fingerprint() const = 0;
};

using CurvePtr = std::shared_ptr<const RadialFunction>;

/// Clamped cubic spline through (r, y) nodes. Nodes are reproduced exactly.
class TabulatedCurve final : public RadialFunction {
 public:
  TabulatedCurve(std::vector<double> r, std::vector<double> y, TailKind tail, double asymptote = 0.0);

  /// Reads two whitespace-separated columns; '#' starts a comment.
  static std::shared_ptr<TabulatedCurve> load(const std::filesystem::path& path, TailKind tail,
                                              double asymptote = 0.0);

  double operator()(double r) const override;
  double derivative(double r) const override;
  std::complex<double> continued(std::complex<double> z, double anchor) const override;
  double lower_bound() const override { return r_.front(); }
  std::uint64_t fingerprint() const override;

  const std::vector<double>& nodes() const { return r_; }
  const std::vector<double>& values() const { return y_; }
  double asymptote() const { return asymptote_; }

 private:
  std::size_t interval(double r) const;

  std::vector<double> r_, y_, m_;  // m_: second derivatives at the nodes
  TailKind tail_;
  double asymptote_;
};

/// Closed-form curve defined by a complex-analytic expression.
class AnalyticCurve final : public RadialFunction {
 public:
  using Expression = std::function<std::complex<double>(std::complex<double>)>;

  AnalyticCurve(std::string description, Expression f) : description_(std::move(description)), f_(std::move(f)) {}

  double operator()(double r) const override { return f_({r, 0.0}).real(); }
  double derivative(double r) const override;
  std::complex<double> continued(std::complex<double> z, double) const override { return f_(z); }
  std::uint64_t fingerprint() const override;

  const std::string& description() const { return description_; }

 private:
  std::string description_;
  Expression f_;
};

/// D (1 - e^{-a (r - re)})^2 - D; tends to 0, minimum -D at re.
CurvePtr morse_curve(double depth, double a, double re);
/// amplitude * e^{-b r}
CurvePtr exponential_curve(double amplitude, double b);
/// c0 + c1 r
CurvePtr linear_curve(double c0, double c1);
/// k/2 (r - re)^2
CurvePtr harmonic_curve(double k, double re);

/// FNV-1a over raw bytes; deterministic across platforms with the same endianness.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace floquet
