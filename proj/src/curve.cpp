#include "floquet/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace floquet {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  auto h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) { return fnv1a(s.data(), s.size(), seed); }

namespace {

// Derivative of the cubic through four points at x[0].
double end_slope(const double* x, const double* y) {
  // Lagrange basis derivatives at x0
  double d = 0.0;
  for (int j = 0; j < 4; ++j) {
    double num_sum = 0.0;
    if (j == 0) {
      for (int k = 1; k < 4; ++k) num_sum += 1.0 / (x[0] - x[k]);
      d += y[0] * num_sum;
    } else {
      double prod = 1.0;
      for (int k = 0; k < 4; ++k)
        if (k != j) prod *= (k == 0 ? 1.0 : (x[0] - x[k])) / (x[j] - x[k]);
      d += y[j] * prod;
    }
  }
  return d;
}

}  // namespace

TabulatedCurve::TabulatedCurve(std::vector<double> r, std::vector<double> y, TailKind tail, double asymptote)
    : r_(std::move(r)), y_(std::move(y)), tail_(tail), asymptote_(asymptote) {
  if (r_.size() != y_.size()) throw std::invalid_argument("tabulated curve: column length mismatch");
  if (r_.size() < 4) throw std::invalid_argument("tabulated curve: fewer than 4 table rows");
  for (std::size_t i = 1; i < r_.size(); ++i)
    if (!(r_[i] > r_[i - 1])) throw std::invalid_argument("tabulated curve: non-monotone abscissa");

  const auto n = r_.size();
  const double s0 = end_slope(r_.data(), y_.data());
  std::vector<double> xr(r_.rbegin(), r_.rbegin() + 4), yr(y_.rbegin(), y_.rbegin() + 4);
  const double sn = end_slope(xr.data(), yr.data());

  // Clamped spline: tridiagonal system for the second derivatives.
  std::vector<double> a(n), b(n), c(n), d(n);
  const double h0 = r_[1] - r_[0];
  b[0] = h0 / 3.0;
  c[0] = h0 / 6.0;
  d[0] = (y_[1] - y_[0]) / h0 - s0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = r_[i] - r_[i - 1], hr = r_[i + 1] - r_[i];
    a[i] = hl / 6.0;
    b[i] = (hl + hr) / 3.0;
    c[i] = hr / 6.0;
    d[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
  }
  const double hn = r_[n - 1] - r_[n - 2];
  a[n - 1] = hn / 6.0;
  b[n - 1] = hn / 3.0;
  d[n - 1] = sn - (y_[n - 1] - y_[n - 2]) / hn;
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  m_.assign(n, 0.0);
  m_[n - 1] = d[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
}

std::shared_ptr<TabulatedCurve> TabulatedCurve::load(const std::filesystem::path& path, TailKind tail,
                                                     double asymptote) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve table: " + path.string());
  std::vector<double> r, y;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a)) continue;
    if (!(ss >> b))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    r.push_back(a);
    y.push_back(b);
  }
  try {
    return std::make_shared<TabulatedCurve>(std::move(r), std::move(y), tail, asymptote);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::size_t TabulatedCurve::interval(double r) const {
  auto it = std::upper_bound(r_.begin(), r_.end(), r);
  auto i = static_cast<std::size_t>(std::distance(r_.begin(), it));
  return std::clamp<std::size_t>(i, 1, r_.size() - 1) - 1;
}

double TabulatedCurve::operator()(double r) const {
  const double rl = r_.back();
  if (r > rl) {
    if (tail_ == TailKind::Linear) return y_.back() + derivative(rl) * (r - rl);
    return asymptote_ + (y_.back() - asymptote_) * std::pow(rl / r, 4);
  }
  const auto i = interval(r);
  const double h = r_[i + 1] - r_[i];
  const double A = (r_[i + 1] - r) / h, B = (r - r_[i]) / h;
  return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

double TabulatedCurve::derivative(double r) const {
  const double rl = r_.back();
  if (r > rl) {
    if (tail_ == TailKind::Linear) return derivative(rl);
    return -4.0 * (y_.back() - asymptote_) * std::pow(rl / r, 4) / r;
  }
  const auto i = interval(r);
  const double h = r_[i + 1] - r_[i];
  const double A = (r_[i + 1] - r) / h, B = (r - r_[i]) / h;
  return (y_[i + 1] - y_[i]) / h - (3 * A * A - 1) * h * m_[i] / 6.0 + (3 * B * B - 1) * h * m_[i + 1] / 6.0;
}

std::complex<double> TabulatedCurve::continued(std::complex<double> z, double anchor) const {
  if (z.imag() == 0.0) return (*this)(z.real());
  const double f0 = (*this)(anchor);
  if (tail_ == TailKind::Linear) return f0 + derivative(anchor) * (z - anchor);
  const auto ratio = anchor / z;
  return asymptote_ + (f0 - asymptote_) * (ratio * ratio) * (ratio * ratio);
}

std::uint64_t TabulatedCurve::fingerprint() const {
  auto h = fnv1a(r_.data(), r_.size() * sizeof(double));
  h = fnv1a(y_.data(), y_.size() * sizeof(double), h);
  const int tail = static_cast<int>(tail_);
  h = fnv1a(&tail, sizeof tail, h);
  return fnv1a(&asymptote_, sizeof asymptote_, h);
}

double AnalyticCurve::derivative(double r) const {
  constexpr double step = 1e-20;
  return f_({r, step}).imag() / step;
}

std::uint64_t AnalyticCurve::fingerprint() const { return fnv1a(description_); }

namespace {

std::string fmt_params(const char* name, std::initializer_list<double> p) {
  std::ostringstream ss;
  ss.precision(17);
  ss << name;
  for (double v : p) ss << ' ' << v;
  return ss.str();
}

}  // namespace

CurvePtr morse_curve(double depth, double a, double re) {
  if (!(depth > 0.0) || !(a > 0.0)) throw std::invalid_argument("morse: depth and range must be positive");
  return std::make_shared<AnalyticCurve>(fmt_params("morse", {depth, a, re}), [=](std::complex<double> z) {
    const auto x = 1.0 - std::exp(-a * (z - re));
    return depth * x * x - depth;
  });
}

CurvePtr exponential_curve(double amplitude, double b) {
  return std::make_shared<AnalyticCurve>(fmt_params("exponential", {amplitude, b}),
                                         [=](std::complex<double> z) { return amplitude * std::exp(-b * z); });
}

CurvePtr linear_curve(double c0, double c1) {
  return std::make_shared<AnalyticCurve>(fmt_params("linear", {c0, c1}),
                                         [=](std::complex<double> z) { return c0 + c1 * z; });
}

CurvePtr harmonic_curve(double k, double re) {
  return std::make_shared<AnalyticCurve>(fmt_params("harmonic", {k, re}), [=](std::complex<double> z) {
    const auto x = z - re;
    return 0.5 * k * x * x;
  });
}

}  // namespace floquet
