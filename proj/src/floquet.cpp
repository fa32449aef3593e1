#include "floquet/floquet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace floquet {

const char* to_string(Character c) {
  switch (c) {
    case Character::Feshbach:
      return "Feshbach";
    case Character::Shape:
      return "Shape";
    default:
      return "Unclassified";
  }
}

Discretization::Discretization(MoleculeModel model, RadialGrid grid) : model_(std::move(model)), grid_(grid) {
  grid_.validate();
  const int n = grid_.n_points;
  const double r0 = grid_.ecs_radius;
  const cplx rot = std::polar(1.0, grid_.ecs_angle);
  z_.resize(static_cast<std::size_t>(n));
  vg_.resize(z_.size());
  vu_.resize(z_.size());
  mu_.resize(z_.size());
  for (int i = 0; i < n; ++i) {
    const double r = grid_.point(i);
    const auto k = static_cast<std::size_t>(i);
    if (r <= r0) {
      z_[k] = r;
      vg_[k] = (*model_.vg)(r);
      vu_[k] = (*model_.vu)(r);
      mu_[k] = (*model_.dipole)(r);
    } else {
      z_[k] = r0 + (r - r0) * rot;
      vg_[k] = model_.vg->continued(z_[k], r0);
      vu_[k] = model_.vu->continued(z_[k], r0);
      mu_[k] = model_.dipole->continued(z_[k], r0);
    }
  }
  rows_.resize(z_.size());
  for (std::size_t i = 1; i + 1 < z_.size(); ++i) {
    const cplx a = z_[i] - z_[i - 1], b = z_[i + 1] - z_[i];
    const cplx c1 = a * (b * b * b + 2.0 * a * b * b - a * a * a) / (12.0 * (a + b));
    const cplx c2 = b * (a * a * a + 2.0 * a * a * b - b * b * b) / (12.0 * (a + b));
    const cplx c0 = a * b * (a + b) / 2.0 - c1 - c2;
    const cplx s = (a + b) / 2.0;
    rows_[i] = {a / s, b / s, c1 / s, c0 / s, c2 / s};
  }
  const double re = model_.equilibrium(grid_.r_min, std::min(grid_.r_max, r0));
  equilibrium_index_ = static_cast<int>(std::lround((re - grid_.r_min) / grid_.step()));
}

std::vector<PhotonBlock> floquet_blocks(int n_blocks) {
  if (n_blocks < 2 || n_blocks % 2 != 0)
    throw std::invalid_argument("floquet: n_blocks must be even and at least 2");
  std::vector<PhotonBlock> blocks;
  for (int n = n_blocks / 2 - 1; n >= -n_blocks / 2; --n)
    blocks.push_back({n % 2 == 0 ? Electronic::g : Electronic::u, n});
  return blocks;
}

CoupledSystem::CoupledSystem(std::shared_ptr<const Discretization> disc, FieldPoint field, int n_blocks)
    : disc_(std::move(disc)), field_(field), blocks_(floquet_blocks(n_blocks)) {
  const int n = disc_->size();
  const auto nc = static_cast<std::size_t>(n_blocks);
  const double two_m = 2.0 * disc_->model().reduced_mass;
  potential_.assign(static_cast<std::size_t>(n) * nc * nc, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto m = potential_matrix(i);
    auto* out = potential_.data() + static_cast<std::size_t>(i) * nc * nc;
    for (std::size_t k = 0; k < nc * nc; ++k) out[k] = two_m * m[k];
  }
}

std::vector<cplx> CoupledSystem::potential_matrix(int i) const {
  const auto nc = blocks_.size();
  std::vector<cplx> m(nc * nc, 0.0);
  const double omega = field_.omega();
  const cplx coupling = -0.5 * field_.e0() * disc_->dipole(i);
  for (std::size_t k = 0; k < nc; ++k) {
    const auto& blk = blocks_[k];
    m[k * nc + k] = (blk.state == Electronic::g ? disc_->vg(i) : disc_->vu(i)) + double(blk.photons) * omega;
    for (std::size_t l = 0; l < nc; ++l)
      if (std::abs(blocks_[l].photons - blk.photons) == 1 && blocks_[l].state != blk.state)
        m[l * nc + k] = coupling;
  }
  return m;
}

template <int Nc>
CoupledSystem::Evaluation CoupledSystem::propagate(cplx energy, bool with_derivative) const {
  using Mat = Eigen::Matrix<cplx, Nc, Nc>;
  const int nc = n_blocks();
  const int n = disc_->size();
  const int m = matching_index();
  if (m < 2 || m > n - 3) throw std::invalid_argument("floquet: matching point outside grid");
  const double two_m = 2.0 * reduced_mass();
  const Mat id = Mat::Identity(nc, nc);
  const auto ncc = static_cast<std::size_t>(nc * nc);

  auto g = [&](int i) -> Mat {
    Mat out = Eigen::Map<const Mat>(potential_.data() + static_cast<std::size_t>(i) * ncc, nc, nc);
    out.diagonal().array() -= two_m * energy;
    return out;
  };
  struct Coeffs {
    Mat p, d, q;     // multiply phi_{i+1}, phi_i, phi_{i-1}
    cplx dp, dd, dq;  // their energy derivatives (times identity)
  };
  auto coeffs = [&](int i, const Mat& g_prev, const Mat& g_cur, const Mat& g_next) -> Coeffs {
    const auto& r = disc_->row(i);
    return {r.a * id - r.c1 * g_next, -(r.a + r.b) * id - r.c0 * g_cur, r.b * id - r.c2 * g_prev,
            two_m * r.c1, two_m * r.c0, two_m * r.c2};
  };

  cplx log_der = 0.0;

  // Outward: phi_{i-1} = Q_i phi_i, phi_0 = 0.
  Mat q = Mat::Zero(nc, nc), dq = Mat::Zero(nc, nc);
  Mat g_prev = g(0), g_cur = g(1), g_next = g(2);
  for (int i = 1; i < m; ++i) {
    const auto c = coeffs(i, g_prev, g_cur, g_next);
    const Mat x = c.d + c.q * q;
    const Mat xinv = x.inverse();
    const Mat q_next = -xinv * c.p;
    if (with_derivative) {
      const Mat dx = c.dd * id + c.dq * q + c.q * dq;
      log_der += (xinv * dx).trace();
      dq = -xinv * (c.dp * id + dx * q_next);
    }
    q = q_next;
    g_prev = g_cur;
    g_cur = g_next;
    g_next = g(i + 2);
  }

  // Inward: phi_{i+1} = S_i phi_i, phi_{n-1} = 0.
  Mat s = Mat::Zero(nc, nc), ds = Mat::Zero(nc, nc);
  g_next = g(n - 1);
  g_cur = g(n - 2);
  g_prev = g(n - 3);
  for (int i = n - 2; i > m; --i) {
    const auto c = coeffs(i, g_prev, g_cur, g_next);
    const Mat y = c.p * s + c.d;
    const Mat yinv = y.inverse();
    const Mat s_next = -yinv * c.q;
    if (with_derivative) {
      const Mat dy = c.dp * s + c.p * ds + c.dd * id;
      log_der += (yinv * dy).trace();
      ds = -yinv * (c.dq * id + dy * s_next);
    }
    s = s_next;
    g_next = g_cur;
    g_cur = g_prev;
    g_prev = g(i - 2);
  }

  const auto c = coeffs(m, g(m - 1), g(m), g(m + 1));
  const Mat f = c.p * s + c.d + c.q * q;
  Evaluation ev{f.determinant(), 0.0};
  if (with_derivative) {
    const Mat df = c.dp * s + c.p * ds + c.dd * id + c.dq * q + c.q * dq;
    ev.log_derivative = log_der + (f.inverse() * df).trace();
  }
  return ev;
}

CoupledSystem::Evaluation CoupledSystem::evaluate(cplx energy, bool with_derivative) const {
  if (n_blocks() == 2) return propagate<2>(energy, with_derivative);
  return propagate<Eigen::Dynamic>(energy, with_derivative);
}

CoupledSystem build_system(const MoleculeModel& model, const FieldPoint& field, const RadialGrid& grid,
                           int n_blocks) {
  grid.validate();
  const auto blocks = floquet_blocks(n_blocks);
  // Highest local kinetic energy of any block below the ground dissociation limit.
  double t_max = 0.0;
  const int n = 400;
  for (int k = 0; k <= n; ++k) {
    const double r = grid.r_min + (std::min(grid.ecs_radius, grid.r_max) - grid.r_min) * k / n;
    const double coupling = 0.5 * field.e0() * std::abs((*model.dipole)(r));
    for (const auto& b : blocks) t_max = std::max(t_max, coupling - dressed_diabatic(model, field, b, r));
  }
  const double wavelength = 2.0 * std::numbers::pi / std::sqrt(2.0 * model.reduced_mass * std::max(t_max, 1e-6));
  if (grid.step() > wavelength / 10.0)
    throw std::invalid_argument("floquet: grid too coarse (step " + std::to_string(grid.step()) +
                                " bohr, local de Broglie wavelength " + std::to_string(wavelength) + " bohr)");
  auto disc = std::make_shared<const Discretization>(model, grid);
  return {disc, field, n_blocks};
}

cplx matching_determinant(const CoupledSystem& system, cplx energy) { return system.evaluate(energy, false).det; }

Resonance find_resonance(const CoupledSystem& system, cplx guess, const SolverOptions& options) {
  cplx e0 = guess, e1 = guess + cplx(options.initial_step, -options.initial_step);
  cplx f0 = matching_determinant(system, e0), f1 = matching_determinant(system, e1);
  for (int it = 1; it <= options.max_iterations; ++it) {
    if (f1 == f0) {
      if (f1 == 0.0) break;
      throw ConvergenceError("find_resonance: secant stalled");
    }
    cplx step = -f1 * (e1 - e0) / (f1 - f0);
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag()))
      throw ConvergenceError("find_resonance: non-finite secant step");
    if (std::abs(step) > options.max_step) step *= options.max_step / std::abs(step);
    e0 = e1;
    f0 = f1;
    e1 += step;
    f1 = matching_determinant(system, e1);
    if (std::abs(step) < options.tolerance) {
      if (e1.imag() > options.im_tolerance)
        throw ConvergenceError("find_resonance: converged to Im E > 0 (unphysical sheet)");
      Resonance r;
      r.energy = {e1.real(), std::min(e1.imag(), 0.0)};
      r.residual = std::abs(f1);
      r.iterations = it;
      return r;
    }
  }
  throw ConvergenceError("find_resonance: no convergence in " + std::to_string(options.max_iterations) +
                         " iterations");
}

RootMoments root_moments(const CoupledSystem& system, cplx center, double radius, int nodes) {
  RootMoments out;
  out.center = center;
  cplx m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const cplx x = std::polar(radius, 2.0 * std::numbers::pi * (k + 0.5) / nodes);
    const cplx w = x * system.evaluate(center + x, true).log_derivative;
    m0 += w;
    m1 += w * x;
    m2 += w * x * x;
  }
  out.count = m0.real() / nodes;
  out.sum = m1 / double(nodes);
  out.sum_sq = m2 / double(nodes);
  return out;
}

SystemFamily::SystemFamily(const MoleculeModel& model, const RadialGrid& grid, int n_blocks)
    : disc_(std::make_shared<const Discretization>(model, grid)), n_blocks_(n_blocks) {
  floquet_blocks(n_blocks);
}

Character classify_resonance(const SystemFamily& family, double wavelength_nm, const Resonance& res,
                             double intensity, double d_intensity, const SolverOptions& solver,
                             const ClassifyOptions& options) {
  const auto next = find_resonance(family.at(wavelength_nm, intensity + d_intensity), res.energy, solver);
  const double de = next.energy.real() - res.energy.real();
  const double dw = next.width() - res.width();
  if (de > options.noise && dw < -options.noise) return Character::Feshbach;
  if (de < -options.noise && dw > options.noise) return Character::Shape;
  return Character::Unclassified;
}

}  // namespace floquet
