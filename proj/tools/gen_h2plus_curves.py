#!/usr/bin/env python3
"""Generate the bundled H2+ 1s sigma_g / 2p sigma_u Born-Oppenheimer tables.

The one-electron two-centre problem separates in prolate spheroidal
coordinates (xi, eta).  For fixed R and p = R * sqrt(-E_el / 2) the angular
and radial equations are each linear eigenproblems in the separation constant;
the electronic energy is the p at which both constants agree.  The angular
part uses a normalised Legendre basis, the radial part a Laguerre basis in
2 p (xi - 1).  The transition dipole <g|z|u> is integrated by Gauss
quadrature from the same expansions.

Writes three two-column files (R in bohr, value in atomic units):
  vg.dat  V_g(R) + 1/2      (relative to the H(1s) + H+ limit)
  vu.dat  V_u(R) + 1/2
  mu.dat  transition dipole
"""
import argparse
import os

import numpy as np
from scipy import linalg, optimize, special

N_LEGENDRE = 50
N_LAGUERRE = 50


def eta_matrix(nmax):
    l = np.arange(1, nmax)
    off = l / np.sqrt((2 * l - 1) * (2 * l + 1))
    return np.diag(off, 1) + np.diag(off, -1)


_J = eta_matrix(2 * N_LEGENDRE + 4)
_J2 = (_J @ _J)[: 2 * N_LEGENDRE, : 2 * N_LEGENDRE]


def angular(p, parity):
    ls = np.arange(parity, 2 * N_LEGENDRE, 2)
    b = np.diag(ls * (ls + 1.0)) - p * p * _J2[np.ix_(ls, ls)]
    w, v = linalg.eigh(b)
    return w[0], ls, v[:, 0]


_xl, _wl = special.roots_laguerre(N_LAGUERRE + 8)


def _laguerre_table(x, kmax):
    val = np.array([special.eval_laguerre(k, x) for k in range(kmax)])
    der = np.zeros_like(val)
    for k in range(1, kmax):
        der[k] = -special.eval_genlaguerre(k - 1, 1, x)
    return val, der


_LV, _LD = _laguerre_table(_xl, N_LAGUERRE)


def radial(p, r):
    # basis chi_k(t) = exp(-p t) L_k(2 p t), t = xi - 1, quadrature in x = 2 p t
    t = _xl / (2 * p)
    w = _wl / (2 * p)
    chi = _LV
    dchi = -p * _LV + 2 * p * _LD
    s = (chi * w) @ chi.T
    q = 2 * r * (1 + t) - p * p * (1 + t) ** 2
    a = -(dchi * w * t * (t + 2)) @ dchi.T + (chi * w * q) @ chi.T
    lam, vec = linalg.eigh(a, s)
    return lam[-1], vec[:, -1]


def solve_state(r, parity, guess=None):
    def f(e):
        p = r * np.sqrt(-e / 2)
        return radial(p, r)[0] - angular(p, parity)[0]

    if guess is None:
        grid = np.linspace(-2.3, -0.05, 400)
    else:
        # continuation from the neighbouring R
        grid = np.linspace(guess - 0.02, min(guess + 0.02, -0.01), 9)
    vals = [f(e) for e in grid]
    roots = [
        (grid[i], grid[i + 1])
        for i in range(len(grid) - 1)
        if np.sign(vals[i]) != np.sign(vals[i + 1])
    ]
    if not roots:
        return solve_state(r, parity)
    lo, hi = roots[0]
    e = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return e


def wavefunction(r, e, parity):
    p = r * np.sqrt(-e / 2)
    _, ls, c = angular(p, parity)
    _, a = radial(p, r)
    return p, ls, c, a


def dipole(r, eg, eu):
    pg, lg, cg, ag = wavefunction(r, eg, 0)
    pu, lu, cu, au = wavefunction(r, eu, 1)
    eta, weta = special.roots_legendre(2 * N_LEGENDRE + 20)

    def ang(ls, c):
        return sum(ci * np.sqrt((2 * l + 1) / 2) * special.eval_legendre(l, eta) for l, ci in zip(ls, c))

    lam_g, lam_u = ang(lg, cg), ang(lu, cu)
    x, wx = special.roots_laguerre(2 * N_LAGUERRE + 20)

    def rad(p, a, s):
        # radial function on the common quadrature t = x / s, without exp
        t = x / s
        return sum(ak * special.eval_laguerre(k, 2 * p * t) for k, ak in enumerate(a)), t

    def norm(p, a, lam):
        mu, t = rad(p, a, 2 * p)
        xi = 1 + t
        wt = wx / (2 * p)
        # integrand M^2 Lambda^2 (xi^2 - eta^2)
        i_xi2 = np.sum(wt * mu ** 2 * xi ** 2) * np.sum(weta * lam ** 2)
        i_eta2 = np.sum(wt * mu ** 2) * np.sum(weta * lam ** 2 * eta ** 2)
        return (r / 2) ** 3 * (i_xi2 - i_eta2)

    ng = norm(pg, ag, lam_g)
    nu = norm(pu, au, lam_u)
    s = pg + pu
    mg, t = rad(pg, ag, s)
    mu_, _ = rad(pu, au, s)
    xi = 1 + t
    wt = wx / s
    rad_prod = mg * mu_
    i1 = np.sum(wt * rad_prod * xi ** 3) * np.sum(weta * lam_g * lam_u * eta)
    i2 = np.sum(wt * rad_prod * xi) * np.sum(weta * lam_g * lam_u * eta ** 3)
    d = (r / 2) ** 4 * (i1 - i2) / np.sqrt(ng * nu)
    return abs(d)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "h2plus"))
    ap.add_argument("--rmin", type=float, default=0.40)
    ap.add_argument("--rmax", type=float, default=30.0)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--check", action="store_true", help="print reference values and exit")
    args = ap.parse_args()

    if args.check:
        for r in (1.0, 2.0, 4.0, 10.0, 20.0):
            eg = solve_state(r, 0)
            eu = solve_state(r, 1)
            print(f"R={r:5.1f}  E_g={eg:.13f}  E_u={eu:.13f}  mu={dipole(r, eg, eu):.10f}  R/2={r/2}")
        return

    os.makedirs(args.out, exist_ok=True)
    n = int(round((args.rmax - args.rmin) / args.step)) + 1
    rs = args.rmin + args.step * np.arange(n)
    rows = []
    eg = eu = None
    for r in rs:
        eg = solve_state(r, 0, eg)
        eu = solve_state(r, 1, eu)
        rows.append((r, eg + 1 / r + 0.5, eu + 1 / r + 0.5, dipole(r, eg, eu)))
    rows = np.array(rows)
    header = "H2+ {} Born-Oppenheimer data; R [bohr], {}"
    np.savetxt(os.path.join(args.out, "vg.dat"), rows[:, [0, 1]], fmt="%.2f %.15e",
               header=header.format("1s sigma_g", "V + 1/2 [hartree]"))
    np.savetxt(os.path.join(args.out, "vu.dat"), rows[:, [0, 2]], fmt="%.2f %.15e",
               header=header.format("2p sigma_u", "V + 1/2 [hartree]"))
    np.savetxt(os.path.join(args.out, "mu.dat"), rows[:, [0, 3]], fmt="%.2f %.15e",
               header=header.format("g-u transition dipole", "mu [a.u.]"))


if __name__ == "__main__":
    main()
