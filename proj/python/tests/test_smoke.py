import cmath
import math

import pytest

import floquet as fq


@pytest.fixture(scope="module")
def model():
    return fq.load_molecule("h2plus")


@pytest.fixture(scope="module")
def family(model):
    return fq.SystemFamily(model, fq.RadialGrid(), 2)


def test_units():
    assert fq.photon_energy(45.56335) == pytest.approx(1.0)
    assert fq.field_amplitude(3.50944e16) == pytest.approx(1.0)


def test_grid_validation():
    g = fq.RadialGrid()
    assert g.n_points == 3001
    assert g.refined().n_points == 6001
    with pytest.raises(ValueError):
        fq.RadialGrid(n_points=100)


def test_levels(model):
    levels = fq.field_free_levels(model, 16, richardson=1)
    assert len(levels) == 17
    assert all(a < b < 0.0 for a, b in zip(levels, levels[1:]))
    assert model.vg(2.0) == pytest.approx(-0.1026342144950, abs=1e-10)
    vp, vm = fq.adiabatic_potentials(model, 600.0, 0.0, 3.0)
    assert vp >= vm


def test_weak_field_resonance(model, family):
    e12 = fq.field_free_levels(model, 12, richardson=1)[12]
    e = family.resonance(634.55, 1e-7, complex(e12, 0.0))
    assert abs(e.real - e12) < 1e-8
    assert -2.0 * e.imag >= 0.0


def test_toy_ep():
    # Squared gap of [[eps, g], [g, -eps]] with eps = 1e-3 (l - 600) - 1e-4 i, g = 5e-4 I.
    def gap_sq(lam, inten):
        eps = complex(1e-3 * (lam - 600.0), -1e-4)
        g = 5e-4 * inten
        return 4.0 * (eps * eps + g * g)

    lam, inten, ok, _ = fq.solve_ep(gap_sq, 601.0, 0.25)
    assert ok
    assert lam == pytest.approx(600.0, rel=1e-6)
    assert inten == pytest.approx(0.2, rel=1e-6)


def test_loop_geometry_and_survival():
    spec = fq.LoopSpec(600.0, 5.0, 0.3)
    assert spec.handedness() == 1
    assert spec.winding_number(600.0, 0.15) == 1
    assert spec.winding_number(620.0, 0.15) == 0
    t = [30.0 * k / 100 for k in range(101)]
    p = fq.survival_series(t, [1e-4] * 101)
    assert p[-1] == pytest.approx(math.exp(-1e-4 * 30.0 * fq.FS_TO_AU), rel=1e-12)
    with pytest.raises(ValueError):
        fq.LoopSpec(n_steps=10)


def test_zero_area_loop_is_identity(family):
    traj = fq.follow_loop(family, fq.LoopSpec(634.55, 5.0, 0.0, n_steps=100), 12)
    assert traj["complete"]
    assert traj["v_end"] == 12
    assert len(traj["p_nd"]) == 101
    assert cmath.isclose(traj["energy"][0], traj["energy"][-1], abs_tol=1e-10)
