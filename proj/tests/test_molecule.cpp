#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "floquet/molecule.hpp"

using namespace floquet;

TEST_CASE("field point unit conversions") {
  const FieldPoint f(800.0, 3.50944e16);
  CHECK(f.omega() == doctest::Approx(45.56335 / 800.0).epsilon(1e-15));
  CHECK(f.e0() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(FieldPoint::in_1e13(575.0, 0.261).intensity == doctest::Approx(2.61e12).epsilon(1e-15));
  CHECK_THROWS_AS(FieldPoint(-1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(FieldPoint(800.0, -1.0), std::invalid_argument);
}

TEST_CASE("radial grid invariants") {
  RadialGrid g;
  CHECK_NOTHROW(g.validate());
  CHECK(g.step() == doctest::Approx(24.5 / 3000.0));
  const auto r = g.refined();
  CHECK(r.step() == doctest::Approx(0.5 * g.step()).epsilon(1e-14));
  CHECK(r.r_max == g.r_max);

  auto bad = g;
  bad.ecs_radius = 30.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.n_points = 499;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.ecs_angle = 0.8;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.ecs_angle = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("bundled models load and satisfy their invariants") {
  for (const char* name : {"h2plus", "h2plus-morse"}) {
    CAPTURE(name);
    const auto m = load_molecule(name);
    CHECK_NOTHROW(m.validate(0.5, 25.0));
    CHECK(m.reduced_mass == doctest::Approx(918.07635).epsilon(1e-6));
    // Ground minimum near 2 bohr, both curves tend to the common limit.
    CHECK(m.equilibrium(0.5, 25.0) == doctest::Approx(2.0).epsilon(0.01));
    CHECK(std::abs((*m.vg)(25.0)) < 1e-4);
    CHECK(std::abs((*m.vu)(25.0)) < 1e-4);
  }
  // Exact Born-Oppenheimer 1s sigma_g well depth relative to H(1s) + H+.
  const auto h2 = load_molecule("h2plus");
  CHECK((*h2.vg)(2.0) == doctest::Approx(-0.1026342144950).epsilon(1e-9));
}

TEST_CASE("model fingerprint identifies the content") {
  const auto a = load_molecule("h2plus");
  const auto b = load_molecule("h2plus");
  const auto c = load_molecule("h2plus-morse");
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("model validation rejects broken curves") {
  AnalyticModelParams p;
  auto m = make_analytic_model(p);
  CHECK_NOTHROW(m.validate(0.5, 25.0));

  auto no_mass = m;
  no_mass.reduced_mass = 0.0;
  CHECK_THROWS_AS(no_mass.validate(0.5, 25.0), std::invalid_argument);

  auto bound_u = m;
  bound_u.vu = morse_curve(0.05, 0.7, 3.0);
  CHECK_THROWS_AS(bound_u.validate(0.5, 25.0), std::invalid_argument);

  auto shifted = m;
  shifted.vu = exponential_curve(1.2, 0.71);
  shifted.vg = morse_curve(0.1, 0.72, 2.0);
  CHECK_NOTHROW(shifted.validate(0.5, 25.0));

  auto negative_dipole = m;
  negative_dipole.dipole = linear_curve(-1.0, 0.0);
  CHECK_THROWS_AS(negative_dipole.validate(0.5, 25.0), std::invalid_argument);
}

TEST_CASE("model descriptor files") {
  const auto dir = std::filesystem::temp_directory_path() / "floquet_model_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "morse.model");
    f << "# analytic test model\nname = test\nvg = morse 0.1026 0.72 2.0\nvu = exponential 1.2 0.71\n"
         "dipole = linear 0 0.5\nreduced_mass = 918.07635\n";
  }
  const auto m = load_molecule((dir / "morse.model").string());
  CHECK(m.name == "test");
  CHECK((*m.vg)(2.0) == doctest::Approx(-0.1026).epsilon(1e-14));
  CHECK((*m.dipole)(3.0) == doctest::Approx(1.5));

  {
    std::ofstream f(dir / "broken.model");
    f << "name = x\nvg = morse 0.1 0.7\n";
  }
  CHECK_THROWS_AS(load_molecule((dir / "broken.model").string()), std::invalid_argument);
  {
    std::ofstream f(dir / "missing.model");
    f << "name = x\nvg = table nowhere.dat\nvu = exponential 1 1\ndipole = linear 0 0.5\nreduced_mass = 1\n";
  }
  CHECK_THROWS(load_molecule((dir / "missing.model").string()));
  CHECK_THROWS(load_molecule((dir / "does-not-exist.model").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("dressed potentials") {
  const auto m = load_molecule("h2plus");
  const FieldPoint f = FieldPoint::in_1e13(634.55, 0.2);
  const double r = 3.3;
  CHECK(dressed_diabatic(m, f, {Electronic::u, -1}, r) == doctest::Approx((*m.vu)(r) - f.omega()).epsilon(1e-15));
  CHECK(dressed_diabatic(m, f, {Electronic::g, 2}, r) == doctest::Approx((*m.vg)(r) + 2 * f.omega()).epsilon(1e-15));
  CHECK_THROWS_AS(dressed_diabatic(m, f, {Electronic::g, 0}, -1.0), std::out_of_range);

  SUBCASE("adiabatic pair equals the eigenvalues of the 2x2 dressed matrix") {
    for (double x : {1.0, 2.0, 3.3, 6.0, 12.0}) {
      const double a = (*m.vg)(x), d = (*m.vu)(x) - f.omega(), c = -0.5 * f.e0() * (*m.dipole)(x);
      // Closed form via trace and determinant.
      const double tr = a + d, det = a * d - c * c;
      const double disc = std::sqrt(tr * tr / 4.0 - det);
      const auto p = adiabatic_potentials(m, f, x);
      CHECK(p.v_plus == doctest::Approx(tr / 2 + disc).epsilon(1e-12));
      CHECK(p.v_minus == doctest::Approx(tr / 2 - disc).epsilon(1e-12));
      CHECK(p.v_plus >= p.v_minus);
    }
  }
  SUBCASE("zero field leaves the diabatic curves") {
    const FieldPoint z(634.55, 0.0);
    const auto p = adiabatic_potentials(m, z, 3.3);
    const double a = (*m.vg)(3.3), d = (*m.vu)(3.3) - z.omega();
    CHECK(p.v_plus == doctest::Approx(std::max(a, d)));
    CHECK(p.v_minus == doctest::Approx(std::min(a, d)));
  }
}

TEST_CASE("diabatic crossing lies outside the equilibrium and moves out with wavelength") {
  const auto m = load_molecule("h2plus");
  const double re = m.equilibrium(0.5, 25.0);
  double prev = 0.0;
  for (double lam : {450.0, 600.0, 800.0}) {
    const double omega = 45.56335 / lam;
    const double rx = diabatic_crossing(m, omega, 0.5, 25.0);
    REQUIRE(std::isfinite(rx));
    CHECK(rx > re);
    CHECK((*m.vg)(rx) == doctest::Approx((*m.vu)(rx) - omega).epsilon(1e-9));
    CHECK(rx > prev);
    prev = rx;
  }
  // A photon larger than Vu - Vg at equilibrium gives no c+ crossing.
  CHECK(std::isnan(diabatic_crossing(m, 2.0, 0.5, 25.0)));
}
