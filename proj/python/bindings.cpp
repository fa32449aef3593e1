#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "floquet/bound_states.hpp"
#include "floquet/continuation.hpp"
#include "floquet/ep_locator.hpp"
#include "floquet/floquet.hpp"
#include "floquet/io.hpp"
#include "floquet/loop_engine.hpp"
#include "floquet/molecule.hpp"
#include "floquet/strategies.hpp"

namespace py = pybind11;
using namespace floquet;

namespace {

std::vector<double> level_energies(const LevelSet& s) {
  std::vector<double> out;
  for (const auto& l : s.levels) out.push_back(l.energy);
  return out;
}

py::dict ep_dict(const EPRecord& r) {
  py::dict d;
  d["v_low"] = r.v_low;
  d["v_high"] = r.v_high;
  d["v_plus"] = r.v_plus;
  d["lambda_nm"] = r.lambda_nm;
  d["intensity_1e13"] = r.intensity;
  d["energy"] = r.energy;
  d["gap_residual"] = r.gap_residual;
  d["method"] = r.method;
  d["valid"] = r.valid;
  d["note"] = r.note;
  return d;
}

py::dict trajectory_dict(const Trajectory& t) {
  std::vector<double> phi, time, lam, inten, p;
  std::vector<cplx> e;
  std::vector<std::string> ch;
  for (const auto& s : t.samples) {
    phi.push_back(s.phi);
    time.push_back(s.t_fs);
    lam.push_back(s.lambda_nm);
    inten.push_back(s.intensity);
    e.push_back(s.energy);
    ch.push_back(to_string(s.character));
  }
  py::dict d;
  d["phi"] = phi;
  d["t_fs"] = time;
  d["lambda_nm"] = lam;
  d["intensity_1e13"] = inten;
  d["energy"] = e;
  d["character"] = ch;
  d["p_nd"] = t.p_nd;
  d["v_start"] = t.v_start;
  d["v_end"] = t.v_end;
  d["complete"] = t.complete;
  d["error"] = t.error;
  d["warnings"] = t.warnings;
  d["handedness"] = t.spec.handedness();
  return d;
}

}  // namespace

PYBIND11_MODULE(_floquet, m) {
  m.doc() = "Floquet resonances of two-state diatomics, exceptional points and adiabatic loops";

  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<ContinuationError>(m, "ContinuationError", PyExc_RuntimeError);

  m.attr("HARTREE_TO_CM1") = units::kHartreeToInvCm;
  m.attr("FS_TO_AU") = units::kFemtosecondAu;
  m.def("photon_energy", [](double lambda_nm) { return FieldPoint(lambda_nm, 0.0).omega(); }, py::arg("lambda_nm"),
        "hbar omega in hartree");
  m.def("field_amplitude", [](double intensity_wcm2) { return FieldPoint(800.0, intensity_wcm2).e0(); },
        py::arg("intensity_wcm2"), "E0 in atomic units");

  py::class_<RadialGrid>(m, "RadialGrid")
      .def(py::init<>())
      .def(py::init([](double r_min, double r_max, int n_points, double ecs_radius, double ecs_angle) {
             RadialGrid g{r_min, r_max, n_points, ecs_radius, ecs_angle};
             g.validate();
             return g;
           }),
           py::arg("r_min") = 0.5, py::arg("r_max") = 25.0, py::arg("n_points") = 3001, py::arg("ecs_radius") = 15.0,
           py::arg("ecs_angle") = 0.3)
      .def_readwrite("r_min", &RadialGrid::r_min)
      .def_readwrite("r_max", &RadialGrid::r_max)
      .def_readwrite("n_points", &RadialGrid::n_points)
      .def_readwrite("ecs_radius", &RadialGrid::ecs_radius)
      .def_readwrite("ecs_angle", &RadialGrid::ecs_angle)
      .def("validate", &RadialGrid::validate)
      .def("refined", &RadialGrid::refined)
      .def("__repr__", [](const RadialGrid& g) { return "RadialGrid(" + io::to_json(g).dump() + ")"; });

  py::class_<MoleculeModel>(m, "MoleculeModel")
      .def_readonly("name", &MoleculeModel::name)
      .def_readonly("reduced_mass", &MoleculeModel::reduced_mass)
      .def("vg", [](const MoleculeModel& mm, double r) { return (*mm.vg)(r); }, py::arg("r"))
      .def("vu", [](const MoleculeModel& mm, double r) { return (*mm.vu)(r); }, py::arg("r"))
      .def("dipole", [](const MoleculeModel& mm, double r) { return (*mm.dipole)(r); }, py::arg("r"))
      .def("equilibrium", &MoleculeModel::equilibrium, py::arg("r_lo") = 0.5, py::arg("r_hi") = 25.0)
      .def("fingerprint", [](const MoleculeModel& mm) { return io::hex(mm.fingerprint()); });

  m.def("load_molecule", &load_molecule, py::arg("descriptor") = "h2plus",
        "Bundled name (h2plus, h2plus-morse) or a key = value descriptor file");
  m.def(
      "adiabatic_potentials",
      [](const MoleculeModel& mm, double lambda_nm, double intensity_1e13, double r) {
        const auto p = adiabatic_potentials(mm, FieldPoint::in_1e13(lambda_nm, intensity_1e13), r);
        return std::make_pair(p.v_plus, p.v_minus);
      },
      py::arg("model"), py::arg("lambda_nm"), py::arg("intensity_1e13"), py::arg("r"));
  m.def(
      "field_free_levels",
      [](const MoleculeModel& mm, int v_max, const RadialGrid& g, int richardson) {
        return level_energies(field_free_levels(mm, v_max, g, {richardson, 1e-13}));
      },
      py::arg("model"), py::arg("v_max") = 16, py::arg("grid") = RadialGrid{}, py::arg("richardson") = 2,
      "Bound vibrational energies (hartree) of the ground curve");
  m.def(
      "adiabatic_levels",
      [](const MoleculeModel& mm, double lambda_nm, int vplus_max, const RadialGrid& g, double intensity_wcm2) {
        return level_energies(adiabatic_levels(mm, FieldPoint(lambda_nm, intensity_wcm2), vplus_max, g, {1, 1e-11}));
      },
      py::arg("model"), py::arg("lambda_nm"), py::arg("vplus_max") = 4, py::arg("grid") = RadialGrid{},
      py::arg("intensity_wcm2") = 1e3);

  py::class_<SystemFamily>(m, "SystemFamily")
      .def(py::init<const MoleculeModel&, const RadialGrid&, int>(), py::arg("model"), py::arg("grid") = RadialGrid{},
           py::arg("n_blocks") = 2)
      .def("resonance",
           [](const SystemFamily& f, double lambda_nm, double intensity_1e13, cplx guess) {
             return find_resonance(f.at(FieldPoint::in_1e13(lambda_nm, intensity_1e13)), guess).energy;
           },
           py::arg("lambda_nm"), py::arg("intensity_1e13"), py::arg("guess"),
           "Complex quasienergy E_R - i Gamma/2 (hartree) nearest the guess")
      .def("continue_branch",
           [](const SystemFamily& f, double lambda_nm, double i_from, double i_to, int steps, cplx start) {
             auto at = [&](double s) { return f.at(FieldPoint::in_1e13(lambda_nm, s)); };
             const auto t = track_branch(at, i_from, i_to, steps, start);
             std::vector<double> s;
             std::vector<cplx> e;
             for (const auto& p : t.points) s.push_back(p.s), e.push_back(p.energy);
             py::dict d;
             d["intensity_1e13"] = s;
             d["energy"] = e;
             d["complete"] = t.complete;
             d["error"] = t.error;
             return d;
           },
           py::arg("lambda_nm"), py::arg("i_from"), py::arg("i_to"), py::arg("steps"), py::arg("start"))
      .def("classify",
           [](const SystemFamily& f, double lambda_nm, double intensity_1e13, cplx energy) {
             Resonance r;
             r.energy = energy;
             return std::string(to_string(classify_resonance(f, lambda_nm, r, intensity_1e13 * 1e13, 1e10)));
           },
           py::arg("lambda_nm"), py::arg("intensity_1e13"), py::arg("energy"));

  m.def(
      "approximate_eps",
      [](const MoleculeModel& mm, int v_min, int v_max, int vplus_max, double lo, double hi, const RadialGrid& g) {
        py::list out;
        for (const auto& c : approximate_eps(mm, v_min, v_max, vplus_max, lo, hi, g)) {
          py::dict d;
          d["v"] = c.v;
          d["v_partner"] = c.v_partner;
          d["v_plus"] = c.v_plus;
          d["lambda_nm"] = c.lambda_guess;
          d["crossing_radius"] = c.crossing_radius;
          out.append(d);
        }
        return out;
      },
      py::arg("model"), py::arg("v_min"), py::arg("v_max"), py::arg("vplus_max"), py::arg("lambda_min"),
      py::arg("lambda_max"), py::arg("grid") = RadialGrid{});
  m.def(
      "refine_ep",
      [](const SystemFamily& f, int v, int v_plus, double lambda_guess) {
        const auto levels = field_free_levels(f.model(), v + 1, f.grid(), {2, 1e-13});
        EPCandidate c{v, v + 1, v_plus, lambda_guess, 0.0};
        return ep_dict(refine_ep(f, levels, c));
      },
      py::arg("family"), py::arg("v"), py::arg("v_plus"), py::arg("lambda_guess"));
  m.def(
      "solve_ep",
      [](const std::function<cplx(double, double)>& gap_sq, double l0, double i0) {
        const auto r = solve_ep(gap_sq, l0, i0);
        return py::make_tuple(r.lambda_nm, r.intensity, r.converged, r.method);
      },
      py::arg("gap_sq"), py::arg("lambda0"), py::arg("intensity0"),
      "Locate a zero of a squared eigenvalue gap in (wavelength, intensity)");

  py::class_<LoopSpec>(m, "LoopSpec")
      .def(py::init([](double lambda0, double d_lambda, double i_max, double t_f, int n_steps, bool reversed) {
             LoopSpec s{lambda0, d_lambda, i_max, t_f, n_steps, reversed};
             s.validate();
             return s;
           }),
           py::arg("lambda0") = 575.0, py::arg("d_lambda") = 5.0, py::arg("i_max") = 0.30, py::arg("t_f") = 30.0,
           py::arg("n_steps") = 400, py::arg("reversed") = false)
      .def_readwrite("lambda0", &LoopSpec::lambda0)
      .def_readwrite("d_lambda", &LoopSpec::d_lambda)
      .def_readwrite("i_max", &LoopSpec::i_max)
      .def_readwrite("t_f", &LoopSpec::t_f)
      .def_readwrite("n_steps", &LoopSpec::n_steps)
      .def_readwrite("reversed", &LoopSpec::reversed)
      .def("handedness", &LoopSpec::handedness)
      .def("contour",
           [](const LoopSpec& s) {
             std::vector<std::pair<double, double>> out;
             for (const auto& p : make_loop(s)) out.emplace_back(p.lambda_nm, p.intensity);
             return out;
           })
      .def("winding_number", [](const LoopSpec& s, double l, double i) { return winding_number(make_loop(s), l, i); },
           py::arg("lambda_nm"), py::arg("intensity_1e13"));

  m.def(
      "follow_loop",
      [](const SystemFamily& f, const LoopSpec& spec, int v_start, bool classify) {
        const auto levels = field_free_levels(f.model(), 20, f.grid(), {2, 1e-13});
        FollowOptions o;
        o.classify_samples = classify;
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = follow_resonance(f, levels, spec, v_start, o);
        }
        return trajectory_dict(t);
      },
      py::arg("family"), py::arg("spec"), py::arg("v_start"), py::arg("classify") = false,
      "Continue the resonance born from level v_start around the loop; returns samples and P_ND");
  m.def("survival_series", &survival_series, py::arg("t_fs"), py::arg("width_hartree"),
        "P(t) = exp(-int Gamma dt) by the trapezoid rule");
}
