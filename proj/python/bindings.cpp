#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "maglorentz/config.hpp"
#include "maglorentz/experiments.hpp"
#include "maglorentz/kinetic.hpp"
#include "maglorentz/medium.hpp"
#include "maglorentz/scattering.hpp"

namespace py = pybind11;
using namespace mlg;

namespace {

FieldParams field_arg(double B, int orientation) { return FieldParams{B, orientation}; }

}  // namespace

PYBIND11_MODULE(_maglorentz, m) {
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("load", &Config::load)
        .def_static("parse", &Config::parse)
        .def("set", &Config::set)
        .def("get", &Config::str)
        .def("validate", &Config::validate)
        .def("manifest", &Config::manifest)
        .def("keys", &Config::keys);

    py::class_<FieldParams>(m, "Field")
        .def(py::init(&field_arg), py::arg("B") = 1.0, py::arg("orientation") = 1)
        .def_readwrite("B", &FieldParams::B)
        .def_readwrite("orientation", &FieldParams::orientation)
        .def_property_readonly("R_L", &FieldParams::R_L)
        .def_property_readonly("T_L", &FieldParams::T_L);

    py::class_<PotentialSpec>(m, "Potential")
        .def_static("hard_disk", &PotentialSpec::hard_disk, py::arg("eps"))
        .def_static("smooth", [](double eps, double alpha) { return PotentialSpec::smooth(eps, alpha); },
                    py::arg("eps"), py::arg("alpha"))
        .def_static("truncated", &PotentialSpec::truncated, py::arg("eps"), py::arg("s"), py::arg("gamma"))
        .def_static("inverse_power", &PotentialSpec::inverse_power, py::arg("s"))
        .def_property_readonly("radius", &PotentialSpec::radius)
        .def_property_readonly("coupling", &PotentialSpec::coupling)
        .def("__repr__", &PotentialSpec::describe);

    m.def("hard_disk_angle", &hard_disk_angle, py::arg("rho"));
    m.def("angle_no_field", &angle_no_field, py::arg("rho"), py::arg("potential"));
    m.def("angle_with_field", &angle_with_field, py::arg("rho"), py::arg("potential"), py::arg("field"));
    m.def("collision_time", &collision_time, py::arg("rho"), py::arg("potential"), py::arg("field"));

    py::class_<ScatteringTable>(m, "ScatteringTable")
        .def_readonly("rho", &ScatteringTable::rho)
        .def_readonly("theta", &ScatteringTable::theta)
        .def("theta_at", &ScatteringTable::theta_at)
        .def("dtheta_drho", [](const ScatteringTable &t) {
            std::vector<double> d(t.size());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = t.dtheta_drho(i);
            return d;
        })
        .def("gamma", &ScatteringTable::gamma)
        .def("fourier_integral", &ScatteringTable::fourier_integral)
        .def("__len__", &ScatteringTable::size);
    m.def("cross_section", &cross_section, py::arg("potential"), py::arg("field"), py::arg("nodes") = 4097,
          py::arg("rho_max") = 0.0);

    py::class_<ScalingRegime>(m, "Regime")
        .def(py::init([](const std::string &kind, double mu, double eps, double alpha, double gamma, double s) {
                 ScalingRegime r;
                 r.kind = parse_regime(kind);
                 r.mu = mu;
                 r.eps = eps;
                 r.alpha = alpha;
                 r.gamma = gamma;
                 r.s = s;
                 r.validate();
                 return r;
             }),
             py::arg("kind"), py::arg("mu"), py::arg("eps"), py::arg("alpha") = 0.1, py::arg("gamma") = 0.9,
             py::arg("s") = 3.0)
        .def_property_readonly("intensity", &ScalingRegime::intensity)
        .def_property_readonly("obstacle_radius", &ScalingRegime::obstacle_radius)
        .def("potential", &ScalingRegime::potential);

    py::class_<SurvivalEstimate>(m, "SurvivalEstimate")
        .def_readonly("estimate", &SurvivalEstimate::estimate)
        .def_readonly("stderr", &SurvivalEstimate::stderr_)
        .def_readonly("samples", &SurvivalEstimate::samples)
        .def_readonly("closed_form_annulus", &SurvivalEstimate::closed_form_annulus);
    m.def("survival_probability", &survival_probability_full_orbit, py::arg("regime"), py::arg("field"),
          py::arg("samples"), py::arg("seed"), py::arg("workers") = 1);

    py::class_<CollisionKernel>(m, "Kernel")
        .def_readonly("id", &CollisionKernel::id)
        .def_readonly("nphi", &CollisionKernel::nphi)
        .def_readonly("multipliers", &CollisionKernel::lambda);
    m.def("landau_kernel", &landau_kernel, py::arg("xi"), py::arg("nphi"));
    m.def("hard_disk_kernel", &hard_disk_kernel, py::arg("mu"), py::arg("nphi"));
    m.def("boltzmann_kernel", &boltzmann_kernel, py::arg("regime"), py::arg("field"), py::arg("nphi"),
          py::arg("nodes") = 4097);
    m.def(
        "gbe_kernel",
        [](double mu, const FieldParams &field, int nphi, const std::string &fg) {
            GbeOptions o;
            o.fg = parse_fg_mode(fg);
            return gbe_kernel(mu, field, nphi, o);
        },
        py::arg("mu"), py::arg("field"), py::arg("nphi"), py::arg("fg_mode") = "memory_reads");

    // homogeneous solve: values on the angular grid in, values at t_end out
    m.def(
        "solve",
        [](const std::vector<double> &f0, const CollisionKernel &kernel, const FieldParams &field, double t_end,
           double dt) {
            AngularField f = AngularField::homogeneous_field(static_cast<int>(f0.size()), [](double) { return 0.0; });
            f.values = f0;
            py::gil_scoped_release nogil;
            return solve(f, kernel, field, t_end, dt).final_field.values;
        },
        py::arg("f0"), py::arg("kernel"), py::arg("field"), py::arg("t_end"), py::arg("dt"));

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("ok", &RunReport::ok)
        .def_readonly("files", &RunReport::files)
        .def_readonly("failures", &RunReport::failures);
    m.def(
        "run_experiment",
        [](const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
            py::gil_scoped_release nogil;
            return run_experiment(cfg, out, workers, seed);
        },
        py::arg("config"), py::arg("out"), py::arg("workers") = 1, py::arg("seed") = 1);
}
