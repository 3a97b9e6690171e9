/* Copyright 2026 The spintk Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "spintk/cli.hpp"
#include "spintk/dynamics.hpp"
#include "spintk/error.hpp"
#include "spintk/fit.hpp"
#include "spintk/odmr.hpp"
#include "spintk/spin_core.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace spintk;

namespace {

py::dict fit_to_dict(const FitResult& f) {
  py::dict values, errors;
  for (std::size_t j = 0; j < f.names.size(); ++j) {
    values[py::str(f.names[j])] = f.values[j];
    errors[py::str(f.names[j])] = j < f.uncertainties.size() ? f.uncertainties[j] : std::nan("");
  }
  py::dict out;
  out["values"] = values;
  out["uncertainties"] = errors;
  out["rss"] = f.rss;
  out["converged"] = f.converged;
  out["iterations"] = f.iterations;
  out["warnings"] = f.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_spintk, m) {
  m.doc() = "Spin Hamiltonian, ODMR, rate-model and fitting toolkit";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<HyperfineTensor>(m, "HyperfineTensor")
      .def(py::init<>())
      .def_static("isotropic", &HyperfineTensor::isotropic, py::arg("a_mhz"))
      .def_readwrite("xx", &HyperfineTensor::xx)
      .def_readwrite("yy", &HyperfineTensor::yy)
      .def_readwrite("zz", &HyperfineTensor::zz)
      .def_readwrite("xy", &HyperfineTensor::xy)
      .def_readwrite("xz", &HyperfineTensor::xz)
      .def_readwrite("yz", &HyperfineTensor::yz)
      .def("matrix", &HyperfineTensor::matrix);

  py::class_<SpinSystem>(m, "SpinSystem")
      .def(py::init<>())
      .def_static("with_isotropic_hyperfine", &SpinSystem::with_isotropic_hyperfine, py::arg("d_mhz"),
                  py::arg("e_mhz"), py::arg("a_mhz"))
      .def_readwrite("s_electron", &SpinSystem::s_electron)
      .def_readwrite("i_nuclear", &SpinSystem::i_nuclear)
      .def_readwrite("d_mhz", &SpinSystem::d_mhz)
      .def_readwrite("e_mhz", &SpinSystem::e_mhz)
      .def_readwrite("a_tensor_mhz", &SpinSystem::a_tensor_mhz)
      .def_readwrite("gamma_e_mhz_per_mt", &SpinSystem::gamma_e_mhz_per_mt)
      .def_readwrite("gamma_n_mhz_per_mt", &SpinSystem::gamma_n_mhz_per_mt)
      .def_readwrite("axis_polar_deg", &SpinSystem::axis_polar_deg)
      .def_readwrite("axis_azimuth_deg", &SpinSystem::axis_azimuth_deg)
      .def_readwrite("axis_roll_deg", &SpinSystem::axis_roll_deg)
      .def("dim", &SpinSystem::dim)
      .def("validate", &SpinSystem::validate)
      .def("warnings", &SpinSystem::warnings);

  py::class_<Family>(m, "Family")
      .def(py::init([](std::string name, SpinSystem system, double scale) {
             return Family{std::move(name), std::move(system), scale};
           }),
           py::arg("name"), py::arg("system"), py::arg("scale") = 1.0)
      .def_readwrite("name", &Family::name)
      .def_readwrite("system", &Family::system)
      .def_readwrite("scale", &Family::scale);
  m.def("preset_families", &preset_families);
  m.def("preset_family", &preset_family, py::arg("name"));

  m.def(
      "hamiltonian",
      [](const SpinSystem& sys, const Vec3& b_mt) { return build_hamiltonian(sys, FieldVector{b_mt}).mhz; },
      py::arg("system"), py::arg("b_mt") = Vec3::Zero().eval(), "Hamiltonian matrix in MHz.");
  m.def(
      "eigenvalues",
      [](const SpinSystem& sys, const Vec3& b_mt) {
        return Eigen::VectorXd(diagonalize(build_hamiltonian(sys, FieldVector{b_mt})).values);
      },
      py::arg("system"), py::arg("b_mt") = Vec3::Zero().eval(), "Ascending energy levels in MHz.");
  m.def(
      "degeneracy_census",
      [](const SpinSystem& sys, const Vec3& b_mt, double tol_mhz) {
        return degeneracy_census(diagonalize(build_hamiltonian(sys, FieldVector{b_mt})), tol_mhz);
      },
      py::arg("system"), py::arg("b_mt") = Vec3::Zero().eval(), py::arg("tol_mhz") = 1e-6);

  m.def(
      "transitions",
      [](const SpinSystem& sys, const Vec3& b_mt, const Vec3& drive_axis, bool unpolarized, double min_intensity) {
        DriveOptions d;
        d.axis = drive_axis;
        d.unpolarized = unpolarized;
        d.min_intensity = min_intensity;
        const EigenSolution eig = diagonalize(build_hamiltonian(sys, FieldVector{b_mt}));
        TransitionSet ts = transitions(eig, sys, d);
        label_transitions(ts, eig, sys);
        py::list out;
        for (const auto& t : ts)
          out.append(py::dict(py::arg("lower") = t.lower_index, py::arg("upper") = t.upper_index,
                              py::arg("freq_mhz") = t.freq_mhz, py::arg("intensity") = t.intensity,
                              py::arg("label") = t.label));
        return out;
      },
      py::arg("system"), py::arg("b_mt") = Vec3::Zero().eval(), py::arg("drive_axis") = Vec3::UnitX().eval(),
      py::arg("unpolarized") = false, py::arg("min_intensity") = 1e-4);

  m.def(
      "spectrum",
      [](const std::vector<Family>& families, const Vec3& b_mt, const std::vector<double>& grid_mhz, double fwhm_mhz,
         bool gaussian) {
        const LineShape shape{gaussian ? LineShapeKind::gaussian : LineShapeKind::lorentzian, fwhm_mhz};
        return spectrum_at_field(families, FieldVector{b_mt}, shape, grid_mhz, DriveOptions{}).amplitude;
      },
      py::arg("families"), py::arg("b_mt"), py::arg("grid_mhz"), py::arg("fwhm_mhz") = 10.0,
      py::arg("gaussian") = false);
  m.def("uniform_grid", &uniform_grid, py::arg("start"), py::arg("stop"), py::arg("step"));

  py::class_<RateModel>(m, "RateModel")
      .def_static("fig1f_default", &RateModel::fig1f_default)
      .def_readonly("level_names", &RateModel::level_names)
      .def_readwrite("pump_rate_per_ns", &RateModel::pump_rate_per_ns)
      .def_readwrite("rf_mix_rate_per_ns", &RateModel::rf_mix_rate_per_ns)
      .def("generator", &RateModel::generator)
      .def("pl_weights", &RateModel::pl_weights)
      .def("with_rf", &RateModel::with_rf, py::arg("rate_per_ns"))
      .def("with_pump", &RateModel::with_pump, py::arg("rate_per_ns"))
      .def("scaled", &RateModel::scaled, py::arg("factor"));
  m.def(
      "steady_state", [](const RateModel& model) { return steady_state(model); }, py::arg("model"));
  m.def(
      "evolve",
      [](const RateModel& model, const Eigen::VectorXd& p0, const std::vector<double>& t_ns) {
        const auto tr = evolve_rate_model(model, p0, t_ns);
        return py::make_tuple(tr.populations, tr.pl_rate);
      },
      py::arg("model"), py::arg("p0"), py::arg("t_ns"), "Returns (populations levels x time, PL rate).");
  m.def(
      "pl_transient",
      [](const RateModel& model, const std::vector<std::pair<double, bool>>& segments, double dt_ns) {
        std::vector<RfSegment> seg;
        for (const auto& [d, on] : segments) seg.push_back({d, on});
        const auto tr = simulate_pl_transient(model, seg, dt_ns);
        return py::make_tuple(tr.trace.t_ns, tr.trace.pl_rate, tr.settle_time_ns);
      },
      py::arg("model"), py::arg("segments"), py::arg("dt_ns"),
      "Segments are (duration_ns, rf_on). Returns (t_ns, PL rate, settle time).");
  m.def("odmr_contrast", &odmr_contrast, py::arg("pl_signal"), py::arg("pl_reference"));

  m.def(
      "ramsey_closed_form",
      [](double a1, double a2, double f1, double f2, double t2star_us, const std::vector<double>& tau_ns) {
        return ramsey_closed_form(a1, a2, f1, f2, t2star_us, tau_ns).contrast;
      },
      py::arg("a1"), py::arg("a2"), py::arg("f1_mhz"), py::arg("f2_mhz"), py::arg("t2star_us"), py::arg("tau_ns"));
  m.def(
      "fft_peaks",
      [](const std::vector<double>& tau_ns, const std::vector<double>& contrast, int n_peaks) {
        std::vector<std::pair<double, double>> out;
        for (const auto& p : fft_peaks(RamseyTrace{tau_ns, contrast}, n_peaks)) out.emplace_back(p.freq_mhz, p.magnitude);
        return out;
      },
      py::arg("tau_ns"), py::arg("contrast"), py::arg("n_peaks") = 2, "Returns [(freq_mhz, magnitude)].");

  m.def(
      "fit_ramsey",
      [](const std::vector<double>& tau_ns, const std::vector<double>& contrast, int n_components) {
        RamseyFitOptions o;
        o.n_components = n_components;
        return fit_to_dict(fit_ramsey(RamseyTrace{tau_ns, contrast}, o));
      },
      py::arg("tau_ns"), py::arg("contrast"), py::arg("n_components") = 2);
  m.def(
      "fit_exponential",
      [](const std::vector<double>& t, const std::vector<double>& signal) {
        TimeTrace tr;
        tr.t = t;
        tr.signal = signal;
        return fit_to_dict(fit_exponential_settle(tr));
      },
      py::arg("t"), py::arg("signal"));
  m.def(
      "fit_lifetime",
      [](const std::vector<double>& t, const std::vector<double>& signal, const std::vector<double>& response) {
        TimeTrace tr;
        tr.t = t;
        tr.signal = signal;
        tr.response = response;
        return fit_to_dict(fit_lifetime_convolved(tr));
      },
      py::arg("t"), py::arg("signal"), py::arg("response"));
  m.def(
      "gaussian_response",
      [](const std::vector<double>& t, double center, double fwhm) { return gaussian_response(t, center, fwhm); },
      py::arg("t"), py::arg("center"), py::arg("fwhm"));
  m.def(
      "fit_zero_field",
      [](const std::vector<double>& grid_mhz, const std::vector<double>& amplitude,
         const std::vector<Family>& families, double fwhm_mhz) {
        std::vector<FamilyGuess> guesses;
        for (const auto& f : families) guesses.push_back({f.name, f.system, f.scale, fwhm_mhz});
        return fit_to_dict(fit_zero_field_odmr(Spectrum{grid_mhz, amplitude}, guesses));
      },
      py::arg("grid_mhz"), py::arg("amplitude"), py::arg("families"), py::arg("fwhm_mhz") = 10.0);
  m.def(
      "debye_waller",
      [](const std::vector<double>& wavelength_nm, const std::vector<double>& intensity, double zpl_center_nm,
         double zpl_half_width_nm, double total_min_nm, double total_max_nm, bool subtract_linear_baseline) {
        DebyeWallerOptions o{zpl_center_nm, zpl_half_width_nm, total_min_nm, total_max_nm, subtract_linear_baseline};
        return debye_waller(OpticalSpectrum{wavelength_nm, intensity}, o);
      },
      py::arg("wavelength_nm"), py::arg("intensity"), py::arg("zpl_center_nm") = 1348.7,
      py::arg("zpl_half_width_nm") = 8.0, py::arg("total_min_nm") = 1300.0, py::arg("total_max_nm") = 1500.0,
      py::arg("subtract_linear_baseline") = false);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI subcommand in-process. Returns (exit code, stdout, stderr).");
}
