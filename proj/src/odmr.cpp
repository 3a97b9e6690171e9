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
#include "spintk/odmr.hpp"

#include "spintk/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spintk {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_increasing(std::span<const double> grid, const char* what) {
  if (grid.empty()) throw std::invalid_argument(std::string(what) + " must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw std::invalid_argument(std::string(what) + " must be finite");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument(std::string(what) + " must be strictly increasing");
  }
}

Vec3 unit(const Vec3& v, const char* what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument(std::string(what) + " must be a nonzero vector");
  return v / n;
}

}  // namespace

double LineShape::operator()(double detuning_mhz) const {
  if (kind == LineShapeKind::lorentzian) {
    const double hw = 0.5 * fwhm_mhz;
    return hw / (kPi * (detuning_mhz * detuning_mhz + hw * hw));
  }
  const double sigma = fwhm_mhz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double u = detuning_mhz / sigma;
  return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * kPi));
}

void LineShape::validate() const {
  if (!(fwhm_mhz > 0.0) || !std::isfinite(fwhm_mhz)) throw std::invalid_argument("line FWHM must be positive");
}

std::vector<double> uniform_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step))
    throw std::invalid_argument("grid step must be positive and bounds finite");
  if (stop < start) throw std::invalid_argument("grid stop must not precede start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = start + static_cast<double>(k) * step;
  return out;
}

std::vector<double> FrequencyGrid::points() const { return uniform_grid(min_mhz, max_mhz, step_mhz); }

Eigen::MatrixXd intensity_matrix(const EigenSolution& eig, const SpinSystem& sys, const Vec3& drive_axis) {
  const int ne = sys.electron_dim();
  const int nn = sys.nuclear_dim();
  if (eig.size() != ne * nn || eig.vectors.rows() != eig.size())
    throw std::invalid_argument("transitions: eigen-solution dimension does not match the spin system");

  const Vec3 d_def = sys.to_defect_frame(unit(drive_axis, "drive axis"));
  const Eigen::MatrixXcd s_drive = spin_matrices(sys.s_electron).along(d_def);
  Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(ne * nn, ne * nn);
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < ne; ++j)
      if (s_drive(i, j) != 0.0)
        for (int m = 0; m < nn; ++m) op(i * nn + m, j * nn + m) = s_drive(i, j);

  const Eigen::MatrixXcd elements = eig.vectors.adjoint() * op * eig.vectors;
  return elements.cwiseAbs2();
}

namespace {

TransitionSet collect(const EigenSolution& eig, const Eigen::MatrixXd& weights, double min_intensity,
                      double min_freq_mhz) {
  TransitionSet out;
  const int n = eig.size();
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double f = eig.values(k) - eig.values(j);
      const double w = weights(k, j);
      if (f < min_freq_mhz || w < min_intensity || w <= 0.0) continue;
      out.push_back({j, k, f, w, {}});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Transition& a, const Transition& b) { return a.freq_mhz < b.freq_mhz; });
  return out;
}

}  // namespace

TransitionSet transitions(const EigenSolution& eig, const SpinSystem& sys, const Vec3& drive_axis,
                          double min_intensity) {
  DriveOptions drive;
  drive.axis = drive_axis;
  drive.min_intensity = min_intensity;
  return transitions(eig, sys, drive);
}

TransitionSet transitions(const EigenSolution& eig, const SpinSystem& sys, const DriveOptions& drive) {
  Eigen::MatrixXd w = intensity_matrix(eig, sys, drive.axis);
  if (drive.unpolarized) w = 0.5 * (w + intensity_matrix(eig, sys, drive.second_axis));
  return collect(eig, w, drive.min_intensity, drive.min_freq_mhz);
}

void label_transitions(TransitionSet& ts, const EigenSolution& eig, const SpinSystem& sys) {
  for (auto& t : ts)
    t.label = dominant_state_label(eig, t.lower_index, sys.s_electron, sys.i_nuclear) + " -> " +
              dominant_state_label(eig, t.upper_index, sys.s_electron, sys.i_nuclear);
}

void accumulate_spectrum(const TransitionSet& ts, const LineShape& shape, std::span<const double> grid_mhz,
                         double family_scale, std::span<double> amplitude) {
  shape.validate();
  require_increasing(grid_mhz, "frequency grid");
  if (amplitude.size() != grid_mhz.size()) throw std::invalid_argument("amplitude buffer does not match grid");
  for (const auto& t : ts) {
    const double w = family_scale * t.intensity;
    for (std::size_t i = 0; i < grid_mhz.size(); ++i) amplitude[i] += w * shape(grid_mhz[i] - t.freq_mhz);
  }
}

Spectrum synthesize_spectrum(const TransitionSet& ts, const LineShape& shape, std::span<const double> grid_mhz,
                             double family_scale) {
  Spectrum s;
  s.freq_grid_mhz.assign(grid_mhz.begin(), grid_mhz.end());
  s.amplitude.assign(grid_mhz.size(), 0.0);
  accumulate_spectrum(ts, shape, grid_mhz, family_scale, s.amplitude);
  return s;
}

TransitionSet family_transitions(const SpinSystem& sys, const FieldVector& b, const DriveOptions& drive) {
  const EigenSolution eig = diagonalize(build_hamiltonian(sys, b));
  return transitions(eig, sys, drive);
}

Spectrum spectrum_at_field(std::span<const Family> families, const FieldVector& b, const LineShape& shape,
                           std::span<const double> grid_mhz, const DriveOptions& drive) {
  if (families.empty()) throw std::invalid_argument("at least one spin system is required");
  Spectrum s;
  s.freq_grid_mhz.assign(grid_mhz.begin(), grid_mhz.end());
  s.amplitude.assign(grid_mhz.size(), 0.0);
  for (const auto& fam : families)
    accumulate_spectrum(family_transitions(fam.system, b, drive), shape, grid_mhz, fam.scale, s.amplitude);
  return s;
}

FieldSweepMap field_sweep(std::span<const Family> families, const Vec3& b_axis, std::span<const double> b_grid_mt,
                          const LineShape& shape, std::span<const double> grid_mhz, const DriveOptions& drive) {
  if (families.empty()) throw std::invalid_argument("field_sweep: at least one spin system is required");
  require_increasing(b_grid_mt, "field grid");
  require_increasing(grid_mhz, "frequency grid");
  const Vec3 axis = unit(b_axis, "field axis");

  FieldSweepMap map;
  map.b_grid_mt.assign(b_grid_mt.begin(), b_grid_mt.end());
  map.freq_grid_mhz.assign(grid_mhz.begin(), grid_mhz.end());
  map.rows.resize(b_grid_mt.size());
  parallel_for(b_grid_mt.size(), [&](std::size_t i) {
    map.rows[i] = spectrum_at_field(families, FieldVector{axis * b_grid_mt[i]}, shape, grid_mhz, drive).amplitude;
  });
  return map;
}

TransitionSet annotate_half_frequency(const TransitionSet& ts, const HalfFrequencyOptions& options) {
  TransitionSet out;
  for (const auto& t : ts) {
    if (t.intensity < options.min_intensity) continue;
    Transition half = t;
    half.freq_mhz = 0.5 * t.freq_mhz;
    half.intensity = options.intensity_factor * t.intensity;
    half.label = t.label.empty() ? "two-photon" : "two-photon " + t.label;
    out.push_back(std::move(half));
  }
  return out;
}

std::vector<SpectrumPeak> find_spectrum_peaks(const Spectrum& s, double min_amplitude) {
  std::vector<SpectrumPeak> peaks;
  const auto& f = s.freq_grid_mhz;
  const auto& a = s.amplitude;
  if (f.size() != a.size()) throw std::invalid_argument("spectrum grid and amplitude lengths differ");
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    if (!(a[i] > a[i - 1] && a[i] >= a[i + 1]) || a[i] < min_amplitude) continue;
    const double denom = a[i - 1] - 2.0 * a[i] + a[i + 1];
    const double delta = denom != 0.0 ? 0.5 * (a[i - 1] - a[i + 1]) / denom : 0.0;
    const double step = delta >= 0.0 ? f[i + 1] - f[i] : f[i] - f[i - 1];
    peaks.push_back({f[i] + delta * step, a[i] - 0.25 * (a[i - 1] - a[i + 1]) * delta});
  }
  return peaks;
}

std::vector<Family> preset_families() {
  auto off_axis = [](double d, double e, double a) {
    SpinSystem sys = SpinSystem::with_isotropic_hyperfine(d, e, a);
    sys.axis_polar_deg = 70.53;
    sys.axis_azimuth_deg = 90.0;
    return sys;
  };
  auto on_axis = [](double d, double e) {
    SpinSystem sys;
    sys.i_nuclear = 0.0;
    sys.d_mhz = d;
    sys.e_mhz = e;
    sys.axis_polar_deg = 0.0;
    sys.axis_azimuth_deg = 45.0;
    return sys;
  };
  return {
      {"nu1", off_axis(560.0, 60.0, -34.0), 1.0},
      {"nu2", off_axis(455.0, 60.0, -30.0), 0.3},
      {"nu3", on_axis(326.0, 40.0), 2.0},
      {"nu4", on_axis(221.0, 20.0), 2.0},
  };
}

Family preset_family(const std::string& name) {
  for (auto& f : preset_families())
    if (f.name == name) return f;
  throw std::invalid_argument("unknown preset family '" + name + "' (expected nu1, nu2, nu3 or nu4)");
}

}  // namespace spintk
