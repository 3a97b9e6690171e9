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
#pragma once

#include "spintk/spin_core.hpp"

#include <span>
#include <string>
#include <vector>

namespace spintk {

struct Transition {
  int lower_index = 0;
  int upper_index = 0;
  double freq_mhz = 0.0;
  double intensity = 0.0;
  std::string label;
};

using TransitionSet = std::vector<Transition>;

enum class LineShapeKind { lorentzian, gaussian };

/// Unit-area line profile.
struct LineShape {
  LineShapeKind kind = LineShapeKind::lorentzian;
  double fwhm_mhz = 10.0;

  // Broad profile matching the ~40 MHz lines seen at room temperature.
  static LineShape broad() { return {LineShapeKind::lorentzian, 40.0}; }

  double operator()(double detuning_mhz) const;
  void validate() const;
  bool operator==(const LineShape&) const = default;
};

struct Spectrum {
  std::vector<double> freq_grid_mhz;
  std::vector<double> amplitude;
};

struct FieldSweepMap {
  std::vector<double> b_grid_mt;
  std::vector<double> freq_grid_mhz;
  std::vector<std::vector<double>> rows;  // rows[i] pairs with b_grid_mt[i]

  Spectrum row(std::size_t i) const { return {freq_grid_mhz, rows.at(i)}; }
};

/// Uniform frequency grid, inclusive of both ends when the span divides evenly.
struct FrequencyGrid {
  double min_mhz = 10.0;
  double max_mhz = 2000.0;
  double step_mhz = 0.5;

  std::vector<double> points() const;
  bool operator==(const FrequencyGrid&) const = default;
};

// Inclusive uniform grid built as start + k*step so repeated calls agree bitwise.
std::vector<double> uniform_grid(double start, double stop, double step);

/// A spin system together with the amplitude scale of its ODMR signal.
struct Family {
  std::string name;
  SpinSystem system;
  double scale = 1.0;

  bool operator==(const Family&) const = default;
};

// RF drive settings shared by the transition and spectrum functions.
struct DriveOptions {
  Vec3 axis = Vec3::UnitX();  // lab frame; perpendicular to c
  bool unpolarized = false;   // average over `axis` and `second_axis`
  Vec3 second_axis = Vec3::UnitY();
  double min_intensity = 1e-4;
  double min_freq_mhz = 1e-6;  // drops pairs inside a degenerate multiplet
};

// |<v_k| S_drive |v_j>|^2 for all j<k with S_drive the electron spin along
// drive_axis (rotated into the defect frame). Sorted by frequency.
TransitionSet transitions(const EigenSolution& eig, const SpinSystem& sys, const Vec3& drive_axis,
                          double min_intensity);
TransitionSet transitions(const EigenSolution& eig, const SpinSystem& sys, const DriveOptions& drive);

// Full intensity matrix |<v_k|S_drive|v_j>|^2, including the diagonal.
Eigen::MatrixXd intensity_matrix(const EigenSolution& eig, const SpinSystem& sys, const Vec3& drive_axis);

// Fills Transition::label with "lower -> upper" dominant basis states.
void label_transitions(TransitionSet& ts, const EigenSolution& eig, const SpinSystem& sys);

Spectrum synthesize_spectrum(const TransitionSet& ts, const LineShape& shape, std::span<const double> grid_mhz,
                             double family_scale);

// Adds family_scale * sum_t intensity_t * shape(f - f_t) into `amplitude`.
void accumulate_spectrum(const TransitionSet& ts, const LineShape& shape, std::span<const double> grid_mhz,
                         double family_scale, std::span<double> amplitude);

// Transitions of one family at a given lab field.
TransitionSet family_transitions(const SpinSystem& sys, const FieldVector& b, const DriveOptions& drive);

// Sum over families of their spectra at field b.
Spectrum spectrum_at_field(std::span<const Family> families, const FieldVector& b, const LineShape& shape,
                           std::span<const double> grid_mhz, const DriveOptions& drive = {});

FieldSweepMap field_sweep(std::span<const Family> families, const Vec3& b_axis, std::span<const double> b_grid_mt,
                          const LineShape& shape, std::span<const double> grid_mhz, const DriveOptions& drive = {});

struct HalfFrequencyOptions {
  double min_intensity = 0.0;
  double intensity_factor = 0.1;
};

// Two-photon annotations: copies at half frequency with scaled intensity.
TransitionSet annotate_half_frequency(const TransitionSet& ts, const HalfFrequencyOptions& options = {});

struct SpectrumPeak {
  double freq_mhz = 0.0;
  double amplitude = 0.0;
};

// Local maxima of a spectrum above `min_amplitude`, refined by a parabola
// through the three samples around each maximum. Sorted by frequency.
std::vector<SpectrumPeak> find_spectrum_peaks(const Spectrum& s, double min_amplitude);

// Shipped families: nu1, nu2 (off-axis, 35Cl hyperfine), nu3, nu4 (on-axis,
// hyperfine unresolved so no nuclear spin).
std::vector<Family> preset_families();
Family preset_family(const std::string& name);

}  // namespace spintk
