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

#include "spintk/dynamics.hpp"
#include "spintk/least_squares.hpp"
#include "spintk/odmr.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace spintk {

// Sampled signal with an optional instrument response on the same grid.
struct TimeTrace {
  std::vector<double> t;
  std::vector<double> signal;
  std::vector<double> response;  // empty when absent
  std::string unit = "ns";

  void validate() const;
};

struct OpticalSpectrum {
  std::vector<double> wavelength_nm;
  std::vector<double> intensity;

  void validate() const;
};

// a * exp(-t / t_const) + floor; parameters t_const, amplitude, floor.
FitResult fit_exponential_settle(const TimeTrace& trace, const LeastSquaresOptions& options = {});

/////////////////////////////////////////////////////////////////////////
// Lifetime deconvolution
// ------------------
// The response is read as piecewise constant over cells of one grid step
// centred on the samples and normalized to unit area. Each cell is
// convolved analytically with amplitude * exp(-(t - t0)/tau) * step(t - t0),
// so t0 is the delay of the decay onset relative to the response.
/////////////////////////////////////////////////////////////////////////

// Gaussian pulse profile of the given FWHM sampled on t. Rejects a FWHM
// below the grid step.
std::vector<double> gaussian_response(std::span<const double> t, double center, double fwhm);

// Half-maximum width of a sampled pulse with linearly interpolated edges; a
// single-sample spike has the width of one grid step.
double response_fwhm(std::span<const double> t, std::span<const double> response);

// Model values of the convolved decay on the trace grid.
std::vector<double> convolved_decay(std::span<const double> t, std::span<const double> response, double tau,
                                    double amplitude, double t0, double baseline);

// Parameters tau, amplitude, t0, baseline in the trace's time unit.
FitResult fit_lifetime_convolved(const TimeTrace& trace, const LeastSquaresOptions& options = {});

/////////////////////////////////////////////////////////////////////////
// Debye-Waller factor
/////////////////////////////////////////////////////////////////////////
struct DebyeWallerOptions {
  double zpl_center_nm = 1348.7;
  double zpl_half_width_nm = 8.0;
  double total_min_nm = 1300.0;
  double total_max_nm = 1500.0;
  bool subtract_linear_baseline = false;  // line through the total-window edges
};

// Trapezoid rule over [a, b] with linearly interpolated end points.
double trapezoid(std::span<const double> x, std::span<const double> y, double a, double b);

double debye_waller(const OpticalSpectrum& spec, const DebyeWallerOptions& options = {});

/////////////////////////////////////////////////////////////////////////
// Ramsey fringes
/////////////////////////////////////////////////////////////////////////
struct RamseyFitOptions {
  int n_components = 2;
  std::map<std::string, double> fixed;  // e.g. {"a2", 0.0}
  FftOptions fft;
  LeastSquaresOptions least_squares;
};

// Parameters a1, f1_mhz, ..., an, fn_mhz, t2star_us; frequencies seeded
// from fft_peaks and sorted ascending.
FitResult fit_ramsey(const RamseyTrace& trace, const RamseyFitOptions& options = {});

/////////////////////////////////////////////////////////////////////////
// Zero-field ODMR
/////////////////////////////////////////////////////////////////////////

// Starting point for one family. The hyperfine coupling is fitted as an
// isotropic constant when the family carries a nuclear spin.
struct FamilyGuess {
  std::string name;
  SpinSystem system;
  double scale = 1.0;
  double fwhm_mhz = 10.0;
};

struct ZeroFieldFitOptions {
  LineShapeKind kind = LineShapeKind::lorentzian;
  DriveOptions drive;
  // Without the scan, fit first with the linewidths held at this value when
  // it exceeds the guessed ones; widens the capture range of the gradient.
  double staging_fwhm_mhz = 40.0;
  bool staged = true;
  // Lattice scan of each family's D, E and A spanning +-scan_range (D) and
  // +-2*scan_range (E, A) around the guess before the gradient stage.
  bool scan = true;
  double scan_range = 0.12;
  LeastSquaresOptions least_squares;
};

// Parameter vector layout used by the zero-field fit.
std::vector<std::string> zero_field_parameter_names(std::span<const FamilyGuess> families);
std::vector<double> zero_field_parameters(std::span<const FamilyGuess> families);
std::vector<FamilyGuess> apply_zero_field_parameters(std::span<const FamilyGuess> families,
                                                     std::span<const double> params);

// Forward model of the fit: summed B = 0 spectra on grid.
std::vector<double> zero_field_model(std::span<const FamilyGuess> families, std::span<const double> grid_mhz,
                                     const ZeroFieldFitOptions& options = {});

// Moves each family's D and E so its strongest predicted lines sit on the
// nearest observed maxima above 3x the median absolute amplitude.
std::vector<FamilyGuess> seed_zero_field_guesses(const Spectrum& spectrum, std::span<const FamilyGuess> templates,
                                                 const ZeroFieldFitOptions& options = {});

FitResult fit_zero_field_odmr(const Spectrum& spectrum, std::span<const FamilyGuess> guesses,
                              const ZeroFieldFitOptions& options = {});

}  // namespace spintk
