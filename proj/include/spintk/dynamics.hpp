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

#include "spintk/least_squares.hpp"
#include "spintk/odmr.hpp"
#include "spintk/spin_core.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spintk {

/////////////////////////////////////////////////////////////////////////
// Optical spin-polarization cycle
// ------------------
// Populations p obey dp/dt = R p, with R assembled from fixed decay edges,
// optical pumping edges scaled by pump_rate_per_ns and a symmetric RF mixing
// channel between two ground-state sublevels. Times are in ns.
/////////////////////////////////////////////////////////////////////////
struct RateEdge {
  int from = 0;
  int to = 0;
  double rate_per_ns = 0.0;
  bool radiative = false;  // emits detected photons

  bool operator==(const RateEdge&) const = default;
};

struct RateModel {
  std::vector<std::string> level_names;
  std::vector<RateEdge> edges;
  std::vector<std::pair<int, int>> pumped;  // (ground, excited) pairs driven by the laser
  double pump_rate_per_ns = 0.0;
  int rf_level_a = 0;
  int rf_level_b = 1;
  double rf_mix_rate_per_ns = 0.0;

  // GS0, GS1, ES0, ES1, SE (1E), SA (1A1) with the spin-selective ISC ordering
  // of the ClV cycle. The pump rate is tuned so the PL settles back in ~300 ns
  // after the RF is switched off.
  static RateModel fig1f_default();

  int size() const { return static_cast<int>(level_names.size()); }
  int level(std::string_view name) const;

  void validate() const;
  Eigen::MatrixXd generator() const;  // column sums are zero
  Eigen::VectorXd pl_weights() const; // PL rate = pl_weights . p
  double max_rate() const;            // largest total outflow from any level

  RateModel with_rf(double rate_per_ns) const;
  RateModel with_pump(double rate_per_ns) const;
  RateModel scaled(double factor) const;  // every rate multiplied by factor

  bool operator==(const RateModel&) const = default;
};

struct PopulationTrace {
  std::vector<double> t_ns;
  Eigen::MatrixXd populations;  // levels x time
  std::vector<double> pl_rate;  // photons per ns
};

// Fixed-step RK4 with step <= 0.1 / max_rate, sampled on t_grid (increasing,
// starting at the time p0 refers to).
PopulationTrace evolve_rate_model(const RateModel& m, const Eigen::VectorXd& p0, std::span<const double> t_grid);

// Long-time limit of the evolution started from p0 (default: all in level 0).
Eigen::VectorXd steady_state(const RateModel& m, double tol = 1e-13, int max_periods = 100000);

struct RfSegment {
  double duration_ns = 0.0;
  bool rf_on = false;
};

struct PlTransient {
  PopulationTrace trace;
  double settle_time_ns;  // NaN when there is no RF on -> off edge
  FitResult settle_fit;
};

// Continuous optical pumping with the RF toggled per segment; the RF mixing
// rate comes from the model. Settling is fitted after the last on -> off edge.
PlTransient simulate_pl_transient(const RateModel& m, std::span<const RfSegment> segments, double dt_ns);
PlTransient simulate_pl_transient(const RateModel& m, std::span<const RfSegment> segments, double dt_ns,
                                  const Eigen::VectorXd& p0);

/////////////////////////////////////////////////////////////////////////
// Pulse sequences and Ramsey interferometry
/////////////////////////////////////////////////////////////////////////
enum class SequenceMode { rabi, t1, ramsey };

struct PulseSequence {
  double init_laser_ns = 5000.0;
  double rf_pulse_ns = 0.0;
  double detect_window_ns = 250.0;
  double free_evolution_ns = 0.0;  // between the two pi/2 pulses (ramsey) or after the pi pulse (t1)
  SequenceMode mode = SequenceMode::rabi;

  void validate() const;
};

// (PL_A - PL_B) / PL_B
double odmr_contrast(double pl_signal, double pl_reference);

// Photon counts of the signal and reference sequences through the rate
// model. The RF pulse is a hard pulse that moves `transfer_fraction` of the
// population between the RF-coupled ground sublevels.
struct SequenceCounts {
  double pl_signal = 0.0;
  double pl_reference = 0.0;
  double contrast = 0.0;
};
SequenceCounts sequence_contrast(const RateModel& m, const PulseSequence& seq, double transfer_fraction);

struct RamseyTrace {
  std::vector<double> tau_ns;
  std::vector<double> contrast;
};

struct RamseyComponent {
  double amplitude = 0.0;
  double freq_mhz = 0.0;
  std::string label;
};

// C(tau) = sum_k a_k cos(2 pi f_k tau) exp(-tau / T2*)
RamseyTrace ramsey_components(std::span<const RamseyComponent> components, double t2star_us,
                              std::span<const double> tau_ns);

RamseyTrace ramsey_closed_form(double a1, double a2, double f1_mhz, double f2_mhz, double t2star_us,
                               std::span<const double> tau_ns);

struct RamseyOptions {
  DriveOptions drive;
  double bandwidth_mhz = 25.0;  // transitions farther than this from the RF are not addressed
};

struct HamiltonianRamsey {
  RamseyTrace trace;
  std::vector<RamseyComponent> components;  // detunings |f_k - f_rf|, weights summing to one
  std::vector<std::string> warnings;
};

HamiltonianRamsey ramsey_from_hamiltonian(const SpinSystem& sys, const FieldVector& b, double rf_freq_mhz,
                                          double t2star_us, std::span<const double> tau_ns,
                                          const RamseyOptions& options = {});

// Damped Rabi flopping summed over the addressed transitions:
// sum_k a_k (W^2 / W_k^2) sin^2(pi W_k tau) exp(-tau / T2*), W_k^2 = W^2 + delta_k^2.
HamiltonianRamsey rabi_from_hamiltonian(const SpinSystem& sys, const FieldVector& b, double rf_freq_mhz,
                                        double rabi_mhz, double t2star_us, std::span<const double> tau_ns,
                                        const RamseyOptions& options = {});

// C(tau) = (c0 - c_floor) exp(-tau / T1) + c_floor
RamseyTrace t1_trace(double t1_ns, double c0, double c_floor, std::span<const double> tau_ns);

struct FftPeak {
  double freq_mhz = 0.0;
  double magnitude = 0.0;
};

struct FftOptions {
  int pad_factor = 4;
  bool hann_window = false;
  double min_relative_magnitude = 0.05;  // of the strongest peak
};

// Mean-subtracted DFT magnitude of a uniformly sampled trace; local maxima
// sorted by magnitude, with 3-point parabolic frequency refinement.
std::vector<FftPeak> fft_peaks(const RamseyTrace& trace, int n_peaks, const FftOptions& options = {});

// Bin width in MHz used by fft_peaks for this trace.
double fft_bin_width_mhz(const RamseyTrace& trace, const FftOptions& options = {});

}  // namespace spintk
