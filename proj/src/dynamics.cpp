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
#include "spintk/dynamics.hpp"

#include "spintk/error.hpp"
#include "spintk/fit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace spintk {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_grid(std::span<const double> grid, const char* what) {
  if (grid.empty()) throw std::invalid_argument(std::string(what) + " must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw std::invalid_argument(std::string(what) + " must be finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument(std::string(what) + " must be increasing");
  }
}

void rk4_step(const Eigen::MatrixXd& r, Eigen::VectorXd& p, double h) {
  const Eigen::VectorXd k1 = r * p;
  const Eigen::VectorXd k2 = r * (p + 0.5 * h * k1);
  const Eigen::VectorXd k3 = r * (p + 0.5 * h * k2);
  const Eigen::VectorXd k4 = r * (p + h * k3);
  p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void validate_distribution(const Eigen::VectorXd& p, int n) {
  if (p.size() != n) throw std::invalid_argument("initial populations do not match the number of levels");
  if (!p.allFinite() || (p.array() < 0.0).any()) throw std::invalid_argument("initial populations must be nonnegative");
  if (std::abs(p.sum() - 1.0) > 1e-9) throw std::invalid_argument("initial populations must sum to one");
}

// Evolves p in place from 0 to duration with the model's step bound.
void advance(const Eigen::MatrixXd& r, double max_rate, Eigen::VectorXd& p, double duration) {
  if (duration <= 0.0) return;
  const double h_max = max_rate > 0.0 ? 0.1 / max_rate : duration;
  const auto steps = static_cast<long>(std::ceil(duration / h_max - 1e-12));
  const double h = duration / static_cast<double>(std::max(1L, steps));
  for (long s = 0; s < std::max(1L, steps); ++s) rk4_step(r, p, h);
}

double pl_integral(const RateModel& m, Eigen::VectorXd p, double window_ns) {
  const Eigen::MatrixXd r = m.generator();
  const Eigen::VectorXd w = m.pl_weights();
  const int n_steps = 1000;
  const double dt = window_ns / n_steps;
  double sum = 0.5 * w.dot(p);
  for (int k = 1; k <= n_steps; ++k) {
    advance(r, m.max_rate(), p, dt);
    sum += (k == n_steps ? 0.5 : 1.0) * w.dot(p);
  }
  return sum * dt;
}

}  // namespace

// Rates in 1/ns. Radiative decay 1/(450 ps); ISC out of ES m_S=+-1 ten times
// faster than out of m_S=0; 1E relaxes only into GS m_S=+-1 (the 1E -> GS0
// channel is omitted). The pump rate was found by bisection on the fitted
// settling time of the 3 us RF-on / 3 us RF-off transient sampled at 1 ns.
RateModel RateModel::fig1f_default() {
  RateModel m;
  m.level_names = {"GS0", "GS1", "ES0", "ES1", "SE", "SA"};
  const double radiative = 1.0 / 0.45;
  m.edges = {
      {2, 0, radiative, true},  // ES0 -> GS0
      {3, 1, radiative, true},  // ES1 -> GS1
      {2, 4, 0.1, false},       // ES0 -> 1E
      {3, 4, 1.0, false},       // ES1 -> 1E
      {4, 1, 0.02, false},      // 1E -> GS1
      {5, 4, 1.0, false},       // 1A1 -> 1E
  };
  m.pumped = {{0, 2}, {1, 3}};
  m.pump_rate_per_ns = 0.081;
  m.rf_level_a = 0;
  m.rf_level_b = 1;
  m.rf_mix_rate_per_ns = 0.05;
  return m;
}

int RateModel::level(std::string_view name) const {
  for (std::size_t i = 0; i < level_names.size(); ++i)
    if (level_names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("rate model has no level named '" + std::string(name) + "'");
}

void RateModel::validate() const {
  const int n = size();
  if (n == 0) throw std::invalid_argument("rate model needs at least one level");
  auto in_range = [n](int i) { return i >= 0 && i < n; };
  for (const auto& e : edges) {
    if (!in_range(e.from) || !in_range(e.to)) throw std::invalid_argument("rate edge refers to an unknown level");
    if (e.from == e.to) throw std::invalid_argument("rate model must not contain self-rates");
    if (!(e.rate_per_ns >= 0.0) || !std::isfinite(e.rate_per_ns))
      throw std::invalid_argument("rates must be finite and nonnegative");
  }
  for (const auto& [g, x] : pumped) {
    if (!in_range(g) || !in_range(x) || g == x) throw std::invalid_argument("invalid pumped transition");
  }
  if (!(pump_rate_per_ns >= 0.0) || !std::isfinite(pump_rate_per_ns))
    throw std::invalid_argument("pump rate must be finite and nonnegative");
  if (!(rf_mix_rate_per_ns >= 0.0) || !std::isfinite(rf_mix_rate_per_ns))
    throw std::invalid_argument("RF mixing rate must be finite and nonnegative");
  if (rf_mix_rate_per_ns > 0.0 && (!in_range(rf_level_a) || !in_range(rf_level_b) || rf_level_a == rf_level_b))
    throw std::invalid_argument("RF mixing levels are invalid");
}

Eigen::MatrixXd RateModel::generator() const {
  validate();
  const int n = size();
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  auto add = [&r](int from, int to, double k) {
    r(to, from) += k;
    r(from, from) -= k;
  };
  for (const auto& e : edges) add(e.from, e.to, e.rate_per_ns);
  for (const auto& [g, x] : pumped) add(g, x, pump_rate_per_ns);
  if (rf_mix_rate_per_ns > 0.0) {
    add(rf_level_a, rf_level_b, rf_mix_rate_per_ns);
    add(rf_level_b, rf_level_a, rf_mix_rate_per_ns);
  }
  return r;
}

Eigen::VectorXd RateModel::pl_weights() const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(size());
  for (const auto& e : edges)
    if (e.radiative) w(e.from) += e.rate_per_ns;
  return w;
}

double RateModel::max_rate() const {
  const Eigen::MatrixXd r = generator();
  return (-r.diagonal()).maxCoeff();
}

RateModel RateModel::with_rf(double rate_per_ns) const {
  RateModel m = *this;
  m.rf_mix_rate_per_ns = rate_per_ns;
  return m;
}

RateModel RateModel::with_pump(double rate_per_ns) const {
  RateModel m = *this;
  m.pump_rate_per_ns = rate_per_ns;
  return m;
}

RateModel RateModel::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("rate scale factor must be positive");
  RateModel m = *this;
  for (auto& e : m.edges) e.rate_per_ns *= factor;
  m.pump_rate_per_ns *= factor;
  m.rf_mix_rate_per_ns *= factor;
  return m;
}

PopulationTrace evolve_rate_model(const RateModel& m, const Eigen::VectorXd& p0, std::span<const double> t_grid) {
  const Eigen::MatrixXd r = m.generator();
  validate_distribution(p0, m.size());
  require_grid(t_grid, "time grid");

  const double max_rate = m.max_rate();
  const Eigen::VectorXd w = m.pl_weights();
  PopulationTrace out;
  out.t_ns.assign(t_grid.begin(), t_grid.end());
  out.populations.resize(m.size(), static_cast<Eigen::Index>(t_grid.size()));
  out.pl_rate.resize(t_grid.size());

  Eigen::VectorXd p = p0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i > 0) advance(r, max_rate, p, t_grid[i] - t_grid[i - 1]);
    out.populations.col(static_cast<Eigen::Index>(i)) = p;
    out.pl_rate[i] = w.dot(p);
  }
  return out;
}

Eigen::VectorXd steady_state(const RateModel& m, double tol, int max_periods) {
  const Eigen::MatrixXd r = m.generator();
  const int n = m.size();
  const double max_rate = m.max_rate();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  p(0) = 1.0;
  if (!(max_rate > 0.0)) return p;

  // One RK4 step as a matrix, then 2^10 steps per period by squaring.
  const double h = 0.1 / max_rate;
  const Eigen::MatrixXd hr = h * r;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd period = id + hr * (id + hr / 2.0 * (id + hr / 3.0 * (id + hr / 4.0)));
  for (int k = 0; k < 10; ++k) period = period * period;

  for (int k = 0; k < max_periods; ++k) {
    Eigen::VectorXd next = period * p;
    next /= next.sum();
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change <= tol) return p;
  }
  throw NumericalError("rate model steady state did not converge");
}

PlTransient simulate_pl_transient(const RateModel& m, std::span<const RfSegment> segments, double dt_ns) {
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(m.size());
  if (m.size() > 0) p0(0) = 1.0;
  return simulate_pl_transient(m, segments, dt_ns, p0);
}

PlTransient simulate_pl_transient(const RateModel& m, std::span<const RfSegment> segments, double dt_ns,
                                  const Eigen::VectorXd& p0) {
  m.validate();
  validate_distribution(p0, m.size());
  if (segments.empty()) throw std::invalid_argument("at least one RF segment is required");
  if (!(dt_ns > 0.0)) throw std::invalid_argument("sampling step must be positive");
  for (const auto& s : segments)
    if (!(s.duration_ns > 0.0) || !std::isfinite(s.duration_ns))
      throw std::invalid_argument("segment durations must be positive");

  PlTransient out;
  out.settle_time_ns = kNaN;
  auto& tr = out.trace;
  const Eigen::VectorXd w = m.pl_weights();
  std::vector<Eigen::VectorXd> columns;

  Eigen::VectorXd p = p0;
  double t0 = 0.0;
  tr.t_ns.push_back(0.0);
  columns.push_back(p);
  tr.pl_rate.push_back(w.dot(p));

  std::size_t settle_begin = 0, settle_end = 0;
  double settle_edge = 0.0;
  bool previous_on = false;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const RateModel seg_model = m.with_rf(segments[s].rf_on ? m.rf_mix_rate_per_ns : 0.0);
    const Eigen::MatrixXd r = seg_model.generator();
    const double max_rate = seg_model.max_rate();
    const bool off_edge = s > 0 && previous_on && !segments[s].rf_on;
    const std::size_t first = tr.t_ns.size() - 1;

    const auto local = uniform_grid(0.0, segments[s].duration_ns, dt_ns);
    std::vector<double> times(local);
    if (times.back() < segments[s].duration_ns - 1e-9 * segments[s].duration_ns)
      times.push_back(segments[s].duration_ns);
    for (std::size_t k = 1; k < times.size(); ++k) {
      advance(r, max_rate, p, times[k] - times[k - 1]);
      tr.t_ns.push_back(t0 + times[k]);
      columns.push_back(p);
      tr.pl_rate.push_back(w.dot(p));
    }
    if (off_edge) {
      settle_begin = first;
      settle_end = tr.t_ns.size();
      settle_edge = t0;
    }
    t0 += segments[s].duration_ns;
    previous_on = segments[s].rf_on;
  }

  tr.populations.resize(m.size(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) tr.populations.col(static_cast<Eigen::Index>(k)) = columns[k];

  if (settle_end > settle_begin + 8) {
    TimeTrace tail;
    tail.unit = "ns";
    for (std::size_t k = settle_begin; k < settle_end; ++k) {
      tail.t.push_back(tr.t_ns[k] - settle_edge);
      tail.signal.push_back(tr.pl_rate[k]);
    }
    out.settle_fit = fit_exponential_settle(tail);
    if (out.settle_fit.converged) out.settle_time_ns = out.settle_fit.value("t_const");
  }
  return out;
}

void PulseSequence::validate() const {
  for (double d : {init_laser_ns, rf_pulse_ns, detect_window_ns, free_evolution_ns})
    if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("pulse sequence durations must be nonnegative");
  if (!(detect_window_ns > 0.0)) throw std::invalid_argument("detection window must be positive");
}

double odmr_contrast(double pl_signal, double pl_reference) {
  if (!(pl_reference != 0.0)) throw std::invalid_argument("reference PL must be nonzero");
  return (pl_signal - pl_reference) / pl_reference;
}

SequenceCounts sequence_contrast(const RateModel& m, const PulseSequence& seq, double transfer_fraction) {
  seq.validate();
  m.validate();
  if (!(transfer_fraction >= 0.0 && transfer_fraction <= 1.0))
    throw std::invalid_argument("transfer fraction must lie in [0, 1]");
  const int a = m.rf_level_a;
  const int b = m.rf_level_b;
  if (a < 0 || b < 0 || a >= m.size() || b >= m.size() || a == b)
    throw std::invalid_argument("RF levels of the rate model are invalid");

  const RateModel laser = m.with_rf(0.0);
  const RateModel dark = laser.with_pump(0.0);

  Eigen::VectorXd p = Eigen::VectorXd::Zero(m.size());
  p(a) = 0.5;
  p(b) = 0.5;
  advance(laser.generator(), laser.max_rate(), p, seq.init_laser_ns);

  auto readout = [&](Eigen::VectorXd state, double fraction) {
    const double pa = state(a);
    const double pb = state(b);
    state(a) = (1.0 - fraction) * pa + fraction * pb;
    state(b) = (1.0 - fraction) * pb + fraction * pa;
    advance(dark.generator(), dark.max_rate(), state, seq.rf_pulse_ns + seq.free_evolution_ns);
    return pl_integral(laser, state, seq.detect_window_ns);
  };

  SequenceCounts out;
  out.pl_signal = readout(p, transfer_fraction);
  out.pl_reference = readout(p, 0.0);
  out.contrast = odmr_contrast(out.pl_signal, out.pl_reference);
  return out;
}

RamseyTrace ramsey_components(std::span<const RamseyComponent> components, double t2star_us,
                              std::span<const double> tau_ns) {
  if (!(t2star_us > 0.0)) throw std::invalid_argument("T2* must be positive");
  RamseyTrace out;
  out.tau_ns.assign(tau_ns.begin(), tau_ns.end());
  out.contrast.resize(tau_ns.size());
  const double t2_ns = 1e3 * t2star_us;
  for (std::size_t i = 0; i < tau_ns.size(); ++i) {
    double sum = 0.0;
    for (const auto& c : components) sum += c.amplitude * std::cos(2.0 * kPi * c.freq_mhz * 1e-3 * tau_ns[i]);
    out.contrast[i] = sum * std::exp(-tau_ns[i] / t2_ns);
  }
  return out;
}

RamseyTrace ramsey_closed_form(double a1, double a2, double f1_mhz, double f2_mhz, double t2star_us,
                               std::span<const double> tau_ns) {
  const RamseyComponent comps[] = {{a1, f1_mhz, {}}, {a2, f2_mhz, {}}};
  return ramsey_components(comps, t2star_us, tau_ns);
}

namespace {

HamiltonianRamsey addressed_components(const SpinSystem& sys, const FieldVector& b, double rf_freq_mhz,
                                       const RamseyOptions& options) {
  if (!std::isfinite(rf_freq_mhz)) throw std::invalid_argument("RF frequency must be finite");
  if (!(options.bandwidth_mhz > 0.0)) throw std::invalid_argument("RF bandwidth must be positive");
  const EigenSolution eig = diagonalize(build_hamiltonian(sys, b));
  TransitionSet ts = transitions(eig, sys, options.drive);
  label_transitions(ts, eig, sys);

  HamiltonianRamsey out;
  if (!ts.empty()) {
    const double lo = ts.front().freq_mhz - options.bandwidth_mhz;
    const double hi = ts.back().freq_mhz + options.bandwidth_mhz;
    if (rf_freq_mhz < lo || rf_freq_mhz > hi)
      out.warnings.push_back("RF frequency lies outside the support of the synthesized spectrum");
  }
  double total = 0.0;
  for (const auto& t : ts) {
    const double detuning = std::abs(t.freq_mhz - rf_freq_mhz);
    if (detuning > options.bandwidth_mhz) continue;
    out.components.push_back({t.intensity, detuning, t.label});
    total += t.intensity;
  }
  if (out.components.empty() || !(total > 0.0)) throw NumericalError("no addressable transitions");
  for (auto& c : out.components) c.amplitude /= total;
  return out;
}

}  // namespace

HamiltonianRamsey ramsey_from_hamiltonian(const SpinSystem& sys, const FieldVector& b, double rf_freq_mhz,
                                          double t2star_us, std::span<const double> tau_ns,
                                          const RamseyOptions& options) {
  if (!(t2star_us > 0.0)) throw std::invalid_argument("T2* must be positive");
  HamiltonianRamsey out = addressed_components(sys, b, rf_freq_mhz, options);
  out.trace = ramsey_components(out.components, t2star_us, tau_ns);
  return out;
}

HamiltonianRamsey rabi_from_hamiltonian(const SpinSystem& sys, const FieldVector& b, double rf_freq_mhz,
                                        double rabi_mhz, double t2star_us, std::span<const double> tau_ns,
                                        const RamseyOptions& options) {
  if (!(t2star_us > 0.0)) throw std::invalid_argument("T2* must be positive");
  if (!(rabi_mhz > 0.0)) throw std::invalid_argument("Rabi frequency must be positive");
  HamiltonianRamsey out = addressed_components(sys, b, rf_freq_mhz, options);
  out.trace.tau_ns.assign(tau_ns.begin(), tau_ns.end());
  out.trace.contrast.resize(tau_ns.size());
  const double t2_ns = 1e3 * t2star_us;
  for (std::size_t i = 0; i < tau_ns.size(); ++i) {
    double sum = 0.0;
    for (const auto& c : out.components) {
      const double w2 = rabi_mhz * rabi_mhz + c.freq_mhz * c.freq_mhz;
      const double s = std::sin(kPi * std::sqrt(w2) * 1e-3 * tau_ns[i]);
      sum += c.amplitude * rabi_mhz * rabi_mhz / w2 * s * s;
    }
    out.trace.contrast[i] = sum * std::exp(-tau_ns[i] / t2_ns);
  }
  return out;
}

RamseyTrace t1_trace(double t1_ns, double c0, double c_floor, std::span<const double> tau_ns) {
  if (!(t1_ns > 0.0)) throw std::invalid_argument("T1 must be positive");
  RamseyTrace out;
  out.tau_ns.assign(tau_ns.begin(), tau_ns.end());
  out.contrast.resize(tau_ns.size());
  for (std::size_t i = 0; i < tau_ns.size(); ++i)
    out.contrast[i] = (c0 - c_floor) * std::exp(-tau_ns[i] / t1_ns) + c_floor;
  return out;
}

namespace {

double uniform_step(const RamseyTrace& trace) {
  const auto& t = trace.tau_ns;
  if (t.size() != trace.contrast.size()) throw std::invalid_argument("trace grid and values differ in length");
  if (t.size() < 16) throw std::invalid_argument("FFT analysis needs at least 16 samples");
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw std::invalid_argument("trace grid must be increasing");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt)
      throw std::invalid_argument("FFT analysis requires a uniform grid");
  return dt;
}

}  // namespace

double fft_bin_width_mhz(const RamseyTrace& trace, const FftOptions& options) {
  const double dt = uniform_step(trace);
  const auto n_pad = static_cast<double>(trace.tau_ns.size()) * std::max(1, options.pad_factor);
  return 1e3 / (n_pad * dt);
}

std::vector<FftPeak> fft_peaks(const RamseyTrace& trace, int n_peaks, const FftOptions& options) {
  const double dt = uniform_step(trace);
  const std::size_t n = trace.contrast.size();
  const std::size_t n_pad = n * static_cast<std::size_t>(std::max(1, options.pad_factor));

  const double mean = std::accumulate(trace.contrast.begin(), trace.contrast.end(), 0.0) / static_cast<double>(n);
  double peak_abs = 0.0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    peak_abs = std::max(peak_abs, std::abs(trace.contrast[i]));
    double v = trace.contrast[i] - mean;
    if (options.hann_window) v *= 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1));
    x[i] = v;
  }

  const std::size_t n_bins = n_pad / 2 + 1;
  std::vector<double> mag(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double angle = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_pad);
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, angle * static_cast<double>(i));
    mag[k] = 2.0 * std::abs(acc) / static_cast<double>(n);
  }

  // Rounding residue of a constant trace stays far below this floor.
  const double abs_floor = 1e-9 * peak_abs;
  const double bin = 1e3 / (static_cast<double>(n_pad) * dt);
  std::vector<FftPeak> peaks;
  for (std::size_t k = 1; k + 1 < n_bins; ++k) {
    if (!(mag[k] > mag[k - 1] && mag[k] >= mag[k + 1]) || mag[k] <= abs_floor) continue;
    const double denom = mag[k - 1] - 2.0 * mag[k] + mag[k + 1];
    const double delta = denom != 0.0 ? 0.5 * (mag[k - 1] - mag[k + 1]) / denom : 0.0;
    peaks.push_back({(static_cast<double>(k) + delta) * bin, mag[k] - 0.25 * (mag[k - 1] - mag[k + 1]) * delta});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const FftPeak& a, const FftPeak& b) { return a.magnitude > b.magnitude; });
  if (!peaks.empty()) {
    const double cut = options.min_relative_magnitude * peaks.front().magnitude;
    peaks.erase(std::remove_if(peaks.begin(), peaks.end(), [cut](const FftPeak& p) { return p.magnitude < cut; }),
                peaks.end());
  }
  if (n_peaks >= 0 && peaks.size() > static_cast<std::size_t>(n_peaks)) peaks.resize(static_cast<std::size_t>(n_peaks));
  return peaks;
}

}  // namespace spintk
