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
#include "spintk/fit.hpp"

#include "spintk/parallel.hpp"

#include "spintk/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace spintk {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_increasing(std::span<const double> x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw std::invalid_argument(std::string(what) + " must be finite");
    if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument(std::string(what) + " must be strictly increasing");
  }
}

void require_finite(std::span<const double> y, const char* what) {
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

double uniform_step(std::span<const double> t) {
  if (t.size() < 2) throw std::invalid_argument("time grid needs at least two samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - t[i - 1] - dt) > 1e-6 * dt) throw std::invalid_argument("time grid must be uniform");
  return dt;
}

double median_abs(std::span<const double> y) {
  std::vector<double> a(y.size());
  std::transform(y.begin(), y.end(), a.begin(), [](double v) { return std::abs(v); });
  if (a.empty()) return 0.0;
  const auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
  std::nth_element(a.begin(), mid, a.end());
  return *mid;
}

// Time after `start` at which |y - level| first drops below |y0 - level| / e.
double one_over_e_time(std::span<const double> t, std::span<const double> y, std::size_t start, double level) {
  const double y0 = std::abs(y[start] - level);
  for (std::size_t i = start + 1; i < y.size(); ++i) {
    const double v = std::abs(y[i] - level);
    if (v < y0 / std::exp(1.0)) {
      const double vp = std::abs(y[i - 1] - level);
      const double frac = vp > v ? (vp - y0 / std::exp(1.0)) / (vp - v) : 0.0;
      return t[i - 1] + frac * (t[i] - t[i - 1]) - t[start];
    }
  }
  return 0.25 * (t.back() - t[start]);
}

}  // namespace

void TimeTrace::validate() const {
  if (t.size() != signal.size()) throw std::invalid_argument("time trace grid and signal differ in length");
  if (!response.empty() && response.size() != t.size())
    throw std::invalid_argument("instrument response must share the trace grid");
  require_increasing(t, "time grid");
  require_finite(signal, "signal");
  require_finite(response, "instrument response");
}

void OpticalSpectrum::validate() const {
  if (wavelength_nm.size() != intensity.size())
    throw std::invalid_argument("wavelength grid and intensity differ in length");
  if (wavelength_nm.size() < 2) throw std::invalid_argument("optical spectrum needs at least two samples");
  require_increasing(wavelength_nm, "wavelength grid");
  require_finite(intensity, "intensity");
}

FitResult fit_exponential_settle(const TimeTrace& trace, const LeastSquaresOptions& options) {
  trace.validate();
  const auto& t = trace.t;
  const auto& y = trace.signal;
  if (t.size() < 8) throw std::invalid_argument("exponential fit needs at least 8 samples");

  const std::size_t tail = std::max<std::size_t>(1, t.size() / 10);
  const double floor_guess = std::accumulate(y.end() - static_cast<std::ptrdiff_t>(tail), y.end(), 0.0) /
                             static_cast<double>(tail);
  const double span = t.back() - t.front();
  const double amp_guess = y.front() - floor_guess;
  double tc_guess = one_over_e_time(t, y, 0, floor_guess);
  tc_guess = std::clamp(tc_guess, 1e-3 * span, 10.0 * span);
  const double t_start = t.front();

  auto model = [t_start](double x, std::span<const double> p) {
    return p[1] * std::exp(-(x - t_start) / p[0]) + p[2];
  };
  ParameterBounds bounds{{1e-6 * span, -kInf, -kInf}, {1e3 * span, kInf, kInf}};
  FitResult fit = fit_curve(model, t, y, {"t_const", "amplitude", "floor"}, {tc_guess, amp_guess, floor_guess},
                            bounds, options);
  if (fit.converged) {
    const double a = fit.value("amplitude");
    const double sa = fit.uncertainty("amplitude");
    if (!(std::abs(a) > 2.0 * sa))
      fit.warnings.emplace_back("amplitude is indistinguishable from zero; t_const is unconstrained");
  }
  return fit;
}

std::vector<double> gaussian_response(std::span<const double> t, double center, double fwhm) {
  require_increasing(t, "time grid");
  const double dt = uniform_step(t);
  if (!(fwhm >= dt * (1.0 - 1e-9))) throw std::invalid_argument("response is narrower than the grid step");
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  std::vector<double> r(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = (t[i] - center) / sigma;
    r[i] = std::exp(-0.5 * u * u);
  }
  return r;
}

double response_fwhm(std::span<const double> t, std::span<const double> response) {
  if (t.size() != response.size() || t.size() < 2) throw std::invalid_argument("response must share the trace grid");
  const auto peak = static_cast<std::size_t>(std::max_element(response.begin(), response.end()) - response.begin());
  const double half = 0.5 * response[peak];
  if (!(response[peak] > 0.0)) throw std::invalid_argument("instrument response must have a positive maximum");

  const double dt = t[1] - t[0];
  double left = t.front() - 0.5 * dt;
  for (std::size_t i = peak; i > 0; --i) {
    if (response[i - 1] <= half) {
      left = t[i - 1] + (half - response[i - 1]) / (response[i] - response[i - 1]) * (t[i] - t[i - 1]);
      break;
    }
  }
  double right = t.back() + 0.5 * dt;
  for (std::size_t i = peak; i + 1 < t.size(); ++i) {
    if (response[i + 1] <= half) {
      right = t[i] + (response[i] - half) / (response[i] - response[i + 1]) * (t[i + 1] - t[i]);
      break;
    }
  }
  return right - left;
}

std::vector<double> convolved_decay(std::span<const double> t, std::span<const double> response, double tau,
                                    double amplitude, double t0, double baseline) {
  if (t.size() != response.size()) throw std::invalid_argument("response must share the trace grid");
  if (!(tau > 0.0)) throw std::invalid_argument("decay time must be positive");
  const double dt = uniform_step(t);
  const double area = std::accumulate(response.begin(), response.end(), 0.0) * dt;
  if (!(area > 0.0)) throw std::invalid_argument("instrument response must have positive area");

  const double w_max = *std::max_element(response.begin(), response.end());
  std::vector<std::size_t> cells;
  for (std::size_t j = 0; j < response.size(); ++j)
    if (std::abs(response[j]) > 1e-12 * w_max) cells.push_back(j);

  const double cell_decay = -std::expm1(-dt / tau);
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i] - t0;
    double sum = 0.0;
    for (std::size_t j : cells) {
      const double lo = t[j] - 0.5 * dt;
      if (v <= lo) continue;
      const double hi = t[j] + 0.5 * dt;
      const double upper = std::min(hi, v);
      const double part = upper == hi ? cell_decay : -std::expm1(-(upper - lo) / tau);
      sum += response[j] * std::exp(-(v - upper) / tau) * part;
    }
    out[i] = amplitude * sum * tau / area + baseline;
  }
  return out;
}

FitResult fit_lifetime_convolved(const TimeTrace& trace, const LeastSquaresOptions& options) {
  trace.validate();
  if (trace.response.empty()) throw std::invalid_argument("lifetime fit needs an instrument response trace");
  const auto& t = trace.t;
  const auto& y = trace.signal;
  if (t.size() < 8) throw std::invalid_argument("lifetime fit needs at least 8 samples");
  const double dt = uniform_step(t);
  if (response_fwhm(t, trace.response) < dt * (1.0 - 1e-9))
    throw std::invalid_argument("response is narrower than the grid step");

  const std::size_t head = std::max<std::size_t>(3, t.size() / 20);
  const double base_guess = std::accumulate(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(head), 0.0) /
                            static_cast<double>(head);
  const auto ys = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const auto rs = static_cast<std::size_t>(std::max_element(trace.response.begin(), trace.response.end()) -
                                           trace.response.begin());
  const double span = t.back() - t.front();
  const double amp_guess = y[ys] - base_guess;
  const double tau_guess = std::clamp(one_over_e_time(t, y, ys, base_guess), dt, span);
  const double t0_guess = std::clamp(t[ys] - t[rs], -span, span);

  auto residuals = [&](std::span<const double> p, std::span<double> r) {
    const auto m = convolved_decay(t, trace.response, p[0], p[1], p[2], p[3]);
    for (std::size_t i = 0; i < t.size(); ++i) r[i] = m[i] - y[i];
  };
  ParameterBounds bounds{{1e-3 * dt, -kInf, -span, -kInf}, {100.0 * span, kInf, span, kInf}};
  return fit_least_squares(residuals, t.size(), {"tau", "amplitude", "t0", "baseline"},
                           {tau_guess, amp_guess, t0_guess, base_guess}, bounds, options);
}

double trapezoid(std::span<const double> x, std::span<const double> y, double a, double b) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("trapezoid needs matching grids");
  if (!(a <= b)) throw std::invalid_argument("integration bounds are reversed");
  if (a < x.front() || b > x.back()) throw std::invalid_argument("integration window lies outside the grid");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double lo = std::max(a, x[i]);
    const double hi = std::min(b, x[i + 1]);
    if (!(hi > lo)) continue;
    const double slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    const double y_lo = y[i] + slope * (lo - x[i]);
    const double y_hi = y[i] + slope * (hi - x[i]);
    sum += 0.5 * (hi - lo) * (y_lo + y_hi);
  }
  return sum;
}

double debye_waller(const OpticalSpectrum& spec, const DebyeWallerOptions& options) {
  spec.validate();
  const double z_lo = options.zpl_center_nm - options.zpl_half_width_nm;
  const double z_hi = options.zpl_center_nm + options.zpl_half_width_nm;
  if (!(options.zpl_half_width_nm > 0.0)) throw std::invalid_argument("ZPL window must have positive width");
  if (!(options.total_min_nm < options.total_max_nm)) throw std::invalid_argument("total window is empty");
  if (z_lo < options.total_min_nm || z_hi > options.total_max_nm)
    throw std::invalid_argument("ZPL window must lie inside the total window");
  const auto& x = spec.wavelength_nm;
  if (options.total_min_nm < x.front() || options.total_max_nm > x.back())
    throw std::invalid_argument("integration windows must lie inside the wavelength grid");

  std::vector<double> y = spec.intensity;
  if (options.subtract_linear_baseline) {
    auto at = [&](double w) {
      const auto k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), w) - x.begin());
      const std::size_t i = std::clamp<std::size_t>(k, 1, x.size() - 1) - 1;
      return y[i] + (y[i + 1] - y[i]) * (w - x[i]) / (x[i + 1] - x[i]);
    };
    const double y0 = at(options.total_min_nm);
    const double y1 = at(options.total_max_nm);
    const double slope = (y1 - y0) / (options.total_max_nm - options.total_min_nm);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= y0 + slope * (x[i] - options.total_min_nm);
  }
  const double total = trapezoid(x, y, options.total_min_nm, options.total_max_nm);
  if (total == 0.0 || !std::isfinite(total)) throw NumericalError("total integrated intensity is zero");
  return trapezoid(x, y, z_lo, z_hi) / total;
}

namespace {

std::string amp_name(int k) { return "a" + std::to_string(k + 1); }
std::string freq_name(int k) { return "f" + std::to_string(k + 1) + "_mhz"; }

double ramsey_value(std::span<const double> p, int n, double tau) {
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += p[2 * k] * std::cos(2.0 * kPi * p[2 * k + 1] * 1e-3 * tau);
  return sum * std::exp(-tau / (1e3 * p[2 * n]));
}

}  // namespace

FitResult fit_ramsey(const RamseyTrace& trace, const RamseyFitOptions& options) {
  const int n = options.n_components;
  if (n < 1) throw std::invalid_argument("Ramsey fit needs at least one component");
  const auto& t = trace.tau_ns;
  const auto& y = trace.contrast;
  if (t.size() != y.size()) throw std::invalid_argument("trace grid and values differ in length");
  require_increasing(t, "delay grid");
  require_finite(y, "contrast");
  const double dt = uniform_step(t);

  std::vector<std::string> names;
  for (int k = 0; k < n; ++k) {
    names.push_back(amp_name(k));
    names.push_back(freq_name(k));
  }
  names.emplace_back("t2star_us");
  const std::size_t np = names.size();

  std::vector<bool> fixed(np, false);
  std::vector<double> p(np, 0.0);
  for (const auto& [key, value] : options.fixed) {
    const auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw std::invalid_argument("Ramsey fit has no parameter named '" + key + "'");
    const auto j = static_cast<std::size_t>(it - names.begin());
    fixed[j] = true;
    p[j] = value;
  }

  // Frequencies: strongest FFT peaks, ascending, for components not fixed.
  const double nyquist = 500.0 / dt;
  const auto peaks = fft_peaks(trace, n, options.fft);
  std::vector<double> seeds;
  for (const auto& pk : peaks) seeds.push_back(pk.freq_mhz);
  std::sort(seeds.begin(), seeds.end());
  const double bin = fft_bin_width_mhz(trace, options.fft);
  std::size_t next_seed = 0;
  for (int k = 0; k < n; ++k) {
    const std::size_t jf = 2 * static_cast<std::size_t>(k) + 1;
    if (fixed[jf]) continue;
    if (next_seed < seeds.size())
      p[jf] = seeds[next_seed++];
    else
      p[jf] = std::min(nyquist, 4.0 * bin * static_cast<double>(k + 1));
    // A component pinned to zero amplitude carries no frequency information.
    if (fixed[2 * static_cast<std::size_t>(k)] && p[2 * static_cast<std::size_t>(k)] == 0.0) fixed[jf] = true;
  }

  // Amplitudes by linear least squares for a few envelope candidates.
  const double span = t.back() - t.front();
  const std::size_t jt = np - 1;
  std::vector<double> t2_candidates = {span / 10.0 / 1e3, span / 4.0 / 1e3, span / 2.0 / 1e3};
  if (fixed[jt]) t2_candidates = {p[jt]};
  if (!(t2_candidates.front() > 0.0)) throw std::invalid_argument("T2* must be positive");
  double best_rss = kInf;
  std::vector<double> best = p;
  for (double t2 : t2_candidates) {
    std::vector<double> q = p;
    q[jt] = t2;
    std::vector<int> live;
    for (int k = 0; k < n; ++k)
      if (!fixed[2 * static_cast<std::size_t>(k)]) live.push_back(k);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(live.size()));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double env = std::exp(-t[i] / (1e3 * t2));
      double pinned = 0.0;
      for (int k = 0; k < n; ++k) {
        const double c = std::cos(2.0 * kPi * q[2 * static_cast<std::size_t>(k) + 1] * 1e-3 * t[i]) * env;
        if (fixed[2 * static_cast<std::size_t>(k)]) pinned += q[2 * static_cast<std::size_t>(k)] * c;
      }
      for (std::size_t c = 0; c < live.size(); ++c)
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            std::cos(2.0 * kPi * q[2 * static_cast<std::size_t>(live[c]) + 1] * 1e-3 * t[i]) * env;
      rhs(static_cast<Eigen::Index>(i)) = y[i] - pinned;
    }
    if (!live.empty()) {
      const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
      for (std::size_t c = 0; c < live.size(); ++c)
        q[2 * static_cast<std::size_t>(live[c])] = sol(static_cast<Eigen::Index>(c));
    }
    double rss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = ramsey_value(q, n, t[i]) - y[i];
      rss += r * r;
    }
    if (rss < best_rss) {
      best_rss = rss;
      best = q;
    }
  }

  ParameterBounds bounds = ParameterBounds::unbounded(np);
  for (int k = 0; k < n; ++k) {
    bounds.lower[2 * static_cast<std::size_t>(k) + 1] = 0.0;
    bounds.upper[2 * static_cast<std::size_t>(k) + 1] = nyquist;
  }
  bounds.lower[jt] = 1e-6 * span / 1e3;
  bounds.upper[jt] = 1e3 * span / 1e3;
  for (std::size_t j = 0; j < np; ++j) best[j] = std::clamp(best[j], bounds.lower[j], bounds.upper[j]);

  LeastSquaresOptions ls = options.least_squares;
  ls.fixed = fixed;
  auto model = [n](double x, std::span<const double> q) { return ramsey_value(q, n, x); };
  FitResult fit = fit_curve(model, t, y, names, best, bounds, ls);

  // Report components in ascending frequency.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fit.values[2 * a + 1] < fit.values[2 * b + 1]; });
  const auto values = fit.values;
  const auto sigmas = fit.uncertainties;
  for (int k = 0; k < n; ++k) {
    for (int c = 0; c < 2; ++c) {
      fit.values[2 * k + c] = values[2 * order[k] + c];
      if (!sigmas.empty()) fit.uncertainties[2 * k + c] = sigmas[2 * order[k] + c];
    }
  }
  return fit;
}

std::vector<std::string> zero_field_parameter_names(std::span<const FamilyGuess> families) {
  std::vector<std::string> names;
  for (const auto& f : families) {
    names.push_back(f.name + ".d_mhz");
    names.push_back(f.name + ".e_mhz");
    if (f.system.i_nuclear > 0.0) names.push_back(f.name + ".a_mhz");
    names.push_back(f.name + ".scale");
    names.push_back(f.name + ".fwhm_mhz");
  }
  return names;
}

std::vector<double> zero_field_parameters(std::span<const FamilyGuess> families) {
  std::vector<double> p;
  for (const auto& f : families) {
    p.push_back(f.system.d_mhz);
    p.push_back(f.system.e_mhz);
    if (f.system.i_nuclear > 0.0) {
      if (!f.system.a_tensor_mhz.is_isotropic())
        throw std::invalid_argument("zero-field fit supports isotropic hyperfine couplings only");
      p.push_back(f.system.a_tensor_mhz.xx);
    }
    p.push_back(f.scale);
    p.push_back(f.fwhm_mhz);
  }
  return p;
}

std::vector<FamilyGuess> apply_zero_field_parameters(std::span<const FamilyGuess> families,
                                                     std::span<const double> params) {
  std::vector<FamilyGuess> out(families.begin(), families.end());
  std::size_t j = 0;
  for (auto& f : out) {
    if (j + 4 > params.size()) throw std::invalid_argument("parameter vector is too short");
    f.system.d_mhz = params[j++];
    f.system.e_mhz = params[j++];
    if (f.system.i_nuclear > 0.0) {
      if (j >= params.size()) throw std::invalid_argument("parameter vector is too short");
      f.system.a_tensor_mhz = HyperfineTensor::isotropic(params[j++]);
    }
    if (j + 2 > params.size()) throw std::invalid_argument("parameter vector is too short");
    f.scale = params[j++];
    f.fwhm_mhz = params[j++];
  }
  if (j != params.size()) throw std::invalid_argument("parameter vector is too long");
  return out;
}

std::vector<double> zero_field_model(std::span<const FamilyGuess> families, std::span<const double> grid_mhz,
                                     const ZeroFieldFitOptions& options) {
  DriveOptions drive = options.drive;
  drive.min_intensity = 1e-14;
  std::vector<double> amp(grid_mhz.size(), 0.0);
  for (const auto& f : families) {
    const TransitionSet ts = family_transitions(f.system, FieldVector{}, drive);
    accumulate_spectrum(ts, LineShape{options.kind, f.fwhm_mhz}, grid_mhz, f.scale, amp);
  }
  return amp;
}

std::vector<FamilyGuess> seed_zero_field_guesses(const Spectrum& spectrum, std::span<const FamilyGuess> templates,
                                                 const ZeroFieldFitOptions& options) {
  const double floor = 3.0 * median_abs(spectrum.amplitude);
  const auto peaks = find_spectrum_peaks(spectrum, floor);
  std::vector<FamilyGuess> out(templates.begin(), templates.end());
  if (peaks.empty()) return out;

  for (auto& f : out) {
    const TransitionSet ts = family_transitions(f.system, FieldVector{}, options.drive);
    if (ts.empty()) continue;
    double top = 0.0;
    for (const auto& tr : ts) top = std::max(top, tr.intensity);
    std::vector<double> diffs, sides;
    for (const auto& tr : ts) {
      if (tr.intensity < 0.1 * top) continue;
      const auto near = std::min_element(peaks.begin(), peaks.end(), [&](const auto& a, const auto& b) {
        return std::abs(a.freq_mhz - tr.freq_mhz) < std::abs(b.freq_mhz - tr.freq_mhz);
      });
      if (std::abs(near->freq_mhz - tr.freq_mhz) > 0.15 * tr.freq_mhz) continue;
      diffs.push_back(near->freq_mhz - tr.freq_mhz);
      sides.push_back(tr.freq_mhz >= std::abs(f.system.d_mhz) ? 1.0 : -1.0);
    }
    if (diffs.empty()) continue;
    const bool both = std::any_of(sides.begin(), sides.end(), [](double s) { return s > 0; }) &&
                      std::any_of(sides.begin(), sides.end(), [](double s) { return s < 0; });
    double shift_d = 0.0, shift_e = 0.0;
    if (both) {
      Eigen::MatrixXd a(static_cast<Eigen::Index>(diffs.size()), 2);
      Eigen::VectorXd b(static_cast<Eigen::Index>(diffs.size()));
      for (std::size_t i = 0; i < diffs.size(); ++i) {
        a(static_cast<Eigen::Index>(i), 0) = 1.0;
        a(static_cast<Eigen::Index>(i), 1) = sides[i];
        b(static_cast<Eigen::Index>(i)) = diffs[i];
      }
      const Eigen::Vector2d s = a.colPivHouseholderQr().solve(b);
      shift_d = s(0);
      shift_e = s(1);
    } else {
      shift_d = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
    }
    f.system.d_mhz += shift_d;
    const double sign = f.system.e_mhz < 0.0 ? -1.0 : 1.0;
    f.system.e_mhz = sign * std::max(0.0, std::abs(f.system.e_mhz) + shift_e);
  }
  return out;
}

namespace {

// Unit-scale family spectrum for the lattice scan. Lines are evaluated only
// within 25 linewidths of their centre, which is plenty for ranking.
std::vector<double> scan_spectrum(const FamilyGuess& f, double fwhm, std::span<const double> grid,
                                  const ZeroFieldFitOptions& options) {
  DriveOptions drive = options.drive;
  drive.min_intensity = 1e-6;
  const TransitionSet ts = family_transitions(f.system, FieldVector{}, drive);
  const LineShape shape{options.kind, fwhm};
  std::vector<double> u(grid.size(), 0.0);
  for (const auto& t : ts) {
    const auto lo = std::lower_bound(grid.begin(), grid.end(), t.freq_mhz - 25.0 * fwhm);
    const auto hi = std::upper_bound(grid.begin(), grid.end(), t.freq_mhz + 25.0 * fwhm);
    for (auto it = lo; it != hi; ++it)
      u[static_cast<std::size_t>(it - grid.begin())] += t.intensity * shape(*it - t.freq_mhz);
  }
  return u;
}

struct Placement {
  FamilyGuess family;
  std::vector<double> unit;
  double rss = std::numeric_limits<double>::infinity();
};

// Best lattice point of one family against `rest`; the scale follows in
// closed form because line shapes have unit area.
Placement best_placement(const FamilyGuess& current, const FamilyGuess& origin, std::span<const double> rest,
                         std::span<const double> grid, const ZeroFieldFitOptions& options, double fwhm) {
  const int d_steps = 40;
  const int e_steps = 8;
  const int a_steps = origin.system.i_nuclear > 0.0 ? 2 : 0;
  const double range = options.scan_range;
  double rr = 0.0;
  for (double v : rest) rr += v * v;

  // One slot per D step; the reduction runs in index order, so the result
  // does not depend on scheduling.
  std::vector<Placement> slots(2 * d_steps + 1);
  parallel_for(slots.size(), [&](std::size_t slot) {
    const int a = static_cast<int>(slot) - d_steps;
    Placement& best = slots[slot];
    best.family = current;
    for (int b = -e_steps; b <= e_steps; ++b) {
      for (int c = -a_steps; c <= a_steps; ++c) {
        FamilyGuess cand = current;
        cand.system.d_mhz = origin.system.d_mhz * (1.0 + range * a / d_steps);
        cand.system.e_mhz = origin.system.e_mhz * (1.0 + 2.0 * range * b / e_steps);
        if (a_steps > 0)
          cand.system.a_tensor_mhz =
              HyperfineTensor::isotropic(origin.system.a_tensor_mhz.xx * (1.0 + 2.0 * range * c / a_steps));
        auto u = scan_spectrum(cand, fwhm, grid, options);
        double uu = 0.0, ur = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
          uu += u[i] * u[i];
          ur += u[i] * rest[i];
        }
        const double scale = uu > 0.0 ? std::max(0.0, ur / uu) : 0.0;
        const double rss = rr - 2.0 * scale * ur + scale * scale * uu;
        if (rss < best.rss) {
          cand.scale = scale;
          best = {cand, std::move(u), rss};
        }
      }
    }
  });
  Placement best;
  best.family = current;
  for (auto& p : slots)
    if (p.rss < best.rss) best = std::move(p);
  return best;
}

// Lattice search over (D, E, A) per family. Families are first placed one
// at a time and then revisited in coordinate-descent rounds. Two placement
// orders are tried: always taking the family that explains most of what is
// left, and strongest guessed scale first. Families with similar guesses can
// swap roles at lattice resolution, so both outcomes are returned for
// gradient refinement.
struct ScanState {
  std::vector<FamilyGuess> fams;
  double rss = std::numeric_limits<double>::infinity();
};

ScanState scan_from(const std::vector<FamilyGuess>& origin, std::span<const double> grid, std::span<const double> data,
                    const ZeroFieldFitOptions& options, double fwhm, bool by_scale) {
  const std::size_t n = origin.size();
  ScanState st{origin, 0.0};
  auto& fams = st.fams;
  std::vector<std::vector<double>> unit(n);
  std::vector<bool> placed(n, false);

  auto rest_without = [&](std::size_t k) {
    std::vector<double> rest(data.begin(), data.end());
    for (std::size_t j = 0; j < n; ++j)
      if (j != k && placed[j])
        for (std::size_t i = 0; i < rest.size(); ++i) rest[i] -= fams[j].scale * unit[j][i];
    return rest;
  };

  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return origin[a].scale > origin[b].scale; });

  for (std::size_t count = 0; count < n; ++count) {
    Placement winner;
    std::size_t pick = n;
    for (std::size_t k : order) {
      if (placed[k]) continue;
      Placement p = best_placement(fams[k], origin[k], rest_without(k), grid, options, fwhm);
      if (pick == n || p.rss < winner.rss) {
        winner = std::move(p);
        pick = k;
      }
      if (by_scale) break;
    }
    fams[pick] = winner.family;
    unit[pick] = std::move(winner.unit);
    placed[pick] = true;
  }
  for (int round = 0; round < 2; ++round) {
    for (std::size_t k = 0; k < n; ++k) {
      Placement p = best_placement(fams[k], origin[k], rest_without(k), grid, options, fwhm);
      fams[k] = p.family;
      unit[k] = std::move(p.unit);
      st.rss = p.rss;
    }
  }
  return st;
}

std::vector<std::vector<FamilyGuess>> coarse_scan(const std::vector<FamilyGuess>& fams, std::span<const double> grid,
                                                  std::span<const double> data, const ZeroFieldFitOptions& options,
                                                  double fwhm) {
  std::vector<std::vector<FamilyGuess>> out;
  out.push_back(scan_from(fams, grid, data, options, fwhm, false).fams);
  out.push_back(scan_from(fams, grid, data, options, fwhm, true).fams);
  return out;
}

}  // namespace

FitResult fit_zero_field_odmr(const Spectrum& spectrum, std::span<const FamilyGuess> guesses,
                              const ZeroFieldFitOptions& options) {
  if (guesses.empty()) throw std::invalid_argument("zero-field fit needs at least one family");
  const auto& grid = spectrum.freq_grid_mhz;
  const auto& data = spectrum.amplitude;
  if (grid.size() != data.size()) throw std::invalid_argument("spectrum grid and amplitude lengths differ");
  if (grid.size() < 8) throw std::invalid_argument("spectrum has too few samples");
  require_increasing(grid, "frequency grid");
  require_finite(data, "spectrum amplitude");
  for (const auto& g : guesses) {
    g.system.validate();
    if (!(g.fwhm_mhz > 0.0)) throw std::invalid_argument("linewidth guesses must be positive");
  }

  const auto names = zero_field_parameter_names(guesses);
  const std::vector<double> start = zero_field_parameters(guesses);
  const double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  const double span = grid.back() - grid.front();

  // Bounds keep every family inside a factor of two of its guess.
  ParameterBounds bounds = ParameterBounds::unbounded(names.size());
  std::vector<std::size_t> fwhm_index;
  {
    std::size_t j = 0;
    for (const auto& g : guesses) {
      const double d = std::abs(g.system.d_mhz);
      const double e = std::abs(g.system.e_mhz);
      bounds.lower[j] = 0.5 * d;
      bounds.upper[j] = d > 0.0 ? 2.0 * d : span;
      ++j;
      bounds.lower[j] = -(d + e);
      bounds.upper[j] = d + e;
      ++j;
      if (g.system.i_nuclear > 0.0) {
        const double a = std::max(0.5 * d, 2.0 * std::abs(g.system.a_tensor_mhz.xx));
        bounds.lower[j] = -a;
        bounds.upper[j] = a;
        ++j;
      }
      bounds.lower[j] = 0.0;
      ++j;
      bounds.lower[j] = step;
      bounds.upper[j] = std::max(step, std::min(span, 10.0 * std::max(g.fwhm_mhz, options.staging_fwhm_mhz)));
      fwhm_index.push_back(j);
      ++j;
    }
  }
  auto clamp_all = [&](std::vector<double> p) {
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::clamp(p[j], bounds.lower[j], bounds.upper[j]);
    return p;
  };

  auto residuals = [&](std::span<const double> p, std::span<double> r) {
    const auto fams = apply_zero_field_parameters(guesses, p);
    const auto m = zero_field_model(fams, grid, options);
    for (std::size_t i = 0; i < grid.size(); ++i) r[i] = m[i] - data[i];
  };

  double widest = 0.0;
  for (const auto& g : guesses) widest = std::max(widest, g.fwhm_mhz);
  const bool broad = options.staged && !options.scan && options.staging_fwhm_mhz > widest;

  std::vector<std::vector<double>> starts;
  if (options.scan) {
    const std::vector<FamilyGuess> origin(guesses.begin(), guesses.end());
    for (auto fams : coarse_scan(origin, grid, data, options, std::max(widest, 2.0 * step))) {
      for (std::size_t k = 0; k < fams.size(); ++k) fams[k].fwhm_mhz = guesses[k].fwhm_mhz;
      auto p = clamp_all(zero_field_parameters(fams));
      if (std::find(starts.begin(), starts.end(), p) == starts.end()) starts.push_back(std::move(p));
    }
  } else {
    starts.push_back(clamp_all(start));
  }

  FitResult fit;
  for (auto guess : starts) {
    if (broad) {
      // Gradient pass with broad, fixed lines; scales absorb the height change.
      std::vector<double> coarse = guess;
      LeastSquaresOptions ls = options.least_squares;
      ls.fixed.assign(names.size(), false);
      for (std::size_t j : fwhm_index) {
        coarse[j] = std::clamp(options.staging_fwhm_mhz, bounds.lower[j], bounds.upper[j]);
        ls.fixed[j] = true;
      }
      const FitResult first = fit_least_squares(residuals, grid.size(), names, clamp_all(coarse), bounds, ls);
      for (std::size_t j = 0; j < names.size(); ++j)
        if (std::find(fwhm_index.begin(), fwhm_index.end(), j) == fwhm_index.end()) guess[j] = first.values[j];
      guess = clamp_all(guess);
    }
    FitResult candidate = fit_least_squares(residuals, grid.size(), names, guess, bounds, options.least_squares);
    if (fit.values.empty() || (candidate.converged && !fit.converged) ||
        (candidate.converged == fit.converged && candidate.rss < fit.rss))
      fit = std::move(candidate);
  }

  for (std::size_t j = 0; j < names.size(); ++j) {
    const double width = bounds.upper[j] - bounds.lower[j];
    if (std::isfinite(width) && (fit.values[j] - bounds.lower[j] < 1e-9 * width ||
                                 bounds.upper[j] - fit.values[j] < 1e-9 * width) &&
        !names[j].ends_with(".scale"))
      fit.warnings.push_back("parameter '" + names[j] + "' ended on a bound");
  }
  if (fit.converged) {
    for (const auto& g : guesses) {
      const double e = fit.value(g.name + ".e_mhz");
      const double se = fit.uncertainty(g.name + ".e_mhz");
      if (!(std::abs(e) > 2.0 * se))
        fit.warnings.push_back("E of family " + g.name + " is compatible with zero; its sign is ambiguous");
    }
  }
  return fit;
}

}  // namespace spintk
