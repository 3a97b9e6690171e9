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
// Acceptance checks: one PASS/FAIL line per criterion; exit status is the
// number of failures.

#include "oracle.hpp"
#include "spintk/cli.hpp"
#include "spintk/csv.hpp"
#include "spintk/dynamics.hpp"
#include "spintk/fit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace spintk;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < limit_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s criterion %d: %s (%s; %.2f s of %.0f s)\n", ok ? "PASS" : "FAIL", id, title, o.detail.c_str(),
              secs, limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

SpinSystem bare(double d, double e) {
  SpinSystem s;
  s.i_nuclear = 0.0;
  s.d_mhz = d;
  s.e_mhz = e;
  s.axis_polar_deg = 0.0;
  s.axis_azimuth_deg = 0.0;
  return s;
}

oracle::Params to_oracle(const SpinSystem& s, const Vec3& b) {
  oracle::Params p;
  p.s = s.s_electron;
  p.i = s.i_nuclear;
  p.d = s.d_mhz;
  p.e = s.e_mhz;
  p.a = s.a_tensor_mhz.matrix();
  p.gamma_e = s.gamma_e_mhz_per_mt;
  p.gamma_n = s.gamma_n_mhz_per_mt;
  p.polar_deg = s.axis_polar_deg;
  p.azimuth_deg = s.axis_azimuth_deg;
  p.roll_deg = s.axis_roll_deg;
  p.b = b;
  return p;
}

Outcome analytic_zfs() {
  DriveOptions d;
  d.unpolarized = true;
  const auto ts = family_transitions(bare(560.0, 60.0), {}, d);
  if (ts.size() != 2) return {false, fmt("%g transitions", static_cast<double>(ts.size()))};
  const double e1 = std::abs(ts[0].freq_mhz - 500.0);
  const double e2 = std::abs(ts[1].freq_mhz - 620.0);
  return {e1 < 1e-9 && e2 < 1e-9, fmt("lines at %.12g and %.12g MHz", ts[0].freq_mhz, ts[1].freq_mhz)};
}

Outcome degeneracy() {
  const SpinSystem nu1 = preset_family("nu1").system;
  const auto zero = degeneracy_census(diagonalize(build_hamiltonian(nu1, {})), 1e-6);
  const auto field =
      degeneracy_census(diagonalize(build_hamiltonian(nu1, FieldVector::along(Vec3::UnitZ(), 6.7))), 1e-6);
  const bool ok = zero == std::vector<int>(6, 2) && field == std::vector<int>(12, 1);
  return {ok, fmt("%g multiplets at 0 mT, %g levels at 6.7 mT", static_cast<double>(zero.size()),
                  static_cast<double>(field.size()))};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  const int draws = 1000;
  for (int k = 0; k < draws; ++k) {
    SpinSystem s = preset_family(k % 2 ? "nu1" : "nu2").system;
    s.d_mhz = 700.0 * u(rng);
    s.e_mhz = 150.0 * u(rng);
    s.a_tensor_mhz = HyperfineTensor::isotropic(60.0 * u(rng));
    const Vec3 b(8.0 * u(rng), 8.0 * u(rng), 8.0 * u(rng));
    const auto main = diagonalize(build_hamiltonian(s, FieldVector{b})).values;
    const auto ref = oracle::eigenvalues(oracle::hamiltonian(to_oracle(s, b)));
    worst = std::max(worst, (main - ref).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-6, fmt("%g draws, max deviation %.3g MHz", draws, worst)};
}

Outcome zeeman_slope() {
  const std::vector<Family> fam = {{"zeeman", bare(0.0, 0.0), 1.0}};
  const auto b = uniform_grid(1.0, 10.0, 0.5);
  const auto grid = uniform_grid(0.0, 400.0, 0.05);
  const auto map = field_sweep(fam, Vec3::UnitZ(), b, LineShape{LineShapeKind::lorentzian, 5.0}, grid);
  double sb = 0, sp = 0, sbb = 0, sbp = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto peaks = find_spectrum_peaks(map.row(i), 0.0);
    const auto top = std::max_element(peaks.begin(), peaks.end(),
                                      [](const auto& x, const auto& y) { return x.amplitude < y.amplitude; });
    const double p = top->freq_mhz;
    sb += b[i];
    sp += p;
    sbb += b[i] * b[i];
    sbp += b[i] * p;
  }
  const double n = static_cast<double>(b.size());
  const double slope = (n * sbp - sb * sp) / (n * sbb - sb * sb);
  return {std::abs(slope / 28.0 - 1.0) < 1e-3, fmt("slope %.6f MHz/mT", slope)};
}

Outcome zfs_roundtrip() {
  const auto fams = preset_families();
  std::vector<FamilyGuess> truth;
  for (const auto& f : fams) truth.push_back({f.name, f.system, f.scale, 10.0});
  const auto grid = uniform_grid(50.0, 800.0, 0.5);
  const Spectrum s{grid, zero_field_model(truth, grid)};
  std::mt19937_64 rng(7);
  double worst_de = 0.0, worst_a = 0.0;
  const int trials = 3;
  for (int trial = 0; trial < trials; ++trial) {
    auto guess = truth;
    auto sign = [&] { return (rng() & 1u) ? 1.1 : 0.9; };
    for (auto& g : guess) {
      g.system.d_mhz *= sign();
      g.system.e_mhz *= sign();
      g.system.a_tensor_mhz = HyperfineTensor::isotropic(g.system.a_tensor_mhz.xx * sign());
      g.scale *= sign();
      g.fwhm_mhz *= sign();
    }
    const auto fit = fit_zero_field_odmr(s, guess);
    for (const auto& t : truth) {
      worst_de = std::max(worst_de, std::abs(fit.value(t.name + ".d_mhz") - t.system.d_mhz));
      worst_de = std::max(worst_de, std::abs(fit.value(t.name + ".e_mhz") - t.system.e_mhz));
      if (t.system.nuclear_dim() > 1)
        worst_a = std::max(worst_a, std::abs(fit.value(t.name + ".a_mhz") - t.system.a_tensor_mhz.xx));
    }
  }
  return {worst_de < 1.0 && worst_a < 2.0,
          fmt("%g trials, max |dD|,|dE| %.3g MHz, max |dA| %.3g MHz", trials, worst_de, worst_a)};
}

Outcome ramsey() {
  const auto tau = uniform_grid(0.0, 4000.0, 10.0);
  const auto clean = ramsey_closed_form(0.5, 0.5, 1.6, 10.1, 2.0, tau);
  int fft_ok = 0, fit_ok = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    RamseyTrace tr = clean;
    std::mt19937_64 rng(static_cast<std::uint64_t>(r));
    std::normal_distribution<double> n(0.0, 0.02);
    for (auto& c : tr.contrast) c += n(rng);
    const auto peaks = fft_peaks(tr, 2);
    const double bin = fft_bin_width_mhz(tr);
    if (peaks.size() == 2) {
      const double lo = std::min(peaks[0].freq_mhz, peaks[1].freq_mhz);
      const double hi = std::max(peaks[0].freq_mhz, peaks[1].freq_mhz);
      if (std::abs(lo - 1.6) <= bin && std::abs(hi - 10.1) <= bin) ++fft_ok;
    }
    const auto fit = fit_ramsey(tr);
    if (std::abs(fit.value("f1_mhz") - 1.6) < 0.05 && std::abs(fit.value("f2_mhz") - 10.1) < 0.05 &&
        std::abs(fit.value("t2star_us") / 2.0 - 1.0) < 0.15)
      ++fit_ok;
  }
  return {fft_ok >= 95 && fit_ok >= 95, fmt("FFT %g/100, fit %g/100", fft_ok, fit_ok)};
}

Outcome lifetime() {
  TimeTrace tr;
  tr.unit = "ps";
  const double fwhm = 10.0;
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  for (int i = 0; i <= 4000; ++i) tr.t.push_back(i);
  tr.response = gaussian_response(tr.t, 200.0, fwhm);
  for (double t : tr.t) tr.signal.push_back(oracle::ex_gaussian(t, 215.0, sigma, 450.0, 1000.0) + 5.0);
  const auto fit = fit_lifetime_convolved(tr);
  const double tau = fit.value("tau");
  return {fit.converged && std::abs(tau - 450.0) < 2.0, fmt("tau %.4f ps", tau)};
}

Outcome t1_repump() {
  auto trace = [](double tc, double floor_ratio, double sigma, std::uint64_t seed) {
    TimeTrace tr;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    for (int i = 0; i <= 200; ++i) {
      const double t = 20.0 * i;
      tr.t.push_back(t);
      tr.signal.push_back((1.0 - floor_ratio) * std::exp(-t / tc) + floor_ratio + (sigma > 0 ? n(rng) : 0.0));
    }
    return tr;
  };
  bool ok = true;
  std::string detail;
  for (double tc : {660.0, 300.0}) {
    const auto clean = fit_exponential_settle(trace(tc, 0.06, 0.0, 0));
    const double ratio = clean.value("floor") / (clean.value("amplitude") + clean.value("floor"));
    const auto noisy = fit_exponential_settle(trace(tc, 0.06, 0.02, 11));
    const double z = std::abs(noisy.value("t_const") - tc) / noisy.uncertainty("t_const");
    ok = ok && std::abs(clean.value("t_const") / tc - 1.0) < 0.01 && std::abs(ratio / 0.06 - 1.0) < 0.01 && z <= 3.0;
    detail += fmt("%g ns: clean %.3f, noisy z %.2f; ", tc, clean.value("t_const"), z);
  }
  const auto settle = simulate_pl_transient(RateModel::fig1f_default(), std::vector<RfSegment>{{3000.0, true},
                                                                                               {3000.0, false}},
                                            1.0);
  ok = ok && std::abs(settle.settle_time_ns / 300.0 - 1.0) < 0.01;
  detail += fmt("rate-model settle %.2f ns", settle.settle_time_ns);
  return {ok, detail};
}

Outcome debye_waller_check() {
  const double step = 0.0625;
  OpticalSpectrum s;
  for (int i = 0; i <= 4000; ++i) {
    const double x = 1250.0 + step * i;
    s.wavelength_nm.push_back(x);
    double y = 0.0;
    if (x >= 1345.0 && x <= 1352.0) y = 39.0 / (7.0 + step);
    if (x >= 1400.0 && x <= 1480.0) y = 61.0 / (80.0 + step);
    s.intensity.push_back(y);
  }
  const double f = debye_waller(s);
  // Power-of-two factors scale every rounding step exactly; others agree to rounding.
  OpticalSpectrum pow2 = s, decimal = s;
  for (auto& v : pow2.intensity) v *= 1024.0;
  for (auto& v : decimal.intensity) v *= 1e3;
  const bool exact = debye_waller(pow2) == f;
  const double drift = std::abs(debye_waller(decimal) - f);
  return {std::abs(f - 0.39) <= 1e-6 && exact && drift <= 1e-12 * f,
          fmt("fraction %.9f, x1024 identical %g, x1000 drift %.2g", f, exact, drift)};
}

Outcome rate_model() {
  const RateModel m = RateModel::fig1f_default();
  const double with_rf = m.pl_weights().dot(steady_state(m));
  const double without = m.pl_weights().dot(steady_state(m.with_rf(0.0)));
  const double ss_err = (steady_state(m) - oracle::nullspace_steady_state(m.generator())).cwiseAbs().maxCoeff();
  const double h = 0.1 / m.max_rate();
  std::vector<double> t(100001);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = h * static_cast<double>(i);
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(m.size());
  p0(0) = 1.0;
  const auto tr = evolve_rate_model(m, p0, t);
  double drift = 0.0;
  for (Eigen::Index k = 0; k < tr.populations.cols(); ++k)
    drift = std::max(drift, std::abs(tr.populations.col(k).sum() - 1.0));
  return {with_rf > without && ss_err < 1e-6 && drift < 1e-9,
          fmt("PL %.6g vs %.6g, steady-state error %.2g", with_rf, without, ss_err) +
              fmt(", drift %.2g over 1e5 steps", drift)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "spintk_acceptance";
  fs::remove_all(root);
  const fs::path in = root / "inputs";
  fs::create_directories(in);

  // Inputs shared by both runs.
  std::ostringstream sink, err;
  auto cli = [&](std::vector<std::string> args) {
    sink.str("");
    err.str("");
    return run_cli(args, sink, err);
  };
  cli({"spectrum", "--preset", "nu4", "--freq-min-mhz", "150", "--freq-max-mhz", "300", "--out",
       (in / "zfs.csv").string()});
  cli({"t1-sim", "--noise", "0.02", "--seed", "4", "--out", (in / "t1.csv").string()});
  cli({"ramsey-sim", "--f1-mhz", "1.6", "--f2-mhz", "10.1", "--noise", "0.02", "--seed", "4", "--out",
       (in / "ramsey.csv").string()});
  DataTable life, optical;
  std::vector<double> tp, sig, wl, inten;
  for (int i = 0; i <= 2000; ++i) {
    tp.push_back(i);
    sig.push_back(oracle::ex_gaussian(i, 215.0, 4.0, 450.0, 1000.0) + 5.0);
  }
  for (int i = 0; i <= 600; ++i) {
    wl.push_back(1250.0 + 0.5 * i);
    inten.push_back(1.0 + std::exp(-std::pow((wl.back() - 1348.7) / 2.0, 2)));
  }
  life.add_column("t_ps", tp);
  life.add_column("signal", sig);
  optical.add_column("wavelength_nm", wl);
  optical.add_column("intensity", inten);
  write_csv(in / "life.csv", life);
  write_csv(in / "optical.csv", optical);

  auto commands = [&](const fs::path& d) {
    auto p = [&](const char* n) { return (d / n).string(); };
    auto i = [&](const char* n) { return (in / n).string(); };
    return std::vector<std::vector<std::string>>{
        {"levels", "--preset", "nu1", "--b-max-mt", "7", "--out", p("levels.csv")},
        {"spectrum", "--preset", "all", "--b-mt", "2", "--transitions", p("lines.csv"), "--out", p("spectrum.csv")},
        {"sweep", "--preset", "nu1", "--b-max-mt", "2", "--b-step-mt", "0.5", "--out", p("sweep.csv")},
        {"rate-sim", "--pre-ns", "500", "--rf-on-ns", "500", "--rf-off-ns", "1000", "--out", p("rate.csv")},
        {"ramsey-sim", "--preset", "nu1", "--rf-mhz", "500", "--noise", "0.01", "--seed", "9", "--out",
         p("ramsey.csv")},
        {"t1-sim", "--noise", "0.01", "--seed", "9", "--out", p("t1.csv")},
        {"fit-zfs", "--input", i("zfs.csv"), "--preset", "nu4", "--json", p("zfs.json"), "--report", p("zfs.txt")},
        {"fit-lifetime", "--input", i("life.csv"), "--response-fwhm", "10", "--response-center", "200", "--json",
         p("life.json"), "--report", p("life.txt")},
        {"fit-t1", "--input", i("t1.csv"), "--json", p("t1.json"), "--report", p("t1.txt")},
        {"fit-ramsey", "--input", i("ramsey.csv"), "--json", p("fr.json"), "--report", p("fr.txt")},
        {"dw-factor", "--input", i("optical.csv"), "--out", p("dw.txt")},
        {"presets", "--out", p("presets.cfg")},
    };
  };

  std::vector<std::string> stdout_a, stdout_b;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    for (const auto& c : commands(d)) {
      const int code = cli(c);
      if (code != 0) return {false, c.front() + " exited with " + std::to_string(code) + ": " + err.str()};
      (std::string(run) == "a" ? stdout_a : stdout_b).push_back(sink.str());
    }
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const auto other = root / "b" / entry.path().filename();
    if (!fs::exists(other) || read_text_file(entry.path()) != read_text_file(other))
      return {false, entry.path().filename().string() + " differs"};
    ++files;
  }
  if (stdout_a != stdout_b) return {false, "standard output differs"};
  return {files == 17, std::to_string(files) + " files and 12 stdout streams identical"};
}

}  // namespace

int main() {
  criterion(1, "analytic zero-field lines at D-E and D+E", 1, analytic_zfs);
  criterion(2, "six zero-field doublets, twelve levels at 6.7 mT", 1, degeneracy);
  criterion(3, "eigenvalues match the Kronecker oracle", 60, oracle_equivalence);
  criterion(4, "Zeeman slope 28 MHz/mT", 5, zeeman_slope);
  criterion(5, "four-family zero-field roundtrip from perturbed guesses", 120, zfs_roundtrip);
  criterion(6, "Ramsey FFT and fit over 100 noisy replicates", 60, ramsey);
  criterion(7, "lifetime deconvolution of a 10 ps response", 5, lifetime);
  criterion(8, "T1 and repump time constants", 5, t1_repump);
  criterion(9, "Debye-Waller fraction and scaling invariance", 1, debye_waller_check);
  criterion(10, "rate model contrast, steady state, conservation", 10, rate_model);
  criterion(11, "CLI determinism", 120, determinism);
  return failures;
}
