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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"
#include "spintk/dynamics.hpp"
#include "spintk/error.hpp"

#include <cmath>
#include <random>

using namespace spintk;

namespace {

SpinSystem bare(double d, double e) {
  SpinSystem s;
  s.i_nuclear = 0.0;
  s.d_mhz = d;
  s.e_mhz = e;
  s.axis_polar_deg = 0.0;
  s.axis_azimuth_deg = 0.0;
  return s;
}

RateModel random_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RateModel m;
  const int n = 3 + static_cast<int>(u(rng) * 4.0);
  for (int k = 0; k < n; ++k) m.level_names.push_back("L" + std::to_string(k));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b && u(rng) < 0.5) m.edges.push_back({a, b, 2.0 * u(rng), u(rng) < 0.3});
  m.pumped = {{0, n - 1}};
  m.pump_rate_per_ns = u(rng);
  m.rf_mix_rate_per_ns = 0.1 * u(rng);
  return m;
}

const std::vector<RfSegment> kToggle = {{3000.0, true}, {3000.0, false}};

Eigen::VectorXd excited_start(const RateModel& m) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(m.size());
  p(0) = 1.0;
  return p;
}

}  // namespace

TEST_CASE("rate model: absorbing ground state without pump") {
  const RateModel m = RateModel::fig1f_default().with_pump(0.0).with_rf(0.0);
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(m.size());
  p0(m.level("GS0")) = 1.0;
  const auto t = uniform_grid(0.0, 1000.0, 10.0);
  const auto tr = evolve_rate_model(m, p0, t);
  for (Eigen::Index k = 0; k < tr.populations.cols(); ++k) CHECK((tr.populations.col(k) - p0).norm() == 0.0);
}

TEST_CASE("rate model: conservation and nonnegativity over random graphs") {
  std::mt19937_64 rng(17);
  const auto t = uniform_grid(0.0, 200.0, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const RateModel m = random_model(rng);
    const auto tr = evolve_rate_model(m, excited_start(m), t);
    for (Eigen::Index k = 0; k < tr.populations.cols(); ++k) {
      CHECK(std::abs(tr.populations.col(k).sum() - 1.0) < 1e-9);
      CHECK(tr.populations.col(k).minCoeff() > -1e-12);
    }
    const Eigen::VectorXd ss = steady_state(m);
    const Eigen::VectorXd ref = oracle::nullspace_steady_state(m.generator());
    if (m.generator().fullPivLu().rank() == m.size() - 1) CHECK((ss - ref).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("rate model: generator column sums and validation") {
  const RateModel m = RateModel::fig1f_default();
  const Eigen::MatrixXd r = m.generator();
  CHECK(r.colwise().sum().cwiseAbs().maxCoeff() < 1e-15);
  RateModel bad = m;
  bad.edges[0].rate_per_ns = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(evolve_rate_model(bad, excited_start(m), std::vector<double>{0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(m.level("XX"), std::invalid_argument);
}

TEST_CASE("rate model: positive ODMR contrast and steady-state oracle") {
  const RateModel m = RateModel::fig1f_default();
  const double with_rf = m.pl_weights().dot(steady_state(m));
  const double without = m.pl_weights().dot(steady_state(m.with_rf(0.0)));
  CHECK(with_rf > without);
  CHECK(odmr_contrast(with_rf, without) > 0.0);
  CHECK((steady_state(m) - oracle::nullspace_steady_state(m.generator())).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rate model: long evolution conserves probability") {
  const RateModel m = RateModel::fig1f_default();
  const double h = 0.1 / m.max_rate();
  std::vector<double> t(100001);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = h * static_cast<double>(i);
  const auto tr = evolve_rate_model(m, excited_start(m), t);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < tr.populations.cols(); ++k)
    worst = std::max(worst, std::abs(tr.populations.col(k).sum() - 1.0));
  CHECK(worst < 1e-9);
  // The end of the run sits on the linear-solve steady state.
  CHECK((tr.populations.col(tr.populations.cols() - 1) - oracle::nullspace_steady_state(m.generator()))
            .cwiseAbs()
            .maxCoeff() < 1e-6);
}

TEST_CASE("PL transient: settle time, flat trace, rate scaling") {
  const RateModel m = RateModel::fig1f_default();
  const auto tr = simulate_pl_transient(m, kToggle, 1.0);
  CHECK(tr.settle_time_ns == doctest::Approx(300.0).epsilon(5.0 / 300.0));

  // RF on raises the PL.
  const auto on_end = static_cast<std::size_t>(3000);
  CHECK(tr.trace.pl_rate[on_end] > tr.trace.pl_rate.back());

  const std::vector<RfSegment> dark = {{3000.0, false}, {3000.0, false}};
  const auto flat = simulate_pl_transient(m, dark, 1.0);
  CHECK(std::isnan(flat.settle_time_ns));
  const Eigen::VectorXd pumped = steady_state(m.with_rf(0.0));
  CHECK(flat.trace.pl_rate.back() == doctest::Approx(m.pl_weights().dot(pumped)).epsilon(1e-3));
  const auto settled = simulate_pl_transient(m, dark, 1.0, pumped);
  const double level = settled.trace.pl_rate.front();
  for (double pl : settled.trace.pl_rate) CHECK(std::abs(pl - level) < 1e-9 * level);

  const auto fast = simulate_pl_transient(m.scaled(2.0), kToggle, 0.5);
  CHECK(tr.settle_time_ns / fast.settle_time_ns == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("pulse sequence contrast") {
  const RateModel m = RateModel::fig1f_default();
  PulseSequence seq;
  const auto zero = sequence_contrast(m, seq, 0.0);
  CHECK(zero.contrast == 0.0);
  const auto full = sequence_contrast(m, seq, 1.0);
  CHECK(full.contrast != 0.0);
  CHECK_THROWS_AS(sequence_contrast(m, seq, 1.5), std::invalid_argument);
  seq.detect_window_ns = 0.0;
  CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
}

TEST_CASE("Ramsey closed form") {
  const auto tau = uniform_grid(0.0, 4000.0, 5.0);
  const auto one = ramsey_closed_form(0.7, 0.0, 1.6, 10.1, 2.0, tau);
  CHECK(one.contrast[0] == 0.7);
  const auto tr = ramsey_closed_form(0.5, 0.5, 1.6, 10.1, 2.0, tau);
  for (std::size_t i = 0; i < tau.size(); ++i)
    CHECK(std::abs(tr.contrast[i]) <= std::exp(-tau[i] / 2000.0) + 1e-15);
  const auto peaks = fft_peaks(tr, 2);
  REQUIRE(peaks.size() == 2);
  const double bin = fft_bin_width_mhz(tr);
  const double lo = std::min(peaks[0].freq_mhz, peaks[1].freq_mhz);
  const double hi = std::max(peaks[0].freq_mhz, peaks[1].freq_mhz);
  CHECK(std::abs(lo - 1.6) <= bin);
  CHECK(std::abs(hi - 10.1) <= bin);
  CHECK_THROWS_AS(ramsey_closed_form(1, 0, 1, 1, 0.0, tau), std::invalid_argument);
}

TEST_CASE("Ramsey from the Hamiltonian") {
  const auto tau = uniform_grid(0.0, 3000.0, 2.0);
  const auto res = ramsey_from_hamiltonian(bare(560.0, 0.0), {}, 560.0, 2.0, tau);
  for (std::size_t i = 0; i < tau.size(); ++i)
    CHECK(res.trace.contrast[i] == doctest::Approx(std::exp(-tau[i] / 2000.0)).epsilon(1e-12));

  const auto det = ramsey_from_hamiltonian(bare(560.0, 0.0), {}, 565.0, 2.0, tau);
  for (std::size_t i = 0; i < tau.size(); ++i)
    CHECK(std::abs(det.trace.contrast[i] - std::cos(2.0 * M_PI * 5e-3 * tau[i]) * std::exp(-tau[i] / 2000.0)) <
          1e-12);

  // Two equal-weight members reduce to the closed form.
  RamseyOptions wide;
  wide.drive.unpolarized = true;
  wide.bandwidth_mhz = 200.0;
  const auto two = ramsey_from_hamiltonian(bare(560.0, 60.0), {}, 510.0, 2.0, tau, wide);
  const auto ref = ramsey_closed_form(0.5, 0.5, 10.0, 110.0, 2.0, tau);
  for (std::size_t i = 0; i < tau.size(); ++i) CHECK(std::abs(two.trace.contrast[i] - ref.contrast[i]) < 1e-9);

  CHECK_THROWS_AS(ramsey_from_hamiltonian(bare(560.0, 0.0), {}, 100.0, 2.0, tau), NumericalError);
  const auto outside = ramsey_from_hamiltonian(bare(560.0, 0.0), {}, 560.0, 2.0, tau);
  CHECK(outside.warnings.empty());
}

TEST_CASE("Ramsey from the Hamiltonian: off-axis family") {
  const SpinSystem nu1 = preset_family("nu1").system;
  const auto tau = uniform_grid(0.0, 4000.0, 4.0);
  const double rf = 500.0;
  const auto res = ramsey_from_hamiltonian(nu1, {}, rf, 2.0, tau);
  // Expected detunings of the two strongest addressed lines from the oracle list.
  oracle::Params p;
  p.d = nu1.d_mhz;
  p.e = nu1.e_mhz;
  p.a = nu1.a_tensor_mhz.matrix();
  p.gamma_n = nu1.gamma_n_mhz_per_mt;
  p.polar_deg = nu1.axis_polar_deg;
  p.azimuth_deg = nu1.axis_azimuth_deg;
  const auto lines = oracle::cluster_lines(p, Vec3::UnitX(), 1e-6);
  std::vector<oracle::Line> addressed;
  for (const auto& l : lines)
    if (std::abs(l.freq - rf) <= 25.0) addressed.push_back({std::abs(l.freq - rf), l.intensity});
  std::sort(addressed.begin(), addressed.end(), [](auto& a, auto& b) { return a.intensity > b.intensity; });
  REQUIRE(addressed.size() >= 2);
  const auto peaks = fft_peaks(res.trace, 2);
  REQUIRE(peaks.size() == 2);
  const double bin = fft_bin_width_mhz(res.trace);
  for (int k = 0; k < 2; ++k) {
    double best = 1e300;
    for (const auto& pk : peaks) best = std::min(best, std::abs(pk.freq_mhz - addressed[k].freq));
    CHECK(best <= bin);
  }
  double total = 0.0;
  for (const auto& c : res.components) total += c.amplitude;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Rabi from the Hamiltonian") {
  const auto tau = uniform_grid(0.0, 1000.0, 1.0);
  const auto res = rabi_from_hamiltonian(bare(560.0, 0.0), {}, 560.0, 5.0, 100.0, tau);
  // On resonance, a pi pulse (100 ns at 5 MHz) fully inverts.
  CHECK(res.trace.contrast[100] == doctest::Approx(std::exp(-0.1 / 100.0)).epsilon(1e-9));
  CHECK(std::abs(res.trace.contrast[200]) < 1e-9);
}

TEST_CASE("T1 trace") {
  const std::vector<double> tau = {0.0, 660.0, 1e7};
  const auto tr = t1_trace(660.0, 1.0, 0.06, tau);
  CHECK(tr.contrast[0] == 1.0);
  CHECK(tr.contrast[1] == doctest::Approx(0.94 / std::exp(1.0) + 0.06).epsilon(1e-14));
  CHECK(tr.contrast[2] == doctest::Approx(0.06).epsilon(1e-14));
  CHECK_THROWS_AS(t1_trace(0.0, 1.0, 0.0, tau), std::invalid_argument);
}

TEST_CASE("FFT peaks") {
  RamseyTrace cosine;
  for (int i = 0; i < 1024; ++i) {
    cosine.tau_ns.push_back(10000.0 * i / 1024.0);
    cosine.contrast.push_back(std::cos(2.0 * M_PI * 5e-3 * cosine.tau_ns.back()));
  }
  const auto peaks = fft_peaks(cosine, 1);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0].freq_mhz - 5.0) < 0.05);

  FftOptions plain;
  plain.pad_factor = 1;
  const auto tr = ramsey_closed_form(0.6, 0.4, 1.6, 10.1, 2.0, uniform_grid(0.0, 4000.0, 10.0));
  const auto unpadded = fft_peaks(tr, 2, plain);
  FftOptions padded;
  padded.pad_factor = 8;
  const auto fine = fft_peaks(tr, 2, padded);
  REQUIRE(unpadded.size() == 2);
  REQUIRE(fine.size() == 2);
  const double bin = fft_bin_width_mhz(tr, plain);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(unpadded[k].freq_mhz - fine[k].freq_mhz) <= bin);

  RamseyTrace flat;
  for (int i = 0; i < 64; ++i) {
    flat.tau_ns.push_back(i);
    flat.contrast.push_back(0.3);
  }
  CHECK(fft_peaks(flat, 2).empty());

  RamseyTrace uneven = flat;
  uneven.tau_ns[10] += 0.5;
  CHECK_THROWS_AS(fft_peaks(uneven, 2), std::invalid_argument);
  flat.tau_ns.resize(8);
  flat.contrast.resize(8);
  CHECK_THROWS_AS(fft_peaks(flat, 1), std::invalid_argument);
}
