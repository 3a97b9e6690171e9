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
#include "spintk/odmr.hpp"
#include "spintk/spin_core.hpp"

#include <cmath>
#include <random>

using namespace spintk;

namespace {

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

SpinSystem bare(double d, double e) {
  SpinSystem s;
  s.i_nuclear = 0.0;
  s.d_mhz = d;
  s.e_mhz = e;
  s.axis_polar_deg = 0.0;
  s.axis_azimuth_deg = 0.0;
  return s;
}

}  // namespace

TEST_CASE("spin matrices: defining representations") {
  const auto half = spin_matrices(0.5);
  CHECK(half.z(0, 0).real() == doctest::Approx(0.5));
  CHECK(half.z(1, 1).real() == doctest::Approx(-0.5));

  const auto one = spin_matrices(1.0);
  CHECK(one.z(0, 0).real() == 1.0);
  CHECK(one.z(1, 1).real() == 0.0);
  CHECK(one.z(2, 2).real() == -1.0);
  CHECK(one.x(0, 1).real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(one.x(1, 2).real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(one.x(0, 2)) == 0.0);
}

TEST_CASE("spin matrices: commutators and Casimir") {
  const std::complex<double> i(0.0, 1.0);
  for (double s : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    const auto m = spin_matrices(s);
    const auto id = Eigen::MatrixXcd::Identity(m.dim(), m.dim());
    CHECK((m.x * m.y - m.y * m.x - i * m.z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m.y * m.z - m.z * m.y - i * m.x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m.z * m.x - m.x * m.z - i * m.y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m.x * m.x + m.y * m.y + m.z * m.z - s * (s + 1.0) * id).cwiseAbs().maxCoeff() < 1e-12);
    const auto o = oracle::spin_ops(s);
    CHECK((m.x - o.x).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((m.y - o.y).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(spin_matrices(0.7), std::invalid_argument);
  CHECK_THROWS_AS(spin_matrices(-1.0), std::invalid_argument);
}

TEST_CASE("hamiltonian: analytic zero-field levels") {
  const auto eig = diagonalize(build_hamiltonian(bare(560.0, 0.0), {}));
  REQUIRE(eig.size() == 3);
  CHECK(eig.values(0) == doctest::Approx(-2.0 * 560.0 / 3.0).epsilon(1e-14));
  CHECK(eig.values(1) == doctest::Approx(560.0 / 3.0).epsilon(1e-14));
  CHECK(eig.values(2) == doctest::Approx(560.0 / 3.0).epsilon(1e-14));

  const auto e2 = diagonalize(build_hamiltonian(bare(560.0, 60.0), {}));
  CHECK(std::abs(e2.values(1) - e2.values(0) - 500.0) < 1e-9);
  CHECK(std::abs(e2.values(2) - e2.values(0) - 620.0) < 1e-9);
}

TEST_CASE("hamiltonian: pure Zeeman") {
  const auto eig = diagonalize(build_hamiltonian(bare(0.0, 0.0), FieldVector{Vec3(0, 0, 10)}));
  CHECK(eig.values(1) - eig.values(0) == doctest::Approx(280.0).epsilon(1e-12));
  CHECK(eig.values(2) - eig.values(1) == doctest::Approx(280.0).epsilon(1e-12));
}

TEST_CASE("hamiltonian: oracle equivalence, hermiticity, trace") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    SpinSystem s;
    s.d_mhz = 600.0 * u(rng);
    s.e_mhz = 100.0 * u(rng);
    s.a_tensor_mhz = {50 * u(rng), 50 * u(rng), 50 * u(rng), 20 * u(rng), 20 * u(rng), 20 * u(rng)};
    s.axis_polar_deg = 180.0 * u(rng);
    s.axis_azimuth_deg = 180.0 * u(rng);
    s.axis_roll_deg = 180.0 * u(rng);
    const Vec3 b(10 * u(rng), 10 * u(rng), 10 * u(rng));
    const auto h = build_hamiltonian(s, FieldVector{b});
    CHECK((h.mhz - h.mhz.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(h.mhz.trace()) < 1e-9 * h.mhz.norm());
    const Eigen::MatrixXcd ref = oracle::hamiltonian(to_oracle(s, b));
    const auto eig = diagonalize(h);
    const auto ev = oracle::eigenvalues(ref);
    CHECK((eig.values - ev).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("hamiltonian: rotation invariance") {
  SpinSystem s = preset_family("nu1").system;
  const Vec3 b(1.0, 2.0, 3.0);
  const auto base = diagonalize(build_hamiltonian(s, FieldVector{b}));
  // A rotation about z shifts the azimuth; co-rotate the field.
  const double phi = 37.0;
  SpinSystem r = s;
  r.axis_azimuth_deg += phi;
  const Vec3 rb = Eigen::AngleAxisd(phi * M_PI / 180.0, Vec3::UnitZ()) * b;
  const auto rot = diagonalize(build_hamiltonian(r, FieldVector{rb}));
  CHECK((base.values - rot.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("diagonalize: small cases and residual") {
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  const auto e = diagonalize(d);
  CHECK(e.values(0) == 1.0);
  CHECK(e.values(1) == 2.0);
  CHECK(e.values(2) == 3.0);

  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(3, 3);
  p(0, 1) = p(1, 0) = 1.0;
  const auto ep = diagonalize(p);
  CHECK(ep.values(0) == doctest::Approx(-1.0));
  CHECK(std::abs(ep.values(1)) < 1e-15);
  CHECK(ep.values(2) == doctest::Approx(1.0));

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXcd a(12, 12);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) a(i, j) = {n(rng), n(rng)};
    const Eigen::MatrixXcd h = a + a.adjoint();
    const auto eig = diagonalize(h);
    const double scale = h.norm();
    CHECK((h * eig.vectors - eig.vectors * eig.values.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10 * scale);
    CHECK((eig.vectors.adjoint() * eig.vectors - Eigen::MatrixXcd::Identity(12, 12)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((eig.values - oracle::eigenvalues(h)).cwiseAbs().maxCoeff() < 1e-10 * scale);
  }

  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS(diagonalize(bad));
}

TEST_CASE("degeneracy census") {
  const SpinSystem nu1 = preset_family("nu1").system;
  const auto zero = diagonalize(build_hamiltonian(nu1, {}));
  CHECK(degeneracy_census(zero, 1e-6) == std::vector<int>(6, 2));
  const auto field = diagonalize(build_hamiltonian(nu1, FieldVector::along(Vec3::UnitZ(), 6.7)));
  CHECK(degeneracy_census(field, 1e-3) == std::vector<int>(12, 1));
  // Oracle agrees on the cluster structure at 6.7 mT.
  const auto ev = oracle::eigenvalues(oracle::hamiltonian(to_oracle(nu1, Vec3(0, 0, 6.7))));
  for (int k = 1; k < ev.size(); ++k) CHECK(ev(k) - ev(k - 1) > 1e-3);
  CHECK(degeneracy_census(diagonalize(build_hamiltonian(bare(0.0, 0.0), {})), 1e-6) == std::vector<int>{3});
}

TEST_CASE("zero-field Kramers pairing for half-integer nuclear spin") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    SpinSystem s = SpinSystem::with_isotropic_hyperfine(600 * u(rng), 100 * u(rng), 50 * u(rng));
    for (int c : degeneracy_census(diagonalize(build_hamiltonian(s, {})), 1e-6)) CHECK(c % 2 == 0);
  }
}

TEST_CASE("state labels") {
  const auto eig = diagonalize(build_hamiltonian(bare(0.0, 0.0), FieldVector{Vec3(0, 0, 1)}));
  CHECK(dominant_state_label(eig, 0, 1.0, 0.0) == "|-1,0>");
  CHECK(dominant_state_label(eig, 2, 1.0, 0.0) == "|+1,0>");
  CHECK(format_projection(-1.5) == "-3/2");
  CHECK(format_projection(0.5) == "+1/2");
}

TEST_CASE("validation") {
  SpinSystem s;
  s.d_mhz = std::nan("");
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(FieldVector::along(Vec3::Zero(), 1.0), std::invalid_argument);
  SpinSystem w = bare(10.0, 20.0);
  CHECK(w.warnings().size() == 1);
}
