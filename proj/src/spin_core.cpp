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
#include "spintk/spin_core.hpp"

#include "spintk/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

namespace spintk {

namespace {

using cd = std::complex<double>;

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::Matrix3d rot_z(double rad) {
  Eigen::Matrix3d r;
  r << std::cos(rad), -std::sin(rad), 0.0, std::sin(rad), std::cos(rad), 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::Matrix3d rot_y(double rad) {
  Eigen::Matrix3d r;
  r << std::cos(rad), 0.0, std::sin(rad), 0.0, 1.0, 0.0, -std::sin(rad), 0.0, std::cos(rad);
  return r;
}

}  // namespace

int spin_dimension(double s) {
  const double twice = 2.0 * s;
  if (!std::isfinite(s) || s < 0.0 || std::abs(twice - std::round(twice)) > 1e-12)
    throw std::invalid_argument("spin quantum number must be a nonnegative half-integer, got " +
                                std::to_string(s));
  return static_cast<int>(std::lround(twice)) + 1;
}

SpinMatrices spin_matrices(double s) {
  const int n = spin_dimension(s);
  const double twice = static_cast<double>(n - 1);
  const double ss = 0.5 * twice * (0.5 * twice + 1.0);

  Eigen::MatrixXcd raise = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = 0.5 * twice - i;
    z(i, i) = m;
    // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>, and |m+1> sits one row up.
    if (i > 0) raise(i - 1, i) = std::sqrt(ss - m * (m + 1.0));
  }
  const Eigen::MatrixXcd lower = raise.adjoint();
  SpinMatrices out;
  out.x = 0.5 * (raise + lower);
  out.y = cd(0.0, -0.5) * (raise - lower);
  out.z = z;
  return out;
}

Eigen::MatrixXcd SpinMatrices::along(const Vec3& n) const { return n.x() * x + n.y() * y + n.z() * z; }

Eigen::Matrix3d HyperfineTensor::matrix() const {
  Eigen::Matrix3d a;
  a << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  return a;
}

SpinSystem SpinSystem::with_isotropic_hyperfine(double d_mhz, double e_mhz, double a_mhz) {
  SpinSystem sys;
  sys.d_mhz = d_mhz;
  sys.e_mhz = e_mhz;
  sys.a_tensor_mhz = HyperfineTensor::isotropic(a_mhz);
  return sys;
}

Eigen::Matrix3d SpinSystem::defect_frame() const {
  return rot_z(axis_azimuth_deg * kDegToRad) * rot_y(axis_polar_deg * kDegToRad) *
         rot_z(axis_roll_deg * kDegToRad);
}

void SpinSystem::validate() const {
  spin_dimension(s_electron);
  spin_dimension(i_nuclear);
  const auto a = a_tensor_mhz.matrix();
  const double scalars[] = {d_mhz, e_mhz, gamma_e_mhz_per_mt, gamma_n_mhz_per_mt,
                            axis_polar_deg, axis_azimuth_deg, axis_roll_deg};
  for (double v : scalars)
    if (!std::isfinite(v)) throw std::invalid_argument("spin system parameters must be finite");
  if (!a.allFinite()) throw std::invalid_argument("hyperfine tensor must be finite");
}

std::vector<std::string> SpinSystem::warnings() const {
  std::vector<std::string> out;
  if (std::abs(e_mhz) > std::abs(d_mhz))
    out.emplace_back("|E| exceeds |D|; axis labels are no longer conventional");
  return out;
}

FieldVector FieldVector::along(const Vec3& axis, double magnitude_mt) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("field axis must be a nonzero finite vector");
  return FieldVector{axis / n * magnitude_mt};
}

void FieldVector::validate() const {
  if (!b_mt.allFinite()) throw std::invalid_argument("magnetic field components must be finite");
}

HamiltonianMatrix HamiltonianMatrix::generic(Eigen::MatrixXcd m) {
  HamiltonianMatrix h;
  h.electron_dim = static_cast<int>(m.rows());
  h.nuclear_dim = 1;
  h.mhz = std::move(m);
  return h;
}

HamiltonianMatrix build_hamiltonian(const SpinSystem& sys, const FieldVector& b) {
  sys.validate();
  b.validate();

  const SpinMatrices s = spin_matrices(sys.s_electron);
  const SpinMatrices i = spin_matrices(sys.i_nuclear);
  const int ne = s.dim();
  const int nn = i.dim();
  const Eigen::MatrixXcd id_e = Eigen::MatrixXcd::Identity(ne, ne);
  const Eigen::MatrixXcd id_n = Eigen::MatrixXcd::Identity(nn, nn);

  const Vec3 b_def = sys.to_defect_frame(b.b_mt);
  const double casimir = sys.s_electron * (sys.s_electron + 1.0);

  Eigen::MatrixXcd electron = sys.d_mhz * (s.z * s.z - casimir / 3.0 * id_e) +
                              sys.e_mhz * (s.x * s.x - s.y * s.y) + sys.gamma_e_mhz_per_mt * s.along(b_def);

  Eigen::MatrixXcd h = kron(electron, id_n) - sys.gamma_n_mhz_per_mt * kron(id_e, i.along(b_def));

  const Eigen::Matrix3d a = sys.a_tensor_mhz.matrix();
  const Eigen::MatrixXcd* s_ops[] = {&s.x, &s.y, &s.z};
  const Eigen::MatrixXcd* i_ops[] = {&i.x, &i.y, &i.z};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (a(r, c) != 0.0) h += a(r, c) * kron(*s_ops[r], *i_ops[c]);

  // Entrywise average with the adjoint makes the result exactly Hermitian.
  Eigen::MatrixXcd herm = 0.5 * (h + h.adjoint());
  for (Eigen::Index k = 0; k < herm.rows(); ++k) herm(k, k) = herm(k, k).real();

  HamiltonianMatrix out;
  out.mhz = std::move(herm);
  out.electron_dim = ne;
  out.nuclear_dim = nn;
  return out;
}

EigenSolution diagonalize(const Eigen::MatrixXcd& h, const JacobiOptions& options) {
  return diagonalize(HamiltonianMatrix::generic(h), options);
}

EigenSolution diagonalize(const HamiltonianMatrix& hm, const JacobiOptions& options) {
  const Eigen::MatrixXcd& h = hm.mhz;
  const Eigen::Index n = h.rows();
  if (h.cols() != n) throw std::invalid_argument("diagonalize: matrix must be square");
  if (hm.electron_dim * hm.nuclear_dim != n)
    throw std::invalid_argument("diagonalize: factor dimensions do not match matrix size");
  if (!h.allFinite()) throw std::invalid_argument("diagonalize: matrix has non-finite entries");

  const double max_abs = n > 0 ? h.cwiseAbs().maxCoeff() : 0.0;
  const double asym = n > 0 ? (h - h.adjoint()).cwiseAbs().maxCoeff() : 0.0;
  if (asym > options.hermitian_tolerance * max_abs)
    throw std::invalid_argument("diagonalize: matrix is not Hermitian (max |H - H^+| = " +
                                std::to_string(asym) + ")");

  Eigen::MatrixXcd a = 0.5 * (h + h.adjoint());
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Identity(n, n);
  const double norm = a.norm();
  const double target = 1e-15 * norm;

  auto off_norm = [&]() {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off += std::norm(a(p, q));
    return std::sqrt(off);
  };

  int sweep = 0;
  bool converged = norm == 0.0 || off_norm() <= target;
  while (!converged && sweep < options.max_sweeps) {
    ++sweep;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const cd b = a(p, q);
        const double mag = std::abs(b);
        if (mag == 0.0) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        if (sweep > 4 && std::abs(app) + 100.0 * mag == std::abs(app) &&
            std::abs(aqq) + 100.0 * mag == std::abs(aqq)) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const cd phase = b / mag;
        const double zeta = (aqq - app) / (2.0 * mag);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const cd u_qp = -s * std::conj(phase);
        const cd u_qq = c * std::conj(phase);

        for (Eigen::Index k = 0; k < n; ++k) {
          const cd akp = a(k, p);
          const cd akq = a(k, q);
          a(k, p) = akp * c + akq * u_qp;
          a(k, q) = akp * s + akq * u_qq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const cd apk = a(p, k);
          const cd aqk = a(q, k);
          a(p, k) = c * apk + std::conj(u_qp) * aqk;
          a(q, k) = s * apk + std::conj(u_qq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = app - t * mag;
        a(q, q) = aqq + t * mag;
        for (Eigen::Index k = 0; k < n; ++k) {
          const cd vkp = v(k, p);
          const cd vkq = v(k, q);
          v(k, p) = vkp * c + vkq * u_qp;
          v(k, q) = vkp * s + vkq * u_qq;
        }
      }
    }
    converged = off_norm() <= target;
  }

  Eigen::VectorXd raw(n);
  for (Eigen::Index k = 0; k < n; ++k) raw(k) = a(k, k).real();

  if (!converged) {
    double residual = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) residual = std::max(residual, (h * v.col(k) - raw(k) * v.col(k)).norm());
    std::ostringstream msg;
    msg << "Jacobi eigensolver did not converge after " << sweep << " sweeps (residual " << residual << ")";
    throw NumericalError(msg.str());
  }

  // Weight on m_S = 0 and dominant basis component drive the tie-break.
  const int ne = hm.electron_dim;
  const int nn = hm.nuclear_dim;
  std::vector<double> zero_weight(n, 0.0);
  std::vector<Eigen::Index> dominant(n, 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (ne % 2 == 1) {
      const int row0 = (ne - 1) / 2 * nn;
      zero_weight[k] = v.col(k).segment(row0, nn).squaredNorm();
    }
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = std::norm(v(i, k));
      if (w > best + 1e-12) {
        best = w;
        dominant[k] = i;
      }
    }
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) { return raw(l) < raw(r); });

  const double cluster_tol = 1e-10 * norm + 1e-12;
  auto quantize = [](double w) { return std::llround(w * 1e9); };
  for (Eigen::Index start = 0; start < n;) {
    Eigen::Index end = start + 1;
    while (end < n && raw(order[end]) - raw(order[end - 1]) <= cluster_tol) ++end;
    std::stable_sort(order.begin() + start, order.begin() + end, [&](Eigen::Index l, Eigen::Index r) {
      const auto wl = quantize(zero_weight[l]);
      const auto wr = quantize(zero_weight[r]);
      if (wl != wr) return wl > wr;
      return dominant[l] < dominant[r];
    });
    start = end;
  }

  // Within a cluster the values stay ascending; vectors follow the tie-break.
  std::vector<double> sorted(raw.data(), raw.data() + n);
  std::sort(sorted.begin(), sorted.end());

  EigenSolution out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  out.electron_dim = ne;
  out.nuclear_dim = nn;
  out.sweeps = sweep;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[k];
    out.values(k) = sorted[static_cast<std::size_t>(k)];
    Eigen::VectorXcd col = v.col(src);
    col.normalize();
    const cd pivot = col(dominant[src]);
    if (std::abs(pivot) > 0.0) col *= std::conj(pivot) / std::abs(pivot);
    out.vectors.col(k) = col;
  }
  return out;
}

std::vector<int> degeneracy_census(const EigenSolution& eig, double tol_mhz) {
  if (!(tol_mhz > 0.0)) throw std::invalid_argument("degeneracy_census: tolerance must be positive");
  std::vector<int> sizes;
  const auto n = eig.values.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k > 0 && eig.values(k) < eig.values(k - 1))
      throw std::invalid_argument("degeneracy_census: eigenvalues must be ascending");
    if (k == 0 || eig.values(k) - eig.values(k - 1) >= tol_mhz)
      sizes.push_back(1);
    else
      ++sizes.back();
  }
  return sizes;
}

std::string format_projection(double m) {
  const long twice = std::lround(2.0 * m);
  std::string sign = twice > 0 ? "+" : (twice < 0 ? "-" : "");
  const long mag = std::labs(twice);
  if (mag % 2 == 0) return sign + std::to_string(mag / 2);
  return sign + std::to_string(mag) + "/2";
}

std::string dominant_state_label(const EigenSolution& eig, int k, double s_electron, double i_nuclear) {
  const int nn = spin_dimension(i_nuclear);
  if (spin_dimension(s_electron) * nn != eig.size() || k < 0 || k >= eig.size())
    throw std::invalid_argument("dominant_state_label: index or dimensions out of range");
  Eigen::Index best = 0;
  eig.vectors.col(k).cwiseAbs2().maxCoeff(&best);
  const double ms = s_electron - static_cast<double>(best / nn);
  const double mi = i_nuclear - static_cast<double>(best % nn);
  return "|" + format_projection(ms) + "," + format_projection(mi) + ">";
}

}  // namespace spintk
