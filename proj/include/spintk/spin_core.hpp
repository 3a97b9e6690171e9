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

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace spintk {

using Vec3 = Eigen::Vector3d;

/////////////////////////////////////////////////////////////////////////
// Spin operators
// ------------------
// Matrices are (2s+1)-dimensional in the |m> basis ordered s, s-1, ..., -s.
/////////////////////////////////////////////////////////////////////////
struct SpinMatrices {
  Eigen::MatrixXcd x;
  Eigen::MatrixXcd y;
  Eigen::MatrixXcd z;

  int dim() const { return static_cast<int>(z.rows()); }
  // n.x * Sx + n.y * Sy + n.z * Sz
  Eigen::MatrixXcd along(const Vec3& n) const;
};

// Throws std::invalid_argument unless 2s is a nonnegative integer.
SpinMatrices spin_matrices(double s);

// Number of states 2s+1 for a half-integer s; throws like spin_matrices.
int spin_dimension(double s);

/// Symmetric 3x3 hyperfine coupling in MHz. Only the six independent
/// components are stored, so the tensor is symmetric by construction.
struct HyperfineTensor {
  double xx = 0.0;
  double yy = 0.0;
  double zz = 0.0;
  double xy = 0.0;
  double xz = 0.0;
  double yz = 0.0;

  static HyperfineTensor isotropic(double a_mhz) { return {a_mhz, a_mhz, a_mhz, 0.0, 0.0, 0.0}; }

  Eigen::Matrix3d matrix() const;
  bool is_isotropic() const { return xx == yy && yy == zz && xy == 0.0 && xz == 0.0 && yz == 0.0; }
  bool operator==(const HyperfineTensor&) const = default;
};

/// Parameters of one defect family. The defect frame is obtained from the
/// lab frame by the z-y-z rotation (azimuth, polar, roll); its z axis is the
/// defect symmetry axis.
struct SpinSystem {
  double s_electron = 1.0;
  double i_nuclear = 1.5;
  double d_mhz = 0.0;
  double e_mhz = 0.0;
  HyperfineTensor a_tensor_mhz;
  double gamma_e_mhz_per_mt = 28.0;
  double gamma_n_mhz_per_mt = 0.004176;  // 35Cl magnitude
  double axis_polar_deg = 70.53;
  double axis_azimuth_deg = 90.0;
  double axis_roll_deg = 0.0;

  static SpinSystem with_isotropic_hyperfine(double d_mhz, double e_mhz, double a_mhz);

  int electron_dim() const { return spin_dimension(s_electron); }
  int nuclear_dim() const { return spin_dimension(i_nuclear); }
  int dim() const { return electron_dim() * nuclear_dim(); }

  // Columns are the defect x, y, z axes expressed in lab coordinates.
  Eigen::Matrix3d defect_frame() const;
  Vec3 to_defect_frame(const Vec3& lab) const { return defect_frame().transpose() * lab; }

  // Throws std::invalid_argument on a broken invariant.
  void validate() const;
  // Non-fatal remarks such as |E| > |D|.
  std::vector<std::string> warnings() const;

  bool operator==(const SpinSystem&) const = default;
};

struct FieldVector {
  Vec3 b_mt = Vec3::Zero();

  static FieldVector along(const Vec3& axis, double magnitude_mt);
  void validate() const;
};

/// Hamiltonian in MHz on the |m_S> (x) |m_I> product basis, both factors in
/// descending order.
struct HamiltonianMatrix {
  Eigen::MatrixXcd mhz;
  int electron_dim = 1;
  int nuclear_dim = 1;

  int dim() const { return static_cast<int>(mhz.rows()); }
  static HamiltonianMatrix generic(Eigen::MatrixXcd m);
};

HamiltonianMatrix build_hamiltonian(const SpinSystem& sys, const FieldVector& b);

struct EigenSolution {
  Eigen::VectorXd values;    // ascending, MHz
  Eigen::MatrixXcd vectors;  // column k pairs with values(k)
  int electron_dim = 1;
  int nuclear_dim = 1;
  int sweeps = 0;

  int size() const { return static_cast<int>(values.size()); }
};

struct JacobiOptions {
  int max_sweeps = 100;
  double hermitian_tolerance = 1e-12;  // relative to max |H_ij|
};

// Cyclic complex Jacobi. Degenerate eigenvalues are ordered by descending
// weight on the m_S = 0 states, then by the index of the dominant basis
// component. Each eigenvector is phased so that its largest component is
// real and positive.
EigenSolution diagonalize(const HamiltonianMatrix& h, const JacobiOptions& options = {});
EigenSolution diagonalize(const Eigen::MatrixXcd& h, const JacobiOptions& options = {});

// Sizes of eigenvalue clusters whose adjacent gaps are below tol_mhz.
std::vector<int> degeneracy_census(const EigenSolution& eig, double tol_mhz);

// Dominant |m_S, m_I> basis label of eigenvector k, e.g. "|-1,+3/2>".
std::string dominant_state_label(const EigenSolution& eig, int k, double s_electron, double i_nuclear);

std::string format_projection(double m);

}  // namespace spintk
