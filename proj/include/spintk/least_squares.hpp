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

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spintk {

/// Outcome of a nonlinear least-squares fit. Uncertainties are 1-sigma
/// values from the Jacobian covariance and are only filled on convergence;
/// an unconstrained parameter gets +infinity.
struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> uncertainties;
  double rss = std::numeric_limits<double>::quiet_NaN();
  int n_residuals = 0;
  int n_free = 0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  bool used_fallback = false;
  std::vector<std::string> warnings;

  std::size_t index_of(std::string_view name) const;
  double value(std::string_view name) const { return values.at(index_of(name)); }
  double uncertainty(std::string_view name) const;
};

struct ParameterBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static ParameterBounds unbounded(std::size_t n);
};

struct LeastSquaresOptions {
  int max_iterations = 300;
  double ftol = 1e-13;  // relative RSS decrease of an accepted step
  double xtol = 1e-12;  // relative step length
  double gtol = 1e-12;  // cosine between residual and Jacobian columns
  double jacobian_step = 1e-6;
  int escalation_limit = 3;  // consecutive rejected steps before Nelder-Mead
  bool nelder_mead_fallback = true;
  int max_fallbacks = 2;
  int nelder_mead_max_evaluations = 3000;
  std::vector<bool> fixed;  // empty = all free
};

// Writes residuals (model - data, or any weighted form) for a parameter vector.
using ResidualFunction = std::function<void(std::span<const double> params, std::span<double> residuals)>;

FitResult fit_least_squares(const ResidualFunction& residuals, std::size_t n_residuals,
                            std::vector<std::string> names, std::vector<double> guess,
                            const ParameterBounds& bounds, const LeastSquaresOptions& options = {});

using CurveModel = std::function<double(double x, std::span<const double> params)>;

// Fits y ~ model(x, p) by unweighted least squares.
FitResult fit_curve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                    std::vector<std::string> names, std::vector<double> guess, const ParameterBounds& bounds,
                    const LeastSquaresOptions& options = {});

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
};

// Bounded (by clamping) Nelder-Mead minimizer of f.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const ParameterBounds& bounds, int max_evaluations, double ftol = 1e-15);

}  // namespace spintk
