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
#include "spintk/least_squares.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spintk {

std::size_t FitResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw std::out_of_range("fit result has no parameter named '" + std::string(name) + "'");
}

double FitResult::uncertainty(std::string_view name) const {
  const auto i = index_of(name);
  if (i >= uncertainties.size()) return std::numeric_limits<double>::quiet_NaN();
  return uncertainties[i];
}

ParameterBounds ParameterBounds::unbounded(std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_to(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Evaluates the objective over the free parameters while tracking the
// number of model calls.
class Problem {
 public:
  Problem(const ResidualFunction& fn, std::size_t m, std::vector<double> full, std::vector<std::size_t> free,
          const ParameterBounds& bounds)
      : fn_(fn), m_(m), full_(std::move(full)), free_(std::move(free)), bounds_(bounds) {}

  std::size_t m() const { return m_; }
  std::size_t n() const { return free_.size(); }
  int evaluations() const { return evaluations_; }

  double lower(std::size_t j) const { return bounds_.lower[free_[j]]; }
  double upper(std::size_t j) const { return bounds_.upper[free_[j]]; }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = x;
    for (std::size_t j = 0; j < n(); ++j) out(j) = clamp_to(x(j), lower(j), upper(j));
    return out;
  }

  std::vector<double> expand(const Eigen::VectorXd& x) const {
    std::vector<double> p = full_;
    for (std::size_t j = 0; j < n(); ++j) p[free_[j]] = x(j);
    return p;
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) {
    ++evaluations_;
    const std::vector<double> p = expand(x);
    Eigen::VectorXd r(m_);
    fn_(p, std::span<double>(r.data(), m_));
    return r;
  }

  double rss(const Eigen::VectorXd& r) const {
    if (!r.allFinite()) return kInf;
    return r.squaredNorm();
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& r0, double rel_step) {
    Eigen::MatrixXd j(m_, n());
    for (std::size_t c = 0; c < n(); ++c) {
      double h = rel_step * std::max(std::abs(x(c)), 1.0);
      if (x(c) + h > upper(c)) h = -h;
      Eigen::VectorXd xp = x;
      xp(c) += h;
      const double actual = xp(c) - x(c);
      j.col(c) = (residuals(xp) - r0) / actual;
    }
    return j;
  }

 private:
  const ResidualFunction& fn_;
  std::size_t m_;
  std::vector<double> full_;
  std::vector<std::size_t> free_;
  const ParameterBounds& bounds_;
  int evaluations_ = 0;
};

void fill_uncertainties(FitResult& out, Problem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& r,
                        const std::vector<std::size_t>& free, double rel_step) {
  const std::size_t n = prob.n();
  const std::size_t m = prob.m();
  out.uncertainties.assign(out.values.size(), 0.0);
  if (n == 0) return;

  const Eigen::MatrixXd j = prob.jacobian(x, r, rel_step);
  const Eigen::MatrixXd jtj = j.transpose() * j;
  const double rss = r.squaredNorm();
  double s2 = rss;
  if (m > n)
    s2 = rss / static_cast<double>(m - n);
  else
    out.warnings.emplace_back("no residual degrees of freedom; uncertainties use the raw residual sum");

  Eigen::VectorXd scale(n);
  for (std::size_t c = 0; c < n; ++c) scale(c) = std::sqrt(jtj(c, c));

  std::vector<bool> unconstrained(n, false);
  std::vector<std::size_t> live;
  for (std::size_t c = 0; c < n; ++c) {
    if (!(scale(c) > 0.0) || !std::isfinite(scale(c)))
      unconstrained[c] = true;
    else
      live.push_back(c);
  }

  Eigen::MatrixXd scaled(live.size(), live.size());
  for (std::size_t a = 0; a < live.size(); ++a)
    for (std::size_t b = 0; b < live.size(); ++b)
      scaled(a, b) = jtj(live[a], live[b]) / (scale(live[a]) * scale(live[b]));

  Eigen::MatrixXd cov_scaled = Eigen::MatrixXd::Zero(live.size(), live.size());
  if (!live.empty()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
    const double top = es.eigenvalues().maxCoeff();
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      const double lam = es.eigenvalues()(k);
      const Eigen::VectorXd v = es.eigenvectors().col(k);
      if (lam > 1e-12 * top) {
        cov_scaled += v * v.transpose() / lam;
      } else {
        for (std::size_t a = 0; a < live.size(); ++a)
          if (std::abs(v(a)) > 0.1) unconstrained[live[a]] = true;
      }
    }
  }

  for (std::size_t a = 0; a < live.size(); ++a) {
    const std::size_t c = live[a];
    const double var = s2 * cov_scaled(a, a) / (scale(c) * scale(c));
    out.uncertainties[free[c]] = std::sqrt(std::max(var, 0.0));
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (!unconstrained[c]) continue;
    out.uncertainties[free[c]] = kInf;
    out.warnings.push_back("parameter '" + out.names[free[c]] + "' is unconstrained by the data");
  }
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const ParameterBounds& bounds, int max_evaluations, double ftol) {
  const std::size_t n = x0.size();
  auto clampv = [&](std::vector<double> v) {
    for (std::size_t j = 0; j < n; ++j) v[j] = clamp_to(v[j], bounds.lower[j], bounds.upper[j]);
    return v;
  };
  int evals = 0;
  auto eval = [&](const std::vector<double>& v) {
    ++evals;
    const double y = f(v);
    return std::isfinite(y) ? y : kInf;
  };

  std::vector<std::vector<double>> simplex(n + 1, clampv(x0));
  std::vector<double> fv(n + 1);
  fv[0] = eval(simplex[0]);
  for (std::size_t j = 0; j < n; ++j) {
    auto v = simplex[0];
    const double step = v[j] != 0.0 ? 0.05 * std::abs(v[j]) : 1e-3;
    v[j] += (v[j] + step > bounds.upper[j]) ? -step : step;
    simplex[j + 1] = clampv(v);
    fv[j + 1] = eval(simplex[j + 1]);
  }

  std::vector<std::size_t> idx(n + 1);
  while (evals < max_evaluations) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = idx.front();
    const std::size_t worst = idx.back();
    const std::size_t second = idx[n > 0 ? n - 1 : 0];
    if (std::abs(fv[worst] - fv[best]) <= ftol * (std::abs(fv[best]) + 1e-300)) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k <= n; ++k)
      if (k != worst)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[k][j] / static_cast<double>(n);

    auto along = [&](double t) {
      std::vector<double> v(n);
      for (std::size_t j = 0; j < n; ++j) v[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
      return clampv(v);
    };

    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fv[worst])) {
        simplex[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t k = 0; k <= n; ++k) {
          if (k == best) continue;
          for (std::size_t j = 0; j < n; ++j) simplex[k][j] = simplex[best][j] + 0.5 * (simplex[k][j] - simplex[best][j]);
          simplex[k] = clampv(simplex[k]);
          fv[k] = eval(simplex[k]);
        }
      }
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {simplex[best], fv[best], evals};
}

FitResult fit_least_squares(const ResidualFunction& residuals, std::size_t n_residuals,
                            std::vector<std::string> names, std::vector<double> guess,
                            const ParameterBounds& bounds, const LeastSquaresOptions& options) {
  const std::size_t np = guess.size();
  if (names.size() != np) throw std::invalid_argument("fit: one name per parameter is required");
  if (bounds.lower.size() != np || bounds.upper.size() != np)
    throw std::invalid_argument("fit: bounds do not match the parameter count");
  if (!options.fixed.empty() && options.fixed.size() != np)
    throw std::invalid_argument("fit: fixed mask does not match the parameter count");
  for (std::size_t j = 0; j < np; ++j) {
    if (!std::isfinite(guess[j])) throw std::invalid_argument("fit: initial guess must be finite");
    if (guess[j] < bounds.lower[j] || guess[j] > bounds.upper[j])
      throw std::invalid_argument("fit: initial guess for '" + names[j] + "' lies outside its bounds");
  }
  if (n_residuals == 0) throw std::invalid_argument("fit: no data");

  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < np; ++j)
    if (options.fixed.empty() || !options.fixed[j]) free.push_back(j);

  Problem prob(residuals, n_residuals, guess, free, bounds);
  Eigen::VectorXd x(free.size());
  for (std::size_t j = 0; j < free.size(); ++j) x(j) = guess[free[j]];

  Eigen::VectorXd r = prob.residuals(x);
  double rss = prob.rss(r);
  if (!std::isfinite(rss)) throw std::invalid_argument("fit: model is not finite at the initial guess");

  FitResult out;
  out.names = std::move(names);
  out.n_residuals = static_cast<int>(n_residuals);
  out.n_free = static_cast<int>(free.size());

  bool converged = free.empty() || rss == 0.0;
  double lambda = 1e-3;
  int fallbacks = 0;
  int iter = 0;
  const auto n = static_cast<Eigen::Index>(free.size());

  auto small_step = [&](const Eigen::VectorXd& step, const Eigen::VectorXd& at) {
    return step.norm() <= options.xtol * (at.norm() + options.xtol);
  };

  while (!converged && iter < options.max_iterations) {
    ++iter;
    const Eigen::MatrixXd j = prob.jacobian(x, r, options.jacobian_step);
    const Eigen::VectorXd g = j.transpose() * r;
    const Eigen::MatrixXd a = j.transpose() * j;

    // Scale-free stationarity test.
    double cosine = 0.0;
    const double rnorm = r.norm();
    for (Eigen::Index c = 0; c < n; ++c) {
      const double cn = j.col(c).norm();
      if (cn > 0.0) cosine = std::max(cosine, std::abs(g(c)) / (cn * rnorm));
    }
    if (cosine <= options.gtol) {
      converged = true;
      break;
    }

    int rejects = 0;
    bool stalled = false;
    while (true) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index c = 0; c < n; ++c) damped(c, c) += lambda * std::max(a(c, c), 1e-300);
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      const Eigen::VectorXd x_new = prob.clamp(x + delta);
      const Eigen::VectorXd step = x_new - x;
      if (!delta.allFinite()) {
        lambda *= 10.0;
        if (++rejects >= options.escalation_limit) {
          stalled = true;
          break;
        }
        continue;
      }
      const Eigen::VectorXd r_new = prob.residuals(x_new);
      const double rss_new = prob.rss(r_new);
      if (rss_new < rss) {
        const double gain = (rss - rss_new) / rss;
        x = x_new;
        r = r_new;
        rss = rss_new;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (gain <= options.ftol || small_step(step, x) || rss == 0.0) converged = true;
        break;
      }
      lambda *= 10.0;
      if (small_step(step, x)) {
        converged = true;
        break;
      }
      if (++rejects >= options.escalation_limit) {
        stalled = true;
        break;
      }
    }

    if (stalled) {
      if (options.nelder_mead_fallback && fallbacks < options.max_fallbacks) {
        ++fallbacks;
        out.used_fallback = true;
        ParameterBounds fb;
        for (Eigen::Index c = 0; c < n; ++c) {
          fb.lower.push_back(prob.lower(c));
          fb.upper.push_back(prob.upper(c));
        }
        auto objective = [&](std::span<const double> v) {
          Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
          return prob.rss(prob.residuals(xv));
        };
        const auto nm = nelder_mead(objective, std::vector<double>(x.data(), x.data() + n), fb,
                                    options.nelder_mead_max_evaluations);
        if (nm.value < rss) {
          x = Eigen::Map<const Eigen::VectorXd>(nm.x.data(), n);
          r = prob.residuals(x);
          rss = prob.rss(r);
        }
        lambda = 1e-3;
      } else if (lambda > 1e16) {
        break;
      }
    }
  }

  out.values = prob.expand(x);
  out.rss = rss;
  out.iterations = iter;
  out.converged = converged;
  if (converged) {
    fill_uncertainties(out, prob, x, r, free, options.jacobian_step);
  } else {
    out.warnings.emplace_back("least-squares iteration did not converge; values are the best point found");
  }
  out.evaluations = prob.evaluations();
  return out;
}

FitResult fit_curve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                    std::vector<std::string> names, std::vector<double> guess, const ParameterBounds& bounds,
                    const LeastSquaresOptions& options) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_curve: x and y lengths differ");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("fit_curve: data must be finite");
  auto fn = [&](std::span<const double> p, std::span<double> r) {
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = model(x[i], p) - y[i];
  };
  return fit_least_squares(fn, x.size(), std::move(names), std::move(guess), bounds, options);
}

}  // namespace spintk
