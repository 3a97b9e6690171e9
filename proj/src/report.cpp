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
#include "spintk/report.hpp"


#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace spintk {

namespace {

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::string fixed(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string fit_report_json(const FitResult& fit, std::string_view kind, const ReportExtras& extras) {
  nlohmann::ordered_json j;
  j["fit"] = std::string(kind);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["used_fallback"] = fit.used_fallback;
  j["rss"] = number(fit.rss);
  j["n_residuals"] = fit.n_residuals;
  j["n_free"] = fit.n_free;
  auto params = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    nlohmann::ordered_json p;
    p["name"] = fit.names[i];
    p["value"] = number(fit.values[i]);
    p["uncertainty"] = i < fit.uncertainties.size() ? number(fit.uncertainties[i]) : nlohmann::ordered_json(nullptr);
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  if (!extras.empty()) {
    nlohmann::ordered_json d = nlohmann::ordered_json::object();
    for (const auto& [k, v] : extras) d[k] = number(v);
    j["derived"] = std::move(d);
  }
  j["warnings"] = fit.warnings;
  return j.dump(2) + "\n";
}

std::string fit_report_text(const FitResult& fit, std::string_view kind, const ReportExtras& extras) {
  std::string out(kind);
  out += fit.converged ? ": converged" : ": NOT converged";
  out += " after " + std::to_string(fit.iterations) + " iterations";
  out += " (rss " + fixed(fit.rss) + ", " + std::to_string(fit.n_residuals) + " residuals, " +
         std::to_string(fit.n_free) + " free parameters)\n";
  std::size_t width = 0;
  for (const auto& n : fit.names) width = std::max(width, n.size());
  for (const auto& [k, v] : extras) width = std::max(width, k.size());
  auto line = [&](const std::string& name, double value, const std::string& sigma) {
    out += "  " + name + std::string(width - name.size(), ' ') + " = " + fixed(value);
    if (!sigma.empty()) out += " +/- " + sigma;
    out += '\n';
  };
  for (std::size_t i = 0; i < fit.names.size(); ++i)
    line(fit.names[i], fit.values[i], i < fit.uncertainties.size() ? fixed(fit.uncertainties[i]) : std::string("n/a"));
  for (const auto& [k, v] : extras) line(k, v, "");
  for (const auto& w : fit.warnings) out += "warning: " + w + '\n';
  return out;
}

}  // namespace spintk
