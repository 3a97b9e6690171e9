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
#include "spintk/config.hpp"

#include "spintk/csv.hpp"
#include "spintk/error.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace spintk {

const Family& ConfigDocument::family(std::string_view name) const {
  for (const auto& f : families)
    if (f.name == name) return f;
  throw std::invalid_argument("configuration has no family '" + std::string(name) + "'");
}

const RateModel& ConfigDocument::rate_model(std::string_view name) const {
  for (const auto& [n, m] : rate_models)
    if (n == name) return m;
  throw std::invalid_argument("configuration has no rate model '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
  int value_column = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double number(const Entry& e) { return parse_double(e.value, e.line, e.value_column); }

double spin(const Entry& e) {
  const double v = number(e);
  try {
    spin_dimension(v);
  } catch (const std::invalid_argument& ex) {
    throw ParseError(ex.what(), e.line, e.value_column);
  }
  return v;
}

Vec3 vector3(const Entry& e) {
  const auto parts = split_list(e.value);
  if (parts.size() != 3) throw ParseError("expected three comma-separated components", e.line, e.value_column);
  return {parse_double(parts[0], e.line, e.value_column), parse_double(parts[1], e.line, e.value_column),
          parse_double(parts[2], e.line, e.value_column)};
}

[[noreturn]] void unknown_key(const Entry& e, const Section& s) {
  throw ParseError("unknown key '" + e.key + "' in [" + s.name + "]", e.line, 1);
}

Family parse_family(const Section& s, std::string name) {
  Family f;
  f.name = std::move(name);
  f.system = SpinSystem{};
  bool iso = false, tensor = false;
  for (const auto& e : s.entries) {
    auto& sys = f.system;
    if (e.key == "s_electron") sys.s_electron = spin(e);
    else if (e.key == "i_nuclear") sys.i_nuclear = spin(e);
    else if (e.key == "d_mhz") sys.d_mhz = number(e);
    else if (e.key == "e_mhz") sys.e_mhz = number(e);
    else if (e.key == "a_mhz") { sys.a_tensor_mhz = HyperfineTensor::isotropic(number(e)); iso = true; }
    else if (e.key == "a_xx_mhz") { sys.a_tensor_mhz.xx = number(e); tensor = true; }
    else if (e.key == "a_yy_mhz") { sys.a_tensor_mhz.yy = number(e); tensor = true; }
    else if (e.key == "a_zz_mhz") { sys.a_tensor_mhz.zz = number(e); tensor = true; }
    else if (e.key == "a_xy_mhz") { sys.a_tensor_mhz.xy = number(e); tensor = true; }
    else if (e.key == "a_xz_mhz") { sys.a_tensor_mhz.xz = number(e); tensor = true; }
    else if (e.key == "a_yz_mhz") { sys.a_tensor_mhz.yz = number(e); tensor = true; }
    else if (e.key == "gamma_e_mhz_per_mt") sys.gamma_e_mhz_per_mt = number(e);
    else if (e.key == "gamma_n_mhz_per_mt") sys.gamma_n_mhz_per_mt = number(e);
    else if (e.key == "axis_polar_deg") sys.axis_polar_deg = number(e);
    else if (e.key == "axis_azimuth_deg") sys.axis_azimuth_deg = number(e);
    else if (e.key == "axis_roll_deg") sys.axis_roll_deg = number(e);
    else if (e.key == "scale") f.scale = number(e);
    else unknown_key(e, s);
    if (iso && tensor) throw ParseError("a_mhz cannot be combined with tensor components", e.line, 1);
  }
  try {
    f.system.validate();
  } catch (const std::invalid_argument& ex) {
    throw ParseError(std::string("invalid spin system in [") + s.name + "]: " + ex.what(), s.line, 1);
  }
  return f;
}

LineShape parse_lineshape(const Section& s) {
  LineShape shape;
  for (const auto& e : s.entries) {
    if (e.key == "kind") {
      if (e.value == "lorentzian") shape.kind = LineShapeKind::lorentzian;
      else if (e.value == "gaussian") shape.kind = LineShapeKind::gaussian;
      else throw ParseError("line shape kind must be lorentzian or gaussian", e.line, e.value_column);
    } else if (e.key == "fwhm_mhz") {
      shape.fwhm_mhz = number(e);
    } else {
      unknown_key(e, s);
    }
  }
  try {
    shape.validate();
  } catch (const std::invalid_argument& ex) {
    throw ParseError(std::string("invalid [lineshape]: ") + ex.what(), s.line, 1);
  }
  return shape;
}

SweepGrid parse_grid(const Section& s) {
  SweepGrid g;
  for (const auto& e : s.entries) {
    if (e.key == "freq_min_mhz") g.freq.min_mhz = number(e);
    else if (e.key == "freq_max_mhz") g.freq.max_mhz = number(e);
    else if (e.key == "freq_step_mhz") g.freq.step_mhz = number(e);
    else if (e.key == "b_min_mt") g.b_min_mt = number(e);
    else if (e.key == "b_max_mt") g.b_max_mt = number(e);
    else if (e.key == "b_step_mt") g.b_step_mt = number(e);
    else if (e.key == "b_axis") g.b_axis = vector3(e);
    else unknown_key(e, s);
  }
  if (!(g.freq.step_mhz > 0.0) || !(g.b_step_mt > 0.0) || g.freq.max_mhz < g.freq.min_mhz || g.b_max_mt < g.b_min_mt)
    throw ParseError("invalid [grid] ranges", s.line, 1);
  return g;
}

std::pair<std::string, std::string> arrow(const Entry& e, std::string_view item, std::string_view sep) {
  const auto pos = item.find(sep);
  if (pos == std::string_view::npos)
    throw ParseError("expected 'A" + std::string(sep) + "B'", e.line, e.value_column);
  return {std::string(trim(item.substr(0, pos))), std::string(trim(item.substr(pos + sep.size())))};
}

RateModel parse_rate_model(const Section& s) {
  RateModel m;
  m.pump_rate_per_ns = 0.0;
  m.rf_mix_rate_per_ns = 0.0;
  bool have_levels = false;
  auto level = [&](const Entry& e, const std::string& name) {
    for (std::size_t i = 0; i < m.level_names.size(); ++i)
      if (m.level_names[i] == name) return static_cast<int>(i);
    throw ParseError("unknown level '" + name + "' in [" + s.name + "]", e.line, e.value_column);
  };
  std::vector<const Entry*> radiative;
  for (const auto& e : s.entries) {
    if (e.key != "levels" && !have_levels)
      throw ParseError("'levels' must come first in [" + s.name + "]", e.line, 1);
    if (e.key == "levels") {
      if (have_levels) throw ParseError("duplicate key 'levels'", e.line, 1);
      for (auto name : split_list(e.value)) {
        if (name.empty()) throw ParseError("empty level name", e.line, e.value_column);
        if (std::find(m.level_names.begin(), m.level_names.end(), name) != m.level_names.end())
          throw ParseError("duplicate level '" + std::string(name) + "'", e.line, e.value_column);
        m.level_names.emplace_back(name);
      }
      have_levels = true;
    } else if (e.key.rfind("rate.", 0) == 0) {
      const std::string rest = e.key.substr(5);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw ParseError("rate keys look like rate.<from>.<to>", e.line, 1);
      Entry k = e;
      k.value_column = 1;
      m.edges.push_back({level(k, rest.substr(0, dot)), level(k, rest.substr(dot + 1)), number(e), false});
    } else if (e.key == "radiative") {
      radiative.push_back(&e);
    } else if (e.key == "pump") {
      for (auto item : split_list(e.value)) {
        const auto [g, x] = arrow(e, item, "->");
        m.pumped.emplace_back(level(e, g), level(e, x));
      }
    } else if (e.key == "pump_rate_per_ns") {
      m.pump_rate_per_ns = number(e);
    } else if (e.key == "rf_mix") {
      const auto [a, b] = arrow(e, e.value, "<->");
      m.rf_level_a = level(e, a);
      m.rf_level_b = level(e, b);
    } else if (e.key == "rf_mix_rate_per_ns") {
      m.rf_mix_rate_per_ns = number(e);
    } else {
      unknown_key(e, s);
    }
  }
  for (const Entry* e : radiative) {
    for (auto item : split_list(e->value)) {
      const auto [a, b] = arrow(*e, item, "->");
      const int from = level(*e, a), to = level(*e, b);
      auto it = std::find_if(m.edges.begin(), m.edges.end(),
                             [&](const RateEdge& r) { return r.from == from && r.to == to; });
      if (it == m.edges.end()) throw ParseError("radiative edge " + a + "->" + b + " has no rate", e->line, e->value_column);
      it->radiative = true;
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& ex) {
    throw ParseError(std::string("invalid [") + s.name + "]: " + ex.what(), s.line, 1);
  }
  return m;
}

void append(std::string& out, std::string_view key, std::string_view value) {
  out += key;
  out += " = ";
  out += value;
  out += '\n';
}

}  // namespace

ConfigDocument parse_config(std::string_view text) {
  std::vector<Section> sections;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no, 1);
      const std::string name(trim(line.substr(1, line.size() - 2)));
      for (const auto& s : sections)
        if (s.name == name) throw ParseError("duplicate section [" + name + "]", line_no, 1);
      sections.push_back({name, line_no, {}});
      continue;
    }
    const auto eq = raw.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no, 1);
    if (sections.empty()) throw ParseError("key outside of any section", line_no, 1);
    Entry e;
    e.key = std::string(trim(raw.substr(0, eq)));
    std::string_view value = raw.substr(eq + 1);
    std::size_t lead = 0;
    while (lead < value.size() && (value[lead] == ' ' || value[lead] == '\t')) ++lead;
    e.value = std::string(trim(value));
    e.line = line_no;
    e.value_column = static_cast<int>(eq + 2 + lead);
    if (e.key.empty()) throw ParseError("empty key", line_no, 1);
    if (e.value.empty()) throw ParseError("empty value for '" + e.key + "'", line_no, e.value_column);
    for (const auto& prev : sections.back().entries)
      if (prev.key == e.key) throw ParseError("duplicate key '" + e.key + "'", line_no, 1);
    sections.back().entries.push_back(std::move(e));
  }

  ConfigDocument doc;
  for (const auto& s : sections) {
    if (s.name.rfind("family.", 0) == 0 && s.name.size() > 7) {
      doc.families.push_back(parse_family(s, s.name.substr(7)));
    } else if (s.name == "lineshape") {
      doc.lineshape = parse_lineshape(s);
    } else if (s.name == "grid") {
      doc.grid = parse_grid(s);
    } else if (s.name.rfind("rate_model.", 0) == 0 && s.name.size() > 11) {
      doc.rate_models.emplace_back(s.name.substr(11), parse_rate_model(s));
    } else {
      throw ParseError("unknown section [" + s.name + "]", s.line, 1);
    }
  }
  return doc;
}

std::string serialize_config(const ConfigDocument& doc) {
  std::string out;
  auto num = [](double v) { return format_double(v); };
  for (const auto& f : doc.families) {
    if (!out.empty()) out += '\n';
    const auto& s = f.system;
    out += "[family." + f.name + "]\n";
    append(out, "s_electron", num(s.s_electron));
    append(out, "i_nuclear", num(s.i_nuclear));
    append(out, "d_mhz", num(s.d_mhz));
    append(out, "e_mhz", num(s.e_mhz));
    if (s.a_tensor_mhz.is_isotropic()) {
      append(out, "a_mhz", num(s.a_tensor_mhz.xx));
    } else {
      append(out, "a_xx_mhz", num(s.a_tensor_mhz.xx));
      append(out, "a_yy_mhz", num(s.a_tensor_mhz.yy));
      append(out, "a_zz_mhz", num(s.a_tensor_mhz.zz));
      append(out, "a_xy_mhz", num(s.a_tensor_mhz.xy));
      append(out, "a_xz_mhz", num(s.a_tensor_mhz.xz));
      append(out, "a_yz_mhz", num(s.a_tensor_mhz.yz));
    }
    append(out, "gamma_e_mhz_per_mt", num(s.gamma_e_mhz_per_mt));
    append(out, "gamma_n_mhz_per_mt", num(s.gamma_n_mhz_per_mt));
    append(out, "axis_polar_deg", num(s.axis_polar_deg));
    append(out, "axis_azimuth_deg", num(s.axis_azimuth_deg));
    append(out, "axis_roll_deg", num(s.axis_roll_deg));
    append(out, "scale", num(f.scale));
  }
  if (doc.lineshape) {
    if (!out.empty()) out += '\n';
    out += "[lineshape]\n";
    append(out, "kind", doc.lineshape->kind == LineShapeKind::lorentzian ? "lorentzian" : "gaussian");
    append(out, "fwhm_mhz", num(doc.lineshape->fwhm_mhz));
  }
  if (doc.grid) {
    if (!out.empty()) out += '\n';
    const auto& g = *doc.grid;
    out += "[grid]\n";
    append(out, "freq_min_mhz", num(g.freq.min_mhz));
    append(out, "freq_max_mhz", num(g.freq.max_mhz));
    append(out, "freq_step_mhz", num(g.freq.step_mhz));
    append(out, "b_min_mt", num(g.b_min_mt));
    append(out, "b_max_mt", num(g.b_max_mt));
    append(out, "b_step_mt", num(g.b_step_mt));
    append(out, "b_axis", num(g.b_axis.x()) + ", " + num(g.b_axis.y()) + ", " + num(g.b_axis.z()));
  }
  for (const auto& [name, m] : doc.rate_models) {
    if (!out.empty()) out += '\n';
    out += "[rate_model." + name + "]\n";
    std::string levels;
    for (const auto& l : m.level_names) levels += (levels.empty() ? "" : ", ") + l;
    append(out, "levels", levels);
    std::string radiative;
    for (const auto& e : m.edges) {
      append(out, "rate." + m.level_names[e.from] + "." + m.level_names[e.to], num(e.rate_per_ns));
      if (e.radiative)
        radiative += (radiative.empty() ? "" : ", ") + m.level_names[e.from] + "->" + m.level_names[e.to];
    }
    if (!radiative.empty()) append(out, "radiative", radiative);
    if (!m.pumped.empty()) {
      std::string pump;
      for (const auto& [g, x] : m.pumped)
        pump += (pump.empty() ? "" : ", ") + m.level_names[g] + "->" + m.level_names[x];
      append(out, "pump", pump);
    }
    append(out, "pump_rate_per_ns", num(m.pump_rate_per_ns));
    if (m.rf_level_a >= 0 && m.rf_level_b >= 0 && m.rf_level_a < m.size() && m.rf_level_b < m.size() &&
        m.rf_level_a != m.rf_level_b)
      append(out, "rf_mix", m.level_names[m.rf_level_a] + "<->" + m.level_names[m.rf_level_b]);
    append(out, "rf_mix_rate_per_ns", num(m.rf_mix_rate_per_ns));
  }
  return out;
}

ConfigDocument preset_config() {
  ConfigDocument doc;
  doc.families = preset_families();
  doc.lineshape = LineShape{};
  doc.grid = SweepGrid{};
  doc.rate_models.emplace_back("fig1f-default", RateModel::fig1f_default());
  return doc;
}

}  // namespace spintk
