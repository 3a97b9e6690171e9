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
#include "spintk/cli.hpp"

#include "spintk/config.hpp"
#include "spintk/csv.hpp"
#include "spintk/dynamics.hpp"
#include "spintk/error.hpp"
#include "spintk/fit.hpp"
#include "spintk/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>

namespace spintk {

namespace {

Vec3 parse_vec3(const std::string& text, const char* what) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    try {
      parts.push_back(parse_double(item, 0, 0));
    } catch (const ParseError&) {
      throw std::invalid_argument(std::string(what) + " must be three comma-separated numbers");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) throw std::invalid_argument(std::string(what) + " must be three comma-separated numbers");
  return {parts[0], parts[1], parts[2]};
}

// Where a subcommand's primary output goes.
struct Sink {
  std::string path;

  void write(std::ostream& out, const std::string& content) const {
    if (path.empty())
      out << content;
    else
      write_file_atomic(path, content);
  }
};

// Family and physics options shared by levels, spectrum and sweep.
struct SpectrumArgs {
  std::string config;
  std::vector<std::string> presets;
  std::string b_axis = "0,0,1";
  std::string drive_axis = "1,0,0";
  bool unpolarized = false;
  double min_intensity = 1e-4;
  double freq_min = 10.0, freq_max = 2000.0, freq_step = 0.5;
  double fwhm = 10.0;
  std::string lineshape = "lorentzian";
  double b_min = 0.0, b_max = 10.0, b_step = 0.1;

  CLI::Option* freq_min_opt = nullptr;
  CLI::Option* freq_max_opt = nullptr;
  CLI::Option* freq_step_opt = nullptr;
  CLI::Option* fwhm_opt = nullptr;
  CLI::Option* lineshape_opt = nullptr;
  CLI::Option* b_axis_opt = nullptr;
  CLI::Option* b_min_opt = nullptr;
  CLI::Option* b_max_opt = nullptr;
  CLI::Option* b_step_opt = nullptr;

  std::optional<ConfigDocument> doc;

  void add_family_options(CLI::App* app) {
    app->add_option("--config", config, "Configuration file with [family.*] sections");
    app->add_option("--preset", presets, "Family name(s) to include (default: all)");
  }
  void add_spectrum_options(CLI::App* app) {
    freq_min_opt = app->add_option("--freq-min-mhz", freq_min, "Lowest grid frequency")->capture_default_str();
    freq_max_opt = app->add_option("--freq-max-mhz", freq_max, "Highest grid frequency")->capture_default_str();
    freq_step_opt = app->add_option("--freq-step-mhz", freq_step, "Grid step")->capture_default_str();
    fwhm_opt = app->add_option("--fwhm-mhz", fwhm, "Line FWHM")->capture_default_str();
    lineshape_opt = app->add_option("--lineshape", lineshape, "lorentzian or gaussian")->capture_default_str();
    app->add_option("--drive-axis", drive_axis, "RF drive direction x,y,z (lab frame)")->capture_default_str();
    app->add_flag("--unpolarized", unpolarized, "Average the drive over x and y");
    app->add_option("--min-intensity", min_intensity, "Drop weaker transitions")->capture_default_str();
  }
  void add_axis_option(CLI::App* app) {
    b_axis_opt = app->add_option("--b-axis", b_axis, "Field direction x,y,z (lab frame)")->capture_default_str();
  }
  void add_field_grid(CLI::App* app) {
    b_min_opt = app->add_option("--b-min-mt", b_min, "First field")->capture_default_str();
    b_max_opt = app->add_option("--b-max-mt", b_max, "Last field")->capture_default_str();
    b_step_opt = app->add_option("--b-step-mt", b_step, "Field step")->capture_default_str();
  }

  void load() {
    if (!config.empty()) doc = parse_config(read_text_file(config));
  }

  std::vector<Family> families() const {
    const std::vector<Family> pool = doc ? doc->families : preset_families();
    if (pool.empty()) throw std::invalid_argument("the configuration defines no families");
    if (presets.empty() || (presets.size() == 1 && presets.front() == "all")) return pool;
    std::vector<Family> out;
    for (const auto& name : presets) {
      auto it = std::find_if(pool.begin(), pool.end(), [&](const Family& f) { return f.name == name; });
      if (it == pool.end()) throw std::invalid_argument("unknown family '" + name + "'");
      out.push_back(*it);
    }
    return out;
  }

  LineShape shape() const {
    LineShape s = doc && doc->lineshape ? *doc->lineshape : LineShape{};
    if (fwhm_opt && (fwhm_opt->count() || !(doc && doc->lineshape))) s.fwhm_mhz = fwhm;
    if (lineshape_opt && (lineshape_opt->count() || !(doc && doc->lineshape))) {
      if (lineshape == "lorentzian") s.kind = LineShapeKind::lorentzian;
      else if (lineshape == "gaussian") s.kind = LineShapeKind::gaussian;
      else throw std::invalid_argument("--lineshape must be lorentzian or gaussian");
    }
    s.validate();
    return s;
  }

  std::vector<double> freq_grid() const {
    FrequencyGrid g = doc && doc->grid ? doc->grid->freq : FrequencyGrid{freq_min, freq_max, freq_step};
    if (freq_min_opt->count()) g.min_mhz = freq_min;
    if (freq_max_opt->count()) g.max_mhz = freq_max;
    if (freq_step_opt->count()) g.step_mhz = freq_step;
    return g.points();
  }

  std::vector<double> field_grid() const {
    double lo = b_min, hi = b_max, step = b_step;
    if (doc && doc->grid) {
      if (!b_min_opt->count()) lo = doc->grid->b_min_mt;
      if (!b_max_opt->count()) hi = doc->grid->b_max_mt;
      if (!b_step_opt->count()) step = doc->grid->b_step_mt;
    }
    return uniform_grid(lo, hi, step);
  }

  Vec3 field_axis() const {
    if (doc && doc->grid && !b_axis_opt->count()) return doc->grid->b_axis;
    return parse_vec3(b_axis, "--b-axis");
  }

  DriveOptions drive() const {
    DriveOptions d;
    d.axis = parse_vec3(drive_axis, "--drive-axis");
    d.unpolarized = unpolarized;
    d.min_intensity = min_intensity;
    return d;
  }
};

struct FitOutputs {
  std::string json;
  std::string report;

  void add(CLI::App* app) {
    app->add_option("--json", json, "Write the fit report as JSON");
    app->add_option("--report", report, "Write the human-readable fit report");
  }

  int emit(std::ostream& out, std::ostream& err, const FitResult& fit, std::string_view kind,
           const ReportExtras& extras = {}) const {
    const std::string text = fit_report_text(fit, kind, extras);
    if (!json.empty()) write_file_atomic(json, fit_report_json(fit, kind, extras));
    if (!report.empty()) write_file_atomic(report, text);
    out << text;
    if (!fit.converged) {
      err << "error: " << kind << " did not converge\n";
      return kExitNumerical;
    }
    return kExitOk;
  }
};

std::vector<double> noisy(std::vector<double> y, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("--noise must be nonnegative");
  if (sigma == 0.0) return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  for (auto& v : y) v += nd(rng);
  return y;
}

RamseyTrace trace_from(const DataTable& t) {
  RamseyTrace tr;
  tr.tau_ns = t.column("tau_ns");
  tr.contrast = t.column("contrast");
  return tr;
}

std::string trace_csv(const RamseyTrace& tr) {
  DataTable t;
  t.add_column("tau_ns", tr.tau_ns);
  t.add_column("contrast", tr.contrast);
  return serialize_csv(t);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spin-Hamiltonian ODMR simulation and fitting toolkit", "spintk"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  std::function<int()> action;

  // levels
  SpectrumArgs lv;
  Sink lv_out;
  auto* levels = app.add_subcommand("levels", "Eigenvalues versus field magnitude (b_mt, level_index, energy_mhz)");
  lv.add_family_options(levels);
  lv.add_axis_option(levels);
  lv.add_field_grid(levels);
  levels->add_option("--out", lv_out.path, "Output CSV (default: stdout)");
  levels->callback([&] {
    action = [&] {
      lv.load();
      if (lv.presets.empty()) lv.presets = {lv.doc ? lv.doc->families.at(0).name : "nu1"};
      const auto fams = lv.families();
      if (fams.size() != 1) throw std::invalid_argument("levels takes exactly one family");
      const auto b = lv.field_grid();
      const Vec3 axis = lv.field_axis();
      DataTable t;
      std::vector<double> bs, idx, en;
      for (double bm : b) {
        const auto eig = diagonalize(build_hamiltonian(fams[0].system, FieldVector::along(axis, bm)));
        for (int k = 0; k < eig.size(); ++k) {
          bs.push_back(bm);
          idx.push_back(k);
          en.push_back(eig.values(k));
        }
      }
      t.add_column("b_mt", bs);
      t.add_column("level_index", idx);
      t.add_column("energy_mhz", en);
      lv_out.write(out, serialize_csv(t));
      return kExitOk;
    };
  });

  // spectrum
  SpectrumArgs sp;
  Sink sp_out;
  std::string sp_transitions;
  double sp_b = 0.0;
  bool sp_half = false;
  auto* spectrum = app.add_subcommand("spectrum", "Synthetic ODMR spectrum at one field (frequency_mhz, amplitude)");
  sp.add_family_options(spectrum);
  sp.add_spectrum_options(spectrum);
  sp.add_axis_option(spectrum);
  spectrum->add_option("--b-mt", sp_b, "Field magnitude")->capture_default_str();
  spectrum->add_flag("--half-frequency", sp_half, "Add two-photon lines at half frequency");
  spectrum->add_option("--transitions", sp_transitions, "Also write the transition list as CSV");
  spectrum->add_option("--out", sp_out.path, "Output CSV (default: stdout)");
  spectrum->callback([&] {
    action = [&] {
      sp.load();
      const auto fams = sp.families();
      const auto grid = sp.freq_grid();
      const auto shape = sp.shape();
      const auto drive = sp.drive();
      const FieldVector b = FieldVector::along(sp.field_axis(), sp_b);
      Spectrum s = spectrum_at_field(fams, b, shape, grid, drive);
      DataTable tt;
      std::vector<double> fam_col, lo, hi, fr, in;
      for (std::size_t k = 0; k < fams.size(); ++k) {
        auto ts = family_transitions(fams[k].system, b, drive);
        if (sp_half) accumulate_spectrum(annotate_half_frequency(ts), shape, grid, fams[k].scale, s.amplitude);
        for (const auto& t : ts) {
          fam_col.push_back(static_cast<double>(k));
          lo.push_back(t.lower_index);
          hi.push_back(t.upper_index);
          fr.push_back(t.freq_mhz);
          in.push_back(t.intensity);
        }
      }
      DataTable t;
      t.add_column("frequency_mhz", s.freq_grid_mhz);
      t.add_column("amplitude", s.amplitude);
      sp_out.write(out, serialize_csv(t));
      if (!sp_transitions.empty()) {
        tt.add_column("family_index", fam_col);
        tt.add_column("lower_index", lo);
        tt.add_column("upper_index", hi);
        tt.add_column("frequency_mhz", fr);
        tt.add_column("intensity", in);
        write_csv(sp_transitions, tt);
      }
      return kExitOk;
    };
  });

  // sweep
  SpectrumArgs sw;
  Sink sw_out;
  auto* sweep = app.add_subcommand("sweep", "Spectra over a field grid, long format (b_mt, frequency_mhz, amplitude)");
  sw.add_family_options(sweep);
  sw.add_spectrum_options(sweep);
  sw.add_axis_option(sweep);
  sw.add_field_grid(sweep);
  sweep->add_option("--out", sw_out.path, "Output CSV (default: stdout)");
  sweep->callback([&] {
    action = [&] {
      sw.load();
      const auto fams = sw.families();
      const auto grid = sw.freq_grid();
      const auto b = sw.field_grid();
      const auto map = field_sweep(fams, sw.field_axis(), b, sw.shape(), grid, sw.drive());
      std::vector<double> bc, fc, ac;
      for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) {
          bc.push_back(b[i]);
          fc.push_back(grid[j]);
          ac.push_back(map.rows[i][j]);
        }
      DataTable t;
      t.add_column("b_mt", bc);
      t.add_column("frequency_mhz", fc);
      t.add_column("amplitude", ac);
      sw_out.write(out, serialize_csv(t));
      return kExitOk;
    };
  });

  // rate-sim
  std::string rs_config, rs_model = "fig1f-default";
  Sink rs_out;
  double rs_pre = 3000.0, rs_on = 3000.0, rs_off = 3000.0, rs_dt = 1.0;
  std::optional<double> rs_pump, rs_rf;
  auto* rate_sim = app.add_subcommand("rate-sim", "PL transient of the optical cycle with the RF toggled off/on/off");
  rate_sim->add_option("--config", rs_config, "Configuration file with [rate_model.*] sections");
  rate_sim->add_option("--rate-model", rs_model, "Rate model name")->capture_default_str();
  rate_sim->add_option("--pre-ns", rs_pre, "Laser-only lead-in")->capture_default_str();
  rate_sim->add_option("--rf-on-ns", rs_on, "RF-on segment")->capture_default_str();
  rate_sim->add_option("--rf-off-ns", rs_off, "RF-off segment")->capture_default_str();
  rate_sim->add_option("--dt-ns", rs_dt, "Sampling step")->capture_default_str();
  rate_sim->add_option("--pump-rate-per-ns", rs_pump, "Override the optical pump rate");
  rate_sim->add_option("--rf-rate-per-ns", rs_rf, "Override the RF mixing rate");
  rate_sim->add_option("--out", rs_out.path, "Output CSV (default: stdout)");
  rate_sim->callback([&] {
    action = [&] {
      RateModel m;
      if (!rs_config.empty())
        m = parse_config(read_text_file(rs_config)).rate_model(rs_model);
      else if (rs_model == "fig1f-default")
        m = RateModel::fig1f_default();
      else
        throw std::invalid_argument("unknown rate model '" + rs_model + "'");
      if (rs_pump) m = m.with_pump(*rs_pump);
      if (rs_rf) m = m.with_rf(*rs_rf);
      std::vector<RfSegment> segs;
      if (rs_pre > 0.0) segs.push_back({rs_pre, false});
      segs.push_back({rs_on, true});
      segs.push_back({rs_off, false});
      const auto tr = simulate_pl_transient(m, segs, rs_dt);
      DataTable t;
      t.add_column("t_ns", tr.trace.t_ns);
      t.add_column("pl_rate_per_ns", tr.trace.pl_rate);
      for (int l = 0; l < m.size(); ++l) {
        const auto row = tr.trace.populations.row(l);
        t.add_column("p_" + m.level_names[static_cast<std::size_t>(l)], std::vector<double>(row.begin(), row.end()));
      }
      rs_out.write(out, serialize_csv(t));
      if (!rs_out.path.empty()) {
        const double with_rf = m.pl_weights().dot(steady_state(m));
        const double without = m.pl_weights().dot(steady_state(m.with_rf(0.0)));
        out << "settle_time_ns = " << format_double(tr.settle_time_ns) << '\n';
        out << "steady_pl_rf_on = " << format_double(with_rf) << '\n';
        out << "steady_pl_rf_off = " << format_double(without) << '\n';
        out << "odmr_contrast = " << format_double(odmr_contrast(with_rf, without)) << '\n';
      }
      return kExitOk;
    };
  });

  // ramsey-sim
  Sink rm_out;
  std::optional<double> rm_f1, rm_f2, rm_rf;
  double rm_a1 = 0.5, rm_a2 = 0.5, rm_t2 = 2.0, rm_tmax = 4000.0, rm_tstep = 10.0, rm_noise = 0.0;
  double rm_b = 0.0, rm_bw = 25.0, rm_rabi = 0.0;
  std::uint64_t rm_seed = 0;
  SpectrumArgs rm_fam;
  auto* ramsey_sim = app.add_subcommand(
      "ramsey-sim", "Ramsey (or Rabi) trace: closed form with --f1-mhz, else from the Hamiltonian at --rf-mhz");
  ramsey_sim->add_option("--a1", rm_a1, "Closed-form amplitude 1")->capture_default_str();
  ramsey_sim->add_option("--a2", rm_a2, "Closed-form amplitude 2")->capture_default_str();
  ramsey_sim->add_option("--f1-mhz", rm_f1, "Closed-form detuning 1");
  ramsey_sim->add_option("--f2-mhz", rm_f2, "Closed-form detuning 2");
  rm_fam.add_family_options(ramsey_sim);
  rm_fam.add_axis_option(ramsey_sim);
  ramsey_sim->add_option("--drive-axis", rm_fam.drive_axis, "RF drive direction x,y,z")->capture_default_str();
  ramsey_sim->add_option("--b-mt", rm_b, "Field magnitude")->capture_default_str();
  ramsey_sim->add_option("--rf-mhz", rm_rf, "RF carrier frequency");
  ramsey_sim->add_option("--bandwidth-mhz", rm_bw, "Addressed window around the carrier")->capture_default_str();
  ramsey_sim->add_option("--rabi-mhz", rm_rabi, "Simulate Rabi flopping at this Rabi frequency instead");
  ramsey_sim->add_option("--t2star-us", rm_t2, "Dephasing time")->capture_default_str();
  ramsey_sim->add_option("--tau-max-ns", rm_tmax, "Longest delay")->capture_default_str();
  ramsey_sim->add_option("--tau-step-ns", rm_tstep, "Delay step")->capture_default_str();
  ramsey_sim->add_option("--noise", rm_noise, "Gaussian noise sigma")->capture_default_str();
  ramsey_sim->add_option("--seed", rm_seed, "Noise seed")->capture_default_str();
  ramsey_sim->add_option("--out", rm_out.path, "Output CSV (default: stdout)");
  ramsey_sim->callback([&] {
    action = [&] {
      const auto tau = uniform_grid(0.0, rm_tmax, rm_tstep);
      RamseyTrace tr;
      if (rm_f1) {
        tr = ramsey_closed_form(rm_a1, rm_f2 ? rm_a2 : 0.0, *rm_f1, rm_f2.value_or(0.0), rm_t2, tau);
      } else {
        if (!rm_rf) throw std::invalid_argument("either --f1-mhz or --rf-mhz is required");
        rm_fam.load();
        if (rm_fam.presets.empty()) rm_fam.presets = {rm_fam.doc ? rm_fam.doc->families.at(0).name : "nu1"};
        const auto fams = rm_fam.families();
        if (fams.size() != 1) throw std::invalid_argument("ramsey-sim takes exactly one family");
        RamseyOptions opt;
        opt.drive.axis = parse_vec3(rm_fam.drive_axis, "--drive-axis");
        opt.bandwidth_mhz = rm_bw;
        const FieldVector b = FieldVector::along(rm_fam.field_axis(), rm_b);
        const auto h = rm_rabi > 0.0 ? rabi_from_hamiltonian(fams[0].system, b, *rm_rf, rm_rabi, rm_t2, tau, opt)
                                     : ramsey_from_hamiltonian(fams[0].system, b, *rm_rf, rm_t2, tau, opt);
        for (const auto& w : h.warnings) err << "warning: " << w << '\n';
        tr = h.trace;
      }
      tr.contrast = noisy(tr.contrast, rm_noise, rm_seed);
      rm_out.write(out, trace_csv(tr));
      return kExitOk;
    };
  });

  // t1-sim
  Sink t1_out;
  double t1_t1 = 660.0, t1_c0 = 1.0, t1_floor = 0.06, t1_tmax = 4000.0, t1_tstep = 20.0, t1_noise = 0.0;
  std::uint64_t t1_seed = 0;
  auto* t1_sim = app.add_subcommand("t1-sim", "Mono-exponential T1 trace (tau_ns, contrast)");
  t1_sim->add_option("--t1-ns", t1_t1, "Decay constant")->capture_default_str();
  t1_sim->add_option("--c0", t1_c0, "Contrast at zero delay")->capture_default_str();
  t1_sim->add_option("--floor", t1_floor, "Long-delay contrast")->capture_default_str();
  t1_sim->add_option("--tau-max-ns", t1_tmax, "Longest delay")->capture_default_str();
  t1_sim->add_option("--tau-step-ns", t1_tstep, "Delay step")->capture_default_str();
  t1_sim->add_option("--noise", t1_noise, "Gaussian noise sigma")->capture_default_str();
  t1_sim->add_option("--seed", t1_seed, "Noise seed")->capture_default_str();
  t1_sim->add_option("--out", t1_out.path, "Output CSV (default: stdout)");
  t1_sim->callback([&] {
    action = [&] {
      auto tr = t1_trace(t1_t1, t1_c0, t1_floor, uniform_grid(0.0, t1_tmax, t1_tstep));
      tr.contrast = noisy(tr.contrast, t1_noise, t1_seed);
      t1_out.write(out, trace_csv(tr));
      return kExitOk;
    };
  });

  // fit-zfs
  SpectrumArgs fz;
  FitOutputs fz_out;
  std::string fz_in;
  bool fz_no_seed = false, fz_no_scan = false;
  auto* fit_zfs = app.add_subcommand("fit-zfs", "Fit D, E, A, scale and FWHM per family to a zero-field spectrum");
  fit_zfs->add_option("--input", fz_in, "Spectrum CSV (frequency_mhz, amplitude)")->required();
  fz.add_family_options(fit_zfs);
  fz.fwhm_opt = fit_zfs->add_option("--fwhm-mhz", fz.fwhm, "Linewidth guess")->capture_default_str();
  fz.lineshape_opt = fit_zfs->add_option("--lineshape", fz.lineshape, "lorentzian or gaussian")->capture_default_str();
  fit_zfs->add_option("--drive-axis", fz.drive_axis, "RF drive direction x,y,z")->capture_default_str();
  fit_zfs->add_flag("--unpolarized", fz.unpolarized, "Average the drive over x and y");
  fit_zfs->add_flag("--no-seed", fz_no_seed, "Skip peak-seeded D, E guesses");
  fit_zfs->add_flag("--no-scan", fz_no_scan, "Skip the lattice scan");
  fz_out.add(fit_zfs);
  fit_zfs->callback([&] {
    action = [&] {
      const auto table = read_csv(fz_in);
      require_columns(table, {"frequency_mhz", "amplitude"});
      fz.load();
      const Spectrum s{table.column("frequency_mhz"), table.column("amplitude")};
      const LineShape shape = fz.shape();
      std::vector<FamilyGuess> guesses;
      for (const auto& f : fz.families()) guesses.push_back({f.name, f.system, f.scale, shape.fwhm_mhz});
      ZeroFieldFitOptions opt;
      opt.kind = shape.kind;
      opt.drive.axis = parse_vec3(fz.drive_axis, "--drive-axis");
      opt.drive.unpolarized = fz.unpolarized;
      opt.scan = !fz_no_scan;
      if (!fz_no_seed) guesses = seed_zero_field_guesses(s, guesses, opt);
      return fz_out.emit(out, err, fit_zero_field_odmr(s, guesses, opt), "fit-zfs");
    };
  });

  // fit-lifetime
  FitOutputs fl_out;
  std::string fl_in;
  std::optional<double> fl_fwhm, fl_center;
  auto* fit_lifetime = app.add_subcommand(
      "fit-lifetime", "Deconvolve a mono-exponential decay (t_ps or t_ns, signal, optional response)");
  fit_lifetime->add_option("--input", fl_in, "Trace CSV")->required();
  fit_lifetime->add_option("--response-fwhm", fl_fwhm, "Gaussian response FWHM when no response column is given");
  fit_lifetime->add_option("--response-center", fl_center, "Gaussian response centre (default: signal onset)");
  fl_out.add(fit_lifetime);
  fit_lifetime->callback([&] {
    action = [&] {
      const auto table = read_csv(fl_in);
      TimeTrace tr;
      if (table.has_column("t_ps")) {
        tr.t = table.column("t_ps");
        tr.unit = "ps";
      } else if (table.has_column("t_ns")) {
        tr.t = table.column("t_ns");
        tr.unit = "ns";
      } else {
        throw ParseError("missing column 't_ps' (or 't_ns')");
      }
      tr.signal = table.column("signal");
      if (table.has_column("response")) {
        tr.response = table.column("response");
      } else {
        if (!fl_fwhm) throw ParseError("missing column 'response' (or pass --response-fwhm)");
        double center = 0.0;
        if (fl_center) {
          center = *fl_center;
        } else {
          // Steepest rise of the signal.
          std::size_t best = 1;
          for (std::size_t i = 1; i < tr.signal.size(); ++i)
            if (tr.signal[i] - tr.signal[i - 1] > tr.signal[best] - tr.signal[best - 1]) best = i;
          center = tr.t[best];
        }
        tr.response = gaussian_response(tr.t, center, *fl_fwhm);
      }
      return fl_out.emit(out, err, fit_lifetime_convolved(tr), "fit-lifetime (" + tr.unit + ")");
    };
  });

  // fit-t1
  FitOutputs ft_out;
  std::string ft_in;
  auto* fit_t1 = app.add_subcommand("fit-t1", "Fit a*exp(-tau/t_const) + floor to a trace (tau_ns, contrast)");
  fit_t1->add_option("--input", ft_in, "Trace CSV")->required();
  ft_out.add(fit_t1);
  fit_t1->callback([&] {
    action = [&] {
      const auto table = read_csv(ft_in);
      require_columns(table, {"tau_ns", "contrast"});
      TimeTrace tr;
      tr.t = table.column("tau_ns");
      tr.signal = table.column("contrast");
      const FitResult fit = fit_exponential_settle(tr);
      const double a = fit.value("amplitude"), fl = fit.value("floor");
      return ft_out.emit(out, err, fit, "fit-t1", {{"floor_over_initial", fl / (a + fl)}});
    };
  });

  // fit-ramsey
  FitOutputs fr_out;
  std::string fr_in;
  int fr_n = 2;
  auto* fit_ramsey_cmd = app.add_subcommand("fit-ramsey", "Fit damped multi-cosine fringes (tau_ns, contrast)");
  fit_ramsey_cmd->add_option("--input", fr_in, "Trace CSV")->required();
  fit_ramsey_cmd->add_option("--components", fr_n, "Number of cosine components")->capture_default_str();
  fr_out.add(fit_ramsey_cmd);
  fit_ramsey_cmd->callback([&] {
    action = [&] {
      const auto table = read_csv(fr_in);
      require_columns(table, {"tau_ns", "contrast"});
      const RamseyTrace tr = trace_from(table);
      RamseyFitOptions opt;
      opt.n_components = fr_n;
      ReportExtras extras;
      const auto peaks = fft_peaks(tr, fr_n, opt.fft);
      for (std::size_t k = 0; k < peaks.size(); ++k)
        extras.emplace_back("fft_peak" + std::to_string(k + 1) + "_mhz", peaks[k].freq_mhz);
      extras.emplace_back("fft_bin_mhz", fft_bin_width_mhz(tr, opt.fft));
      return fr_out.emit(out, err, fit_ramsey(tr, opt), "fit-ramsey", extras);
    };
  });

  // dw-factor
  Sink dw_out;
  std::string dw_in;
  DebyeWallerOptions dw;
  auto* dw_factor = app.add_subcommand("dw-factor", "ZPL fraction of an optical spectrum (wavelength_nm, intensity)");
  dw_factor->add_option("--input", dw_in, "Spectrum CSV")->required();
  dw_factor->add_option("--zpl-center-nm", dw.zpl_center_nm, "ZPL centre")->capture_default_str();
  dw_factor->add_option("--zpl-half-width-nm", dw.zpl_half_width_nm, "ZPL half window")->capture_default_str();
  dw_factor->add_option("--total-min-nm", dw.total_min_nm, "Total window start")->capture_default_str();
  dw_factor->add_option("--total-max-nm", dw.total_max_nm, "Total window end")->capture_default_str();
  dw_factor->add_flag("--baseline", dw.subtract_linear_baseline, "Subtract a linear baseline first");
  dw_factor->add_option("--out", dw_out.path, "Also write the value to this file");
  dw_factor->callback([&] {
    action = [&] {
      const auto table = read_csv(dw_in);
      require_columns(table, {"wavelength_nm", "intensity"});
      const OpticalSpectrum s{table.column("wavelength_nm"), table.column("intensity")};
      const std::string line = format_double(debye_waller(s, dw)) + "\n";
      out << line;
      if (!dw_out.path.empty()) write_file_atomic(dw_out.path, line);
      return kExitOk;
    };
  });

  // presets
  Sink ps_out;
  auto* presets = app.add_subcommand("presets", "Write the shipped family and rate-model configuration");
  presets->add_option("--out", ps_out.path, "Output file (default: stdout)");
  presets->callback([&] {
    action = [&] {
      ps_out.write(out, serialize_config(preset_config()));
      return kExitOk;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace spintk
