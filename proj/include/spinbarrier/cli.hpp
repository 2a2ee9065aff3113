// Copyright 2026 The spinbarrier Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command implementations behind the `spinbarrier` executable. Each returns
// the process exit status; argument parsing lives in tools/.

#include <spinbarrier/config.hpp>
#include <spinbarrier/errors.hpp>
#include <spinbarrier/experiments.hpp>
#include <spinbarrier/gate.hpp>
#include <spinbarrier/io.hpp>

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace spinbarrier::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;

/// Flags shared by every verb that resolves a scenario.
struct CommonOptions {
  std::optional<std::string> config_path;
  std::string default_scenario = "cw_decoupling";
  std::vector<std::string> overrides;  ///< --set key=value, in order
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
};

/// Runs `body`, mapping exceptions to exit codes and reporting them on `err`.
inline int guarded(const std::function<int()>& body, std::ostream& err = std::cerr) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::config);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

inline ScenarioConfig resolve_config(const CommonOptions& opts, const std::vector<std::string>& extra = {}) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) overrides.push_back("trajectories.master_seed=" + std::to_string(*opts.seed));
  if (opts.trajectories) overrides.push_back("trajectories.n_traj=" + std::to_string(*opts.trajectories));
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  if (opts.config_path) return parse_config(*opts.config_path, overrides);
  return parse_config_text("scenario = " + opts.default_scenario + "\n", "<defaults>", overrides);
}

// ---------------------------------------------------------------------------
// run

struct RunRecord {
  int status = kExitOk;
  std::optional<ScenarioOutcome> outcome;
  std::string message;
};

/// Runs one resolved scenario into `dir`: trace.csv, manifest.json and, for
/// the gate scenario, gate_report.json.
inline RunRecord run_into(const ScenarioConfig& cfg, const fs::path& dir) {
  RunRecord rec;
  ensure_directory(dir);
  ScenarioOutcome o = run_scenario(cfg);
  std::vector<std::string> outputs{"trace.csv"};
  write_file(dir / "trace.csv", trace_csv(o.trace));
  if (o.gate) {
    write_file(dir / "gate_report.json", gate_report_json(*o.gate).dump(2) + "\n");
    outputs.push_back("gate_report.json");
  }
  write_file(dir / "manifest.json", run_manifest(o, outputs).dump(2) + "\n");
  if (o.flagged()) {
    rec.status = static_cast<int>(ErrorCategory::scientific);
    rec.message = o.gate && o.gate->flagged ? "barrier revival population below 0.99" : "decay fit pinned to its bound";
  }
  rec.outcome = std::move(o);
  return rec;
}

inline int run(const CommonOptions& opts, const fs::path& out_dir, std::ostream& log = std::cout) {
  const ScenarioConfig cfg = resolve_config(opts);
  const RunRecord rec = run_into(cfg, out_dir);
  const auto& o = *rec.outcome;
  log << to_string(cfg.scenario) << ": " << o.summary.solver << ", " << o.trace.times.size() << " snapshots, "
      << o.summary.wall_clock_seconds << " s -> " << out_dir.string() << "\n";
  if (o.fit) log << "decay fit: k_fit = " << o.fit->k_fit << " (reference " << o.fit->k_reference << ")\n";
  if (o.gate) log << "gate fidelity = " << o.gate->gate_fidelity << "\n";
  if (rec.status != kExitOk) std::cerr << "flagged: " << rec.message << "\n";
  return rec.status;
}

// ---------------------------------------------------------------------------
// sweep

inline constexpr std::array<double, 4> kSummaryFractions{0.25, 0.5, 0.75, 1.0};

inline std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const auto item = detail::trim(std::string_view(list).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (!item.empty()) {
      const auto v = detail::parse_number(item);
      if (!v) throw ConfigError(ConfigError::Kind::bad_value, "sweep value '" + std::string(item) + "' is not a number");
      out.push_back(*v);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError(ConfigError::Kind::bad_value, "sweep: empty value list");
  return out;
}

/// Config for one sweep point. A pulse-area axis keeps the average drive
/// amplitude fixed, as the pulse-train study does.
inline ScenarioConfig sweep_point(const CommonOptions& opts, const std::string& axis, double value) {
  if (axis == "drive.pulse_area") {
    const ScenarioConfig base = resolve_config(opts);
    if (base.drive.mode == DriveMode::pulsed) {
      ScenarioConfig cfg = with_pulse_area(base, value);
      cfg.label = base.label + " " + axis + "=" + detail::format_double(value);
      cfg.validate();
      return cfg;
    }
  }
  ScenarioConfig cfg = resolve_config(opts, {axis + "=" + detail::format_double(value)});
  cfg.label += " " + axis + "=" + detail::format_double(value);
  return cfg;
}

inline int sweep(const CommonOptions& opts, const std::string& axis, const std::string& values_text,
                 const fs::path& out_dir, unsigned jobs, std::ostream& log = std::cout) {
  if (!is_numeric_key(axis)) throw ConfigError(ConfigError::Kind::unknown_key, "sweep: '" + axis + "' is not a numeric config key");
  const std::vector<double> values = parse_values(values_text);
  // Resolve every point first so a config error stops the sweep before any run.
  std::vector<ScenarioConfig> configs;
  for (double v : values) configs.push_back(sweep_point(opts, axis, v));
  ensure_directory(out_dir);

  std::vector<RunRecord> records(values.size());
  std::vector<std::string> dirs(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", k);
    dirs[k] = name;
  }
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < values.size(); k = next++) {
      RunRecord rec;
      std::ostringstream err;
      rec.status = guarded(
          [&] {
            rec = run_into(configs[k], out_dir / dirs[k]);
            return rec.status;
          },
          err);
      if (rec.message.empty()) rec.message = err.str();
      records[k] = std::move(rec);
      std::lock_guard lock(log_mutex);
      log << dirs[k] << " " << axis << "=" << values[k] << " status " << records[k].status << "\n";
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs == 0 ? 1u : jobs, static_cast<unsigned>(values.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> header{"value", "status"};
  for (double f : kSummaryFractions) header.push_back("F_" + std::to_string(static_cast<int>(f * 100)) + "pct");
  header.push_back("k_fit");
  std::vector<std::vector<double>> cols(header.size());
  int overall = kExitOk;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto& rec = records[k];
    if (rec.status != kExitOk && overall == kExitOk) overall = rec.status;
    cols[0].push_back(values[k]);
    cols[1].push_back(rec.status);
    for (std::size_t q = 0; q < kSummaryFractions.size(); ++q) {
      double f = nan;
      if (rec.outcome) {
        const auto& tr = rec.outcome->trace;
        const double target = kSummaryFractions[q] * tr.times.back();
        std::size_t best = 0;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
          if (std::abs(tr.times[i] - target) < std::abs(tr.times[best] - target)) best = i;
        }
        f = tr.fidelity[best];
      }
      cols[2 + q].push_back(f);
    }
    cols.back().push_back(rec.outcome && rec.outcome->fit ? rec.outcome->fit->k_fit : nan);
  }
  write_file(out_dir / "sweep_summary.csv", format_csv(header, cols));

  nlohmann::ordered_json m;
  m["schema_version"] = std::string(kSchemaVersion);
  m["axis"] = axis;
  m["values"] = values;
  m["jobs"] = n_workers;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < values.size(); ++k) {
    runs.push_back({{"value", values[k]}, {"directory", dirs[k]}, {"status", records[k].status},
                    {"message", records[k].message}});
  }
  m["runs"] = runs;
  m["outputs"] = {"sweep_summary.csv"};
  write_file(out_dir / "sweep_manifest.json", m.dump(2) + "\n");
  return overall;
}

// ---------------------------------------------------------------------------
// plot

inline int plot(const std::vector<fs::path>& traces, const fs::path& out_svg, std::ostream& log = std::cout) {
  if (traces.empty()) throw ConfigError(ConfigError::Kind::bad_value, "plot: no trace files given");
  std::vector<PlotSeries> series;
  for (const auto& p : traces) series.push_back(load_series(p));
  if (out_svg.has_parent_path()) ensure_directory(out_svg.parent_path());
  write_file(out_svg, render_svg(series));
  nlohmann::ordered_json m;
  m["schema_version"] = std::string(kSchemaVersion);
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& p : traces) inputs.push_back(p.string());
  m["inputs"] = inputs;
  m["outputs"] = {out_svg.filename().string()};
  fs::path manifest = out_svg;
  manifest.replace_extension(".manifest.json");
  write_file(manifest, m.dump(2) + "\n");
  log << "wrote " << out_svg.string() << " (" << series.size() << " curves)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gate

inline int gate(const CommonOptions& opts, int repetitions, const fs::path& out_dir, std::ostream& log = std::cout) {
  CommonOptions o = opts;
  o.default_scenario = "three_site_gate";
  const ScenarioConfig cfg = resolve_config(o);
  if (cfg.scenario != ScenarioKind::three_site_gate) {
    throw ConfigError(ConfigError::Kind::invariant, "gate: config must select scenario three_site_gate");
  }
  const GateReport g = extract_gate(cfg.chain, repetitions);
  ensure_directory(out_dir);
  write_file(out_dir / "gate_report.json", gate_report_json(g).dump(2) + "\n");
  nlohmann::ordered_json m;
  m["schema_version"] = std::string(kSchemaVersion);
  m["label"] = cfg.label;
  m["config"] = config_to_json(cfg);
  m["config_text"] = emit_config(cfg);
  m["solver"] = "exact_propagator";
  m["repetitions"] = repetitions;
  m["flagged"] = g.flagged;
  m["outputs"] = {"gate_report.json"};
  write_file(out_dir / "manifest.json", m.dump(2) + "\n");
  log << "t_R = " << g.params.t_r << ", phi = " << g.params.phi << ", revival population = "
      << g.barrier_revival_population << ", gate fidelity = " << g.gate_fidelity << "\n";
  if (g.flagged) {
    std::cerr << "flagged: barrier revival population " << g.barrier_revival_population << " below 0.99\n";
    return static_cast<int>(ErrorCategory::scientific);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// selftest

struct Check {
  std::string name;
  std::function<bool(std::ostream&)> body;
};

/// Fast end-to-end invariant checks on small problems.
inline std::vector<Check> selftest_checks() {
  std::vector<Check> checks;
  checks.push_back({"density matrix of a random pure state is valid", [](std::ostream& d) {
                      std::mt19937_64 rng(7);
                      std::normal_distribution<double> n;
                      StateVector v(6);
                      for (int k = 0; k < 6; ++k) v(k) = cplx(n(rng), n(rng));
                      v.normalize();
                      const DensityMatrix rho = DensityMatrix::pure(v);
                      const double purity = (rho.matrix() * rho.matrix()).trace().real();
                      d << "purity " << purity;
                      return std::abs(purity - 1.0) < 1e-12;
                    }});
  checks.push_back({"partial trace recovers product factors", [](std::ostream& d) {
                      const SiteLayout layout{2, 3, 2};
                      const StateVector a = ideal_state(0.0, 0.0);
                      const StateVector b = basis_state(3, kLevelT);
                      const StateVector c = basis_state(2, 1);
                      const StateVector psi = product_state(std::vector<StateVector>{a, b, c});
                      const Operator rho = psi * psi.adjoint();
                      const double err = max_abs(partial_trace(rho, 0, layout) - a * a.adjoint()) +
                                         max_abs(partial_trace(rho, 1, layout) - b * b.adjoint());
                      d << "error " << err;
                      return err < 1e-14;
                    }});
  checks.push_back({"revival gate matches the analytic gate", [](std::ostream& d) {
                      double worst = 1.0;
                      for (double jz : {0.0, 0.5, 1.0, 2.0}) {
                        const auto g = extract_gate(ChainSpec::qubit_barrier_qubit(100.0, 1000.0, 1.0, jz));
                        if (g.flagged) return false;
                        worst = std::min(worst, g.gate_fidelity);
                      }
                      d << "worst fidelity " << worst;
                      return worst > 1.0 - 1e-5;
                    }});
  checks.push_back({"master equation at zero decay matches the state solver", [](std::ostream& d) {
                      ScenarioConfig cfg = default_scenario(ScenarioKind::cw_decoupling);
                      cfg.integrator.t_max = 0.2;
                      cfg.integrator.snapshot_stride = 40;
                      const auto h = driven_hamiltonian(cfg.chain, cfg.drive, cfg.integrator.frame);
                      const StateVector psi0 = initial_state(cfg.chain);
                      const auto me = evolve_lindblad(h, zeros(6), psi0 * psi0.adjoint(), cfg.integrator);
                      const auto se = evolve_schrodinger(h, psi0, cfg.integrator);
                      double err = 0.0;
                      for (std::size_t k = 0; k < me.size(); ++k) err = std::max(err, max_abs(me.density_at(k) - se.density_at(k)));
                      d << "max deviation " << err;
                      return err < 1e-6;
                    }});
  checks.push_back({"trajectory ensembles are reproducible for any worker count", [](std::ostream& d) {
                      ScenarioConfig cfg = default_scenario(ScenarioKind::jump_crosscheck);
                      cfg.decay.gamma = 40.0;
                      cfg.integrator.t_max = 0.1;
                      cfg.integrator.snapshot_stride = 40;
                      cfg.trajectories->n_traj = 96;
                      cfg.trajectories->workers = 1;
                      const auto a = run_scenario(cfg).trace;
                      cfg.trajectories->workers = 3;
                      const auto b = run_scenario(cfg).trace;
                      d << "compared " << a.fidelity.size() << " snapshots";
                      return a.fidelity == b.fidelity && a.pT == b.pT && a.fidelity_stderr == b.fidelity_stderr;
                    }});
  checks.push_back({"resolved configs round-trip through text and JSON", [](std::ostream& d) {
                      int n = 0;
                      for (const auto& [kind, name] : kScenarioNames) {
                        const auto cfg = parse_config_text("scenario = " + std::string(name) + "\n");
                        const auto text = emit_config(cfg);
                        const auto again = parse_config_text(text);
                        if (!(again == cfg) || emit_config(again) != text) return false;
                        if (!(config_from_json(nlohmann::json::parse(config_to_json(cfg).dump())) == cfg)) return false;
                        ++n;
                      }
                      d << n << " scenarios";
                      return true;
                    }});
  checks.push_back({"decayed master equation keeps a valid density matrix", [](std::ostream& d) {
                      ScenarioConfig cfg = default_scenario(ScenarioKind::cw_decoupling);
                      cfg.decay.gamma = 40.0;
                      cfg.integrator.t_max = 0.5;
                      const auto o = run_scenario(cfg);
                      d << "trace drift " << o.result.diagnostics.max_trace_drift << ", min eigenvalue "
                        << o.result.diagnostics.min_eigenvalue;
                      return o.result.diagnostics.max_trace_drift < 1e-6 && o.result.diagnostics.min_eigenvalue > -1e-8;
                    }});
  return checks;
}

inline int selftest(std::ostream& log = std::cout) {
  int failed = 0;
  for (const auto& c : selftest_checks()) {
    std::ostringstream detail_text;
    bool ok = false;
    try {
      ok = c.body(detail_text);
    } catch (const std::exception& e) {
      detail_text << "exception: " << e.what();
    }
    failed += ok ? 0 : 1;
    log << (ok ? "PASS " : "FAIL ") << c.name << " (" << detail_text.str() << ")\n";
  }
  log << (failed == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return failed == 0 ? kExitOk : static_cast<int>(ErrorCategory::scientific);
}

}  // namespace spinbarrier::cli
