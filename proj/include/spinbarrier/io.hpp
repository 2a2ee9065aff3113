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

// Output files: trace CSV, run manifest, gate report and quick-look SVG.

#include <spinbarrier/config.hpp>
#include <spinbarrier/errors.hpp>
#include <spinbarrier/experiments.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace spinbarrier {

namespace fs = std::filesystem;

/// Writes `content` to `path` in binary mode so '\n' is never translated.
inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << content;
  out.flush();
  if (!out) throw IoError(path.string() + ": write failed");
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(dir.string() + ": cannot create output directory");
}

// ---------------------------------------------------------------------------
// CSV

/// Header row plus rows of numbers at 17 significant digits.
inline std::string format_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += detail::format_double(columns[c].at(r));
    }
    out += '\n';
  }
  return out;
}

inline std::string trace_csv(const FidelityTrace& tr) {
  std::vector<std::string> header{"t", "fidelity", "p0", "p1", "pT"};
  std::vector<std::vector<double>> cols{tr.times, tr.fidelity, tr.p0, tr.p1, tr.pT};
  if (tr.has_stderr()) {
    header.insert(header.end(), {"fidelity_stderr", "p0_stderr", "p1_stderr", "pT_stderr"});
    cols.insert(cols.end(), {tr.fidelity_stderr, tr.p0_stderr, tr.p1_stderr, tr.pT_stderr});
  }
  return format_csv(header, cols);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  [[nodiscard]] const std::vector<double>* column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return &columns[c];
    }
    return nullptr;
  }
};

/// Numeric CSV with a header row. Errors name the file.
inline CsvTable read_csv(const fs::path& path) {
  const std::string text = read_file(path);
  auto fail = [&](const std::string& why) -> CsvTable {
    throw IoError(path.string() + ": malformed CSV: " + why);
  };
  std::istringstream in(text);
  std::string line;
  CsvTable t;
  if (!std::getline(in, line) || line.empty()) return fail("empty file");
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) t.header.push_back(std::string(detail::trim(cell)));
  }
  t.columns.resize(t.header.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    std::istringstream r(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(r, cell, ',')) {
      if (c >= t.header.size()) return fail("row " + std::to_string(row) + " has too many fields");
      const auto v = detail::parse_plain_number(detail::trim(cell));
      if (!v) return fail("row " + std::to_string(row) + " has a non-numeric field");
      t.columns[c++].push_back(*v);
    }
    if (c != t.header.size()) return fail("row " + std::to_string(row) + " has too few fields");
  }
  if (t.columns.empty() || t.columns.front().empty()) return fail("no data rows");
  return t;
}

// ---------------------------------------------------------------------------
// JSON documents

inline nlohmann::ordered_json matrix_json(const Operator& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline Operator matrix_from_json(const nlohmann::json& j) {
  const int n = static_cast<int>(j.size());
  Operator m = zeros(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) m(r, c) = cplx(j.at(r).at(c).at(0).get<double>(), j.at(r).at(c).at(1).get<double>());
  }
  return m;
}

inline nlohmann::ordered_json gate_report_json(const GateReport& g) {
  nlohmann::ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["revival_time"] = g.params.t_r;
  j["phi"] = g.params.phi;
  j["repetitions"] = g.repetitions;
  j["evolution_time"] = g.evolution_time;
  j["barrier_revival_population"] = g.barrier_revival_population;
  j["flagged"] = g.flagged;
  j["gate_fidelity"] = g.gate_fidelity;
  j["zeeman_only_fidelity"] = g.zeeman_only_fidelity;
  j["basis"] = {"00", "01", "10", "11"};
  j["u_analytic"] = matrix_json(g.u_analytic);
  j["u_extracted"] = matrix_json(g.u_extracted);
  return j;
}

inline nlohmann::ordered_json diagnostics_json(const Diagnostics& d) {
  return {{"max_norm_drift", d.max_norm_drift},
          {"max_trace_drift", d.max_trace_drift},
          {"min_eigenvalue", d.min_eigenvalue},
          {"jumps", d.jumps}};
}

/// Manifest of one run directory. `outputs` lists the files it owns.
inline nlohmann::ordered_json run_manifest(const ScenarioOutcome& o, const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["label"] = o.config.label;
  j["config"] = config_to_json(o.config);
  j["config_text"] = emit_config(o.config);
  j["solver"] = o.summary.solver;
  if (o.config.trajectories) {
    j["seeds"] = {{"master_seed", o.config.trajectories->master_seed},
                  {"n_traj", o.config.trajectories->n_traj},
                  {"derivation", "mt19937_64 seeded by seed_seq(master lo, master hi, index lo, index hi)"}};
  } else {
    j["seeds"] = nullptr;
  }
  j["average_drive_amplitude"] = o.summary.average_amplitude;
  j["average_drive_intensity"] = o.summary.average_intensity;
  j["diagnostics"] = diagnostics_json(o.result.diagnostics);
  if (o.fit) {
    j["decay_fit"] = {{"k_fit", o.fit->k_fit},
                      {"k_reference", o.fit->k_reference},
                      {"residual", o.fit->residual},
                      {"flagged", o.fit->flagged}};
  }
  if (o.gate) {
    j["gate"] = {{"gate_fidelity", o.gate->gate_fidelity},
                 {"barrier_revival_population", o.gate->barrier_revival_population},
                 {"flagged", o.gate->flagged}};
  }
  j["flagged"] = o.flagged();
  j["wall_clock_seconds"] = o.summary.wall_clock_seconds;
  j["outputs"] = outputs;
  return j;
}

inline ScenarioConfig config_from_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j.at("config"));
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> f;
};

inline std::string escape_xml(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

/// Static F(t) chart: one polyline per series, axes, ticks and a legend.
inline std::string render_svg(const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("render_svg: no series");
  constexpr double W = 720, H = 440, L = 70, R = 200, T = 30, B = 60;
  double t_max = 0.0;
  double f_min = 1.0;
  for (const auto& s : series) {
    for (double t : s.t) t_max = std::max(t_max, t);
    for (double f : s.f) f_min = std::min(f_min, f);
  }
  if (!(t_max > 0.0)) t_max = 1.0;
  const double y_lo = std::min(0.0, std::floor(f_min * 10.0) / 10.0);
  const double y_hi = 1.0;
  auto px = [&](double t) { return L + (W - L - R) * t / t_max; };
  auto py = [&](double f) { return T + (H - T - B) * (y_hi - f) / (y_hi - y_lo); };
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                           "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<g stroke=\"black\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n";
  o << "</g>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double t = t_max * k / 5.0;
    o << "<text x=\"" << px(t) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << t << "</text>\n";
    const double f = y_lo + (y_hi - y_lo) * k / 5.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(f) + 4 << "\" text-anchor=\"end\">" << f << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">t [1/J_XY]</text>\n";
  o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (T + H - B) / 2 << ")\">F</text>\n";
  o << "</g>\n";

  o.precision(3);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    o << "<polyline class=\"trace\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < series[s].t.size(); ++k) {
      o << (k ? " " : "") << px(series[s].t[k]) << "," << py(series[s].f[k]);
    }
    o << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text class=\"legend\" x=\"" << W - R + 46 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Loads F(t) from a trace file. The legend label comes from the
/// manifest.json next to it, or the parent directory name without one.
inline PlotSeries load_series(const fs::path& csv) {
  const CsvTable table = read_csv(csv);
  const auto* t = table.column("t");
  const auto* f = table.column("fidelity");
  if (!t || !f) throw IoError(csv.string() + ": malformed CSV: needs columns t and fidelity");
  PlotSeries s{csv.parent_path().filename().string(), *t, *f};
  if (s.label.empty()) s.label = csv.stem().string();
  const fs::path manifest = csv.parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    try {
      const auto j = nlohmann::json::parse(read_file(manifest));
      if (j.contains("label")) s.label = j["label"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
      // An unreadable manifest only costs the legend text.
    }
  }
  return s;
}

}  // namespace spinbarrier
