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

// Plain-text scenario configuration.
//
//   scenario = cw_decoupling        # required, top level
//   label = my run
//
//   [chain]        omega_01, omega_0T, j_xy, j_z
//   [drive]        mode (off|continuous|pulsed), rabi, carrier (resonant|value),
//                  pulse_area, pulse_duration, repetition_period, pulse_delay,
//                  gate_windows (start:end, ...)
//   [decay]        gamma
//   [integrator]   dt, t_max, snapshot_stride, frame (lab|rwa)
//   [trajectories] n_traj, master_seed, workers
//
// Numeric values accept `pi` as a factor: `2*pi`, `pi/2`, `0.5*pi/3`.
// Everything not given is taken from the scenario's defaults. Unknown
// sections and keys are errors. Overrides use dotted keys (`decay.gamma=4`).

#include <spinbarrier/errors.hpp>
#include <spinbarrier/experiments.hpp>

#include <nlohmann/json.hpp>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spinbarrier {

inline constexpr std::string_view kSchemaVersion = "1.0";

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// %.17g: enough digits that parsing the text gives back the same double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::optional<double> parse_plain_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) return std::nullopt;
  return v;
}

/// A product/quotient of numbers and `pi`.
inline std::optional<double> parse_number(std::string_view text) {
  std::string compact;
  for (char ch : text) {
    if (ch != ' ' && ch != '\t') compact.push_back(ch);
  }
  if (compact.empty()) return std::nullopt;
  double value = 1.0;
  char op = '*';
  std::size_t pos = 0;
  while (pos <= compact.size()) {
    std::size_t next = pos;
    // Skip a leading sign or exponent sign so "1e-3" and "-2" stay intact.
    while (next < compact.size()) {
      const char ch = compact[next];
      if ((ch == '*' || ch == '/') && next > pos) break;
      ++next;
    }
    const std::string_view factor = std::string_view(compact).substr(pos, next - pos);
    double f = 0.0;
    if (factor == "pi") {
      f = std::numbers::pi;
    } else if (factor == "-pi") {
      f = -std::numbers::pi;
    } else if (auto n = parse_plain_number(factor)) {
      f = *n;
    } else {
      return std::nullopt;
    }
    value = op == '*' ? value * f : value / f;
    if (next >= compact.size()) break;
    op = compact[next];
    pos = next + 1;
    if (pos >= compact.size()) return std::nullopt;
  }
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Key table

namespace detail {

struct Location {
  std::string source;
  int line = 0;  ///< 0 for command-line overrides
};

inline std::string where(const Location& loc, std::string_view key) {
  std::ostringstream s;
  s << loc.source;
  if (loc.line > 0) s << ":" << loc.line;
  s << ": key '" << key << "'";
  return s.str();
}

[[noreturn]] inline void bad_value(const Location& loc, std::string_view key, std::string_view value,
                                   std::string_view expected) {
  throw ConfigError(ConfigError::Kind::bad_value,
                    where(loc, key) + ": invalid value '" + std::string(value) + "', expected " +
                        std::string(expected));
}

inline double number_value(const Location& loc, std::string_view key, std::string_view value) {
  if (auto v = parse_number(value)) return *v;
  bad_value(loc, key, value, "a number");
}

inline std::uint64_t unsigned_value(const Location& loc, std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(loc, key, value, "a non-negative integer");
  return out;
}

inline std::vector<TimeWindow> windows_value(const Location& loc, std::string_view key, std::string_view value) {
  std::vector<TimeWindow> out;
  const auto v = trim(value);
  if (v.empty() || v == "none") return out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) bad_value(loc, key, value, "start:end pairs separated by commas");
    auto a = parse_number(item.substr(0, colon));
    auto b = parse_number(item.substr(colon + 1));
    if (!a || !b) bad_value(loc, key, value, "start:end pairs separated by commas");
    out.push_back({*a, *b});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Applies one `section.key = value` assignment. Scenario selection is
/// handled by the caller before defaults are resolved.
inline void assign(ScenarioConfig& cfg, std::string_view section, std::string_view key, std::string_view value,
                   const Location& loc) {
  const std::string full = section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
  auto num = [&] { return number_value(loc, full, value); };
  auto positive = [&] {
    const double v = num();
    if (!(v > 0.0)) bad_value(loc, full, value, "a number > 0");
    return v;
  };

  if (section.empty()) {
    if (key == "label") {
      cfg.label = std::string(value);
      return;
    }
  } else if (section == "chain") {
    auto& c = cfg.chain;
    if (key == "omega_01") {
      const double w = num();
      for (auto& e : c.zeeman) e = -w / 2.0;
      return;
    }
    if (key == "omega_0T") return void(c.omega_0T = positive());
    if (key == "j_xy") return void(c.j_xy = num());
    if (key == "j_z") return void(c.j_z = num());
  } else if (section == "drive") {
    auto& d = cfg.drive;
    if (key == "mode") {
      if (value == "off") d.mode = DriveMode::off;
      else if (value == "continuous") d.mode = DriveMode::continuous;
      else if (value == "pulsed") d.mode = DriveMode::pulsed;
      else bad_value(loc, full, value, "off, continuous or pulsed");
      return;
    }
    if (key == "rabi") return void(d.rabi = num());
    if (key == "carrier") {
      if (value == "resonant") d.carrier.reset();
      else d.carrier = num();
      return;
    }
    if (key == "pulse_area") return void(d.pulse_area = positive());
    if (key == "pulse_duration") return void(d.pulse_duration = positive());
    if (key == "repetition_period") return void(d.repetition_period = positive());
    if (key == "pulse_delay") return void(d.pulse_delay = num());
    if (key == "gate_windows") return void(d.gate_windows = windows_value(loc, full, value));
  } else if (section == "decay") {
    if (key == "gamma") return void(cfg.decay.gamma = num());
  } else if (section == "integrator") {
    auto& i = cfg.integrator;
    if (key == "dt") return void(i.dt = positive());
    if (key == "t_max") return void(i.t_max = positive());
    if (key == "snapshot_stride") {
      const auto s = unsigned_value(loc, full, value);
      if (s > 1000000000u) bad_value(loc, full, value, "a stride below 1e9");
      i.snapshot_stride = static_cast<int>(s);
      return;
    }
    if (key == "frame") {
      if (value == "lab") i.frame = Frame::lab;
      else if (value == "rwa") i.frame = Frame::rwa;
      else bad_value(loc, full, value, "lab or rwa");
      return;
    }
  } else if (section == "trajectories") {
    if (!cfg.trajectories) cfg.trajectories = TrajectoryConfig{};
    auto& t = *cfg.trajectories;
    if (key == "n_traj") return void(t.n_traj = unsigned_value(loc, full, value));
    if (key == "master_seed") return void(t.master_seed = unsigned_value(loc, full, value));
    if (key == "workers") return void(t.workers = static_cast<unsigned>(unsigned_value(loc, full, value)));
  } else {
    throw ConfigError(ConfigError::Kind::unknown_key,
                      loc.source + (loc.line > 0 ? ":" + std::to_string(loc.line) : std::string()) +
                          ": unknown section '" + std::string(section) + "'");
  }
  throw ConfigError(ConfigError::Kind::unknown_key, where(loc, full) + ": unknown key");
}

/// Keys whose values the pulsed drive derives from the others.
inline void derive(ScenarioConfig& cfg) {
  if (cfg.drive.mode == DriveMode::pulsed && cfg.drive.pulse_duration > 0.0) {
    cfg.drive.rabi = cfg.drive.pulse_area / cfg.drive.pulse_duration;
  }
}

struct Assignment {
  std::string section;
  std::string key;
  std::string value;
  Location loc;
};

inline ScenarioConfig resolve(std::optional<std::string> scenario, const Location& scenario_loc,
                              const std::vector<Assignment>& assignments) {
  if (!scenario) {
    throw ConfigError(ConfigError::Kind::syntax, scenario_loc.source + ": missing required key 'scenario'");
  }
  const auto kind = scenario_from_string(*scenario);
  if (!kind) bad_value(scenario_loc, "scenario", *scenario, "a known scenario name");
  ScenarioConfig cfg = default_scenario(*kind);
  for (const auto& a : assignments) assign(cfg, a.section, a.key, a.value, a.loc);
  derive(cfg);
  return cfg;
}

inline Assignment split_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(ConfigError::Kind::syntax, "override '" + std::string(text) + "': expected key=value");
  }
  const auto lhs = trim(text.substr(0, eq));
  Assignment a;
  a.value = std::string(trim(text.substr(eq + 1)));
  a.loc = {"--set", 0};
  const auto dot = lhs.find('.');
  if (dot == std::string_view::npos) {
    a.key = std::string(lhs);
  } else {
    a.section = std::string(lhs.substr(0, dot));
    a.key = std::string(lhs.substr(dot + 1));
  }
  if (a.key.empty()) throw ConfigError(ConfigError::Kind::syntax, "override '" + std::string(text) + "': empty key");
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing

/// Parses config text; `source` names it in error messages. Overrides are
/// applied after the file, in order. A `scenario` override switches the
/// defaults the file is resolved against.
inline ScenarioConfig parse_config_text(std::string_view text, const std::string& source = "<config>",
                                        const std::vector<std::string>& overrides = {}) {
  std::optional<std::string> scenario;
  detail::Location scenario_loc{source, 0};
  std::vector<detail::Assignment> assignments;
  std::string section;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const detail::Location loc{source, line_no};
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(ConfigError::Kind::syntax, source + ":" + std::to_string(line_no) + ": malformed section header");
      }
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section != "chain" && section != "drive" && section != "decay" && section != "integrator" &&
          section != "trajectories") {
        throw ConfigError(ConfigError::Kind::unknown_key,
                          source + ":" + std::to_string(line_no) + ": unknown section '" + section + "'");
      }
      if (section == "trajectories") assignments.push_back({section, "", "", loc});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(ConfigError::Kind::syntax, source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(ConfigError::Kind::syntax, source + ":" + std::to_string(line_no) + ": empty key");
    if (section.empty() && key == "scenario") {
      scenario = value;
      scenario_loc = loc;
      continue;
    }
    assignments.push_back({section, key, value, loc});
  }

  for (const auto& text_override : overrides) {
    auto a = detail::split_override(text_override);
    if (a.section.empty() && a.key == "scenario") {
      scenario = a.value;
      scenario_loc = a.loc;
      continue;
    }
    assignments.push_back(std::move(a));
  }

  // An empty key marks a bare [trajectories] header: enable the section.
  std::vector<detail::Assignment> effective;
  bool want_trajectories = false;
  for (auto& a : assignments) {
    if (a.section == "trajectories" && a.key.empty()) {
      want_trajectories = true;
      continue;
    }
    effective.push_back(a);
  }
  ScenarioConfig cfg = detail::resolve(scenario, scenario_loc, effective);
  if (want_trajectories && !cfg.trajectories) cfg.trajectories = TrajectoryConfig{};
  cfg.validate();
  return cfg;
}

inline ScenarioConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigError::Kind::missing_file, path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path, overrides);
}

// ---------------------------------------------------------------------------
// Emission

/// Resolved config in the text format; parse(emit(c)) == c and emission is
/// a fixed point.
inline std::string emit_config(const ScenarioConfig& cfg) {
  using detail::format_double;
  std::ostringstream o;
  o << "scenario = " << to_string(cfg.scenario) << "\n";
  o << "label = " << cfg.label << "\n";

  o << "\n[chain]\n";
  o << "omega_01 = " << format_double(cfg.chain.level_splitting(0)) << "\n";
  o << "omega_0T = " << format_double(cfg.chain.omega_0T) << "\n";
  o << "j_xy = " << format_double(cfg.chain.j_xy) << "\n";
  o << "j_z = " << format_double(cfg.chain.j_z) << "\n";

  const auto& d = cfg.drive;
  o << "\n[drive]\n";
  o << "mode = " << (d.mode == DriveMode::off ? "off" : d.mode == DriveMode::continuous ? "continuous" : "pulsed")
    << "\n";
  o << "rabi = " << format_double(d.rabi) << "\n";
  o << "carrier = " << (d.carrier ? format_double(*d.carrier) : std::string("resonant")) << "\n";
  o << "pulse_area = " << format_double(d.pulse_area) << "\n";
  o << "pulse_duration = " << format_double(d.pulse_duration) << "\n";
  o << "repetition_period = " << format_double(d.repetition_period) << "\n";
  o << "pulse_delay = " << format_double(d.pulse_delay) << "\n";
  o << "gate_windows = ";
  if (d.gate_windows.empty()) o << "none";
  for (std::size_t k = 0; k < d.gate_windows.size(); ++k) {
    o << (k ? ", " : "") << format_double(d.gate_windows[k].start) << ":" << format_double(d.gate_windows[k].end);
  }
  o << "\n";

  o << "\n[decay]\n";
  o << "gamma = " << format_double(cfg.decay.gamma) << "\n";

  const auto& i = cfg.integrator;
  o << "\n[integrator]\n";
  o << "dt = " << format_double(i.dt) << "\n";
  o << "t_max = " << format_double(i.t_max) << "\n";
  o << "snapshot_stride = " << i.snapshot_stride << "\n";
  o << "frame = " << (i.frame == Frame::lab ? "lab" : "rwa") << "\n";

  if (cfg.trajectories) {
    o << "\n[trajectories]\n";
    o << "n_traj = " << cfg.trajectories->n_traj << "\n";
    o << "master_seed = " << cfg.trajectories->master_seed << "\n";
    o << "workers = " << cfg.trajectories->workers << "\n";
  }
  return o.str();
}

/// Numeric keys that a sweep axis may name.
inline bool is_numeric_key(std::string_view key) {
  static constexpr std::string_view keys[] = {
      "chain.omega_01",       "chain.omega_0T",          "chain.j_xy",         "chain.j_z",
      "drive.rabi",           "drive.carrier",           "drive.pulse_area",   "drive.pulse_duration",
      "drive.repetition_period", "drive.pulse_delay",    "decay.gamma",        "integrator.dt",
      "integrator.t_max",     "integrator.snapshot_stride", "trajectories.n_traj", "trajectories.master_seed",
  };
  for (auto k : keys) {
    if (k == key) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// JSON form, embedded in run manifests

inline nlohmann::ordered_json config_to_json(const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["scenario"] = std::string(to_string(cfg.scenario));
  j["label"] = cfg.label;
  j["chain"] = {{"omega_01", cfg.chain.level_splitting(0)},
                {"omega_0T", cfg.chain.omega_0T},
                {"j_xy", cfg.chain.j_xy},
                {"j_z", cfg.chain.j_z}};
  const auto& d = cfg.drive;
  nlohmann::ordered_json windows = nlohmann::ordered_json::array();
  for (const auto& w : d.gate_windows) windows.push_back({w.start, w.end});
  j["drive"] = {{"mode", d.mode == DriveMode::off ? "off" : d.mode == DriveMode::continuous ? "continuous" : "pulsed"},
                {"rabi", d.rabi},
                {"carrier", d.carrier ? nlohmann::ordered_json(*d.carrier) : nlohmann::ordered_json("resonant")},
                {"pulse_area", d.pulse_area},
                {"pulse_duration", d.pulse_duration},
                {"repetition_period", d.repetition_period},
                {"pulse_delay", d.pulse_delay},
                {"gate_windows", windows}};
  j["decay"] = {{"gamma", cfg.decay.gamma}};
  j["integrator"] = {{"dt", cfg.integrator.dt},
                     {"t_max", cfg.integrator.t_max},
                     {"snapshot_stride", cfg.integrator.snapshot_stride},
                     {"frame", cfg.integrator.frame == Frame::lab ? "lab" : "rwa"}};
  if (cfg.trajectories) {
    j["trajectories"] = {{"n_traj", cfg.trajectories->n_traj},
                         {"master_seed", cfg.trajectories->master_seed},
                         {"workers", cfg.trajectories->workers}};
  } else {
    j["trajectories"] = nullptr;
  }
  return j;
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  try {
    const auto kind = scenario_from_string(j.at("scenario").get<std::string>());
    if (!kind) throw ConfigError(ConfigError::Kind::bad_value, "manifest: unknown scenario");
    ScenarioConfig cfg = default_scenario(*kind);
    cfg.label = j.at("label").get<std::string>();

    const auto& c = j.at("chain");
    const double w = c.at("omega_01").get<double>();
    for (auto& e : cfg.chain.zeeman) e = -w / 2.0;
    cfg.chain.omega_0T = c.at("omega_0T").get<double>();
    cfg.chain.j_xy = c.at("j_xy").get<double>();
    cfg.chain.j_z = c.at("j_z").get<double>();

    const auto& d = j.at("drive");
    const auto mode = d.at("mode").get<std::string>();
    cfg.drive.mode = mode == "off" ? DriveMode::off : mode == "continuous" ? DriveMode::continuous : DriveMode::pulsed;
    cfg.drive.rabi = d.at("rabi").get<double>();
    if (d.at("carrier").is_string()) cfg.drive.carrier.reset();
    else cfg.drive.carrier = d.at("carrier").get<double>();
    cfg.drive.pulse_area = d.at("pulse_area").get<double>();
    cfg.drive.pulse_duration = d.at("pulse_duration").get<double>();
    cfg.drive.repetition_period = d.at("repetition_period").get<double>();
    cfg.drive.pulse_delay = d.at("pulse_delay").get<double>();
    cfg.drive.gate_windows.clear();
    for (const auto& w2 : d.at("gate_windows")) cfg.drive.gate_windows.push_back({w2.at(0).get<double>(), w2.at(1).get<double>()});

    cfg.decay.gamma = j.at("decay").at("gamma").get<double>();
    const auto& i = j.at("integrator");
    cfg.integrator.dt = i.at("dt").get<double>();
    cfg.integrator.t_max = i.at("t_max").get<double>();
    cfg.integrator.snapshot_stride = i.at("snapshot_stride").get<int>();
    cfg.integrator.frame = i.at("frame").get<std::string>() == "lab" ? Frame::lab : Frame::rwa;

    if (j.at("trajectories").is_null()) {
      cfg.trajectories.reset();
    } else {
      const auto& t = j.at("trajectories");
      cfg.trajectories = TrajectoryConfig{t.at("n_traj").get<std::size_t>(), t.at("master_seed").get<std::uint64_t>(),
                                          t.at("workers").get<unsigned>()};
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(ConfigError::Kind::syntax, std::string("manifest config: ") + e.what());
  }
}

}  // namespace spinbarrier
