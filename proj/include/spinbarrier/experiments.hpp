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

// Decoupling scenarios: a qubit next to a laser-cycled barrier, the
// stochastic cross-check, pulse trains, the Zeno regime and the three-site
// gate run.

#include <spinbarrier/errors.hpp>
#include <spinbarrier/gate.hpp>
#include <spinbarrier/model.hpp>
#include <spinbarrier/solvers.hpp>
#include <spinbarrier/tensor.hpp>

#include <boost/math/tools/minima.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spinbarrier {

enum class ScenarioKind { cw_decoupling, pulsed_decoupling, zeno, jump_crosscheck, three_site_gate, laser_off_baseline };

inline constexpr std::array<std::pair<ScenarioKind, std::string_view>, 6> kScenarioNames{{
    {ScenarioKind::cw_decoupling, "cw_decoupling"},
    {ScenarioKind::pulsed_decoupling, "pulsed_decoupling"},
    {ScenarioKind::zeno, "zeno"},
    {ScenarioKind::jump_crosscheck, "jump_crosscheck"},
    {ScenarioKind::three_site_gate, "three_site_gate"},
    {ScenarioKind::laser_off_baseline, "laser_off_baseline"},
}};

inline std::string_view to_string(ScenarioKind k) {
  for (const auto& [kind, name] : kScenarioNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

inline std::optional<ScenarioKind> scenario_from_string(std::string_view s) {
  for (const auto& [kind, name] : kScenarioNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

// Caption parameter set of the decoupling simulations, units of J_XY.
inline constexpr double kDefaultOmega01 = 100.0;
inline constexpr double kDefaultOmega0T = 1000.0;
inline constexpr double kDefaultRabi = 40.0;
inline constexpr double kDefaultPulseDuration = 0.1;
inline constexpr double kDefaultPulseAverageRabi = 20.0;

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::cw_decoupling;
  std::string label;
  ChainSpec chain = ChainSpec::qubit_barrier();
  DriveSchedule drive = DriveSchedule::continuous(kDefaultRabi);
  DecayConfig decay;
  IntegratorConfig integrator;
  std::optional<TrajectoryConfig> trajectories;

  /// Raises ConfigError on any invariant violation, including a chain that
  /// does not suit the scenario.
  void validate() const {
    try {
      chain.validate();
      drive.validate();
      decay.validate();
      if (scenario == ScenarioKind::three_site_gate) {
        if (chain.layout != SiteLayout{2, 3, 2}) throw std::invalid_argument("three_site_gate needs the 2-3-2 chain");
      } else if (chain.layout.sites() != 2 || !chain.barrier_site()) {
        throw std::invalid_argument(std::string(to_string(scenario)) + " needs the 2-site qubit+barrier chain");
      }
      if (scenario == ScenarioKind::jump_crosscheck && !trajectories) {
        throw std::invalid_argument("jump_crosscheck needs a trajectories section");
      }
      if (scenario == ScenarioKind::laser_off_baseline && drive.mode != DriveMode::off) {
        throw std::invalid_argument("laser_off_baseline requires drive mode off");
      }
      if (trajectories && trajectories->n_traj == 0) throw std::invalid_argument("n_traj must be positive");
      check_step(integrator, drive.carrier_or(chain.omega_0T));
      detail::make_grid(integrator);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(ConfigError::Kind::invariant, e.what());
    }
  }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Period giving the requested time-averaged envelope amplitude for square
/// pulses of the given area.
inline double period_for_average(double area, double average_rabi) { return area / average_rabi; }

inline ScenarioConfig default_scenario(ScenarioKind kind) {
  ScenarioConfig cfg;
  cfg.scenario = kind;
  cfg.label = std::string(to_string(kind));
  switch (kind) {
    case ScenarioKind::cw_decoupling:
      break;
    case ScenarioKind::zeno:
      cfg.decay.gamma = 100.0 * kDefaultRabi;
      break;
    case ScenarioKind::jump_crosscheck:
      cfg.decay.gamma = 4.0;
      cfg.trajectories = TrajectoryConfig{};
      break;
    case ScenarioKind::pulsed_decoupling: {
      const double area = 2.0 * std::numbers::pi;
      cfg.drive = DriveSchedule::pulsed(area, kDefaultPulseDuration, period_for_average(area, kDefaultPulseAverageRabi));
      cfg.integrator = IntegratorConfig{1e-4, 10.0, 200, Frame::rwa};
      break;
    }
    case ScenarioKind::laser_off_baseline:
      cfg.drive = DriveSchedule{};
      break;
    case ScenarioKind::three_site_gate: {
      cfg.chain = ChainSpec::qubit_barrier_qubit();
      cfg.drive = DriveSchedule{};
      const double tr = revival_time(cfg.chain.j_xy, cfg.chain.j_z);
      cfg.integrator = IntegratorConfig{tr / 4000.0, tr, 8, Frame::lab};
      break;
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Fidelity

/// (|0> + exp(-i omega t)|1>) / sqrt(2): a qubit precessing freely at omega.
inline StateVector ideal_state(double omega_01, double t) {
  StateVector v(2);
  v(0) = 1.0 / std::numbers::sqrt2;
  v(1) = std::exp(-kI * omega_01 * t) / std::numbers::sqrt2;
  return v;
}

/// Barrier in |1>, every qubit in (|0>+|1>)/sqrt(2).
inline StateVector initial_state(const ChainSpec& spec) {
  std::vector<StateVector> factors;
  for (std::size_t j = 0; j < spec.layout.sites(); ++j) {
    factors.push_back(spec.layout.site_dim(j) == 3 ? basis_state(3, kLevel1) : ideal_state(0.0, 0.0));
  }
  return product_state(factors);
}

struct FidelityTrace {
  std::vector<double> times;
  std::vector<double> fidelity;
  std::vector<double> p0, p1, pT;  ///< barrier populations
  // Filled for trajectory ensembles only.
  std::vector<double> fidelity_stderr, p0_stderr, p1_stderr, pT_stderr;

  [[nodiscard]] bool has_stderr() const { return !fidelity_stderr.empty(); }
};

/// Projector onto the ideal state of `qubit_site` at time t, on the full chain.
inline Operator ideal_projector(const ChainSpec& chain, std::size_t qubit_site, double t) {
  const StateVector ideal = ideal_state(chain.level_splitting(qubit_site), t);
  return embed(ideal * ideal.adjoint(), qubit_site, chain.layout);
}

inline Operator barrier_projector(const ChainSpec& chain, int level) {
  return embed(transition(3, level, level), *chain.barrier_site(), chain.layout);
}

/// F(t) = <ideal(t)| rho_Q(t) |ideal(t)> for the chosen qubit, plus the
/// barrier populations.
inline FidelityTrace decoupling_fidelity(const EvolutionResult& result, const ChainSpec& chain,
                                         std::optional<std::size_t> qubit_site = std::nullopt) {
  const auto qubits = chain.qubit_sites();
  if (qubits.empty()) throw std::invalid_argument("decoupling_fidelity: chain has no qubit site");
  const std::size_t q = qubit_site.value_or(qubits.front());
  const auto barrier = chain.barrier_site();
  const double omega = chain.level_splitting(q);

  FidelityTrace tr;
  for (std::size_t k = 0; k < result.size(); ++k) {
    const double t = result.times[k];
    const Operator rho = result.density_at(k);
    tr.times.push_back(t);
    tr.fidelity.push_back(expectation(partial_trace(rho, q, chain.layout), ideal_state(omega, t)));
    if (barrier) {
      const Operator rb = partial_trace(rho, *barrier, chain.layout);
      tr.p0.push_back(rb(kLevel0, kLevel0).real());
      tr.p1.push_back(rb(kLevel1, kLevel1).real());
      tr.pT.push_back(rb(kLevelT, kLevelT).real());
    }
  }
  auto take = [&](const char* name, std::vector<double>& dst) {
    if (auto it = result.observables.find(name); it != result.observables.end()) dst = it->second;
  };
  take("fidelity_stderr", tr.fidelity_stderr);
  take("p0_stderr", tr.p0_stderr);
  take("p1_stderr", tr.p1_stderr);
  take("pT_stderr", tr.pT_stderr);
  return tr;
}

inline double rms_distance(const FidelityTrace& a, const FidelityTrace& b) {
  if (a.fidelity.size() != b.fidelity.size() || a.fidelity.empty()) {
    throw std::invalid_argument("rms_distance: traces must share a non-empty time grid");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < a.fidelity.size(); ++k) acc += std::pow(a.fidelity[k] - b.fidelity[k], 2);
  return std::sqrt(acc / static_cast<double>(a.fidelity.size()));
}

inline double max_distance(const FidelityTrace& a, const FidelityTrace& b, double t_limit = INFINITY) {
  if (a.fidelity.size() != b.fidelity.size()) throw std::invalid_argument("max_distance: grid mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.fidelity.size(); ++k) {
    if (a.times[k] <= t_limit + 1e-12) m = std::max(m, std::abs(a.fidelity[k] - b.fidelity[k]));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Decay-trend fit

struct DecayFit {
  double k_fit = 0.0;
  double k_reference = 0.0;  ///< 20 Omega / gamma
  double residual = 0.0;     ///< rms of F - (1 + exp(-t/k))/2
  bool flagged = false;      ///< optimum pinned to the search boundary
};

/// Least-squares fit of F(t) ~ (1 + exp(-t/k)) / 2 over the whole trace.
inline DecayFit fit_decay_trend(const FidelityTrace& trace, double omega, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("fit_decay_trend: gamma must be > 0");
  if (trace.times.size() < 2) throw std::invalid_argument("fit_decay_trend: trace too short");
  auto sse = [&](double log_k) {
    const double k = std::exp(log_k);
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
      acc += std::pow(trace.fidelity[i] - 0.5 * (1.0 + std::exp(-trace.times[i] / k)), 2);
    }
    return acc;
  };
  const double lo = std::log(1e-3);
  const double hi = std::log(1e6);
  const auto [log_k, best] = boost::math::tools::brent_find_minima(sse, lo, hi, 52);

  DecayFit fit;
  fit.k_fit = std::exp(log_k);
  fit.k_reference = 20.0 * omega / gamma;
  fit.residual = std::sqrt(best / static_cast<double>(trace.times.size()));
  fit.flagged = !std::isfinite(fit.k_fit) || !(fit.k_fit > 0.0) || log_k - lo < 1e-6 || hi - log_k < 1e-6;
  return fit;
}

// ---------------------------------------------------------------------------
// Scenario runner

struct RunSummary {
  std::string solver;
  double average_amplitude = 0.0;
  double average_intensity = 0.0;
  double wall_clock_seconds = 0.0;
};

struct ScenarioOutcome {
  ScenarioConfig config;
  EvolutionResult result;
  FidelityTrace trace;
  std::optional<GateReport> gate;
  std::optional<DecayFit> fit;
  RunSummary summary;

  /// Scientific failure: revival below threshold or a degenerate fit.
  [[nodiscard]] bool flagged() const { return (gate && gate->flagged) || (fit && fit->flagged); }
};

namespace detail {

inline EvolutionResult run_master_equation(const ScenarioConfig& cfg) {
  const auto h = driven_hamiltonian(cfg.chain, cfg.drive, cfg.integrator.frame);
  const Operator c = build_collapse(cfg.chain, cfg.decay);
  const StateVector psi0 = initial_state(cfg.chain);
  return evolve_lindblad(h, c, psi0 * psi0.adjoint(), cfg.integrator);
}

}  // namespace detail

/// Runs one scenario with the solver it calls for: the master equation for
/// cw, pulsed and Zeno runs, trajectories for the cross-check, exact
/// propagation for the laser-off baseline and the gate.
inline ScenarioOutcome run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ScenarioOutcome out;
  out.config = cfg;

  switch (cfg.scenario) {
    case ScenarioKind::cw_decoupling:
    case ScenarioKind::pulsed_decoupling:
    case ScenarioKind::zeno:
      out.result = detail::run_master_equation(cfg);
      break;
    case ScenarioKind::jump_crosscheck: {
      const auto h = driven_hamiltonian(cfg.chain, cfg.drive, cfg.integrator.frame);
      const Operator c = build_collapse(cfg.chain, cfg.decay);
      const std::size_t q = cfg.chain.qubit_sites().front();
      const ChainSpec chain = cfg.chain;
      const std::vector<NamedObservable> obs{
          {"fidelity", [chain, q](double t) { return ideal_projector(chain, q, t); }},
          {"p0", [chain](double) { return barrier_projector(chain, kLevel0); }},
          {"p1", [chain](double) { return barrier_projector(chain, kLevel1); }},
          {"pT", [chain](double) { return barrier_projector(chain, kLevelT); }},
      };
      out.result = evolve_trajectories(h, c, initial_state(cfg.chain), cfg.integrator, *cfg.trajectories, obs);
      break;
    }
    case ScenarioKind::laser_off_baseline:
      out.result = evolve_unitary_static(build_static_hamiltonian(cfg.chain), initial_state(cfg.chain), cfg.integrator);
      break;
    case ScenarioKind::three_site_gate:
      out.gate = extract_gate(cfg.chain);
      if (cfg.drive.mode == DriveMode::off) {
        out.result =
            evolve_unitary_static(build_static_hamiltonian(cfg.chain), initial_state(cfg.chain), cfg.integrator);
      } else {
        out.result = detail::run_master_equation(cfg);
      }
      break;
  }
  out.trace = decoupling_fidelity(out.result, cfg.chain);
  if (cfg.scenario == ScenarioKind::cw_decoupling && cfg.drive.mode == DriveMode::continuous &&
      cfg.decay.gamma > 0.0) {
    out.fit = fit_decay_trend(out.trace, cfg.drive.rabi, cfg.decay.gamma);
  }

  out.summary.solver = out.result.solver;
  const auto [amp, inten] = cfg.drive.average_amplitude_and_intensity(cfg.integrator.t_max);
  out.summary.average_amplitude = amp;
  out.summary.average_intensity = inten;
  out.summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Pulse trains

inline constexpr std::array<double, 3> kPulseAreas{std::numbers::pi, 2.0 * std::numbers::pi,
                                                   4.0 * std::numbers::pi};

/// Copy of a pulsed config with a different pulse area at the same
/// time-averaged envelope amplitude and pulse duration.
inline ScenarioConfig with_pulse_area(const ScenarioConfig& cfg, double area) {
  if (cfg.drive.mode != DriveMode::pulsed) throw std::invalid_argument("pulse-area change needs a pulsed drive");
  const double average = cfg.drive.pulse_area / cfg.drive.repetition_period;
  ScenarioConfig out = cfg;
  out.drive = DriveSchedule::pulsed(area, cfg.drive.pulse_duration, period_for_average(area, average),
                                    cfg.drive.pulse_delay);
  out.drive.carrier = cfg.drive.carrier;
  out.drive.gate_windows = cfg.drive.gate_windows;
  return out;
}

/// Runs the pi, 2pi and 4pi trains at the config's average drive amplitude.
inline std::map<double, FidelityTrace> pulse_train_study(const ScenarioConfig& cfg) {
  std::map<double, FidelityTrace> out;
  for (double area : kPulseAreas) out.emplace(area, run_scenario(with_pulse_area(cfg, area)).trace);
  return out;
}

// ---------------------------------------------------------------------------
// Pulse mechanism and Zeno regime

struct PulsePhaseProbe {
  cplx ratio;              ///< amplitude with the pulse / amplitude without it
  double t_population = 0.0;  ///< residual |T> population after the pulse
};

/// Starts from barrier |0>, qubit |1>, lets the pair evolve freely for
/// `delay`, applies one square rotating-frame pulse of the given area and
/// duration, and compares the amplitude of the starting component with the
/// pulse-free evolution over the same interval. Exact piecewise propagation.
inline PulsePhaseProbe pulse_phase_probe(const ChainSpec& chain, double area, double duration, double delay) {
  chain.validate();
  const auto b = detail::require_barrier(chain);
  const std::size_t q = chain.qubit_sites().at(0);
  std::vector<StateVector> factors(2);
  factors[b] = basis_state(3, kLevel0);
  factors[q] = basis_state(2, kLevel1);
  const StateVector psi0 = product_state(factors);

  const DriveSchedule resonant;
  const Operator h0 = rwa_static_hamiltonian(chain, resonant);
  const Operator hp = h0 + 0.5 * (area / duration) * drive_operator(chain);
  const StateVector with_pulse = matrix_exp(hp, duration) * (matrix_exp(h0, delay) * psi0);
  const StateVector without = matrix_exp(h0, delay + duration) * psi0;

  const Operator p_t = barrier_projector(chain, kLevelT);
  PulsePhaseProbe probe;
  probe.ratio = psi0.dot(with_pulse) / psi0.dot(without);
  probe.t_population = (with_pulse.adjoint() * p_t * with_pulse)(0, 0).real();
  return probe;
}

/// Runs the laser-off reference on the same grid as `cfg`.
inline FidelityTrace laser_off_trace(const ScenarioConfig& cfg) {
  ScenarioConfig off = cfg;
  off.scenario = ScenarioKind::laser_off_baseline;
  off.drive = DriveSchedule{};
  off.decay = DecayConfig{};
  off.trajectories.reset();
  return run_scenario(off).trace;
}

/// rms distance to the laser-off baseline for each decay rate.
inline std::vector<std::pair<double, double>> zeno_distance_scan(const ScenarioConfig& cfg,
                                                                 const std::vector<double>& gammas) {
  const FidelityTrace baseline = laser_off_trace(cfg);
  std::vector<std::pair<double, double>> out;
  for (double g : gammas) {
    ScenarioConfig run = cfg;
    run.scenario = ScenarioKind::zeno;
    run.decay.gamma = g;
    out.emplace_back(g, rms_distance(run_scenario(run).trace, baseline));
  }
  return out;
}

}  // namespace spinbarrier
