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

// Hamiltonians, laser drive and decay channel of the qubit/barrier chain.
// Energies are in units of J_XY with hbar = 1; times in units of 1/J_XY.

#include <spinbarrier/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spinbarrier {

inline constexpr int kLevel0 = 0;
inline constexpr int kLevel1 = 1;
inline constexpr int kLevelT = 2;

enum class Frame { lab, rwa };

// ---------------------------------------------------------------------------
// Chain description

/// Declarative 1-3 site chain. The barrier is the (unique) 3-level site.
struct ChainSpec {
  SiteLayout layout{3, 2};
  std::vector<double> zeeman{-50.0, -50.0};  ///< E_j, multiplies sigma^Z_j
  double j_xy = 1.0;
  double j_z = 0.0;
  double omega_0T = 1000.0;  ///< |0> -> |T> transition energy of the barrier

  /// Qubit + barrier pair used by the decoupling scenarios, barrier first.
  /// Every site gets E_j = -omega_01/2 so that |1> lies omega_01 above |0>.
  static ChainSpec qubit_barrier(double omega_01 = 100.0, double omega_0T = 1000.0, double j_xy = 1.0,
                                 double j_z = 0.0) {
    return {SiteLayout{3, 2}, {-omega_01 / 2, -omega_01 / 2}, j_xy, j_z, omega_0T};
  }

  /// Qubit X, barrier, qubit Y.
  static ChainSpec qubit_barrier_qubit(double omega_01 = 100.0, double omega_0T = 1000.0, double j_xy = 1.0,
                                       double j_z = 0.0) {
    const double e = -omega_01 / 2;
    return {SiteLayout{2, 3, 2}, {e, e, e}, j_xy, j_z, omega_0T};
  }

  static ChainSpec isolated_barrier(double omega_01 = 100.0, double omega_0T = 1000.0) {
    return {SiteLayout{3}, {-omega_01 / 2}, 1.0, 0.0, omega_0T};
  }

  [[nodiscard]] std::optional<std::size_t> barrier_site() const {
    for (std::size_t j = 0; j < layout.sites(); ++j) {
      if (layout.site_dim(j) == 3) return j;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::vector<std::size_t> qubit_sites() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < layout.sites(); ++j) {
      if (layout.site_dim(j) == 2) out.push_back(j);
    }
    return out;
  }

  /// E(|1>) - E(|0>) of a site's spin block; the free precession rate of a qubit.
  [[nodiscard]] double level_splitting(std::size_t site) const { return -2.0 * zeeman.at(site); }

  void validate() const {
    if (zeeman.size() != layout.sites()) throw std::invalid_argument("ChainSpec: one Zeeman energy per site required");
    for (double e : zeeman) {
      if (!std::isfinite(e)) throw std::invalid_argument("ChainSpec: Zeeman energies must be finite");
    }
    std::size_t barriers = 0;
    for (int d : layout.site_dims()) barriers += d == 3 ? 1 : 0;
    if (barriers > 1) throw std::invalid_argument("ChainSpec: at most one barrier site");
    if (layout.sites() == 3 && barriers == 1 && layout.site_dim(1) != 3) {
      throw std::invalid_argument("ChainSpec: the barrier must be the center of a 3-site chain");
    }
    if (!(j_xy >= 0.0) || !std::isfinite(j_xy)) throw std::invalid_argument("ChainSpec: j_xy must be >= 0");
    if (!std::isfinite(j_z)) throw std::invalid_argument("ChainSpec: j_z must be finite");
    if (!(omega_0T > 0.0)) throw std::invalid_argument("ChainSpec: omega_0T must be > 0");
  }

  bool operator==(const ChainSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Laser drive

enum class DriveMode { off, continuous, pulsed };

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const TimeWindow&) const = default;
};

/// Laser envelope: continuous wave or a train of square pulses, forced off
/// inside gate windows.
struct DriveSchedule {
  DriveMode mode = DriveMode::off;
  double rabi = 0.0;  ///< cw Rabi frequency, or the pulse peak (= area / duration)
  std::optional<double> carrier;  ///< laser frequency; unset means resonant with omega_0T
  double pulse_area = 2.0 * std::numbers::pi;
  double pulse_duration = 0.1;
  double repetition_period = 0.1 * std::numbers::pi;
  double pulse_delay = 0.0;  ///< start of the first pulse
  std::vector<TimeWindow> gate_windows;

  static DriveSchedule continuous(double rabi) {
    DriveSchedule s;
    s.mode = DriveMode::continuous;
    s.rabi = rabi;
    return s;
  }

  static DriveSchedule pulsed(double area, double duration, double period, double delay = 0.0) {
    DriveSchedule s;
    s.mode = DriveMode::pulsed;
    s.pulse_area = area;
    s.pulse_duration = duration;
    s.repetition_period = period;
    s.pulse_delay = delay;
    s.rabi = area / duration;
    return s;
  }

  [[nodiscard]] double carrier_or(double omega_0T) const { return carrier.value_or(omega_0T); }

  void validate() const {
    if (!(rabi >= 0.0) || !std::isfinite(rabi)) throw std::invalid_argument("DriveSchedule: rabi must be >= 0");
    if (mode == DriveMode::pulsed) {
      if (!(pulse_duration > 0.0)) throw std::invalid_argument("DriveSchedule: pulse_duration must be > 0");
      if (!(pulse_duration <= repetition_period)) {
        throw std::invalid_argument("DriveSchedule: pulse_duration must not exceed repetition_period");
      }
      if (!(pulse_area > 0.0)) throw std::invalid_argument("DriveSchedule: pulse_area must be > 0");
      if (!(pulse_delay >= 0.0)) throw std::invalid_argument("DriveSchedule: pulse_delay must be >= 0");
      if (std::abs(rabi - pulse_area / pulse_duration) > 1e-12 * rabi) {
        throw std::invalid_argument("DriveSchedule: pulsed rabi must equal pulse_area / pulse_duration");
      }
    }
    for (std::size_t k = 0; k < gate_windows.size(); ++k) {
      if (!(gate_windows[k].end > gate_windows[k].start)) {
        throw std::invalid_argument("DriveSchedule: gate window must have end > start");
      }
      if (k > 0 && !(gate_windows[k].start >= gate_windows[k - 1].end)) {
        throw std::invalid_argument("DriveSchedule: gate windows must be ordered and disjoint");
      }
    }
  }

  [[nodiscard]] bool in_gate_window(double t) const {
    for (const auto& w : gate_windows) {
      if (t >= w.start && t < w.end) return true;
    }
    return false;
  }

  /// Rabi envelope Omega_env(t).
  [[nodiscard]] double envelope(double t) const {
    if (mode == DriveMode::off || in_gate_window(t)) return 0.0;
    if (mode == DriveMode::continuous) return rabi;
    if (t < pulse_delay) return 0.0;
    const double phase = std::fmod(t - pulse_delay, repetition_period);
    return phase < pulse_duration ? pulse_area / pulse_duration : 0.0;
  }

  /// Times in the open interval (a, b) where the envelope jumps.
  [[nodiscard]] std::vector<double> edges(double a, double b) const {
    std::vector<double> out;
    auto add = [&](double x) {
      if (x > a && x < b) out.push_back(x);
    };
    if (mode == DriveMode::off) return out;
    for (const auto& w : gate_windows) {
      add(w.start);
      add(w.end);
    }
    if (mode == DriveMode::pulsed) {
      double n = std::max(0.0, std::floor((a - pulse_delay) / repetition_period));
      for (double start = pulse_delay + n * repetition_period; start < b;
           n += 1.0, start = pulse_delay + n * repetition_period) {
        add(start);
        add(start + pulse_duration);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Integral of f(Omega_env) over [a, b]; exact, the envelope being
  /// constant between edges.
  template <class F>
  [[nodiscard]] double integrate_envelope(double a, double b, F&& f) const {
    if (!(b > a)) return 0.0;
    std::vector<double> cuts = edges(a, b);
    cuts.insert(cuts.begin(), a);
    cuts.push_back(b);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (cuts[k + 1] > cuts[k]) acc += f(envelope(0.5 * (cuts[k] + cuts[k + 1]))) * (cuts[k + 1] - cuts[k]);
    }
    return acc;
  }

  /// Time averages of Omega_env and Omega_env^2 over [0, horizon].
  [[nodiscard]] std::pair<double, double> average_amplitude_and_intensity(double horizon) const {
    if (!(horizon > 0.0)) return {envelope(0.0), envelope(0.0) * envelope(0.0)};
    return {integrate_envelope(0.0, horizon, [](double e) { return e; }) / horizon,
            integrate_envelope(0.0, horizon, [](double e) { return e * e; }) / horizon};
  }

  bool operator==(const DriveSchedule&) const = default;
};

struct DecayConfig {
  double gamma = 0.0;  ///< |T> -> |0> decay rate

  void validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("DecayConfig: gamma must be >= 0");
  }
  bool operator==(const DecayConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Builders

namespace detail {

inline std::size_t require_barrier(const ChainSpec& spec) {
  const auto b = spec.barrier_site();
  if (!b) throw std::invalid_argument("chain has no barrier site");
  return *b;
}

}  // namespace detail

/// H_Z + H_int plus the barrier's |T> level.
///
/// H_Z = sum_j E_j sigma^Z_j, H_int = sum_j J_Z sigma^Z_j sigma^Z_{j+1}
/// + J_XY (sigma^X_j sigma^X_{j+1} + sigma^Y_j sigma^Y_{j+1}). Spin operators on
/// the barrier annihilate |T>. |T> sits omega_0T above the barrier's |0>.
inline Operator build_static_hamiltonian(const ChainSpec& spec) {
  spec.validate();
  const auto& layout = spec.layout;
  const int dim = layout.dim();
  Operator h = zeros(dim);
  for (std::size_t j = 0; j < layout.sites(); ++j) {
    h += spec.zeeman[j] * embed(pauli_z(), j, layout);
  }
  for (std::size_t j = 0; j + 1 < layout.sites(); ++j) {
    h += spec.j_z * embed(pauli_z(), j, layout) * embed(pauli_z(), j + 1, layout);
    h += spec.j_xy * (embed(pauli_x(), j, layout) * embed(pauli_x(), j + 1, layout) +
                      embed(pauli_y(), j, layout) * embed(pauli_y(), j + 1, layout));
  }
  if (const auto b = spec.barrier_site()) {
    h += (spec.omega_0T + spec.zeeman[*b]) * embed(transition(3, kLevelT, kLevelT), *b, spec.layout);
  }
  return h;
}

/// |T><0| + |0><T| on the barrier site.
inline Operator drive_operator(const ChainSpec& spec) {
  const auto b = detail::require_barrier(spec);
  return embed(transition(3, kLevelT, kLevel0) + transition(3, kLevel0, kLevelT), b, spec.layout);
}

/// Omega_env(t) cos(omega t) (|T><0| + |0><T|) on the barrier site.
inline Operator build_drive(const ChainSpec& spec, const DriveSchedule& sched, double t) {
  const double env = sched.envelope(t);
  if (env == 0.0) return zeros(spec.layout.dim());
  return env * std::cos(sched.carrier_or(spec.omega_0T) * t) * drive_operator(spec);
}

namespace detail {

inline void require_resonant(const ChainSpec& spec, const DriveSchedule& sched) {
  const double w = sched.carrier_or(spec.omega_0T);
  if (std::abs(w - spec.omega_0T) > 1e-12 * spec.omega_0T) {
    throw std::invalid_argument("rotating-wave drive requires a resonant carrier");
  }
}

}  // namespace detail

/// Rotating-frame drive (Omega_env(t)/2)(|T><0| + |0><T|), counter-rotating
/// terms dropped. Pair with rwa_static_hamiltonian.
inline Operator build_rwa_drive(const ChainSpec& spec, const DriveSchedule& sched, double t) {
  detail::require_resonant(spec, sched);
  const double env = sched.envelope(t);
  if (env == 0.0) return zeros(spec.layout.dim());
  return 0.5 * env * drive_operator(spec);
}

/// Static Hamiltonian in the frame rotating at the carrier on the barrier's |T>.
inline Operator rwa_static_hamiltonian(const ChainSpec& spec, const DriveSchedule& sched) {
  detail::require_resonant(spec, sched);
  const auto b = detail::require_barrier(spec);
  return build_static_hamiltonian(spec) -
         sched.carrier_or(spec.omega_0T) * embed(transition(3, kLevelT, kLevelT), b, spec.layout);
}

/// sqrt(gamma) |0><T| on the barrier site.
inline Operator build_collapse(const ChainSpec& spec, const DecayConfig& decay) {
  decay.validate();
  const auto b = detail::require_barrier(spec);
  return std::sqrt(decay.gamma) * embed(transition(3, kLevel0, kLevelT), b, spec.layout);
}

// ---------------------------------------------------------------------------
// Time-dependent Hamiltonian source

struct TimeDependentHamiltonian {
  /// envelope(t) * carrier(t) * op. The envelope is piecewise constant
  /// between the Hamiltonian's edges; a missing carrier means 1.
  struct Term {
    Operator op;
    std::function<double(double)> envelope;
    std::function<double(double)> carrier = {};

    [[nodiscard]] double coefficient(double t) const { return envelope(t) * (carrier ? carrier(t) : 1.0); }
  };

  Operator static_part;
  std::vector<Term> terms;
  /// Envelope discontinuities in the open interval (a, b), ascending.
  std::function<std::vector<double>(double, double)> edges = {};

  [[nodiscard]] int dim() const { return static_cast<int>(static_part.rows()); }

  [[nodiscard]] Operator at(double t) const {
    Operator h = static_part;
    for (const auto& term : terms) h += term.coefficient(t) * term.op;
    return h;
  }

  static TimeDependentHamiltonian constant(Operator h) { return {std::move(h), {}}; }
};

/// Full driven Hamiltonian in the requested frame.
inline TimeDependentHamiltonian driven_hamiltonian(const ChainSpec& spec, const DriveSchedule& sched, Frame frame) {
  spec.validate();
  sched.validate();
  TimeDependentHamiltonian h{frame == Frame::rwa ? rwa_static_hamiltonian(spec, sched) : build_static_hamiltonian(spec),
                             {}};
  if (sched.mode == DriveMode::off) return h;
  if (frame == Frame::rwa) {
    h.terms.push_back({drive_operator(spec), [sched](double t) { return 0.5 * sched.envelope(t); }});
  } else {
    const double w = sched.carrier_or(spec.omega_0T);
    h.terms.push_back({drive_operator(spec), [sched](double t) { return sched.envelope(t); },
                       [w](double t) { return std::cos(w * t); }});
  }
  h.edges = [sched](double a, double b) { return sched.edges(a, b); };
  return h;
}

}  // namespace spinbarrier
