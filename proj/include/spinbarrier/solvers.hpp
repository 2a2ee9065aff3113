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

// Time evolution engines.
//
// All fixed-step engines run classical RK4 in the interaction picture of the
// diagonal part H0 of the static Hamiltonian: the state is carried as
// phi = exp(i H0 t) psi, so the fast Zeeman and |T> phases (up to ~1000 J_XY
// in the lab frame) are applied exactly and RK4 only integrates the coupling
// terms. Snapshots are always returned in the original (Schroedinger) frame.

#include <spinbarrier/errors.hpp>
#include <spinbarrier/model.hpp>
#include <spinbarrier/tensor.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace spinbarrier {

// ---------------------------------------------------------------------------
// Configuration and results

struct IntegratorConfig {
  double dt = 2e-4;
  double t_max = 10.0;
  int snapshot_stride = 100;
  Frame frame = Frame::lab;

  bool operator==(const IntegratorConfig&) const = default;
};

/// Step-size limits: the lab frame must resolve the optical carrier with at
/// least 20 steps per period; the rotating frame needs dt <= 0.01/J_XY.
inline void check_step(const IntegratorConfig& cfg, double carrier) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be > 0");
  if (!(cfg.t_max > 0.0)) throw std::invalid_argument("IntegratorConfig: t_max must be > 0");
  if (cfg.snapshot_stride < 1) throw std::invalid_argument("IntegratorConfig: snapshot_stride must be >= 1");
  const double limit = cfg.frame == Frame::lab ? (2.0 * std::numbers::pi / carrier) / 20.0 : 0.01;
  if (cfg.dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "IntegratorConfig: dt = " << cfg.dt << " exceeds the " << (cfg.frame == Frame::lab ? "lab" : "rwa")
        << "-frame limit " << limit;
    throw std::invalid_argument(msg.str());
  }
}

struct TrajectoryConfig {
  std::size_t n_traj = 5000;
  std::uint64_t master_seed = 20050101;
  unsigned workers = 0;  ///< 0 = hardware concurrency; never affects results

  bool operator==(const TrajectoryConfig&) const = default;
};

struct Diagnostics {
  double max_norm_drift = 0.0;   ///< max | <psi|psi> - 1 | (pure-state runs)
  double max_trace_drift = 0.0;  ///< max | tr rho - 1 | (master-equation / ensemble runs)
  double min_eigenvalue = 0.0;   ///< smallest eigenvalue of rho over snapshots
  std::size_t jumps = 0;
};

struct EvolutionResult {
  std::string solver;
  std::vector<double> times;
  std::vector<StateVector> states;      ///< pure-state runs
  std::vector<Operator> density;        ///< master-equation and ensemble runs
  std::vector<Operator> density_stderr;  ///< ensemble runs: (stderr of Re, stderr of Im) per element
  std::map<std::string, std::vector<double>> observables;
  Diagnostics diagnostics;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] bool is_pure() const { return !states.empty(); }

  [[nodiscard]] Operator density_at(std::size_t k) const {
    if (is_pure()) return states.at(k) * states.at(k).adjoint();
    return density.at(k);
  }
};

/// Hermitian observable evaluated on every trajectory at snapshot times.
struct NamedObservable {
  std::string name;
  std::function<Operator(double)> op;
};

namespace detail {

struct TimeGrid {
  std::size_t steps = 0;
  double dt = 0.0;
  std::vector<std::size_t> snapshot_steps;

  [[nodiscard]] double time(std::size_t step) const { return static_cast<double>(step) * dt; }
};

inline TimeGrid make_grid(const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.t_max > 0.0) || cfg.snapshot_stride < 1) {
    throw std::invalid_argument("IntegratorConfig: dt, t_max and snapshot_stride must be positive");
  }
  const double ratio = cfg.t_max / cfg.dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps == 0 || std::abs(static_cast<double>(steps) - ratio) > 1e-6) {
    throw std::invalid_argument("IntegratorConfig: t_max must be an integer multiple of dt");
  }
  TimeGrid g;
  g.steps = steps;
  g.dt = cfg.dt;
  const auto stride = static_cast<std::size_t>(cfg.snapshot_stride);
  for (std::size_t s = 0; s <= steps; s += stride) g.snapshot_steps.push_back(s);
  if (g.snapshot_steps.back() != steps) g.snapshot_steps.push_back(steps);
  return g;
}

/// Samples one RK4 (sub)step needs: its length, exp(i H0 t) at its start,
/// midpoint and end, and the drive coefficients at the same three times.
struct StepSamples {
  double h;
  std::array<const cplx*, 3> phase;
  std::array<const double*, 3> coeff;
};

/// H(t) tabulated for fixed-step RK4, split into the diagonal static part
/// (applied as exact phases) and the residual. Envelopes are read at an
/// interior point of each step, so a drive edge on a grid point is seen from
/// the correct side; a step with an edge inside it is split at the edge.
class SampledGenerator {
 public:
  SampledGenerator(const TimeDependentHamiltonian& h, const Operator& non_hermitian, const TimeGrid& grid)
      : dim_(h.dim()), n_ops_(h.terms.size()) {
    energies_ = h.static_part.diagonal().real();
    residual_ = h.static_part;
    residual_.diagonal().setZero();
    residual_ += non_hermitian;
    for (const auto& term : h.terms) ops_.push_back(term.op);
    residual_entries_ = nonzeros(residual_);
    for (const auto& op : ops_) op_entries_.push_back(nonzeros(op));

    phases_.resize(2 * grid.steps + 1);
    for (std::size_t k = 0; k < phases_.size(); ++k) phases_[k] = phase_at(0.5 * grid.dt * static_cast<double>(k));

    coeffs_.resize(3 * grid.steps * n_ops_);
    split_.assign(grid.steps, -1);
    const double tol = 1e-9 * grid.dt;
    for (std::size_t s = 0; s < grid.steps; ++s) {
      const double t0 = grid.time(s);
      const double t1 = grid.time(s + 1);
      const std::vector<double> edges = h.edges ? h.edges(t0 + tol, t1 - tol) : std::vector<double>{};
      if (edges.empty()) {
        fill_coeffs(h, t0, t1, coeffs_.data() + 3 * s * n_ops_);
        continue;
      }
      split_[s] = static_cast<int>(substeps_.size());
      std::vector<SubStep> subs;
      double u0 = t0;
      for (std::size_t e = 0; e <= edges.size(); ++e) {
        const double u1 = e < edges.size() ? edges[e] : t1;
        SubStep sub;
        sub.h = u1 - u0;
        sub.phase = {phase_at(u0), phase_at(0.5 * (u0 + u1)), phase_at(u1)};
        sub.coeff.resize(3 * n_ops_);
        fill_coeffs(h, u0, u1, sub.coeff.data());
        subs.push_back(std::move(sub));
        u0 = u1;
      }
      substeps_.push_back(std::move(subs));
    }
  }

  [[nodiscard]] int dim() const { return dim_; }

  /// exp(i H0 t_k) as a diagonal, t_k = k dt / 2.
  [[nodiscard]] const StateVector& phase(std::size_t k) const { return phases_[k]; }

  /// Calls f(StepSamples) for each RK4 substep of grid step `step`.
  template <class F>
  void for_each_substep(std::size_t step, double dt, F&& f) const {
    const int idx = split_[step];
    if (idx < 0) {
      const double* c = coeffs_.data() + 3 * step * n_ops_;
      f(StepSamples{dt,
                    {phases_[2 * step].data(), phases_[2 * step + 1].data(), phases_[2 * step + 2].data()},
                    {c, c + n_ops_, c + 2 * n_ops_}});
      return;
    }
    for (const auto& sub : substeps_[static_cast<std::size_t>(idx)]) {
      const double* c = sub.coeff.data();
      f(StepSamples{sub.h,
                    {sub.phase[0].data(), sub.phase[1].data(), sub.phase[2].data()},
                    {c, c + n_ops_, c + 2 * n_ops_}});
    }
  }

  /// d phi / dt for the interaction-picture state phi, given exp(i H0 t) and
  /// the drive coefficients at t. Explicit real arithmetic: this is the
  /// trajectory hot loop.
  void state_derivative(const cplx* phi, cplx* out, const cplx* p, const double* coeff) const {
    std::array<double, kMaxDim> pr, pi, yr, yi;
    for (int a = 0; a < dim_; ++a) {
      const double cr = p[a].real();
      const double ci = p[a].imag();
      const double fr = phi[a].real();
      const double fi = phi[a].imag();
      pr[a] = cr * fr + ci * fi;  // conj(p) * phi
      pi[a] = cr * fi - ci * fr;
      yr[a] = 0.0;
      yi[a] = 0.0;
    }
    auto accumulate = [&](const std::vector<Entry>& entries, double scale) {
      for (const auto& e : entries) {
        const double vr = scale * e.value.real();
        const double vi = scale * e.value.imag();
        yr[e.row] += vr * pr[e.col] - vi * pi[e.col];
        yi[e.row] += vr * pi[e.col] + vi * pr[e.col];
      }
    };
    accumulate(residual_entries_, 1.0);
    for (std::size_t j = 0; j < n_ops_; ++j) {
      if (coeff[j] != 0.0) accumulate(op_entries_[j], coeff[j]);
    }
    for (int a = 0; a < dim_; ++a) {
      // -i * p * y
      const double cr = p[a].real();
      const double ci = p[a].imag();
      const double zr = cr * yr[a] - ci * yi[a];
      const double zi = cr * yi[a] + ci * yr[a];
      out[a] = cplx(zi, -zr);
    }
  }

  /// d sigma / dt for the interaction-picture density matrix sigma.
  [[nodiscard]] Operator density_derivative(const Operator& sigma, const cplx* p, const double* coeff,
                                            const Operator& c, const Operator& cdc) const {
    Operator rho(dim_, dim_);
    for (int b = 0; b < dim_; ++b) {
      for (int a = 0; a < dim_; ++a) rho(a, b) = sigma(a, b) * std::conj(p[a]) * p[b];
    }
    Operator hr = residual_;
    for (std::size_t j = 0; j < n_ops_; ++j) {
      if (coeff[j] != 0.0) hr += coeff[j] * ops_[j];
    }
    Operator l = (-kI) * (hr * rho - rho * hr);
    if (cdc.size() > 0) l += c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
    for (int b = 0; b < dim_; ++b) {
      for (int a = 0; a < dim_; ++a) l(a, b) *= p[a] * std::conj(p[b]);
    }
    return l;
  }

 private:
  struct Entry {
    int row;
    int col;
    cplx value;
  };

  struct SubStep {
    double h = 0.0;
    std::array<StateVector, 3> phase;
    std::vector<double> coeff;
  };

  static std::vector<Entry> nonzeros(const Operator& m) {
    std::vector<Entry> out;
    for (int b = 0; b < m.cols(); ++b) {
      for (int a = 0; a < m.rows(); ++a) {
        if (m(a, b) != cplx(0.0)) out.push_back({a, b, m(a, b)});
      }
    }
    return out;
  }

  [[nodiscard]] StateVector phase_at(double t) const {
    StateVector p(dim_);
    for (int a = 0; a < dim_; ++a) p(a) = std::polar(1.0, energies_(a) * t);
    return p;
  }

  /// Coefficients at u0, the midpoint and u1 for an edge-free interval.
  void fill_coeffs(const TimeDependentHamiltonian& h, double u0, double u1, double* out) const {
    const double mid = 0.5 * (u0 + u1);
    const std::array<double, 3> times{u0, mid, u1};
    for (std::size_t j = 0; j < n_ops_; ++j) {
      const auto& term = h.terms[j];
      const double env = term.envelope(mid);
      for (std::size_t i = 0; i < 3; ++i) out[i * n_ops_ + j] = env * (term.carrier ? term.carrier(times[i]) : 1.0);
    }
  }

  int dim_;
  std::size_t n_ops_;
  RealVector energies_;
  std::vector<Entry> residual_entries_;
  std::vector<std::vector<Entry>> op_entries_;
  Operator residual_;
  std::vector<Operator> ops_;
  std::vector<StateVector> phases_;
  std::vector<double> coeffs_;  ///< 3 samples per unsplit step
  std::vector<int> split_;      ///< index into substeps_, or -1
  std::vector<std::vector<SubStep>> substeps_;
};

/// One classical RK4 step of the interaction-picture state, in place.
inline void rk4_state_step(const SampledGenerator& gen, StateVector& phi, std::size_t step, double dt) {
  const int n = gen.dim();
  gen.for_each_substep(step, dt, [&](const StepSamples& s) {
    std::array<cplx, kMaxDim> k1, k2, k3, k4, tmp;
    cplx* y = phi.data();
    const double h = s.h;
    gen.state_derivative(y, k1.data(), s.phase[0], s.coeff[0]);
    for (int a = 0; a < n; ++a) tmp[a] = y[a] + (0.5 * h) * k1[a];
    gen.state_derivative(tmp.data(), k2.data(), s.phase[1], s.coeff[1]);
    for (int a = 0; a < n; ++a) tmp[a] = y[a] + (0.5 * h) * k2[a];
    gen.state_derivative(tmp.data(), k3.data(), s.phase[1], s.coeff[1]);
    for (int a = 0; a < n; ++a) tmp[a] = y[a] + h * k3[a];
    gen.state_derivative(tmp.data(), k4.data(), s.phase[2], s.coeff[2]);
    for (int a = 0; a < n; ++a) y[a] += (h / 6.0) * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
  });
}

/// One classical RK4 step of the interaction-picture density matrix, in place.
inline void rk4_density_step(const SampledGenerator& gen, Operator& sigma, std::size_t step, double dt,
                             const Operator& c, const Operator& cdc) {
  gen.for_each_substep(step, dt, [&](const StepSamples& s) {
    const double h = s.h;
    const Operator k1 = gen.density_derivative(sigma, s.phase[0], s.coeff[0], c, cdc);
    const Operator k2 = gen.density_derivative(sigma + (0.5 * h) * k1, s.phase[1], s.coeff[1], c, cdc);
    const Operator k3 = gen.density_derivative(sigma + (0.5 * h) * k2, s.phase[1], s.coeff[1], c, cdc);
    const Operator k4 = gen.density_derivative(sigma + h * k3, s.phase[2], s.coeff[2], c, cdc);
    sigma += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    sigma = 0.5 * (sigma + sigma.adjoint()).eval();
  });
}

inline void require_square(const Operator& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline std::string drift_message(const char* what, double drift, double t) {
  std::ostringstream msg;
  msg << what << " drift " << drift << " at t = " << t << " exceeds 1e-4; reduce dt";
  return msg.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact propagation

/// psi(t) = exp(-i H t) psi0 at every snapshot time, from one eigendecomposition.
inline EvolutionResult evolve_unitary_static(const Operator& h, const StateVector& psi0, const IntegratorConfig& cfg) {
  const auto grid = detail::make_grid(cfg);
  detail::require_square(h, static_cast<int>(psi0.size()), "evolve_unitary_static");
  if (!is_hermitian(h, 1e-12 * std::max(1.0, max_abs(h)))) {
    throw std::invalid_argument("evolve_unitary_static: Hamiltonian is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Operator> eig(0.5 * (h + h.adjoint()));
  const Operator& v = eig.eigenvectors();
  const StateVector coeffs = v.adjoint() * psi0;

  EvolutionResult out;
  out.solver = "exact_unitary";
  for (std::size_t s : grid.snapshot_steps) {
    const double t = grid.time(s);
    StateVector c(coeffs.size());
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) c(k) = coeffs(k) * std::exp(-kI * eig.eigenvalues()(k) * t);
    StateVector psi = v * c;
    out.diagnostics.max_norm_drift = std::max(out.diagnostics.max_norm_drift, std::abs(psi.squaredNorm() - 1.0));
    out.times.push_back(t);
    out.states.push_back(std::move(psi));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schroedinger equation

inline EvolutionResult evolve_schrodinger(const TimeDependentHamiltonian& h, const StateVector& psi0,
                                          const IntegratorConfig& cfg) {
  const auto grid = detail::make_grid(cfg);
  detail::require_square(h.static_part, static_cast<int>(psi0.size()), "evolve_schrodinger");
  const detail::SampledGenerator gen(h, zeros(h.dim()), grid);

  EvolutionResult out;
  out.solver = "schrodinger_rk4";
  StateVector phi = psi0;
  const double norm0 = psi0.squaredNorm();
  std::size_t next = 0;
  for (std::size_t step = 0;; ++step) {
    const double drift = std::abs(phi.squaredNorm() - norm0);
    out.diagnostics.max_norm_drift = std::max(out.diagnostics.max_norm_drift, drift);
    if (drift > 1e-4) throw DriftError(detail::drift_message("norm", drift, grid.time(step)));
    if (next < grid.snapshot_steps.size() && grid.snapshot_steps[next] == step) {
      out.times.push_back(grid.time(step));
      out.states.push_back(gen.phase(2 * step).conjugate().cwiseProduct(phi));
      ++next;
    }
    if (step == grid.steps) break;
    detail::rk4_state_step(gen, phi, step, grid.dt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lindblad master equation

/// d rho/dt = -i[H, rho] + C rho C^dag - {C^dag C, rho}/2 with one collapse
/// operator C (already scaled by sqrt(gamma)).
inline EvolutionResult evolve_lindblad(const TimeDependentHamiltonian& h, const Operator& c, const Operator& rho0,
                                       const IntegratorConfig& cfg) {
  const auto grid = detail::make_grid(cfg);
  const int dim = h.dim();
  detail::require_square(rho0, dim, "evolve_lindblad");
  detail::require_square(c, dim, "evolve_lindblad");
  const detail::SampledGenerator gen(h, zeros(dim), grid);
  const Operator cdc = c.adjoint() * c;
  const double dt = grid.dt;

  EvolutionResult out;
  out.solver = "lindblad_rk4";
  out.diagnostics.min_eigenvalue = 1.0;
  const cplx tr0 = rho0.trace();
  Operator sigma = rho0;
  std::size_t next = 0;
  for (std::size_t step = 0;; ++step) {
    const double drift = std::abs(sigma.trace() - tr0);
    out.diagnostics.max_trace_drift = std::max(out.diagnostics.max_trace_drift, drift);
    if (drift > 1e-4) throw DriftError(detail::drift_message("trace", drift, grid.time(step)));
    if (next < grid.snapshot_steps.size() && grid.snapshot_steps[next] == step) {
      const StateVector& p = gen.phase(2 * step);
      Operator rho(dim, dim);
      for (int b = 0; b < dim; ++b) {
        for (int a = 0; a < dim; ++a) rho(a, b) = sigma(a, b) * std::conj(p(a)) * p(b);
      }
      const double lam = min_eigenvalue(rho);
      out.diagnostics.min_eigenvalue = std::min(out.diagnostics.min_eigenvalue, lam);
      if (lam < -1e-6) {
        std::ostringstream msg;
        msg << "density matrix eigenvalue " << lam << " at t = " << grid.time(step) << " below -1e-6; reduce dt";
        throw DriftError(msg.str());
      }
      out.times.push_back(grid.time(step));
      out.density.push_back(std::move(rho));
      ++next;
    }
    if (step == grid.steps) break;
    detail::rk4_density_step(gen, sigma, step, dt, c, cdc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo wave-function trajectories

namespace detail {

/// Per-trajectory random stream, a pure function of (master seed, index).
inline std::mt19937_64 trajectory_rng(std::uint64_t master_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct EnsembleSums {
  std::vector<Operator> mean;      // sum of rho
  std::vector<Operator> square;    // sum of (Re^2 + i Im^2) elementwise
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> obs_square;
  std::size_t jumps = 0;

  EnsembleSums(std::size_t snapshots, int dim, std::size_t n_obs)
      : mean(snapshots, zeros(dim)),
        square(snapshots, zeros(dim)),
        obs(n_obs, std::vector<double>(snapshots, 0.0)),
        obs_square(n_obs, std::vector<double>(snapshots, 0.0)) {}

  void add(const EnsembleSums& other) {
    for (std::size_t s = 0; s < mean.size(); ++s) {
      mean[s] += other.mean[s];
      square[s] += other.square[s];
    }
    for (std::size_t j = 0; j < obs.size(); ++j) {
      for (std::size_t s = 0; s < obs[j].size(); ++s) {
        obs[j][s] += other.obs[j][s];
        obs_square[j][s] += other.obs_square[j][s];
      }
    }
    jumps += other.jumps;
  }
};

inline constexpr std::size_t kTrajectoryBlock = 64;

}  // namespace detail

/// Quantum-jump unraveling of the master equation with a single collapse
/// operator. Each trajectory drifts under H - (i/2) C^dag C; a jump C psi /
/// |C psi| fires at the end of the step in which the squared norm first falls
/// below a uniform threshold, after which a fresh threshold is drawn.
///
/// Ensemble averages are reduced in trajectory-index order (fixed blocks), so
/// results are bit-identical for any number of workers.
inline EvolutionResult evolve_trajectories(const TimeDependentHamiltonian& h, const Operator& c,
                                           const StateVector& psi0, const IntegratorConfig& cfg,
                                           const TrajectoryConfig& tcfg,
                                           std::span<const NamedObservable> observables = {}) {
  if (tcfg.n_traj == 0) throw std::invalid_argument("TrajectoryConfig: n_traj must be positive");
  const auto grid = detail::make_grid(cfg);
  const int dim = h.dim();
  detail::require_square(c, dim, "evolve_trajectories");
  if (psi0.size() != dim) throw std::invalid_argument("evolve_trajectories: dimension mismatch");

  const Operator cdc = c.adjoint() * c;
  const bool can_jump = max_abs(c) > 0.0;
  const detail::SampledGenerator gen(h, (-0.5 * kI) * cdc, grid);
  const std::size_t n_snap = grid.snapshot_steps.size();

  std::vector<std::vector<Operator>> obs_ops(observables.size());
  for (std::size_t j = 0; j < observables.size(); ++j) {
    for (std::size_t s : grid.snapshot_steps) obs_ops[j].push_back(observables[j].op(grid.time(s)));
  }

  auto run_block = [&](std::size_t block) {
    detail::EnsembleSums sums(n_snap, dim, observables.size());
    const std::size_t first = block * detail::kTrajectoryBlock;
    const std::size_t last = std::min(tcfg.n_traj, first + detail::kTrajectoryBlock);
    for (std::size_t traj = first; traj < last; ++traj) {
      auto rng = detail::trajectory_rng(tcfg.master_seed, traj);
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      double threshold = uniform(rng);
      StateVector phi = psi0;
      std::size_t next = 0;
      for (std::size_t step = 0;; ++step) {
        if (next < n_snap && grid.snapshot_steps[next] == step) {
          const StateVector psi = gen.phase(2 * step).conjugate().cwiseProduct(phi) / phi.norm();
          const Operator rho = psi * psi.adjoint();
          sums.mean[next] += rho;
          for (int b = 0; b < dim; ++b) {
            for (int a = 0; a < dim; ++a) {
              const cplx z = rho(a, b);
              sums.square[next](a, b) += cplx(z.real() * z.real(), z.imag() * z.imag());
            }
          }
          for (std::size_t j = 0; j < obs_ops.size(); ++j) {
            const double v = (psi.adjoint() * obs_ops[j][next] * psi)(0, 0).real();
            sums.obs[j][next] += v;
            sums.obs_square[j][next] += v * v;
          }
          ++next;
        }
        if (step == grid.steps) break;
        detail::rk4_state_step(gen, phi, step, grid.dt);
        if (can_jump && phi.squaredNorm() < threshold) {
          const StateVector& p = gen.phase(2 * step + 2);
          const StateVector jumped = c * p.conjugate().cwiseProduct(phi);
          const double n = jumped.norm();
          if (n > 0.0) {
            phi = p.cwiseProduct(jumped) / n;
            ++sums.jumps;
          } else {
            phi /= phi.norm();
          }
          threshold = uniform(rng);
        }
      }
    }
    return sums;
  };

  const std::size_t n_blocks = (tcfg.n_traj + detail::kTrajectoryBlock - 1) / detail::kTrajectoryBlock;
  unsigned workers = tcfg.workers != 0 ? tcfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_blocks));

  detail::EnsembleSums total(n_snap, dim, observables.size());
  std::map<std::size_t, detail::EnsembleSums> pending;
  std::size_t next_to_reduce = 0;
  std::mutex mutex;
  std::atomic<std::size_t> next_block{0};
  std::exception_ptr failure;

  auto worker = [&] {
    try {
      for (std::size_t b = next_block++; b < n_blocks; b = next_block++) {
        auto sums = run_block(b);
        std::lock_guard lock(mutex);
        pending.emplace(b, std::move(sums));
        for (auto it = pending.find(next_to_reduce); it != pending.end(); it = pending.find(next_to_reduce)) {
          total.add(it->second);
          pending.erase(it);
          ++next_to_reduce;
        }
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
      next_block = n_blocks;
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const double n = static_cast<double>(tcfg.n_traj);
  auto stderr_of = [n](double sum, double sum_sq) {
    if (n < 2.0) return 0.0;
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / (n - 1.0));
  };

  EvolutionResult out;
  out.solver = "mcwf_rk4";
  out.diagnostics.jumps = total.jumps;
  out.diagnostics.min_eigenvalue = 1.0;
  for (std::size_t s = 0; s < n_snap; ++s) {
    Operator rho = total.mean[s] / n;
    Operator err(dim, dim);
    for (int b = 0; b < dim; ++b) {
      for (int a = 0; a < dim; ++a) {
        const cplx sum = total.mean[s](a, b);
        const cplx sq = total.square[s](a, b);
        err(a, b) = cplx(stderr_of(sum.real(), sq.real()), stderr_of(sum.imag(), sq.imag()));
      }
    }
    out.diagnostics.max_trace_drift = std::max(out.diagnostics.max_trace_drift, std::abs(rho.trace() - 1.0));
    out.diagnostics.min_eigenvalue = std::min(out.diagnostics.min_eigenvalue, min_eigenvalue(rho));
    out.times.push_back(grid.time(grid.snapshot_steps[s]));
    out.density.push_back(std::move(rho));
    out.density_stderr.push_back(std::move(err));
  }
  for (std::size_t j = 0; j < observables.size(); ++j) {
    auto& mean = out.observables[observables[j].name];
    auto& err = out.observables[observables[j].name + "_stderr"];
    for (std::size_t s = 0; s < n_snap; ++s) {
      mean.push_back(total.obs[j][s] / n);
      err.push_back(stderr_of(total.obs[j][s], total.obs_square[j][s]));
    }
  }
  return out;
}

}  // namespace spinbarrier
