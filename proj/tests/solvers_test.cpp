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

#include <spinbarrier/experiments.hpp>
#include <spinbarrier/gate.hpp>
#include <spinbarrier/model.hpp>
#include <spinbarrier/solvers.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

namespace sb = spinbarrier;
using sb::Operator;
using sb::StateVector;

namespace {

constexpr double kPi = std::numbers::pi;

double max_density_deviation(const sb::EvolutionResult& a, const sb::EvolutionResult& b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
    worst = std::max(worst, sb::max_abs(a.density_at(k) - b.density_at(k)));
  }
  return worst;
}

sb::TimeDependentHamiltonian cw_lab() {
  return sb::driven_hamiltonian(sb::ChainSpec::qubit_barrier(), sb::DriveSchedule::continuous(40.0), sb::Frame::lab);
}

TEST(Grid, SnapshotsAreStrictlyIncreasingAndIncludeTheEnd) {
  const auto g = sb::detail::make_grid({0.01, 1.0, 30, sb::Frame::rwa});
  EXPECT_EQ(g.steps, 100u);
  EXPECT_EQ(g.snapshot_steps.front(), 0u);
  EXPECT_EQ(g.snapshot_steps.back(), 100u);
  for (std::size_t k = 1; k < g.snapshot_steps.size(); ++k) EXPECT_GT(g.snapshot_steps[k], g.snapshot_steps[k - 1]);
  EXPECT_THROW(sb::detail::make_grid({0.3, 1.0, 1, sb::Frame::rwa}), std::invalid_argument);
}

TEST(StepLimits, LabFrameMustResolveTheCarrier) {
  EXPECT_NO_THROW(sb::check_step({2.5e-4, 10.0, 80, sb::Frame::lab}, 1000.0));
  EXPECT_THROW(sb::check_step({5e-4, 10.0, 80, sb::Frame::lab}, 1000.0), std::invalid_argument);
  EXPECT_NO_THROW(sb::check_step({0.01, 10.0, 80, sb::Frame::rwa}, 1000.0));
  EXPECT_THROW(sb::check_step({0.02, 10.0, 80, sb::Frame::rwa}, 1000.0), std::invalid_argument);
}

TEST(UnitaryStatic, ZeroHamiltonianLeavesStateAlone) {
  std::mt19937_64 rng(1);
  const StateVector psi0(oracle::random_state(6, rng));
  const auto r = sb::evolve_unitary_static(sb::zeros(6), psi0, {0.1, 2.0, 5, sb::Frame::lab});
  for (const auto& s : r.states) EXPECT_LT((s - psi0).norm(), 1e-14);
}

TEST(UnitaryStatic, XYSwapCompletesAtQuarterPeriod) {
  const sb::ChainSpec spec{sb::SiteLayout{2, 2}, {0.0, 0.0}, 1.0, 0.0, 1000.0};
  const StateVector psi0 = sb::basis_state(4, 2);  // |10>
  const auto r = sb::evolve_unitary_static(sb::build_static_hamiltonian(spec), psi0, {kPi / 4000.0, kPi / 4.0, 1000, sb::Frame::lab});
  // Two-level block with off-diagonal 2 J_XY: full transfer when 2 J_XY t = pi/2.
  EXPECT_NEAR(std::norm(r.states.back()(1)), 1.0, 1e-12);
  for (const auto& s : r.states) EXPECT_NEAR(s.squaredNorm(), 1.0, 1e-10);
}

TEST(UnitaryStatic, BarrierRevivesAtRevivalTime) {
  for (double jz : {0.0, 1.0}) {
    const auto spec = sb::ChainSpec::qubit_barrier_qubit(100.0, 1000.0, 1.0, jz);
    const double tr = sb::revival_time(1.0, jz);
    const auto r = sb::evolve_unitary_static(sb::build_static_hamiltonian(spec), sb::initial_state(spec),
                                             {tr / 100.0, tr, 100, sb::Frame::lab});
    const Operator rb = sb::partial_trace(r.density_at(r.size() - 1), 1, spec.layout);
    EXPECT_NEAR(rb(sb::kLevel1, sb::kLevel1).real(), 1.0, 1e-9);
  }
}

TEST(Schrodinger, ConstantHamiltonianMatchesExactPropagator) {
  const auto spec = sb::ChainSpec::qubit_barrier_qubit(100.0, 1000.0, 1.0, 0.5);
  const Operator h = sb::build_static_hamiltonian(spec);
  const sb::IntegratorConfig cfg{2.5e-4, 2.0, 400, sb::Frame::lab};
  const auto exact = sb::evolve_unitary_static(h, sb::initial_state(spec), cfg);
  const auto rk = sb::evolve_schrodinger(sb::TimeDependentHamiltonian::constant(h), sb::initial_state(spec), cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    worst = std::max(worst, (exact.states[k] - rk.states[k]).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-7);
}

TEST(Schrodinger, ResonantRabiFirstMaximumAtPiOverOmega) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  const double omega = 40.0;
  const sb::IntegratorConfig cfg{1e-4, 0.2, 1, sb::Frame::rwa};
  const auto r = sb::evolve_schrodinger(sb::driven_hamiltonian(spec, sb::DriveSchedule::continuous(omega), sb::Frame::rwa),
                                        sb::basis_state(3, sb::kLevel0), cfg);
  std::size_t arg = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double p = std::norm(r.states[k](sb::kLevelT));
    if (p > std::norm(r.states[arg](sb::kLevelT))) arg = k;
    worst = std::max(worst, std::abs(p - oracle::rabi_population(omega / 2.0, r.times[k])));
  }
  EXPECT_NEAR(r.times[arg], kPi / omega, 1e-4);
  EXPECT_NEAR(std::norm(r.states[arg](sb::kLevelT)), 1.0, 1e-3);
  EXPECT_LT(worst, 1e-9);
}

TEST(Schrodinger, NoDriveReducesToStaticEvolution) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const sb::IntegratorConfig cfg{2.5e-4, 1.0, 100, sb::Frame::lab};
  const auto h = sb::driven_hamiltonian(spec, sb::DriveSchedule{}, sb::Frame::lab);
  EXPECT_TRUE(h.terms.empty());
  const auto a = sb::evolve_schrodinger(h, sb::initial_state(spec), cfg);
  const auto b = sb::evolve_unitary_static(sb::build_static_hamiltonian(spec), sb::initial_state(spec), cfg);
  EXPECT_LT(max_density_deviation(a, b), 1e-9);
}

TEST(Schrodinger, NormDriftStaysBelowContractOverLongHorizon) {
  const auto r = sb::evolve_schrodinger(cw_lab(), sb::initial_state(sb::ChainSpec::qubit_barrier()),
                                        {2e-4, 20.0, 5000, sb::Frame::lab});
  EXPECT_LT(r.diagnostics.max_norm_drift, 1e-6);
}

TEST(Schrodinger, OversizedStepIsAHardError) {
  const Operator h = 1000.0 * sb::pauli_x();
  EXPECT_THROW(sb::evolve_schrodinger(sb::TimeDependentHamiltonian::constant(h), sb::basis_state(2, 0),
                                      {0.01, 1.0, 10, sb::Frame::lab}),
               sb::DriftError);
}

TEST(Lindblad, NoDecayMatchesSchrodinger) {
  const sb::IntegratorConfig cfg{2.5e-4, 2.0, 80, sb::Frame::lab};
  const StateVector psi0 = sb::initial_state(sb::ChainSpec::qubit_barrier());
  const auto a = sb::evolve_lindblad(cw_lab(), sb::zeros(6), psi0 * psi0.adjoint(), cfg);
  const auto b = sb::evolve_schrodinger(cw_lab(), psi0, cfg);
  EXPECT_LT(max_density_deviation(a, b), 1e-6);
}

TEST(Lindblad, ShelvedPopulationDecaysExponentially) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  const StateVector t = sb::basis_state(3, sb::kLevelT);
  const auto r = sb::evolve_lindblad(sb::driven_hamiltonian(spec, sb::DriveSchedule{}, sb::Frame::lab),
                                     sb::build_collapse(spec, {1.0}), t * t.adjoint(), {1e-3, 4.0, 100, sb::Frame::lab});
  for (std::size_t k = 0; k < r.size(); ++k) {
    EXPECT_NEAR(r.density[k](sb::kLevelT, sb::kLevelT).real(), std::exp(-r.times[k]), 1e-6);
  }
}

TEST(Lindblad, DecayDrivesMixedStateToGround) {
  const Operator c = sb::transition(2, 0, 1);
  const auto r = sb::evolve_lindblad(sb::TimeDependentHamiltonian::constant(sb::zeros(2)), c, 0.5 * sb::identity(2),
                                     {0.01, 30.0, 3000, sb::Frame::lab});
  EXPECT_LT(sb::max_abs(r.density.back() - sb::transition(2, 0, 0)), 1e-12);
}

TEST(Lindblad, MatchesExactLiouvillianPropagator) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const auto sched = sb::DriveSchedule::continuous(40.0);
  const Operator h = sb::rwa_static_hamiltonian(spec, sched) + 20.0 * sb::drive_operator(spec);
  const Operator c = sb::build_collapse(spec, {13.0});
  const StateVector psi0 = sb::initial_state(spec);
  const Operator rho0 = psi0 * psi0.adjoint();
  const auto r = sb::evolve_lindblad(sb::driven_hamiltonian(spec, sched, sb::Frame::rwa), c, rho0,
                                     {1e-3, 2.0, 250, sb::Frame::rwa});
  for (std::size_t k = 0; k < r.size(); ++k) {
    const oracle::Dense want = oracle::lindblad_exact(h, c, rho0, r.times[k]);
    EXPECT_LT(sb::max_abs(r.density[k] - Operator(want)), 1e-7) << "t = " << r.times[k];
  }
}

TEST(Lindblad, TracePositivityAndHermiticity) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const StateVector psi0 = sb::initial_state(spec);
  const auto r = sb::evolve_lindblad(cw_lab(), sb::build_collapse(spec, {40.0}), psi0 * psi0.adjoint(),
                                     {2.5e-4, 3.0, 80, sb::Frame::lab});
  EXPECT_LT(r.diagnostics.max_trace_drift, 1e-6);
  EXPECT_GE(r.diagnostics.min_eigenvalue, -1e-6);
  for (const auto& rho : r.density) EXPECT_LT(sb::hermiticity_error(rho), 1e-14);
}

TEST(Lindblad, HalvingTheStepChangesLittle) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const StateVector psi0 = sb::initial_state(spec);
  const Operator c = sb::build_collapse(spec, {4.0});
  const auto coarse = sb::evolve_lindblad(cw_lab(), c, psi0 * psi0.adjoint(), {2.5e-4, 1.0, 40, sb::Frame::lab});
  const auto fine = sb::evolve_lindblad(cw_lab(), c, psi0 * psi0.adjoint(), {1.25e-4, 1.0, 80, sb::Frame::lab});
  EXPECT_LT(max_density_deviation(coarse, fine), 1e-5);
}

TEST(Trajectories, NoDecayReproducesTheState) {
  const sb::IntegratorConfig cfg{2.5e-4, 0.5, 100, sb::Frame::lab};
  const StateVector psi0 = sb::initial_state(sb::ChainSpec::qubit_barrier());
  const auto traj = sb::evolve_trajectories(cw_lab(), sb::zeros(6), psi0, cfg, {10, 1, 1});
  const auto pure = sb::evolve_schrodinger(cw_lab(), psi0, cfg);
  EXPECT_EQ(traj.diagnostics.jumps, 0u);
  // Trajectory states are renormalised at every snapshot.
  double worst = 0.0;
  for (std::size_t k = 0; k < pure.size(); ++k) {
    const StateVector psi = pure.states[k].normalized();
    worst = std::max(worst, sb::max_abs(traj.density_at(k) - psi * psi.adjoint()));
  }
  EXPECT_LT(worst, 1e-12);
  for (const auto& e : traj.density_stderr) EXPECT_LT(sb::max_abs(e), 1e-7);
}

TEST(Trajectories, IsolatedDecayFollowsExponential) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  const auto h = sb::driven_hamiltonian(spec, sb::DriveSchedule{}, sb::Frame::rwa);
  const sb::NamedObservable pt{"pT", [](double) { return sb::transition(3, sb::kLevelT, sb::kLevelT); }};
  const auto r = sb::evolve_trajectories(h, sb::build_collapse(spec, {1.0}), sb::basis_state(3, sb::kLevelT),
                                         {0.01, 3.0, 25, sb::Frame::rwa}, {10000, 42, 0},
                                         std::span<const sb::NamedObservable>(&pt, 1));
  const auto& mean = r.observables.at("pT");
  const auto& err = r.observables.at("pT_stderr");
  for (std::size_t k = 1; k < r.size(); ++k) {
    EXPECT_LE(std::abs(mean[k] - std::exp(-r.times[k])), 3.0 * err[k] + 1e-3) << "t = " << r.times[k];
  }
}

TEST(Trajectories, AgreeWithMasterEquation) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const auto h = sb::driven_hamiltonian(spec, sb::DriveSchedule::continuous(40.0), sb::Frame::rwa);
  const Operator c = sb::build_collapse(spec, {40.0});
  const StateVector psi0 = sb::initial_state(spec);
  const sb::IntegratorConfig cfg{1e-3, 2.0, 50, sb::Frame::rwa};
  const std::size_t n = 1000;
  const auto traj = sb::evolve_trajectories(h, c, psi0, cfg, {n, 7, 0});
  const auto me = sb::evolve_lindblad(h, c, psi0 * psi0.adjoint(), cfg);
  EXPECT_LE(max_density_deviation(traj, me), std::max(0.02, 5.0 / std::sqrt(static_cast<double>(n))));
  EXPECT_GT(traj.diagnostics.jumps, 0u);
}

TEST(Trajectories, DeterministicForAnyWorkerCount) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const auto h = sb::driven_hamiltonian(spec, sb::DriveSchedule::continuous(40.0), sb::Frame::rwa);
  const Operator c = sb::build_collapse(spec, {40.0});
  const sb::IntegratorConfig cfg{1e-3, 0.5, 50, sb::Frame::rwa};
  const StateVector psi0 = sb::initial_state(spec);
  const auto a = sb::evolve_trajectories(h, c, psi0, cfg, {300, 99, 1});
  const auto b = sb::evolve_trajectories(h, c, psi0, cfg, {300, 99, 4});
  const auto d = sb::evolve_trajectories(h, c, psi0, cfg, {300, 100, 1});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(a.density[k] == b.density[k]);
    EXPECT_TRUE(a.density_stderr[k] == b.density_stderr[k]);
  }
  EXPECT_EQ(a.diagnostics.jumps, b.diagnostics.jumps);
  EXPECT_GT(max_density_deviation(a, d), 0.0);
}

TEST(Trajectories, RejectsEmptyEnsemble) {
  EXPECT_THROW(sb::evolve_trajectories(cw_lab(), sb::zeros(6), sb::initial_state(sb::ChainSpec::qubit_barrier()),
                                       {2.5e-4, 0.1, 10, sb::Frame::lab}, {0, 1, 1}),
               std::invalid_argument);
}

}  // namespace
