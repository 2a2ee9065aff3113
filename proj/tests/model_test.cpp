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

#include <spinbarrier/model.hpp>
#include <spinbarrier/solvers.hpp>

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace sb = spinbarrier;
using sb::Operator;
using sb::StateVector;

namespace {

constexpr double kPi = std::numbers::pi;

sb::ChainSpec two_qubits(double e, double j_xy, double j_z) { return {sb::SiteLayout{2, 2}, {e, e}, j_xy, j_z, 1000.0}; }

int index2(int a, int b) { return a * 2 + b; }

TEST(StaticHamiltonian, SwapBlockOfTwoQubits) {
  const Operator h = sb::build_static_hamiltonian(two_qubits(0.0, 1.0, 0.0));
  EXPECT_NEAR(std::abs(h(index2(0, 1), index2(1, 0)) - 2.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(h(index2(0, 0), index2(0, 0))), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(h(index2(1, 1), index2(0, 0))), 0.0, 1e-15);
}

TEST(StaticHamiltonian, SingleQubitZeeman) {
  const sb::ChainSpec spec{sb::SiteLayout{2}, {50.0}, 1.0, 0.0, 1000.0};
  const Operator h = sb::build_static_hamiltonian(spec);
  EXPECT_LT(sb::max_abs(h - 50.0 * sb::pauli_z()), 1e-15);
  EXPECT_NEAR(h(0, 0).real() - h(1, 1).real(), 100.0, 1e-12);
}

TEST(StaticHamiltonian, ShelvedBarrierDecouplesInHeisenbergLimit) {
  sb::ChainSpec spec = sb::ChainSpec::qubit_barrier_qubit(0.0, 1000.0, 1.0, 1.0);
  const Operator h = sb::build_static_hamiltonian(spec);
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const StateVector s = sb::product_state(std::vector<StateVector>{
          sb::basis_state(2, x), sb::basis_state(3, sb::kLevelT), sb::basis_state(2, y)});
      const double energy = (s.adjoint() * h * s)(0, 0).real();
      EXPECT_NEAR(energy - 1000.0, 0.0, 1e-12);  // only the |T> level energy survives
      // and nothing couples out of the shelved sector
      const StateVector hs = h * s;
      EXPECT_NEAR((hs - energy * s).norm(), 0.0, 1e-12);
    }
  }
}

TEST(StaticHamiltonian, TransitionEnergyOfShelvedLevel) {
  const auto spec = sb::ChainSpec::isolated_barrier(100.0, 1000.0);
  const Operator h = sb::build_static_hamiltonian(spec);
  EXPECT_NEAR(h(sb::kLevelT, sb::kLevelT).real() - h(sb::kLevel0, sb::kLevel0).real(), 1000.0, 1e-12);
  EXPECT_NEAR(h(sb::kLevel1, sb::kLevel1).real() - h(sb::kLevel0, sb::kLevel0).real(), 100.0, 1e-12);
}

TEST(StaticHamiltonian, HermitianForRandomSpecs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-60.0, 60.0);
  std::uniform_real_distribution<double> j(0.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    sb::ChainSpec spec = trial % 2 ? sb::ChainSpec::qubit_barrier() : sb::ChainSpec::qubit_barrier_qubit();
    for (auto& e : spec.zeeman) e = u(rng);
    spec.j_xy = j(rng);
    spec.j_z = j(rng);
    EXPECT_LT(sb::hermiticity_error(sb::build_static_hamiltonian(spec)), 1e-12);
  }
}

TEST(StaticHamiltonian, XYCouplingConservesExcitations) {
  for (auto spec : {sb::ChainSpec::qubit_barrier(0.0), sb::ChainSpec::qubit_barrier_qubit(0.0), two_qubits(0.0, 1.3, 0.0)}) {
    const Operator h = sb::build_static_hamiltonian(spec);
    Operator total = sb::zeros(spec.layout.dim());
    for (std::size_t j = 0; j < spec.layout.sites(); ++j) total += sb::embed(sb::pauli_z(), j, spec.layout);
    EXPECT_LT(sb::max_abs(h * total - total * h), 1e-12);
  }
}

TEST(ChainSpec, Validation) {
  sb::ChainSpec bad = sb::ChainSpec::qubit_barrier();
  bad.omega_0T = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = sb::ChainSpec::qubit_barrier();
  bad.zeeman = {1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = sb::ChainSpec{sb::SiteLayout{3, 2, 2}, {0.0, 0.0, 0.0}, 1.0, 0.0, 1000.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = sb::ChainSpec{sb::SiteLayout{3, 3}, {0.0, 0.0}, 1.0, 0.0, 1000.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_EQ(sb::ChainSpec::qubit_barrier().level_splitting(1), 100.0);
}

TEST(Drive, OffIsZero) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  for (double t : {0.0, 0.3, 7.1}) EXPECT_EQ(sb::max_abs(sb::build_drive(spec, sb::DriveSchedule{}, t)), 0.0);
}

TEST(Drive, ContinuousAtTimeZero) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const Operator d = sb::build_drive(spec, sb::DriveSchedule::continuous(40.0), 0.0);
  const Operator expected =
      40.0 * sb::embed(sb::transition(3, sb::kLevelT, sb::kLevel0) + sb::transition(3, sb::kLevel0, sb::kLevelT), 0,
                       spec.layout);
  EXPECT_LT(sb::max_abs(d - expected), 1e-13);
}

TEST(Drive, PulseEnvelopeIsAreaOverDuration) {
  const auto sched = sb::DriveSchedule::pulsed(2.0 * kPi, 0.1, 1.0);
  EXPECT_NEAR(sched.envelope(0.05), 20.0 * kPi, 1e-12);
  EXPECT_EQ(sched.envelope(0.5), 0.0);
  EXPECT_NEAR(sched.envelope(1.05), 20.0 * kPi, 1e-12);
}

TEST(Drive, GateWindowsSilenceTheLaser) {
  auto sched = sb::DriveSchedule::continuous(40.0);
  sched.gate_windows = {{1.0, 2.0}};
  EXPECT_EQ(sched.envelope(1.5), 0.0);
  EXPECT_EQ(sched.envelope(2.0), 40.0);
  sched.gate_windows = {{1.0, 2.0}, {1.5, 3.0}};
  EXPECT_THROW(sched.validate(), std::invalid_argument);
}

TEST(Drive, PulsedInvariants) {
  EXPECT_THROW(sb::DriveSchedule::pulsed(kPi, 0.2, 0.1).validate(), std::invalid_argument);
  auto s = sb::DriveSchedule::pulsed(kPi, 0.1, 0.5);
  s.rabi = 3.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Drive, HermitianAndConfinedToShelvingTransition) {
  const auto spec = sb::ChainSpec::qubit_barrier();
  const auto sched = sb::DriveSchedule::continuous(40.0);
  const Operator block_projector = sb::embed(
      sb::transition(3, sb::kLevel0, sb::kLevel0) + sb::transition(3, sb::kLevelT, sb::kLevelT), 0, spec.layout);
  for (double t : {0.0, 0.0013, 0.77, 3.3}) {
    const Operator d = sb::build_drive(spec, sched, t);
    EXPECT_LT(sb::hermiticity_error(d), 1e-15);
    EXPECT_LT(sb::max_abs(block_projector * d * block_projector - d), 1e-15);
  }
}

TEST(RwaDrive, HalfRabiCoupling) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  const Operator d = sb::build_rwa_drive(spec, sb::DriveSchedule::continuous(40.0), 0.3);
  EXPECT_NEAR(d(sb::kLevelT, sb::kLevel0).real(), 20.0, 1e-15);
  EXPECT_NEAR(d(sb::kLevel0, sb::kLevelT).real(), 20.0, 1e-15);
  EXPECT_EQ(sb::max_abs(sb::build_rwa_drive(spec, sb::DriveSchedule{}, 0.3)), 0.0);
}

TEST(RwaDrive, PiPulseArea) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  const auto sched = sb::DriveSchedule::pulsed(kPi, 0.1, 1.0);
  const int n = 100000;
  double integral = 0.0;
  for (int k = 0; k < n; ++k) {
    integral += sb::build_rwa_drive(spec, sched, (k + 0.5) * 0.2 / n)(sb::kLevelT, sb::kLevel0).real() * 0.2 / n;
  }
  EXPECT_NEAR(2.0 * integral, kPi, 1e-9);
}

TEST(RwaDrive, DetunedCarrierIsRejected) {
  auto sched = sb::DriveSchedule::continuous(40.0);
  sched.carrier = 990.0;
  EXPECT_THROW(sb::build_rwa_drive(sb::ChainSpec::isolated_barrier(), sched, 0.0), std::invalid_argument);
  EXPECT_NO_THROW(sb::build_drive(sb::ChainSpec::isolated_barrier(), sched, 0.0));
}

TEST(Collapse, Examples) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  EXPECT_EQ(sb::max_abs(sb::build_collapse(spec, {0.0})), 0.0);
  const Operator c = sb::build_collapse(spec, {4.0});
  EXPECT_NEAR(c(sb::kLevel0, sb::kLevelT).real(), 2.0, 1e-15);
  const Operator cdc = c.adjoint() * c;
  EXPECT_LT(sb::max_abs(cdc - 4.0 * sb::transition(3, sb::kLevelT, sb::kLevelT)), 1e-14);
  EXPECT_THROW(sb::build_collapse(spec, {-1.0}), std::invalid_argument);
}

TEST(Frames, LabAndRotatingRabiOscillationsAgree) {
  const auto spec = sb::ChainSpec::isolated_barrier();
  const auto sched = sb::DriveSchedule::continuous(40.0);
  sb::IntegratorConfig lab{2.5e-4, 0.5, 20, sb::Frame::lab};
  sb::IntegratorConfig rwa{2.5e-4, 0.5, 20, sb::Frame::rwa};
  const StateVector psi0 = sb::basis_state(3, sb::kLevel0);
  const auto a = sb::evolve_schrodinger(sb::driven_hamiltonian(spec, sched, sb::Frame::lab), psi0, lab);
  const auto b = sb::evolve_schrodinger(sb::driven_hamiltonian(spec, sched, sb::Frame::rwa), psi0, rwa);
  ASSERT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(std::norm(a.states[k](sb::kLevelT)) - std::norm(b.states[k](sb::kLevelT))));
  }
  EXPECT_LE(worst, 2.0 * 40.0 / 1000.0);
}

TEST(DriveAverages, ContinuousAndPulsed) {
  const auto [a, i] = sb::DriveSchedule::continuous(40.0).average_amplitude_and_intensity(10.0);
  EXPECT_NEAR(a, 40.0, 1e-12);
  EXPECT_NEAR(i, 1600.0, 1e-9);
  const auto [pa, pi] = sb::DriveSchedule::pulsed(2.0 * kPi, 0.1, kPi / 10.0).average_amplitude_and_intensity(10.0 * kPi);
  EXPECT_NEAR(pa, 20.0, 1e-9);
  EXPECT_NEAR(pi, 400.0 * kPi, 1e-6);
}

}  // namespace
