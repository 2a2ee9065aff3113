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

#include <spinbarrier/tensor.hpp>

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"

namespace sb = spinbarrier;
using sb::cplx;
using sb::Operator;
using sb::StateVector;

namespace {

Operator to_op(const oracle::Dense& d) { return Operator(d); }

Operator random_op(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Operator a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
  return a;
}

TEST(Kron, IdentityTimesIdentity) { EXPECT_LT(sb::max_abs(sb::kron(sb::identity(2), sb::identity(2)) - sb::identity(4)), 1e-15); }

TEST(Kron, SigmaZOnLeftSite) {
  Operator expected = sb::zeros(4);
  expected.diagonal() << 1.0, 1.0, -1.0, -1.0;
  EXPECT_LT(sb::max_abs(sb::kron(sb::pauli_z(), sb::identity(2)) - expected), 1e-15);
}

TEST(Kron, DoubleBitFlip) {
  const StateVector s00 = sb::kron(sb::basis_state(2, 0), sb::basis_state(2, 0));
  const StateVector out = sb::kron(sb::pauli_x(), sb::pauli_x()) * s00;
  EXPECT_LT((out - sb::kron(sb::basis_state(2, 1), sb::basis_state(2, 1))).norm(), 1e-15);
}

TEST(Kron, MatchesLoopOracleAndIsAssociative) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Operator a = random_op(2, rng);
    const Operator b = random_op(3, rng);
    const Operator c = random_op(2, rng);
    EXPECT_LT(sb::max_abs(sb::kron(a, b) - to_op(oracle::kron(a, b))), 1e-14);
    EXPECT_LT(sb::max_abs(sb::kron(sb::kron(a, b), c) - sb::kron(a, sb::kron(b, c))), 1e-14);
  }
}

TEST(Embed, QubitOperatorOnTwoQubitChain) {
  const sb::SiteLayout layout{2, 2};
  EXPECT_LT(sb::max_abs(sb::embed(sb::pauli_z(), 0, layout) - sb::kron(sb::pauli_z(), sb::identity(2))), 1e-15);
}

TEST(Embed, SpinOperatorAnnihilatesShelvedLevel) {
  const sb::SiteLayout layout{3};
  const StateVector out = sb::embed(sb::pauli_x(), 0, layout) * sb::basis_state(3, 2);
  EXPECT_LT(out.norm(), 1e-15);
}

TEST(Embed, ShelvingTransitionOnSecondSite) {
  const sb::SiteLayout layout{2, 3};
  const StateVector s = sb::kron(sb::basis_state(2, 0), sb::basis_state(3, 0));
  const StateVector out = sb::embed(sb::transition(3, 2, 0), 1, layout) * s;
  EXPECT_LT((out - sb::kron(sb::basis_state(2, 0), sb::basis_state(3, 2))).norm(), 1e-15);
}

TEST(Embed, IdentityOnBarrierKeepsShelvedLevel) {
  const sb::SiteLayout layout{2, 3};
  const Operator zq = sb::embed(sb::pauli_z(), 0, layout);
  const StateVector s = sb::kron(sb::basis_state(2, 0), sb::basis_state(3, 2));
  EXPECT_LT((zq * s - s).norm(), 1e-15);
}

TEST(Embed, DimensionMismatchIsRejected) {
  const sb::SiteLayout layout{2, 3};
  EXPECT_THROW(sb::embed(sb::identity(3), 0, layout), std::invalid_argument);
  EXPECT_THROW(sb::embed(sb::pauli_x(), 2, layout), std::invalid_argument);
}

TEST(Embed, DisjointSitesCommute) {
  std::mt19937_64 rng(5);
  const sb::SiteLayout layout{2, 3, 2};
  for (int trial = 0; trial < 10; ++trial) {
    const Operator a = sb::embed(random_op(2, rng), 0, layout);
    const Operator b = sb::embed(random_op(3, rng), 1, layout);
    const Operator c = sb::embed(random_op(2, rng), 2, layout);
    EXPECT_LT(sb::max_abs(a * b - b * a), 1e-13);
    EXPECT_LT(sb::max_abs(a * c - c * a), 1e-13);
    EXPECT_LT(sb::max_abs(b * c - c * b), 1e-13);
  }
}

TEST(SiteLayout, RejectsBadShapes) {
  EXPECT_THROW(sb::SiteLayout({}), std::invalid_argument);
  EXPECT_THROW(sb::SiteLayout({2, 2, 2, 2}), std::invalid_argument);
  EXPECT_THROW(sb::SiteLayout({4}), std::invalid_argument);
  EXPECT_EQ((sb::SiteLayout{2, 3, 2}).dim(), 12);
}

TEST(PartialTrace, ProductStateKeepsQubitFactor) {
  const sb::SiteLayout layout{2, 2};
  const StateVector s10 = sb::kron(sb::basis_state(2, 1), sb::basis_state(2, 0));
  const Operator red = sb::partial_trace(Operator(s10 * s10.adjoint()), 1, layout);
  EXPECT_LT(sb::max_abs(red - sb::transition(2, 0, 0)), 1e-15);
}

TEST(PartialTrace, EntangledPairGivesMaximallyMixedQubit) {
  const sb::SiteLayout layout{2, 2};
  StateVector bell = sb::kron(sb::basis_state(2, 0), sb::basis_state(2, 1)) +
                     sb::kron(sb::basis_state(2, 1), sb::basis_state(2, 0));
  bell /= std::numbers::sqrt2;
  const Operator red = sb::partial_trace(Operator(bell * bell.adjoint()), 0, layout);
  EXPECT_LT(sb::max_abs(red - 0.5 * sb::identity(2)), 1e-15);
}

TEST(PartialTrace, MatchesIndexSummationOracle) {
  std::mt19937_64 rng(2024);
  const sb::SiteLayout layout{2, 3, 2};
  for (int trial = 0; trial < 5; ++trial) {
    const oracle::Dense rho = oracle::random_density(12, rng);
    for (std::size_t site = 0; site < 3; ++site) {
      const Operator got = sb::partial_trace(Operator(rho), site, layout);
      const oracle::Dense want = oracle::partial_trace(rho, {2, 3, 2}, site);
      EXPECT_LT(sb::max_abs(got - to_op(want)), 1e-12);
      EXPECT_NEAR(got.trace().real(), rho.trace().real(), 1e-10);
    }
  }
}

TEST(PartialTrace, InvalidSiteIsRejected) {
  const sb::SiteLayout layout{2, 3};
  EXPECT_THROW(sb::partial_trace(Operator(sb::identity(6) / 6.0), 2, layout), std::invalid_argument);
  EXPECT_THROW(sb::partial_trace(Operator(sb::identity(4) / 4.0), 0, layout), std::invalid_argument);
}

TEST(MatrixExp, SigmaZHalfTurn) {
  EXPECT_LT(sb::max_abs(sb::matrix_exp(sb::pauli_z(), std::numbers::pi) + sb::identity(2)), 1e-12);
}

TEST(MatrixExp, ZeroTimeIsIdentity) {
  std::mt19937_64 rng(3);
  const Operator h(oracle::random_hermitian(6, rng));
  EXPECT_LT(sb::max_abs(sb::matrix_exp(h, 0.0) - sb::identity(6)), 1e-12);
}

TEST(MatrixExp, PauliRotation) {
  EXPECT_LT(sb::max_abs(sb::matrix_exp(sb::pauli_x(), std::numbers::pi / 2) + sb::kI * sb::pauli_x()), 1e-12);
}

TEST(MatrixExp, RejectsNonHermitian) {
  EXPECT_THROW(sb::matrix_exp(sb::transition(2, 0, 1), 1.0), std::invalid_argument);
}

TEST(MatrixExp, UnitaryGroupLawAndPadeOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Operator h(oracle::random_hermitian(12, rng));
    const double s = u(rng);
    const double t = u(rng);
    const Operator us = sb::matrix_exp(h, s);
    EXPECT_LT(sb::unitarity_error(us), 1e-10);
    EXPECT_LT(sb::max_abs(us * sb::matrix_exp(h, t) - sb::matrix_exp(h, s + t)), 1e-10);
    EXPECT_LT(sb::max_abs(us - to_op(oracle::expm(h, s))), 1e-10);
  }
}

TEST(DensityMatrix, ValidatesItsInvariants) {
  EXPECT_NO_THROW(sb::DensityMatrix(0.5 * sb::identity(2)));
  EXPECT_THROW(sb::DensityMatrix(sb::identity(2)), std::invalid_argument);
  EXPECT_THROW(sb::DensityMatrix(Operator(sb::transition(2, 0, 1) + 0.5 * sb::identity(2))), std::invalid_argument);
  Operator neg = sb::zeros(2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(sb::DensityMatrix{neg}, std::invalid_argument);
}

TEST(DensityMatrix, ReducedStatesOfRandomStatesAreValid) {
  std::mt19937_64 rng(99);
  const sb::SiteLayout layout{2, 3, 2};
  for (int trial = 0; trial < 10; ++trial) {
    const auto rho = sb::DensityMatrix::pure(StateVector(oracle::random_state(12, rng)));
    for (std::size_t site = 0; site < 3; ++site) {
      const auto red = sb::partial_trace(rho, site, layout);
      EXPECT_NEAR(red.matrix().trace().real(), 1.0, 1e-10);
      EXPECT_GE(sb::min_eigenvalue(red.matrix()), -1e-12);
    }
  }
}

}  // namespace
