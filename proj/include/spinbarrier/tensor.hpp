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

// Dense complex linear algebra on the small composite Hilbert spaces used by
// the barrier model (at most qubit x barrier x qubit = 2*3*2 = 12 levels).
//
// Conventions:
//   - site 0 is the leftmost (most significant) tensor factor;
//   - qubit sites have basis |0>, |1>; barrier sites have |0>, |1>, |T>;
//   - sigma^{X,Y,Z} are Pauli matrices with eigenvalues +-1.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinbarrier {

using cplx = std::complex<double>;

inline constexpr int kMaxDim = 12;
inline constexpr cplx kI{0.0, 1.0};

/// Dense square matrix on a composite space of dimension <= kMaxDim.
using Operator = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using StateVector = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RealVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

// ---------------------------------------------------------------------------
// Elementary operators and states

inline Operator identity(int dim) { return Operator::Identity(dim, dim); }

inline Operator zeros(int dim) { return Operator::Zero(dim, dim); }

inline Operator pauli_x() {
  Operator m = zeros(2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  return m;
}

inline Operator pauli_y() {
  Operator m = zeros(2);
  m(0, 1) = -kI;
  m(1, 0) = kI;
  return m;
}

inline Operator pauli_z() {
  Operator m = zeros(2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

/// |to><from| on a `dim`-level system.
inline Operator transition(int dim, int to, int from) {
  if (to < 0 || from < 0 || to >= dim || from >= dim) {
    throw std::invalid_argument("transition: level index out of range");
  }
  Operator m = zeros(dim);
  m(to, from) = 1.0;
  return m;
}

inline StateVector basis_state(int dim, int index) {
  if (index < 0 || index >= dim) {
    throw std::invalid_argument("basis_state: index out of range");
  }
  StateVector v = StateVector::Zero(dim);
  v(index) = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Predicates and norms

inline double max_abs(const Operator& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double hermiticity_error(const Operator& m) { return max_abs(m - m.adjoint()); }

inline bool is_hermitian(const Operator& m, double tol = 1e-12) {
  return m.rows() == m.cols() && hermiticity_error(m) < tol;
}

inline double unitarity_error(const Operator& u) {
  return max_abs(u.adjoint() * u - identity(static_cast<int>(u.rows())));
}

// ---------------------------------------------------------------------------
// Layout of the chain

/// Ordered level counts of the sites in the chain (2 = qubit, 3 = barrier).
class SiteLayout {
 public:
  SiteLayout(std::initializer_list<int> dims) : SiteLayout(std::vector<int>(dims)) {}

  explicit SiteLayout(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 3) {
      throw std::invalid_argument("SiteLayout: chain must have 1 to 3 sites");
    }
    for (int d : dims_) {
      if (d != 2 && d != 3) throw std::invalid_argument("SiteLayout: site dimension must be 2 or 3");
    }
    if (dim() > kMaxDim) throw std::invalid_argument("SiteLayout: composite dimension exceeds 12");
  }

  [[nodiscard]] std::size_t sites() const { return dims_.size(); }
  [[nodiscard]] int site_dim(std::size_t site) const { return dims_.at(site); }
  [[nodiscard]] const std::vector<int>& site_dims() const { return dims_; }

  [[nodiscard]] int dim() const {
    return std::accumulate(dims_.begin(), dims_.end(), 1, std::multiplies<>());
  }

  /// Product of the dimensions of the sites to the right of `site`.
  [[nodiscard]] int stride(std::size_t site) const {
    int s = 1;
    for (std::size_t j = site + 1; j < dims_.size(); ++j) s *= dims_[j];
    return s;
  }

  /// Level of `site` in composite basis index `index`.
  [[nodiscard]] int level(int index, std::size_t site) const { return (index / stride(site)) % dims_[site]; }

  bool operator==(const SiteLayout&) const = default;

 private:
  std::vector<int> dims_;
};

// ---------------------------------------------------------------------------
// Tensor products and embeddings

inline Operator kron(const Operator& a, const Operator& b) {
  const auto ra = a.rows();
  const auto rb = b.rows();
  if (ra * rb > kMaxDim) throw std::invalid_argument("kron: result dimension exceeds 12");
  Operator out(ra * rb, ra * rb);
  for (Eigen::Index i = 0; i < ra; ++i) {
    for (Eigen::Index j = 0; j < ra; ++j) {
      out.block(i * rb, j * rb, rb, rb) = a(i, j) * b;
    }
  }
  return out;
}

inline StateVector kron(const StateVector& a, const StateVector& b) {
  const auto na = a.size();
  const auto nb = b.size();
  if (na * nb > kMaxDim) throw std::invalid_argument("kron: result dimension exceeds 12");
  StateVector out(na * nb);
  for (Eigen::Index i = 0; i < na; ++i) out.segment(i * nb, nb) = a(i) * b;
  return out;
}

inline StateVector product_state(std::span<const StateVector> factors) {
  if (factors.empty()) throw std::invalid_argument("product_state: no factors");
  StateVector out = factors.front();
  for (std::size_t j = 1; j < factors.size(); ++j) out = kron(out, factors[j]);
  return out;
}

/// Lift a 2x2 spin operator onto a 3-level barrier: acts on the {|0>,|1>}
/// block, every |T> row and column is zero.
inline Operator lift_to_site(const Operator& op, int site_dim) {
  if (op.rows() != op.cols()) throw std::invalid_argument("embed: operator is not square");
  if (op.rows() == site_dim) return op;
  if (op.rows() == 2 && site_dim == 3) {
    Operator out = zeros(3);
    out.topLeftCorner(2, 2) = op;
    return out;
  }
  throw std::invalid_argument("embed: operator dimension " + std::to_string(op.rows()) +
                              " does not fit a site of dimension " + std::to_string(site_dim));
}

/// Composite operator acting as `op` on `site` and as identity elsewhere.
inline Operator embed(const Operator& op, std::size_t site, const SiteLayout& layout) {
  if (site >= layout.sites()) throw std::invalid_argument("embed: site index out of range");
  Operator out = identity(1);
  for (std::size_t j = 0; j < layout.sites(); ++j) {
    const Operator factor = j == site ? lift_to_site(op, layout.site_dim(j)) : identity(layout.site_dim(j));
    out = kron(out, factor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partial trace

/// Reduced operator of `keep_site`, tracing out every other site.
inline Operator partial_trace(const Operator& rho, std::size_t keep_site, const SiteLayout& layout) {
  if (keep_site >= layout.sites()) throw std::invalid_argument("partial_trace: site index out of range");
  if (rho.rows() != layout.dim() || rho.cols() != layout.dim()) {
    throw std::invalid_argument("partial_trace: matrix dimension does not match layout");
  }
  const int d = layout.site_dim(keep_site);
  const int inner = layout.stride(keep_site);
  const int outer = layout.dim() / (inner * d);
  Operator out = zeros(d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      cplx acc = 0.0;
      for (int o = 0; o < outer; ++o) {
        for (int i = 0; i < inner; ++i) {
          acc += rho((o * d + a) * inner + i, (o * d + b) * inner + i);
        }
      }
      out(a, b) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix exponential

/// Propagator exp(-i h t) for Hermitian h, through the eigendecomposition.
inline Operator matrix_exp(const Operator& h, double t) {
  if (h.rows() != h.cols()) throw std::invalid_argument("matrix_exp: operator is not square");
  const double scale = std::max(1.0, max_abs(h));
  if (hermiticity_error(h) > 1e-12 * scale) {
    throw std::invalid_argument("matrix_exp: operator is not Hermitian");
  }
  const Operator hs = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> eig(hs);
  const Operator& v = eig.eigenvectors();
  StateVector phases(hs.rows());
  for (Eigen::Index k = 0; k < hs.rows(); ++k) phases(k) = std::exp(-kI * eig.eigenvalues()(k) * t);
  return v * phases.asDiagonal() * v.adjoint();
}

// ---------------------------------------------------------------------------
// Density matrices

inline double min_eigenvalue(const Operator& rho) {
  Eigen::SelfAdjointEigenSolver<Operator> eig(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Validated density matrix: Hermitian to 1e-10, unit trace to 1e-8 and
/// minimum eigenvalue >= -1e-8.
class DensityMatrix {
 public:
  explicit DensityMatrix(Operator m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) throw std::invalid_argument("DensityMatrix: not square");
    if (hermiticity_error(m_) > 1e-10) throw std::invalid_argument("DensityMatrix: not Hermitian");
    if (std::abs(m_.trace() - 1.0) > 1e-8) throw std::invalid_argument("DensityMatrix: trace is not 1");
    if (min_eigenvalue(m_) < -1e-8) throw std::invalid_argument("DensityMatrix: negative eigenvalue");
  }

  static DensityMatrix pure(const StateVector& psi) {
    const double n = psi.squaredNorm();
    if (std::abs(n - 1.0) > 1e-9) throw std::invalid_argument("DensityMatrix::pure: state is not normalized");
    return DensityMatrix(psi * psi.adjoint());
  }

  [[nodiscard]] const Operator& matrix() const { return m_; }
  [[nodiscard]] int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Operator m_;
};

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::size_t keep_site, const SiteLayout& layout) {
  return DensityMatrix(partial_trace(rho.matrix(), keep_site, layout));
}

/// <phi| rho |phi>, real part.
inline double expectation(const Operator& rho, const StateVector& phi) {
  return (phi.adjoint() * rho * phi)(0, 0).real();
}

}  // namespace spinbarrier
