// Copyright 2026 The dpvqd developers
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

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dpvqd/pauli.hpp"
#include "dpvqd/statevector.hpp"

namespace dpvqd {

namespace detail {

// y += coeff * P x for one Pauli string, using the mask kernel.
inline void add_pauli_apply(const PauliTerm &t, const std::vector<cxd> &x,
                            std::vector<cxd> &y) {
  const PauliMasks m = pauli_masks(t);
  cxd phase{1, 0};
  switch (m.y_count & 3) {
    case 1: phase = cxd{0, 1}; break;
    case 2: phase = cxd{-1, 0}; break;
    case 3: phase = cxd{0, -1}; break;
    default: break;
  }
  const cxd c = t.coeff * phase;
  for (std::uint64_t i = 0; i < x.size(); ++i) {
    const std::uint64_t src = i ^ m.flip_mask;
    const double sign = std::popcount(src & m.sign_mask) & 1 ? -1.0 : 1.0;
    y[i] += c * sign * x[src];
  }
}

}  // namespace detail

/// y = H x as a sparse Pauli-sum action.
inline std::vector<cxd> apply_hamiltonian(const Hamiltonian &h, const std::vector<cxd> &x) {
  std::vector<cxd> y(x.size(), cxd{0, 0});
  for (const auto &t : h.terms) detail::add_pauli_apply(t, x, y);
  return y;
}

/// Dense matrix of the Pauli sum (small widths only; test oracle and the
/// eager evolution path).
inline Eigen::MatrixXcd hamiltonian_matrix(const Hamiltonian &h) {
  if (h.n_qubits > 12) throw std::invalid_argument("hamiltonian_matrix: too wide");
  const std::size_t dim = std::size_t{1} << h.n_qubits;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  std::vector<cxd> e(dim, cxd{0, 0});
  for (std::size_t col = 0; col < dim; ++col) {
    std::fill(e.begin(), e.end(), cxd{0, 0});
    e[col] = 1.0;
    const auto y = apply_hamiltonian(h, e);
    for (std::size_t row = 0; row < dim; ++row) m(row, col) = y[row];
  }
  return m;
}

/// Exact propagator psi(t) = exp(-i t H) psi0. Widths up to 10 qubits use a
/// cached dense eigendecomposition; wider registers (up to 14) fall back to a
/// Lanczos expm-action with full reorthogonalization and sub-stepping.
class ExactEvolver {
 public:
  explicit ExactEvolver(Hamiltonian h) : ham_(std::move(h)) {
    if (ham_.n_qubits > 14)
      throw std::invalid_argument("exact evolution supported up to 14 qubits");
    if (ham_.n_qubits <= 10) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hamiltonian_matrix(ham_));
      eigvals_ = es.eigenvalues();
      eigvecs_ = es.eigenvectors();
      dense_ = true;
    }
  }

  StateVector evolve(const StateVector &psi0, double t) const {
    if (psi0.n_qubits != ham_.n_qubits)
      throw std::invalid_argument("exact_evolve: state/hamiltonian width mismatch");
    if (t == 0.0) return psi0;
    return dense_ ? evolve_dense(psi0, t) : evolve_lanczos(psi0, t);
  }

  const Hamiltonian &hamiltonian() const { return ham_; }

 private:
  StateVector evolve_dense(const StateVector &psi0, double t) const {
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(psi0.amps.data(),
                                                            psi0.amps.size());
    Eigen::VectorXcd w = eigvecs_.adjoint() * v;
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) *= std::polar(1.0, -t * eigvals_(i));
    v = eigvecs_ * w;
    StateVector out(psi0.n_qubits);
    for (std::size_t i = 0; i < out.amps.size(); ++i) out.amps[i] = v(i);
    return out;
  }

  StateVector evolve_lanczos(const StateVector &psi0, double t) const {
    // Sub-step so each Krylov space comfortably resolves exp(-i dt H).
    const double hnorm = std::max(ham_.one_norm(), 1e-12);
    const int n_sub = std::max(1, static_cast<int>(std::ceil(std::abs(t) * hnorm / 8.0)));
    const double dt = t / n_sub;
    StateVector cur = psi0;
    for (int s = 0; s < n_sub; ++s) cur = lanczos_step(cur, dt);
    return cur;
  }

  StateVector lanczos_step(const StateVector &psi, double dt) const {
    const int max_m = 90;
    const std::size_t dim = psi.amps.size();
    std::vector<std::vector<cxd>> basis;
    std::vector<double> alpha, beta;

    std::vector<cxd> v = psi.amps;
    const double nrm0 = std::sqrt(psi.norm_sq());
    for (auto &a : v) a /= nrm0;
    basis.push_back(v);

    int m = 0;
    for (; m < max_m; ++m) {
      std::vector<cxd> w = apply_hamiltonian(ham_, basis[m]);
      cxd a{0, 0};
      for (std::size_t i = 0; i < dim; ++i) a += std::conj(basis[m][i]) * w[i];
      alpha.push_back(a.real());
      for (std::size_t i = 0; i < dim; ++i) w[i] -= a.real() * basis[m][i];
      if (m > 0)
        for (std::size_t i = 0; i < dim; ++i) w[i] -= beta[m - 1] * basis[m - 1][i];
      // Full reorthogonalization keeps the basis numerically orthonormal.
      for (const auto &b : basis) {
        cxd ov{0, 0};
        for (std::size_t i = 0; i < dim; ++i) ov += std::conj(b[i]) * w[i];
        for (std::size_t i = 0; i < dim; ++i) w[i] -= ov * b[i];
      }
      double nb = 0;
      for (const auto &x : w) nb += std::norm(x);
      nb = std::sqrt(nb);
      if (nb < 1e-14) {
        ++m;
        break;  // invariant subspace reached
      }
      beta.push_back(nb);
      for (auto &x : w) x /= nb;
      basis.push_back(std::move(w));
    }

    Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      tmat(i, i) = alpha[i];
      if (i + 1 < m) tmat(i, i + 1) = tmat(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tmat);
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(m);
    e1(0) = 1.0;
    Eigen::VectorXcd y = es.eigenvectors().cast<cxd>().adjoint() * e1;
    for (int i = 0; i < m; ++i) y(i) *= std::polar(1.0, -dt * es.eigenvalues()(i));
    y = es.eigenvectors().cast<cxd>() * y;

    StateVector out(psi.n_qubits);
    std::fill(out.amps.begin(), out.amps.end(), cxd{0, 0});
    for (int k = 0; k < m; ++k)
      for (std::size_t i = 0; i < dim; ++i) out.amps[i] += nrm0 * y(k) * basis[k][i];
    return out;
  }

  Hamiltonian ham_;
  bool dense_ = false;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXcd eigvecs_;
};

/// One-shot form of the evolver.
inline StateVector exact_evolve(const Hamiltonian &h, const StateVector &psi0, double t) {
  return ExactEvolver(h).evolve(psi0, t);
}

}  // namespace dpvqd
