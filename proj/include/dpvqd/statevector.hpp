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

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dpvqd/circuit.hpp"
#include "dpvqd/pauli.hpp"

namespace dpvqd {

using cxd = std::complex<double>;

/// Dense amplitude vector over n qubits, wire 0 least significant.
struct StateVector {
  int n_qubits = 0;
  std::vector<cxd> amps;

  StateVector() = default;
  explicit StateVector(int n) : n_qubits(n), amps(std::size_t{1} << n, cxd{0, 0}) {
    if (n <= 0 || n > 30) throw std::invalid_argument("unsupported register width");
    amps[0] = 1.0;
  }

  static StateVector zero_state(int n) { return StateVector(n); }

  /// |bits> with bits given wire-0 first ("10" means wire 0 in |1>).
  static StateVector basis_state(int n, const std::string &bits) {
    if (static_cast<int>(bits.size()) != n)
      throw std::invalid_argument("basis_state: bitstring length mismatch");
    StateVector s(n);
    std::uint64_t idx = 0;
    for (int w = 0; w < n; ++w) {
      if (bits[w] == '1') idx |= (1ULL << w);
      else if (bits[w] != '0') throw std::invalid_argument("basis_state: bad bit");
    }
    s.amps[0] = 0.0;
    s.amps[idx] = 1.0;
    return s;
  }

  double norm_sq() const {
    double n = 0;
    for (const auto &a : amps) n += std::norm(a);
    return n;
  }
};

inline std::string index_to_bits(std::uint64_t x, int n) {
  std::string s(n, '0');
  for (int w = 0; w < n; ++w)
    if (x & (1ULL << w)) s[w] = '1';
  return s;
}

namespace detail {

inline void apply_1q(std::vector<cxd> &a, int wire, const cxd m00, const cxd m01,
                     const cxd m10, const cxd m11) {
  const std::uint64_t bit = 1ULL << wire;
  const std::uint64_t size = a.size();
  for (std::uint64_t base = 0; base < size; base += 2 * bit) {
    for (std::uint64_t off = 0; off < bit; ++off) {
      const std::uint64_t i0 = base + off;
      const std::uint64_t i1 = i0 | bit;
      const cxd v0 = a[i0], v1 = a[i1];
      a[i0] = m00 * v0 + m01 * v1;
      a[i1] = m10 * v0 + m11 * v1;
    }
  }
}

inline void apply_cnot(std::vector<cxd> &a, int control, int target) {
  const std::uint64_t cbit = 1ULL << control;
  const std::uint64_t tbit = 1ULL << target;
  const std::uint64_t size = a.size();
  for (std::uint64_t i = 0; i < size; ++i)
    if ((i & cbit) && !(i & tbit)) std::swap(a[i], a[i | tbit]);
}

}  // namespace detail

/// Applies one gate in place. Rotations must be bound.
inline void apply_gate(StateVector &s, const Gate &g) {
  if (g.param.is_symbolic())
    throw std::invalid_argument("apply: circuit has unbound symbols");
  auto &a = s.amps;
  switch (g.kind) {
    case GateKind::RX: {
      const double h = 0.5 * g.param.value;
      const cxd c = std::cos(h), ms = cxd{0, -std::sin(h)};
      detail::apply_1q(a, g.wires[0], c, ms, ms, c);
      break;
    }
    case GateKind::RY: {
      const double h = 0.5 * g.param.value;
      const double c = std::cos(h), sn = std::sin(h);
      detail::apply_1q(a, g.wires[0], c, -sn, sn, c);
      break;
    }
    case GateKind::RZ: {
      const double h = 0.5 * g.param.value;
      detail::apply_1q(a, g.wires[0], std::polar(1.0, -h), 0, 0, std::polar(1.0, h));
      break;
    }
    case GateKind::CNOT:
      detail::apply_cnot(a, g.wires[0], g.wires[1]);
      break;
    case GateKind::H: {
      const double r = 1.0 / std::numbers::sqrt2;
      detail::apply_1q(a, g.wires[0], r, r, r, -r);
      break;
    }
    case GateKind::X:
      detail::apply_1q(a, g.wires[0], 0, 1, 1, 0);
      break;
    case GateKind::S:
      detail::apply_1q(a, g.wires[0], 1, 0, 0, cxd{0, 1});
      break;
    case GateKind::Sdg:
      detail::apply_1q(a, g.wires[0], 1, 0, 0, cxd{0, -1});
      break;
  }
}

/// Runs the whole circuit on a copy of the state.
inline StateVector apply(StateVector state, const Circuit &c) {
  if (state.n_qubits != c.n_qubits)
    throw std::invalid_argument("apply: state/circuit width mismatch");
  for (const Gate &g : c.gates) apply_gate(state, g);
  return state;
}

/// Applies a single Pauli operator (used by the stochastic noise channel).
inline void apply_pauli(StateVector &s, int wire, char p) {
  auto &a = s.amps;
  switch (p) {
    case 'X': detail::apply_1q(a, wire, 0, 1, 1, 0); break;
    case 'Y': detail::apply_1q(a, wire, 0, cxd{0, -1}, cxd{0, 1}, 0); break;
    case 'Z': detail::apply_1q(a, wire, 1, 0, 0, -1); break;
    default: throw std::invalid_argument("apply_pauli: bad pauli");
  }
}

/// <state| P |state> for one Pauli string, computed exactly.
inline double expectation(const StateVector &s, const PauliTerm &t) {
  if (t.max_wire() >= s.n_qubits)
    throw std::invalid_argument("expectation: operator exceeds state width");
  const PauliMasks m = pauli_masks(t);
  const auto &a = s.amps;
  // P|x> = i^{y_count} (-1)^{popcount(x & sign_mask)} |x ^ flip_mask>
  cxd acc = 0;
  for (std::uint64_t x = 0; x < a.size(); ++x) {
    const int sign = std::popcount(x & m.sign_mask) & 1 ? -1 : 1;
    acc += std::conj(a[x ^ m.flip_mask]) * (static_cast<double>(sign) * a[x]);
  }
  cxd phase{1, 0};
  switch (m.y_count & 3) {
    case 1: phase = cxd{0, 1}; break;
    case 2: phase = cxd{-1, 0}; break;
    case 3: phase = cxd{0, -1}; break;
    default: break;
  }
  return t.coeff * (phase * acc).real();
}

/// <state| H |state> for a weighted Pauli sum.
inline double expectation(const StateVector &s, const Hamiltonian &h) {
  if (h.n_qubits != s.n_qubits)
    throw std::invalid_argument("expectation: observable/state width mismatch");
  double e = 0;
  for (const auto &t : h.terms) e += expectation(s, t);
  return e;
}

/// |<0...0|state>|^2, the return probability used by the global loss.
inline double all_zeros_probability(const StateVector &s) { return std::norm(s.amps[0]); }

/// Element j is the marginal probability that qubit j reads 0.
inline std::vector<double> local_return_probabilities(const StateVector &s) {
  std::vector<double> p(s.n_qubits, 0.0);
  for (std::uint64_t x = 0; x < s.amps.size(); ++x) {
    const double w = std::norm(s.amps[x]);
    if (w == 0.0) continue;
    for (int q = 0; q < s.n_qubits; ++q)
      if (!(x & (1ULL << q))) p[q] += w;
  }
  return p;
}

}  // namespace dpvqd
