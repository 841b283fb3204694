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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpvqd {

/// One weighted Pauli string: coeff * prod_j P_j with P in {X, Y, Z} on the
/// listed wires and identity elsewhere. Wires are kept sorted and unique.
struct PauliTerm {
  double coeff = 1.0;
  std::vector<std::pair<int, char>> ops;  // (wire, 'X'|'Y'|'Z'), sorted by wire

  PauliTerm() = default;
  PauliTerm(double c, std::vector<std::pair<int, char>> o) : coeff(c), ops(std::move(o)) {
    normalize();
  }

  void normalize() {
    std::sort(ops.begin(), ops.end());
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const char p = ops[i].second;
      if (p != 'X' && p != 'Y' && p != 'Z')
        throw std::invalid_argument("pauli must be one of X, Y, Z");
      if (i > 0 && ops[i].first == ops[i - 1].first)
        throw std::invalid_argument("duplicate wire in pauli string");
    }
  }

  int max_wire() const { return ops.empty() ? -1 : ops.back().first; }

  std::string to_string() const {
    std::string s;
    for (const auto &[w, p] : ops) {
      if (!s.empty()) s += ' ';
      s += p;
      s += std::to_string(w);
    }
    return s.empty() ? "I" : s;
  }
};

/// Weighted sum of Pauli strings on a fixed register width.
struct Hamiltonian {
  int n_qubits = 0;
  std::vector<PauliTerm> terms;

  Hamiltonian() = default;
  explicit Hamiltonian(int n) : n_qubits(n) {}

  Hamiltonian &add(double coeff, std::vector<std::pair<int, char>> ops) {
    PauliTerm t(coeff, std::move(ops));
    if (t.max_wire() >= n_qubits)
      throw std::invalid_argument("pauli term exceeds register width");
    if (!std::isfinite(coeff) || coeff == 0.0)
      throw std::invalid_argument("pauli coefficient must be finite and nonzero");
    terms.push_back(std::move(t));
    return *this;
  }

  /// Sum of |coeff|; an upper bound on the operator norm.
  double one_norm() const {
    double s = 0;
    for (const auto &t : terms) s += std::abs(t.coeff);
    return s;
  }
};

// Bitmask form of a Pauli string, pre-chewed for statevector kernels:
// P |x> = phase * i^{#Y} * (-1)^{popcount(x & sign_mask)} |x ^ flip_mask>.
struct PauliMasks {
  std::uint64_t flip_mask = 0;  // X and Y positions
  std::uint64_t sign_mask = 0;  // Y and Z positions
  int y_count = 0;
};

inline PauliMasks pauli_masks(const PauliTerm &t) {
  PauliMasks m;
  for (const auto &[w, p] : t.ops) {
    const std::uint64_t bit = 1ULL << w;
    if (p == 'X') {
      m.flip_mask |= bit;
    } else if (p == 'Y') {
      m.flip_mask |= bit;
      m.sign_mask |= bit;
      ++m.y_count;
    } else {
      m.sign_mask |= bit;
    }
  }
  return m;
}

}  // namespace dpvqd
