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

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpvqd/circuit.hpp"
#include "dpvqd/pauli.hpp"
#include "dpvqd/rng.hpp"

namespace dpvqd {

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

/// Disordered Heisenberg chain
///   H = J sum_i S_i.S_{i+1} + w sum_i (h_{i,x} X_i + h_{i,z} Z_i)
/// with open boundaries; the random fields h are i.i.d. uniform on [-1, 1],
/// reproducible from field_seed.
struct HeisenbergParams {
  int n = 7;
  double J = 1.0;
  double w = 10.0;
  std::uint64_t field_seed = 1;

  std::vector<double> h_x, h_z;  // filled by resolve_fields()

  void resolve_fields() {
    Rng rng(derive_seed(field_seed, {0xf1e1d5}));
    h_x.resize(n);
    h_z.resize(n);
    for (int i = 0; i < n; ++i) h_x[i] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < n; ++i) h_z[i] = rng.uniform(-1.0, 1.0);
  }
};

enum class Spin { Up, Down };

/// Fermi-Hubbard chain with per-bond, per-spin hopping and on-site repulsion,
/// plus one "weak link": a bond whose hopping vanishes for one spin species.
/// Sites are mapped to qubits Jordan-Wigner style in interleaved order (two
/// qubits per site), giving three-qubit XZX/YZY hopping generators.
struct HubbardParams {
  int n_sites = 6;
  double hopping = 1.0;
  double U = 5.0;
  int weak_link_bond = 3;  // bond between sites 3 and 4, counting from 1
  Spin weak_link_spin = Spin::Down;

  int n_qubits() const { return 2 * n_sites; }

  bool is_default() const {
    return n_sites == 6 && hopping == 1.0 && U == 5.0 && weak_link_bond == 3 &&
           weak_link_spin == Spin::Down;
  }

  void validate() const {
    if (n_sites < 2) throw std::invalid_argument("hubbard: need at least 2 sites");
    if (weak_link_bond < 1 || weak_link_bond >= n_sites)
      throw std::invalid_argument("hubbard: weak link bond out of range");
  }

  /// 0-indexed start qubit of the hopping generator removed by the weak link.
  /// Spin-down lives on the odd 1-indexed qubits (qubit 2s-1 for site s), so
  /// the down-spin bond (s, s+1) spans 1-indexed qubits (2s-1, 2s, 2s+1).
  int excluded_hopping_start() const {
    return weak_link_spin == Spin::Down ? 2 * (weak_link_bond - 1)
                                        : 2 * weak_link_bond - 1;
  }
};

// ---------------------------------------------------------------------------
// Trotter slices
// ---------------------------------------------------------------------------

/// One factorizable portion of a Trotter step: the circuit acts as a tensor
/// product across `boundary` (between wires boundary-1 and boundary).
struct TrotterSlice {
  Circuit circuit;
  int boundary = 0;
};

/// Ordered slices whose composition is the full Trotter step.
struct TrotterSlices {
  std::vector<TrotterSlice> slices;

  Circuit composed() const {
    if (slices.empty()) throw std::invalid_argument("no slices");
    Circuit c = slices[0].circuit;
    for (std::size_t i = 1; i < slices.size(); ++i) c = compose(c, slices[i].circuit);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Heisenberg
// ---------------------------------------------------------------------------

inline Hamiltonian heisenberg_hamiltonian(const HeisenbergParams &p_in) {
  if (p_in.n < 2) throw std::invalid_argument("heisenberg: need at least 2 qubits");
  HeisenbergParams p = p_in;
  if (p.h_x.empty()) p.resolve_fields();
  Hamiltonian h(p.n);
  for (int i = 0; i + 1 < p.n; ++i) {
    h.add(p.J, {{i, 'X'}, {i + 1, 'X'}});
    h.add(p.J, {{i, 'Y'}, {i + 1, 'Y'}});
    h.add(p.J, {{i, 'Z'}, {i + 1, 'Z'}});
  }
  if (p.w != 0.0) {
    for (int i = 0; i < p.n; ++i) {
      if (p.w * p.h_x[i] != 0.0) h.add(p.w * p.h_x[i], {{i, 'X'}});
      if (p.w * p.h_z[i] != 0.0) h.add(p.w * p.h_z[i], {{i, 'Z'}});
    }
  }
  return h;
}

/// Two-qubit block implementing exp(-i J dt (XX + YY + ZZ)) up to a global
/// phase with three CNOTs (the CNOT-optimal decomposition of the exchange
/// interaction).
inline Circuit xxyyzz_block(double J, double dt) {
  const double pi2 = std::numbers::pi / 2;
  const double a = 2.0 * J * dt;
  Circuit c(2);
  c.rz(1, -pi2);
  c.cnot(1, 0);
  c.rz(0, pi2 + a);
  c.ry(1, -pi2 - a);
  c.cnot(0, 1);
  c.ry(1, pi2 + a);
  c.cnot(1, 0);
  c.rz(0, pi2);
  return c;
}

namespace detail {

// Appends `block` (a 2-qubit circuit) onto wires (lo, lo+1) of `out`,
// optionally dropping its first and/or last gate (used for the seam merges
// below).
inline void append_block(Circuit &out, const Circuit &block, int lo, bool drop_first,
                         bool drop_last) {
  const std::size_t begin = drop_first ? 1 : 0;
  const std::size_t end = block.gates.size() - (drop_last ? 1 : 0);
  for (std::size_t i = begin; i < end; ++i) {
    Gate g = block.gates[i];
    g.wires[0] += lo;
    if (g.n_wires == 2) g.wires[1] += lo;
    out.add(g);
  }
}

// Peephole pass merging adjacent single-qubit gates on a wire: inverse pairs
// cancel, equal-axis rotations add, and H-conjugated phases turn into RX.
// Preserves the circuit unitary up to a global phase and never moves a gate
// across a two-qubit gate, so factorization boundaries are unaffected.
inline Circuit merge_adjacent_1q(Circuit c) {
  const double pi2 = std::numbers::pi / 2;
  auto next_on_wire = [&](std::size_t i) -> int {
    const int w = c.gates[i].wires[0];
    for (std::size_t k = i + 1; k < c.gates.size(); ++k) {
      const Gate &g = c.gates[k];
      if (g.wires[0] == w || (g.n_wires == 2 && g.wires[1] == w)) {
        if (g.n_wires == 2) return -1;
        return static_cast<int>(k);
      }
    }
    return -1;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < c.gates.size() && !changed; ++i) {
      Gate &a = c.gates[i];
      if (a.n_wires != 1 || a.param.is_symbolic()) continue;
      const int jn = next_on_wire(i);
      if (jn < 0) continue;
      Gate &b = c.gates[jn];
      if (b.param.is_symbolic()) continue;
      const bool inverse_pair =
          (a.kind == GateKind::H && b.kind == GateKind::H) ||
          (a.kind == GateKind::X && b.kind == GateKind::X) ||
          (a.kind == GateKind::S && b.kind == GateKind::Sdg) ||
          (a.kind == GateKind::Sdg && b.kind == GateKind::S);
      if (inverse_pair) {
        c.gates.erase(c.gates.begin() + jn);
        c.gates.erase(c.gates.begin() + i);
        changed = true;
        continue;
      }
      if (is_rotation(a.kind) && a.kind == b.kind) {
        a.param.value += b.param.value;
        c.gates.erase(c.gates.begin() + jn);
        if (a.param.value == 0.0) c.gates.erase(c.gates.begin() + i);
        changed = true;
        continue;
      }
      // H P H with P diagonal becomes an RX (up to global phase).
      if (a.kind == GateKind::H &&
          (b.kind == GateKind::S || b.kind == GateKind::Sdg || b.kind == GateKind::RZ)) {
        const int kn = next_on_wire(jn);
        if (kn >= 0 && c.gates[kn].kind == GateKind::H) {
          const double angle = b.kind == GateKind::RZ ? b.param.value
                               : b.kind == GateKind::S ? pi2
                                                       : -pi2;
          const int w = a.wires[0];
          c.gates.erase(c.gates.begin() + kn);
          c.gates.erase(c.gates.begin() + jn);
          c.gates[i] = Gate{GateKind::RX, {w, 0}, 1, Param::fixed(angle)};
          changed = true;
          continue;
        }
      }
    }
  }
  return c;
}

}  // namespace detail

/// Builds the two dp-VQD slices of one first-order Trotter step for the
/// disordered Heisenberg chain:
///   slice 1: per-qubit RX(2 w h_x dt), RZ(2 w h_z dt), then exchange blocks
///            on the odd bonds (0,1), (2,3), ...
///   slice 2: exchange blocks on the even bonds (1,2), (3,4), ...
/// Slice 1 factorizes at every even boundary not split by an odd bond,
/// slice 2 at the complementary odd boundaries.
///
/// Adjacent single-qubit RZ rotations at the block seams are merged: each odd
/// bond's leading RZ(-pi/2) folds into the disorder RZ below it, and the
/// trailing RZ(pi/2) of an odd bond cancels the leading RZ(-pi/2) of the even
/// bond that reuses its upper wire. The merges change neither the slice
/// unitaries' product nor factorizability, and let the step pack into its
/// nominal 13 layers.
inline TrotterSlices heisenberg_trotter_slices(const HeisenbergParams &p_in, double dt) {
  if (p_in.n < 3) throw std::invalid_argument("heisenberg slices: need at least 3 qubits");
  HeisenbergParams p = p_in;
  if (p.h_x.empty()) p.resolve_fields();
  const int n = p.n;
  const double pi2 = std::numbers::pi / 2;
  const Circuit block = xxyyzz_block(p.J, dt);

  // Odd bond (2i, 2i+1): its trailing RZ(pi/2) on wire 2i cancels against the
  // even bond (2i-1, 2i) when that bond exists.
  auto odd_keeps_tail = [&](int top) { return !(top >= 2 && top <= n - 1); };
  // Even bond (b-1, b): its leading RZ(-pi/2) on wire b is cancelled when the
  // odd bond (b, b+1) exists upstream.
  auto even_drops_head = [&](int bottom) { return bottom + 1 <= n - 1; };

  Circuit s1(n);
  for (int i = 0; i < n; ++i) s1.rx(i, 2.0 * p.w * p.h_x[i] * dt);
  for (int i = 0; i < n; ++i) {
    double angle = 2.0 * p.w * p.h_z[i] * dt;
    // Wire i is the bottom of odd bond (i-1, i) when i is odd: fold the
    // block's leading RZ(-pi/2) into the disorder rotation.
    if (i % 2 == 1) angle -= pi2;
    s1.rz(i, angle);
  }
  for (int top = 0; top + 1 < n; top += 2)
    detail::append_block(s1, block, top, /*drop_first=*/true,
                         /*drop_last=*/!odd_keeps_tail(top));

  Circuit s2(n);
  for (int top = 1; top + 1 < n; top += 2)
    detail::append_block(s2, block, top, /*drop_first=*/even_drops_head(top + 1),
                         /*drop_last=*/false);

  // Factorization boundaries. Slice 1 splits between the odd bonds, slice 2
  // between the even bonds; among the admissible boundaries pick the one
  // whose compute-uncompute loss fragments are narrowest (the upper side
  // carries the two cut stubs), preferring boundaries with room for ansatz
  // blocks on both sides, ties resolved toward the middle.
  auto pick = [&](int parity) {
    auto better = [&](int b, int cur) {
      if (cur < 0) return true;
      const auto width = [&](int x) { return std::max(x + 2, n - x); };
      const auto roomy = [&](int x) { return x >= 2 && x <= n - 2; };
      if (roomy(b) != roomy(cur)) return roomy(b);
      if (width(b) != width(cur)) return width(b) < width(cur);
      return std::abs(2 * b - n) < std::abs(2 * cur - n);
    };
    int best = -1;
    for (int b = 1; b < n; ++b)
      if (b % 2 == parity && better(b, best)) best = b;
    return best;
  };
  TrotterSlices out;
  out.slices.push_back({std::move(s1), pick(0)});
  out.slices.push_back({std::move(s2), pick(1)});
  return out;
}

// ---------------------------------------------------------------------------
// Pauli exponentials and Hubbard
// ---------------------------------------------------------------------------

/// Standard decomposition of exp(-i dt g): basis changes into the Z frame
/// (H for X, Sdg then H for Y), a CNOT ladder onto the last support wire,
/// RZ(2 coeff dt), then the mirror image.
inline Circuit pauli_exponential(const PauliTerm &g, double dt, int n_qubits) {
  if (g.ops.empty()) throw std::invalid_argument("pauli_exponential: empty string");
  if (g.max_wire() >= n_qubits)
    throw std::invalid_argument("pauli_exponential: wire out of range");
  Circuit c(n_qubits);
  for (const auto &[w, p] : g.ops) {
    if (p == 'X') {
      c.h(w);
    } else if (p == 'Y') {
      c.sdg(w);
      c.h(w);
    }
  }
  for (std::size_t i = 0; i + 1 < g.ops.size(); ++i)
    c.cnot(g.ops[i].first, g.ops[i + 1].first);
  c.rz(g.ops.back().first, 2.0 * g.coeff * dt);
  for (std::size_t i = g.ops.size() - 1; i-- > 0;)
    c.cnot(g.ops[i].first, g.ops[i + 1].first);
  for (const auto &[w, p] : g.ops) {
    if (p == 'X') {
      c.h(w);
    } else if (p == 'Y') {
      c.h(w);
      c.s(w);
    }
  }
  return c;
}

/// Jordan-Wigner form of the Hubbard chain in interleaved ordering (site s
/// occupies 1-indexed qubits 2s-1 and 2s). For a chain of S sites:
///   hopping:  -h/2 * (Y Z Y) and -h/2 * (X Z X) on qubits (j, j+1, j+2) for
///             every 0-indexed j in [0, 2S-3] except the weak link's;
///   on-site:  U/4 * ZZ on each site's qubit pair, -U/4 * Z on every qubit
///             (the constant U S / 4 is dropped).
inline Hamiltonian hubbard_jw_hamiltonian(const HubbardParams &p) {
  p.validate();
  const int nq = p.n_qubits();
  const int skip = p.excluded_hopping_start();
  Hamiltonian h(nq);
  for (int j = 0; j + 2 < nq; ++j) {
    if (j == skip) continue;
    h.add(-p.hopping / 2, {{j, 'Y'}, {j + 1, 'Z'}, {j + 2, 'Y'}});
    h.add(-p.hopping / 2, {{j, 'X'}, {j + 1, 'Z'}, {j + 2, 'X'}});
  }
  for (int s = 0; s < p.n_sites; ++s) h.add(p.U / 4, {{2 * s, 'Z'}, {2 * s + 1, 'Z'}});
  for (int q = 0; q < nq; ++q) h.add(-p.U / 4, {{q, 'Z'}});
  return h;
}

/// Two dp-VQD slices for one first-order Hubbard Trotter step. The weak link
/// removes the hopping generator spanning qubits (skip, skip+2); every
/// generator supported entirely on qubits 0..skip+2 goes into slice 1 and the
/// rest into slice 2. Slice 1's two-qubit gates stay within wires 0..skip+1
/// (its wire skip+2 content is single-qubit), slice 2's within skip+1 and up,
/// so the annotated boundaries are skip+2 and skip+1.
///
/// Within a slice the generators follow a fixed canonical arrangement chosen
/// so the step packs into its nominal 45 layers: the on-site exponentials sit
/// at the outer edges of the step (Z then ZZ leading slice 1, ZZ then Z
/// trailing slice 2) and the hoppings run in three round-robin groups by
/// leftmost qubit mod 3 (supports within a group are disjoint), ascending
/// within a group, YZY before XZX on each bond. Adjacent single-qubit gates
/// left at the seams are merged per slice, which changes each slice's unitary
/// only by a global phase.
inline TrotterSlices hubbard_trotter_slices(const HubbardParams &p, double dt) {
  p.validate();
  const int nq = p.n_qubits();
  const int skip = p.excluded_hopping_start();
  // Slice 1's entangling gates stay within wires 0..skip+1 and slice 2's
  // within skip+1..n-1, so these are the narrowest-fragment boundaries.
  const int b1 = skip + 2;
  const int b2 = skip + 1;
  if (b2 < 1 || b1 > nq - 1)
    throw std::invalid_argument(
        "hubbard slices: weak link too close to the chain edge for a two-slice "
        "factorization; use more slices");

  const Hamiltonian full = hubbard_jw_hamiltonian(p);
  std::vector<const PauliTerm *> slice_terms[2];
  for (const auto &term : full.terms)
    slice_terms[term.max_wire() <= skip + 2 ? 0 : 1].push_back(&term);

  auto arrange = [](std::vector<const PauliTerm *> &terms, bool onsite_first) {
    auto key = [onsite_first](const PauliTerm *t) {
      const int j = t->ops.front().first;
      int cls;
      if (t->ops.size() == 3) {
        cls = 10 + j % 3;
      } else {
        const int sub = t->ops.size() == 1 ? 0 : 1;  // Z outermost, then ZZ
        cls = onsite_first ? sub : 20 + (1 - sub);
      }
      const int flavor = t->ops.front().second == 'Y' ? 0 : 1;
      return std::tuple(cls, j, flavor);
    };
    std::stable_sort(terms.begin(), terms.end(), [&](const PauliTerm *a, const PauliTerm *b) {
      return key(a) < key(b);
    });
  };
  arrange(slice_terms[0], /*onsite_first=*/true);
  arrange(slice_terms[1], /*onsite_first=*/false);

  TrotterSlices out;
  for (int si = 0; si < 2; ++si) {
    Circuit s(nq);
    for (const PauliTerm *t : slice_terms[si])
      s = compose(s, pauli_exponential(*t, dt, nq));
    out.slices.push_back({detail::merge_adjacent_1q(std::move(s)), si == 0 ? b1 : b2});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

/// Staggered spin imbalance P = sum_{i=1..n} (-1)^i <Z_i> (sites counted
/// from 1).
inline Hamiltonian imbalance_observable(int n) {
  Hamiltonian h(n);
  for (int i = 1; i <= n; ++i) h.add(i % 2 == 1 ? -1.0 : 1.0, {{i - 1, 'Z'}});
  return h;
}

/// Staggered magnetization m = (1/S) sum_s (-1)^{s+1} m_s with per-site spin
/// density m_s = (Z_a - Z_b)/2 on the site's qubit pair (a, b).
inline Hamiltonian staggered_magnetization_observable(int n_sites) {
  Hamiltonian h(2 * n_sites);
  for (int s = 1; s <= n_sites; ++s) {
    const double sign = (s % 2 == 1 ? 1.0 : -1.0) / n_sites;
    h.add(sign / 2, {{2 * s - 2, 'Z'}});
    h.add(-sign / 2, {{2 * s - 1, 'Z'}});
  }
  return h;
}

}  // namespace dpvqd
