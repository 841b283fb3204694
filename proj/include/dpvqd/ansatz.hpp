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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpvqd/circuit.hpp"

namespace dpvqd {

enum class AnsatzFamily { Linear, WeakLink };

/// Built parametrized circuit plus the metadata the trainer needs to place
/// cuts. All CNOT chains run downward (low wire controls high), so any
/// boundary b is crossed at most block_layers times, exactly once for
/// single-layer blocks; the cut stub then always lives on wire b, with only
/// single-qubit gates preceding the crossing there.
struct AnsatzSpec {
  AnsatzFamily family = AnsatzFamily::WeakLink;
  int n = 0;
  int cut_boundary = 0;  // designated boundary (one crossing regardless of layers)
  int block_layers = 1;
  int parameter_count = 0;
  int crossing_gate_index = -1;  // index of the designated crossing CNOT
  int stub_wire = -1;            // == cut_boundary

  /// Width of the widest fragment of the compute-uncompute loss circuit cut
  /// at `b`: the upper side gains the two cut stubs on wire b.
  static int max_loss_fragment_width(int n, int b) { return std::max(b + 2, n - b); }
};

struct BuiltAnsatz {
  Circuit circuit;
  AnsatzSpec spec;
};

inline int parameter_count(const AnsatzSpec &spec) { return spec.parameter_count; }

namespace detail {

// One corner block: `layers` repetitions of a full local-unitary sublayer
// (RZ, RY, RZ per wire) followed by a CNOT staircase down the block, then a
// final rotation sublayer. Every rotation gets its own symbol.
inline void append_corner_block(Circuit &c, int lo, int hi, int layers,
                                const std::string &tag, int &counter) {
  auto fresh = [&]() { return c.new_param(tag + std::to_string(counter++)); };
  auto rotations = [&]() {
    for (int w = lo; w <= hi; ++w) c.rz(w, fresh());
    for (int w = lo; w <= hi; ++w) c.ry(w, fresh());
    for (int w = lo; w <= hi; ++w) c.rz(w, fresh());
  };
  for (int layer = 0; layer < layers; ++layer) {
    rotations();
    for (int w = lo; w < hi; ++w) c.cnot(w, w + 1);
  }
  rotations();
}

}  // namespace detail

/// Brick-wall ansatz: per layer, parametrized RY and RZ on every qubit, then
/// the full CNOT chain. Exactly one chain CNOT crosses any boundary per
/// layer, so the single-layer form is cuttable with one cut.
inline BuiltAnsatz build_linear(int n, int layers, int cut_boundary) {
  if (n < 2) throw std::invalid_argument("linear ansatz: need at least 2 qubits");
  if (layers < 1) throw std::invalid_argument("linear ansatz: need at least 1 layer");
  if (cut_boundary <= 0 || cut_boundary >= n)
    throw std::invalid_argument("linear ansatz: invalid boundary");
  Circuit c(n);
  int counter = 0;
  auto fresh = [&]() { return c.new_param("t" + std::to_string(counter++)); };
  int crossing = -1;
  for (int layer = 0; layer < layers; ++layer) {
    for (int w = 0; w < n; ++w) c.ry(w, fresh());
    for (int w = 0; w < n; ++w) c.rz(w, fresh());
    for (int w = 0; w + 1 < n; ++w) {
      if (w + 1 == cut_boundary) crossing = static_cast<int>(c.gates.size());
      c.cnot(w, w + 1);
    }
  }
  BuiltAnsatz out;
  out.spec.family = AnsatzFamily::Linear;
  out.spec.n = n;
  out.spec.cut_boundary = cut_boundary;
  out.spec.block_layers = layers;
  out.spec.parameter_count = static_cast<int>(c.params.size());
  out.spec.crossing_gate_index = crossing;
  out.spec.stub_wire = cut_boundary;
  out.circuit = std::move(c);
  return out;
}

/// Weak-link ansatz: free rotations on wire b-1 set the cross-boundary
/// Schmidt weight, a single crossing CNOT distributes it onto wire b, and two
/// arbitrarily deep corner blocks then process the halves locally. At zero
/// pre-rotation the crossing acts on |0>, so products of internally entangled
/// half-states are represented exactly; wire b is untouched before the
/// crossing, so one cut on it splits the circuit.
inline BuiltAnsatz build_weak_link(int n, int block_layers, int cut_boundary) {
  if (n < 4) throw std::invalid_argument("weak-link ansatz: need at least 4 qubits");
  if (block_layers < 1) throw std::invalid_argument("weak-link ansatz: need layers >= 1");
  const int b = cut_boundary;
  if (b < 2 || b > n - 2)
    throw std::invalid_argument(
        "weak-link ansatz: boundary too close to the edge, no room for blocks");
  Circuit c(n);
  int counter = 0;
  c.ry(b - 1, c.new_param("w0"));
  c.rz(b - 1, c.new_param("w1"));
  const int crossing = static_cast<int>(c.gates.size());
  c.cnot(b - 1, b);
  detail::append_corner_block(c, 0, b - 1, block_layers, "u", counter);
  detail::append_corner_block(c, b, n - 1, block_layers, "l", counter);
  BuiltAnsatz out;
  out.spec.family = AnsatzFamily::WeakLink;
  out.spec.n = n;
  out.spec.cut_boundary = b;
  out.spec.block_layers = block_layers;
  out.spec.parameter_count = static_cast<int>(c.params.size());
  out.spec.crossing_gate_index = crossing;
  out.spec.stub_wire = b;
  out.circuit = std::move(c);
  return out;
}

inline BuiltAnsatz build_ansatz(AnsatzFamily family, int n, int layers, int boundary) {
  return family == AnsatzFamily::Linear ? build_linear(n, layers, boundary)
                                        : build_weak_link(n, layers, boundary);
}

/// Index of the single two-qubit gate straddling boundary b, if exactly one.
inline std::optional<int> unique_boundary_crossing(const Circuit &c, int b) {
  std::optional<int> found;
  for (std::size_t i = 0; i < c.gates.size(); ++i) {
    const Gate &g = c.gates[i];
    if (g.n_wires != 2) continue;
    if ((g.wires[0] < b) != (g.wires[1] < b)) {
      if (found) return std::nullopt;
      found = static_cast<int>(i);
    }
  }
  return found;
}

}  // namespace dpvqd
