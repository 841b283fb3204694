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
#include <array>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dpvqd {

/// Gate alphabet. Rotations carry one angle slot; CNOT acts on two distinct
/// wires; everything else is a fixed single-qubit gate.
enum class GateKind { RX, RY, RZ, CNOT, H, X, S, Sdg };

inline bool is_rotation(GateKind k) {
  return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ;
}

inline const char *gate_name(GateKind k) {
  switch (k) {
    case GateKind::RX: return "rx";
    case GateKind::RY: return "ry";
    case GateKind::RZ: return "rz";
    case GateKind::CNOT: return "cnot";
    case GateKind::H: return "h";
    case GateKind::X: return "x";
    case GateKind::S: return "s";
    case GateKind::Sdg: return "sdg";
  }
  return "?";
}

/// Rotation angle: either a fixed value in radians or a reference into the
/// owning circuit's parameter table. `scale` lets adjoints negate a symbol
/// without touching the table (angle = scale * value[symbol]).
struct Param {
  double value = 0.0;
  int symbol = -1;
  double scale = 1.0;

  static Param fixed(double angle) { return Param{angle, -1, 1.0}; }
  static Param sym(int index, double scale = 1.0) { return Param{0.0, index, scale}; }
  bool is_symbolic() const { return symbol >= 0; }
  Param negated() const {
    return is_symbolic() ? Param{0.0, symbol, -scale} : Param{-value, -1, 1.0};
  }
};

struct Gate {
  GateKind kind;
  std::array<int, 2> wires{0, 0};  // CNOT: {control, target}
  int n_wires = 1;
  Param param;  // meaningful only for rotations
};

/// Ordered gate list on `n_qubits` wires, plus the table of symbolic
/// parameter names (index == position; each symbol listed exactly once, in
/// first-appearance order). Circuits are immutable by convention once built:
/// every transformation below returns a new value.
///
/// Convention used across the project: wire 0 is the least significant bit of
/// a computational-basis index, and bitstrings are printed wire-0 first.
struct Circuit {
  int n_qubits = 0;
  std::vector<Gate> gates;
  std::vector<std::string> params;

  Circuit() = default;
  explicit Circuit(int n) : n_qubits(n) {
    if (n <= 0) throw std::invalid_argument("circuit needs at least one qubit");
  }

  std::size_t size() const { return gates.size(); }

  void check_wire(int w) const {
    if (w < 0 || w >= n_qubits) throw std::invalid_argument("wire index out of range");
  }

  Circuit &add(Gate g) {
    check_wire(g.wires[0]);
    if (g.kind == GateKind::CNOT) {
      check_wire(g.wires[1]);
      if (g.wires[0] == g.wires[1])
        throw std::invalid_argument("cnot wires must be distinct");
      g.n_wires = 2;
    } else {
      g.n_wires = 1;
    }
    if (g.param.is_symbolic() &&
        (g.param.symbol < 0 || g.param.symbol >= static_cast<int>(params.size())))
      throw std::invalid_argument("gate references unknown parameter");
    gates.push_back(g);
    return *this;
  }

  /// Registers a new named symbol and returns a Param referring to it.
  Param new_param(const std::string &name) {
    for (const auto &p : params)
      if (p == name) throw std::invalid_argument("duplicate parameter name: " + name);
    params.push_back(name);
    return Param::sym(static_cast<int>(params.size()) - 1);
  }

  Circuit &rx(int w, Param p) { return add({GateKind::RX, {w, 0}, 1, p}); }
  Circuit &ry(int w, Param p) { return add({GateKind::RY, {w, 0}, 1, p}); }
  Circuit &rz(int w, Param p) { return add({GateKind::RZ, {w, 0}, 1, p}); }
  Circuit &rx(int w, double a) { return rx(w, Param::fixed(a)); }
  Circuit &ry(int w, double a) { return ry(w, Param::fixed(a)); }
  Circuit &rz(int w, double a) { return rz(w, Param::fixed(a)); }
  Circuit &cnot(int control, int target) {
    return add({GateKind::CNOT, {control, target}, 2, {}});
  }
  Circuit &h(int w) { return add({GateKind::H, {w, 0}, 1, {}}); }
  Circuit &x(int w) { return add({GateKind::X, {w, 0}, 1, {}}); }
  Circuit &s(int w) { return add({GateKind::S, {w, 0}, 1, {}}); }
  Circuit &sdg(int w) { return add({GateKind::Sdg, {w, 0}, 1, {}}); }

  bool has_symbols() const {
    return std::any_of(gates.begin(), gates.end(),
                       [](const Gate &g) { return g.param.is_symbolic(); });
  }
};

/// Concatenates two equal-width circuits. Parameter tables are merged; if b
/// reuses a name already present in a, b's symbol is renamed by appending a
/// tick so the merged table stays collision-free.
inline Circuit compose(const Circuit &a, const Circuit &b) {
  if (a.n_qubits != b.n_qubits)
    throw std::invalid_argument("compose: circuit widths differ");
  Circuit out = a;
  std::vector<int> remap(b.params.size());
  for (std::size_t i = 0; i < b.params.size(); ++i) {
    std::string name = b.params[i];
    auto taken = [&](const std::string &n) {
      return std::find(out.params.begin(), out.params.end(), n) != out.params.end();
    };
    while (taken(name)) name += "'";
    out.params.push_back(name);
    remap[i] = static_cast<int>(out.params.size()) - 1;
  }
  for (Gate g : b.gates) {
    if (g.param.is_symbolic()) g.param.symbol = remap[g.param.symbol];
    out.gates.push_back(g);
  }
  return out;
}

inline Circuit compose(std::span<const Circuit> parts) {
  if (parts.empty()) throw std::invalid_argument("compose: empty list");
  Circuit out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out = compose(out, parts[i]);
  return out;
}

/// Reverses the gate order and inverts each gate: rotations negate their
/// angle (symbolically when symbolic), S and Sdg swap, the rest are
/// self-inverse.
inline Circuit adjoint(const Circuit &c) {
  Circuit out(c.n_qubits);
  out.params = c.params;
  out.gates.reserve(c.gates.size());
  for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) {
    Gate g = *it;
    if (is_rotation(g.kind)) {
      g.param = g.param.negated();
    } else if (g.kind == GateKind::S) {
      g.kind = GateKind::Sdg;
    } else if (g.kind == GateKind::Sdg) {
      g.kind = GateKind::S;
    }
    out.gates.push_back(g);
  }
  return out;
}

/// Substitutes every symbol with its value from `values` (keyed by name).
/// Rejects the binding if any symbol is missing or any key is unused.
inline Circuit bind(const Circuit &c, const std::map<std::string, double> &values) {
  std::string missing, extra;
  for (const auto &name : c.params)
    if (!values.count(name)) missing += (missing.empty() ? "" : ", ") + name;
  for (const auto &[name, v] : values)
    if (std::find(c.params.begin(), c.params.end(), name) == c.params.end())
      extra += (extra.empty() ? "" : ", ") + name;
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "bind: ";
    if (!missing.empty()) msg += "missing symbols {" + missing + "}";
    if (!missing.empty() && !extra.empty()) msg += "; ";
    if (!extra.empty()) msg += "unknown symbols {" + extra + "}";
    throw std::invalid_argument(msg);
  }
  Circuit out(c.n_qubits);
  out.gates = c.gates;
  for (Gate &g : out.gates)
    if (g.param.is_symbolic())
      g.param = Param::fixed(g.param.scale * values.at(c.params[g.param.symbol]));
  return out;
}

/// Positional variant: values[i] binds symbol index i.
inline Circuit bind(const Circuit &c, std::span<const double> values) {
  if (values.size() != c.params.size())
    throw std::invalid_argument("bind: expected " + std::to_string(c.params.size()) +
                                " values, got " + std::to_string(values.size()));
  Circuit out(c.n_qubits);
  out.gates = c.gates;
  for (Gate &g : out.gates)
    if (g.param.is_symbolic())
      g.param = Param::fixed(g.param.scale * values[g.param.symbol]);
  return out;
}

/// Number of layers under greedy left-alignment (ASAP scheduling): every gate
/// is placed in the earliest layer where all of its wires are free.
inline int depth(const Circuit &c) {
  std::vector<int> level(c.n_qubits, 0);
  int d = 0;
  for (const Gate &g : c.gates) {
    int l = level[g.wires[0]];
    if (g.n_wires == 2) l = std::max(l, level[g.wires[1]]);
    ++l;
    level[g.wires[0]] = l;
    if (g.n_wires == 2) level[g.wires[1]] = l;
    d = std::max(d, l);
  }
  return d;
}

/// True when no gate straddles the boundary between wires b-1 and b, i.e. the
/// circuit acts as a tensor product of its two halves.
inline bool factor_boundary(const Circuit &c, int b) {
  if (b <= 0 || b >= c.n_qubits)
    throw std::invalid_argument("factor_boundary: boundary out of range");
  for (const Gate &g : c.gates) {
    if (g.n_wires != 2) continue;
    const bool lo = g.wires[0] < b;
    const bool hi = g.wires[1] < b;
    if (lo != hi) return false;
  }
  return true;
}

/// Remaps the gates of `c` onto a wider/narrower register through `wire_map`
/// (new wire index per old wire). Parameter table is preserved.
inline Circuit remap_wires(const Circuit &c, std::span<const int> wire_map, int new_width) {
  if (wire_map.size() != static_cast<std::size_t>(c.n_qubits))
    throw std::invalid_argument("remap_wires: map size mismatch");
  Circuit out(new_width);
  out.params = c.params;
  for (Gate g : c.gates) {
    g.wires[0] = wire_map[g.wires[0]];
    if (g.n_wires == 2) g.wires[1] = wire_map[g.wires[1]];
    out.add(g);
  }
  return out;
}

}  // namespace dpvqd
