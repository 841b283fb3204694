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

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <string>

#include "dpvqd/circuit.hpp"
#include "dpvqd/pauli.hpp"
#include "dpvqd/sampling.hpp"

namespace dpvqd {

using json = nlohmann::json;

// Circuit <-> {n_qubits, gates: [{kind, wires, angle | symbol (+ scale)}]}

inline json to_json(const Circuit &c) {
  json gates = json::array();
  for (const Gate &g : c.gates) {
    json jg;
    jg["kind"] = gate_name(g.kind);
    jg["wires"] = g.n_wires == 2 ? json::array({g.wires[0], g.wires[1]})
                                 : json::array({g.wires[0]});
    if (is_rotation(g.kind)) {
      if (g.param.is_symbolic()) {
        jg["symbol"] = c.params[g.param.symbol];
        if (g.param.scale != 1.0) jg["scale"] = g.param.scale;
      } else {
        jg["angle"] = g.param.value;
      }
    }
    gates.push_back(std::move(jg));
  }
  return json{{"n_qubits", c.n_qubits}, {"gates", std::move(gates)}};
}

inline Circuit circuit_from_json(const json &j) {
  Circuit c(j.at("n_qubits").get<int>());
  for (const auto &jg : j.at("gates")) {
    const std::string kind = jg.at("kind").get<std::string>();
    GateKind k;
    if (kind == "rx") k = GateKind::RX;
    else if (kind == "ry") k = GateKind::RY;
    else if (kind == "rz") k = GateKind::RZ;
    else if (kind == "cnot") k = GateKind::CNOT;
    else if (kind == "h") k = GateKind::H;
    else if (kind == "x") k = GateKind::X;
    else if (kind == "s") k = GateKind::S;
    else if (kind == "sdg") k = GateKind::Sdg;
    else throw std::invalid_argument("unknown gate kind: " + kind);
    Gate g{k, {0, 0}, 1, {}};
    const auto &w = jg.at("wires");
    g.wires[0] = w.at(0).get<int>();
    if (k == GateKind::CNOT) g.wires[1] = w.at(1).get<int>();
    if (is_rotation(k)) {
      if (jg.contains("symbol")) {
        const std::string name = jg["symbol"].get<std::string>();
        int idx = -1;
        for (std::size_t i = 0; i < c.params.size(); ++i)
          if (c.params[i] == name) idx = static_cast<int>(i);
        if (idx < 0) {
          c.params.push_back(name);
          idx = static_cast<int>(c.params.size()) - 1;
        }
        g.param = Param::sym(idx, jg.value("scale", 1.0));
      } else {
        g.param = Param::fixed(jg.at("angle").get<double>());
      }
    }
    c.add(g);
  }
  return c;
}

// Hamiltonian <-> {n_qubits, terms: [{coeff, paulis: {"wire": "X"}}]}

inline json to_json(const Hamiltonian &h) {
  json terms = json::array();
  for (const auto &t : h.terms) {
    json paulis = json::object();
    for (const auto &[w, p] : t.ops) paulis[std::to_string(w)] = std::string(1, p);
    terms.push_back(json{{"coeff", t.coeff}, {"paulis", std::move(paulis)}});
  }
  return json{{"n_qubits", h.n_qubits}, {"terms", std::move(terms)}};
}

inline Hamiltonian hamiltonian_from_json(const json &j) {
  Hamiltonian h(j.at("n_qubits").get<int>());
  for (const auto &jt : j.at("terms")) {
    std::vector<std::pair<int, char>> ops;
    for (const auto &[k, v] : jt.at("paulis").items())
      ops.emplace_back(std::stoi(k), v.get<std::string>().at(0));
    h.add(jt.at("coeff").get<double>(), std::move(ops));
  }
  return h;
}

inline json to_json(const ShotCounts &sc) {
  json counts = json::object();
  for (const auto &[bits, c] : sc.as_strings()) counts[bits] = c;
  return json{{"n_qubits", sc.n_qubits}, {"total", sc.total}, {"counts", std::move(counts)}};
}

// Shortest round-trip decimal rendering; used for the CSV outputs where
// byte-identical reruns matter.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_text_file(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace dpvqd
