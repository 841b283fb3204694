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
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpvqd/rng.hpp"
#include "dpvqd/statevector.hpp"

namespace dpvqd {

/// Stochastic-Pauli stand-in for device noise: a uniformly random Pauli after
/// each 1-qubit gate with probability p1, a uniformly random non-identity
/// 2-qubit Pauli after each CNOT with probability p2, and an independent
/// classical bit flip per qubit at readout with probability p_readout.
/// All-zero settings reproduce noiseless sampling exactly.
struct NoiseConfig {
  double p1 = 0.0;
  double p2 = 0.0;
  double p_readout = 0.0;

  bool gate_noise() const { return p1 > 0.0 || p2 > 0.0; }
  bool any() const { return gate_noise() || p_readout > 0.0; }

  void validate() const {
    for (double p : {p1, p2, p_readout})
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("noise probabilities must lie in [0, 1]");
  }
};

/// Measurement record: bitstring (wire-0 first) -> count.
struct ShotCounts {
  int n_qubits = 0;
  long long total = 0;
  std::map<std::uint64_t, long long> counts;

  std::map<std::string, long long> as_strings() const {
    std::map<std::string, long long> out;
    for (const auto &[idx, c] : counts) out[index_to_bits(idx, n_qubits)] = c;
    return out;
  }

  /// Mean of (-1)^{popcount(bits & mask)} over shots; the sampled estimate of
  /// a Z-string expectation.
  double z_parity_mean(std::uint64_t mask) const {
    double acc = 0;
    for (const auto &[idx, c] : counts)
      acc += (std::popcount(idx & mask) & 1 ? -1.0 : 1.0) * static_cast<double>(c);
    return acc / static_cast<double>(total);
  }

  double fraction_equal(std::uint64_t idx) const {
    auto it = counts.find(idx);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / total;
  }
};

namespace detail {

inline std::uint64_t draw_index(const std::vector<cxd> &amps, Rng &rng) {
  double u = rng.next_double();
  double acc = 0;
  const std::uint64_t last = amps.size() - 1;
  for (std::uint64_t x = 0; x < amps.size(); ++x) {
    acc += std::norm(amps[x]);
    if (u < acc || x == last) return x;
  }
  return last;
}

inline char pauli_from_ordinal(int k) { return k == 0 ? 'X' : (k == 1 ? 'Y' : 'Z'); }

}  // namespace detail

/// Measures `shots` samples of `circuit` applied to `state` under the noise
/// model. With gate noise enabled every shot is an independent trajectory:
/// the circuit is re-executed with Pauli errors inserted after faulty gates.
/// Noiseless prefixes are snapshotted so a trajectory only pays for the
/// suffix after its first error. Deterministic for a fixed seed.
inline ShotCounts sample(const StateVector &state, long long shots,
                         const NoiseConfig &noise, const Circuit &circuit,
                         std::uint64_t seed) {
  if (shots <= 0) throw std::invalid_argument("sample: shots must be positive");
  if (state.n_qubits != circuit.n_qubits)
    throw std::invalid_argument("sample: state/circuit width mismatch");
  noise.validate();
  Rng rng(seed);
  const int n = state.n_qubits;
  ShotCounts out;
  out.n_qubits = n;
  out.total = shots;

  auto record = [&](std::uint64_t idx) {
    if (noise.p_readout > 0.0)
      for (int q = 0; q < n; ++q)
        if (rng.bernoulli(noise.p_readout)) idx ^= (1ULL << q);
    ++out.counts[idx];
  };

  if (!noise.gate_noise()) {
    const StateVector final_state = apply(state, circuit);
    for (long long s = 0; s < shots; ++s) record(detail::draw_index(final_state.amps, rng));
    return out;
  }

  // Snapshot the noiseless state after each gate prefix, unless that would
  // cost too much memory, in which case trajectories replay from scratch.
  const std::size_t snapshot_budget = std::size_t{1} << 24;  // amplitudes
  const std::size_t n_gates = circuit.gates.size();
  const bool use_snapshots = (n_gates + 1) * state.amps.size() <= snapshot_budget;
  std::vector<StateVector> snapshots;
  if (use_snapshots) {
    snapshots.reserve(n_gates + 1);
    snapshots.push_back(state);
    for (const Gate &g : circuit.gates) {
      snapshots.push_back(snapshots.back());
      apply_gate(snapshots.back(), g);
    }
  }

  StateVector work(state.n_qubits);
  for (long long s = 0; s < shots; ++s) {
    // Find the first faulty gate for this trajectory.
    std::size_t first_err = n_gates;
    for (std::size_t gi = 0; gi < n_gates; ++gi) {
      const double p = circuit.gates[gi].n_wires == 2 ? noise.p2 : noise.p1;
      if (p > 0.0 && rng.bernoulli(p)) {
        first_err = gi;
        break;
      }
    }
    if (first_err == n_gates && use_snapshots) {
      record(detail::draw_index(snapshots.back().amps, rng));
      continue;
    }
    if (use_snapshots) {
      work = snapshots[first_err + 1];
    } else {
      work = state;
      for (std::size_t gi = 0; gi <= first_err && gi < n_gates; ++gi)
        apply_gate(work, circuit.gates[gi]);
    }
    if (first_err < n_gates) {
      auto inject = [&](const Gate &g) {
        if (g.n_wires == 2) {
          // One of the 15 non-identity two-qubit Paulis, uniformly.
          const int k = static_cast<int>(rng.next_below(15)) + 1;
          const int a = k % 4, b = k / 4;
          if (a) apply_pauli(work, g.wires[0], detail::pauli_from_ordinal(a - 1));
          if (b) apply_pauli(work, g.wires[1], detail::pauli_from_ordinal(b - 1));
        } else {
          const int k = static_cast<int>(rng.next_below(3));
          apply_pauli(work, g.wires[0], detail::pauli_from_ordinal(k));
        }
      };
      inject(circuit.gates[first_err]);
      for (std::size_t gi = first_err + 1; gi < n_gates; ++gi) {
        apply_gate(work, circuit.gates[gi]);
        const double p = circuit.gates[gi].n_wires == 2 ? noise.p2 : noise.p1;
        if (p > 0.0 && rng.bernoulli(p)) inject(circuit.gates[gi]);
      }
    }
    record(detail::draw_index(work.amps, rng));
  }
  return out;
}

}  // namespace dpvqd
