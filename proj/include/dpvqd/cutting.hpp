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

// Wire cutting: a qubit wire is severed and replaced by the quasi-probability
// identity
//
//   rho = sum_{O in {I,X,Y,Z}, lambda in spec(O)}
//           (lambda/2) Tr(O rho) |v_lambda(O)><v_lambda(O)| ,
//
// i.e. a measure-in-basis-O / re-prepare-eigenstate channel. Severed circuits
// fall apart into fragments that execute independently; expectations of the
// original circuit are recovered as
//
//   <Obs> = sum_{M : cuts -> {I,X,Y,Z}} (1/2)^k  prod_frag f_frag(M)
//
// where on the measured side of a cut f carries the expectation of M on the
// stub wire, and on the prepared side the eigenvalue sum is re-expressed by
// linearity through four prepared states: I -> |0>+|1>, Z -> |0>-|1>,
// X -> 2|+> - |0> - |1>, Y -> 2|+i> - |0> - |1>. Only {X,Y,Z} measurement
// settings and {|0>,|1>,|+>,|+i>} preparations are ever executed (I reuses
// Z-basis data with the outcome ignored), four setting pairs instead of the
// naive eight.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dpvqd/circuit.hpp"
#include "dpvqd/pauli.hpp"
#include "dpvqd/rng.hpp"
#include "dpvqd/sampling.hpp"
#include "dpvqd/statevector.hpp"

namespace dpvqd {

/// A cut lives on `wire` immediately after the gate with global index
/// `position` (-1 places it before the first gate): gates on that wire with
/// index <= position stay upstream, later ones downstream.
struct CutPoint {
  int wire = 0;
  int position = -1;
};

/// Multiplicative shot-count factor needed to hold the reconstruction
/// variance fixed with k cuts (beta^2k with beta = 4).
inline long long overhead(int k) {
  if (k < 0) throw std::invalid_argument("overhead: k must be nonnegative");
  if (k > 15) throw std::invalid_argument("overhead: k too large");
  long long f = 1;
  for (int i = 0; i < k; ++i) f *= 16;
  return f;
}

/// One term of the canonical eight-term expansion of a single cut.
struct QpdTerm {
  char observable;          // 'I', 'X', 'Y', 'Z'
  int eigenvalue;           // +1 or -1
  double weight;            // eigenvalue / 2
  const char *prep_state;   // eigenvector label
};

inline std::vector<QpdTerm> canonical_qpd_terms() {
  return {
      {'I', +1, 0.5, "|0>"},  {'I', +1, 0.5, "|1>"},  {'X', +1, 0.5, "|+>"},
      {'X', -1, -0.5, "|->"}, {'Y', +1, 0.5, "|+i>"}, {'Y', -1, -0.5, "|-i>"},
      {'Z', +1, 0.5, "|0>"},  {'Z', -1, -0.5, "|1>"},
  };
}

// Pauli assignment codes used throughout the reconstruction.
enum : int { kPauliI = 0, kPauliX = 1, kPauliY = 2, kPauliZ = 3 };
// Executed preparation states.
enum : int { kPrepZero = 0, kPrepOne = 1, kPrepPlus = 2, kPrepPlusI = 3 };

inline const char *prep_name(int p) {
  switch (p) {
    case kPrepZero: return "|0>";
    case kPrepOne: return "|1>";
    case kPrepPlus: return "|+>";
    case kPrepPlusI: return "|+i>";
  }
  return "?";
}

inline char pauli_letter(int m) { return "IXYZ"[m]; }

/// Decomposition weights of an assigned Pauli over the executed prep states.
inline std::vector<std::pair<int, double>> prep_decomposition(int pauli) {
  switch (pauli) {
    case kPauliI: return {{kPrepZero, 1.0}, {kPrepOne, 1.0}};
    case kPauliZ: return {{kPrepZero, 1.0}, {kPrepOne, -1.0}};
    case kPauliX: return {{kPrepPlus, 2.0}, {kPrepZero, -1.0}, {kPrepOne, -1.0}};
    case kPauliY: return {{kPrepPlusI, 2.0}, {kPrepZero, -1.0}, {kPrepOne, -1.0}};
  }
  throw std::invalid_argument("bad pauli code");
}

/// One independently executable piece of a severed circuit.
struct Fragment {
  Circuit circuit;  // parameter table inherited from the original circuit
  std::vector<std::pair<int, int>> measure_stubs;  // (cut index, local wire)
  std::vector<std::pair<int, int>> prep_stubs;     // (cut index, local wire)
  std::vector<std::pair<int, int>> outputs;        // (local wire, original wire)

  int width() const { return circuit.n_qubits; }

  std::optional<int> output_local_wire(int original) const {
    for (const auto &[lw, ow] : outputs)
      if (ow == original) return lw;
    return std::nullopt;
  }
};

struct ReconstructionPlan {
  int n_cuts = 0;
  int original_width = 0;
  std::vector<CutPoint> cuts;
  std::vector<Fragment> fragments;

  /// Distinct circuits that shot execution needs per fragment: 3 measurement
  /// bases per measured stub times 4 preparations per prepared stub.
  long long variant_count(int fragment) const {
    const Fragment &f = fragments[fragment];
    long long n = 1;
    for (std::size_t i = 0; i < f.measure_stubs.size(); ++i) n *= 3;
    for (std::size_t i = 0; i < f.prep_stubs.size(); ++i) n *= 4;
    return n;
  }

  long long total_variants() const {
    long long n = 0;
    for (std::size_t i = 0; i < fragments.size(); ++i)
      n += variant_count(static_cast<int>(i));
    return n;
  }
};

struct CutOptions {
  int k_max = 3;
  int max_fragment_width = 0;  // 0 = unlimited
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

struct Segmentation {
  // per wire: sorted cut positions; segment s on wire w covers gate indices
  // (pos[s-1], pos[s]]
  std::vector<std::vector<std::pair<int, int>>> wire_cuts;  // (position, cut index)
  std::vector<int> seg_offset;                              // segment id base per wire
  int n_segments = 0;

  int segment_of(int wire, int gate_index) const {
    const auto &cuts = wire_cuts[wire];
    int s = 0;
    while (s < static_cast<int>(cuts.size()) && gate_index > cuts[s].first) ++s;
    return seg_offset[wire] + s;
  }
  int last_segment(int wire) const {
    return seg_offset[wire] + static_cast<int>(wire_cuts[wire].size());
  }
};

inline Segmentation segment_wires(const Circuit &c, std::span<const CutPoint> cuts) {
  Segmentation seg;
  seg.wire_cuts.resize(c.n_qubits);
  for (std::size_t ci = 0; ci < cuts.size(); ++ci) {
    const CutPoint &cp = cuts[ci];
    if (cp.wire < 0 || cp.wire >= c.n_qubits)
      throw std::invalid_argument("cut wire out of range");
    if (cp.position < -1 || cp.position >= static_cast<int>(c.gates.size()))
      throw std::invalid_argument("cut position out of range");
    seg.wire_cuts[cp.wire].emplace_back(cp.position, static_cast<int>(ci));
  }
  for (auto &wc : seg.wire_cuts) {
    std::sort(wc.begin(), wc.end());
    for (std::size_t i = 1; i < wc.size(); ++i)
      if (wc[i].first == wc[i - 1].first)
        throw std::invalid_argument("two cuts at the same point on one wire");
  }
  seg.seg_offset.resize(c.n_qubits);
  int next = 0;
  for (int w = 0; w < c.n_qubits; ++w) {
    seg.seg_offset[w] = next;
    next += static_cast<int>(seg.wire_cuts[w].size()) + 1;
  }
  seg.n_segments = next;
  return seg;
}

}  // namespace detail

/// Splits `c` at the given cuts into independently executable fragments and
/// the bookkeeping needed to recombine their results. With no cuts the plan
/// holds the original circuit as its single fragment.
inline ReconstructionPlan decompose(const Circuit &c, std::vector<CutPoint> cuts,
                                    const CutOptions &opts = {}) {
  if (static_cast<int>(cuts.size()) > opts.k_max)
    throw std::invalid_argument("decompose: more cuts than k_max allows");
  ReconstructionPlan plan;
  plan.n_cuts = static_cast<int>(cuts.size());
  plan.original_width = c.n_qubits;
  plan.cuts = cuts;

  if (cuts.empty()) {
    Fragment f;
    f.circuit = c;
    for (int w = 0; w < c.n_qubits; ++w) f.outputs.emplace_back(w, w);
    plan.fragments.push_back(std::move(f));
    return plan;
  }

  const auto seg = detail::segment_wires(c, cuts);
  detail::UnionFind uf(seg.n_segments);
  for (std::size_t gi = 0; gi < c.gates.size(); ++gi) {
    const Gate &g = c.gates[gi];
    if (g.n_wires == 2)
      uf.unite(seg.segment_of(g.wires[0], static_cast<int>(gi)),
               seg.segment_of(g.wires[1], static_cast<int>(gi)));
  }

  // Every cut must actually separate: its two adjacent segments may not end
  // up in the same fragment, otherwise the fragment would need a mid-circuit
  // measure-and-reprepare, which this scheme never emits.
  for (int w = 0; w < c.n_qubits; ++w)
    for (std::size_t s = 0; s < seg.wire_cuts[w].size(); ++s) {
      const int a = seg.seg_offset[w] + static_cast<int>(s);
      if (uf.find(a) == uf.find(a + 1))
        throw std::invalid_argument("cut does not separate the circuit");
    }

  // Group segments into fragments, deterministically ordered by smallest
  // segment id.
  std::map<int, int> root_to_fragment;
  std::vector<std::vector<int>> fragment_segments;
  for (int s = 0; s < seg.n_segments; ++s) {
    const int r = uf.find(s);
    auto it = root_to_fragment.find(r);
    if (it == root_to_fragment.end()) {
      it = root_to_fragment.emplace(r, static_cast<int>(fragment_segments.size())).first;
      fragment_segments.emplace_back();
    }
    fragment_segments[it->second].push_back(s);
  }

  std::vector<int> seg_fragment(seg.n_segments), seg_local(seg.n_segments);
  for (std::size_t fi = 0; fi < fragment_segments.size(); ++fi)
    for (std::size_t li = 0; li < fragment_segments[fi].size(); ++li) {
      seg_fragment[fragment_segments[fi][li]] = static_cast<int>(fi);
      seg_local[fragment_segments[fi][li]] = static_cast<int>(li);
    }

  plan.fragments.resize(fragment_segments.size());
  for (std::size_t fi = 0; fi < fragment_segments.size(); ++fi) {
    Fragment &f = plan.fragments[fi];
    f.circuit = Circuit(static_cast<int>(fragment_segments[fi].size()));
    f.circuit.params = c.params;
  }
  if (opts.max_fragment_width > 0)
    for (const Fragment &f : plan.fragments)
      if (f.width() > opts.max_fragment_width)
        throw std::invalid_argument("fragment exceeds the declared width limit");

  for (std::size_t gi = 0; gi < c.gates.size(); ++gi) {
    Gate g = c.gates[gi];
    const int s0 = seg.segment_of(g.wires[0], static_cast<int>(gi));
    const int fi = seg_fragment[s0];
    g.wires[0] = seg_local[s0];
    if (g.n_wires == 2) {
      const int s1 = seg.segment_of(g.wires[1], static_cast<int>(gi));
      g.wires[1] = seg_local[s1];
    }
    plan.fragments[fi].circuit.add(g);
  }

  for (int w = 0; w < c.n_qubits; ++w) {
    for (std::size_t s = 0; s < seg.wire_cuts[w].size(); ++s) {
      const int cut_index = seg.wire_cuts[w][s].second;
      const int up = seg.seg_offset[w] + static_cast<int>(s);
      const int dn = up + 1;
      plan.fragments[seg_fragment[up]].measure_stubs.emplace_back(cut_index,
                                                                  seg_local[up]);
      plan.fragments[seg_fragment[dn]].prep_stubs.emplace_back(cut_index, seg_local[dn]);
    }
    const int last = seg.last_segment(w);
    plan.fragments[seg_fragment[last]].outputs.emplace_back(seg_local[last], w);
  }
  for (Fragment &f : plan.fragments) {
    std::sort(f.measure_stubs.begin(), f.measure_stubs.end());
    std::sort(f.prep_stubs.begin(), f.prep_stubs.end());
    std::sort(f.outputs.begin(), f.outputs.end(),
              [](auto &a, auto &b) { return a.second < b.second; });
  }
  return plan;
}

/// True iff cutting here splits the circuit into fragments, each within
/// `max_fragment_width` when a limit is given.
inline bool validate_cut(const Circuit &c, const CutPoint &cut, int max_fragment_width = 0) {
  if (cut.wire < 0 || cut.wire >= c.n_qubits ||
      cut.position < -1 || cut.position >= static_cast<int>(c.gates.size()))
    throw std::invalid_argument("validate_cut: cut out of range");
  try {
    CutOptions opts;
    opts.max_fragment_width = max_fragment_width;
    decompose(c, {cut}, opts);
    return true;
  } catch (const std::invalid_argument &) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Table form of the per-variant results consumed by reconstruct: fragment
/// expectation per Pauli assignment on each of its stubs (the prep side
/// already combined by linearity). Keys: (fragment, meas codes, prep codes).
struct VariantResultTable {
  std::map<std::tuple<int, std::vector<int>, std::vector<int>>, double> values;

  void set(int fragment, std::vector<int> meas, std::vector<int> preps, double v) {
    values[{fragment, std::move(meas), std::move(preps)}] = v;
  }
  double get(int fragment, const std::vector<int> &meas,
             const std::vector<int> &preps) const {
    auto it = values.find({fragment, meas, preps});
    if (it == values.end())
      throw std::invalid_argument("reconstruct: missing variant result for fragment " +
                                  std::to_string(fragment));
    return it->second;
  }
};

namespace detail {

template <typename FragValue>
double reconstruct_fold(const ReconstructionPlan &plan, FragValue &&frag_value) {
  const int k = plan.n_cuts;
  const std::size_t n_assign = std::size_t{1} << (2 * k);
  double coeff = 1.0;
  for (int i = 0; i < k; ++i) coeff *= 0.5;
  double total = 0.0;
  std::vector<int> assign(k);
  std::vector<int> meas, preps;
  for (std::size_t code = 0; code < n_assign; ++code) {
    std::size_t rest = code;
    for (int i = 0; i < k; ++i) {
      assign[i] = static_cast<int>(rest & 3);
      rest >>= 2;
    }
    double prod = coeff;
    for (std::size_t fi = 0; fi < plan.fragments.size() && prod != 0.0; ++fi) {
      const Fragment &f = plan.fragments[fi];
      meas.clear();
      preps.clear();
      for (const auto &[ci, lw] : f.measure_stubs) meas.push_back(assign[ci]);
      for (const auto &[ci, lw] : f.prep_stubs) preps.push_back(assign[ci]);
      prod *= frag_value(static_cast<int>(fi), meas, preps);
    }
    total += prod;
  }
  return total;
}

}  // namespace detail

/// Pure fold combining fragment expectations into the uncut expectation:
/// sum over Pauli assignments of (1/2)^k times the product over fragments.
/// Order-independent in how `results` was filled.
inline double reconstruct(const ReconstructionPlan &plan, const VariantResultTable &results) {
  return detail::reconstruct_fold(
      plan, [&](int fi, const std::vector<int> &meas, const std::vector<int> &preps) {
        return results.get(fi, meas, preps);
      });
}

// ---------------------------------------------------------------------------
// Fragment execution
// ---------------------------------------------------------------------------

/// Observable restricted to one fragment: either a Pauli string on local
/// wires or the all-zeros projector over the fragment's output wires.
struct FragmentObservable {
  bool projector = false;
  std::vector<std::pair<int, char>> paulis;  // (local wire, 'X'|'Y'|'Z')

  bool trivial() const { return !projector && paulis.empty(); }
};

struct CutExecMode {
  bool exact = true;
  long long shots = 1024;
  NoiseConfig noise;
  std::uint64_t seed = 0;
};

namespace detail {

inline void prepend_prep_gates(Circuit &c, int wire, int prep) {
  // Callers build a fresh circuit, so "prepend" means emit before the body.
  switch (prep) {
    case kPrepZero: break;
    case kPrepOne: c.x(wire); break;
    case kPrepPlus: c.h(wire); break;
    case kPrepPlusI: c.h(wire); c.s(wire); break;
    default: throw std::invalid_argument("bad prep code");
  }
}

inline void append_basis_change(Circuit &c, int wire, char basis) {
  if (basis == 'X') {
    c.h(wire);
  } else if (basis == 'Y') {
    c.sdg(wire);
    c.h(wire);
  }
}

}  // namespace detail

/// Executes one fragment's variants on demand and serves the raw quantities
///   E[ (tensor of assigned Paulis on measured stubs) x obs ]
/// for a given preparation-state choice on its prepared stubs.
///
/// Exact mode runs one statevector per preparation combination and reads all
/// expectations off it. Shot mode executes one sampled circuit per
/// (measurement bases, preparations, observable basis signature) and reuses
/// Z-basis counts for identity assignments. Executions are cached; the cache
/// is invalidated by rebinding.
class FragmentExecutor {
 public:
  FragmentExecutor(const Fragment &frag, int fragment_index)
      : frag_(&frag), index_(fragment_index) {}

  /// Binds the fragment circuit to the full parameter vector of the original
  /// circuit (unused entries ignored) and drops all cached executions.
  void bind_parameters(std::span<const double> theta) {
    bound_ = dpvqd::bind(frag_->circuit, theta);
    exact_cache_.clear();
    counts_cache_.clear();
  }

  void bind_none() {
    if (frag_->circuit.has_symbols())
      throw std::invalid_argument("fragment has unbound symbols");
    bound_ = frag_->circuit;
    exact_cache_.clear();
    counts_cache_.clear();
  }

  long long shots_used() const { return shots_used_; }
  long long executions() const { return executions_; }
  void reset_usage() {
    shots_used_ = 0;
    executions_ = 0;
  }

  /// Raw fragment quantity for concrete prep states. `meas` uses Pauli codes
  /// (I means: measure in Z, ignore the outcome).
  double raw_value(std::span<const int> meas, std::span<const int> prep_states,
                   const FragmentObservable &obs, const CutExecMode &mode) {
    if (meas.size() != frag_->measure_stubs.size() ||
        prep_states.size() != frag_->prep_stubs.size())
      throw std::invalid_argument("raw_value: stub setting arity mismatch");
    return mode.exact ? raw_exact(meas, prep_states, obs)
                      : raw_shots(meas, prep_states, obs, mode);
  }

  /// Fragment expectation for a Pauli assignment on every stub: prep-side
  /// Paulis are expanded by linearity over the executed preparation states.
  double value(std::span<const int> meas, std::span<const int> prep_paulis,
               const FragmentObservable &obs, const CutExecMode &mode) {
    std::vector<int> states(prep_paulis.size());
    double total = 0.0;
    expand_preps(meas, prep_paulis, states, 0, 1.0, total, obs, mode);
    return total;
  }

  /// The circuit a shot-mode variant actually runs (also used for dumps).
  Circuit variant_circuit(std::span<const int> meas_bases,
                          std::span<const int> prep_states,
                          const FragmentObservable &obs) const {
    Circuit vc(bound_.n_qubits);
    for (std::size_t i = 0; i < frag_->prep_stubs.size(); ++i)
      detail::prepend_prep_gates(vc, frag_->prep_stubs[i].second, prep_states[i]);
    for (const Gate &g : bound_.gates) vc.add(g);
    for (std::size_t i = 0; i < frag_->measure_stubs.size(); ++i)
      detail::append_basis_change(vc, frag_->measure_stubs[i].second,
                                  pauli_letter(meas_bases[i]));
    for (const auto &[lw, p] : obs.paulis) detail::append_basis_change(vc, lw, p);
    return vc;
  }

  const Fragment &fragment() const { return *frag_; }
  int index() const { return index_; }

  /// Delta-method variance of a linear functional of this executor's counts;
  /// `weight(key, bits)` gives d(reconstruction)/d(p_bits) restricted to one
  /// executed circuit. Exposed for the estimator-variance propagation.
  template <typename WeightFn>
  double counts_variance(WeightFn &&weight) const {
    double var = 0.0;
    for (const auto &[key, counts] : counts_cache_) {
      double m1 = 0.0, m2 = 0.0;
      for (const auto &[bits, cnt] : counts.counts) {
        const double p = static_cast<double>(cnt) / counts.total;
        const double g = weight(key, bits);
        m1 += p * g;
        m2 += p * g * g;
      }
      var += (m2 - m1 * m1) / static_cast<double>(counts.total);
    }
    return var;
  }

  // Key of one executed shot-mode circuit.
  struct CountsKey {
    std::vector<int> bases;        // per measured stub, Pauli codes X/Y/Z
    std::vector<int> preps;        // per prepared stub
    std::vector<std::pair<int, char>> obs_basis;  // output-wire basis changes
    auto operator<=>(const CountsKey &) const = default;
  };

  const std::map<CountsKey, ShotCounts> &counts_cache() const { return counts_cache_; }

 private:
  void expand_preps(std::span<const int> meas, std::span<const int> prep_paulis,
                    std::vector<int> &states, std::size_t i, double w, double &total,
                    const FragmentObservable &obs, const CutExecMode &mode) {
    if (i == prep_paulis.size()) {
      total += w * raw_value(meas, states, obs, mode);
      return;
    }
    for (const auto &[state, weight] : prep_decomposition(prep_paulis[i])) {
      states[i] = state;
      expand_preps(meas, prep_paulis, states, i + 1, w * weight, total, obs, mode);
    }
  }

  double raw_exact(std::span<const int> meas, std::span<const int> prep_states,
                   const FragmentObservable &obs) {
    const std::vector<int> key(prep_states.begin(), prep_states.end());
    auto it = exact_cache_.find(key);
    if (it == exact_cache_.end()) {
      Circuit pc(bound_.n_qubits);
      for (std::size_t i = 0; i < frag_->prep_stubs.size(); ++i)
        detail::prepend_prep_gates(pc, frag_->prep_stubs[i].second, prep_states[i]);
      StateVector st = apply(StateVector(bound_.n_qubits), pc);
      st = apply(std::move(st), bound_);
      ++executions_;
      it = exact_cache_.emplace(key, std::move(st)).first;
    }
    const StateVector &state = it->second;

    // Stub Paulis for non-identity assignments.
    std::vector<std::pair<int, char>> stub_ops;
    for (std::size_t i = 0; i < meas.size(); ++i)
      if (meas[i] != kPauliI)
        stub_ops.emplace_back(frag_->measure_stubs[i].second, pauli_letter(meas[i]));

    if (!obs.projector) {
      std::vector<std::pair<int, char>> ops = stub_ops;
      ops.insert(ops.end(), obs.paulis.begin(), obs.paulis.end());
      if (ops.empty()) return 1.0;
      return expectation(state, PauliTerm(1.0, std::move(ops)));
    }
    // <psi| M (x) |0..0><0..0|_outputs |psi>: project the output wires onto
    // zero, then take the stub-Pauli expectation of the unnormalized rest.
    std::uint64_t out_mask = 0;
    for (const auto &[lw, ow] : frag_->outputs) out_mask |= (1ULL << lw);
    StateVector proj = state;
    for (std::uint64_t x = 0; x < proj.amps.size(); ++x)
      if (x & out_mask) proj.amps[x] = 0.0;
    if (stub_ops.empty()) return proj.norm_sq();
    return expectation(proj, PauliTerm(1.0, std::move(stub_ops)));
  }

  double raw_shots(std::span<const int> meas, std::span<const int> prep_states,
                   const FragmentObservable &obs, const CutExecMode &mode) {
    CountsKey key;
    key.preps.assign(prep_states.begin(), prep_states.end());
    key.bases.resize(meas.size());
    for (std::size_t i = 0; i < meas.size(); ++i)
      key.bases[i] = meas[i] == kPauliI ? kPauliZ : meas[i];
    key.obs_basis = obs.paulis;

    auto it = counts_cache_.find(key);
    if (it == counts_cache_.end()) {
      const Circuit vc = variant_circuit(key.bases, key.preps, obs);
      // The lifetime counter survives rebinds so repeated executions of the
      // same variant at new parameters draw fresh randomness.
      const std::uint64_t run_seed = derive_seed(
          mode.seed, {static_cast<std::uint64_t>(index_), lifetime_samples_++});
      ShotCounts counts =
          sample(StateVector(vc.n_qubits), mode.shots, mode.noise, vc, run_seed);
      shots_used_ += mode.shots;
      ++executions_;
      it = counts_cache_.emplace(std::move(key), std::move(counts)).first;
    }
    return counts_value(*frag_, meas, obs, it->second);
  }

 public:
  /// Value of the (stub sign) x (observable) functional on one bitstring.
  static double bit_value(const Fragment &frag, std::span<const int> meas,
                          const FragmentObservable &obs, std::uint64_t bits) {
    std::uint64_t sign_mask = 0;
    for (std::size_t i = 0; i < meas.size(); ++i)
      if (meas[i] != kPauliI) sign_mask |= (1ULL << frag.measure_stubs[i].second);
    double v = std::popcount(bits & sign_mask) & 1 ? -1.0 : 1.0;
    if (obs.projector) {
      std::uint64_t out_mask = 0;
      for (const auto &[lw, ow] : frag.outputs) out_mask |= (1ULL << lw);
      if (bits & out_mask) return 0.0;
      return v;
    }
    std::uint64_t obs_mask = 0;
    for (const auto &[lw, p] : obs.paulis) obs_mask |= (1ULL << lw);
    if (std::popcount(bits & obs_mask) & 1) v = -v;
    return v;
  }

  static double counts_value(const Fragment &frag, std::span<const int> meas,
                             const FragmentObservable &obs, const ShotCounts &counts) {
    double acc = 0.0;
    for (const auto &[bits, cnt] : counts.counts)
      acc += bit_value(frag, meas, obs, bits) * static_cast<double>(cnt);
    return acc / static_cast<double>(counts.total);
  }

 private:
  const Fragment *frag_;
  int index_;
  Circuit bound_;
  std::map<std::vector<int>, StateVector> exact_cache_;
  std::map<CountsKey, ShotCounts> counts_cache_;
  long long shots_used_ = 0;
  long long executions_ = 0;
  std::uint64_t lifetime_samples_ = 0;
};

// ---------------------------------------------------------------------------
// End-to-end evaluation
// ---------------------------------------------------------------------------

struct CutEvaluation {
  double value = 0.0;
  double variance = 0.0;  // propagated sampling variance (shot mode only)
  long long shots_used = 0;
  long long variant_executions = 0;
};

namespace detail {

inline FragmentObservable restrict_observable(const ReconstructionPlan &plan, int fi,
                                              const PauliTerm &term) {
  FragmentObservable out;
  for (const auto &[w, p] : term.ops) {
    const auto lw = plan.fragments[fi].output_local_wire(w);
    if (lw) out.paulis.emplace_back(*lw, p);
  }
  return out;
}

}  // namespace detail

/// Collects d(reconstruction)/d(raw fragment quantity) terms so the sampling
/// variance of a shot-mode reconstruction can be propagated exactly (delta
/// method per executed circuit, correlations within a circuit included).
class VarianceAccumulator {
 public:
  struct Entry {
    std::vector<int> meas;   // Pauli codes incl. I, per measured stub
    std::vector<int> preps;  // executed prep states
    FragmentObservable obs;
    double grad = 0.0;
  };

  void init(std::size_t n_fragments) { per_fragment_.assign(n_fragments, {}); }

  void add(int fragment, std::vector<int> meas, std::vector<int> preps,
           const FragmentObservable &obs, double grad) {
    per_fragment_[fragment].push_back({std::move(meas), std::move(preps), obs, grad});
  }

  /// Total variance: for each executed circuit, Var[sum_q grad_q phi_q] under
  /// its empirical multinomial.
  double finalize(const std::vector<FragmentExecutor> &execs) const {
    double var = 0.0;
    for (std::size_t fi = 0; fi < per_fragment_.size(); ++fi) {
      const auto &entries = per_fragment_[fi];
      if (entries.empty()) continue;
      // Group entries by the circuit (counts key) they read from.
      std::map<FragmentExecutor::CountsKey, std::vector<const Entry *>> groups;
      for (const Entry &e : entries) {
        FragmentExecutor::CountsKey key;
        key.preps = e.preps;
        key.bases.resize(e.meas.size());
        for (std::size_t i = 0; i < e.meas.size(); ++i)
          key.bases[i] = e.meas[i] == kPauliI ? kPauliZ : e.meas[i];
        key.obs_basis = e.obs.paulis;
        groups[std::move(key)].push_back(&e);
      }
      const auto &cache = execs[fi].counts_cache();
      const Fragment &frag = execs[fi].fragment();
      for (const auto &[key, group] : groups) {
        const auto it = cache.find(key);
        if (it == cache.end()) continue;  // exact-mode entries carry no variance
        const ShotCounts &counts = it->second;
        double m1 = 0.0, m2 = 0.0;
        for (const auto &[bits, cnt] : counts.counts) {
          double g = 0.0;
          for (const Entry *e : group)
            g += e->grad * FragmentExecutor::bit_value(frag, e->meas, e->obs, bits);
          const double p = static_cast<double>(cnt) / counts.total;
          m1 += p * g;
          m2 += p * g * g;
        }
        var += (m2 - m1 * m1) / static_cast<double>(counts.total);
      }
    }
    return var;
  }

 private:
  std::vector<std::vector<Entry>> per_fragment_;
};

/// Folds the assignment sum for one set of per-fragment observables; `scale`
/// multiplies the result (and the gradients fed to `acc`, when given).
inline double reconstruct_with_parts(const ReconstructionPlan &plan,
                                     std::vector<FragmentExecutor> &execs,
                                     const std::vector<FragmentObservable> &parts,
                                     const CutExecMode &mode, double scale,
                                     VarianceAccumulator *acc = nullptr) {
  const int k = plan.n_cuts;
  const std::size_t n_frag = plan.fragments.size();
  const std::size_t n_assign = std::size_t{1} << (2 * k);
  double half_k = 1.0;
  for (int i = 0; i < k; ++i) half_k *= 0.5;

  double total = 0.0;
  std::vector<int> assign(k);
  std::vector<double> vals(n_frag), prefix(n_frag + 1), suffix(n_frag + 1);
  std::vector<std::vector<int>> meas(n_frag), preps(n_frag);

  for (std::size_t code = 0; code < n_assign; ++code) {
    std::size_t rest = code;
    for (int i = 0; i < k; ++i) {
      assign[i] = static_cast<int>(rest & 3);
      rest >>= 2;
    }
    for (std::size_t fi = 0; fi < n_frag; ++fi) {
      const Fragment &f = plan.fragments[fi];
      meas[fi].clear();
      preps[fi].clear();
      for (const auto &[ci, lw] : f.measure_stubs) meas[fi].push_back(assign[ci]);
      for (const auto &[ci, lw] : f.prep_stubs) preps[fi].push_back(assign[ci]);
      vals[fi] = execs[fi].value(meas[fi], preps[fi], parts[fi], mode);
    }
    prefix[0] = 1.0;
    for (std::size_t fi = 0; fi < n_frag; ++fi) prefix[fi + 1] = prefix[fi] * vals[fi];
    suffix[n_frag] = 1.0;
    for (std::size_t fi = n_frag; fi-- > 0;) suffix[fi] = suffix[fi + 1] * vals[fi];
    total += half_k * prefix[n_frag];

    if (acc) {
      for (std::size_t fi = 0; fi < n_frag; ++fi) {
        const double others = prefix[fi] * suffix[fi + 1];
        if (others == 0.0) continue;
        // Expand the prep-side linearity to reach raw quantities.
        std::vector<int> states(preps[fi].size());
        const std::function<void(std::size_t, double)> walk = [&](std::size_t i,
                                                                  double w) {
          if (i == states.size()) {
            acc->add(static_cast<int>(fi), meas[fi], states, parts[fi],
                     scale * half_k * others * w);
            return;
          }
          for (const auto &[state, weight] : prep_decomposition(preps[fi][i])) {
            states[i] = state;
            walk(i + 1, w * weight);
          }
        };
        walk(0, 1.0);
      }
    }
  }
  return scale * total;
}

/// Runs decompose, executes every needed fragment variant (exactly or with
/// shots), and reconstructs <obs> of the uncut circuit. The circuit must be
/// fully bound.
inline CutEvaluation evaluate_cut_expectation(const Circuit &c,
                                              std::vector<CutPoint> cuts,
                                              const Hamiltonian &obs,
                                              const CutExecMode &mode,
                                              const CutOptions &opts = {}) {
  if (obs.n_qubits != c.n_qubits)
    throw std::invalid_argument("evaluate_cut_expectation: observable width mismatch");
  const ReconstructionPlan plan = decompose(c, std::move(cuts), opts);
  std::vector<FragmentExecutor> execs;
  execs.reserve(plan.fragments.size());
  for (std::size_t fi = 0; fi < plan.fragments.size(); ++fi)
    execs.emplace_back(plan.fragments[fi], static_cast<int>(fi));
  for (auto &e : execs) e.bind_none();

  VarianceAccumulator acc;
  acc.init(plan.fragments.size());
  CutEvaluation out;
  for (const PauliTerm &term : obs.terms) {
    std::vector<FragmentObservable> parts;
    parts.reserve(plan.fragments.size());
    for (std::size_t fi = 0; fi < plan.fragments.size(); ++fi)
      parts.push_back(detail::restrict_observable(plan, static_cast<int>(fi), term));
    out.value += reconstruct_with_parts(plan, execs, parts, mode, term.coeff,
                                        mode.exact ? nullptr : &acc);
  }
  if (!mode.exact) out.variance = acc.finalize(execs);
  for (const auto &e : execs) {
    out.shots_used += e.shots_used();
    out.variant_executions += e.executions();
  }
  return out;
}

/// Concrete executed-circuit settings for one fragment (demo / dump surface).
struct FragmentVariant {
  int fragment_id = 0;
  std::vector<int> meas_bases;   // Pauli codes X/Y/Z per measured stub
  std::vector<int> prep_states;  // per prepared stub
  Circuit circuit;
};

/// All shot-mode circuit variants of a plan (without observable basis
/// changes). Requires a bound circuit.
inline std::vector<FragmentVariant> enumerate_variants(const ReconstructionPlan &plan) {
  std::vector<FragmentVariant> out;
  for (std::size_t fi = 0; fi < plan.fragments.size(); ++fi) {
    const Fragment &f = plan.fragments[fi];
    FragmentExecutor exec(f, static_cast<int>(fi));
    exec.bind_none();
    const std::size_t m = f.measure_stubs.size(), p = f.prep_stubs.size();
    std::size_t n_bases = 1, n_preps = 1;
    for (std::size_t i = 0; i < m; ++i) n_bases *= 3;
    for (std::size_t i = 0; i < p; ++i) n_preps *= 4;
    for (std::size_t bc = 0; bc < n_bases; ++bc) {
      std::vector<int> bases(m);
      std::size_t r = bc;
      for (std::size_t i = 0; i < m; ++i) {
        bases[i] = static_cast<int>(r % 3) + 1;  // X, Y, Z codes
        r /= 3;
      }
      for (std::size_t pc = 0; pc < n_preps; ++pc) {
        std::vector<int> preps(p);
        std::size_t q = pc;
        for (std::size_t i = 0; i < p; ++i) {
          preps[i] = static_cast<int>(q % 4);
          q /= 4;
        }
        out.push_back({static_cast<int>(fi), bases, preps,
                       exec.variant_circuit(bases, preps, {})});
      }
    }
  }
  return out;
}

}  // namespace dpvqd
