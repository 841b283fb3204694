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

// Projected variational dynamics. Each Trotter step (or each factorizable
// slice of it, in the distributed variant) is absorbed into a fixed-depth
// parametrized circuit by maximizing the compute-uncompute fidelity
//   |<0| V(theta)^dag T_gamma V(theta_prev) |0>|^2 ,
// minimized here as loss = 1 - fidelity estimate. The slice and both ansatz
// copies factor at a common wire boundary, so the loss circuit executes under
// wire cutting with exactly two cuts.

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpvqd/ansatz.hpp"
#include "dpvqd/circuit.hpp"
#include "dpvqd/cutting.hpp"
#include "dpvqd/hamiltonians.hpp"
#include "dpvqd/nft.hpp"
#include "dpvqd/rng.hpp"
#include "dpvqd/sampling.hpp"
#include "dpvqd/statevector.hpp"

namespace dpvqd {

enum class LossMode { Auto, Global, Local };
enum class Execution { Uncut, Cut };
enum class ObservableEval { Exact, Cut };

struct TrainConfig {
  long long shots_per_circuit = 1024;
  int max_sweeps = 50;
  int reset_interval = 1;
  double plateau_tol = 1e-3;
  LossMode loss_mode = LossMode::Auto;
  Execution execution = Execution::Cut;
  bool shot_mode = false;  // false: exact expectations, no sampling
  NoiseConfig noise;
  std::uint64_t seed = 1;
  // In exact cut mode, additionally evaluate every loss uncut and require
  // agreement to 1e-10.
  bool verify_cut_consistency = true;

  LossMode resolved_loss_mode(int n_qubits) const {
    if (loss_mode != LossMode::Auto) return loss_mode;
    return n_qubits <= 8 ? LossMode::Global : LossMode::Local;
  }

  void validate() const {
    noise.validate();
    if (shot_mode && shots_per_circuit <= 0)
      throw std::invalid_argument("train: shots_per_circuit must be positive");
    if (max_sweeps < 1) throw std::invalid_argument("train: max_sweeps must be >= 1");
    if (plateau_tol <= 0) throw std::invalid_argument("train: plateau_tol must be > 0");
  }
};

struct TrainRecordRow {
  int step = 0;
  int sub_iteration = 0;
  int boundary = -1;
  double final_infidelity = 0.0;
  int sweeps = 0;
  long long loss_evaluations = 0;
  long long shots_this = 0;
  long long shots_cumulative = 0;
  long long variant_executions = 0;
  long long naive_variant_executions = 0;
  std::vector<double> theta;
};

/// X-gate preparation circuit for a product state given wire-0-first bits.
inline Circuit bitstring_prep(int n, const std::string &bits) {
  if (static_cast<int>(bits.size()) != n)
    throw std::invalid_argument("bitstring_prep: length mismatch");
  Circuit c(n);
  for (int w = 0; w < n; ++w) {
    if (bits[w] == '1') c.x(w);
    else if (bits[w] != '0') throw std::invalid_argument("bitstring_prep: bad bit");
  }
  return c;
}

/// Compute-uncompute loss circuit: prev, then the slice, then the adjoint of
/// the (symbolic) ansatz. Only ansatz symbols survive.
inline Circuit build_loss_circuit(const Circuit &prev, const Circuit &slice,
                                  const Circuit &ansatz) {
  if (prev.has_symbols())
    throw std::invalid_argument("loss circuit: previous-state circuit must be bound");
  if (slice.has_symbols())
    throw std::invalid_argument("loss circuit: slice must be bound");
  return compose(compose(prev, slice), adjoint(ansatz));
}

struct LossCircuit {
  Circuit circuit;
  std::vector<CutPoint> cuts;  // empty for uncut execution
  int boundary = -1;
};

namespace detail {

inline int boundary_crossing_count(const Circuit &c, int b) {
  int count = 0;
  for (const Gate &g : c.gates)
    if (g.n_wires == 2 && (g.wires[0] < b) != (g.wires[1] < b)) ++count;
  return count;
}

}  // namespace detail

/// Loss circuit plus the cut points that split it at `boundary`.
///
/// All cutting happens on the stub wire b. Walking its gates, two-qubit gates
/// reaching above the boundary and those reaching below form alternating
/// runs; one cut per run transition detaches each run onto its own wire
/// segment. Same-boundary sub-iterations yield the canonical two cuts (after
/// prev's crossing, before the adjoint's); when the previous ansatz was built
/// for the adjacent boundary its own crossing CNOT(b -> b+1) leads the wire
/// and a third cut is needed. In that case cutting wire b+1 right after the
/// leading CNOT instead of fencing it on wire b is tried too, and whichever
/// placement keeps the widest fragment smallest wins.
inline LossCircuit build_cut_loss_circuit(const Circuit &prev, const Circuit &slice,
                                          int boundary, const Circuit &ansatz) {
  if (!factor_boundary(slice, boundary))
    throw std::invalid_argument(
        "cut loss: slice does not factorize at the requested boundary");
  if (!unique_boundary_crossing(ansatz, boundary))
    throw std::invalid_argument(
        "cut loss: ansatz must cross the boundary exactly once (single-layer "
        "blocks); it does not");

  LossCircuit out;
  out.boundary = boundary;
  out.circuit = build_loss_circuit(prev, slice, ansatz);
  const int b = boundary;
  const int prev_size = static_cast<int>(prev.gates.size());

  // Alternating above/below runs of two-qubit gates on wire b.
  struct RunGate {
    int index;
    bool upper;  // partner wire < b
    int partner;
  };
  std::vector<RunGate> tagged;
  for (std::size_t i = 0; i < out.circuit.gates.size(); ++i) {
    const Gate &g = out.circuit.gates[i];
    if (g.n_wires != 2) continue;
    if (g.wires[0] != b && g.wires[1] != b) continue;
    const int partner = g.wires[0] == b ? g.wires[1] : g.wires[0];
    tagged.push_back({static_cast<int>(i), partner < b, partner});
  }
  if (tagged.empty() || !tagged.back().upper)
    throw std::invalid_argument("cut loss: no adjoint-side boundary crossing found");

  std::vector<CutPoint> cuts;
  for (std::size_t i = 1; i < tagged.size(); ++i)
    if (tagged[i].upper != tagged[i - 1].upper) cuts.push_back({b, tagged[i].index - 1});
  // A cut always separates prev from the slice, so the previous state is
  // severed even when it is a crossing-free preparation circuit.
  bool have_prev_cut = false;
  for (const auto &c : cuts) have_prev_cut |= c.position < prev_size;
  bool prev_has_tagged = !tagged.empty() && tagged.front().index < prev_size;
  if (!have_prev_cut && !prev_has_tagged) cuts.push_back({b, prev_size - 1});
  std::sort(cuts.begin(), cuts.end(),
            [](const CutPoint &a, const CutPoint &c) { return a.position < c.position; });

  auto max_width = [&](const std::vector<CutPoint> &cs) {
    CutOptions opts;
    opts.k_max = static_cast<int>(cs.size());
    const ReconstructionPlan plan = decompose(out.circuit, cs, opts);
    int w = 0;
    for (const auto &f : plan.fragments) w = std::max(w, f.width());
    return w;
  };

  // Leading below-run of a single CNOT(b, b+1): try detaching it through its
  // partner wire instead.
  if (cuts.size() >= 3 && !tagged.front().upper && tagged.front().partner == b + 1 &&
      (tagged.size() < 2 || tagged[1].upper)) {
    std::vector<CutPoint> alt(cuts.begin() + 1, cuts.end());
    alt.insert(alt.begin(), {b + 1, tagged.front().index});
    if (max_width(alt) < max_width(cuts)) cuts = std::move(alt);
  }
  out.cuts = std::move(cuts);
  return out;
}

// ---------------------------------------------------------------------------
// Fragmented loss implementation
// ---------------------------------------------------------------------------

/// Compute-uncompute infidelity of one sub-iteration, with the cut path
/// caching fragment results: rebinding only touches fragments whose own
/// parameters changed, so a single-parameter shift re-executes one fragment.
class CompressionLoss final : public FragmentedLoss {
 public:
  CompressionLoss(LossCircuit lc, const TrainConfig &cfg, std::vector<double> theta0,
                  std::uint64_t seed)
      : lc_(std::move(lc)), cfg_(cfg), theta_(std::move(theta0)), seed_(seed) {
    cfg_.validate();
    if (theta_.size() != lc_.circuit.params.size())
      throw std::invalid_argument("loss: theta size mismatch");
    mode_ = cfg_.resolved_loss_mode(lc_.circuit.n_qubits);
    if (!lc_.cuts.empty()) {
      plan_ = decompose(lc_.circuit, lc_.cuts);
      for (std::size_t fi = 0; fi < plan_->fragments.size(); ++fi)
        execs_.emplace_back(plan_->fragments[fi], static_cast<int>(fi));
      bound_sig_.resize(execs_.size());
      frag_symbols_.resize(execs_.size());
      for (std::size_t fi = 0; fi < execs_.size(); ++fi) {
        std::vector<bool> seen(theta_.size(), false);
        for (const Gate &g : plan_->fragments[fi].circuit.gates)
          if (g.param.is_symbolic()) seen[g.param.symbol] = true;
        for (std::size_t s = 0; s < seen.size(); ++s)
          if (seen[s]) frag_symbols_[fi].push_back(static_cast<int>(s));
      }
      // Global loss across the cuts: the all-zeros projector factorizes into
      // per-fragment projectors over each fragment's output wires.
      projector_parts_.assign(plan_->fragments.size(), FragmentObservable{});
      for (auto &part : projector_parts_) part.projector = true;
    }
  }

  int dimension() const override { return static_cast<int>(theta_.size()); }
  std::vector<double> parameters() const override { return theta_; }
  void commit(int index, double value) override { theta_.at(index) = value; }

  double evaluate() override { return evaluate_at(-1, 0.0); }
  double evaluate_shifted(int index, double value) override {
    return evaluate_at(index, value);
  }

  long long shots_used() const {
    long long s = uncut_shots_;
    for (const auto &e : execs_) s += e.shots_used();
    return s;
  }
  long long variant_executions() const {
    long long n = uncut_executions_;
    for (const auto &e : execs_) n += e.executions();
    return n;
  }
  long long naive_variant_executions() const { return naive_executions_; }
  long long evaluations() const { return evaluations_; }

 private:
  double evaluate_at(int shifted, double value) {
    ++evaluations_;
    std::vector<double> theta = theta_;
    if (shifted >= 0) theta.at(shifted) = value;
    double loss;
    if (lc_.cuts.empty()) {
      loss = uncut_loss(theta);
      naive_executions_ += 1;
    } else {
      loss = cut_loss(theta);
      naive_executions_ += cold_execution_count();
      if (!cfg_.shot_mode && cfg_.verify_cut_consistency) {
        const double reference = uncut_exact_loss(theta);
        if (std::abs(loss - reference) > 1e-10)
          throw std::runtime_error(
              "cut/uncut loss mismatch beyond 1e-10: " + std::to_string(loss) +
              " vs " + std::to_string(reference));
      }
    }
    return loss;
  }

  double uncut_exact_loss(std::span<const double> theta) const {
    const StateVector st = apply(StateVector(lc_.circuit.n_qubits), dpvqd::bind(lc_.circuit, theta));
    if (mode_ == LossMode::Global) return 1.0 - all_zeros_probability(st);
    const auto probs = local_return_probabilities(st);
    double mean = 0;
    for (double p : probs) mean += p;
    return 1.0 - mean / static_cast<double>(probs.size());
  }

  double uncut_loss(std::span<const double> theta) {
    if (!cfg_.shot_mode) {
      ++uncut_executions_;
      return uncut_exact_loss(theta);
    }
    const Circuit bound = dpvqd::bind(lc_.circuit, theta);
    const ShotCounts counts =
        sample(StateVector(bound.n_qubits), cfg_.shots_per_circuit, cfg_.noise, bound,
               derive_seed(seed_, {0x0ffcu, sample_counter_++}));
    uncut_shots_ += cfg_.shots_per_circuit;
    ++uncut_executions_;
    if (mode_ == LossMode::Global) return 1.0 - counts.fraction_equal(0);
    double mean = 0;
    for (int q = 0; q < bound.n_qubits; ++q) {
      double zero = 0;
      for (const auto &[bits, c] : counts.counts)
        if (!(bits & (1ULL << q))) zero += static_cast<double>(c);
      mean += zero / static_cast<double>(counts.total);
    }
    return 1.0 - mean / bound.n_qubits;
  }

  long long cold_execution_count() {
    if (cold_count_ < 0) return 0;  // not yet known; patched on first eval
    return cold_count_;
  }

  double cut_loss(const std::vector<double> &theta) {
    // Rebind only fragments whose own parameters moved.
    for (std::size_t fi = 0; fi < execs_.size(); ++fi) {
      std::vector<double> sig;
      sig.reserve(frag_symbols_[fi].size());
      for (int s : frag_symbols_[fi]) sig.push_back(theta[s]);
      if (!bound_sig_[fi] || *bound_sig_[fi] != sig) {
        execs_[fi].bind_parameters(theta);
        bound_sig_[fi] = std::move(sig);
      }
    }
    CutExecMode mode;
    mode.exact = !cfg_.shot_mode;
    mode.shots = cfg_.shots_per_circuit;
    mode.noise = cfg_.noise;
    mode.seed = seed_;

    const long long before = variant_executions();
    double loss;
    if (mode_ == LossMode::Global) {
      loss = 1.0 - reconstruct_with_parts(*plan_, execs_, projector_parts_, mode, 1.0);
    } else {
      const int n = lc_.circuit.n_qubits;
      double zsum = 0;
      for (int q = 0; q < n; ++q) {
        std::vector<FragmentObservable> parts(plan_->fragments.size());
        for (std::size_t fi = 0; fi < plan_->fragments.size(); ++fi) {
          const auto lw = plan_->fragments[fi].output_local_wire(q);
          if (lw) parts[fi].paulis.emplace_back(*lw, 'Z');
        }
        zsum += reconstruct_with_parts(*plan_, execs_, parts, mode, 1.0);
      }
      loss = 1.0 - (0.5 + zsum / (2.0 * n));
    }
    if (cold_count_ < 0) cold_count_ = variant_executions() - before;
    return loss;
  }

  LossCircuit lc_;
  TrainConfig cfg_;
  LossMode mode_ = LossMode::Global;
  std::vector<double> theta_;
  std::uint64_t seed_;
  std::uint64_t sample_counter_ = 0;

  std::optional<ReconstructionPlan> plan_;
  std::vector<FragmentExecutor> execs_;
  std::vector<std::optional<std::vector<double>>> bound_sig_;
  std::vector<std::vector<int>> frag_symbols_;
  std::vector<FragmentObservable> projector_parts_;

  long long uncut_shots_ = 0;
  long long uncut_executions_ = 0;
  long long naive_executions_ = 0;
  long long evaluations_ = 0;
  long long cold_count_ = -1;
};

// ---------------------------------------------------------------------------
// Sub-iteration and the outer loop
// ---------------------------------------------------------------------------

struct SubstepResult {
  std::vector<double> theta;
  TrainRecordRow row;
};

/// One p-VQD sub-iteration: absorbs `slice` applied to prev's state into the
/// ansatz, warm-started from theta_init.
inline SubstepResult pvqd_substep(const Circuit &prev, const Circuit &slice,
                                  int boundary, const BuiltAnsatz &ansatz,
                                  std::vector<double> theta_init, const TrainConfig &cfg,
                                  std::uint64_t substep_seed) {
  cfg.validate();
  LossCircuit lc;
  if (cfg.execution == Execution::Cut) {
    if (ansatz.spec.cut_boundary != boundary)
      throw std::invalid_argument(
          "pvqd_substep: slice boundary " + std::to_string(boundary) +
          " does not match the ansatz boundary " +
          std::to_string(ansatz.spec.cut_boundary) + "; refusing to add cuts");
    lc = build_cut_loss_circuit(prev, slice, boundary, ansatz.circuit);
  } else {
    lc.circuit = build_loss_circuit(prev, slice, ansatz.circuit);
    lc.boundary = boundary;
  }

  CompressionLoss loss(std::move(lc), cfg, std::move(theta_init), substep_seed);
  NftConfig nft;
  nft.sweeps = cfg.max_sweeps;
  nft.reset_interval = cfg.reset_interval;
  nft.plateau_tol = cfg.plateau_tol;
  const NftResult res = nft_minimize(loss, nft);

  SubstepResult out;
  out.theta = res.best_theta;
  out.row.boundary = boundary;
  out.row.final_infidelity = res.best_loss;
  out.row.sweeps = res.sweeps_used;
  out.row.loss_evaluations = res.loss_evaluations;
  out.row.shots_this = loss.shots_used();
  out.row.variant_executions = loss.variant_executions();
  out.row.naive_variant_executions = loss.naive_variant_executions();
  out.row.theta = res.best_theta;
  return out;
}

struct RunObservable {
  std::string name;
  Hamiltonian op;
};

struct DpvqdResult {
  // series[step][observable]; step 0 is the initial state.
  std::vector<std::vector<double>> series;
  std::vector<TrainRecordRow> records;
  std::vector<long long> shots_after_step;  // cumulative, including observables
  std::vector<double> loss_final_per_step;  // last sub-iteration of each step
};

/// The outer dp-VQD loop. Per step k and slice gamma, the previous state is
/// psi0 at (1,1), V(theta_{k-1}^Gamma) at (k,1), and V(theta_k^{gamma-1})
/// inside a step; each boundary keeps its own warm-started parameter vector.
/// After every full step the requested observables are evaluated on the
/// trained circuit.
inline DpvqdResult dpvqd_run(const TrotterSlices &slices, const Circuit &psi0_prep,
                             const std::map<int, BuiltAnsatz> &ansaetze, int n_steps,
                             const TrainConfig &cfg,
                             const std::vector<RunObservable> &observables,
                             ObservableEval obs_eval = ObservableEval::Exact) {
  cfg.validate();
  if (slices.slices.empty()) throw std::invalid_argument("dpvqd_run: no slices");
  const int n = psi0_prep.n_qubits;
  for (const auto &sl : slices.slices) {
    if (sl.circuit.n_qubits != n)
      throw std::invalid_argument("dpvqd_run: slice width mismatch");
    if (!ansaetze.count(sl.boundary))
      throw std::invalid_argument("dpvqd_run: no ansatz for boundary " +
                                  std::to_string(sl.boundary));
  }

  // Random initialization per distinct boundary; later sub-iterations warm
  // start from the same boundary's previous optimum.
  std::map<int, std::vector<double>> theta;
  for (const auto &[b, ans] : ansaetze) {
    Rng rng(derive_seed(cfg.seed, {0x1717, static_cast<std::uint64_t>(b)}));
    std::vector<double> t(ans.spec.parameter_count);
    for (auto &v : t) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    theta[b] = std::move(t);
  }

  DpvqdResult out;
  long long total_shots = 0;

  auto eval_observables = [&](const Circuit &state_circuit,
                              const std::optional<int> crossing_stub) {
    std::vector<double> row;
    row.reserve(observables.size());
    for (const auto &obs : observables) {
      if (obs_eval == ObservableEval::Exact || !crossing_stub) {
        const StateVector st = apply(StateVector(n), state_circuit);
        row.push_back(expectation(st, obs.op));
      } else {
        CutExecMode mode;
        mode.exact = !cfg.shot_mode;
        mode.shots = cfg.shots_per_circuit;
        mode.noise = cfg.noise;
        mode.seed = derive_seed(cfg.seed, {0x0b5e7, static_cast<std::uint64_t>(out.series.size()),
                                           static_cast<std::uint64_t>(row.size())});
        const auto crossing = unique_boundary_crossing(state_circuit, *crossing_stub);
        if (!crossing) throw std::invalid_argument("observable cut: no unique crossing");
        const CutEvaluation ev = evaluate_cut_expectation(
            state_circuit, {{*crossing_stub, *crossing}}, obs.op, mode);
        total_shots += ev.shots_used;
        row.push_back(ev.value);
      }
    }
    out.series.push_back(std::move(row));
    out.shots_after_step.push_back(total_shots);
  };

  eval_observables(psi0_prep, std::nullopt);
  out.loss_final_per_step.push_back(0.0);

  const int gamma_count = static_cast<int>(slices.slices.size());
  Circuit prev = psi0_prep;
  int last_boundary = -1;
  for (int k = 1; k <= n_steps; ++k) {
    double step_loss = 0.0;
    for (int gamma = 1; gamma <= gamma_count; ++gamma) {
      const TrotterSlice &sl = slices.slices[gamma - 1];
      const BuiltAnsatz &ans = ansaetze.at(sl.boundary);
      SubstepResult res = pvqd_substep(
          prev, sl.circuit, sl.boundary, ans, theta.at(sl.boundary), cfg,
          derive_seed(cfg.seed, {static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(gamma)}));
      theta[sl.boundary] = res.theta;
      prev = dpvqd::bind(ans.circuit, res.theta);
      last_boundary = sl.boundary;
      total_shots += res.row.shots_this;
      res.row.step = k;
      res.row.sub_iteration = gamma;
      res.row.shots_cumulative = total_shots;
      step_loss = res.row.final_infidelity;
      out.records.push_back(std::move(res.row));
    }
    eval_observables(prev, cfg.execution == Execution::Cut
                               ? std::optional<int>(last_boundary)
                               : std::nullopt);
    out.loss_final_per_step.push_back(step_loss);
  }
  return out;
}

/// Undistributed baseline: one sub-iteration absorbing the full Trotter step,
/// executed uncut.
inline DpvqdResult pvqd_run(const Circuit &full_step, const Circuit &psi0_prep,
                            const BuiltAnsatz &ansatz, int n_steps, TrainConfig cfg,
                            const std::vector<RunObservable> &observables,
                            ObservableEval obs_eval = ObservableEval::Exact) {
  cfg.execution = Execution::Uncut;
  TrotterSlices single;
  single.slices.push_back({full_step, ansatz.spec.cut_boundary});
  std::map<int, BuiltAnsatz> ansaetze{{ansatz.spec.cut_boundary, ansatz}};
  return dpvqd_run(single, psi0_prep, ansaetze, n_steps, cfg, observables, obs_eval);
}

}  // namespace dpvqd
