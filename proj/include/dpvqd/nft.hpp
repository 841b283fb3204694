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

// Sequential gradient-free optimizer for losses built from exp(-i phi P / 2)
// rotations. With every other parameter held fixed such a loss is exactly
// a cos(phi - b) + c with period 2pi, so three samples determine the global
// 1-D minimum in closed form. Each update spends two loss evaluations (the
// current value is reused as the third sample point); when the loss is
// fragmented by wire cutting, only the fragment containing the touched
// parameter re-executes.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace dpvqd {

/// Loss backing the optimizer. `evaluate_shifted` must honor the caching
/// contract: only fragments containing the shifted parameter's gate may need
/// re-execution; in exact mode evaluate_shifted(i, theta_i) equals
/// evaluate(theta) exactly.
class FragmentedLoss {
 public:
  virtual ~FragmentedLoss() = default;
  virtual int dimension() const = 0;
  /// Full evaluation at the committed parameter vector.
  virtual double evaluate() = 0;
  /// Evaluation with parameter `index` overridden to `value` (not committed).
  virtual double evaluate_shifted(int index, double value) = 0;
  /// Commits a new value for one parameter (no evaluation implied).
  virtual void commit(int index, double value) = 0;
  virtual std::vector<double> parameters() const = 0;
};

struct NftConfig {
  int sweeps = 50;          // max full passes over the parameters
  int reset_interval = 1;   // sweeps between full loss re-anchors
  double plateau_tol = 1e-3;  // stop when a sweep improves best loss by less
  double degenerate_tol = 1e-12;

  void validate() const {
    if (sweeps < 1) throw std::invalid_argument("nft: sweeps must be >= 1");
    if (reset_interval < 1) throw std::invalid_argument("nft: reset_interval must be >= 1");
    if (plateau_tol <= 0) throw std::invalid_argument("nft: plateau_tol must be positive");
  }
};

struct NftUpdateResult {
  double new_value = 0.0;   // chosen parameter value
  double new_loss = 0.0;    // model value at the minimum
  bool degenerate = false;  // flat direction, parameter left unchanged
};

namespace detail {

inline double wrap_angle(double a) {
  const double two_pi = 2 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

}  // namespace detail

/// One closed-form parameter update. Samples the loss at theta_i +- pi/2,
/// fits a cos(theta_i - b) + c through them and `current_loss`, and moves to
/// the cosine minimum b + pi. Flat fits (a below tolerance) leave the
/// parameter unchanged.
inline NftUpdateResult nft_update(FragmentedLoss &loss, int index, double theta_i,
                                  double current_loss, double degenerate_tol = 1e-12) {
  const double half_pi = std::numbers::pi / 2;
  const double z_plus = loss.evaluate_shifted(index, theta_i + half_pi);
  const double z_minus = loss.evaluate_shifted(index, theta_i - half_pi);
  const double c = 0.5 * (z_plus + z_minus);
  const double a_cos = current_loss - c;          // a cos(theta_i - b)
  const double a_sin = 0.5 * (z_minus - z_plus);  // a sin(theta_i - b)
  const double a = std::hypot(a_cos, a_sin);
  if (a < degenerate_tol)
    return {theta_i, current_loss, true};
  const double b = theta_i - std::atan2(a_sin, a_cos);
  NftUpdateResult r;
  r.new_value = detail::wrap_angle(b + std::numbers::pi);
  r.new_loss = c - a;
  loss.commit(index, r.new_value);
  return r;
}

struct NftResult {
  std::vector<double> best_theta;
  double best_loss = 0.0;
  int sweeps_used = 0;
  long long loss_evaluations = 0;  // full-loss equivalents issued
};

/// Sweeps nft_update over the parameters in index order until the best loss
/// plateaus or the sweep budget runs out. The loss is re-anchored by a full
/// evaluation every `reset_interval` sweeps; best-seen parameters are tracked
/// against re-anchored (not model-predicted) values, which keeps shot noise
/// from promoting fit artifacts.
inline NftResult nft_minimize(FragmentedLoss &loss, const NftConfig &cfg) {
  cfg.validate();
  const int d = loss.dimension();
  NftResult out;
  double current = loss.evaluate();
  ++out.loss_evaluations;
  out.best_theta = loss.parameters();
  out.best_loss = current;

  std::vector<double> theta = loss.parameters();
  double last_anchor_best = out.best_loss;
  bool anchored = true;
  for (int sweep = 1; sweep <= cfg.sweeps; ++sweep) {
    for (int i = 0; i < d; ++i) {
      const NftUpdateResult r =
          nft_update(loss, i, theta[i], current, cfg.degenerate_tol);
      out.loss_evaluations += 2;
      theta[i] = r.new_value;
      current = r.new_loss;
    }
    out.sweeps_used = sweep;
    anchored = sweep % cfg.reset_interval == 0;
    if (anchored) {
      current = loss.evaluate();
      ++out.loss_evaluations;
      if (current < out.best_loss) {
        out.best_loss = current;
        out.best_theta = theta;
      }
      if (last_anchor_best - out.best_loss < cfg.plateau_tol) break;
      last_anchor_best = out.best_loss;
    }
  }
  if (!anchored) {
    const double final_loss = loss.evaluate();
    ++out.loss_evaluations;
    if (final_loss < out.best_loss) {
      out.best_loss = final_loss;
      out.best_theta = theta;
    }
  }
  return out;
}

}  // namespace dpvqd
