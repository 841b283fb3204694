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

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>

#include "dpvqd/statevector.hpp"

namespace dpvqd {

/// Dense unitary of a bound circuit, little-endian (wire 0 least
/// significant). Intended for small widths; the guard keeps accidental
/// exponential blowups out of production paths.
inline Eigen::MatrixXcd unitary_of(const Circuit &c) {
  if (c.n_qubits > 10)
    throw std::invalid_argument("unitary_of: supported only for n <= 10");
  if (c.has_symbols())
    throw std::invalid_argument("unitary_of: circuit has unbound symbols");
  const std::size_t dim = std::size_t{1} << c.n_qubits;
  Eigen::MatrixXcd u(dim, dim);
  for (std::size_t col = 0; col < dim; ++col) {
    StateVector s(c.n_qubits);
    s.amps[0] = 0.0;
    s.amps[col] = 1.0;
    s = apply(std::move(s), c);
    for (std::size_t row = 0; row < dim; ++row) u(row, col) = s.amps[row];
  }
  return u;
}

/// Largest entrywise |a - phase * b| after aligning b's global phase to a.
/// Returns infinity if b is numerically zero where a is not.
inline double phase_aligned_distance(const Eigen::MatrixXcd &a, const Eigen::MatrixXcd &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("phase_aligned_distance: shape mismatch");
  Eigen::Index r = 0, cidx = 0;
  a.cwiseAbs().maxCoeff(&r, &cidx);
  const cxd pivot_a = a(r, cidx);
  const cxd pivot_b = b(r, cidx);
  if (std::abs(pivot_b) < 1e-300) return std::numeric_limits<double>::infinity();
  const cxd phase = (pivot_a / pivot_b) / std::abs(pivot_a / pivot_b);
  return (a - phase * b).cwiseAbs().maxCoeff();
}

}  // namespace dpvqd
