/*
 * Copyright 2026 The rmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rmamba/tensor.hpp"

namespace rmamba {

/// Map h -> a * h + b. Composition of such maps is associative, which is what
/// lets the linear recurrence h_t = a_t h_{t-1} + b_t be evaluated as a prefix
/// scan.
template <typename T>
struct AffineStep {
  T a{1};
  T b{0};
};

/// Apply `earlier`, then `later`.
template <typename T>
constexpr AffineStep<T> combine(const AffineStep<T>& earlier, const AffineStep<T>& later) {
  return {earlier.a * later.a, later.a * earlier.b + later.b};
}

/// Work-efficient (up-sweep / down-sweep) inclusive prefix scan, in place.
/// `op` must be associative with `identity` as its neutral element. Every
/// level of the tree is a set of independent combines.
template <typename T, typename Op>
void tree_inclusive_scan(std::span<T> values, Op op, const T& identity) {
  const std::size_t n = values.size();
  if (n <= 1) return;
  std::size_t padded = 1;
  while (padded < n) padded <<= 1;
  std::vector<T> tree(padded, identity);
  for (std::size_t i = 0; i < n; ++i) tree[i] = values[i];

  for (std::size_t stride = 1; stride < padded; stride <<= 1) {
    for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
      tree[i] = op(tree[i - stride], tree[i]);
    }
  }
  tree[padded - 1] = identity;
  for (std::size_t stride = padded >> 1; stride >= 1; stride >>= 1) {
    for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
      const T left = tree[i - stride];
      tree[i - stride] = tree[i];
      tree[i] = op(tree[i], left);
    }
  }
  // tree now holds the exclusive scan.
  for (std::size_t i = 0; i < n; ++i) values[i] = op(tree[i], values[i]);
}

/// Runs fn(i) for i in [begin, end) on up to scan_threads() workers. Work
/// items must be independent; results do not depend on the thread count.
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end,
                  const std::function<void(std::ptrdiff_t)>& fn);
void set_scan_threads(int threads);
int scan_threads();

enum class ScanAlgorithm { Sequential, Parallel };

/// Selective state-space scan with diagonal A.
///
///   h_t = exp(delta_t * A) * h_{t-1} + delta_t * B_t * u_t,   h_0 = 0
///   y_t = <C_t, h_t> + D * u_t
///
/// Shapes: u, delta [N, Din, L]; A [Din, S]; B, C [N, S, L]; D [Din].
/// B and C are shared across the Din channels. Differentiable in all six
/// inputs. Sequential runs the recurrence step by step; Parallel evaluates
/// each (n, d, s) sequence with tree_inclusive_scan, and its adjoint with a
/// reversed tree scan. Throws NumericError if the state overflows.
template <typename Scalar>
Tensor<Scalar> selective_scan(const Tensor<Scalar>& u, const Tensor<Scalar>& delta,
                              const Tensor<Scalar>& A, const Tensor<Scalar>& B,
                              const Tensor<Scalar>& C, const Tensor<Scalar>& D,
                              ScanAlgorithm algorithm = ScanAlgorithm::Sequential);

}  // namespace rmamba
