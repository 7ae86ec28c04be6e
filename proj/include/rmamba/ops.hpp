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

#include <vector>

#include "rmamba/tensor.hpp"

namespace rmamba {

enum class Activation { Sigmoid, Silu, Relu };

// Elementwise binary ops on equal shapes.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return sub(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return mul(a, b);
}

/// x * s + t, elementwise.
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, Scalar s, Scalar t);
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& x, Scalar s) {
  return affine(x, s, Scalar(0));
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& x) {
  return affine(x, Scalar(-1), Scalar(0));
}

/// x[n, c, ...] * gate[n, 0, ...]: a single-channel map applied to every
/// channel.
template <typename Scalar>
Tensor<Scalar> mul_channel_broadcast(const Tensor<Scalar>& x, const Tensor<Scalar>& gate);

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& x);
/// log(1 + e^x), computed without overflow.
template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> silu(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation kind);
/// Gradient passes only where lo <= x <= hi.
template <typename Scalar>
Tensor<Scalar> clamp(const Tensor<Scalar>& x, Scalar lo, Scalar hi);

/// Sum of every element, as a 0-d tensor.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape);
/// Output axis i is input axis perm[i].
template <typename Scalar>
Tensor<Scalar> permute(const Tensor<Scalar>& x, const std::vector<int>& perm);
/// [N,C,H,W] -> [N,H,W,C]
template <typename Scalar>
Tensor<Scalar> channels_last(const Tensor<Scalar>& x) {
  return permute(x, {0, 2, 3, 1});
}
/// [N,H,W,C] -> [N,C,H,W]
template <typename Scalar>
Tensor<Scalar> channels_first(const Tensor<Scalar>& x) {
  return permute(x, {0, 3, 1, 2});
}
/// out[..., j] = x[..., index[j]] along the last axis.
template <typename Scalar>
Tensor<Scalar> gather_last(const Tensor<Scalar>& x, const std::vector<Index>& index);

/// 2D cross-correlation. `weight` is [Cout, Cin/groups, kh, kw]; `bias` may be
/// undefined.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, Index stride, Index padding,
                      Index groups = 1);

/// Affine map over the last axis: x W^T + b. `bias` may be undefined.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias);

/// Normalizes over the last axis, then applies gamma/beta.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                          const Tensor<Scalar>& beta, Scalar eps = Scalar(1e-5));

/// Bilinear resampling of [N,C,H,W] to [N,C,out_h,out_w], half-pixel
/// centres (corner alignment off), edge clamped.
template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& x, Index out_h, Index out_w);

}  // namespace rmamba
