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

#include <array>
#include <vector>

#include "rmamba/nn.hpp"
#include "rmamba/scan.hpp"

namespace rmamba {

/// Flattening orders of an H x W grid into a length H*W sequence.
enum class ScanRoute { RowForward, RowBackward, ColForward, ColBackward };

inline constexpr std::array<ScanRoute, 4> kScanRoutes = {
    ScanRoute::RowForward, ScanRoute::RowBackward, ScanRoute::ColForward,
    ScanRoute::ColBackward};

/// order[k] = row-major grid position visited at sequence step k.
std::vector<Index> route_order(ScanRoute route, Index h, Index w);
/// inverse[p] = sequence step at which grid position p is visited.
std::vector<Index> route_inverse(ScanRoute route, Index h, Index w);

/// [N,C,H,W] -> four [N,C,H*W] sequences, in kScanRoutes order.
template <typename Scalar>
std::array<Tensor<Scalar>, 4> expand_routes(const Tensor<Scalar>& x);

/// Un-permutes each route's sequence back onto the grid and sums the four.
template <typename Scalar>
Tensor<Scalar> merge_routes(const std::array<Tensor<Scalar>, 4>& ys, Index h, Index w);

/// Input-dependent SSM parameters shared by the four routes.
template <typename Scalar>
struct SsmParams {
  Tensor<Scalar> a_log;         // [Din, S]; A = -exp(a_log)
  Tensor<Scalar> d_skip;        // [Din]
  LinearLayer<Scalar> delta;    // Din -> Din, with bias; delta = softplus(.)
  LinearLayer<Scalar> b_proj;   // Din -> S
  LinearLayer<Scalar> c_proj;   // Din -> S
  ScanAlgorithm algorithm = ScanAlgorithm::Sequential;

  Index d_inner() const { return a_log.dim(0); }
  Index d_state() const { return a_log.dim(1); }
};

template <typename Scalar>
SsmParams<Scalar> make_ssm_params(ParamBuilder<Scalar> b, Index d_inner, Index d_state);

/// Projects delta, B and C from `u` [N,Din,L] and runs the selective scan.
template <typename Scalar>
Tensor<Scalar> selective_scan_1d(const Tensor<Scalar>& u, const SsmParams<Scalar>& params);

struct Ss2dConfig {
  Index channels = 0;
  Index d_state = 16;
  Index expansion = 2;
  Index conv_kernel = 3;
};

template <typename Scalar>
struct Ss2dBlock {
  LinearLayer<Scalar> in_proj;    // C -> Din, no bias
  LinearLayer<Scalar> gate_proj;  // C -> Din, no bias
  Conv2dLayer<Scalar> depthwise;  // Din -> Din, groups = Din
  SsmParams<Scalar> ssm;
  LayerNormLayer<Scalar> out_norm;
  LinearLayer<Scalar> out_proj;   // Din -> C, no bias
};

template <typename Scalar>
Ss2dBlock<Scalar> make_ss2d(ParamBuilder<Scalar> b, const Ss2dConfig& cfg);

/// Shape-preserving SS2D on [N,C,H,W].
template <typename Scalar>
Tensor<Scalar> ss2d_forward(const Tensor<Scalar>& x, const Ss2dBlock<Scalar>& block);

/// Same, on a channels-last [N,H,W,C] tensor.
template <typename Scalar>
Tensor<Scalar> ss2d_forward_channels_last(const Tensor<Scalar>& x,
                                          const Ss2dBlock<Scalar>& block);

}  // namespace rmamba
