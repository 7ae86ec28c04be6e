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

#include "rmamba/ss2d.hpp"

namespace rmamba {

struct VssConfig {
  Index channels = 0;
  Index d_state = 16;
  Index expansion = 2;
  Index ffn_ratio = 4;
  ScanAlgorithm scan = ScanAlgorithm::Sequential;
};

template <typename Scalar>
struct VssBlock {
  LayerNormLayer<Scalar> norm1;
  Ss2dBlock<Scalar> ss2d;
  LayerNormLayer<Scalar> norm2;
  LinearLayer<Scalar> ffn_in;   // C -> r*C
  LinearLayer<Scalar> ffn_out;  // r*C -> C
};

template <typename Scalar>
VssBlock<Scalar> make_vss(ParamBuilder<Scalar> b, const VssConfig& cfg);

/// y1 = x + ss2d(norm1(x)); y = y1 + ffn(norm2(y1)). Shape-preserving on
/// [N,C,H,W].
template <typename Scalar>
Tensor<Scalar> vss_forward(const Tensor<Scalar>& x, const VssBlock<Scalar>& block);

/// Applies `blocks` in order; an empty stack is the identity.
template <typename Scalar>
Tensor<Scalar> vss_stack(const Tensor<Scalar>& x, const std::vector<VssBlock<Scalar>>& blocks);

}  // namespace rmamba
