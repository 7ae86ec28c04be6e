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
#include <optional>

#include "rmamba/encoder.hpp"

namespace rmamba {

/// Side outputs of the decoder. Index 0 is the stride-4 map, index 3 the
/// stride-32 initial prediction.
template <typename Scalar>
struct PredictionSet {
  std::array<Tensor<Scalar>, 4> logits;
  std::array<Tensor<Scalar>, 4> probs;
  /// probs[0] resampled to the input resolution.
  Tensor<Scalar> final;
};

template <typename Scalar>
struct RmaStage {
  AttentionMode mode = AttentionMode::RMA;
  std::optional<VssBlock<Scalar>> delta_vss;     // RMA
  std::optional<Conv2dLayer<Scalar>> delta_conv;  // RA: 3x3 conv + relu
  Conv2dLayer<Scalar> refine1;                   // 3x3, C -> C
  Conv2dLayer<Scalar> refine2;                   // 3x3, C -> 1
};

template <typename Scalar>
struct Decoder {
  std::array<Conv2dLayer<Scalar>, 4> reduce;  // 3x3, C_i -> decoder_channels
  Conv2dLayer<Scalar> initial;                // 1x1, decoder_channels -> 1
  std::array<RmaStage<Scalar>, 3> stages;     // stages[i] refines level i
};

template <typename Scalar>
Decoder<Scalar> make_decoder(ParamBuilder<Scalar> b, const ModelConfig& cfg);

/// E - P, with E the all-ones tensor.
template <typename Scalar>
Tensor<Scalar> reverse_op(const Tensor<Scalar>& p);

template <typename Scalar>
FeaturePyramid<Scalar> reduce_channels(const FeaturePyramid<Scalar>& pyr,
                                       const Decoder<Scalar>& dec);

template <typename Scalar>
struct StageOutput {
  Tensor<Scalar> logits;
  Tensor<Scalar> probs;
};

/// 1x1 conv to a single channel, then sigmoid.
template <typename Scalar>
StageOutput<Scalar> initial_prediction(const Tensor<Scalar>& r4, const Conv2dLayer<Scalar>& conv);

/// delta(f): the VSS block in RMA mode, conv + relu in RA mode.
template <typename Scalar>
Tensor<Scalar> attention_transform(const Tensor<Scalar>& f, const RmaStage<Scalar>& stage);

/// One coarse-to-fine refinement step:
///   p  = upsample(logits_next)        P = sigmoid(p)
///   R  = (E - P) * delta(f)           m = R + f
///   p2 = conv(relu(conv(m)))          logits = p + p2
template <typename Scalar>
StageOutput<Scalar> rma_stage(const Tensor<Scalar>& logits_next, const Tensor<Scalar>& f,
                              const RmaStage<Scalar>& stage);

template <typename Scalar>
PredictionSet<Scalar> decode(const FeaturePyramid<Scalar>& pyr, const Decoder<Scalar>& dec);

}  // namespace rmamba
