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

#include "rmamba/config.hpp"
#include "rmamba/vss.hpp"

namespace rmamba {

/// Encoder outputs f1..f4 at strides 4, 8, 16, 32.
template <typename Scalar>
struct FeaturePyramid {
  std::array<Tensor<Scalar>, 4> levels;

  const Tensor<Scalar>& operator[](std::size_t i) const { return levels[i]; }
  Tensor<Scalar>& operator[](std::size_t i) { return levels[i]; }
};

/// Strided conv followed by channel layer norm (stem and downsampling).
template <typename Scalar>
struct PatchMerge {
  Conv2dLayer<Scalar> conv;
  LayerNormLayer<Scalar> norm;
};

template <typename Scalar>
struct EncoderStage {
  std::vector<PatchMerge<Scalar>> downsample;  // empty for stage 1, else one
  std::vector<VssBlock<Scalar>> blocks;
};

template <typename Scalar>
struct Encoder {
  PatchMerge<Scalar> stem;
  std::array<EncoderStage<Scalar>, 4> stages;
};

template <typename Scalar>
Encoder<Scalar> make_encoder(ParamBuilder<Scalar> b, const ModelConfig& cfg);

/// Kernel-4, stride-4 patch embedding + layer norm. H and W must be
/// multiples of 32.
template <typename Scalar>
Tensor<Scalar> stem(const Tensor<Scalar>& image, const PatchMerge<Scalar>& layer);

/// Kernel-2, stride-2 conv + layer norm. H and W must be even.
template <typename Scalar>
Tensor<Scalar> downsample(const Tensor<Scalar>& x, const PatchMerge<Scalar>& layer);

template <typename Scalar>
FeaturePyramid<Scalar> encode(const Tensor<Scalar>& image, const Encoder<Scalar>& enc);

/// Throws ConfigError unless H and W of an [N,3,H,W] image are multiples of 32.
void check_input_extent(const Shape& image_shape);

}  // namespace rmamba
