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

#include "rmamba/encoder.hpp"

#include <string>

namespace rmamba {

void check_input_extent(const Shape& s) {
  if (s.size() != 4 || s[1] != 3) {
    throw DimensionError("encoder: expected an [N,3,H,W] image, got " + to_string(s));
  }
  if (s[2] < 32 || s[2] % 32 != 0) {
    throw ConfigError("encoder: image height " + std::to_string(s[2]) +
                      " is not a positive multiple of 32");
  }
  if (s[3] < 32 || s[3] % 32 != 0) {
    throw ConfigError("encoder: image width " + std::to_string(s[3]) +
                      " is not a positive multiple of 32");
  }
}

template <typename Scalar>
Encoder<Scalar> make_encoder(ParamBuilder<Scalar> b, const ModelConfig& cfg) {
  cfg.validate();
  const auto ch = cfg.channels();
  Encoder<Scalar> enc;
  enc.stem.conv = make_conv(b.scope("stem.conv"), 3, ch[0], 4, 4, 0);
  enc.stem.norm = make_layer_norm(b.scope("stem.norm"), ch[0]);
  for (std::size_t i = 0; i < 4; ++i) {
    ParamBuilder<Scalar> sb = b.scope("stage" + std::to_string(i + 1));
    EncoderStage<Scalar>& st = enc.stages[i];
    if (i > 0) {
      PatchMerge<Scalar> ds;
      ds.conv = make_conv(sb.scope("downsample.conv"), ch[i - 1], ch[i], 2, 2, 0);
      ds.norm = make_layer_norm(sb.scope("downsample.norm"), ch[i]);
      st.downsample.push_back(std::move(ds));
    }
    const VssConfig vc{ch[i], cfg.d_state, cfg.expansion, cfg.ffn_ratio, cfg.scan};
    for (Index d = 0; d < cfg.depths[i]; ++d) {
      st.blocks.push_back(make_vss(sb.scope("block" + std::to_string(d)), vc));
    }
  }
  return enc;
}

template <typename Scalar>
Tensor<Scalar> stem(const Tensor<Scalar>& image, const PatchMerge<Scalar>& layer) {
  check_input_extent(image.shape());
  return apply_channels(layer.norm, apply(layer.conv, image));
}

template <typename Scalar>
Tensor<Scalar> downsample(const Tensor<Scalar>& x, const PatchMerge<Scalar>& layer) {
  if (x.ndim() != 4) throw DimensionError("downsample: expected [N,C,H,W]");
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw DimensionError("downsample: odd spatial extent in " + to_string(x.shape()));
  }
  return apply_channels(layer.norm, apply(layer.conv, x));
}

template <typename Scalar>
FeaturePyramid<Scalar> encode(const Tensor<Scalar>& image, const Encoder<Scalar>& enc) {
  FeaturePyramid<Scalar> pyr;
  Tensor<Scalar> h = stem(image, enc.stem);
  for (std::size_t i = 0; i < 4; ++i) {
    const EncoderStage<Scalar>& st = enc.stages[i];
    if (!st.downsample.empty()) h = downsample(h, st.downsample.front());
    h = vss_stack(h, st.blocks);
    pyr[i] = h;
  }
  return pyr;
}

#define RMAMBA_INSTANTIATE_ENCODER(S)                                          \
  template Encoder<S> make_encoder(ParamBuilder<S>, const ModelConfig&);       \
  template Tensor<S> stem(const Tensor<S>&, const PatchMerge<S>&);             \
  template Tensor<S> downsample(const Tensor<S>&, const PatchMerge<S>&);       \
  template FeaturePyramid<S> encode(const Tensor<S>&, const Encoder<S>&);

RMAMBA_INSTANTIATE_ENCODER(float)
RMAMBA_INSTANTIATE_ENCODER(double)

#undef RMAMBA_INSTANTIATE_ENCODER

}  // namespace rmamba
