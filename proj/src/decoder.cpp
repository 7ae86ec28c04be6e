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

#include "rmamba/decoder.hpp"

namespace rmamba {

template <typename Scalar>
Decoder<Scalar> make_decoder(ParamBuilder<Scalar> b, const ModelConfig& cfg) {
  const auto ch = cfg.channels();
  const Index dc = cfg.decoder_channels;
  Decoder<Scalar> dec;
  for (std::size_t i = 0; i < 4; ++i) {
    dec.reduce[i] = make_conv(b.scope("reduce" + std::to_string(i + 1)), ch[i], dc, 3, 1, 1);
  }
  dec.initial = make_conv(b.scope("initial"), dc, 1, 1, 1, 0);
  for (std::size_t i = 0; i < 3; ++i) {
    ParamBuilder<Scalar> sb = b.scope("rma" + std::to_string(i + 1));
    RmaStage<Scalar>& st = dec.stages[i];
    st.mode = cfg.attention;
    if (cfg.attention == AttentionMode::RMA) {
      st.delta_vss = make_vss(sb.scope("delta"),
                              VssConfig{dc, cfg.d_state, cfg.expansion, cfg.ffn_ratio, cfg.scan});
    } else {
      st.delta_conv = make_conv(sb.scope("delta"), dc, dc, 3, 1, 1);
    }
    st.refine1 = make_conv(sb.scope("refine1"), dc, dc, 3, 1, 1);
    st.refine2 = make_conv(sb.scope("refine2"), dc, 1, 3, 1, 1);
  }
  return dec;
}

template <typename Scalar>
Tensor<Scalar> reverse_op(const Tensor<Scalar>& p) {
  if (finite_checks() && ((p.data() < Scalar(0)).any() || (p.data() > Scalar(1)).any())) {
    throw NumericError("reverse_op: input outside [0,1]");
  }
  return affine(p, Scalar(-1), Scalar(1));
}

template <typename Scalar>
FeaturePyramid<Scalar> reduce_channels(const FeaturePyramid<Scalar>& pyr,
                                       const Decoder<Scalar>& dec) {
  FeaturePyramid<Scalar> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = apply(dec.reduce[i], pyr[i]);
  return out;
}

template <typename Scalar>
StageOutput<Scalar> initial_prediction(const Tensor<Scalar>& r4, const Conv2dLayer<Scalar>& conv) {
  Tensor<Scalar> logits = apply(conv, r4);
  return {logits, sigmoid(logits)};
}

template <typename Scalar>
Tensor<Scalar> attention_transform(const Tensor<Scalar>& f, const RmaStage<Scalar>& stage) {
  if (stage.mode == AttentionMode::RMA) return vss_forward(f, *stage.delta_vss);
  return relu(apply(*stage.delta_conv, f));
}

template <typename Scalar>
StageOutput<Scalar> rma_stage(const Tensor<Scalar>& logits_next, const Tensor<Scalar>& f,
                              const RmaStage<Scalar>& stage) {
  if (logits_next.ndim() != 4 || f.ndim() != 4 || logits_next.dim(1) != 1 ||
      f.dim(2) != 2 * logits_next.dim(2) || f.dim(3) != 2 * logits_next.dim(3) ||
      f.dim(0) != logits_next.dim(0)) {
    throw DimensionError("rma_stage: feature " + to_string(f.shape()) +
                         " is not the adjacent (2x) level of prediction " +
                         to_string(logits_next.shape()));
  }
  const Tensor<Scalar> p = resize_bilinear(logits_next, f.dim(2), f.dim(3));
  const Tensor<Scalar> gate = reverse_op(sigmoid(p));
  const Tensor<Scalar> r = mul_channel_broadcast(attention_transform(f, stage), gate);
  const Tensor<Scalar> m = add(r, f);
  const Tensor<Scalar> p2 = apply(stage.refine2, relu(apply(stage.refine1, m)));
  Tensor<Scalar> logits = add(p, p2);
  return {logits, sigmoid(logits)};
}

template <typename Scalar>
PredictionSet<Scalar> decode(const FeaturePyramid<Scalar>& pyr, const Decoder<Scalar>& dec) {
  const FeaturePyramid<Scalar> r = reduce_channels(pyr, dec);
  PredictionSet<Scalar> out;
  StageOutput<Scalar> cur = initial_prediction(r[3], dec.initial);
  out.logits[3] = cur.logits;
  out.probs[3] = cur.probs;
  for (std::size_t k = 3; k-- > 0;) {
    cur = rma_stage(cur.logits, r[k], dec.stages[k]);
    out.logits[k] = cur.logits;
    out.probs[k] = cur.probs;
  }
  out.final = resize_bilinear(out.probs[0], 4 * out.probs[0].dim(2), 4 * out.probs[0].dim(3));
  return out;
}

#define RMAMBA_INSTANTIATE_DECODER(S)                                                       \
  template Decoder<S> make_decoder(ParamBuilder<S>, const ModelConfig&);                    \
  template Tensor<S> reverse_op(const Tensor<S>&);                                          \
  template FeaturePyramid<S> reduce_channels(const FeaturePyramid<S>&, const Decoder<S>&);  \
  template StageOutput<S> initial_prediction(const Tensor<S>&, const Conv2dLayer<S>&);      \
  template Tensor<S> attention_transform(const Tensor<S>&, const RmaStage<S>&);             \
  template StageOutput<S> rma_stage(const Tensor<S>&, const Tensor<S>&, const RmaStage<S>&); \
  template PredictionSet<S> decode(const FeaturePyramid<S>&, const Decoder<S>&);

RMAMBA_INSTANTIATE_DECODER(float)
RMAMBA_INSTANTIATE_DECODER(double)

#undef RMAMBA_INSTANTIATE_DECODER

}  // namespace rmamba
