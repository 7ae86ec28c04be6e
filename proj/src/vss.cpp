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

#include "rmamba/vss.hpp"

namespace rmamba {

namespace {

template <typename Scalar>
Tensor<Scalar> vss_channels_last(const Tensor<Scalar>& x, const VssBlock<Scalar>& blk) {
  const Tensor<Scalar> y1 = add(x, ss2d_forward_channels_last(apply(blk.norm1, x), blk.ss2d));
  const Tensor<Scalar> hidden = silu(apply(blk.ffn_in, apply(blk.norm2, y1)));
  return add(y1, apply(blk.ffn_out, hidden));
}

}  // namespace

template <typename Scalar>
VssBlock<Scalar> make_vss(ParamBuilder<Scalar> b, const VssConfig& cfg) {
  if (cfg.ffn_ratio < 1) throw ConfigError("vss: ffn_ratio must be >= 1");
  VssBlock<Scalar> blk;
  blk.norm1 = make_layer_norm(b.scope("norm1"), cfg.channels);
  blk.ss2d = make_ss2d(b.scope("ss2d"), Ss2dConfig{cfg.channels, cfg.d_state, cfg.expansion, 3});
  blk.ss2d.ssm.algorithm = cfg.scan;
  blk.norm2 = make_layer_norm(b.scope("norm2"), cfg.channels);
  blk.ffn_in = make_linear(b.scope("ffn_in"), cfg.channels, cfg.ffn_ratio * cfg.channels, true);
  blk.ffn_out = make_linear(b.scope("ffn_out"), cfg.ffn_ratio * cfg.channels, cfg.channels, true);
  return blk;
}

template <typename Scalar>
Tensor<Scalar> vss_forward(const Tensor<Scalar>& x, const VssBlock<Scalar>& block) {
  if (x.ndim() != 4) throw DimensionError("vss: expected [N,C,H,W], got " + to_string(x.shape()));
  return channels_first(vss_channels_last(channels_last(x), block));
}

template <typename Scalar>
Tensor<Scalar> vss_stack(const Tensor<Scalar>& x, const std::vector<VssBlock<Scalar>>& blocks) {
  if (blocks.empty()) return x;
  Tensor<Scalar> h = channels_last(x);
  for (const auto& blk : blocks) h = vss_channels_last(h, blk);
  return channels_first(h);
}

#define RMAMBA_INSTANTIATE_VSS(S)                                    \
  template VssBlock<S> make_vss(ParamBuilder<S>, const VssConfig&);  \
  template Tensor<S> vss_forward(const Tensor<S>&, const VssBlock<S>&); \
  template Tensor<S> vss_stack(const Tensor<S>&, const std::vector<VssBlock<S>>&);

RMAMBA_INSTANTIATE_VSS(float)
RMAMBA_INSTANTIATE_VSS(double)

#undef RMAMBA_INSTANTIATE_VSS

}  // namespace rmamba
