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

#include "rmamba/ss2d.hpp"

#include <cmath>

namespace rmamba {

std::vector<Index> route_order(ScanRoute route, Index h, Index w) {
  const Index len = h * w;
  std::vector<Index> order(static_cast<std::size_t>(len));
  for (Index k = 0; k < len; ++k) {
    Index pos = 0;
    switch (route) {
      case ScanRoute::RowForward:
        pos = k;
        break;
      case ScanRoute::RowBackward:
        pos = len - 1 - k;
        break;
      case ScanRoute::ColForward:
        pos = (k % h) * w + k / h;
        break;
      case ScanRoute::ColBackward: {
        const Index j = len - 1 - k;
        pos = (j % h) * w + j / h;
        break;
      }
    }
    order[static_cast<std::size_t>(k)] = pos;
  }
  return order;
}

std::vector<Index> route_inverse(ScanRoute route, Index h, Index w) {
  const std::vector<Index> order = route_order(route, h, w);
  std::vector<Index> inverse(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    inverse[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);
  }
  return inverse;
}

template <typename Scalar>
std::array<Tensor<Scalar>, 4> expand_routes(const Tensor<Scalar>& x) {
  if (x.ndim() != 4 || x.dim(2) < 1 || x.dim(3) < 1) {
    throw DimensionError("expand_routes: expected [N,C,H,W] with H,W >= 1, got " +
                         to_string(x.shape()));
  }
  const Index h = x.dim(2);
  const Index w = x.dim(3);
  const Tensor<Scalar> flat = reshape(x, {x.dim(0), x.dim(1), h * w});
  std::array<Tensor<Scalar>, 4> out;
  for (std::size_t r = 0; r < kScanRoutes.size(); ++r) {
    out[r] = gather_last(flat, route_order(kScanRoutes[r], h, w));
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> merge_routes(const std::array<Tensor<Scalar>, 4>& ys, Index h, Index w) {
  Tensor<Scalar> acc;
  for (std::size_t r = 0; r < kScanRoutes.size(); ++r) {
    const Tensor<Scalar>& y = ys[r];
    if (y.ndim() != 3 || y.dim(2) != h * w || (acc.defined() && y.shape() != ys[0].shape())) {
      throw DimensionError("merge_routes: sequence " + to_string(y.shape()) +
                           " does not match a " + std::to_string(h) + "x" + std::to_string(w) +
                           " grid");
    }
    Tensor<Scalar> grid = gather_last(y, route_inverse(kScanRoutes[r], h, w));
    acc = acc.defined() ? add(acc, grid) : grid;
  }
  return reshape(acc, {acc.dim(0), acc.dim(1), h, w});
}

template <typename Scalar>
SsmParams<Scalar> make_ssm_params(ParamBuilder<Scalar> b, Index d_inner, Index d_state) {
  SsmParams<Scalar> p;
  // S4D-real initialization: A[:, s] = -(s + 1).
  typename Tensor<Scalar>::Array a(d_inner * d_state);
  for (Index d = 0; d < d_inner; ++d) {
    for (Index s = 0; s < d_state; ++s) a[d * d_state + s] = std::log(static_cast<Scalar>(s + 1));
  }
  p.a_log = b.adopt("a_log", Tensor<Scalar>({d_inner, d_state}, std::move(a)));
  p.d_skip = b.constant("d_skip", {d_inner}, 1.0);

  ParamBuilder<Scalar> db = b.scope("delta");
  p.delta.weight = db.trunc_normal("weight", {d_inner, d_inner}, 0.02);
  // Bias chosen so softplus(bias) is log-uniform in [1e-3, 1e-1].
  std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e-1));
  typename Tensor<Scalar>::Array bias(d_inner);
  for (Index d = 0; d < d_inner; ++d) {
    const double dt = std::exp(u(db.rng()));
    bias[d] = static_cast<Scalar>(dt + std::log(-std::expm1(-dt)));
  }
  p.delta.bias = db.adopt("bias", Tensor<Scalar>({d_inner}, std::move(bias)));

  p.b_proj = make_linear(b.scope("b_proj"), d_inner, d_state, false);
  p.c_proj = make_linear(b.scope("c_proj"), d_inner, d_state, false);
  return p;
}

template <typename Scalar>
Tensor<Scalar> selective_scan_1d(const Tensor<Scalar>& u, const SsmParams<Scalar>& params) {
  if (u.ndim() != 3 || u.dim(1) != params.d_inner()) {
    throw DimensionError("selective_scan_1d: expected [N," + std::to_string(params.d_inner()) +
                         ",L], got " + to_string(u.shape()));
  }
  const Tensor<Scalar> seq = permute(u, {0, 2, 1});  // [N,L,Din]
  const Tensor<Scalar> delta = permute(softplus(apply(params.delta, seq)), {0, 2, 1});
  const Tensor<Scalar> bm = permute(apply(params.b_proj, seq), {0, 2, 1});
  const Tensor<Scalar> cm = permute(apply(params.c_proj, seq), {0, 2, 1});
  const Tensor<Scalar> a = -exp(params.a_log);
  return selective_scan(u, delta, a, bm, cm, params.d_skip, params.algorithm);
}

template <typename Scalar>
Ss2dBlock<Scalar> make_ss2d(ParamBuilder<Scalar> b, const Ss2dConfig& cfg) {
  if (cfg.channels < 1 || cfg.d_state < 1 || cfg.expansion < 1 || cfg.conv_kernel % 2 == 0) {
    throw ConfigError("ss2d: channels, d_state, expansion must be >= 1 and the kernel odd");
  }
  const Index d_inner = cfg.expansion * cfg.channels;
  Ss2dBlock<Scalar> blk;
  blk.in_proj = make_linear(b.scope("in_proj"), cfg.channels, d_inner, false);
  blk.gate_proj = make_linear(b.scope("gate_proj"), cfg.channels, d_inner, false);
  blk.depthwise = make_conv(b.scope("depthwise"), d_inner, d_inner, cfg.conv_kernel, 1,
                            cfg.conv_kernel / 2, d_inner);
  blk.ssm = make_ssm_params(b.scope("ssm"), d_inner, cfg.d_state);
  blk.out_norm = make_layer_norm(b.scope("out_norm"), d_inner);
  blk.out_proj = make_linear(b.scope("out_proj"), d_inner, cfg.channels, false);
  return blk;
}

template <typename Scalar>
Tensor<Scalar> ss2d_forward_channels_last(const Tensor<Scalar>& x,
                                          const Ss2dBlock<Scalar>& block) {
  if (x.ndim() != 4) {
    throw DimensionError("ss2d: expected [N,H,W,C], got " + to_string(x.shape()));
  }
  const Index h = x.dim(1);
  const Index w = x.dim(2);

  const Tensor<Scalar> gate = silu(apply(block.gate_proj, x));
  Tensor<Scalar> inner = channels_first(apply(block.in_proj, x));  // [N,Din,H,W]
  inner = silu(apply(block.depthwise, inner));

  const std::array<Tensor<Scalar>, 4> routes = expand_routes(inner);
  std::array<Tensor<Scalar>, 4> scanned;
  for (std::size_t r = 0; r < routes.size(); ++r) {
    scanned[r] = selective_scan_1d(routes[r], block.ssm);
  }
  Tensor<Scalar> merged = channels_last(merge_routes(scanned, h, w));  // [N,H,W,Din]
  merged = mul(apply(block.out_norm, merged), gate);
  return apply(block.out_proj, merged);
}

template <typename Scalar>
Tensor<Scalar> ss2d_forward(const Tensor<Scalar>& x, const Ss2dBlock<Scalar>& block) {
  if (x.ndim() != 4) {
    throw DimensionError("ss2d: expected [N,C,H,W], got " + to_string(x.shape()));
  }
  return channels_first(ss2d_forward_channels_last(channels_last(x), block));
}

#define RMAMBA_INSTANTIATE_SS2D(S)                                                          \
  template std::array<Tensor<S>, 4> expand_routes(const Tensor<S>&);                        \
  template Tensor<S> merge_routes(const std::array<Tensor<S>, 4>&, Index, Index);           \
  template SsmParams<S> make_ssm_params(ParamBuilder<S>, Index, Index);                     \
  template Tensor<S> selective_scan_1d(const Tensor<S>&, const SsmParams<S>&);              \
  template Ss2dBlock<S> make_ss2d(ParamBuilder<S>, const Ss2dConfig&);                      \
  template Tensor<S> ss2d_forward(const Tensor<S>&, const Ss2dBlock<S>&);                   \
  template Tensor<S> ss2d_forward_channels_last(const Tensor<S>&, const Ss2dBlock<S>&);

RMAMBA_INSTANTIATE_SS2D(float)
RMAMBA_INSTANTIATE_SS2D(double)

#undef RMAMBA_INSTANTIATE_SS2D

}  // namespace rmamba
