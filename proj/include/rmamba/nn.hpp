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

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rmamba/ops.hpp"
#include "rmamba/tensor.hpp"

namespace rmamba {

template <typename Scalar>
struct NamedParam {
  std::string name;
  Tensor<Scalar> tensor;
};

template <typename Scalar>
using ParamList = std::vector<NamedParam<Scalar>>;

/// Creates named, initialized leaf tensors and records them in a shared,
/// ordered registry. Scopes prefix names with "scope.".
template <typename Scalar>
class ParamBuilder {
 public:
  explicit ParamBuilder(std::uint64_t seed)
      : state_(std::make_shared<State>(seed)) {}

  ParamBuilder scope(const std::string& name) const {
    ParamBuilder b = *this;
    b.prefix_ = prefix_ + name + ".";
    return b;
  }

  /// Normal(0, std) truncated to +-2 std.
  Tensor<Scalar> trunc_normal(const std::string& name, Shape shape, double std);
  Tensor<Scalar> uniform(const std::string& name, Shape shape, double lo, double hi);
  Tensor<Scalar> constant(const std::string& name, Shape shape, double value);
  Tensor<Scalar> adopt(const std::string& name, Tensor<Scalar> t);

  std::mt19937_64& rng() { return state_->rng; }
  const ParamList<Scalar>& params() const { return state_->params; }

 private:
  struct State {
    explicit State(std::uint64_t seed) : rng(seed) {}
    std::mt19937_64 rng;
    ParamList<Scalar> params;
  };
  std::shared_ptr<State> state_;
  std::string prefix_;
};

template <typename Scalar>
struct LinearLayer {
  Tensor<Scalar> weight;  // [out, in]
  Tensor<Scalar> bias;    // [out] or undefined
};

template <typename Scalar>
struct Conv2dLayer {
  Tensor<Scalar> weight;  // [out, in/groups, k, k]
  Tensor<Scalar> bias;
  Index stride = 1;
  Index padding = 0;
  Index groups = 1;
};

template <typename Scalar>
struct LayerNormLayer {
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

/// Weights ~ truncated normal(0.02); bias zero.
template <typename Scalar>
LinearLayer<Scalar> make_linear(ParamBuilder<Scalar> b, Index in, Index out, bool bias);

/// Weights and bias ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
Conv2dLayer<Scalar> make_conv(ParamBuilder<Scalar> b, Index in, Index out, Index kernel,
                              Index stride, Index padding, Index groups = 1, bool bias = true);

template <typename Scalar>
LayerNormLayer<Scalar> make_layer_norm(ParamBuilder<Scalar> b, Index channels);

template <typename Scalar>
Tensor<Scalar> apply(const LinearLayer<Scalar>& l, const Tensor<Scalar>& x) {
  return linear(x, l.weight, l.bias);
}

template <typename Scalar>
Tensor<Scalar> apply(const Conv2dLayer<Scalar>& c, const Tensor<Scalar>& x) {
  return conv2d(x, c.weight, c.bias, c.stride, c.padding, c.groups);
}

/// Over the last axis.
template <typename Scalar>
Tensor<Scalar> apply(const LayerNormLayer<Scalar>& n, const Tensor<Scalar>& x) {
  return layer_norm(x, n.gamma, n.beta, Scalar(1e-5));
}

/// Layer norm over the channel axis of an [N,C,H,W] tensor.
template <typename Scalar>
Tensor<Scalar> apply_channels(const LayerNormLayer<Scalar>& n, const Tensor<Scalar>& x) {
  return channels_first(apply(n, channels_last(x)));
}

extern template class ParamBuilder<float>;
extern template class ParamBuilder<double>;

}  // namespace rmamba
