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

#include "rmamba/nn.hpp"

#include <cmath>

namespace rmamba {

template <typename Scalar>
Tensor<Scalar> ParamBuilder<Scalar>::trunc_normal(const std::string& name, Shape shape,
                                                  double std) {
  std::normal_distribution<double> dist(0.0, std);
  typename Tensor<Scalar>::Array v(numel(shape));
  for (Index i = 0; i < v.size(); ++i) {
    double x;
    do {
      x = dist(state_->rng);
    } while (std::abs(x) > 2.0 * std);
    v[i] = static_cast<Scalar>(x);
  }
  return adopt(name, Tensor<Scalar>(std::move(shape), std::move(v)));
}

template <typename Scalar>
Tensor<Scalar> ParamBuilder<Scalar>::uniform(const std::string& name, Shape shape, double lo,
                                             double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  typename Tensor<Scalar>::Array v(numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(dist(state_->rng));
  return adopt(name, Tensor<Scalar>(std::move(shape), std::move(v)));
}

template <typename Scalar>
Tensor<Scalar> ParamBuilder<Scalar>::constant(const std::string& name, Shape shape,
                                              double value) {
  return adopt(name, Tensor<Scalar>::full(std::move(shape), static_cast<Scalar>(value)));
}

template <typename Scalar>
Tensor<Scalar> ParamBuilder<Scalar>::adopt(const std::string& name, Tensor<Scalar> t) {
  t.set_requires_grad(true);
  state_->params.push_back({prefix_ + name, t});
  return t;
}

template <typename Scalar>
LinearLayer<Scalar> make_linear(ParamBuilder<Scalar> b, Index in, Index out, bool bias) {
  LinearLayer<Scalar> l;
  l.weight = b.trunc_normal("weight", {out, in}, 0.02);
  if (bias) l.bias = b.constant("bias", {out}, 0.0);
  return l;
}

template <typename Scalar>
Conv2dLayer<Scalar> make_conv(ParamBuilder<Scalar> b, Index in, Index out, Index kernel,
                              Index stride, Index padding, Index groups, bool bias) {
  Conv2dLayer<Scalar> c;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in / groups * kernel * kernel));
  c.weight = b.uniform("weight", {out, in / groups, kernel, kernel}, -bound, bound);
  if (bias) c.bias = b.uniform("bias", {out}, -bound, bound);
  c.stride = stride;
  c.padding = padding;
  c.groups = groups;
  return c;
}

template <typename Scalar>
LayerNormLayer<Scalar> make_layer_norm(ParamBuilder<Scalar> b, Index channels) {
  return {b.constant("gamma", {channels}, 1.0), b.constant("beta", {channels}, 0.0)};
}

template class ParamBuilder<float>;
template class ParamBuilder<double>;

#define RMAMBA_INSTANTIATE_NN(S)                                                              \
  template LinearLayer<S> make_linear(ParamBuilder<S>, Index, Index, bool);                   \
  template Conv2dLayer<S> make_conv(ParamBuilder<S>, Index, Index, Index, Index, Index, Index, \
                                    bool);                                                    \
  template LayerNormLayer<S> make_layer_norm(ParamBuilder<S>, Index);

RMAMBA_INSTANTIATE_NN(float)
RMAMBA_INSTANTIATE_NN(double)

#undef RMAMBA_INSTANTIATE_NN

}  // namespace rmamba
