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

#include "rmamba/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rmamba {

template <typename Scalar>
void adam_step(const ParamList<Scalar>& params, AdamState<Scalar>& state, double lr) {
  using Array = typename AdamState<Scalar>::Array;
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Array::Zero(p.tensor.size()));
      state.v.push_back(Array::Zero(p.tensor.size()));
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameter list");
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw AutodiffError("adam_step: no gradient for " + p.name);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  const auto step_size = static_cast<Scalar>(lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<Scalar>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar> t = params[i].tensor;
    const Array g = t.grad();
    Array& m = state.m[i];
    Array& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    t.mutable_data() -= step_size * m / (v.sqrt() * inv_sqrt_bc2 + eps);
  }
}

template void adam_step(const ParamList<float>&, AdamState<float>&, double);
template void adam_step(const ParamList<double>&, AdamState<double>&, double);

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double threshold)
    : lr_(lr), factor_(factor), patience_(patience), threshold_(threshold) {
  if (patience < 1) throw std::invalid_argument("PlateauScheduler: patience must be positive");
}

double PlateauScheduler::step(double metric) {
  if (metric < best_ * (1.0 - threshold_)) {
    best_ = metric;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ > patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw std::invalid_argument("EarlyStopping: patience must be positive");
}

bool EarlyStopping::step(double metric) {
  improved_ = metric < best_;
  if (improved_) {
    best_ = metric;
    stagnant_ = 0;
  } else {
    ++stagnant_;
  }
  return stagnant_ >= patience_;
}

}  // namespace rmamba
