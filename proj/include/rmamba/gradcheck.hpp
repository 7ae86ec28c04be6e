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

#include <functional>
#include <string>
#include <vector>

#include "rmamba/tensor.hpp"

namespace rmamba {

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h of a
/// scalar-valued function, one coordinate at a time. `f` sees a detached copy.
template <typename Scalar>
Tensor<Scalar> finite_diff_grad(const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                                const Tensor<Scalar>& x, Scalar h);

/// Same estimate restricted to `coords` of a tensor that `loss` reads in place
/// (e.g. a model parameter). Entries outside `coords` are left at zero.
template <typename Scalar>
std::vector<Scalar> finite_diff_at(const std::function<Scalar()>& loss, Tensor<Scalar>& x,
                                   const std::vector<Index>& coords, Scalar h);

struct GradCheckResult {
  bool passed = true;
  double max_abs_err = 0;
  double max_rel_err = 0;
  Index worst = -1;
  Index checked = 0;
};

/// Elementwise |a - n| <= max(rtol * max(|a|, |n|), atol).
template <typename Scalar>
GradCheckResult compare_grads(const Scalar* analytic, const Scalar* numeric, Index count,
                              double rtol, double atol);

/// Checks d f(inputs) / d inputs[k] for every input against central
/// differences. `f` must build its graph from the given tensors.
template <typename Scalar>
GradCheckResult check_gradients(
    const std::function<Tensor<Scalar>(const std::vector<Tensor<Scalar>>&)>& f,
    std::vector<Tensor<Scalar>> inputs, Scalar h, double rtol = 1e-3, double atol = 1e-4);

}  // namespace rmamba
