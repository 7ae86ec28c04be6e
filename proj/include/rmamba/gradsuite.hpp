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
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rmamba/gradcheck.hpp"

namespace rmamba {

/// Compares backward() of `loss` with central differences for the given
/// leaves, which `loss` must read in place. For each tensor with more than
/// `coords_per_tensor` entries a sample is checked (its largest-gradient
/// entry plus random ones); -1 checks everything.
GradCheckResult check_leaf_gradients(const std::function<Tensor<double>()>& loss,
                                     const std::vector<Tensor<double>>& leaves,
                                     Index coords_per_tensor, std::mt19937_64& rng, double h,
                                     double rtol, double atol);

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  bool include_model = true;
  /// Parameter tensors of the end-to-end model to check (randomly chosen,
  /// two coordinates each); -1 checks all of them.
  Index model_tensors = -1;
  Index model_size = 64;
  double h = 1e-5;
  double rtol = 1e-3;
  double atol = 1e-4;
};

struct GradCaseReport {
  std::string name;
  GradCheckResult result;
  double seconds = 0;
};

/// Every differentiable op, the SS2D/VSS/decoder blocks and the end-to-end
/// desk model, all in double precision with inputs drawn from [-1, 1].
std::vector<GradCaseReport> run_gradient_suite(
    const GradSuiteOptions& options,
    const std::function<void(const GradCaseReport&)>& on_case = {});

}  // namespace rmamba
