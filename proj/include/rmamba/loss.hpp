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

#include <vector>

#include "rmamba/decoder.hpp"

namespace rmamba {

/// Probabilities are clamped to [eps, 1 - eps] before the logarithm.
inline constexpr double kBceEpsilon = 1e-7;
/// Added to the Dice denominator so two empty masks do not divide by zero.
inline constexpr double kDiceEpsilon = 1e-7;

/// Mean binary cross-entropy between probabilities and {0,1} targets.
template <typename Scalar>
Tensor<Scalar> bce_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

/// 1 - 2 sum(y p) / (sum(y) + sum(p) + eps), over the whole tensor.
template <typename Scalar>
Tensor<Scalar> dice_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

/// Mean of bce + dice over the given probability maps, each resampled to
/// the target's [N,1,H,W] extent first.
template <typename Scalar>
Tensor<Scalar> combined_loss(const std::vector<Tensor<Scalar>>& prob_maps,
                             const Tensor<Scalar>& target);

/// Deep supervision over all four side outputs.
template <typename Scalar>
Tensor<Scalar> combined_loss(const PredictionSet<Scalar>& preds, const Tensor<Scalar>& target);

}  // namespace rmamba
