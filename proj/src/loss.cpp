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

#include "rmamba/loss.hpp"

namespace rmamba {

namespace {

template <typename Scalar>
void require_match(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const char* op) {
  if (pred.shape() != target.shape()) {
    throw DimensionError(std::string(op) + ": prediction " + to_string(pred.shape()) +
                         " vs target " + to_string(target.shape()));
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> bce_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  require_match(pred, target, "bce_loss");
  const auto eps = static_cast<Scalar>(kBceEpsilon);
  const Tensor<Scalar> p = clamp(pred, eps, Scalar(1) - eps);
  const Tensor<Scalar> not_target = affine(target, Scalar(-1), Scalar(1));
  const Tensor<Scalar> ll =
      add(mul(target, log(p)), mul(not_target, log(affine(p, Scalar(-1), Scalar(1)))));
  return -mean(ll);
}

template <typename Scalar>
Tensor<Scalar> dice_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  require_match(pred, target, "dice_loss");
  const Tensor<Scalar> inter = sum(mul(target, pred));
  const Tensor<Scalar> denom = affine(add(sum(target), sum(pred)), Scalar(1),
                                      static_cast<Scalar>(kDiceEpsilon));
  return affine(div(inter, denom), Scalar(-2), Scalar(1));
}

template <typename Scalar>
Tensor<Scalar> combined_loss(const std::vector<Tensor<Scalar>>& prob_maps,
                             const Tensor<Scalar>& target) {
  if (prob_maps.empty()) throw DimensionError("combined_loss: no prediction maps");
  if (target.ndim() != 4 || target.dim(1) != 1) {
    throw DimensionError("combined_loss: target must be [N,1,H,W], got " +
                         to_string(target.shape()));
  }
  Tensor<Scalar> total;
  for (const auto& map : prob_maps) {
    const Tensor<Scalar> up = (map.dim(2) == target.dim(2) && map.dim(3) == target.dim(3))
                                  ? map
                                  : resize_bilinear(map, target.dim(2), target.dim(3));
    const Tensor<Scalar> term = add(bce_loss(up, target), dice_loss(up, target));
    total = total.defined() ? add(total, term) : term;
  }
  return total * (Scalar(1) / static_cast<Scalar>(prob_maps.size()));
}

template <typename Scalar>
Tensor<Scalar> combined_loss(const PredictionSet<Scalar>& preds, const Tensor<Scalar>& target) {
  return combined_loss(
      std::vector<Tensor<Scalar>>{preds.final, preds.probs[1], preds.probs[2], preds.probs[3]},
      target);
}

#define RMAMBA_INSTANTIATE_LOSS(S)                                                    \
  template Tensor<S> bce_loss(const Tensor<S>&, const Tensor<S>&);                    \
  template Tensor<S> dice_loss(const Tensor<S>&, const Tensor<S>&);                   \
  template Tensor<S> combined_loss(const std::vector<Tensor<S>>&, const Tensor<S>&);  \
  template Tensor<S> combined_loss(const PredictionSet<S>&, const Tensor<S>&);

RMAMBA_INSTANTIATE_LOSS(float)
RMAMBA_INSTANTIATE_LOSS(double)

#undef RMAMBA_INSTANTIATE_LOSS

}  // namespace rmamba
