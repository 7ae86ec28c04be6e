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

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "rmamba/tensor.hpp"

namespace rmamba {

/// Binary mask, row-major, values in {0, 1}.
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kBinarizeThreshold = 0.5;

/// 1 where prob >= threshold. `probs` is an H x W plane.
template <typename Derived>
Mask binarize(const Eigen::ArrayBase<Derived>& probs, double threshold = kBinarizeThreshold) {
  return (probs.template cast<double>() >= threshold).template cast<std::uint8_t>();
}

/// Plane `index` of an [N,1,H,W] tensor (or [1,H,W] / [H,W]) as a mask.
template <typename Scalar>
Mask binarize(const Tensor<Scalar>& probs, Index index = 0,
              double threshold = kBinarizeThreshold);

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
};

ConfusionCounts confusion_counts(const Mask& pred, const Mask& gt);

struct MetricsRecord {
  double dice = 0;
  /// Mean of foreground and background IoU.
  double miou = 0;
  double recall = 0;
  double precision = 0;
  double f2 = 0;
  /// Symmetric Hausdorff distance between boundary pixels, in pixels.
  double hd = 0;
  /// Foreground IoU, kept for the Dice identity.
  double iou = 0;
  /// Exactly one mask was empty; hd holds the image diagonal.
  bool hd_sentinel = false;
};

/// Foreground pixels with at least one 8-neighbour that is background or
/// outside the image, as (row, col).
std::vector<std::pair<Index, Index>> boundary_pixels(const Mask& mask);

/// Squared Euclidean distance from every pixel to the nearest set pixel of
/// `features` (exact, separable lower-envelope transform). Infinite when
/// `features` is empty.
Eigen::ArrayXXd squared_distance_transform(const Mask& features);

/// Symmetric Hausdorff distance between the boundaries of two non-empty masks.
double hausdorff_distance(const Mask& a, const Mask& b);

/// All six metrics. Empty-mask conventions: both empty gives Dice 1 and
/// HD 0; exactly one empty gives Dice 0 and HD equal to the image diagonal.
MetricsRecord compute_metrics(const Mask& pred, const Mask& gt);

MetricsRecord mean_metrics(const std::vector<MetricsRecord>& records);

}  // namespace rmamba
