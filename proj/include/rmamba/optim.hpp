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
#include <limits>
#include <vector>

#include "rmamba/nn.hpp"

namespace rmamba {

/// Per-parameter first/second moments for Adam.
template <typename Scalar>
struct AdamState {
  using Array = typename Tensor<Scalar>::Array;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Array> m;
  std::vector<Array> v;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. Throws AutodiffError if a parameter has no gradient.
template <typename Scalar>
void adam_step(const ParamList<Scalar>& params, AdamState<Scalar>& state, double lr);

/// Multiplies the learning rate by `factor` once the monitored value has
/// failed to improve (relative threshold) for more than `patience` epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double threshold = 1e-4);
  /// Feeds one epoch's monitored value; returns the learning rate to use next.
  double step(double metric);
  double lr() const { return lr_; }
  int stagnant_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

/// Signals a stop after `patience` consecutive epochs without a new best.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  /// Returns true when training should stop after this epoch.
  bool step(double metric);
  bool improved() const { return improved_; }
  int stagnant_epochs() const { return stagnant_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int stagnant_ = 0;
  bool improved_ = false;
};

}  // namespace rmamba
