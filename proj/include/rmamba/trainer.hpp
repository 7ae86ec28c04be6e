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
#include <random>
#include <string>
#include <vector>

#include "rmamba/config.hpp"
#include "rmamba/data.hpp"
#include "rmamba/metrics.hpp"
#include "rmamba/model.hpp"
#include "rmamba/optim.hpp"

namespace rmamba {

/// One geometric transform, applied identically to image and mask.
struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  double angle_deg = 0;
};

inline constexpr double kMaxRotationDeg = 15.0;

/// Flips with probability 0.5 each, rotation uniform in +-kMaxRotationDeg.
AugmentParams sample_augment(std::mt19937_64& rng);

/// Rotation about the image centre with zero fill: bilinear for the image,
/// nearest neighbour for the mask (which therefore stays binary). Flips are
/// applied after the rotation.
Sample apply_augment(const Sample& s, const AugmentParams& p);

inline Sample augment(const Sample& s, std::mt19937_64& rng) {
  return apply_augment(s, sample_augment(rng));
}

/// Stacks samples [indices] into [B,3,H,W] images and [B,1,H,W] masks.
void stack_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                 Tensor<float>& images, Tensor<float>& masks);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = 0;
  bool stopped_early = false;
  AdamState<float> optimizer;
};

/// Called after every epoch; return false to stop.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Adam + plateau scheduling on validation loss + early stopping. On return
/// the model holds the parameters of the best validation epoch. Throws
/// NumericError on a non-finite loss.
TrainResult train(Model<float>& model, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset& val_set, const EpochCallback& on_epoch = {});

/// Mean combined loss over `data`, without recording a tape.
double validation_loss(const Model<float>& model, const Dataset& data, int batch_size);

/// Final probability map for one sample, [1,1,H,W].
Tensor<float> predict(const Model<float>& model, const Sample& s);
/// Full side-output set for one sample.
PredictionSet<float> predict_all(const Model<float>& model, const Tensor<float>& image);

struct EvalResult {
  std::vector<std::string> names;
  std::vector<MetricsRecord> per_image;
  MetricsRecord mean;
};

/// Per-image metrics of the thresholded final map. Throws on an empty dataset.
EvalResult evaluate(const Model<float>& model, const Dataset& data);

/// Column order Dice,mIoU,Recall,Precision,F2,HD.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& m);
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace rmamba
