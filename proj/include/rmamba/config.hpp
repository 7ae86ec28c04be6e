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

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "rmamba/scan.hpp"
#include "rmamba/tensor.hpp"

namespace rmamba {

enum class Variant { Tiny, Small };
enum class AttentionMode { RMA, RA };

/// Architecture description. Everything that changes parameter shapes lives
/// here, so two models with equal configs are checkpoint-compatible.
struct ModelConfig {
  Variant variant = Variant::Tiny;
  /// Additional VSS blocks applied to every pyramid level after the encoder.
  int n_extra_vss = 0;
  AttentionMode attention = AttentionMode::RMA;
  std::array<Index, 4> ladder{96, 192, 384, 768};
  std::array<Index, 4> depths{2, 2, 2, 2};
  /// Divides every ladder entry; 1 reproduces the full-width network.
  Index desk_divisor = 1;
  Index d_state = 16;
  Index expansion = 2;
  Index ffn_ratio = 4;
  Index decoder_channels = 32;
  ScanAlgorithm scan = ScanAlgorithm::Sequential;

  /// Tiny: no extra VSS blocks. Small: one extra block and a deeper third
  /// stage.
  static ModelConfig for_variant(Variant v);
  /// for_variant(v) with the ladder divided by 8.
  static ModelConfig desk(Variant v);

  std::array<Index, 4> channels() const;
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double lr = 1e-4;
  double lr_factor = 0.1;
  int lr_patience = 5;
  /// Relative improvement below which an epoch counts as stagnant.
  double plateau_threshold = 1e-4;
  int max_epochs = 500;
  int early_stop_patience = 50;
  int batch_size = 16;
  Index image_size = 256;
  std::uint64_t seed = 0;
  bool augment = true;

  /// Small-image, fast-converging settings for laptop runs.
  static TrainConfig desk();
  void validate() const;
  std::map<std::string, std::string> to_map() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

/// Parses flat `key=value` text; `#` starts a comment. `variant` and
/// `preset` are applied first so later keys override their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string serialize(const ModelConfig& cfg);
ModelConfig parse_model_config(const std::string& text);

std::string to_string(Variant v);
std::string to_string(AttentionMode m);

}  // namespace rmamba
