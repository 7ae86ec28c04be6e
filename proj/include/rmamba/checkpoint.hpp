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

#include <filesystem>
#include <optional>

#include "rmamba/model.hpp"
#include "rmamba/optim.hpp"

namespace rmamba {

inline constexpr char kCheckpointMagic[8] = {'R', 'M', 'A', 'M', 'B', 'A', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Model config, every parameter (float32, little endian) and optionally the
/// optimizer moments, followed by a CRC32 of everything before it.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const AdamState<float>* optimizer = nullptr);

struct Checkpoint {
  ModelConfig config;
  Model<float> model;
  std::optional<AdamState<float>> optimizer;
};

/// Rebuilds the model from the stored config. Throws IoError on a truncated
/// or corrupt file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads parameters into an existing model. Throws ConfigError if the stored
/// config differs from the model's.
void load_into(const std::filesystem::path& path, Model<float>& model,
               AdamState<float>* optimizer = nullptr);

}  // namespace rmamba
