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
#include <string>
#include <vector>

#include "rmamba/decoder.hpp"

namespace rmamba {

/// Encoder, optional extra VSS blocks per pyramid level, and the reverse
/// attention decoder. Parameters are leaves registered in construction order.
template <typename Scalar>
class Model {
 public:
  explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const ParamList<Scalar>& parameters() const { return params_; }
  Index parameter_count() const;
  /// Pointer to the named parameter, or nullptr.
  const Tensor<Scalar>* find(const std::string& name) const;

  /// Backbone features after the extra VSS blocks.
  FeaturePyramid<Scalar> features(const Tensor<Scalar>& image) const;
  PredictionSet<Scalar> forward(const Tensor<Scalar>& image) const;

  const Encoder<Scalar>& encoder() const { return encoder_; }
  const Decoder<Scalar>& decoder() const { return decoder_; }

  void zero_grad() const;

 private:
  ModelConfig cfg_;
  ParamList<Scalar> params_;
  Encoder<Scalar> encoder_;
  std::array<std::vector<VssBlock<Scalar>>, 4> extra_;
  Decoder<Scalar> decoder_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace rmamba
