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

#include "rmamba/model.hpp"

namespace rmamba {

template <typename Scalar>
Model<Scalar>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  ParamBuilder<Scalar> b(seed);
  encoder_ = make_encoder(b.scope("encoder"), cfg_);
  const auto ch = cfg_.channels();
  for (std::size_t i = 0; i < 4; ++i) {
    const VssConfig vc{ch[i], cfg_.d_state, cfg_.expansion, cfg_.ffn_ratio, cfg_.scan};
    for (int k = 0; k < cfg_.n_extra_vss; ++k) {
      extra_[i].push_back(make_vss(
          b.scope("extra" + std::to_string(i + 1) + ".block" + std::to_string(k)), vc));
    }
  }
  decoder_ = make_decoder(b.scope("decoder"), cfg_);
  params_ = b.params();
}

template <typename Scalar>
Index Model<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

template <typename Scalar>
const Tensor<Scalar>* Model<Scalar>::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

template <typename Scalar>
FeaturePyramid<Scalar> Model<Scalar>::features(const Tensor<Scalar>& image) const {
  FeaturePyramid<Scalar> pyr = encode(image, encoder_);
  for (std::size_t i = 0; i < 4; ++i) pyr[i] = vss_stack(pyr[i], extra_[i]);
  return pyr;
}

template <typename Scalar>
PredictionSet<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& image) const {
  return decode(features(image), decoder_);
}

template <typename Scalar>
void Model<Scalar>::zero_grad() const {
  for (const auto& p : params_) {
    Tensor<Scalar> t = p.tensor;
    t.zero_grad();
  }
}

template class Model<float>;
template class Model<double>;

}  // namespace rmamba
