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

#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "rmamba/loss.hpp"
#include "rmamba/model.hpp"
#include "rmamba/ops.hpp"

using namespace rmamba;

TEST_CASE("stem: 32x32 input gives an 8x8 map; non-multiples of 32 are rejected") {
  const auto cfg = ModelConfig::desk(Variant::Tiny);
  ParamBuilder<float> b(1);
  const auto enc = make_encoder(b, cfg);
  std::mt19937_64 rng(1);
  const auto y = stem(oracle::random_tensor<float>({1, 3, 32, 32}, rng), enc.stem);
  CHECK(y.shape() == Shape{1, cfg.channels()[0], 8, 8});
  try {
    stem(Tensor<float>::zeros({1, 3, 250, 256}), enc.stem);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("250") != std::string::npos);
  }
}

TEST_CASE("downsample doubles channels and halves extent") {
  ParamBuilder<float> b(2);
  PatchMerge<float> pm{make_conv(b.scope("conv"), 96, 192, 2, 2, 0), make_layer_norm(b.scope("norm"), 192)};
  const auto y = downsample(Tensor<float>::zeros({1, 96, 64, 64}), pm);
  CHECK(y.shape() == Shape{1, 192, 32, 32});
  CHECK_THROWS_AS(downsample(Tensor<float>::zeros({1, 96, 3, 3}), pm), DimensionError);
}

TEST_CASE("downsample of a constant 2x2 patch with averaging weights") {
  ParamBuilder<double> b(3);
  PatchMerge<double> pm{make_conv(b.scope("conv"), 1, 2, 2, 2, 0), make_layer_norm(b.scope("norm"), 2)};
  // Channel 0 averages the patch, channel 1 doubles the average.
  pm.conv.weight.mutable_data() << 0.25, 0.25, 0.25, 0.25, 0.5, 0.5, 0.5, 0.5;
  pm.conv.bias.mutable_data().setZero();
  const double c = 0.8;
  const auto y = downsample(Tensor<double>::full({1, 1, 2, 2}, c), pm);
  REQUIRE(y.shape() == Shape{1, 2, 1, 1});
  // Conv gives (c, 2c); layer norm over the two channels gives -+ s/sqrt(s^2 + eps)
  // with s = c/2.
  const double s = c / 2;
  const double expect = s / std::sqrt(s * s + 1e-5);
  CHECK(y.data()[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("desk encoder pyramid follows the ladder at any valid size") {
  const auto cfg = ModelConfig::desk(Variant::Tiny);
  CHECK(cfg.channels() == std::array<Index, 4>{12, 24, 48, 96});
  ParamBuilder<float> b(4);
  const auto enc = make_encoder(b, cfg);
  std::mt19937_64 rng(4);
  for (auto [h, w] : std::vector<std::pair<Index, Index>>{{32, 32}, {64, 32}, {32, 96}}) {
    const auto pyr = encode(oracle::random_tensor<float>({2, 3, h, w}, rng), enc);
    for (std::size_t i = 0; i < 4; ++i) {
      const Index stride = Index{4} << i;
      CHECK(pyr[i].shape() == Shape{2, cfg.channels()[i], h / stride, w / stride});
    }
  }
}

TEST_CASE("a loss on the deepest level reaches the stem") {
  Tape<double>::active().clear();
  Model<double> model(ModelConfig::desk(Variant::Tiny), 5);
  std::mt19937_64 rng(5);
  const auto pyr = encode(oracle::random_tensor<double>({1, 3, 32, 32}, rng), model.encoder());
  backward(sum(mul(pyr[3], pyr[3])));
  Tape<double>::active().clear();
  CHECK(model.encoder().stem.conv.weight.grad().matrix().norm() > 0);
  model.zero_grad();
}

TEST_CASE("reduce_channels maps (8,8,768) to (8,8,32); zero weights give zeros") {
  ParamBuilder<float> b(6);
  auto conv = make_conv(b, 768, 32, 3, 1, 1);
  std::mt19937_64 rng(6);
  const auto f = oracle::random_tensor<float>({1, 768, 8, 8}, rng);
  CHECK(apply(conv, f).shape() == Shape{1, 32, 8, 8});
  conv.weight.mutable_data().setZero();
  conv.bias.mutable_data().setZero();
  CHECK((apply(conv, f).data() == 0.0f).all());
}

TEST_CASE("initial prediction with zero weights is one half everywhere") {
  ParamBuilder<float> b(7);
  auto conv = make_conv(b, 32, 1, 1, 1, 0);
  std::mt19937_64 rng(7);
  const auto r4 = oracle::random_tensor<float>({2, 32, 8, 8}, rng, -20, 20);
  const auto live = initial_prediction(r4, conv);
  CHECK(live.logits.shape() == Shape{2, 1, 8, 8});
  CHECK((live.probs.data() > 0.0f).all());
  CHECK((live.probs.data() < 1.0f).all());
  conv.weight.mutable_data().setZero();
  conv.bias.mutable_data().setZero();
  CHECK((initial_prediction(r4, conv).probs.data() == 0.5f).all());
}

TEST_CASE("reverse_op") {
  const auto p = Tensor<float>::from({3}, {0.f, 1.f, 0.3f});
  const auto r = reverse_op(p);
  CHECK(r.data()[0] == 1.f);
  CHECK(r.data()[1] == 0.f);
  CHECK(r.data()[2] == doctest::Approx(0.7f));
  std::mt19937_64 rng(8);
  auto q = oracle::random_tensor<double>({200}, rng, 0, 1);
  const auto rr = reverse_op(reverse_op(q));
  CHECK((rr.data() - q.data()).abs().maxCoeff() <= 0x1p-53);
  for (auto& v : q.mutable_data()) v = std::round(v * 0x1p24) * 0x1p-24;
  CHECK((reverse_op(reverse_op(q)).data() == q.data()).all());
  const auto hi = oracle::random_tensor<float>({200}, rng, 0.5, 1);
  CHECK((reverse_op(reverse_op(hi)).data() == hi.data()).all());
  set_finite_checks(true);
  CHECK_THROWS_AS(reverse_op(Tensor<float>::from({1}, {1.5f})), NumericError);
  set_finite_checks(false);
}

TEST_CASE("rma_stage matches the compositional oracle in both modes") {
  std::mt19937_64 rng(9);
  for (AttentionMode mode : {AttentionMode::RMA, AttentionMode::RA}) {
    const auto st = oracle::make_stage<double>(10, 32, mode);
    const auto next = oracle::random_tensor<double>({1, 1, 2, 2}, rng, -3, 3);
    const auto f = oracle::random_tensor<double>({1, 32, 4, 4}, rng);
    const auto out = rma_stage(next, f, st);
    const auto ref = oracle::rma_stage(next, f, st);
    CHECK(out.logits.shape() == Shape{1, 1, 4, 4});
    for (Index i = 0; i < out.logits.size(); ++i) CHECK(std::abs(out.logits.data()[i] - ref[static_cast<std::size_t>(i)]) <= 1e-5);
    CHECK((out.probs.data() - sigmoid(out.logits).data()).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("closed gate: P = 1 or delta = 0 leaves only f in the refinement") {
  std::mt19937_64 rng(11);
  auto st = oracle::make_stage<double>(12, 8, AttentionMode::RA);
  const auto f = oracle::random_tensor<double>({1, 8, 4, 4}, rng);
  const auto p2_of_f = [&](const Tensor<double>& p) {
    return add(p, apply(st.refine2, relu(apply(st.refine1, f))));
  };
  // Saturated coarse logits: sigmoid is exactly 1 in double.
  const auto closed = Tensor<double>::full({1, 1, 2, 2}, 1e4);
  const auto out = rma_stage(closed, f, st);
  CHECK((out.logits.data() - p2_of_f(resize_bilinear(closed, 4, 4)).data()).abs().maxCoeff() == 0.0);

  st.delta_conv->weight.mutable_data().setZero();
  st.delta_conv->bias.mutable_data().setZero();
  const auto open = oracle::random_tensor<double>({1, 1, 2, 2}, rng);
  const auto out2 = rma_stage(open, f, st);
  CHECK((out2.logits.data() - p2_of_f(resize_bilinear(open, 4, 4)).data()).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("raising P never raises |R| for non-negative delta") {
  std::mt19937_64 rng(13);
  const auto delta = oracle::random_tensor<double>({1, 3, 4, 4}, rng, 0, 2);
  const auto p = oracle::random_tensor<double>({1, 1, 4, 4}, rng, 0, 1);
  auto bumped = p.clone();
  for (auto& v : bumped.mutable_data()) v = std::min(1.0, v + 0.2);
  const auto r1 = mul_channel_broadcast(delta, reverse_op(p));
  const auto r2 = mul_channel_broadcast(delta, reverse_op(bumped));
  CHECK((r2.data().abs() <= r1.data().abs()).all());
}

TEST_CASE("rma_stage rejects non-adjacent levels") {
  const auto st = oracle::make_stage<float>(14, 4, AttentionMode::RA);
  CHECK_THROWS_AS(rma_stage(Tensor<float>::zeros({1, 1, 2, 2}), Tensor<float>::zeros({1, 4, 8, 8}), st),
                  DimensionError);
}

TEST_CASE("decode: map sizes, ranges and batch in both modes") {
  std::mt19937_64 rng(15);
  const auto image = oracle::random_tensor<float>({2, 3, 64, 64}, rng, 0, 1);
  std::array<Shape, 4> shapes_rma;
  for (AttentionMode mode : {AttentionMode::RMA, AttentionMode::RA}) {
    auto cfg = ModelConfig::desk(Variant::Tiny);
    cfg.attention = mode;
    Model<float> model(cfg, 16);
    const auto preds = model.forward(image);
    for (std::size_t i = 0; i < 4; ++i) {
      const Index side = 64 / (Index{4} << i);
      CHECK(preds.logits[i].shape() == Shape{2, 1, side, side});
      CHECK(preds.probs[i].shape() == preds.logits[i].shape());
      CHECK((preds.probs[i].data() >= 0.0f).all());
      CHECK((preds.probs[i].data() <= 1.0f).all());
      if (mode == AttentionMode::RMA) {
        shapes_rma[i] = preds.probs[i].shape();
      } else {
        CHECK(shapes_rma[i] == preds.probs[i].shape());
      }
    }
    CHECK(preds.final.shape() == Shape{2, 1, 64, 64});
    CHECK((preds.final.data() >= 0.0f).all());
    CHECK((preds.final.data() <= 1.0f).all());
  }
}

TEST_CASE("a loss on the final map reaches every encoder stage") {
  Tape<double>::active().clear();
  auto cfg = ModelConfig::desk(Variant::Small);
  Model<double> model(cfg, 17);
  std::mt19937_64 rng(17);
  const auto preds = model.forward(oracle::random_tensor<double>({1, 3, 32, 32}, rng, 0, 1));
  backward(sum(preds.final));
  Tape<double>::active().clear();
  const auto& enc = model.encoder();
  CHECK(enc.stem.conv.weight.grad().matrix().norm() > 0);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(enc.stages[i].downsample.at(0).conv.weight.grad().matrix().norm() > 0);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(enc.stages[i].blocks.back().ffn_out.weight.grad().matrix().norm() > 0);
  }
  model.zero_grad();
}

TEST_CASE("parameter counts order the ablation grid") {
  auto count = [](Variant v, AttentionMode mode, int extra) {
    auto cfg = ModelConfig::desk(v);
    cfg.attention = mode;
    cfg.n_extra_vss = extra;
    return Model<float>(cfg, 0).parameter_count();
  };
  for (Variant v : {Variant::Tiny, Variant::Small}) {
    for (AttentionMode mode : {AttentionMode::RA, AttentionMode::RMA}) {
      CHECK(count(v, mode, 1) > count(v, mode, 0));
    }
    CHECK(count(v, AttentionMode::RMA, 0) > count(v, AttentionMode::RA, 0));
  }
  CHECK(count(Variant::Small, AttentionMode::RMA, 0) > count(Variant::Tiny, AttentionMode::RMA, 0));
}

TEST_CASE("parameter names are unique and found by name") {
  Model<float> model(ModelConfig::desk(Variant::Small), 0);
  std::set<std::string> names;
  Index total = 0;
  for (const auto& p : model.parameters()) {
    CHECK(names.insert(p.name).second);
    CHECK(model.find(p.name) != nullptr);
    total += p.tensor.size();
  }
  CHECK(total == model.parameter_count());
  CHECK(model.find("no.such.parameter") == nullptr);
}
