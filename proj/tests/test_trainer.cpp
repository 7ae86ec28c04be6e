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

#include "oracles.hpp"
#include "rmamba/ops.hpp"
#include "rmamba/trainer.hpp"

using namespace rmamba;

namespace {

ParamList<double> single_param(double value) {
  return {NamedParam<double>{"p", Tensor<double>::from({1}, {value}, true)}};
}

ModelConfig tiny_model() {
  ModelConfig cfg = ModelConfig::desk(Variant::Tiny);
  cfg.ladder = {8, 16, 32, 64};
  cfg.desk_divisor = 1;
  cfg.depths = {1, 1, 1, 1};
  cfg.d_state = 4;
  cfg.decoder_channels = 8;
  return cfg;
}

TrainConfig quick_train(int epochs) {
  TrainConfig t = TrainConfig::desk();
  t.max_epochs = epochs;
  t.image_size = 32;
  t.batch_size = 2;
  return t;
}

}  // namespace

TEST_CASE("first Adam step on p=0, g=1 moves by -lr") {
  auto params = single_param(0.0);
  params[0].tensor.node()->accumulate(Tensor<double>::Array::Ones(1));
  AdamState<double> st;
  adam_step(params, st, 1e-4);
  CHECK(params[0].tensor.data()[0] == doctest::Approx(-1e-4 / (1 + 1e-8)).epsilon(1e-12));
  CHECK(st.step == 1);
}

TEST_CASE("zero gradients leave parameters unchanged but count the step") {
  auto params = single_param(0.3);
  params[0].tensor.node()->accumulate(Tensor<double>::Array::Zero(1));
  AdamState<double> st;
  adam_step(params, st, 1e-2);
  CHECK(params[0].tensor.data()[0] == 0.3);
  CHECK(st.step == 1);
  CHECK(st.m[0].size() == params[0].tensor.size());
}

TEST_CASE("Adam without gradients is an error") {
  auto params = single_param(0.3);
  AdamState<double> st;
  CHECK_THROWS_AS(adam_step(params, st, 1e-2), AutodiffError);
}

TEST_CASE("Adam descends p^2 monotonically at the end of 50 steps") {
  auto params = single_param(1.0);
  AdamState<double> st;
  std::vector<double> f;
  auto& tape = Tape<double>::active();
  for (int i = 0; i < 50; ++i) {
    tape.clear();
    params[0].tensor.zero_grad();
    const auto loss = sum(mul(params[0].tensor, params[0].tensor));
    f.push_back(loss.item());
    backward(loss);
    tape.clear();
    adam_step(params, st, 0.01);
  }
  for (std::size_t i = 40; i < 50; ++i) CHECK(f[i] < f[i - 1]);
}

TEST_CASE("plateau scheduler cuts the rate after patience+1 stagnant epochs") {
  PlateauScheduler s(1e-4, 0.1, 5);
  double lr = s.step(1.0);
  CHECK(lr == 1e-4);
  for (int i = 1; i <= 5; ++i) CHECK(s.step(1.0) == 1e-4);
  CHECK(s.step(1.0) == doctest::Approx(1e-5));
  double prev = s.lr();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> noise(0.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    const double now = s.step(noise(rng));
    CHECK(now <= prev);
    prev = now;
  }
}

TEST_CASE("early stopping on a constant loss fires at patience+1") {
  const int patience = 7;
  EarlyStopping es(patience);
  int stopped = 0;
  for (int epoch = 1; epoch <= 100; ++epoch) {
    if (es.step(0.5)) {
      stopped = epoch;
      break;
    }
  }
  CHECK(stopped == patience + 1);
}

TEST_CASE("early stopping never fires while the loss improves") {
  EarlyStopping es(3);
  for (int epoch = 1; epoch <= 50; ++epoch) CHECK_FALSE(es.step(1.0 / epoch));
}

TEST_CASE("augment: double hflip is the identity and masks stay binary") {
  const Dataset d = synth_dataset(3, 1, 32);
  AugmentParams flip;
  flip.hflip = true;
  const Sample twice = apply_augment(apply_augment(d[0], flip), flip);
  CHECK((twice.image.data() == d[0].image.data()).all());
  CHECK((twice.mask.data() == d[0].mask.data()).all());

  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Sample s = augment(d[0], rng);
    CHECK(s.image.shape() == d[0].image.shape());
    CHECK(((s.mask.data() == 0.0f) || (s.mask.data() == 1.0f)).all());
  }
}

TEST_CASE("augment: same seed, same result") {
  const Dataset d = synth_dataset(5, 1, 32);
  std::mt19937_64 r1(9), r2(9);
  const Sample a = augment(d[0], r1);
  const Sample b = augment(d[0], r2);
  CHECK((a.image.data() == b.image.data()).all());
  CHECK((a.mask.data() == b.mask.data()).all());
}

TEST_CASE("augment: a rotation keeps image and mask aligned") {
  // Mark the mask foreground in the image's first channel; after any
  // transform the two must still coincide (up to interpolation at edges).
  const Dataset d = synth_dataset(6, 1, 32);
  Sample s = d[0];
  s.image = s.image.clone();
  s.image.mutable_data().head(32 * 32) = s.mask.data();
  AugmentParams p;
  p.angle_deg = 11;
  p.vflip = true;
  const Sample t = apply_augment(s, p);
  Index agree = 0;
  for (Index i = 0; i < 32 * 32; ++i) {
    agree += (t.image.data()[i] >= 0.5f) == (t.mask.data()[i] >= 0.5f);
  }
  CHECK(agree >= 32 * 32 * 97 / 100);
}

TEST_CASE("training history is reproducible and the best weights are restored") {
  const Dataset data = synth_dataset(7, 4, 32);
  const TrainConfig tc = quick_train(3);
  Model<float> m1(tiny_model(), 11);
  Model<float> m2(tiny_model(), 11);
  const auto r1 = train(m1, tc, data, data);
  const auto r2 = train(m2, tc, data, data);
  REQUIRE(r1.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
    CHECK(r1.history[i].lr == r2.history[i].lr);
  }
  CHECK(validation_loss(m1, data, tc.batch_size) == doctest::Approx(r1.best_val_loss).epsilon(1e-6));
}

TEST_CASE("training aborts on a non-finite loss") {
  Dataset data = synth_dataset(8, 2, 32);
  data[0].image = data[0].image.clone();
  data[0].image.mutable_data()[5] = std::numeric_limits<float>::quiet_NaN();
  Model<float> m(tiny_model(), 12);
  CHECK_THROWS_AS(train(m, quick_train(1), data, data), NumericError);
  Tape<float>::active().clear();
}

TEST_CASE("training rejects empty splits") {
  Model<float> m(tiny_model(), 13);
  const Dataset data = synth_dataset(9, 2, 32);
  CHECK_THROWS_AS(train(m, quick_train(1), Dataset{}, data), ConfigError);
  CHECK_THROWS_AS(train(m, quick_train(1), data, Dataset{}), ConfigError);
}

TEST_CASE("evaluate: deterministic, rejects empty sets, perfect labels score one") {
  const Dataset data = synth_dataset(10, 3, 32);
  Model<float> m(tiny_model(), 14);
  const auto a = evaluate(m, data);
  const auto b = evaluate(m, data);
  CHECK(a.per_image.size() == 3);
  CHECK(metrics_csv_row(a.mean) == metrics_csv_row(b.mean));
  CHECK_THROWS_AS(evaluate(m, Dataset{}), ConfigError);

  std::vector<MetricsRecord> perfect;
  for (const auto& s : data) perfect.push_back(compute_metrics(binarize(s.mask), binarize(s.mask)));
  const auto mean = mean_metrics(perfect);
  for (double v : {mean.dice, mean.miou, mean.recall, mean.precision, mean.f2}) CHECK(v == 1.0);
}

TEST_CASE("csv layouts") {
  CHECK(metrics_csv_header() == "Dice,mIoU,Recall,Precision,F2,HD");
  std::vector<EpochRecord> h{{1, 0.5, 0.6, 1e-4}};
  CHECK(history_csv(h).rfind("epoch,train_loss,val_loss,lr\n1,", 0) == 0);
}
