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

#include "rmamba/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rmamba/loss.hpp"

namespace rmamba {

AugmentParams sample_augment(std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> angle(-kMaxRotationDeg, kMaxRotationDeg);
  AugmentParams p;
  p.hflip = coin(rng);
  p.vflip = coin(rng);
  p.angle_deg = angle(rng);
  return p;
}

namespace {

// Maps output (y, x) to its source position under a rotation about the
// centre by `angle_deg` followed by the flips.
struct Warp {
  double cy, cx, cs, sn;
  Index h, w;
  bool hflip, vflip;

  Warp(Index h_, Index w_, const AugmentParams& p)
      : cy((h_ - 1) / 2.0), cx((w_ - 1) / 2.0), h(h_), w(w_), hflip(p.hflip), vflip(p.vflip) {
    const double rad = p.angle_deg * std::numbers::pi / 180.0;
    cs = std::cos(rad);
    sn = std::sin(rad);
  }

  void source(Index y, Index x, double& sy, double& sx) const {
    const double fy = vflip ? static_cast<double>(h - 1 - y) : static_cast<double>(y);
    const double fx = hflip ? static_cast<double>(w - 1 - x) : static_cast<double>(x);
    const double dy = fy - cy;
    const double dx = fx - cx;
    sy = cy + cs * dy - sn * dx;
    sx = cx + sn * dy + cs * dx;
  }
};

float sample_bilinear(const float* plane, Index h, Index w, double sy, double sx) {
  const double y0f = std::floor(sy);
  const double x0f = std::floor(sx);
  const Index y0 = static_cast<Index>(y0f);
  const Index x0 = static_cast<Index>(x0f);
  const double ty = sy - y0f;
  const double tx = sx - x0f;
  auto px = [&](Index y, Index x) -> double {
    return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : plane[y * w + x];
  };
  return static_cast<float>((1 - ty) * ((1 - tx) * px(y0, x0) + tx * px(y0, x0 + 1)) +
                            ty * ((1 - tx) * px(y0 + 1, x0) + tx * px(y0 + 1, x0 + 1)));
}

}  // namespace

Sample apply_augment(const Sample& s, const AugmentParams& p) {
  const Index c = s.image.dim(0);
  const Index h = s.image.dim(1);
  const Index w = s.image.dim(2);
  if (s.mask.dim(1) != h || s.mask.dim(2) != w) {
    throw DimensionError("augment: image " + to_string(s.image.shape()) + " vs mask " +
                         to_string(s.mask.shape()));
  }
  const Warp warp(h, w, p);
  Tensor<float>::Array img(c * h * w);
  Tensor<float>::Array msk(h * w);
  const float* src_img = s.image.data().data();
  const float* src_msk = s.mask.data().data();
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double sy, sx;
      warp.source(y, x, sy, sx);
      for (Index ch = 0; ch < c; ++ch) {
        img[(ch * h + y) * w + x] = sample_bilinear(src_img + ch * h * w, h, w, sy, sx);
      }
      const Index ny = static_cast<Index>(std::lround(sy));
      const Index nx = static_cast<Index>(std::lround(sx));
      msk[y * w + x] = (ny < 0 || ny >= h || nx < 0 || nx >= w) ? 0.0f : src_msk[ny * w + nx];
    }
  }
  return Sample{s.name, Tensor<float>(s.image.shape(), std::move(img)),
                Tensor<float>(s.mask.shape(), std::move(msk))};
}

void stack_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                 Tensor<float>& images, Tensor<float>& masks) {
  if (indices.empty()) throw DimensionError("stack_batch: empty batch");
  const Sample& first = data.at(indices.front());
  const Index c = first.image.dim(0);
  const Index h = first.image.dim(1);
  const Index w = first.image.dim(2);
  const Index b = static_cast<Index>(indices.size());
  Tensor<float>::Array img(b * c * h * w);
  Tensor<float>::Array msk(b * h * w);
  for (Index i = 0; i < b; ++i) {
    const Sample& s = data.at(indices[static_cast<std::size_t>(i)]);
    if (s.image.shape() != first.image.shape() || s.mask.shape() != first.mask.shape()) {
      throw DimensionError("stack_batch: sample " + s.name + " has shape " +
                           to_string(s.image.shape()) + ", expected " +
                           to_string(first.image.shape()));
    }
    img.segment(i * c * h * w, c * h * w) = s.image.data();
    msk.segment(i * h * w, h * w) = s.mask.data();
  }
  images = Tensor<float>({b, c, h, w}, std::move(img));
  masks = Tensor<float>({b, 1, h, w}, std::move(msk));
}

PredictionSet<float> predict_all(const Model<float>& model, const Tensor<float>& image) {
  NoGradGuard guard;
  return model.forward(image);
}

Tensor<float> predict(const Model<float>& model, const Sample& s) {
  const Tensor<float> batch =
      s.image.ndim() == 3 ? reshape(s.image, {1, s.image.dim(0), s.image.dim(1), s.image.dim(2)})
                          : s.image;
  return predict_all(model, batch).final;
}

double validation_loss(const Model<float>& model, const Dataset& data, int batch_size) {
  if (data.empty()) throw ConfigError("validation_loss: empty dataset");
  NoGradGuard guard;
  const std::size_t bs = static_cast<std::size_t>(std::max(batch_size, 1));
  double total = 0;
  for (std::size_t start = 0; start < data.size(); start += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + bs, data.size()); ++i) idx.push_back(i);
    Tensor<float> images, masks;
    stack_batch(data, idx, images, masks);
    const double loss = combined_loss(model.forward(images), masks).item();
    total += loss * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(Model<float>& model, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset& val_set, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  if (val_set.empty()) throw ConfigError("train: empty validation set");

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  PlateauScheduler scheduler(cfg.lr, cfg.lr_factor, cfg.lr_patience, cfg.plateau_threshold);
  EarlyStopping stopper(cfg.early_stop_patience);
  const auto& params = model.parameters();
  std::vector<Tensor<float>::Array> best;
  double lr = cfg.lr;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  auto& tape = Tape<float>::active();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(start + bs, order.size());
      Dataset batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train_set[order[i]];
        batch.push_back(cfg.augment ? augment(s, rng) : s);
      }
      std::vector<std::size_t> idx(batch.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      Tensor<float> images, masks;
      stack_batch(batch, idx, images, masks);

      model.zero_grad();
      tape.clear();
      const Tensor<float> loss = combined_loss(model.forward(images), masks);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        tape.clear();
        std::ostringstream os;
        os << "train: non-finite loss " << value << " at epoch " << epoch << ", batch starting "
           << train_set[order[start]].name << " (lr " << lr << ")";
        throw NumericError(os.str());
      }
      backward(loss);
      tape.clear();
      adam_step(params, result.optimizer, lr);
      epoch_loss += value * static_cast<double>(end - start);
    }
    epoch_loss /= static_cast<double>(train_set.size());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    rec.val_loss = validation_loss(model, val_set, cfg.batch_size);
    rec.lr = lr;
    result.history.push_back(rec);

    const bool stop = stopper.step(rec.val_loss);
    if (stopper.improved()) {
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
      best.clear();
      for (const auto& p : params) best.push_back(p.tensor.data());
    }
    lr = scheduler.step(rec.val_loss);
    const bool keep_going = on_epoch ? on_epoch(rec) : true;
    if (stop) {
      result.stopped_early = true;
      break;
    }
    if (!keep_going) break;
  }

  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<float> t = params[i].tensor;
      t.mutable_data() = best[i];
    }
  }
  model.zero_grad();
  return result;
}

EvalResult evaluate(const Model<float>& model, const Dataset& data) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  EvalResult out;
  for (const Sample& s : data) {
    const Tensor<float> probs = predict(model, s);
    const Mask pred = binarize(probs);
    const Mask gt = binarize(s.mask);
    out.names.push_back(s.name);
    out.per_image.push_back(compute_metrics(pred, gt));
  }
  out.mean = mean_metrics(out.per_image);
  return out;
}

std::string metrics_csv_header() { return "Dice,mIoU,Recall,Precision,F2,HD"; }

std::string metrics_csv_row(const MetricsRecord& m) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << m.dice << ',' << m.miou << ',' << m.recall << ',' << m.precision << ','
     << m.f2 << ',' << m.hd;
  return os.str();
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,lr\n";
  os.precision(8);
  for (const auto& r : history) {
    os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
  }
  return os.str();
}

}  // namespace rmamba
