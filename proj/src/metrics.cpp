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

#include "rmamba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmamba {

template <typename Scalar>
Mask binarize(const Tensor<Scalar>& probs, Index index, double threshold) {
  const int nd = probs.ndim();
  if (nd < 2) throw DimensionError("binarize: need at least two axes");
  const Index h = probs.dim(-2);
  const Index w = probs.dim(-1);
  if ((index + 1) * h * w > probs.size() || index < 0) {
    throw DimensionError("binarize: plane index out of range");
  }
  Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> plane(
      probs.data().data() + index * h * w, h, w);
  return binarize(plane, threshold);
}

template Mask binarize(const Tensor<float>&, Index, double);
template Mask binarize(const Tensor<double>&, Index, double);

namespace {

void require_same_extent(const Mask& a, const Mask& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": mask extents differ (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
  }
}

double ratio_or(double num, double den, double fallback) { return den > 0 ? num / den : fallback; }

// Exact 1-D squared distance transform of a sampled function (lower envelope
// of parabolas rooted at each sample).
void edt_1d(const double* f, Index n, Index stride, double* out, std::vector<Index>& v,
            std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Index k = -1;
  for (Index q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == inf) continue;
    if (k < 0) {
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      k = 0;
      continue;
    }
    double s;
    for (;;) {
      const Index p = v[static_cast<std::size_t>(k)];
      s = ((fq + static_cast<double>(q * q)) - (f[p * stride] + static_cast<double>(p * p))) /
          (2.0 * static_cast<double>(q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        if (--k < 0) break;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k + 1)] = inf;
  }
  if (k < 0) {
    for (Index q = 0; q < n; ++q) out[q * stride] = inf;
    return;
  }
  Index j = 0;
  for (Index q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j + 1)] < static_cast<double>(q)) ++j;
    const Index p = v[static_cast<std::size_t>(j)];
    const double d = static_cast<double>(q - p);
    out[q * stride] = d * d + f[p * stride];
  }
}

}  // namespace

ConfusionCounts confusion_counts(const Mask& pred, const Mask& gt) {
  require_same_extent(pred, gt, "confusion_counts");
  ConfusionCounts c;
  const auto p = pred.cast<bool>();
  const auto g = gt.cast<bool>();
  c.tp = (p && g).count();
  c.fp = (p && !g).count();
  c.fn = (!p && g).count();
  c.tn = (!p && !g).count();
  return c;
}

std::vector<std::pair<Index, Index>> boundary_pixels(const Mask& mask) {
  std::vector<std::pair<Index, Index>> out;
  const Index h = mask.rows();
  const Index w = mask.cols();
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      if (!mask(r, c)) continue;
      bool edge = false;
      for (Index dr = -1; dr <= 1 && !edge; ++dr) {
        for (Index dc = -1; dc <= 1 && !edge; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const Index rr = r + dr;
          const Index cc = c + dc;
          edge = rr < 0 || rr >= h || cc < 0 || cc >= w || !mask(rr, cc);
        }
      }
      if (edge) out.emplace_back(r, c);
    }
  }
  return out;
}

Eigen::ArrayXXd squared_distance_transform(const Mask& features) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Index h = features.rows();
  const Index w = features.cols();
  // Row-major so that (r, c) -> r * w + c, matching the Mask layout.
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) f(r, c) = features(r, c) ? 0.0 : inf;
  }
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp(h, w);
  const Index n = std::max(h, w);
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n + 1));
  for (Index c = 0; c < w; ++c) edt_1d(f.data() + c, h, w, tmp.data() + c, v, z);
  for (Index r = 0; r < h; ++r) edt_1d(tmp.data() + r * w, w, 1, f.data() + r * w, v, z);
  return f;
}

double hausdorff_distance(const Mask& a, const Mask& b) {
  require_same_extent(a, b, "hausdorff_distance");
  const auto ba = boundary_pixels(a);
  const auto bb = boundary_pixels(b);
  if (ba.empty() || bb.empty()) {
    throw std::invalid_argument("hausdorff_distance: both masks must be non-empty");
  }
  Mask edge_a = Mask::Zero(a.rows(), a.cols());
  Mask edge_b = Mask::Zero(b.rows(), b.cols());
  for (const auto& [r, c] : ba) edge_a(r, c) = 1;
  for (const auto& [r, c] : bb) edge_b(r, c) = 1;
  const Eigen::ArrayXXd to_a = squared_distance_transform(edge_a);
  const Eigen::ArrayXXd to_b = squared_distance_transform(edge_b);
  double worst = 0;
  for (const auto& [r, c] : ba) worst = std::max(worst, to_b(r, c));
  for (const auto& [r, c] : bb) worst = std::max(worst, to_a(r, c));
  return std::sqrt(worst);
}

MetricsRecord compute_metrics(const Mask& pred, const Mask& gt) {
  require_same_extent(pred, gt, "compute_metrics");
  const ConfusionCounts c = confusion_counts(pred, gt);
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  const auto tn = static_cast<double>(c.tn);
  const bool pred_empty = c.tp + c.fp == 0;
  const bool gt_empty = c.tp + c.fn == 0;

  MetricsRecord m;
  m.dice = ratio_or(2 * tp, 2 * tp + fp + fn, 1.0);
  m.iou = ratio_or(tp, tp + fp + fn, 1.0);
  const double iou_bg = ratio_or(tn, tn + fp + fn, 1.0);
  m.miou = 0.5 * (m.iou + iou_bg);
  m.precision = ratio_or(tp, tp + fp, gt_empty ? 1.0 : 0.0);
  m.recall = ratio_or(tp, tp + fn, pred_empty ? 1.0 : 0.0);
  m.f2 = ratio_or(5 * m.precision * m.recall, 4 * m.precision + m.recall, 0.0);
  if (pred_empty && gt_empty) {
    m.hd = 0;
  } else if (pred_empty || gt_empty) {
    m.hd = std::hypot(static_cast<double>(pred.rows()), static_cast<double>(pred.cols()));
    m.hd_sentinel = true;
  } else {
    m.hd = hausdorff_distance(pred, gt);
  }
  return m;
}

MetricsRecord mean_metrics(const std::vector<MetricsRecord>& records) {
  MetricsRecord m;
  if (records.empty()) return m;
  for (const auto& r : records) {
    m.dice += r.dice;
    m.miou += r.miou;
    m.recall += r.recall;
    m.precision += r.precision;
    m.f2 += r.f2;
    m.hd += r.hd;
    m.iou += r.iou;
    m.hd_sentinel = m.hd_sentinel || r.hd_sentinel;
  }
  const auto n = static_cast<double>(records.size());
  m.dice /= n;
  m.miou /= n;
  m.recall /= n;
  m.precision /= n;
  m.f2 /= n;
  m.hd /= n;
  m.iou /= n;
  return m;
}

}  // namespace rmamba
