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

#include "rmamba/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

namespace rmamba {

namespace {

Tensor<float> random_tensor(Shape shape, std::mt19937_64& rng, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor<float>::Array a(numel(shape));
  for (auto& v : a) v = dist(rng);
  return Tensor<float>(std::move(shape), std::move(a));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

std::vector<ScanTiming> bench_scan(const std::vector<Index>& lengths,
                                   const ScanBenchOptions& o) {
  if (o.repetitions < 1) throw ConfigError("bench_scan: repetitions must be >= 1");
  NoGradGuard guard;
  std::mt19937_64 rng(o.seed);
  std::vector<ScanTiming> out;
  for (Index l : lengths) {
    if (l < 1) throw ConfigError("bench_scan: lengths must be positive");
    const Index d = o.channels;
    const Index s = o.d_state;
    const Tensor<float> u = random_tensor({1, d, l}, rng, -1, 1);
    const Tensor<float> delta = random_tensor({1, d, l}, rng, 0.001f, 0.1f);
    const Tensor<float> a = random_tensor({d, s}, rng, -2, -0.1f);
    const Tensor<float> b = random_tensor({1, s, l}, rng, -1, 1);
    const Tensor<float> c = random_tensor({1, s, l}, rng, -1, 1);
    const Tensor<float> dd = random_tensor({d}, rng, -1, 1);
    ScanTiming t;
    t.length = l;
    for (ScanAlgorithm algo : {ScanAlgorithm::Sequential, ScanAlgorithm::Parallel}) {
      selective_scan(u, delta, a, b, c, dd, algo);  // warm-up
      std::vector<double> runs;
      for (int r = 0; r < o.repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        selective_scan(u, delta, a, b, c, dd, algo);
        runs.push_back(
            std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0)
                .count());
      }
      const double ns = median(runs) / static_cast<double>(l * d);
      (algo == ScanAlgorithm::Sequential ? t.sequential_ns_per_element
                                         : t.parallel_ns_per_element) = ns;
    }
    out.push_back(t);
  }
  return out;
}

double sequential_slope_ratio(const std::vector<ScanTiming>& timings) {
  if (timings.empty()) return 1.0;
  double lo = timings.front().sequential_ns_per_element;
  double hi = lo;
  for (const auto& t : timings) {
    lo = std::min(lo, t.sequential_ns_per_element);
    hi = std::max(hi, t.sequential_ns_per_element);
  }
  return hi / lo;
}

}  // namespace rmamba
