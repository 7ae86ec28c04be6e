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

#include <vector>

#include "rmamba/scan.hpp"

namespace rmamba {

struct ScanTiming {
  Index length = 0;
  double sequential_ns_per_element = 0;
  double parallel_ns_per_element = 0;
};

struct ScanBenchOptions {
  Index channels = 16;
  Index d_state = 16;
  int repetitions = 5;
  std::uint64_t seed = 0;
};

/// Forward selective_scan on [1, channels, L] inputs for each L. Times are the
/// median over repetitions, divided by L * channels.
std::vector<ScanTiming> bench_scan(const std::vector<Index>& lengths,
                                   const ScanBenchOptions& options = {});

/// Largest over smallest sequential ns/element; 1 means perfectly linear.
double sequential_slope_ratio(const std::vector<ScanTiming>& timings);

}  // namespace rmamba
