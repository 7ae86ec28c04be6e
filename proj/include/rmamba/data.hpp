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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rmamba/tensor.hpp"

namespace rmamba {

/// One training/evaluation pair. image is [3,H,W] in [0,1]; mask is [1,H,W]
/// in {0,1}.
struct Sample {
  std::string name;
  Tensor<float> image;
  Tensor<float> mask;
};

using Dataset = std::vector<Sample>;

/// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
  Index width = 0;
  Index height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Reads PNG (8-bit gray / gray+alpha / RGB / RGBA) or binary PGM/PPM.
/// Alpha is dropped.
Image8 read_image(const std::filesystem::path& path);
/// Format chosen by extension: .png, .pgm (gray) or .ppm (RGB). Written
/// atomically.
void write_image(const std::filesystem::path& path, const Image8& image);

/// Writes `bytes` to `path` via a temporary sibling and a rename, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

/// Bilinear (half-pixel centres) resample of a float plane.
std::vector<float> resize_plane_bilinear(const std::vector<float>& src, Index h, Index w,
                                         Index out_h, Index out_w);
/// Nearest-neighbour resample of a byte plane.
std::vector<std::uint8_t> resize_plane_nearest(const std::vector<std::uint8_t>& src, Index h,
                                               Index w, Index out_h, Index out_w);

/// Converts a raster to a [3,size,size] tensor in [0,1], replicating gray.
Tensor<float> image_to_tensor(const Image8& image, Index size);
/// Converts a {0,255} raster to a [1,size,size] {0,1} tensor. Throws IoError
/// naming `origin` for any other value.
Tensor<float> mask_to_tensor(const Image8& mask, Index size, const std::string& origin);

/// Loads root/images/* and root/masks/* paired by file stem, ordered
/// lexicographically by stem.
Dataset load_dataset(const std::filesystem::path& root, Index size);

/// Procedural liver-like blobs: smooth closed contour, textured interior,
/// distractor structures and additive noise. Deterministic per seed; every
/// mask covers between 5% and 60% of the image.
Dataset synth_dataset(std::uint64_t seed, int n, Index size);

/// Materializes a dataset as images/<name>.png and masks/<name>.png.
void save_dataset(const Dataset& data, const std::filesystem::path& root);

/// Resolves `dir` or `synth:<seed>:<n>` into a dataset at `size`.
Dataset resolve_dataset(const std::string& spec, Index size);

/// Deterministic 80/10/10 split (train, val, test) shuffled by `seed`.
/// Every split is non-empty; tiny datasets reuse the training images.
struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};
DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed);

}  // namespace rmamba
