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

#include "rmamba/data.hpp"

#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace rmamba {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

bool is_image_file(const fs::path& p) {
  const std::string e = lower_ext(p);
  return e == ".png" || e == ".pgm" || e == ".ppm";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image8 read_png(const fs::path& path) {
  const std::string bytes = slurp(path);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  Image8 out;
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.width = img.width;
  out.height = img.height;
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  return out;
}

// Binary PGM (P5) / PPM (P6), maxval <= 255.
Image8 read_pnm(const fs::path& path) {
  const std::string bytes = slurp(path);
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") {
    throw IoError("unsupported PNM variant in " + path.string() + " (need P5 or P6)");
  }
  Image8 out;
  try {
    out.width = std::stol(token());
    out.height = std::stol(token());
    const long maxval = std::stol(token());
    if (maxval <= 0 || maxval > 255) throw IoError("only 8-bit PNM is supported");
  } catch (const std::logic_error&) {
    throw IoError("malformed PNM header in " + path.string());
  }
  ++pos;  // single whitespace before the raster
  out.channels = magic == "P5" ? 1 : 3;
  const auto n = static_cast<std::size_t>(out.width * out.height * out.channels);
  if (out.width <= 0 || out.height <= 0 || pos + n > bytes.size()) {
    throw IoError("truncated PNM raster in " + path.string());
  }
  out.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return out;
}

}  // namespace

Image8 read_image(const fs::path& path) {
  const std::string e = lower_ext(path);
  if (e == ".png") return read_png(path);
  if (e == ".pgm" || e == ".ppm") return read_pnm(path);
  throw IoError("unsupported image format: " + path.string());
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_image(const fs::path& path, const Image8& image) {
  const auto expected = static_cast<std::size_t>(image.width * image.height * image.channels);
  if ((image.channels != 1 && image.channels != 3) || image.pixels.size() != expected) {
    throw IoError("write_image: inconsistent raster for " + path.string());
  }
  const std::string e = lower_ext(path);
  std::string bytes;
  if (e == ".png") {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
      throw IoError("cannot encode PNG " + path.string() + ": " + img.message);
    }
    bytes.resize(size);
    if (!png_image_write_to_memory(&img, bytes.data(), &size, 0, image.pixels.data(), 0,
                                   nullptr)) {
      throw IoError("cannot encode PNG " + path.string() + ": " + img.message);
    }
    bytes.resize(size);
  } else if (e == ".pgm" || e == ".ppm") {
    if ((e == ".pgm") != (image.channels == 1)) {
      throw IoError("write_image: " + e + " does not match channel count");
    }
    bytes = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
            std::to_string(image.height) + "\n255\n";
    bytes.append(image.pixels.begin(), image.pixels.end());
  } else {
    throw IoError("unsupported output format: " + path.string());
  }
  write_file_atomic(path, bytes);
}

std::vector<float> resize_plane_bilinear(const std::vector<float>& src, Index h, Index w,
                                         Index out_h, Index out_w) {
  if (h == out_h && w == out_w) return src;
  std::vector<float> out(static_cast<std::size_t>(out_h * out_w));
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (Index oy = 0; oy < out_h; ++oy) {
    const double fy = std::max(0.0, (static_cast<double>(oy) + 0.5) * sy - 0.5);
    const Index y0 = std::min(static_cast<Index>(fy), h - 1);
    const Index y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Index ox = 0; ox < out_w; ++ox) {
      const double fx = std::max(0.0, (static_cast<double>(ox) + 0.5) * sx - 0.5);
      const Index x0 = std::min(static_cast<Index>(fx), w - 1);
      const Index x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      auto at = [&](Index y, Index x) { return static_cast<double>(src[static_cast<std::size_t>(y * w + x)]); };
      const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
                       wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
      out[static_cast<std::size_t>(oy * out_w + ox)] = static_cast<float>(v);
    }
  }
  return out;
}

std::vector<std::uint8_t> resize_plane_nearest(const std::vector<std::uint8_t>& src, Index h,
                                               Index w, Index out_h, Index out_w) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_h * out_w));
  for (Index oy = 0; oy < out_h; ++oy) {
    const Index y = std::min(h - 1, oy * h / out_h);
    for (Index ox = 0; ox < out_w; ++ox) {
      const Index x = std::min(w - 1, ox * w / out_w);
      out[static_cast<std::size_t>(oy * out_w + ox)] = src[static_cast<std::size_t>(y * w + x)];
    }
  }
  return out;
}

Tensor<float> image_to_tensor(const Image8& image, Index size) {
  const Index plane = image.width * image.height;
  Tensor<float>::Array data(3 * size * size);
  for (int c = 0; c < 3; ++c) {
    const int src_c = image.channels == 1 ? 0 : c;
    std::vector<float> p(static_cast<std::size_t>(plane));
    for (Index i = 0; i < plane; ++i) {
      p[static_cast<std::size_t>(i)] =
          static_cast<float>(image.pixels[static_cast<std::size_t>(i * image.channels + src_c)]) /
          255.0f;
    }
    const std::vector<float> r = resize_plane_bilinear(p, image.height, image.width, size, size);
    for (Index i = 0; i < size * size; ++i) data[c * size * size + i] = r[static_cast<std::size_t>(i)];
  }
  return Tensor<float>({3, size, size}, std::move(data));
}

Tensor<float> mask_to_tensor(const Image8& mask, Index size, const std::string& origin) {
  const Index plane = mask.width * mask.height;
  std::vector<std::uint8_t> p(static_cast<std::size_t>(plane));
  for (Index i = 0; i < plane; ++i) {
    std::uint8_t v = mask.pixels[static_cast<std::size_t>(i * mask.channels)];
    for (int c = 1; c < mask.channels; ++c) {
      if (mask.pixels[static_cast<std::size_t>(i * mask.channels + c)] != v) {
        throw IoError("mask " + origin + " has differing colour channels");
      }
    }
    if (v != 0 && v != 255) {
      throw IoError("mask " + origin + " contains value " + std::to_string(v) +
                    " (expected only 0 and 255)");
    }
    p[static_cast<std::size_t>(i)] = v ? 1 : 0;
  }
  const auto r = resize_plane_nearest(p, mask.height, mask.width, size, size);
  Tensor<float>::Array data(size * size);
  for (Index i = 0; i < size * size; ++i) data[i] = r[static_cast<std::size_t>(i)];
  return Tensor<float>({1, size, size}, std::move(data));
}

Dataset load_dataset(const fs::path& root, Index size) {
  const fs::path img_dir = root / "images";
  const fs::path mask_dir = root / "masks";
  if (!fs::is_directory(img_dir) || !fs::is_directory(mask_dir)) {
    throw IoError("dataset " + root.string() + " needs images/ and masks/ subdirectories");
  }
  auto scan = [](const fs::path& dir) {
    std::map<std::string, fs::path> by_stem;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
      const std::string stem = entry.path().stem().string();
      if (!by_stem.emplace(stem, entry.path()).second) {
        throw IoError("duplicate stem '" + stem + "' in " + dir.string());
      }
    }
    return by_stem;
  };
  const auto images = scan(img_dir);
  const auto masks = scan(mask_dir);
  for (const auto& [stem, path] : images) {
    if (!masks.count(stem)) throw IoError("image without mask: " + path.string());
  }
  for (const auto& [stem, path] : masks) {
    if (!images.count(stem)) throw IoError("mask without image: " + path.string());
  }
  Dataset out;
  for (const auto& [stem, path] : images) {
    const fs::path& mpath = masks.at(stem);
    Sample s;
    s.name = stem;
    s.image = image_to_tensor(read_image(path), size);
    s.mask = mask_to_tensor(read_image(mpath), size, mpath.string());
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct Blob {
  double cx, cy, r0;
  std::array<double, 4> amp, phase;  // harmonics 2..5

  double radius(double theta) const {
    double r = 1;
    for (std::size_t k = 0; k < amp.size(); ++k) {
      r += amp[k] * std::cos(static_cast<double>(k + 2) * theta + phase[k]);
    }
    return r0 * r;
  }
  bool inside(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::hypot(dx, dy) < radius(std::atan2(dy, dx));
  }
};

Blob random_blob(std::mt19937_64& rng, double size, double min_frac, double max_frac) {
  std::uniform_real_distribution<double> uni(0, 1);
  Blob b{};
  b.cx = size * (0.35 + 0.3 * uni(rng));
  b.cy = size * (0.35 + 0.3 * uni(rng));
  const double frac = min_frac + (max_frac - min_frac) * uni(rng);
  b.r0 = size * std::sqrt(frac / std::numbers::pi);
  for (std::size_t k = 0; k < b.amp.size(); ++k) {
    b.amp[k] = uni(rng) * 0.25 / static_cast<double>(k + 2);
    b.phase[k] = 2 * std::numbers::pi * uni(rng);
  }
  return b;
}

}  // namespace

Dataset synth_dataset(std::uint64_t seed, int n, Index size) {
  if (n < 1) throw std::invalid_argument("synth_dataset: n must be >= 1");
  if (size < 8) throw std::invalid_argument("synth_dataset: size must be >= 8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0, 1);
  std::normal_distribution<double> noise(0, 0.03);
  const double s = static_cast<double>(size);
  const Index plane = size * size;
  Dataset out;
  for (int i = 0; i < n; ++i) {
    Blob liver{};
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(plane));
    for (;;) {
      liver = random_blob(rng, s, 0.12, 0.45);
      Index count = 0;
      for (Index y = 0; y < size; ++y) {
        for (Index x = 0; x < size; ++x) {
          const bool in = liver.inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
          mask[static_cast<std::size_t>(y * size + x)] = in ? 1 : 0;
          count += in;
        }
      }
      const double frac = static_cast<double>(count) / static_cast<double>(plane);
      if (frac >= 0.05 && frac <= 0.6) break;
    }
    // Two smaller, differently bright structures that are not part of the mask.
    std::array<Blob, 2> distractors{random_blob(rng, s, 0.01, 0.04),
                                    random_blob(rng, s, 0.01, 0.04)};
    for (auto& d : distractors) {
      d.cx = s * uni(rng);
      d.cy = s * uni(rng);
    }
    const std::array<double, 2> distractor_level{0.25 + 0.2 * uni(rng), 0.75 + 0.2 * uni(rng)};
    const double bg = 0.1 + 0.1 * uni(rng);
    const double grad_x = 0.1 * (uni(rng) - 0.5);
    const double grad_y = 0.1 * (uni(rng) - 0.5);
    const double organ = 0.5 + 0.1 * uni(rng);
    const double fx = 2 * std::numbers::pi * (2 + 3 * uni(rng)) / s;
    const double fy = 2 * std::numbers::pi * (2 + 3 * uni(rng)) / s;
    const double ph = 2 * std::numbers::pi * uni(rng);

    Tensor<float>::Array img(3 * plane);
    Tensor<float>::Array msk(plane);
    for (Index y = 0; y < size; ++y) {
      for (Index x = 0; x < size; ++x) {
        const double px = static_cast<double>(x) + 0.5;
        const double py = static_cast<double>(y) + 0.5;
        const Index k = y * size + x;
        double v = bg + grad_x * px / s + grad_y * py / s;
        for (std::size_t j = 0; j < distractors.size(); ++j) {
          if (distractors[j].inside(px, py)) v = distractor_level[j];
        }
        if (mask[static_cast<std::size_t>(k)]) {
          v = organ + 0.05 * std::sin(fx * px + ph) * std::cos(fy * py);
        }
        v = std::clamp(v + noise(rng), 0.0, 1.0);
        for (Index c = 0; c < 3; ++c) img[c * plane + k] = static_cast<float>(v);
        msk[k] = mask[static_cast<std::size_t>(k)];
      }
    }
    Sample smp;
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%05d", i);
    smp.name = name;
    smp.image = Tensor<float>({3, size, size}, std::move(img));
    smp.mask = Tensor<float>({1, size, size}, std::move(msk));
    out.push_back(std::move(smp));
  }
  return out;
}

void save_dataset(const Dataset& data, const fs::path& root) {
  for (const Sample& s : data) {
    const Index h = s.image.dim(1);
    const Index w = s.image.dim(2);
    Image8 img{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w))};
    Image8 msk{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w))};
    for (Index i = 0; i < h * w; ++i) {
      img.pixels[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(std::lround(std::clamp(s.image.data()[i], 0.0f, 1.0f) * 255.0f));
      msk.pixels[static_cast<std::size_t>(i)] = s.mask.data()[i] >= 0.5f ? 255 : 0;
    }
    write_image(root / "images" / (s.name + ".png"), img);
    write_image(root / "masks" / (s.name + ".png"), msk);
  }
}

Dataset resolve_dataset(const std::string& spec, Index size) {
  if (spec.rfind("synth:", 0) == 0) {
    const std::string rest = spec.substr(6);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("synthetic data spec must be synth:<seed>:<n>, got " + spec);
    }
    try {
      const auto seed = std::stoull(rest.substr(0, colon));
      const int n = std::stoi(rest.substr(colon + 1));
      return synth_dataset(seed, n, size);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("synthetic data spec must be synth:<seed>:<n>, got " + spec);
    }
  }
  return load_dataset(spec, size);
}

DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("split_dataset: empty dataset");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = data.size();
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  DatasetSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& smp = data[order[i]];
    if (i < n - n_val - n_test) {
      s.train.push_back(smp);
    } else if (i < n - n_test) {
      s.val.push_back(smp);
    } else {
      s.test.push_back(smp);
    }
  }
  if (s.val.empty()) s.val = s.train;
  if (s.test.empty()) s.test = s.val;
  return s;
}

}  // namespace rmamba
