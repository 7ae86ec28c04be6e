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

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rmamba/checkpoint.hpp"
#include "rmamba/config.hpp"
#include "rmamba/data.hpp"

using namespace rmamba;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("rmamba_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Image8 gray(Index h, Index w, std::uint8_t v) {
  return Image8{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w), v)};
}

ModelConfig small_model() {
  ModelConfig cfg = ModelConfig::desk(Variant::Tiny);
  cfg.ladder = {8, 16, 32, 64};
  cfg.desk_divisor = 1;
  cfg.depths = {1, 1, 1, 1};
  cfg.d_state = 4;
  cfg.decoder_channels = 8;
  return cfg;
}

}  // namespace

TEST_CASE("png and pgm round trips") {
  TempDir dir("img");
  Image8 rgb{5, 3, 3, {}};
  for (int i = 0; i < 45; ++i) rgb.pixels.push_back(static_cast<std::uint8_t>(i * 5));
  for (const char* ext : {".png", ".ppm"}) {
    const fs::path p = dir.path / (std::string("rgb") + ext);
    write_image(p, rgb);
    const Image8 back = read_image(p);
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.channels == 3);
    CHECK(back.pixels == rgb.pixels);
  }
  const Image8 g = gray(4, 6, 200);
  write_image(dir.path / "g.pgm", g);
  CHECK(read_image(dir.path / "g.pgm").pixels == g.pixels);
  CHECK_THROWS_AS(read_image(dir.path / "missing.png"), IoError);
}

TEST_CASE("load_dataset pairs by stem in lexicographic order") {
  TempDir dir("ds");
  fs::create_directories(dir.path / "images");
  fs::create_directories(dir.path / "masks");
  for (const char* stem : {"c", "a", "b"}) {
    write_image(dir.path / "images" / (std::string(stem) + ".png"), gray(40, 40, 90));
    Image8 m = gray(40, 40, 0);
    for (int i = 0; i < 800; ++i) m.pixels[static_cast<std::size_t>(i)] = 255;
    write_image(dir.path / "masks" / (std::string(stem) + ".png"), m);
  }
  const Dataset d = load_dataset(dir.path, 256);
  REQUIRE(d.size() == 3);
  CHECK(d[0].name == "a");
  CHECK(d[2].name == "c");
  CHECK(d[0].image.shape() == Shape{3, 256, 256});
  CHECK(d[0].mask.shape() == Shape{1, 256, 256});
  CHECK(((d[1].mask.data() == 0.0f) || (d[1].mask.data() == 1.0f)).all());
  const Dataset again = load_dataset(dir.path, 256);
  CHECK((again[1].image.data() == d[1].image.data()).all());

  SUBCASE("a non-binary mask value is reported with its path") {
    Image8 bad = gray(40, 40, 0);
    bad.pixels[10] = 17;
    write_image(dir.path / "masks" / "b.png", bad);
    try {
      load_dataset(dir.path, 64);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("b.png") != std::string::npos);
    }
  }
  SUBCASE("an orphan image is an error") {
    write_image(dir.path / "images" / "d.png", gray(40, 40, 1));
    CHECK_THROWS_AS(load_dataset(dir.path, 64), IoError);
  }
}

TEST_CASE("nearest resize of a half-black half-white mask stays binary") {
  std::vector<std::uint8_t> m(512 * 512, 0);
  for (Index r = 0; r < 512; ++r)
    for (Index c = 256; c < 512; ++c) m[static_cast<std::size_t>(r * 512 + c)] = 255;
  const auto small = resize_plane_nearest(m, 512, 512, 256, 256);
  Index white = 0;
  for (auto v : small) {
    CHECK((v == 0 || v == 255));
    white += v == 255;
  }
  CHECK(white == 256 * 128);
}

TEST_CASE("gray images are replicated to three channels") {
  const auto t = image_to_tensor(gray(8, 8, 51), 8);
  CHECK(t.shape() == Shape{3, 8, 8});
  CHECK((t.data() - 0.2f).abs().maxCoeff() <= 1e-6f);
}

TEST_CASE("synthetic data: deterministic, sized, and within coverage bounds") {
  const Dataset a = synth_dataset(42, 6, 64);
  const Dataset b = synth_dataset(42, 6, 64);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].image.data() == b[i].image.data()).all());
    CHECK((a[i].mask.data() == b[i].mask.data()).all());
    const double frac = a[i].mask.data().mean();
    CHECK(frac >= 0.05);
    CHECK(frac <= 0.6);
  }
  const Dataset one = synth_dataset(1, 1, 64);
  CHECK(one.size() == 1);
  CHECK(one[0].image.shape() == Shape{3, 64, 64});
  CHECK_FALSE((synth_dataset(43, 1, 64)[0].image.data() == a[0].image.data()).all());
}

TEST_CASE("saved synthetic data loads back identically") {
  TempDir dir("synth");
  const Dataset a = synth_dataset(3, 3, 32);
  save_dataset(a, dir.path);
  const Dataset b = load_dataset(dir.path, 32);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b[i].name == a[i].name);
    CHECK((b[i].mask.data() == a[i].mask.data()).all());
    CHECK((b[i].image.data() - a[i].image.data()).abs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  }
}

TEST_CASE("split is 80/10/10 and never leaves a split empty") {
  const Dataset d = synth_dataset(4, 20, 32);
  const auto s = split_dataset(d, 1);
  CHECK(s.train.size() == 16);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
  const auto tiny = split_dataset(synth_dataset(4, 2, 32), 1);
  CHECK_FALSE(tiny.train.empty());
  CHECK_FALSE(tiny.val.empty());
  CHECK_FALSE(tiny.test.empty());
}

TEST_CASE("checkpoint round trip is bitwise") {
  TempDir dir("ck");
  Model<float> model(small_model(), 21);
  AdamState<float> opt;
  opt.step = 7;
  for (const auto& p : model.parameters()) {
    opt.m.push_back(Tensor<float>::Array::Constant(p.tensor.size(), 0.25f));
    opt.v.push_back(Tensor<float>::Array::Constant(p.tensor.size(), 0.5f));
  }
  const fs::path path = dir.path / "m.rmck";
  save_checkpoint(path, model, &opt);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.config == model.config());
  REQUIRE(ck.model.parameters().size() == model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& a = model.parameters()[i].tensor.data();
    const auto& b = ck.model.parameters()[i].tensor.data();
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0);
  }
  REQUIRE(ck.optimizer.has_value());
  CHECK(ck.optimizer->step == 7);
  CHECK((ck.optimizer->v.back() == 0.5f).all());

  std::mt19937_64 rng(2);
  const auto img = oracle::random_tensor<float>({1, 3, 32, 32}, rng, 0, 1);
  CHECK((model.forward(img).final.data() == ck.model.forward(img).final.data()).all());
}

TEST_CASE("corrupt, truncated and mismatched checkpoints are rejected") {
  TempDir dir("bad");
  Model<float> model(small_model(), 22);
  const fs::path path = dir.path / "m.rmck";
  save_checkpoint(path, model);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };
  write(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  write(flipped);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  write("not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  write(bytes);
  ModelConfig other = small_model();
  other.attention = AttentionMode::RA;
  Model<float> wrong(other, 0);
  CHECK_THROWS_AS(load_into(path, wrong), ConfigError);
  Model<float> right(small_model(), 99);
  load_into(path, right);
  CHECK((right.parameters()[0].tensor.data() == model.parameters()[0].tensor.data()).all());
}

TEST_CASE("atomic writes leave no temporary files behind") {
  TempDir dir("atomic");
  write_file_atomic(dir.path / "a.txt", "hello");
  write_file_atomic(dir.path / "a.txt", "again");
  Index files = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);
  std::ifstream in(dir.path / "a.txt");
  std::string s;
  in >> s;
  CHECK(s == "again");
}

TEST_CASE("config parsing") {
  const auto rc = parse_config("# comment\npreset=desk\nvariant=S\nattention=RA\nlr=3e-4\n");
  CHECK(rc.model.variant == Variant::Small);
  CHECK(rc.model.n_extra_vss == 1);
  CHECK(rc.model.attention == AttentionMode::RA);
  CHECK(rc.model.channels() == std::array<Index, 4>{12, 24, 48, 96});
  CHECK(rc.train.lr == 3e-4);
  CHECK(rc.train.image_size == 64);

  const auto full = parse_config("variant=T\n");
  CHECK(full.model.n_extra_vss == 0);
  CHECK(full.model.channels() == std::array<Index, 4>{96, 192, 384, 768});
  CHECK(full.train.lr == 1e-4);
  CHECK(full.train.lr_patience == 5);
  CHECK(full.train.lr_factor == 0.1);
  CHECK(full.train.early_stop_patience == 50);
  CHECK(full.train.batch_size == 16);
  CHECK(full.train.max_epochs == 500);
  CHECK(full.train.image_size == 256);

  CHECK_THROWS_AS(parse_config("bogus=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("batch_size=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("preset=huge\n"), ConfigError);

  const ModelConfig m = parse_model_config(serialize(rc.model));
  CHECK(m == rc.model);
}
