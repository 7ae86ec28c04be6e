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

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "rmamba/bench.hpp"
#include "rmamba/checkpoint.hpp"
#include "rmamba/gradsuite.hpp"
#include "rmamba/trainer.hpp"

namespace fs = std::filesystem;
using namespace rmamba;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  bool val_on_train = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string csv;
  Index size = 256;
};

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  std::string mask_out;
  Index size = 256;
};

struct GradArgs {
  std::uint64_t seed = 0;
  bool skip_model = false;
  Index model_tensors = -1;
};

struct BenchArgs {
  std::vector<Index> lengths{1024, 2048, 4096};
  int repetitions = 5;
  Index channels = 16;
  bool check = false;
};

struct SynthArgs {
  std::uint64_t seed = 0;
  int n = 8;
  std::string out;
  Index size = 64;
};

std::string run_config_text(const RunConfig& rc) {
  std::string out = serialize(rc.model);
  for (const auto& [k, v] : rc.train.to_map()) out += k + "=" + v + "\n";
  return out;
}

int cmd_train(const TrainArgs& a) {
  const RunConfig rc = a.config.empty() ? parse_config("preset=desk\n") : load_config_file(a.config);
  const Dataset data = resolve_dataset(a.data, rc.train.image_size);
  if (data.empty()) throw IoError("no samples found in " + a.data);
  DatasetSplit split;
  if (a.val_on_train) {
    split.train = data;
    split.val = data;
    split.test = data;
  } else {
    split = split_dataset(data, rc.train.seed);
  }
  std::cerr << "train: " << split.train.size() << " train / " << split.val.size() << " val / "
            << split.test.size() << " test images at " << rc.train.image_size << "x"
            << rc.train.image_size << "\n";

  fs::create_directories(a.out);
  Model<float> model(rc.model, rc.train.seed);
  std::cerr << "model: " << to_string(rc.model.variant) << " " << to_string(rc.model.attention)
            << " n_extra_vss=" << rc.model.n_extra_vss << ", " << model.parameter_count()
            << " parameters\n";
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(model, rc.train, split.train, split.val, [&](const EpochRecord& r) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "epoch " << r.epoch << "  train " << std::setprecision(5) << r.train_loss
              << "  val " << r.val_loss << "  lr " << r.lr << "  " << std::setprecision(3)
              << secs << "s\n";
    return true;
  });
  std::cerr << "best epoch " << result.best_epoch << " (val " << result.best_val_loss << ")"
            << (result.stopped_early ? ", stopped early" : "") << "\n";

  save_checkpoint(fs::path(a.out) / "checkpoint.rmck", model, &result.optimizer);
  write_file_atomic(fs::path(a.out) / "history.csv", history_csv(result.history));
  write_file_atomic(fs::path(a.out) / "config.txt", run_config_text(rc));
  const EvalResult ev = evaluate(model, split.test);
  write_file_atomic(fs::path(a.out) / "test_metrics.csv",
                    metrics_csv_header() + "\n" + metrics_csv_row(ev.mean) + "\n");
  std::cout << metrics_csv_header() << "\n" << metrics_csv_row(ev.mean) << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset data = resolve_dataset(a.data, a.size);
  const EvalResult ev = evaluate(ck.model, data);
  const std::string summary = metrics_csv_header() + "\n" + metrics_csv_row(ev.mean) + "\n";
  std::string per_image = "image," + metrics_csv_header() + "\n";
  for (std::size_t i = 0; i < ev.names.size(); ++i) {
    per_image += ev.names[i] + "," + metrics_csv_row(ev.per_image[i]) + "\n";
  }
  const fs::path csv(a.csv);
  const fs::path detail = csv.parent_path() / (csv.stem().string() + "_per_image.csv");
  write_file_atomic(csv, summary);
  write_file_atomic(detail, per_image);
  std::cout << summary;
  return 0;
}

Image8 plane_to_image(const Tensor<float>& probs, bool threshold) {
  Image8 img;
  img.height = probs.dim(-2);
  img.width = probs.dim(-1);
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(img.height * img.width));
  for (Index i = 0; i < img.height * img.width; ++i) {
    const float p = probs.data()[i];
    img.pixels[static_cast<std::size_t>(i)] =
        threshold ? (p >= kBinarizeThreshold ? 255 : 0)
                  : static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f));
  }
  return img;
}

int cmd_predict(const PredictArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Image8 raw = read_image(a.image);
  Tensor<float> image = image_to_tensor(raw, a.size);
  image = reshape(image, {1, 3, a.size, a.size});
  const PredictionSet<float> preds = predict_all(ck.model, image);
  Tensor<float> full = preds.final;
  if (raw.height != a.size || raw.width != a.size) {
    NoGradGuard guard;
    full = resize_bilinear(full, raw.height, raw.width);
  }
  const fs::path out(a.mask_out);
  write_image(out, plane_to_image(full, true));
  for (std::size_t i = 0; i < preds.probs.size(); ++i) {
    const fs::path side = out.parent_path() / (out.stem().string() + "_side" +
                                               std::to_string(i + 1) + out.extension().string());
    write_image(side, plane_to_image(preds.probs[i], false));
  }
  std::cerr << "wrote " << out.string() << " and " << preds.probs.size() << " side outputs\n";
  return 0;
}

int cmd_gradcheck(const GradArgs& a) {
  GradSuiteOptions opt;
  opt.seed = a.seed;
  opt.include_model = !a.skip_model;
  opt.model_tensors = a.model_tensors;
  int failures = 0;
  const auto t0 = std::chrono::steady_clock::now();
  run_gradient_suite(opt, [&](const GradCaseReport& r) {
    if (!r.result.passed) ++failures;
    std::printf("%-34s %s  checked %5td  max abs %.2e  max rel %.2e  %.2fs\n", r.name.c_str(),
                r.result.passed ? "ok  " : "FAIL", r.result.checked, r.result.max_abs_err,
                r.result.max_rel_err, r.seconds);
    std::fflush(stdout);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s: %d failing case(s), %.1fs\n", failures == 0 ? "PASS" : "FAIL", failures, secs);
  return failures == 0 ? 0 : kExitFailure;
}

int cmd_bench(const BenchArgs& a) {
  ScanBenchOptions opt;
  opt.repetitions = a.repetitions;
  opt.channels = a.channels;
  const auto timings = bench_scan(a.lengths, opt);
  std::printf("%8s %16s %16s\n", "L", "sequential ns/el", "parallel ns/el");
  for (const auto& t : timings) {
    std::printf("%8td %16.2f %16.2f\n", t.length, t.sequential_ns_per_element,
                t.parallel_ns_per_element);
  }
  const double ratio = sequential_slope_ratio(timings);
  std::printf("sequential slope ratio %.3f (linear within 2x: %s)\n", ratio,
              ratio <= 2.0 ? "yes" : "no");
  return (a.check && ratio > 2.0) ? kExitFailure : 0;
}

int cmd_synth(const SynthArgs& a) {
  const Dataset data = synth_dataset(a.seed, a.n, a.size);
  save_dataset(data, a.out);
  std::cerr << "wrote " << data.size() << " pairs to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RMA-Mamba segmentation: training, evaluation and verification tools"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", train_args.config, "key=value config file (default: desk preset)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train_args.data, "dataset directory or synth:<seed>:<n>")
      ->required();
  train_cmd->add_option("--out", train_args.out, "output directory")->required();
  train_cmd->add_flag("--val-on-train", train_args.val_on_train,
                      "use every image for training, validation and test");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_args.data, "dataset directory or synth:<seed>:<n>")
      ->required();
  eval_cmd->add_option("--csv", eval_args.csv, "summary CSV path")->required();
  eval_cmd->add_option("--size", eval_args.size, "input resolution (multiple of 32)")
      ->capture_default_str();

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "Segment one image");
  pred_cmd->add_option("--checkpoint", pred_args.checkpoint)->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--image", pred_args.image)->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--mask-out", pred_args.mask_out, "mask path (.png or .pgm)")->required();
  pred_cmd->add_option("--size", pred_args.size, "input resolution (multiple of 32)")
      ->capture_default_str();

  GradArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  grad_cmd->add_option("--seed", grad_args.seed)->capture_default_str();
  grad_cmd->add_flag("--skip-model", grad_args.skip_model, "skip the end-to-end model case");
  grad_cmd->add_option("--model-tensors", grad_args.model_tensors,
                       "parameter tensors to sample on the model case (-1: all)")
      ->capture_default_str();

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench-scan", "Time sequential vs parallel selective scan");
  bench_cmd->add_option("--lengths", bench_args.lengths)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--reps", bench_args.repetitions)->capture_default_str();
  bench_cmd->add_option("--channels", bench_args.channels)->capture_default_str();
  bench_cmd->add_flag("--check", bench_args.check, "exit 1 unless the slope ratio is within 2x");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset to disk");
  synth_cmd->add_option("--seed", synth_args.seed)->capture_default_str();
  synth_cmd->add_option("--n", synth_args.n)->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out)->required();
  synth_cmd->add_option("--size", synth_args.size)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*pred_cmd) return cmd_predict(pred_args);
    if (*grad_cmd) return cmd_gradcheck(grad_args);
    if (*bench_cmd) return cmd_bench(bench_args);
    if (*synth_cmd) return cmd_synth(synth_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
