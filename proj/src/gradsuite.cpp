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

#include "rmamba/gradsuite.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <set>

#include "rmamba/decoder.hpp"
#include "rmamba/loss.hpp"
#include "rmamba/model.hpp"
#include "rmamba/ops.hpp"
#include "rmamba/scan.hpp"
#include "rmamba/ss2d.hpp"
#include "rmamba/vss.hpp"

namespace rmamba {

namespace {

using T = Tensor<double>;

void merge_into(GradCheckResult& total, const GradCheckResult& r) {
  total.passed = total.passed && r.passed;
  total.max_abs_err = std::max(total.max_abs_err, r.max_abs_err);
  total.max_rel_err = std::max(total.max_rel_err, r.max_rel_err);
  total.checked += r.checked;
}

class Inputs {
 public:
  explicit Inputs(std::uint64_t seed) : rng_(seed) {}

  T uniform(Shape shape, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> dist(lo, hi);
    T::Array a(numel(shape));
    for (auto& v : a) v = dist(rng_);
    return T(std::move(shape), std::move(a), true);
  }
  /// Values in [-1,1] kept at least `gap` away from each of `kinks`.
  T away_from(Shape shape, std::initializer_list<double> kinks, double gap) {
    T t = uniform(std::move(shape));
    for (auto& v : t.mutable_data()) {
      for (double k : kinks) {
        if (std::abs(v - k) < gap) v = k + (v < k ? -gap : gap);
      }
    }
    return t;
  }
  T binary(Shape shape) {
    std::bernoulli_distribution coin(0.4);
    T::Array a(numel(shape));
    for (auto& v : a) v = coin(rng_) ? 1.0 : 0.0;
    return T(std::move(shape), std::move(a));
  }
  /// Fixed random weights so that sum(w * y) exercises every output entry.
  T probe_weights(const Shape& shape) {
    T w = uniform(shape);
    w.set_requires_grad(false);
    return w;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct Case {
  std::string name;
  std::function<GradCheckResult(Inputs&, const GradSuiteOptions&)> run;
};

// Builds loss = sum(w * f(leaves)) with w drawn once, then checks every
// coordinate of every leaf.
GradCheckResult check_op(Inputs& in, const GradSuiteOptions& o, std::vector<T> leaves,
                         const std::function<T(const std::vector<T>&)>& f) {
  T probe;
  {
    NoGradGuard guard;
    probe = in.probe_weights(f(leaves).shape());
  }
  auto loss = [&] { return sum(mul(f(leaves), probe)); };
  return check_leaf_gradients(loss, leaves, -1, in.rng(), o.h, o.rtol, o.atol);
}

GradCheckResult check_block(Inputs& in, const GradSuiteOptions& o, const T& x,
                            const ParamList<double>& params, const std::function<T()>& f,
                            Index coords_per_tensor = -1) {
  T probe;
  {
    NoGradGuard guard;
    probe = in.probe_weights(f().shape());
  }
  std::vector<T> leaves{x};
  for (const auto& p : params) leaves.push_back(p.tensor);
  auto loss = [&] { return sum(mul(f(), probe)); };
  return check_leaf_gradients(loss, leaves, coords_per_tensor, in.rng(), o.h, o.rtol, o.atol);
}

std::vector<Case> op_cases() {
  std::vector<Case> c;
  auto unary = [&c](std::string name, std::function<T(const T&)> f,
                    std::function<T(Inputs&)> make = {}) {
    c.push_back({std::move(name), [f, make](Inputs& in, const GradSuiteOptions& o) {
                   T x = make ? make(in) : in.uniform({2, 3, 4});
                   return check_op(in, o, {x}, [&](const std::vector<T>& v) { return f(v[0]); });
                 }});
  };
  auto binary = [&c](std::string name, std::function<T(const T&, const T&)> f,
                     std::function<T(Inputs&)> make_b = {}) {
    c.push_back({std::move(name), [f, make_b](Inputs& in, const GradSuiteOptions& o) {
                   T a = in.uniform({3, 5});
                   T b = make_b ? make_b(in) : in.uniform({3, 5});
                   return check_op(in, o, {a, b},
                                   [&](const std::vector<T>& v) { return f(v[0], v[1]); });
                 }});
  };

  binary("add", [](const T& a, const T& b) { return add(a, b); });
  binary("sub", [](const T& a, const T& b) { return sub(a, b); });
  binary("mul", [](const T& a, const T& b) { return mul(a, b); });
  binary("div", [](const T& a, const T& b) { return div(a, b); },
         [](Inputs& in) { return in.uniform({3, 5}, 0.5, 1.5); });
  binary("add (same tensor twice)", [](const T& a, const T&) { return mul(a, a); });
  unary("affine", [](const T& x) { return affine(x, 1.7, -0.3); });
  unary("exp", [](const T& x) { return exp(x); });
  unary("log", [](const T& x) { return log(x); },
        [](Inputs& in) { return in.uniform({2, 3, 4}, 0.2, 2.0); });
  unary("softplus", [](const T& x) { return softplus(x * 3.0); });
  unary("sigmoid", [](const T& x) { return sigmoid(x * 3.0); });
  unary("silu", [](const T& x) { return silu(x * 3.0); });
  unary("relu", [](const T& x) { return relu(x); },
        [](Inputs& in) { return in.away_from({2, 3, 4}, {0.0}, 0.05); });
  unary("clamp", [](const T& x) { return clamp(x, -0.5, 0.5); },
        [](Inputs& in) { return in.away_from({2, 3, 4}, {-0.5, 0.5}, 0.05); });
  unary("sum", [](const T& x) { return sum(x); });
  unary("mean", [](const T& x) { return mean(x); });
  unary("reshape", [](const T& x) { return reshape(x, {4, 6}); });
  unary("permute", [](const T& x) { return permute(x, {2, 0, 1}); });
  unary("gather_last", [](const T& x) { return gather_last(x, {3, 0, 0, 2, 1, 3}); });
  c.push_back({"mul_channel_broadcast", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({2, 3, 4, 5});
                 T g = in.uniform({2, 1, 4, 5});
                 return check_op(in, o, {x, g}, [](const std::vector<T>& v) {
                   return mul_channel_broadcast(v[0], v[1]);
                 });
               }});

  struct ConvSpec {
    const char* name;
    Index cin, cout, k, stride, pad, groups, extent;
  };
  for (const ConvSpec s : {ConvSpec{"conv2d 3x3 pad 1", 3, 4, 3, 1, 1, 1, 5},
                           ConvSpec{"conv2d 4x4 stride 4", 3, 2, 4, 4, 0, 1, 8},
                           ConvSpec{"conv2d 2x2 stride 2", 2, 3, 2, 2, 0, 1, 6},
                           ConvSpec{"conv2d depthwise 3x3", 4, 4, 3, 1, 1, 4, 5},
                           ConvSpec{"conv2d 1x1", 3, 1, 1, 1, 0, 1, 4}}) {
    c.push_back({s.name, [s](Inputs& in, const GradSuiteOptions& o) {
                   T x = in.uniform({2, s.cin, s.extent, s.extent});
                   T w = in.uniform({s.cout, s.cin / s.groups, s.k, s.k});
                   T b = in.uniform({s.cout});
                   return check_op(in, o, {x, w, b}, [s](const std::vector<T>& v) {
                     return conv2d(v[0], v[1], v[2], s.stride, s.pad, s.groups);
                   });
                 }});
  }
  c.push_back({"linear", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({2, 3, 4});
                 T w = in.uniform({5, 4});
                 T b = in.uniform({5});
                 return check_op(in, o, {x, w, b}, [](const std::vector<T>& v) {
                   return linear(v[0], v[1], v[2]);
                 });
               }});
  c.push_back({"layer_norm", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({3, 6});
                 T g = in.uniform({6});
                 T b = in.uniform({6});
                 return check_op(in, o, {x, g, b}, [](const std::vector<T>& v) {
                   return layer_norm(v[0], v[1], v[2]);
                 });
               }});
  c.push_back({"conv2d -> layer_norm -> sum", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({1, 2, 4, 4});
                 T w = in.uniform({3, 2, 3, 3});
                 T g = in.uniform({3});
                 T b = in.uniform({3});
                 return check_op(in, o, {x, w, g, b}, [](const std::vector<T>& v) {
                   return sum(channels_first(
                       layer_norm(channels_last(conv2d(v[0], v[1], T(), 1, 1)), v[2], v[3])));
                 });
               }});
  c.push_back({"resize_bilinear up", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({1, 2, 3, 4});
                 return check_op(in, o, {x}, [](const std::vector<T>& v) {
                   return resize_bilinear(v[0], 7, 8);
                 });
               }});
  c.push_back({"resize_bilinear down", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({1, 2, 8, 6});
                 return check_op(in, o, {x}, [](const std::vector<T>& v) {
                   return resize_bilinear(v[0], 3, 4);
                 });
               }});

  for (ScanAlgorithm algo : {ScanAlgorithm::Sequential, ScanAlgorithm::Parallel}) {
    const std::string name = algo == ScanAlgorithm::Sequential ? "selective_scan sequential"
                                                               : "selective_scan parallel";
    c.push_back({name, [algo](Inputs& in, const GradSuiteOptions& o) {
                   const Index n = 2, d = 3, l = 7, s = 4;
                   T u = in.uniform({n, d, l});
                   T delta = in.uniform({n, d, l}, 0.05, 0.5);
                   T a = in.uniform({d, s}, -1.0, -0.1);
                   T b = in.uniform({n, s, l});
                   T cc = in.uniform({n, s, l});
                   T dd = in.uniform({d});
                   return check_op(in, o, {u, delta, a, b, cc, dd}, [algo](const std::vector<T>& v) {
                     return selective_scan(v[0], v[1], v[2], v[3], v[4], v[5], algo);
                   });
                 }});
  }
  c.push_back({"merge_routes(expand_routes)", [](Inputs& in, const GradSuiteOptions& o) {
                 T x = in.uniform({1, 2, 3, 4});
                 return check_op(in, o, {x}, [](const std::vector<T>& v) {
                   const auto routes = expand_routes(v[0]);
                   std::array<T, 4> scaled;
                   for (std::size_t r = 0; r < 4; ++r) {
                     scaled[r] = routes[r] * static_cast<double>(r + 1);
                   }
                   return merge_routes(scaled, 3, 4);
                 });
               }});

  // Probabilities away from the clamp bounds so the loss is smooth.
  c.push_back({"bce_loss", [](Inputs& in, const GradSuiteOptions& o) {
                 T p = in.uniform({1, 1, 8, 8}, 0.05, 0.95);
                 T t = in.binary({1, 1, 8, 8});
                 return check_leaf_gradients([&] { return bce_loss(p, t); }, {p}, -1, in.rng(),
                                             o.h, o.rtol, o.atol);
               }});
  c.push_back({"dice_loss", [](Inputs& in, const GradSuiteOptions& o) {
                 T p = in.uniform({1, 1, 8, 8}, 0.05, 0.95);
                 T t = in.binary({1, 1, 8, 8});
                 return check_leaf_gradients([&] { return dice_loss(p, t); }, {p}, -1, in.rng(),
                                             o.h, o.rtol, o.atol);
               }});
  c.push_back({"combined_loss", [](Inputs& in, const GradSuiteOptions& o) {
                 T p0 = in.uniform({1, 1, 8, 8}, 0.05, 0.95);
                 T p1 = in.uniform({1, 1, 4, 4}, 0.05, 0.95);
                 T t = in.binary({1, 1, 8, 8});
                 return check_leaf_gradients([&] { return combined_loss(std::vector<T>{p0, p1}, t); },
                                             {p0, p1}, -1, in.rng(), o.h, o.rtol, o.atol);
               }});
  c.push_back({"reverse_op", [](Inputs& in, const GradSuiteOptions& o) {
                 T p = in.uniform({1, 1, 4, 4}, 0.0, 1.0);
                 return check_op(in, o, {p}, [](const std::vector<T>& v) {
                   return reverse_op(v[0]);
                 });
               }});
  return c;
}

std::vector<Case> block_cases() {
  std::vector<Case> c;
  for (ScanAlgorithm algo : {ScanAlgorithm::Sequential, ScanAlgorithm::Parallel}) {
    const std::string suffix = algo == ScanAlgorithm::Sequential ? " sequential" : " parallel";
    c.push_back({"ss2d 1x4x4x4" + suffix, [algo](Inputs& in, const GradSuiteOptions& o) {
                   ParamBuilder<double> b(in.rng()());
                   Ss2dBlock<double> block = make_ss2d(b, Ss2dConfig{4, 4, 2, 3});
                   block.ssm.algorithm = algo;
                   T x = in.uniform({1, 4, 4, 4});
                   return check_block(in, o, x, b.params(),
                                      [&] { return ss2d_forward(x, block); });
                 }});
  }
  c.push_back({"vss 1x4x3x3", [](Inputs& in, const GradSuiteOptions& o) {
                 ParamBuilder<double> b(in.rng()());
                 VssBlock<double> block = make_vss(b, VssConfig{4, 4, 2, 4});
                 T x = in.uniform({1, 4, 3, 3});
                 return check_block(in, o, x, b.params(), [&] { return vss_forward(x, block); });
               }});
  c.push_back({"initial prediction", [](Inputs& in, const GradSuiteOptions& o) {
                 ParamBuilder<double> b(in.rng()());
                 const Conv2dLayer<double> conv = make_conv(b, 4, 1, 1, 1, 0);
                 T r = in.uniform({1, 4, 2, 2});
                 return check_block(in, o, r, b.params(),
                                    [&] { return initial_prediction(r, conv).probs; });
               }});
  for (AttentionMode mode : {AttentionMode::RMA, AttentionMode::RA}) {
    const std::string name = mode == AttentionMode::RMA ? "rma stage (RMA)" : "rma stage (RA)";
    c.push_back({name, [mode](Inputs& in, const GradSuiteOptions& o) {
                   ParamBuilder<double> b(in.rng()());
                   const Index ch = 4;
                   RmaStage<double> st;
                   st.mode = mode;
                   if (mode == AttentionMode::RMA) {
                     st.delta_vss = make_vss(b.scope("delta"), VssConfig{ch, 4, 2, 4});
                   } else {
                     st.delta_conv = make_conv(b.scope("delta"), ch, ch, 3, 1, 1);
                   }
                   st.refine1 = make_conv(b.scope("refine1"), ch, ch, 3, 1, 1);
                   st.refine2 = make_conv(b.scope("refine2"), ch, 1, 3, 1, 1);
                   T f = in.uniform({1, ch, 4, 4});
                   T next = in.uniform({1, 1, 2, 2}, -2, 2);
                   T probe;
                   {
                     NoGradGuard guard;
                     probe = in.probe_weights({1, 1, 4, 4});
                   }
                   std::vector<T> leaves{f, next};
                   for (const auto& p : b.params()) leaves.push_back(p.tensor);
                   return check_leaf_gradients(
                       [&] { return sum(mul(rma_stage(next, f, st).logits, probe)); }, leaves, -1,
                       in.rng(), o.h, o.rtol, o.atol);
                 }});
  }
  return c;
}

GradCheckResult check_model(Inputs& in, const GradSuiteOptions& o) {
  Model<double> model(ModelConfig::desk(Variant::Tiny), in.rng()());
  const Index s = o.model_size;
  T image = in.uniform({1, 3, s, s}, 0.0, 1.0);
  T target = in.binary({1, 1, s, s});
  auto loss = [&] { return combined_loss(model.forward(image), target); };

  std::vector<T> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  std::shuffle(params.begin(), params.end(), in.rng());
  if (o.model_tensors >= 0 && o.model_tensors < static_cast<Index>(params.size())) {
    params.resize(static_cast<std::size_t>(o.model_tensors));
  }
  GradCheckResult total = check_leaf_gradients(loss, {image}, 8, in.rng(), o.h, o.rtol, o.atol);
  merge_into(total, check_leaf_gradients(loss, params, 2, in.rng(), o.h, o.rtol, o.atol));
  return total;
}

}  // namespace

GradCheckResult check_leaf_gradients(const std::function<Tensor<double>()>& loss,
                                     const std::vector<Tensor<double>>& leaves,
                                     Index coords_per_tensor, std::mt19937_64& rng, double h,
                                     double rtol, double atol) {
  auto& tape = Tape<double>::active();
  tape.clear();
  for (auto t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const T value = loss();
  tape.backward(value);
  tape.clear();
  std::vector<T::Array> analytic;
  for (const auto& t : leaves) analytic.push_back(t.grad());
  for (auto t : leaves) t.zero_grad();

  GradCheckResult total;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    T leaf = leaves[k];
    const Index n = leaf.size();
    std::vector<Index> coords;
    if (coords_per_tensor < 0 || n <= coords_per_tensor) {
      coords.resize(static_cast<std::size_t>(n));
      std::iota(coords.begin(), coords.end(), Index{0});
    } else {
      std::set<Index> pick;
      Index top = 0;
      analytic[k].abs().maxCoeff(&top);
      pick.insert(top);
      std::uniform_int_distribution<Index> dist(0, n - 1);
      while (static_cast<Index>(pick.size()) < coords_per_tensor) pick.insert(dist(rng));
      coords.assign(pick.begin(), pick.end());
    }
    const std::vector<double> numeric =
        finite_diff_at<double>([&] { return loss().item(); }, leaf, coords, h);
    std::vector<double> a;
    for (Index i : coords) a.push_back(analytic[k][i]);
    merge_into(total, compare_grads(a.data(), numeric.data(), static_cast<Index>(coords.size()),
                                    rtol, atol));
  }
  return total;
}

std::vector<GradCaseReport> run_gradient_suite(
    const GradSuiteOptions& options, const std::function<void(const GradCaseReport&)>& on_case) {
  std::vector<Case> cases = op_cases();
  for (auto& c : block_cases()) cases.push_back(std::move(c));
  if (options.include_model) {
    cases.push_back({"model desk-T " + std::to_string(options.model_size) + "x" +
                         std::to_string(options.model_size),
                     check_model});
  }
  std::vector<GradCaseReport> out;
  Inputs in(options.seed);
  for (const Case& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    GradCaseReport rep;
    rep.name = c.name;
    rep.result = c.run(in, options);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_case) on_case(rep);
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace rmamba
