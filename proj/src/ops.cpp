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

#include "rmamba/ops.hpp"

#include <algorithm>
#include <cmath>

namespace rmamba {

namespace {

template <typename Scalar>
using Array = typename Tensor<Scalar>::Array;
template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapRow = Eigen::Map<RowMat<Scalar>>;
template <typename Scalar>
using CMapRow = Eigen::Map<const RowMat<Scalar>>;

template <typename Scalar>
Tensor<Scalar> make(Shape shape, Array<Scalar> data, const char* op) {
  detail::check_finite<Scalar>(data, op);
  return Tensor<Scalar>(std::move(shape), std::move(data));
}

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

template <typename Scalar>
void push_grad(const detail::NodePtr<Scalar>& node, const Array<Scalar>& g) {
  if (node->requires_grad) node->accumulate(g);
}

// Applies an elementwise unary map with derivative `dfn(x, y)`.
template <typename Scalar, typename Fwd, typename Deriv>
Tensor<Scalar> unary(const Tensor<Scalar>& x, Fwd fwd, Deriv deriv, const char* op) {
  Array<Scalar> y = x.data().unaryExpr(fwd);
  Tensor<Scalar> out = make<Scalar>(x.shape(), std::move(y), op);
  auto xn = x.node();
  auto on = out.node();
  Tape<Scalar>::active().record(out, {xn}, [xn, on, deriv](const Array<Scalar>& g) {
    if (!xn->requires_grad) return;
    Array<Scalar> d = xn->data.binaryExpr(on->data, deriv);
    xn->accumulate(g * d);
  });
  return out;
}

template <typename Scalar>
Scalar sigmoid_scalar(Scalar v) {
  if (v >= 0) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "add");
  Tensor<Scalar> out = make<Scalar>(a.shape(), a.data() + b.data(), "add");
  auto an = a.node();
  auto bn = b.node();
  Tape<Scalar>::active().record(out, {an, bn}, [an, bn](const Array<Scalar>& g) {
    push_grad(an, g);
    push_grad(bn, g);
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "sub");
  Tensor<Scalar> out = make<Scalar>(a.shape(), a.data() - b.data(), "sub");
  auto an = a.node();
  auto bn = b.node();
  Tape<Scalar>::active().record(out, {an, bn}, [an, bn](const Array<Scalar>& g) {
    push_grad(an, g);
    if (bn->requires_grad) bn->accumulate(-g);
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "mul");
  Tensor<Scalar> out = make<Scalar>(a.shape(), a.data() * b.data(), "mul");
  auto an = a.node();
  auto bn = b.node();
  Tape<Scalar>::active().record(out, {an, bn}, [an, bn](const Array<Scalar>& g) {
    if (an->requires_grad) an->accumulate(g * bn->data);
    if (bn->requires_grad) bn->accumulate(g * an->data);
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "div");
  Tensor<Scalar> out = make<Scalar>(a.shape(), a.data() / b.data(), "div");
  auto an = a.node();
  auto bn = b.node();
  Tape<Scalar>::active().record(out, {an, bn}, [an, bn](const Array<Scalar>& g) {
    if (an->requires_grad) an->accumulate(g / bn->data);
    if (bn->requires_grad) bn->accumulate(-g * an->data / bn->data.square());
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, Scalar s, Scalar t) {
  Tensor<Scalar> out = make<Scalar>(x.shape(), x.data() * s + t, "affine");
  auto xn = x.node();
  Tape<Scalar>::active().record(out, {xn}, [xn, s](const Array<Scalar>& g) {
    if (xn->requires_grad) xn->accumulate(g * s);
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> mul_channel_broadcast(const Tensor<Scalar>& x, const Tensor<Scalar>& gate) {
  if (x.ndim() < 2 || gate.ndim() != x.ndim() || gate.dim(0) != x.dim(0) ||
      gate.dim(1) != 1) {
    throw DimensionError("mul_channel_broadcast: gate " + to_string(gate.shape()) +
                         " incompatible with " + to_string(x.shape()));
  }
  for (int i = 2; i < x.ndim(); ++i) {
    if (gate.dim(i) != x.dim(i)) {
      throw DimensionError("mul_channel_broadcast: spatial mismatch " +
                           to_string(gate.shape()) + " vs " + to_string(x.shape()));
    }
  }
  const Index n = x.dim(0);
  const Index c = x.dim(1);
  const Index inner = c == 0 ? 0 : x.size() / (n * c);
  Array<Scalar> y(x.size());
  for (Index b = 0; b < n; ++b) {
    const auto gv = gate.data().segment(b * inner, inner);
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (b * c + ch) * inner;
      y.segment(off, inner) = x.data().segment(off, inner) * gv;
    }
  }
  Tensor<Scalar> out = make<Scalar>(x.shape(), std::move(y), "mul_channel_broadcast");
  auto xn = x.node();
  auto gn = gate.node();
  Tape<Scalar>::active().record(out, {xn, gn}, [xn, gn, n, c, inner](const Array<Scalar>& g) {
    if (xn->requires_grad) {
      Array<Scalar>& gx = xn->grad_buffer();
      for (Index b = 0; b < n; ++b) {
        const auto gv = gn->data.segment(b * inner, inner);
        for (Index ch = 0; ch < c; ++ch) {
          const Index off = (b * c + ch) * inner;
          gx.segment(off, inner) += g.segment(off, inner) * gv;
        }
      }
    }
    if (gn->requires_grad) {
      Array<Scalar>& gg = gn->grad_buffer();
      for (Index b = 0; b < n; ++b) {
        for (Index ch = 0; ch < c; ++ch) {
          const Index off = (b * c + ch) * inner;
          gg.segment(b * inner, inner) += g.segment(off, inner) * xn->data.segment(off, inner);
        }
      }
    }
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& x) {
  return unary(
      x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar y) { return y; }, "exp");
}

template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& x) {
  return unary(
      x, [](Scalar v) { return std::log(v); },
      [](Scalar v, Scalar) { return Scalar(1) / v; }, "log");
}

template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& x) {
  return unary(
      x,
      [](Scalar v) { return std::max(v, Scalar(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](Scalar v, Scalar) { return sigmoid_scalar(v); }, "softplus");
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return unary(
      x, [](Scalar v) { return sigmoid_scalar(v); },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); }, "sigmoid");
}

template <typename Scalar>
Tensor<Scalar> silu(const Tensor<Scalar>& x) {
  return unary(
      x, [](Scalar v) { return v * sigmoid_scalar(v); },
      [](Scalar v, Scalar) {
        const Scalar s = sigmoid_scalar(v);
        return s * (Scalar(1) + v * (Scalar(1) - s));
      },
      "silu");
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return unary(
      x, [](Scalar v) { return v > 0 ? v : Scalar(0); },
      [](Scalar v, Scalar) { return v > 0 ? Scalar(1) : Scalar(0); }, "relu");
}

template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation kind) {
  switch (kind) {
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::Silu:
      return silu(x);
    case Activation::Relu:
      return relu(x);
  }
  throw std::invalid_argument("unknown activation");
}

template <typename Scalar>
Tensor<Scalar> clamp(const Tensor<Scalar>& x, Scalar lo, Scalar hi) {
  return unary(
      x, [lo, hi](Scalar v) { return std::clamp(v, lo, hi); },
      [lo, hi](Scalar v, Scalar) { return (v >= lo && v <= hi) ? Scalar(1) : Scalar(0); },
      "clamp");
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  Array<Scalar> s(1);
  s[0] = x.data().sum();
  Tensor<Scalar> out = make<Scalar>({}, std::move(s), "sum");
  auto xn = x.node();
  Tape<Scalar>::active().record(out, {xn}, [xn](const Array<Scalar>& g) {
    if (xn->requires_grad) xn->accumulate(Array<Scalar>::Constant(xn->data.size(), g[0]));
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  if (x.size() == 0) throw DimensionError("mean of an empty tensor");
  return sum(x) * (Scalar(1) / static_cast<Scalar>(x.size()));
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  Tensor<Scalar> out(std::move(shape), x.data());
  auto xn = x.node();
  Tape<Scalar>::active().record(out, {xn}, [xn](const Array<Scalar>& g) {
    push_grad(xn, g);
  });
  return out;
}

namespace {

// For each output flat index, the input flat index it reads.
std::vector<Index> permutation_map(const Shape& in, const std::vector<int>& perm, Shape& out) {
  const std::size_t rank = in.size();
  if (perm.size() != rank) throw DimensionError("permute: rank mismatch");
  std::vector<bool> seen(rank, false);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= rank || seen[static_cast<std::size_t>(p)]) {
      throw DimensionError("permute: invalid axis permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  std::vector<Index> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
  out.assign(rank, 0);
  std::vector<Index> step(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out[i] = in[static_cast<std::size_t>(perm[i])];
    step[i] = in_strides[static_cast<std::size_t>(perm[i])];
  }
  const Index total = numel(in);
  std::vector<Index> map(static_cast<std::size_t>(total));
  std::vector<Index> counter(rank, 0);
  Index src = 0;
  for (Index k = 0; k < total; ++k) {
    map[static_cast<std::size_t>(k)] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++counter[ax] < out[ax]) {
        src += step[ax];
        break;
      }
      src -= step[ax] * (out[ax] - 1);
      counter[ax] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> permute(const Tensor<Scalar>& x, const std::vector<int>& perm) {
  Shape out_shape;
  auto map = std::make_shared<std::vector<Index>>(permutation_map(x.shape(), perm, out_shape));
  Array<Scalar> y(x.size());
  const Scalar* src = x.data().data();
  for (Index k = 0; k < x.size(); ++k) y[k] = src[(*map)[static_cast<std::size_t>(k)]];
  Tensor<Scalar> out(std::move(out_shape), std::move(y));
  auto xn = x.node();
  Tape<Scalar>::active().record(out, {xn}, [xn, map](const Array<Scalar>& g) {
    if (!xn->requires_grad) return;
    Array<Scalar>& gx = xn->grad_buffer();
    for (Index k = 0; k < g.size(); ++k) gx[(*map)[static_cast<std::size_t>(k)]] += g[k];
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> gather_last(const Tensor<Scalar>& x, const std::vector<Index>& index) {
  const Index len = x.dim(-1);
  for (Index i : index) {
    if (i < 0 || i >= len) throw DimensionError("gather_last: index out of range");
  }
  const Index outer = len == 0 ? 0 : x.size() / len;
  const Index out_len = static_cast<Index>(index.size());
  Shape shape = x.shape();
  shape.back() = out_len;
  Array<Scalar> y(outer * out_len);
  for (Index r = 0; r < outer; ++r) {
    const Scalar* src = x.data().data() + r * len;
    Scalar* dst = y.data() + r * out_len;
    for (Index j = 0; j < out_len; ++j) dst[j] = src[index[static_cast<std::size_t>(j)]];
  }
  Tensor<Scalar> out(std::move(shape), std::move(y));
  auto xn = x.node();
  auto idx = std::make_shared<std::vector<Index>>(index);
  Tape<Scalar>::active().record(out, {xn}, [xn, idx, outer, len, out_len](const Array<Scalar>& g) {
    if (!xn->requires_grad) return;
    Array<Scalar>& gx = xn->grad_buffer();
    for (Index r = 0; r < outer; ++r) {
      for (Index j = 0; j < out_len; ++j) {
        gx[r * len + (*idx)[static_cast<std::size_t>(j)]] += g[r * out_len + j];
      }
    }
  });
  return out;
}

namespace {

struct ConvGeometry {
  Index n, cin, h, w, cout, kh, kw, stride, pad, groups, ho, wo;
  Index cin_g() const { return cin / groups; }
  Index cout_g() const { return cout / groups; }
  Index k() const { return cin_g() * kh * kw; }
  Index hw_out() const { return ho * wo; }
};

// cols[(c*kh + i)*kw + j, oy*wo + ox] = x[c0 + c, oy*s + i - p, ox*s + j - p]
template <typename Scalar>
void im2col(const Scalar* x, const ConvGeometry& g, Index c0, Scalar* cols) {
  const Index cg = g.cin_g();
  Index row = 0;
  for (Index c = 0; c < cg; ++c) {
    const Scalar* plane = x + (c0 + c) * g.h * g.w;
    for (Index i = 0; i < g.kh; ++i) {
      for (Index j = 0; j < g.kw; ++j, ++row) {
        Scalar* dst = cols + row * g.hw_out();
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride + i - g.pad;
          for (Index ox = 0; ox < g.wo; ++ox) {
            const Index ix = ox * g.stride + j - g.pad;
            dst[oy * g.wo + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                      ? plane[iy * g.w + ix]
                                      : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* cols, const ConvGeometry& g, Index c0, Scalar* gx) {
  const Index cg = g.cin_g();
  Index row = 0;
  for (Index c = 0; c < cg; ++c) {
    Scalar* plane = gx + (c0 + c) * g.h * g.w;
    for (Index i = 0; i < g.kh; ++i) {
      for (Index j = 0; j < g.kw; ++j, ++row) {
        const Scalar* src = cols + row * g.hw_out();
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride + i - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          for (Index ox = 0; ox < g.wo; ++ox) {
            const Index ix = ox * g.stride + j - g.pad;
            if (ix >= 0 && ix < g.w) plane[iy * g.w + ix] += src[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, Index stride, Index padding, Index groups) {
  if (input.ndim() != 4 || weight.ndim() != 4) {
    throw DimensionError("conv2d: expected 4-d input and weight, got " +
                         to_string(input.shape()) + " and " + to_string(weight.shape()));
  }
  if (stride < 1 || padding < 0 || groups < 1) {
    throw DimensionError("conv2d: stride must be >= 1, padding >= 0, groups >= 1");
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0),
                 weight.dim(2), weight.dim(3), stride, padding, groups, 0, 0};
  if (g.cin % groups != 0 || g.cout % groups != 0 || weight.dim(1) != g.cin / groups) {
    throw DimensionError("conv2d: input channels " + std::to_string(g.cin) +
                         " incompatible with weight " + to_string(weight.shape()) +
                         " (groups=" + std::to_string(groups) + ")");
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != g.cout)) {
    throw DimensionError("conv2d: bias shape " + to_string(bias.shape()));
  }
  if (g.h + 2 * padding < g.kh || g.w + 2 * padding < g.kw) {
    throw DimensionError("conv2d: kernel larger than padded input " +
                         to_string(input.shape()));
  }
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;

  const Index hw = g.hw_out();
  const Index cg_out = g.cout_g();
  Array<Scalar> y(g.n * g.cout * hw);
  RowMat<Scalar> cols(g.k(), hw);
  for (Index b = 0; b < g.n; ++b) {
    const Scalar* xb = input.data().data() + b * g.cin * g.h * g.w;
    for (Index gi = 0; gi < groups; ++gi) {
      im2col(xb, g, gi * g.cin_g(), cols.data());
      CMapRow<Scalar> wg(weight.data().data() + gi * cg_out * g.k(), cg_out, g.k());
      MapRow<Scalar> out(y.data() + (b * g.cout + gi * cg_out) * hw, cg_out, hw);
      out.noalias() = wg * cols;
      if (bias.defined()) {
        out.colwise() += bias.data().segment(gi * cg_out, cg_out).matrix();
      }
    }
  }
  Tensor<Scalar> out = make<Scalar>({g.n, g.cout, g.ho, g.wo}, std::move(y), "conv2d");

  auto xn = input.node();
  auto wn = weight.node();
  std::vector<detail::NodePtr<Scalar>> inputs{xn, wn};
  detail::NodePtr<Scalar> bn;
  if (bias.defined()) {
    bn = bias.node();
    inputs.push_back(bn);
  }
  Tape<Scalar>::active().record(out, std::move(inputs), [xn, wn, bn, g](const Array<Scalar>& gy) {
    const Index hw = g.hw_out();
    const Index cg_out = g.cout_g();
    RowMat<Scalar> cols(g.k(), hw);
    RowMat<Scalar> gcols(g.k(), hw);
    Scalar* gx = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
    Scalar* gw = wn->requires_grad ? wn->grad_buffer().data() : nullptr;
    for (Index b = 0; b < g.n; ++b) {
      const Scalar* xb = xn->data.data() + b * g.cin * g.h * g.w;
      for (Index gi = 0; gi < g.groups; ++gi) {
        CMapRow<Scalar> gout(gy.data() + (b * g.cout + gi * cg_out) * hw, cg_out, hw);
        if (gw) {
          im2col(xb, g, gi * g.cin_g(), cols.data());
          MapRow<Scalar> gwg(gw + gi * cg_out * g.k(), cg_out, g.k());
          gwg.noalias() += gout * cols.transpose();
        }
        if (gx) {
          CMapRow<Scalar> wg(wn->data.data() + gi * cg_out * g.k(), cg_out, g.k());
          gcols.noalias() = wg.transpose() * gout;
          col2im(gcols.data(), g, gi * g.cin_g(), gx + b * g.cin * g.h * g.w);
        }
      }
    }
    if (bn && bn->requires_grad) {
      Array<Scalar>& gb = bn->grad_buffer();
      for (Index b = 0; b < g.n; ++b) {
        CMapRow<Scalar> gout(gy.data() + b * g.cout * hw, g.cout, hw);
        gb += gout.rowwise().sum().array();
      }
    }
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias) {
  if (weight.ndim() != 2 || x.ndim() < 1 || x.dim(-1) != weight.dim(1)) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(weight.shape()));
  }
  const Index din = weight.dim(1);
  const Index dout = weight.dim(0);
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != dout)) {
    throw DimensionError("linear: bias shape " + to_string(bias.shape()));
  }
  const Index m = din == 0 ? 0 : x.size() / din;
  Shape shape = x.shape();
  shape.back() = dout;
  Array<Scalar> y(m * dout);
  {
    CMapRow<Scalar> xm(x.data().data(), m, din);
    CMapRow<Scalar> wm(weight.data().data(), dout, din);
    MapRow<Scalar> ym(y.data(), m, dout);
    ym.noalias() = xm * wm.transpose();
    if (bias.defined()) ym.rowwise() += bias.data().matrix().transpose();
  }
  Tensor<Scalar> out = make<Scalar>(std::move(shape), std::move(y), "linear");
  auto xn = x.node();
  auto wn = weight.node();
  std::vector<detail::NodePtr<Scalar>> inputs{xn, wn};
  detail::NodePtr<Scalar> bn;
  if (bias.defined()) {
    bn = bias.node();
    inputs.push_back(bn);
  }
  Tape<Scalar>::active().record(out, std::move(inputs), [xn, wn, bn, m, din, dout](const Array<Scalar>& g) {
    CMapRow<Scalar> gm(g.data(), m, dout);
    if (xn->requires_grad) {
      MapRow<Scalar> gx(xn->grad_buffer().data(), m, din);
      CMapRow<Scalar> wm(wn->data.data(), dout, din);
      gx.noalias() += gm * wm;
    }
    if (wn->requires_grad) {
      MapRow<Scalar> gw(wn->grad_buffer().data(), dout, din);
      CMapRow<Scalar> xm(xn->data.data(), m, din);
      gw.noalias() += gm.transpose() * xm;
    }
    if (bn && bn->requires_grad) {
      bn->grad_buffer() += gm.colwise().sum().transpose().array();
    }
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                          const Tensor<Scalar>& beta, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const Index c = x.dim(-1);
  if (gamma.ndim() != 1 || beta.ndim() != 1 || gamma.dim(0) != c || beta.dim(0) != c) {
    throw DimensionError("layer_norm: channel count " + std::to_string(c) +
                         " does not match gamma " + to_string(gamma.shape()) + " / beta " +
                         to_string(beta.shape()));
  }
  const Index m = c == 0 ? 0 : x.size() / c;
  auto xhat = std::make_shared<RowMat<Scalar>>(m, c);
  auto rstd = std::make_shared<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(m);
  Array<Scalar> y(x.size());
  CMapRow<Scalar> xm(x.data().data(), m, c);
  MapRow<Scalar> ym(y.data(), m, c);
  const auto gvec = gamma.data().matrix().transpose();
  const auto bvec = beta.data().matrix().transpose();
  for (Index r = 0; r < m; ++r) {
    const Scalar mu = xm.row(r).mean();
    const Scalar var = (xm.row(r).array() - mu).square().mean();
    const Scalar rs = Scalar(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    xhat->row(r) = (xm.row(r).array() - mu) * rs;
    ym.row(r) = xhat->row(r).cwiseProduct(gvec) + bvec;
  }
  Tensor<Scalar> out = make<Scalar>(x.shape(), std::move(y), "layer_norm");
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  Tape<Scalar>::active().record(out, {xn, gn, bn}, [xn, gn, bn, xhat, rstd, m, c](const Array<Scalar>& g) {
    CMapRow<Scalar> gm(g.data(), m, c);
    if (gn->requires_grad) {
      gn->grad_buffer() += gm.cwiseProduct(*xhat).colwise().sum().transpose().array();
    }
    if (bn->requires_grad) {
      bn->grad_buffer() += gm.colwise().sum().transpose().array();
    }
    if (xn->requires_grad) {
      MapRow<Scalar> gx(xn->grad_buffer().data(), m, c);
      const auto gvec = gn->data.matrix().transpose();
      for (Index r = 0; r < m; ++r) {
        const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> gxhat = gm.row(r).cwiseProduct(gvec);
        const Scalar mean_g = gxhat.mean();
        const Scalar mean_gx = gxhat.cwiseProduct(xhat->row(r)).mean();
        gx.row(r).array() +=
            (*rstd)[r] * (gxhat.array() - mean_g - xhat->row(r).array() * mean_gx);
      }
    }
  });
  return out;
}

namespace {

struct LerpAxis {
  std::vector<Index> lo, hi;
  std::vector<double> w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
};

LerpAxis lerp_axis(Index in, Index out) {
  LerpAxis a;
  a.lo.resize(static_cast<std::size_t>(out));
  a.hi.resize(static_cast<std::size_t>(out));
  a.w_hi.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    Index i0 = static_cast<Index>(src);
    if (i0 > in - 1) i0 = in - 1;
    const Index i1 = std::min(i0 + 1, in - 1);
    const auto k = static_cast<std::size_t>(o);
    a.lo[k] = i0;
    a.hi[k] = i1;
    a.w_hi[k] = src - static_cast<double>(i0);
  }
  return a;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& x, Index out_h, Index out_w) {
  if (x.ndim() != 4 || out_h < 1 || out_w < 1 || x.dim(2) < 1 || x.dim(3) < 1) {
    throw DimensionError("resize_bilinear: bad input " + to_string(x.shape()) + " or target");
  }
  const Index planes = x.dim(0) * x.dim(1);
  const Index h = x.dim(2);
  const Index w = x.dim(3);
  auto ay = std::make_shared<LerpAxis>(lerp_axis(h, out_h));
  auto ax = std::make_shared<LerpAxis>(lerp_axis(w, out_w));
  Array<Scalar> y(planes * out_h * out_w);
  for (Index p = 0; p < planes; ++p) {
    const Scalar* src = x.data().data() + p * h * w;
    Scalar* dst = y.data() + p * out_h * out_w;
    for (Index oy = 0; oy < out_h; ++oy) {
      const auto ky = static_cast<std::size_t>(oy);
      const Scalar wy1 = static_cast<Scalar>(ay->w_hi[ky]);
      const Scalar wy0 = Scalar(1) - wy1;
      const Scalar* r0 = src + ay->lo[ky] * w;
      const Scalar* r1 = src + ay->hi[ky] * w;
      for (Index ox = 0; ox < out_w; ++ox) {
        const auto kx = static_cast<std::size_t>(ox);
        const Scalar wx1 = static_cast<Scalar>(ax->w_hi[kx]);
        const Scalar wx0 = Scalar(1) - wx1;
        const Index x0 = ax->lo[kx];
        const Index x1 = ax->hi[kx];
        dst[oy * out_w + ox] =
            wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
      }
    }
  }
  Tensor<Scalar> out =
      make<Scalar>({x.dim(0), x.dim(1), out_h, out_w}, std::move(y), "resize_bilinear");
  auto xn = x.node();
  Tape<Scalar>::active().record(out, {xn}, [xn, ay, ax, planes, h, w, out_h, out_w](const Array<Scalar>& g) {
    if (!xn->requires_grad) return;
    Array<Scalar>& gx = xn->grad_buffer();
    for (Index p = 0; p < planes; ++p) {
      const Scalar* src = g.data() + p * out_h * out_w;
      Scalar* dst = gx.data() + p * h * w;
      for (Index oy = 0; oy < out_h; ++oy) {
        const auto ky = static_cast<std::size_t>(oy);
        const Scalar wy1 = static_cast<Scalar>(ay->w_hi[ky]);
        const Scalar wy0 = Scalar(1) - wy1;
        Scalar* r0 = dst + ay->lo[ky] * w;
        Scalar* r1 = dst + ay->hi[ky] * w;
        for (Index ox = 0; ox < out_w; ++ox) {
          const auto kx = static_cast<std::size_t>(ox);
          const Scalar wx1 = static_cast<Scalar>(ax->w_hi[kx]);
          const Scalar wx0 = Scalar(1) - wx1;
          const Scalar v = src[oy * out_w + ox];
          r0[ax->lo[kx]] += wy0 * wx0 * v;
          r0[ax->hi[kx]] += wy0 * wx1 * v;
          r1[ax->lo[kx]] += wy1 * wx0 * v;
          r1[ax->hi[kx]] += wy1 * wx1 * v;
        }
      }
    }
  });
  return out;
}

#define RMAMBA_INSTANTIATE_OPS(S)                                                          \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> div(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> affine(const Tensor<S>&, S, S);                                       \
  template Tensor<S> mul_channel_broadcast(const Tensor<S>&, const Tensor<S>&);            \
  template Tensor<S> exp(const Tensor<S>&);                                                \
  template Tensor<S> log(const Tensor<S>&);                                                \
  template Tensor<S> softplus(const Tensor<S>&);                                           \
  template Tensor<S> sigmoid(const Tensor<S>&);                                            \
  template Tensor<S> silu(const Tensor<S>&);                                               \
  template Tensor<S> relu(const Tensor<S>&);                                               \
  template Tensor<S> activation(const Tensor<S>&, Activation);                             \
  template Tensor<S> clamp(const Tensor<S>&, S, S);                                        \
  template Tensor<S> sum(const Tensor<S>&);                                                \
  template Tensor<S> mean(const Tensor<S>&);                                               \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                     \
  template Tensor<S> permute(const Tensor<S>&, const std::vector<int>&);                   \
  template Tensor<S> gather_last(const Tensor<S>&, const std::vector<Index>&);             \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Index,   \
                            Index, Index);                                                 \
  template Tensor<S> linear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);         \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);  \
  template Tensor<S> resize_bilinear(const Tensor<S>&, Index, Index);

RMAMBA_INSTANTIATE_OPS(float)
RMAMBA_INSTANTIATE_OPS(double)

#undef RMAMBA_INSTANTIATE_OPS

}  // namespace rmamba
