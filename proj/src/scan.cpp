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

#include "rmamba/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <thread>

namespace rmamba {

namespace {

std::atomic<int> g_scan_threads{0};  // 0 = hardware concurrency

}  // namespace

void set_scan_threads(int threads) { g_scan_threads = std::max(0, threads); }

int scan_threads() {
  const int t = g_scan_threads;
  if (t > 0) return t;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end,
                  const std::function<void(std::ptrdiff_t)>& fn) {
  const std::ptrdiff_t count = end - begin;
  if (count <= 0) return;
  const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(scan_threads(), count);
  if (workers <= 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::ptrdiff_t chunk = (count + workers - 1) / workers;
  for (std::ptrdiff_t w = 0; w < workers; ++w) {
    const std::ptrdiff_t lo = begin + w * chunk;
    const std::ptrdiff_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

namespace {

template <typename Scalar>
using Array = typename Tensor<Scalar>::Array;

struct ScanDims {
  Index n, d, s, l;
  // u/delta/y: [n, d, l]
  Index ud(Index b, Index ch, Index t) const { return (b * d + ch) * l + t; }
  // B/C: [n, s, l]
  Index bc(Index b, Index st, Index t) const { return (b * s + st) * l + t; }
  // stored states: [n, d, l, s]
  Index hs(Index b, Index ch, Index t, Index st) const { return ((b * d + ch) * l + t) * s + st; }
};

template <typename Scalar>
void forward_sequential(const ScanDims& dm, const Scalar* u, const Scalar* dt, const Scalar* A,
                        const Scalar* B, const Scalar* C, const Scalar* D, Scalar* y,
                        Scalar* states) {
  std::vector<Scalar> h(static_cast<std::size_t>(dm.s));
  for (Index b = 0; b < dm.n; ++b) {
    for (Index ch = 0; ch < dm.d; ++ch) {
      std::fill(h.begin(), h.end(), Scalar(0));
      const Scalar* arow = A + ch * dm.s;
      for (Index t = 0; t < dm.l; ++t) {
        const Scalar delta = dt[dm.ud(b, ch, t)];
        const Scalar ut = u[dm.ud(b, ch, t)];
        Scalar acc = D[ch] * ut;
        for (Index st = 0; st < dm.s; ++st) {
          const auto k = static_cast<std::size_t>(st);
          h[k] = std::exp(delta * arow[st]) * h[k] + delta * B[dm.bc(b, st, t)] * ut;
          acc += C[dm.bc(b, st, t)] * h[k];
          if (states) states[dm.hs(b, ch, t, st)] = h[k];
        }
        y[dm.ud(b, ch, t)] = acc;
      }
    }
  }
}

template <typename Scalar>
void forward_parallel(const ScanDims& dm, const Scalar* u, const Scalar* dt, const Scalar* A,
                      const Scalar* B, const Scalar* C, const Scalar* D, Scalar* y,
                      Scalar* states) {
  // One independent tree scan per (batch, channel); the S state lanes of a
  // channel are scanned together so the readout can be fused.
  parallel_for(0, dm.n * dm.d, [&](std::ptrdiff_t job) {
    const Index b = job / dm.d;
    const Index ch = job % dm.d;
    std::vector<AffineStep<Scalar>> seq(static_cast<std::size_t>(dm.l));
    for (Index t = 0; t < dm.l; ++t) y[dm.ud(b, ch, t)] = D[ch] * u[dm.ud(b, ch, t)];
    for (Index st = 0; st < dm.s; ++st) {
      const Scalar a_ds = A[ch * dm.s + st];
      for (Index t = 0; t < dm.l; ++t) {
        const Scalar delta = dt[dm.ud(b, ch, t)];
        seq[static_cast<std::size_t>(t)] = {std::exp(delta * a_ds),
                                            delta * B[dm.bc(b, st, t)] * u[dm.ud(b, ch, t)]};
      }
      tree_inclusive_scan<AffineStep<Scalar>>(seq, combine<Scalar>, AffineStep<Scalar>{});
      for (Index t = 0; t < dm.l; ++t) {
        // Composite map applied to h_0 = 0 leaves its offset.
        const Scalar h = seq[static_cast<std::size_t>(t)].b;
        y[dm.ud(b, ch, t)] += C[dm.bc(b, st, t)] * h;
        if (states) states[dm.hs(b, ch, t, st)] = h;
      }
    }
  });
}

// Adjoint of the state: gh_t = C_t gy_t + a_{t+1} gh_{t+1}, gh_{L} = 0.
// Writes gh in the [n, d, l, s] layout.
template <typename Scalar>
void state_adjoint(const ScanDims& dm, ScanAlgorithm algo, const Scalar* dt, const Scalar* A,
                   const Scalar* C, const Scalar* gy, Scalar* gh) {
  if (algo == ScanAlgorithm::Sequential) {
    std::vector<Scalar> carry(static_cast<std::size_t>(dm.s));
    for (Index b = 0; b < dm.n; ++b) {
      for (Index ch = 0; ch < dm.d; ++ch) {
        std::fill(carry.begin(), carry.end(), Scalar(0));
        for (Index t = dm.l - 1; t >= 0; --t) {
          const Scalar g = gy[dm.ud(b, ch, t)];
          const Scalar next_delta = t + 1 < dm.l ? dt[dm.ud(b, ch, t + 1)] : Scalar(0);
          for (Index st = 0; st < dm.s; ++st) {
            const auto k = static_cast<std::size_t>(st);
            const Scalar a_next =
                t + 1 < dm.l ? std::exp(next_delta * A[ch * dm.s + st]) : Scalar(0);
            carry[k] = C[dm.bc(b, st, t)] * g + a_next * carry[k];
            gh[dm.hs(b, ch, t, st)] = carry[k];
          }
        }
      }
    }
    return;
  }
  parallel_for(0, dm.n * dm.d, [&](std::ptrdiff_t job) {
    const Index b = job / dm.d;
    const Index ch = job % dm.d;
    std::vector<AffineStep<Scalar>> seq(static_cast<std::size_t>(dm.l));
    for (Index st = 0; st < dm.s; ++st) {
      const Scalar a_ds = A[ch * dm.s + st];
      // Reversed time: position r holds step t = L-1-r.
      for (Index r = 0; r < dm.l; ++r) {
        const Index t = dm.l - 1 - r;
        const Scalar a_next = t + 1 < dm.l ? std::exp(dt[dm.ud(b, ch, t + 1)] * a_ds) : Scalar(0);
        seq[static_cast<std::size_t>(r)] = {a_next, C[dm.bc(b, st, t)] * gy[dm.ud(b, ch, t)]};
      }
      tree_inclusive_scan<AffineStep<Scalar>>(seq, combine<Scalar>, AffineStep<Scalar>{});
      for (Index r = 0; r < dm.l; ++r) {
        gh[dm.hs(b, ch, dm.l - 1 - r, st)] = seq[static_cast<std::size_t>(r)].b;
      }
    }
  });
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> selective_scan(const Tensor<Scalar>& u, const Tensor<Scalar>& delta,
                              const Tensor<Scalar>& A, const Tensor<Scalar>& B,
                              const Tensor<Scalar>& C, const Tensor<Scalar>& D,
                              ScanAlgorithm algorithm) {
  if (u.ndim() != 3 || delta.shape() != u.shape()) {
    throw DimensionError("selective_scan: u and delta must share shape [N,D,L], got " +
                         to_string(u.shape()) + " and " + to_string(delta.shape()));
  }
  const ScanDims dm{u.dim(0), u.dim(1), A.ndim() == 2 ? A.dim(1) : -1, u.dim(2)};
  if (A.ndim() != 2 || A.dim(0) != dm.d) {
    throw DimensionError("selective_scan: A must be [D,S], got " + to_string(A.shape()));
  }
  const Shape bc_shape{dm.n, dm.s, dm.l};
  if (B.shape() != bc_shape || C.shape() != bc_shape) {
    throw DimensionError("selective_scan: B and C must be " + to_string(bc_shape) + ", got " +
                         to_string(B.shape()) + " and " + to_string(C.shape()));
  }
  if (D.ndim() != 1 || D.dim(0) != dm.d) {
    throw DimensionError("selective_scan: D must be [" + std::to_string(dm.d) + "], got " +
                         to_string(D.shape()));
  }

  auto& tape = Tape<Scalar>::active();
  const bool needs_grad = tape.enabled() && (u.requires_grad() || delta.requires_grad() ||
                                             A.requires_grad() || B.requires_grad() ||
                                             C.requires_grad() || D.requires_grad());
  Array<Scalar> y(u.size());
  std::shared_ptr<Array<Scalar>> states;
  if (needs_grad) states = std::make_shared<Array<Scalar>>(dm.n * dm.d * dm.l * dm.s);

  auto run = algorithm == ScanAlgorithm::Sequential ? forward_sequential<Scalar>
                                                     : forward_parallel<Scalar>;
  run(dm, u.data().data(), delta.data().data(), A.data().data(), B.data().data(),
      C.data().data(), D.data().data(), y.data(), states ? states->data() : nullptr);
  if (!y.allFinite()) throw NumericError("selective_scan: state overflow (non-finite output)");

  Tensor<Scalar> out(u.shape(), std::move(y));
  auto un = u.node(), dn = delta.node(), an = A.node(), bn = B.node(), cn = C.node(),
       skn = D.node();
  tape.record(out, {un, dn, an, bn, cn, skn}, [=](const Array<Scalar>& gy) {
    Array<Scalar> gh(dm.n * dm.d * dm.l * dm.s);
    state_adjoint(dm, algorithm, dn->data.data(), an->data.data(), cn->data.data(), gy.data(),
                  gh.data());
    const Scalar* uu = un->data.data();
    const Scalar* dt = dn->data.data();
    const Scalar* AA = an->data.data();
    const Scalar* BB = bn->data.data();
    const Scalar* sk = skn->data.data();
    const Scalar* hs = states->data();
    Scalar* gu = un->requires_grad ? un->grad_buffer().data() : nullptr;
    Scalar* gdt = dn->requires_grad ? dn->grad_buffer().data() : nullptr;
    Scalar* gA = an->requires_grad ? an->grad_buffer().data() : nullptr;
    Scalar* gB = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
    Scalar* gC = cn->requires_grad ? cn->grad_buffer().data() : nullptr;
    Scalar* gD = skn->requires_grad ? skn->grad_buffer().data() : nullptr;
    for (Index b = 0; b < dm.n; ++b) {
      for (Index ch = 0; ch < dm.d; ++ch) {
        for (Index t = 0; t < dm.l; ++t) {
          const Index k = dm.ud(b, ch, t);
          const Scalar g = gy[k];
          const Scalar ut = uu[k];
          const Scalar d_t = dt[k];
          Scalar acc_u = sk[ch] * g;
          Scalar acc_dt = 0;
          for (Index st = 0; st < dm.s; ++st) {
            const Scalar a_ds = AA[ch * dm.s + st];
            const Scalar a = std::exp(d_t * a_ds);
            const Scalar ght = gh[dm.hs(b, ch, t, st)];
            const Scalar h_prev = t > 0 ? hs[dm.hs(b, ch, t - 1, st)] : Scalar(0);
            const Scalar b_t = BB[dm.bc(b, st, t)];
            const Scalar ga_scaled = ght * h_prev * a;  // d/d(exponent)
            acc_u += ght * d_t * b_t;
            acc_dt += ga_scaled * a_ds + ght * b_t * ut;
            if (gA) gA[ch * dm.s + st] += ga_scaled * d_t;
            if (gB) gB[dm.bc(b, st, t)] += ght * d_t * ut;
            if (gC) gC[dm.bc(b, st, t)] += g * hs[dm.hs(b, ch, t, st)];
          }
          if (gu) gu[k] += acc_u;
          if (gdt) gdt[k] += acc_dt;
          if (gD) gD[ch] += g * ut;
        }
      }
    }
  });
  return out;
}

template Tensor<float> selective_scan(const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&, const Tensor<float>&, ScanAlgorithm);
template Tensor<double> selective_scan(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, const Tensor<double>&,
                                       ScanAlgorithm);

}  // namespace rmamba
