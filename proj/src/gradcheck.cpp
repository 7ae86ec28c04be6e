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

#include "rmamba/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rmamba {

template <typename Scalar>
Tensor<Scalar> finite_diff_grad(const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                                const Tensor<Scalar>& x, Scalar h) {
  if (!(h > 0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  NoGradGuard no_grad;
  Tensor<Scalar> probe = x.detach().clone();
  auto& v = probe.mutable_data();
  typename Tensor<Scalar>::Array grad(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar orig = v[i];
    v[i] = orig + h;
    const Scalar fp = f(probe).item();
    v[i] = orig - h;
    const Scalar fm = f(probe).item();
    v[i] = orig;
    grad[i] = (fp - fm) / (Scalar(2) * h);
  }
  return Tensor<Scalar>(x.shape(), std::move(grad));
}

template <typename Scalar>
std::vector<Scalar> finite_diff_at(const std::function<Scalar()>& loss, Tensor<Scalar>& x,
                                   const std::vector<Index>& coords, Scalar h) {
  NoGradGuard no_grad;
  auto& v = x.mutable_data();
  std::vector<Scalar> out;
  out.reserve(coords.size());
  for (Index i : coords) {
    const Scalar orig = v[i];
    v[i] = orig + h;
    const Scalar fp = loss();
    v[i] = orig - h;
    const Scalar fm = loss();
    v[i] = orig;
    out.push_back((fp - fm) / (Scalar(2) * h));
  }
  return out;
}

template <typename Scalar>
GradCheckResult compare_grads(const Scalar* analytic, const Scalar* numeric, Index count,
                              double rtol, double atol) {
  GradCheckResult r;
  r.checked = count;
  double worst_excess = -1;
  for (Index i = 0; i < count; ++i) {
    const double a = static_cast<double>(analytic[i]);
    const double n = static_cast<double>(numeric[i]);
    const double err = std::abs(a - n);
    const double scale = std::max(std::abs(a), std::abs(n));
    const double tol = std::max(rtol * scale, atol);
    r.max_abs_err = std::max(r.max_abs_err, err);
    if (scale > atol) r.max_rel_err = std::max(r.max_rel_err, err / scale);
    if (!(err <= tol)) r.passed = false;
    if (err - tol > worst_excess) {
      worst_excess = err - tol;
      r.worst = i;
    }
  }
  return r;
}

template <typename Scalar>
GradCheckResult check_gradients(
    const std::function<Tensor<Scalar>(const std::vector<Tensor<Scalar>>&)>& f,
    std::vector<Tensor<Scalar>> inputs, Scalar h, double rtol, double atol) {
  auto& tape = Tape<Scalar>::active();
  tape.clear();
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor<Scalar> loss = f(inputs);
  tape.backward(loss);
  tape.clear();

  GradCheckResult total;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const typename Tensor<Scalar>::Array analytic = inputs[k].grad();
    std::vector<Index> coords(static_cast<std::size_t>(inputs[k].size()));
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<Index>(i);
    std::vector<Scalar> numeric =
        finite_diff_at<Scalar>([&] { return f(inputs).item(); }, inputs[k], coords, h);
    const GradCheckResult r =
        compare_grads(analytic.data(), numeric.data(), inputs[k].size(), rtol, atol);
    total.passed = total.passed && r.passed;
    total.max_abs_err = std::max(total.max_abs_err, r.max_abs_err);
    total.max_rel_err = std::max(total.max_rel_err, r.max_rel_err);
    total.checked += r.checked;
  }
  return total;
}

#define RMAMBA_INSTANTIATE_GRADCHECK(S)                                                      \
  template Tensor<S> finite_diff_grad(const std::function<Tensor<S>(const Tensor<S>&)>&,     \
                                      const Tensor<S>&, S);                                  \
  template std::vector<S> finite_diff_at(const std::function<S()>&, Tensor<S>&,              \
                                         const std::vector<Index>&, S);                      \
  template GradCheckResult compare_grads(const S*, const S*, Index, double, double);         \
  template GradCheckResult check_gradients(                                                  \
      const std::function<Tensor<S>(const std::vector<Tensor<S>>&)>&, std::vector<Tensor<S>>, \
      S, double, double);

RMAMBA_INSTANTIATE_GRADCHECK(float)
RMAMBA_INSTANTIATE_GRADCHECK(double)

#undef RMAMBA_INSTANTIATE_GRADCHECK

}  // namespace rmamba
