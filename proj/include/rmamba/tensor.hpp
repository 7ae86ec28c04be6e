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

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "rmamba/errors.hpp"

namespace rmamba {

using Index = std::ptrdiff_t;
using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Runtime switch for the NaN/Inf guard on forward ops. Defaults to on in
/// builds without NDEBUG.
void set_finite_checks(bool enabled);
bool finite_checks();

template <typename Scalar>
class Tape;

namespace detail {

template <typename Scalar>
struct Node {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Shape shape;
  Array data;
  Array grad;  // empty until something is accumulated
  bool requires_grad = false;
  // Position of the producing op on the active tape; -1 for leaves.
  std::ptrdiff_t tape_index = -1;

  void accumulate(const Array& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  Array& grad_buffer() {
    if (grad.size() == 0) grad = Array::Zero(data.size());
    return grad;
  }
};

template <typename Scalar>
using NodePtr = std::shared_ptr<Node<Scalar>>;

}  // namespace detail

/// Dense row-major tensor handle. Copies share storage; use clone() for a
/// deep copy. Image tensors are laid out N, C, H, W.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  Tensor(Shape shape, Array data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<Scalar> values,
                     bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  /// Extent of axis i; negative i counts from the back.
  Index dim(int i) const;
  Index size() const { return node_->data.size(); }

  const Array& data() const { return node_->data; }
  /// In-place access for optimizers and loaders. Never call on a tensor
  /// whose producing op is still on a tape.
  Array& mutable_data() { return node_->data; }
  Scalar item() const;
  Scalar at(std::initializer_list<Index> idx) const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool has_grad() const { return node_->grad.size() != 0; }
  /// Gradient values; zeros if nothing was accumulated.
  Array grad() const;
  void zero_grad() { node_->grad.resize(0); }

  /// Same values, no tape history, no grad.
  Tensor detach() const;
  Tensor clone() const;

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape(), data().template cast<Other>());
  }

  const detail::NodePtr<Scalar>& node() const { return node_; }
  explicit Tensor(detail::NodePtr<Scalar> node) : node_(std::move(node)) {}

 private:
  detail::NodePtr<Scalar> node_;
};

/// Ordered record of differentiable ops executed on this thread. Entries
/// are appended in execution order, so reverse traversal is a valid
/// topological order for the adjoint pass.
template <typename Scalar>
class Tape {
 public:
  using Array = typename Tensor<Scalar>::Array;
  using Backward = std::function<void(const Array& grad_out)>;

  struct Entry {
    detail::NodePtr<Scalar> output;
    std::vector<detail::NodePtr<Scalar>> inputs;
    Backward backward;
  };

  static Tape& active();

  bool enabled() const { return enabled_; }
  void set_enabled(bool value) { enabled_ = value; }

  /// Records `output` as produced from `inputs` if any input requires grad.
  /// Marks `output` as requiring grad in that case.
  void record(const Tensor<Scalar>& output,
              std::vector<detail::NodePtr<Scalar>> inputs, Backward backward);

  /// Populates grads of every requires_grad tensor reachable from `loss`.
  void backward(const Tensor<Scalar>& loss);

  void clear();
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
  bool enabled_ = true;
};

template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  Tape<Scalar>::active().backward(loss);
}

/// Disables recording on the active tapes of both precisions for its scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_float_;
  bool prev_double_;
};

namespace detail {

/// Throws NumericError naming `op` if finite checks are on and `values`
/// contains NaN/Inf.
template <typename Scalar>
void check_finite(const Eigen::Array<Scalar, Eigen::Dynamic, 1>& values,
                  const char* op);

}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace rmamba
