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

#include "rmamba/tensor.hpp"

#include <atomic>
#include <sstream>

namespace rmamba {

namespace {

#ifdef NDEBUG
std::atomic<bool> g_finite_checks{false};
#else
std::atomic<bool> g_finite_checks{true};
#endif

}  // namespace

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw DimensionError("negative extent in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Array data, bool requires_grad)
    : node_(std::make_shared<detail::Node<Scalar>>()) {
  if (numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(Shape shape, bool requires_grad) {
  const Index n = numel(shape);
  return Tensor(std::move(shape), Array::Zero(n), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), Scalar(1), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::full(Shape shape, Scalar value, bool requires_grad) {
  const Index n = numel(shape);
  return Tensor(std::move(shape), Array::Constant(n, value), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from(Shape shape, std::initializer_list<Scalar> values,
                                    bool requires_grad) {
  Array data(static_cast<Index>(values.size()));
  Index i = 0;
  for (Scalar v : values) data[i++] = v;
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::scalar(Scalar value, bool requires_grad) {
  return full({}, value, requires_grad);
}

template <typename Scalar>
Index Tensor<Scalar>::dim(int i) const {
  const int n = ndim();
  const int k = i < 0 ? n + i : i;
  if (k < 0 || k >= n) {
    throw DimensionError("axis " + std::to_string(i) + " out of range for shape " +
                         to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(k)];
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->data[0];
}

template <typename Scalar>
Scalar Tensor<Scalar>::at(std::initializer_list<Index> idx) const {
  if (static_cast<int>(idx.size()) != ndim()) {
    throw DimensionError("at(): index rank does not match shape " + to_string(shape()));
  }
  Index flat = 0;
  std::size_t axis = 0;
  for (Index i : idx) {
    const Index extent = node_->shape[axis++];
    if (i < 0 || i >= extent) throw DimensionError("at(): index out of range");
    flat = flat * extent + i;
  }
  return node_->data[flat];
}

template <typename Scalar>
Tensor<Scalar>& Tensor<Scalar>::set_requires_grad(bool value) {
  node_->requires_grad = value;
  return *this;
}

template <typename Scalar>
typename Tensor<Scalar>::Array Tensor<Scalar>::grad() const {
  if (node_->grad.size() == 0) return Array::Zero(size());
  return node_->grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detach() const {
  return Tensor(shape(), data());
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::clone() const {
  Tensor t(shape(), data(), requires_grad());
  return t;
}

template <typename Scalar>
Tape<Scalar>& Tape<Scalar>::active() {
  thread_local Tape tape;
  return tape;
}

template <typename Scalar>
void Tape<Scalar>::record(const Tensor<Scalar>& output,
                          std::vector<detail::NodePtr<Scalar>> inputs,
                          Backward backward) {
  if (!enabled_) return;
  bool any = false;
  for (const auto& in : inputs) any = any || in->requires_grad;
  if (!any) return;
  output.node()->requires_grad = true;
  output.node()->tape_index = static_cast<std::ptrdiff_t>(entries_.size());
  entries_.push_back(Entry{output.node(), std::move(inputs), std::move(backward)});
}

template <typename Scalar>
void Tape<Scalar>::backward(const Tensor<Scalar>& loss) {
  if (!loss.defined()) throw AutodiffError("backward() on an undefined tensor");
  if (loss.size() != 1) {
    throw AutodiffError("backward() needs a scalar loss, got shape " +
                        to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw AutodiffError("backward() on a detached tensor (no path to any leaf)");
  }
  const auto& root = loss.node();
  const std::ptrdiff_t start = root->tape_index;
  if (start >= static_cast<std::ptrdiff_t>(entries_.size()) ||
      (start >= 0 && entries_[static_cast<std::size_t>(start)].output != root)) {
    throw AutodiffError("backward(): loss was not produced on this tape");
  }
  root->accumulate(Array::Ones(1));
  for (std::ptrdiff_t i = start; i >= 0; --i) {
    Entry& e = entries_[static_cast<std::size_t>(i)];
    if (e.output->grad.size() == 0) continue;
    e.backward(e.output->grad);
  }
}

template <typename Scalar>
void Tape<Scalar>::clear() {
  for (auto& e : entries_) e.output->tape_index = -1;
  entries_.clear();
}

NoGradGuard::NoGradGuard()
    : prev_float_(Tape<float>::active().enabled()),
      prev_double_(Tape<double>::active().enabled()) {
  Tape<float>::active().set_enabled(false);
  Tape<double>::active().set_enabled(false);
}

NoGradGuard::~NoGradGuard() {
  Tape<float>::active().set_enabled(prev_float_);
  Tape<double>::active().set_enabled(prev_double_);
}

namespace detail {

template <typename Scalar>
void check_finite(const Eigen::Array<Scalar, Eigen::Dynamic, 1>& values, const char* op) {
  if (!finite_checks()) return;
  if (!values.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

template void check_finite<float>(const Eigen::Array<float, Eigen::Dynamic, 1>&, const char*);
template void check_finite<double>(const Eigen::Array<double, Eigen::Dynamic, 1>&,
                                   const char*);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace rmamba
