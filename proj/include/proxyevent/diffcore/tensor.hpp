#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "proxyevent/errors.hpp"

namespace proxyevent::diffcore {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Dense row-major float64 tensor. Copies share storage (handle semantics),
/// matching how parameters are referenced from the tape and the optimizer.
///
/// Every op treats a tensor as a matrix: cols() is the last dimension and
/// rows() the product of the leading ones. Vectors are 1 x d rows and
/// scalars are 1 x 1.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(numel_of(shape), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (numel_of(shape) != values.size()) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1, 1}, {value}, requires_grad);
  }

  static Tensor row(std::vector<double> values, bool requires_grad = false) {
    const std::size_t n = values.size();
    return from({1, n}, std::move(values), requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t cols() const { return impl_->shape.empty() ? 1 : impl_->shape.back(); }
  std::size_t rows() const {
    const std::size_t c = cols();
    return c == 0 ? 0 : numel() / c;
  }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }
  double item() const {
    if (numel() != 1) throw DimensionError("item() on non-scalar tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool has_grad() const { return impl_->grad.size() == impl_->data.size() && !impl_->data.empty(); }
  std::vector<double>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  const std::vector<double>& grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy without tape history.
  Tensor detach() const { return from(shape(), data(), false); }

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of differentiable operations. Recording order is a
/// topological order, so backward is a single reverse sweep.
class Tape {
 public:
  using Backward = std::function<void()>;

  void record(std::shared_ptr<TensorImpl> output, Backward fn) {
    entries_.push_back({std::move(output), std::move(fn)});
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Intermediate gradients are
  /// reset first so repeated calls accumulate only into leaves.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw DimensionError("backward requires a scalar loss, got shape " +
                           (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) return;
    for (auto& e : entries_) e.output->grad.assign(e.output->data.size(), 0.0);
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  }

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> output;
    Backward backward;
  };
  std::vector<Entry> entries_;
};

namespace detail {
inline Tape*& active_tape() {
  thread_local Tape* tape = nullptr;
  return tape;
}
}  // namespace detail

inline Tape* active_tape() { return detail::active_tape(); }

/// Makes `tape` the recording target for the current thread while alive.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(detail::active_tape()) { detail::active_tape() = &tape; }
  ~TapeScope() { detail::active_tape() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording (evaluation passes).
class NoGradScope {
 public:
  NoGradScope() : previous_(detail::active_tape()) { detail::active_tape() = nullptr; }
  ~NoGradScope() { detail::active_tape() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

inline void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (tape == nullptr) throw Error("backward called without an active tape");
  tape->backward(loss);
}

}  // namespace proxyevent::diffcore
