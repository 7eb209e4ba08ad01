#pragma once

#include <atomic>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tsfx/errors.hpp"
#include "tsfx/rng.hpp"

namespace tsfx {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

// Row-major strides for a shape.
inline std::vector<std::size_t> row_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

namespace detail {
inline std::uint64_t next_tensor_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

// Dense row-major tensor of 64-bit floats. The buffer is shared between
// copies and treated as immutable once an op has produced it; every op
// returns a fresh tensor. `id` identifies the tensor inside a gradient
// tape; copies of a tensor share the id, reshapes and op outputs get a
// new one.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(std::move(data))),
        requires_grad_(requires_grad),
        id_(detail::next_tensor_id()) {
    if (shape_numel(shape_) != data_->size())
      throw ShapeError("tensor data length " + std::to_string(data_->size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 1.0, requires_grad);
  }

  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    std::vector<double> d(n);
    for (double& x : d) x = stddev * rng.next_gauss();
    return Tensor(std::move(shape), std::move(d), requires_grad);
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_->size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  bool requires_grad() const { return requires_grad_; }
  std::uint64_t id() const { return id_; }

  const std::vector<double>& data() const { return *data_; }
  const double* raw() const { return data_->data(); }

  double value() const {
    if (numel() != 1) throw ContractError("value() on non-scalar tensor " + shape_str(shape_));
    return (*data_)[0];
  }

  double operator[](std::size_t flat) const { return (*data_)[flat]; }

  template <typename... Ix>
  double at(Ix... ix) const {
    const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
    if (sizeof...(ix) != shape_.size())
      throw ShapeError("at(): index rank mismatch for shape " + shape_str(shape_));
    std::size_t off = 0, stride = 1;
    for (std::size_t i = shape_.size(); i-- > 0;) {
      off += idx[i] * stride;
      stride *= shape_[i];
    }
    return (*data_)[off];
  }

  // Same buffer under a new shape (no copy, fresh id).
  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != numel())
      throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                       " changes element count");
    Tensor t(*this);
    t.shape_ = std::move(shape);
    t.id_ = detail::next_tensor_id();
    return t;
  }

  // Same buffer, detached from any gradient bookkeeping.
  Tensor detached() const {
    Tensor t(*this);
    t.requires_grad_ = false;
    t.id_ = detail::next_tensor_id();
    return t;
  }

  Tensor with_requires_grad(bool rg = true) const {
    Tensor t(*this);
    t.requires_grad_ = rg;
    return t;
  }

  bool same_buffer(const Tensor& other) const { return data_ == other.data_; }

  bool all_finite() const {
    for (double v : *data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  bool requires_grad_ = false;
  std::uint64_t id_ = 0;
};

}  // namespace tsfx
