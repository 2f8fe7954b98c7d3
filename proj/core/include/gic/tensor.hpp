#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gic/error.hpp"

namespace gic {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class S>
struct TensorNode {
  Shape shape;
  std::vector<S> values;
  std::vector<S> grad; // empty until materialized; same length as values otherwise
  bool requires_grad = false;
  bool tape_output = false; // set when this node is the output of a recorded op
};

// Shared handle onto an n-dimensional row-major array. Copying a Tensor
// aliases the storage; ops always allocate fresh outputs. Constness is
// shallow (like shared_ptr): a const handle still exposes mutable storage,
// which lets backward closures hold captured handles.
template <class S>
class Tensor {
public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<S> values, bool requires_grad = false)
      : node_(std::make_shared<TensorNode<S>>()) {
    validate_shape(shape);
    if (shape_size(shape) != values.size()) {
      throw ShapeError("tensor " + shape_str(shape) + " needs " +
                       std::to_string(shape_size(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<S>(n, S(0)), requires_grad);
  }

  static Tensor full(Shape shape, S value) {
    std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<S>(n, value));
  }

  static Tensor scalar(S value) { return Tensor({1}, {value}); }

  static Tensor from(Shape shape, std::initializer_list<S> values) {
    return Tensor(std::move(shape), std::vector<S>(values));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t size() const { return node_->values.size(); }

  std::span<S> values() const { return node_->values; }
  S* data() const { return node_->values.data(); }
  S& operator[](std::size_t i) const { return node_->values[i]; }

  S item() const {
    if (size() != 1) throw ShapeError("item() on tensor of size " + std::to_string(size()));
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  const Tensor& set_requires_grad(bool v) const {
    node_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }

  // Materializes a zero gradient buffer on first use.
  std::span<S> grad() const {
    ensure_grad();
    return node_->grad;
  }

  void ensure_grad() const {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), S(0));
  }

  void zero_grad() const {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  void drop_grad() const { node_->grad.clear(); }

  TensorNode<S>* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode<S>>& node_ptr() const { return node_; }

private:
  static void validate_shape(const Shape& s) {
    for (std::size_t d : s) {
      if (d == 0) throw ShapeError("zero extent in shape " + shape_str(s));
    }
  }

  std::shared_ptr<TensorNode<S>> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <class S>
bool all_finite(const Tensor<S>& t) {
  for (S v : t.values()) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

} // namespace gic
