#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfd/aligned.hpp"

namespace dfd::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t order = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  /// Adds d(loss)/d(parent) into every parent that requires a gradient,
  /// reading this node's grad.
  std::function<void(Node&)> backward;

  void accumulate(std::size_t i, T g) { grad[i] += g; }
};

/// Monotone creation stamp; parents are always stamped before children, so a
/// descending sweep over stamps is a reverse topological order.
std::uint64_t next_order();

/// Shared handle to a graph node. Copies alias the same node.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor leaf(Shape shape, std::vector<T> values);
  static Tensor from_buffer(Shape shape, AlignedVector<T> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(T value) { return constant({}, {value}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Dimension i; negative i counts from the back.
  std::size_t dim(int i) const;
  std::size_t numel() const { return node_->value.size(); }
  std::span<const T> data() const { return node_->value; }
  /// Writable storage. Only leaves may be mutated, and never while a graph
  /// built from them is still awaiting backward().
  std::span<T> mutable_data();
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }
  void clear_grad() { node_->grad.clear(); }

  /// Constant copy of the current value, disconnected from the graph.
  Tensor detach() const { return from_buffer(shape(), node_->value); }

  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Reverse sweep from a scalar root. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed from zero on each call.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template void backward<float>(const Tensor<float>&);
extern template void backward<double>(const Tensor<double>&);

}  // namespace dfd::ad
