#include "dfd/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "dfd/error.hpp"

namespace dfd::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::uint64_t next_order() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  return from_buffer(std::move(shape), AlignedVector<T>(values.begin(), values.end()));
}

template <typename T>
Tensor<T> Tensor<T>::from_buffer(Shape shape, AlignedVector<T> values) {
  if (ad::numel(shape) != values.size()) {
    throw ArgumentError("tensor data length does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->order = next_order();
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::leaf(Shape shape, std::vector<T> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = ad::numel(shape);
  Tensor t = constant(std::move(shape), std::vector<T>(n, T(0)));
  t.node_->requires_grad = requires_grad;
  return t;
}

template <typename T>
std::size_t Tensor<T>::dim(int i) const {
  const int r = static_cast<int>(rank());
  const int k = i < 0 ? r + i : i;
  if (k < 0 || k >= r) throw ArgumentError("dimension index out of range for " + to_string(shape()));
  return node_->shape[static_cast<std::size_t>(k)];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->is_leaf) throw StateError("only leaf tensors may be mutated");
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ArgumentError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) throw ArgumentError("backward() needs a scalar root");
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> nodes;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    nodes.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node<T>* a, const Node<T>* b) { return a->order > b->order; });

  for (Node<T>* n : nodes) {
    if (!n->is_leaf || n->grad.size() != n->value.size()) {
      if (!n->is_leaf) {
        n->grad.assign(n->value.size(), T(0));
      } else {
        n->grad.resize(n->value.size(), T(0));
      }
    }
  }
  loss.node()->grad[0] += T(1);
  for (Node<T>* n : nodes) {
    if (!n->is_leaf && n->backward) n->backward(*n);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace dfd::ad
