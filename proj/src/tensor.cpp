// SPDX-License-Identifier: Apache-2.0
#include "c3po/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace c3po {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

ShapeError shape_mismatch(const std::string& op, const Shape& a, const Shape& b) {
  return ShapeError(op + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw ShapeError("negative dimension in " + shape.str());
  node_->shape = shape;
  node_->data.assign(shape.numel(), fill);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::span<const T> values, bool requires_grad)
    : node_(std::make_shared<Node<T>>()) {
  if (values.size() != shape.numel())
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     shape.str());
  node_->shape = shape;
  node_->data.assign(values.begin(), values.end());
  node_->requires_grad = requires_grad;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  static const Shape empty{};
  return node_ ? node_->shape : empty;
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
typename Tensor<T>::ConstArrayMap Tensor<T>::array() const {
  return ConstArrayMap(node_->data.data(), static_cast<Eigen::Index>(node_->data.size()));
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!is_leaf()) throw std::logic_error("mutable_data() on a non-leaf tensor");
  return node_->data;
}

template <typename T>
T Tensor<T>::at(int n, int c, int y, int x) const {
  const Shape& s = node_->shape;
  return node_->data[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
  return node_->data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  node_->requires_grad = value;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return node_ && node_->leaf;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!node_) return {};
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor<T>(node_->shape, node_->data, false);
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> values,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->data = std::move(values);
  node->leaf = false;
  const bool tracked = grad_enabled() && std::any_of(parents.begin(), parents.end(),
                                   [](const auto& p) { return p && p->requires_grad; });
  if (tracked) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeError("backward() needs a scalar loss, got " + loss.shape().str());
  const auto& root = loss.node();
  if (!root->requires_grad) throw std::logic_error("backward() on a loss with no tracked inputs");
  if (root->consumed) throw std::logic_error("backward() called twice on the same loss");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Interior buffers are no longer needed once the sweep is done.
  for (Node<T>* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      if (node != root.get()) node->grad.clear();
    }
  }
  root->consumed = true;
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<float> make_result(Shape, Buffer<float>,
                                   std::vector<std::shared_ptr<Node<float>>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, Buffer<double>,
                                    std::vector<std::shared_ptr<Node<double>>>,
                                    std::function<void(Node<double>&)>);

}  // namespace c3po
