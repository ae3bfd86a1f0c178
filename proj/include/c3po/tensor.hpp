// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace c3po {

/// Storage with a fixed base alignment, so vectorised reductions split their
/// work the same way on every run.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// NCHW extent of a dense 4-d array.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  [[nodiscard]] std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
struct Node;

/// Shared handle to a node of the autodiff graph.
///
/// Copies alias the same storage. Values are immutable once an op has
/// produced them; only leaves (parameters, inputs) expose mutable data, and
/// only through `mutable_data()`. Gradients are recorded when at least one
/// input of an op requires them.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::span<const T> values, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t numel() const { return shape().numel(); }

  [[nodiscard]] std::span<const T> data() const;
  [[nodiscard]] ConstArrayMap array() const;
  /// Writable view; only valid on leaves.
  [[nodiscard]] std::span<T> mutable_data();

  [[nodiscard]] T at(int n, int c, int y, int x) const;
  [[nodiscard]] T item() const;

  [[nodiscard]] bool requires_grad() const;
  void set_requires_grad(bool value);
  [[nodiscard]] bool is_leaf() const;

  [[nodiscard]] bool has_grad() const;
  /// Empty span when no gradient has been accumulated.
  [[nodiscard]] std::span<const T> grad() const;
  void zero_grad();

  /// Same values, no graph history.
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> data;
  Buffer<T> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  /// Pushes `self.grad` into the parents' grad buffers.
  std::function<void(Node& self)> backward;

  Buffer<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Reverse-mode sweep from a scalar loss. Throws if the loss is not scalar,
/// untracked, or has already been swept.
template <typename T>
void backward(const Tensor<T>& loss);

/// While alive, results on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

[[nodiscard]] bool grad_enabled();

/// Result node wiring: attaches parents and the backward closure only when
/// gradients are enabled and some parent tracks them.
template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> values,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn);

/// Returns a shape-mismatch error naming both operands.
ShapeError shape_mismatch(const std::string& op, const Shape& a, const Shape& b);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace c3po
