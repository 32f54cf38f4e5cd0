#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace smartaug {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct TensorImpl;

// One recorded operation on the tape. `backward` receives the gradient of the
// node's output and accumulates into the gradients of `inputs`.
struct TapeNode {
  std::string op_kind;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const double> out_grad)> backward;
  std::uint64_t sequence = 0;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::shared_ptr<TapeNode> node;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Reference-counted handle to an n-dimensional array of doubles.
///
/// Copies share storage; use clone() for a deep copy. Tensors produced by an
/// operation on at least one requires_grad input carry a TapeNode and take
/// part in backward().
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  /// Empty until a backward pass or an optimizer touches this tensor.
  std::span<double> grad() { return impl_->grad; }
  std::span<const double> grad() const { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool is_leaf() const { return impl_->node == nullptr; }

  double item() const;
  double& at(std::size_t flat) { return impl_->data.at(flat); }
  double at(std::size_t flat) const { return impl_->data.at(flat); }

  /// Deep copy of the values, detached from the tape, requires_grad=false.
  Tensor clone() const;
  /// Shares values with this tensor but has no tape history.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::string,
                            std::vector<Tensor>,
                            std::function<void(std::span<const double>)>);
  std::shared_ptr<TensorImpl> impl_;
};

/// Builds an op output. When grad mode is on and any input requires grad,
/// the output records a TapeNode with `backward`; otherwise it is a plain leaf.
Tensor make_result(Shape shape, std::vector<double> data, std::string op_kind,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward);

/// True when the backward rule for `t` should write into t's gradient.
inline bool wants_grad(const std::shared_ptr<TensorImpl>& t) { return t->requires_grad; }

/// Reverse-mode pass from a scalar. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed each call.
void backward(const Tensor& loss);

bool grad_mode_enabled();

/// Disables tape recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace smartaug
