#include "smartaug/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "smartaug/error.hpp"

namespace smartaug {

namespace {

std::atomic<std::uint64_t> g_sequence{0};
thread_local bool t_grad_enabled = true;

void check_finite(std::span<const double> values, const std::string& what) {
  // A double is NaN or infinite exactly when its exponent bits are all set.
  constexpr std::uint64_t kExponent = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : values) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExponent) == kExponent);
  if (bad != 0) throw std::domain_error("non-finite value produced by " + what);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape()));
  }
  return impl_->shape[axis];
}

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data.size(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, shape is " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data, false);
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor make_result(Shape shape, std::vector<double> data, std::string op_kind,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward) {
  check_finite(data, op_kind);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (shape_numel(impl->shape) != impl->data.size()) {
    throw ShapeError(op_kind + ": internal shape/data size mismatch");
  }
  const bool any_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (t_grad_enabled && any_grad) {
    auto node = std::make_shared<TapeNode>();
    node->op_kind = std::move(op_kind);
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.impl());
    node->backward = std::move(backward);
    node->sequence = g_sequence.fetch_add(1);
    impl->node = std::move(node);
    impl->requires_grad = true;
  }
  return Tensor(std::move(impl));
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward() on a tensor that does not require grad");
  }

  // Collect everything reachable from the loss.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> stack{loss.impl().get()};
  while (!stack.empty()) {
    TensorImpl* t = stack.back();
    stack.pop_back();
    if (!seen.insert(t).second) continue;
    order.push_back(t);
    if (t->node) {
      for (const auto& in : t->node->inputs) {
        if (in->requires_grad) stack.push_back(in.get());
      }
    }
  }

  std::vector<TensorImpl*> interior;
  std::vector<TensorImpl*> leaves;
  for (TensorImpl* t : order) (t->node ? interior : leaves).push_back(t);
  // Creation order is a topological order, so reverse creation order visits
  // each tensor only after all of its consumers.
  std::sort(interior.begin(), interior.end(), [](const TensorImpl* a, const TensorImpl* b) {
    return a->node->sequence > b->node->sequence;
  });

  // Leaves receive this pass's gradient in a fresh buffer and add it to the
  // stored gradient once at the end.
  std::vector<std::vector<double>> previous(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    previous[i] = std::move(leaves[i]->grad);
    leaves[i]->grad.assign(leaves[i]->data.size(), 0.0);
  }
  for (TensorImpl* t : interior) t->grad.assign(t->data.size(), 0.0);
  loss.impl()->grad[0] = 1.0;

  for (TensorImpl* t : interior) {
    t->node->backward(t->grad);
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    std::vector<double>& g = leaves[i]->grad;
    if (previous[i].size() == g.size()) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = previous[i][j] + g[j];
    }
    check_finite(g, "backward pass");
  }
}

bool grad_mode_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace smartaug
