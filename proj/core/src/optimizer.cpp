#include "smartaug/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "smartaug/error.hpp"

namespace smartaug {

NesterovSgd::NesterovSgd(ParameterList params, double learning_rate, double momentum)
    : params_(std::move(params)), learning_rate_(learning_rate), momentum_(momentum) {
  set_learning_rate(learning_rate);
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1), got " + std::to_string(momentum));
  }
  velocity_.reserve(params_.size());
  for (Parameter& p : params_) {
    if (!p.tensor.is_leaf()) {
      throw std::invalid_argument("parameter '" + p.name + "' is not a leaf tensor");
    }
    p.tensor.set_requires_grad(true);
    velocity_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void NesterovSgd::set_learning_rate(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("learning rate must be positive, got " + std::to_string(lr));
  }
  learning_rate_ = lr;
}

void NesterovSgd::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

void NesterovSgd::step() {
  for (const Parameter& p : params_) {
    if (p.tensor.grad().size() != p.tensor.numel()) {
      throw std::logic_error("parameter '" + p.name + "' has no gradient");
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].tensor;
    auto w = t.data();
    auto g = t.grad();
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum_ * v[j] - learning_rate_ * g[j];
      w[j] = w[j] + momentum_ * v[j] - learning_rate_ * g[j];
      g[j] = 0.0;
    }
  }
}

}  // namespace smartaug
