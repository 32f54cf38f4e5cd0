#pragma once

#include <string>
#include <vector>

#include "smartaug/tensor.hpp"

namespace smartaug {

struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<Parameter>;

/// Stochastic gradient descent with Nesterov momentum, look-ahead form:
///
///   v <- mu * v - lr * g
///   w <- w + mu * v - lr * g
///
/// Velocities start at zero and are locked to the shapes of the parameters
/// passed at construction. step() zeroes the gradients it consumed.
class NesterovSgd {
 public:
  NesterovSgd(ParameterList params, double learning_rate, double momentum);

  void step();
  void zero_grad();

  double learning_rate() const { return learning_rate_; }
  double momentum() const { return momentum_; }
  void set_learning_rate(double lr);

  const ParameterList& parameters() const { return params_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  ParameterList params_;
  double learning_rate_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace smartaug
