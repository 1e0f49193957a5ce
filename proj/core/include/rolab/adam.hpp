#pragma once

#include <vector>

#include "rolab/tensor.hpp"

namespace rolab {

// Adaptive-moment optimizer over a fixed list of parameter tensors.
// Cited defaults: beta1 0.9, beta2 0.999, eps 1e-8.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  // Applies one bias-corrected update. grads must mirror the parameter
  // shapes exactly; throws std::invalid_argument otherwise. The step count
  // increments regardless of gradient magnitude.
  void step(const std::vector<Tensor>& grads);

  long step_count() const { return step_count_; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  long step_count_ = 0;
  double lr_, beta1_, beta2_, eps_;
};

}  // namespace rolab
