#include "rolab/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rolab {

Adam::Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor* p : params_) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size())
    throw std::invalid_argument("Adam::step: gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!grads[i].same_shape(*params_[i]))
      throw std::invalid_argument("Adam::step: gradient shape mismatch");

  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params_[i]->raw();
    auto& m = m_[i].raw();
    auto& v = v_[i].raw();
    const auto& g = grads[i].raw();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

}  // namespace rolab
