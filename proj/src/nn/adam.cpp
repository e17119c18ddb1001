#include "biogan/nn/adam.hpp"

#include <cmath>

namespace biogan::nn {

Adam::Adam(std::vector<Parameter*> params, AdamSettings settings)
    : params_(std::move(params)), settings_(settings) {
  for (const Parameter* p : params_) {
    first_.emplace_back(p->size(), 0.0);
    second_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++step_;
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double step_size = settings_.learning_rate / correction1;
  const double sqrt_c2 = std::sqrt(correction2);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    auto& m = first_[k];
    auto& v = second_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_c2 + settings_.eps);
    }
  }
}

}  // namespace biogan::nn
