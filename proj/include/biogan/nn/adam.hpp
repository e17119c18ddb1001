#pragma once

#include <vector>

#include "biogan/nn/layers.hpp"

namespace biogan::nn {

struct AdamSettings {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamSettings settings);

  void step();
  long steps() const noexcept { return step_; }

 private:
  std::vector<Parameter*> params_;
  AdamSettings settings_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long step_ = 0;
};

}  // namespace biogan::nn
