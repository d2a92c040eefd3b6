#pragma once

#include <cstddef>
#include <vector>

#include "lsidn/tensor.hpp"

namespace lsidn {

// Adaptive-moment optimizer with bias correction. Each step validates the
// gradients, applies the update, then clears them. Parameters with untouched
// gradients are treated as zero-gradient (moments decay, values hold).
class Adam {
 public:
  explicit Adam(std::vector<Parameter>* params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  std::size_t steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<Parameter>* params_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace lsidn
