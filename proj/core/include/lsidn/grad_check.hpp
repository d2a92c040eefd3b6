#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lsidn/rng.hpp"
#include "lsidn/tensor.hpp"

namespace lsidn {

struct GradCheckEntry {
  std::string param;
  std::size_t flat_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  bool passed = false;
  GradCheckEntry worst;
};

// Compares reverse-mode gradients of the scalar `f` against central finite
// differences. With rng null every parameter entry is checked; otherwise a
// random sample of at least `sample` entries (capped by the total count).
// Relative error uses max(1, |analytic|, |numeric|) as denominator.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           std::vector<Parameter>& params, double step = 1e-5,
                           double tol = 1e-4, Rng* rng = nullptr,
                           std::size_t sample = 100);

}  // namespace lsidn
