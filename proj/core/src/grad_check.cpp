#include "lsidn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsidn {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           std::vector<Parameter>& params, double step, double tol,
                           Rng* rng, std::size_t sample) {
  if (step < 1e-7 || step > 1e-3)
    throw std::invalid_argument("grad_check: step must lie in [1e-7, 1e-3]");

  zero_grad(params);
  Tensor loss = f();
  if (!std::isfinite(loss.scalar()))
    throw std::runtime_error("grad_check: non-finite loss");
  backward(loss);

  std::vector<std::vector<double>> analytic(params.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Node& node = *params[i].tensor.node();
    analytic[i].assign(node.value.size(), 0.0);
    if (!node.grad.empty()) analytic[i] = node.grad;
    total += node.value.size();
  }

  // (param, entry) pairs to probe
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  if (rng == nullptr || total <= sample) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].tensor.size(); ++j) picks.emplace_back(i, j);
  } else {
    for (std::size_t flat : rng->sample_indices(total, sample)) {
      std::size_t i = 0;
      while (flat >= params[i].tensor.size()) flat -= params[i].tensor.size(), ++i;
      picks.emplace_back(i, flat);
    }
  }

  GradCheckReport report;
  NoGradGuard eval_only;
  for (auto [i, j] : picks) {
    std::vector<double>& values = params[i].tensor.mutable_values();
    const double saved = values[j];
    values[j] = saved + step;
    double up = f().scalar();
    values[j] = saved - step;
    double down = f().scalar();
    values[j] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("grad_check: non-finite loss under perturbation of " +
                               params[i].name);

    double numeric = (up - down) / (2.0 * step);
    double a = analytic[i][j];
    double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
    double rel = std::abs(a - numeric) / denom;
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {params[i].name, j, a, numeric, rel};
    }
    ++report.entries_checked;
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace lsidn
