#include "lsidn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace lsidn {

Adam::Adam(std::vector<Parameter>* params, double lr, double beta1, double beta2,
           double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.resize(params->size());
  v_.resize(params->size());
  for (std::size_t i = 0; i < params->size(); ++i) {
    m_[i].assign((*params)[i].tensor.size(), 0.0);
    v_[i].assign((*params)[i].tensor.size(), 0.0);
  }
}

void Adam::step() {
  auto& params = *params_;
  for (const auto& p : params)
    for (double g : p.tensor.node()->grad)
      if (!std::isfinite(g))
        throw std::runtime_error("optimizer: non-finite gradient in " + p.name);

  ++t_;
  const double corr1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double corr2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Node& node = *params[i].tensor.node();
    const bool has_grad = !node.grad.empty();
    for (std::size_t j = 0; j < node.value.size(); ++j) {
      double g = has_grad ? node.grad[j] : 0.0;
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      double mhat = m_[i][j] / corr1;
      double vhat = v_[i][j] / corr2;
      node.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      if (!std::isfinite(node.value[j]))
        throw std::runtime_error("optimizer: non-finite value in " + params[i].name);
    }
    node.grad.clear();
  }
}

}  // namespace lsidn
