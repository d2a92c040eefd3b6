#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "lsidn/optimizer.hpp"
#include "lsidn/tensor.hpp"

using namespace lsidn;

namespace {

// scalar reference recurrence for one Adam coordinate
struct AdamOracle {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double update(double x, double g) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mhat = m / (1.0 - std::pow(b1, t));
    const double vhat = v / (1.0 - std::pow(b2, t));
    return x - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_CASE("two Adam steps match the reference recurrence") {
  std::vector<Parameter> params{
      {"x", Tensor::from_values(1, 2, {1.0, -3.0}, true)}};
  Adam opt(&params, 0.1);
  CHECK(opt.learning_rate() == 0.1);
  CHECK(opt.steps_taken() == 0);

  AdamOracle o0{0.1, 0.9, 0.999, 1e-8};
  AdamOracle o1{0.1, 0.9, 0.999, 1e-8};
  double x0 = 1.0, x1 = -3.0;

  for (int step = 0; step < 2; ++step) {
    backward(sum_squares(params[0].tensor));  // grad = 2x
    x0 = o0.update(x0, 2.0 * x0);
    x1 = o1.update(x1, 2.0 * x1);
    opt.step();
    CHECK(params[0].tensor.values()[0] == doctest::Approx(x0).epsilon(1e-15));
    CHECK(params[0].tensor.values()[1] == doctest::Approx(x1).epsilon(1e-15));
  }
  CHECK(opt.steps_taken() == 2);
}

TEST_CASE("step clears gradients") {
  std::vector<Parameter> params{{"x", Tensor::from_values(1, 1, {2.0}, true)}};
  Adam opt(&params);
  backward(sum_squares(params[0].tensor));
  CHECK(!params[0].tensor.node()->grad.empty());
  opt.step();
  CHECK(params[0].tensor.node()->grad.empty());
}

TEST_CASE("untouched parameters decay moments but hold value") {
  std::vector<Parameter> params{
      {"hot", Tensor::from_values(1, 1, {1.0}, true)},
      {"cold", Tensor::from_values(1, 1, {5.0}, true)}};
  Adam opt(&params, 0.1);

  // only `hot` gets a gradient; `cold` must not move
  backward(sum_squares(params[0].tensor));
  opt.step();
  CHECK(params[1].tensor.values()[0] == 5.0);

  // a later gradient for `cold` sees decayed (still zero) moments: the update
  // matches a fresh recurrence fed zeros first
  backward(sum_squares(params[1].tensor));
  AdamOracle o{0.1, 0.9, 0.999, 1e-8};
  o.update(5.0, 0.0);  // the skipped step
  const double want = o.update(5.0, 10.0);
  opt.step();
  CHECK(params[1].tensor.values()[0] == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("non-finite gradients are rejected before any update") {
  std::vector<Parameter> params{{"x", Tensor::from_values(1, 2, {1.0, 2.0}, true)}};
  Adam opt(&params);
  params[0].tensor.node()->ensure_grad();
  params[0].tensor.node()->grad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(opt.step(), std::runtime_error);
  CHECK(params[0].tensor.values()[0] == 1.0);  // untouched
  CHECK(opt.steps_taken() == 0);
}
