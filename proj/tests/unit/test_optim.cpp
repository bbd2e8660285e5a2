#include <doctest.h>

#include <cmath>
#include <limits>

#include "ufse/ops.hpp"
#include "ufse/optim.hpp"

using namespace ufse;
using TD = Tensor<double>;
using TF = Tensor<float>;

TEST_CASE("zero gradient leaves parameters unchanged") {
  std::vector<TD> params{TD({3}, {1, -2, 3}, true)};
  params[0].zero_grad();
  AdamState st;
  adam_step(params, st, 0.1);
  CHECK(params[0].data()[0] == 1.0);
  CHECK(params[0].data()[1] == -2.0);
  CHECK(st.step == 1);
}

TEST_CASE("the first step moves by lr against the gradient sign") {
  std::vector<TD> params{TD({3}, {1, 1, 1}, true)};
  auto g = params[0].mutable_grad();
  g[0] = 0.5;
  g[1] = -3;
  g[2] = 1e-3;
  AdamState st;
  adam_step(params, st, 0.01);
  CHECK(params[0].data()[0] == doctest::Approx(1 - 0.01).epsilon(1e-6));
  CHECK(params[0].data()[1] == doctest::Approx(1 + 0.01).epsilon(1e-6));
  CHECK(params[0].data()[2] == doctest::Approx(1 - 0.01).epsilon(1e-4));
}

TEST_CASE("moments follow the closed-form recurrences") {
  std::vector<TD> params{TD({1}, {0}, true)};
  AdamState st;
  const std::vector<double> grads{1.0, -2.0, 0.5};
  double m = 0, v = 0, x = 0;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    params[0].mutable_grad()[0] = grads[t];
    adam_step(params, st, 0.05);
    m = 0.9 * m + 0.1 * grads[t];
    v = 0.999 * v + 0.001 * grads[t] * grads[t];
    const double mh = m / (1 - std::pow(0.9, t + 1)), vh = v / (1 - std::pow(0.999, t + 1));
    x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(params[0].data()[0] == doctest::Approx(x).epsilon(1e-12));
  }
  CHECK(st.m[0][0] == doctest::Approx(m));
  CHECK(st.v[0][0] == doctest::Approx(v));
}

TEST_CASE("minimizing x squared converges") {
  std::vector<TD> params{TD({1}, {1.0}, true)};
  AdamState st;
  for (int i = 0; i < 500; ++i) {
    params[0].zero_grad();
    backward(reduce_sum(square(params[0])));
    adam_step(params, st, 0.1);
  }
  CHECK(std::abs(params[0].data()[0]) < 1e-2);
}

TEST_CASE("non-finite gradients abort before any update") {
  std::vector<TD> params{TD({2}, {1, 2}, true), TD({1}, {3}, true)};
  params[0].mutable_grad()[0] = 1;
  params[1].mutable_grad()[0] = std::numeric_limits<double>::infinity();
  AdamState st;
  CHECK_THROWS_AS(adam_step(params, st, 0.1), NumericalError);
  CHECK(params[0].data()[0] == 1.0);
  CHECK(st.step == 0);
}

TEST_CASE("Adam wrapper over float parameters") {
  TF p({2}, {1, -1}, true);
  Adam opt({p}, 0.1);
  backward(reduce_sum(square(p)));
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(0.9f));
  CHECK(p.data()[1] == doctest::Approx(-0.9f));
  opt.zero_grad();
  CHECK(p.grad()[0] == 0.0f);
  CHECK(opt.state().step == 1);
}
