#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "ufse/ops.hpp"
#include "ufse/tensor.hpp"

using namespace ufse;
using TF = Tensor<float>;
using TD = Tensor<double>;

namespace {

std::vector<float> random_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(TF({2, 3}, std::vector<float>(5)), ConfigError);
  CHECK_THROWS_AS(TF::zeros({2, 0}), ConfigError);
  TF t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  CHECK_THROWS_AS(t.item(), UsageError);
  CHECK(TF::scalar(4.5f).item() == 4.5f);
}

TEST_CASE("copies share data, clone does not") {
  TF a({3}, {1, 2, 3});
  TF b = a;
  TF c = a.clone();
  a.mutable_data()[0] = 9;
  CHECK(b.data()[0] == 9);
  CHECK(c.data()[0] == 1);
}

TEST_CASE("taped outputs are immutable") {
  TF a({2}, {1, 2}, true);
  TF y = mul_scalar(a, 2.0f);
  CHECK_THROWS_AS(y.mutable_data(), UsageError);
  CHECK(y.op_name() != "leaf");
  CHECK(y.detach().is_leaf());
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  std::mt19937_64 rng(1);
  TF x({1, 1, 4, 4}, random_values(16, rng));
  TF y = conv2d(x, TF({1, 1, 1, 1}, {1}), TF({1}, {0}), 1, 0);
  CHECK(y.dims() == Shape{1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d averaging a constant leaves interior pixels unchanged") {
  const float v = 0.37f;
  TF x = TF::full({1, 1, 5, 5}, v);
  TF y = conv2d(x, TF::full({1, 1, 3, 3}, 1.0f / 9), TF({1}, {0}), 1, 1);
  for (int r = 1; r < 4; ++r)
    for (int c = 1; c < 4; ++c) CHECK(y.data()[r * 5 + c] == doctest::Approx(v).epsilon(1e-6));
}

TEST_CASE("conv2d matches the naive direct convolution") {
  struct Geometry {
    int n, cin, h, w, cout, k, stride, pad;
  };
  for (const auto& g : {Geometry{2, 3, 8, 8, 4, 3, 1, 1}, Geometry{1, 2, 9, 9, 3, 3, 2, 1},
                        Geometry{2, 4, 5, 7, 2, 1, 1, 0}, Geometry{1, 3, 7, 7, 5, 5, 1, 2}}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(g.cin * 31 + g.k));
    const auto xv = random_values(static_cast<std::size_t>(g.n * g.cin * g.h * g.w), rng);
    const auto wv = random_values(static_cast<std::size_t>(g.cout * g.cin * g.k * g.k), rng);
    const auto bv = random_values(static_cast<std::size_t>(g.cout), rng);
    TF y = conv2d(TF({g.n, g.cin, g.h, g.w}, xv), TF({g.cout, g.cin, g.k, g.k}, wv), TF({g.cout}, bv), g.stride,
                  g.pad);
    int oh = 0, ow = 0;
    const auto ref = oracle::conv2d(std::vector<double>(xv.begin(), xv.end()), g.n, g.cin, g.h, g.w,
                                    std::vector<double>(wv.begin(), wv.end()), g.cout, g.k,
                                    std::vector<double>(bv.begin(), bv.end()), g.stride, g.pad, oh, ow);
    REQUIRE(y.dims() == Shape{g.n, g.cout, oh, ow});
    double worst = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - y.data()[i]));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("conv2d rejects bad geometry") {
  TF x = TF::zeros({1, 2, 6, 6});
  CHECK_THROWS_AS(conv2d(x, TF::zeros({3, 1, 3, 3}), TF::zeros({3}), 1, 1), ConfigError);
  CHECK_THROWS_AS(conv2d(x, TF::zeros({3, 2, 3, 3}), TF::zeros({2}), 1, 1), ConfigError);
  CHECK_THROWS_AS(conv2d(x, TF::zeros({3, 2, 3, 3}), TF::zeros({3}), 2, 0), ConfigError);
}

TEST_CASE("elementwise definitions") {
  TF r = relu(TF({3}, {-1, 0, 2}));
  CHECK(std::vector<float>(r.data().begin(), r.data().end()) == std::vector<float>{0, 0, 2});

  TF u = upsample_nearest_2x(TF({1, 1, 2, 2}, {1, 2, 3, 4}));
  CHECK(u.dims() == Shape{1, 1, 4, 4});
  const std::vector<float> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(std::vector<float>(u.data().begin(), u.data().end()) == expected);

  CHECK(reduce_var(TF({2}, {0, 2})).item() == 1.0f);
  TF p = maxpool_2x(TF({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 7, 8}));
  CHECK(std::vector<float>(p.data().begin(), p.data().end()) == std::vector<float>{5, 8});
  CHECK_THROWS_AS(add(TF::zeros({2}), TF::zeros({3})), ConfigError);
  CHECK_THROWS_AS(maxpool_2x(TF::zeros({1, 1, 3, 4})), ConfigError);
  CHECK_THROWS_AS(matmul(TF::zeros({2, 3}), TF::zeros({2, 3})), ConfigError);
}

TEST_CASE("backward of a sum is all ones") {
  TF x({2, 3}, {1, -2, 3, 0.5f, 7, 8}, true);
  backward(reduce_sum(x));
  for (float g : x.grad()) CHECK(g == 1.0f);
}

TEST_CASE("backward of sum(x*x) is 2x") {
  TF x({2}, {1, 2}, true);
  backward(reduce_sum(mul(x, x)));
  CHECK(x.grad()[0] == 2.0f);
  CHECK(x.grad()[1] == 4.0f);
}

TEST_CASE("gradients accumulate across backward calls") {
  TD x({2}, {1, 2}, true);
  backward(reduce_sum(x));
  backward(reduce_sum(x));
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  TF x({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul_scalar(x, 2.0f)), UsageError);
}

TEST_CASE("non-finite gradients are reported with the offending node") {
  TD x({2}, {0, 1}, true);
  try {
    backward(reduce_sum(ufse::sqrt(x)));
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("sqrt") != std::string::npos);
  }
}

TEST_CASE("no-grad mode records nothing") {
  TF x({2}, {1, 2}, true);
  TF y;
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    y = mul(x, x);
  }
  CHECK(grad_enabled());
  CHECK(y.is_leaf());
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("forward passes are deterministic") {
  std::mt19937_64 rng(5);
  TF x({2, 3, 8, 8}, random_values(384, rng));
  TF w({4, 3, 3, 3}, random_values(108, rng));
  TF b({4}, random_values(4, rng));
  TF y1 = relu(conv2d(x, w, b, 1, 1));
  TF y2 = relu(conv2d(x, w, b, 1, 1));
  CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}
