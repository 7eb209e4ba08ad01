#include <catch2/catch_amalgamated.hpp>

#include "support/gradcheck.hpp"
#include "tsfx/autograd.hpp"
#include "tsfx/ops.hpp"

using namespace tsfx;

TEST_CASE("d(x^2)/dx at x=3 is 6", "[autograd]") {
  Tensor x = Tensor::scalar(3.0, true);
  Tape tape;
  GradientMap grads;
  {
    Tape::Scope scope(&tape);
    Tensor loss = mul(x, x);
    grads = backward(loss, tape);
  }
  REQUIRE(grads.at(x.id()).value() == Catch::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("unreachable leaves get zero gradients", "[autograd]") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = Tensor::scalar(4.0, true);
  Tape tape;
  GradientMap grads;
  {
    Tape::Scope scope(&tape);
    Tensor used = mul(x, x);
    Tensor unused = mul(y, y);  // recorded but not part of the loss
    grads = backward(used, tape);
  }
  REQUIRE(grads.at(x.id()).value() == Catch::Approx(4.0));
  REQUIRE(grads.at(y.id()).value() == 0.0);
}

TEST_CASE("non-scalar loss is a contract error", "[autograd]") {
  Tensor x = Tensor::ones({3}, true);
  Tape tape;
  Tape::Scope scope(&tape);
  Tensor y = add(x, x);
  REQUIRE_THROWS_AS(backward(y, tape), ContractError);
}

TEST_CASE("sum(matmul(A,B)) matches finite differences", "[autograd][gradcheck]") {
  Rng rng(1);
  Tensor a = Tensor::randn({3, 4}, rng);
  Tensor b = Tensor::randn({4, 2}, rng);
  double err = gradcheck::max_rel_error(
      [](const std::vector<Tensor>& in) { return sum(matmul(in[0], in[1])); }, {a, b});
  REQUIRE(err < 1e-4);
}

TEST_CASE("every differentiable op passes the finite-difference oracle", "[autograd][gradcheck]") {
  // 20+ seeds per op; error relative to max(1, |g|).
  auto run = [](std::uint64_t seed, double& worst) {
    Rng rng(seed);
    auto W = [&](Shape s) { return Tensor::randn(std::move(s), rng); };

    using F = std::function<Tensor(const std::vector<Tensor>&)>;
    auto check = [&](F f, std::vector<Tensor> in) {
      worst = std::max(worst, gradcheck::max_rel_error(f, std::move(in)));
    };

    check(gradcheck::project([](const std::vector<Tensor>& i) { return add(i[0], i[1]); },
                             W({2, 3, 4})),
          {W({2, 3, 4}), W({3, 4})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return sub(i[0], i[1]); },
                             W({4, 3})),
          {W({4, 3}), W({1, 3})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return mul(i[0], i[1]); },
                             W({2, 5})),
          {W({2, 5}), W({5})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return scale(i[0], -2.5); },
                             W({6})),
          {W({6})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return matmul(i[0], i[1]); },
                             W({3, 2})),
          {W({3, 4}), W({4, 2})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return matmul(i[0], i[1]); },
                             W({2, 3, 2})),
          {W({2, 3, 4}), W({2, 4, 2})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return matmul(i[0], i[1]); },
                             W({2, 3, 2})),
          {W({2, 3, 4}), W({4, 2})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return matmul_nt(i[0], i[1]); },
                             W({2, 3, 5})),
          {W({2, 3, 4}), W({2, 5, 4})});
    check(gradcheck::project(
              [](const std::vector<Tensor>& i) { return permute(i[0], {1, 2, 0}); }, W({3, 4, 2})),
          {W({2, 3, 4})});
    check(gradcheck::project(
              [](const std::vector<Tensor>& i) { return reshape(i[0], {4, 6}); }, W({4, 6})),
          {W({2, 3, 4})});
    check(gradcheck::project(
              [](const std::vector<Tensor>& i) { return slice(i[0], 1, 1, 2); }, W({3, 2, 4})),
          {W({3, 5, 4})});
    check([](const std::vector<Tensor>& i) { return sum(i[0]); }, {W({3, 3})});
    check([](const std::vector<Tensor>& i) { return mean(i[0]); }, {W({7})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return mean_axis0(i[0]); },
                             W({4, 3})),
          {W({5, 4, 3})});
    check(gradcheck::project([](const std::vector<Tensor>& i) { return gelu(i[0]); }, W({3, 4})),
          {W({3, 4})});

    Tensor bias({5}, {0, 0, kMaskedBias, 0, 0});
    check(gradcheck::project(
              [bias](const std::vector<Tensor>& i) { return masked_softmax(i[0], bias); },
              W({4, 5})),
          {W({4, 5})});

    check(gradcheck::project(
              [](const std::vector<Tensor>& i) { return layer_norm(i[0], i[1], i[2], 1e-5); },
              W({6, 5})),
          {W({6, 5}), W({5}), W({5})});

    check(gradcheck::project(
              [seed](const std::vector<Tensor>& i) { return dropout(i[0], 0.4, true, seed); },
              W({4, 4})),
          {W({4, 4})});
  };

  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 21; ++seed) run(seed, worst);
  INFO("worst relative error " << worst);
  REQUIRE(worst < 1e-4);
}

TEST_CASE("backward through a composite expression", "[autograd][gradcheck]") {
  Rng rng(77);
  Tensor x = Tensor::randn({4, 6}, rng);
  Tensor w = Tensor::randn({6, 3}, rng);
  Tensor g = Tensor::randn({3}, rng);
  double err = gradcheck::max_rel_error(
      [](const std::vector<Tensor>& in) {
        Tensor h = gelu(matmul(in[0], in[1]));
        Tensor n = layer_norm(h, in[2], Tensor::zeros({3}), 1e-5);
        return mse_loss(n, Tensor::ones(n.shape()));
      },
      {x, w, g});
  REQUIRE(err < 1e-4);
}
