#include <catch2/catch_amalgamated.hpp>

#include "tsfx/ops.hpp"
#include "tsfx/tensor.hpp"

using namespace tsfx;

TEST_CASE("tensor construction checks shape against data length", "[tensor]") {
  REQUIRE_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 0.0)));
  REQUIRE_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
}

TEST_CASE("matmul identity case", "[tensor][matmul]") {
  Tensor i2({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(i2, m);
  REQUIRE(c.data() == m.data());
}

TEST_CASE("matmul analytic 2x2 by 2x1", "[tensor][matmul]") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {0, 1});
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 1});
  REQUIRE(c[0] == 2.0);
  REQUIRE(c[1] == 4.0);
}

TEST_CASE("matmul of zero matrix annihilates", "[tensor][matmul]") {
  Tensor z = Tensor::zeros({2, 2});
  Tensor b({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor c = matmul(z, b);
  for (std::size_t i = 0; i < c.numel(); ++i) REQUIRE(c[i] == 0.0);
}

TEST_CASE("matmul shape error names both shapes", "[tensor][matmul]") {
  Tensor a({2, 3}, std::vector<double>(6, 1.0));
  Tensor b({2, 2}, std::vector<double>(4, 1.0));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("(2,3)") != std::string::npos);
    REQUIRE(msg.find("(2,2)") != std::string::npos);
  }
}

TEST_CASE("batched matmul and rank-3 x rank-2 fast path agree", "[tensor][matmul]") {
  Rng rng(5);
  Tensor a = Tensor::randn({3, 4, 5}, rng);
  Tensor b = Tensor::randn({5, 2}, rng);
  Tensor via_fast = matmul(a, b);
  // reference: explicit per-batch products
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor ai = slice(a, 0, i, 1).reshaped({4, 5});
    Tensor ci = matmul(ai, b);
    for (std::size_t j = 0; j < ci.numel(); ++j)
      REQUIRE(via_fast[i * 8 + j] == Catch::Approx(ci[j]).margin(1e-14));
  }
}

TEST_CASE("matmul_nt matches matmul with transposed rhs", "[tensor][matmul]") {
  Rng rng(11);
  Tensor a = Tensor::randn({4, 6}, rng);
  Tensor b = Tensor::randn({3, 6}, rng);
  Tensor bt = permute(b, {1, 0});
  Tensor c1 = matmul_nt(a, b);
  Tensor c2 = matmul(a, bt);
  REQUIRE(c1.shape() == c2.shape());
  for (std::size_t i = 0; i < c1.numel(); ++i) REQUIRE(c1[i] == Catch::Approx(c2[i]));
}

TEST_CASE("broadcast add follows trailing-axis rules", "[tensor]") {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row({3}, {10, 20, 30});
  Tensor col({2, 1}, {100, 200});
  Tensor a = add(x, row);
  REQUIRE(a.at(1, 2) == 36.0);
  Tensor b = add(x, col);
  REQUIRE(b.at(1, 0) == 204.0);
  Tensor bad({4}, {0, 0, 0, 0});
  REQUIRE_THROWS_AS(add(x, bad), ShapeError);
}

TEST_CASE("permute composes with its inverse", "[tensor]") {
  Rng rng(3);
  Tensor x = Tensor::randn({2, 3, 4}, rng);
  auto axes = std::vector<std::size_t>{2, 0, 1};
  Tensor y = permute(permute(x, axes), inverse_permutation(axes));
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) REQUIRE(y[i] == x[i]);
}

TEST_CASE("slice extracts a contiguous slab", "[tensor]") {
  Tensor x({2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
  Tensor s = slice(x, 1, 1, 2);
  REQUIRE(s.shape() == Shape{2, 2});
  REQUIRE(s[0] == 1.0);
  REQUIRE(s[3] == 6.0);
  REQUIRE_THROWS_AS(slice(x, 1, 3, 2), ShapeError);
}

TEST_CASE("finite inputs stay finite through forward ops", "[tensor]") {
  Rng rng(17);
  Tensor x = Tensor::randn({8, 8}, rng);
  Tensor y = gelu(layer_norm(matmul(x, x), Tensor::ones({8}), Tensor::zeros({8})));
  REQUIRE(y.all_finite());
}
