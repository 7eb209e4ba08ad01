#include <catch2/catch_amalgamated.hpp>

#include "support/t_quadrature.hpp"
#include "tsfx/rng.hpp"
#include "tsfx/stats.hpp"

using namespace tsfx;
using namespace tsfx::stats;

TEST_CASE("pearson fixed points", "[stats]") {
  std::vector<double> x{0.4, -1.2, 3.3, 0.0, 2.1};
  std::vector<double> neg(x);
  for (double& v : neg) v = -v;
  REQUIRE(pearson(x, x) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(pearson(x, neg) == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("pearson hand-computed example", "[stats]") {
  REQUIRE(pearson({1, 2, 3}, {1, 2, 4}) == Catch::Approx(0.9819805060619659).epsilon(1e-10));
}

TEST_CASE("pearson refuses constant input", "[stats]") {
  REQUIRE_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), DomainError);
  REQUIRE_THROWS_AS(pearson({1}, {2}), ContractError);
}

TEST_CASE("pearson is invariant under positive affine maps", "[stats][property]") {
  Rng rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(50), b(50);
    for (auto& v : a) v = rng.next_gauss();
    for (auto& v : b) v = rng.next_gauss();
    double base = pearson(a, b);
    double alpha = 0.1 + 3.0 * rng.next_unit();
    double beta = 10.0 * (rng.next_unit() - 0.5);
    std::vector<double> a2(a);
    for (double& v : a2) v = alpha * v + beta;
    REQUIRE(std::abs(pearson(a2, b) - base) < 1e-12);
  }
}

TEST_CASE("student t cdf fixed values", "[stats]") {
  REQUIRE(student_t_cdf(0.0, 3.0) == 0.5);
  REQUIRE(student_t_cdf(0.0, 177.0) == 0.5);
  // Cauchy closed form: F(1) = 1/2 + atan(1)/pi = 0.75
  REQUIRE(student_t_cdf(1.0, 1.0) == Catch::Approx(0.75).epsilon(1e-12));
  // normal limit
  REQUIRE(student_t_cdf(1.96, 1e7) == Catch::Approx(0.975).margin(2e-3));
}

TEST_CASE("welch test on identical samples", "[stats]") {
  std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  WelchResult r = welch_test(a, a, Alternative::Greater);
  REQUIRE(r.t == 0.0);
  REQUIRE(r.p == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("welch test detects gross separation", "[stats]") {
  std::vector<double> b{0.0, 0.001, -0.001, 0.0005, -0.0002};
  std::vector<double> a(b);
  for (double& v : a) v += 1000.0;
  REQUIRE(welch_test(a, b, Alternative::Greater).p < 1e-6);
  REQUIRE(welch_test(b, a, Alternative::Greater).p > 1.0 - 1e-6);
}

TEST_CASE("welch zero-variance conventions", "[stats]") {
  std::vector<double> c{2.0, 2.0, 2.0};
  REQUIRE(welch_test(c, c, Alternative::Greater).p == 1.0);
  std::vector<double> hi{3.0, 3.0, 3.0};
  REQUIRE(welch_test(hi, c, Alternative::Greater).p == 0.0);
  REQUIRE_THROWS_AS(welch_test({1.0}, c, Alternative::Greater), ContractError);
}

TEST_CASE("welch p against the quadrature oracle", "[stats][oracle]") {
  std::vector<double> a{1, 2, 3, 4};
  std::vector<double> b{0, 1, 2, 3};
  WelchResult r = welch_test(a, b, Alternative::Greater);
  double oracle = t_quadrature::upper_tail(r.t, r.df);
  REQUIRE(r.p == Catch::Approx(oracle).margin(1e-6));

  // a second, asymmetric configuration
  std::vector<double> c{0.3, -0.2, 0.9, 1.4, 0.05, 0.61};
  std::vector<double> d{0.0, 0.4, -0.8};
  WelchResult r2 = welch_test(c, d, Alternative::Greater);
  REQUIRE(r2.p == Catch::Approx(t_quadrature::upper_tail(r2.t, r2.df)).margin(1e-6));
}

TEST_CASE("one-sided p values of swapped samples sum to one", "[stats][property]") {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> a(6 + trial % 5), b(4 + trial % 7);
    for (auto& v : a) v = rng.next_gauss();
    for (auto& v : b) v = 0.3 + rng.next_gauss();
    double pab = welch_test(a, b, Alternative::Greater).p;
    double pba = welch_test(b, a, Alternative::Greater).p;
    REQUIRE(pab + pba == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("cdf and quadrature agree across the range", "[stats][oracle]") {
  for (double df : {1.0, 2.0, 5.0, 17.0, 90.0}) {
    for (double t : {-4.0, -1.3, -0.2, 0.0, 0.7, 2.9, 6.0}) {
      double lib = 1.0 - student_t_cdf(t, df);
      double oracle = t_quadrature::upper_tail(t, df);
      REQUIRE(lib == Catch::Approx(oracle).margin(1e-8));
    }
  }
}
