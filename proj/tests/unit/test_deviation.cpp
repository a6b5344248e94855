#include <doctest.h>

#include <cmath>

#include "wnls/deviation.hpp"
#include "wnls/parallel.hpp"

using namespace wnls;

TEST_CASE("pairing enumeration") {
  CHECK(enumerate_pairings({1}).size() == 1);
  const auto p2 = enumerate_pairings({1, -1});
  REQUIRE(p2.size() == 2);
  CHECK(p2[0].pairs.empty());
  CHECK(p2[1].pairs == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(enumerate_pairings({1, 1}).size() == 1);
  CHECK(enumerate_pairings({1, 1, -1}).size() == 3);
  for (const std::vector<int>& s : std::vector<std::vector<int>>{
           {1, -1, 1, -1}, {1, 1, 1, -1, -1}, {1, -1, -1, 1, -1, 1}, {1, 1, 1, 1, -1, -1, -1, -1}})
    CHECK(std::int64_t(enumerate_pairings(s).size()) == pairing_count_formula(s));
  // 3 plus, 3 minus: 1 + 9 + 18 + 6
  CHECK(pairing_count_formula({1, 1, 1, -1, -1, -1}) == 34);
}

TEST_CASE("Isserlis moments") {
  auto single = [](int b, int c) { return MonomialSpec{{b}, {c}}; };
  CHECK(isserlis_moment(single(1, 1), Law::gaussian) == 1.0);
  CHECK(isserlis_moment(single(2, 2), Law::gaussian) == 2.0);
  CHECK(isserlis_moment(single(3, 3), Law::gaussian) == 6.0);
  CHECK(isserlis_moment(single(2, 1), Law::gaussian) == 0.0);
  CHECK(isserlis_moment(single(3, 3), Law::unit_phase) == 1.0);
  CHECK(isserlis_moment({{2, 1}, {2, 1}}, Law::gaussian) == 2.0);
  CHECK_THROWS_AS(isserlis_moment(single(20, 20), Law::gaussian, 32), BudgetExceeded);
}

TEST_CASE("M and the second moment") {
  auto rng = make_rng(1, 0);
  SUBCASE("n = 1 is an isometry") {
    const MultilinearExpression e = random_expression(rng, 1, 5, {1});
    double m = 0;
    for (cplx a : e.a) m += std::norm(a);
    CHECK(compute_M(e) == doctest::Approx(m));
    CHECK(moment_abs(e, 1, Law::gaussian) == doctest::Approx(m).epsilon(1e-12));
  }
  SUBCASE("diagonal n = 2") {
    MultilinearExpression e(2, 3, {1, -1});
    const cplx d[] = {{1, 1}, {-2, 0}, {0, 0.5}};
    double l2 = 0, l1 = 0;
    for (int k = 0; k < 3; ++k) {
      e.at({k, k}) = d[k];
      l2 += std::norm(d[k]);
      l1 += std::abs(d[k]);
    }
    CHECK(compute_M(e) == doctest::Approx(l2 + l1 * l1));
    std::vector<cplx> g{{1, 0}, {0, 2}, {1, 1}};
    CHECK(std::abs(eval_F(e, g) - (d[0] * 1.0 + d[1] * 4.0 + d[2] * 2.0)) < 1e-14);
  }
  SUBCASE("zero") {
    const MultilinearExpression e(3, 4, {1, -1, 1});
    CHECK(compute_M(e) == 0.0);
    CHECK(eval_F(e, {1, 2, 3, 4}) == cplx(0));
  }
}

TEST_CASE("moment domination") {
  auto rng = make_rng(2, 0);
  const std::vector<std::vector<int>> patterns{{1}, {1, -1}, {1, 1}, {1, -1, 1}, {-1, 1, -1}};
  for (const auto& s : patterns)
    for (int d = 1; d <= 3; ++d) {
      const auto e = random_expression(rng, int(s.size()), 3, s, true);
      const DominationResult r = moment_domination(e, d);
      CHECK(r.holds);
      CHECK(r.F_moment <= r.G_moment);
    }
}

TEST_CASE("polynomial moments match the second-moment formula") {
  auto rng = make_rng(3, 0);
  const auto e = random_expression(rng, 2, 3, {1, -1});
  const Polynomial p = to_polynomial(e);
  CHECK(p.size() <= 9);
  const double m2 = moment_abs(e, 1, Law::gaussian);
  CHECK(m2 > 0);
  // E|F|^2 <= M with equality in the Gaussian case up to the pairing weights.
  CHECK(m2 <= compute_M(e) * (1 + 1e-12));
}

TEST_CASE("tails") {
  auto rng = make_rng(4, 0);
  const auto lin = random_expression(rng, 1, 4, {1});
  const TailReport t = tail_check(lin, {1, 2, 3}, 40000, 9);
  // P(|g| >= 3) = e^{-9} for a standard complex Gaussian.
  CHECK(t.points[2].p < 1.2e-2);
  CHECK(t.points[0].p == doctest::Approx(std::exp(-1.0)).epsilon(0.05));

  MultilinearExpression diag(2, 3, {1, -1});
  for (int k = 0; k < 3; ++k) diag.at({k, k}) = 1.0;
  const TailReport td = tail_check(diag, {0.5, 1, 1.5, 2, 2.5}, 20000, 10);
  for (std::size_t i = 1; i < td.points.size(); ++i) CHECK(td.points[i].exceed <= td.points[i - 1].exceed);

  const TailReport a = tail_check(diag, {1, 2}, 5000, 11, 2, 6, 1);
  const TailReport b = tail_check(diag, {1, 2}, 5000, 11, 2, 6, 3);
  CHECK(a.points[0].exceed == b.points[0].exceed);
  CHECK(a.second_moment == b.second_moment);
}

TEST_CASE("measurability") {
  auto low_only = [](const std::vector<cplx>& g) {
    MultilinearExpression e(1, int(g.size()), {1});
    for (std::size_t k = 0; k < g.size(); ++k) e.a[k] = g[0] * g[1];
    return e;
  };
  auto uses_high = [](const std::vector<cplx>& g) {
    MultilinearExpression e(1, int(g.size()), {1});
    for (std::size_t k = 0; k < g.size(); ++k) e.a[k] = g[0] + g.back();
    return e;
  };
  CHECK(measurability_holds(low_only, {0, 1}, 5, 1));
  CHECK_FALSE(measurability_holds(uses_high, {0, 1}, 5, 1));
}

TEST_CASE("kernel operator norm of a diagonal kernel") {
  KernelBins h;
  h.dlambda = 0.5;
  for (int j = 0; j < 4; ++j) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(3, 3);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0;
    m(2, 2) = 0.5;
    h.bins.push_back(m);
    h.lambda.push_back(j);
  }
  // sqrt(4 * 0.5) * 2
  CHECK(kernel_operator_norm(h) == doctest::Approx(2 * std::sqrt(2.0)));
}
