#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "wnls/counting.hpp"
#include "wnls/parallel.hpp"

using namespace wnls;

namespace {

int radius_of(Wavenumber c) { return int(std::ceil(std::sqrt(double(c.norm2())))); }

// Every tuple of lattice points in generous discs, filtered by in_set alone.
std::int64_t brute_force(const CountingInstance& in, SetKind kind, bool plus) {
  std::vector<std::vector<Wavenumber>> boxes;
  int reach = radius_of(in.d) + radius_of(in.d_plus) + in.N0 + 2;
  for (int j = 0; j < in.n; ++j) {
    const Wavenumber c = kind == SetKind::S3 ? Wavenumber{} : in.center[j];
    boxes.push_back(disc_points(c, in.N[j]));
    reach += in.N[j] + radius_of(c);
  }
  const auto ks = disc_points({}, reach);
  const auto kps = kind == SetKind::S2 ? disc_points({}, in.N0) : std::vector<Wavenumber>{{}};
  std::int64_t count = 0;
  LatticeTuple t;
  t.kj.resize(in.n);
  std::vector<std::size_t> idx(in.n, 0);
  while (true) {
    for (int j = 0; j < in.n; ++j) t.kj[j] = boxes[j][idx[j]];
    for (auto kp : kps) {
      t.k_prime = kp;
      for (auto k : ks) {
        t.k = k;
        if (in_set(in, kind, plus, t)) ++count;
      }
    }
    int j = 0;
    while (j < in.n && ++idx[j] == boxes[j].size()) idx[j++] = 0;
    if (j == in.n) break;
  }
  return count;
}

}  // namespace

TEST_CASE("Gaussian integer arithmetic") {
  const GaussInt a{3, 4}, b{1, -2};
  GaussInt q;
  CHECK(gauss_divides(b, a * b, &q));
  CHECK(q == a);
  CHECK_FALSE(gauss_divides({2, 0}, {3, 0}));
  CHECK((GaussInt{0, 1} * GaussInt{0, 1}) == GaussInt{-1, 0});
}

TEST_CASE("divisor counts") {
  CHECK(divisor_count_box({6, 0}, 0.0, 10, 0.0, 10, Ring::integers) == 8);
  CHECK(divisor_count_box({1, 0}, 0.0, 50, 0.0, 50, Ring::gaussian) == 4);
  CHECK(divisor_count_box({5, 0}, 1.0, 0, 1.0, 0, Ring::integers) == 0);
  CHECK(divisor_count_box({5, 0}, 1.0, 0, 5.0, 0, Ring::integers) == 1);
  CHECK_THROWS(divisor_count_box({0, 0}, 0.0, 1, 0.0, 1, Ring::integers));

  // 5 = (2+i)(2-i): divisors are the units times {1, 2+i, 2-i, 5}.
  CHECK(divisors({5, 0}, Ring::gaussian).size() == 16);
  CHECK(divisors({12, 0}, Ring::integers).size() == 12);

  auto rng = make_rng(3, 0);
  std::uniform_int_distribution<int> u(-300, 300);
  for (int i = 0; i < 200; ++i) {
    GaussInt m{u(rng), u(rng)};
    if (m.norm() == 0) continue;
    for (Ring ring : {Ring::integers, Ring::gaussian}) {
      if (ring == Ring::integers) m.im = 0;
      if (m.norm() == 0) continue;
      auto a = divisors(m, ring), b = divisors_naive(m, ring);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
}

TEST_CASE("discs and pairings") {
  CHECK(disc_points({0, 0}, 1).size() == 5);
  CHECK(disc_points({3, -2}, 2).size() == 13);
  CHECK(in_disc({1, 1}, {0, 0}, std::sqrt(2.0)));
  CHECK(has_pairing({{1, 2}, {1, 2}}, {1, -1}));
  CHECK_FALSE(has_pairing({{1, 2}, {1, 2}}, {1, 1}));
  CHECK_FALSE(has_pairing({{1, 2}, {2, 1}}, {1, -1}));
}

TEST_CASE("triple counts") {
  auto rng = make_rng(4, 0);
  for (int i = 0; i < 40; ++i) {
    TripleInstance in = random_triple(rng, 4, 2, i % 2 == 0);
    const auto c0 = count_S(in, 0), c1 = count_S(in, 1), c2 = count_S(in, 2);
    CHECK(c0 == c1);
    CHECK(c0 == c2);
    CHECK(c0 <= count_S(in, 0, false));

    // |x|^2 = x1 + x2 mod 2, so the quadratic sum has the parity of |d|^2.
    TripleInstance odd = in;
    if ((odd.d.norm2() - odd.alpha) % 2 == 0) odd.alpha += 1;
    CHECK(count_S(odd, 0, false) == 0);
  }
}

TEST_CASE("S1, S2, S3 counts against brute force") {
  auto rng = make_rng(5, 0);
  for (SetKind kind : {SetKind::S1, SetKind::S2, SetKind::S3})
    for (bool plus : {false, true}) {
      std::int64_t total = 0;
      for (int i = 0; i < 6; ++i) {
        const CountingInstance in = random_instance(rng, kind, plus, 2, 2, 0.1);
        CAPTURE(set_kind_name(kind));
        CAPTURE(plus);
        const auto c = count_S123(in, kind, plus);
        CHECK(c == brute_force(in, kind, plus));
        CountOptions full;
        full.eliminate_quadratic = false;
        CHECK(count_S123(in, kind, plus, full) == c);
        CountOptions rev;
        rev.reverse_order = true;
        CHECK(count_S123(in, kind, plus, rev) == c);
        std::int64_t visited = 0;
        enumerate_S123(in, kind, plus, {}, [&](const LatticeTuple& t) {
          ++visited;
          CHECK(in_set(in, kind, plus, t));
          for (std::size_t a = 0; a < t.kj.size(); ++a)
            for (std::size_t b = a + 1; b < t.kj.size(); ++b)
              if (t.kj[a] == t.kj[b]) CHECK(in.signs[a] == in.signs[b]);
        });
        CHECK(visited == c);
        total += c;
      }
      CHECK(total > 0);
    }
}

TEST_CASE("a zero block radius forces a pairing") {
  auto rng = make_rng(6, 0);
  int checked = 0;
  for (int i = 0; i < 50 && checked < 5; ++i) {
    CountingInstance in = random_instance(rng, SetKind::S1, false, 2, 4, 0.1);
    if (in.p == 0) continue;
    in.R.assign(in.p, 0.0);
    CHECK(count_S123(in, SetKind::S1, false) == 0);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("weighted sums") {
  auto rng = make_rng(7, 0);
  for (int i = 0; i < 5; ++i) {
    const CountingInstance in = random_instance(rng, SetKind::S1, false, 2, 2, 0.1);
    // <Sigma - alpha>^{-a0} keeps only Sigma = alpha as a0 grows.
    const double big = weighted_sum_E(in, SetKind::S1, false, 200.0);
    CHECK(big == doctest::Approx(double(count_S123(in, SetKind::S1, false))).epsilon(1e-12));
    CHECK(weighted_sum_E(in, SetKind::S1, false, 1.5) >= big);
  }
}

TEST_CASE("budget") {
  auto rng = make_rng(8, 0);
  const CountingInstance in = random_instance(rng, SetKind::S2, false, 3, 16, 0.1);
  CountOptions tiny;
  tiny.budget = 10;
  CHECK_THROWS_AS(count_S123(in, SetKind::S2, false, tiny), BudgetExceeded);
  CHECK(count_cost(in, SetKind::S2, false) > 10);
}

TEST_CASE("instance validation") {
  CountingInstance in;
  in.n = 2;
  in.signs = {1, 1};
  in.N = {4, 4};
  in.center = {{}, {}};
  in.p = 1;
  in.R = {1};
  in.A = {0, 1};
  CHECK_THROWS(in.validate(SetKind::S1, 0.1));  // block signs must be opposite
  in.signs = {1, -1};
  CHECK_NOTHROW(in.validate(SetKind::S1, 0.1));
  in.R = {4};
  CHECK_THROWS(in.validate(SetKind::S1, 0.1));
}

TEST_CASE("shape check") {
  std::vector<CountingRow> rows;
  for (int s : {2, 4, 8})
    for (int j = 1; j <= 3; ++j) rows.push_back({"S", s, j, double(j), double(s), double(j) / s});
  const ShapeCheck c = check_shape("S", rows);
  CHECK(c.instances == 9);
  CHECK(c.pass);
  CHECK(c.fitted_constant == doctest::Approx(1.5));
}
