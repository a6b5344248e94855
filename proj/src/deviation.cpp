#include "wnls/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "wnls/averaging.hpp"
#include "wnls/parallel.hpp"
#include "wnls/wick.hpp"

namespace wnls {

MultilinearExpression::MultilinearExpression(int n_, int size_, std::vector<int> signs_)
    : n(n_), size(size_), signs(std::move(signs_)) {
  validate();
  std::size_t total = 1;
  for (int j = 0; j < n; ++j) total *= std::size_t(size);
  a.assign(total, cplx(0));
}

std::size_t MultilinearExpression::flat(const std::vector<int>& k) const {
  std::size_t idx = 0;
  for (int j = 0; j < n; ++j) idx = idx * size + std::size_t(k[j]);
  return idx;
}

MultilinearExpression MultilinearExpression::absolute() const {
  MultilinearExpression out = *this;
  for (auto& c : out.a) c = std::abs(c);
  return out;
}

void MultilinearExpression::validate() const {
  if (n < 1 || size < 1) throw std::invalid_argument("multilinear expression: n and #E must be positive");
  if (int(signs.size()) != n) throw std::invalid_argument("multilinear expression: need n signs");
  for (int s : signs)
    if (s != 1 && s != -1) throw std::invalid_argument("multilinear expression: signs are +1 or -1");
}

namespace {

// Calls f(k) for every k in {0..size-1}^n, last index fastest.
template <class Fn>
void for_each_tuple(int n, int size, Fn&& f) {
  std::vector<int> k(n, 0);
  if (n == 0) {
    f(k);
    return;
  }
  while (true) {
    f(k);
    int j = n - 1;
    while (j >= 0 && ++k[j] == size) k[j--] = 0;
    if (j < 0) return;
  }
}

void match(const std::vector<int>& signs, std::vector<bool>& used, int from, PairingStructure& cur,
           std::vector<PairingStructure>& out) {
  const int n = int(signs.size());
  int i = from;
  while (i < n && used[i]) ++i;
  if (i >= n) {
    out.push_back(cur);
    return;
  }
  used[i] = true;
  match(signs, used, i + 1, cur, out);  // i stays unmatched
  for (int j = i + 1; j < n; ++j) {
    if (used[j] || signs[j] != -signs[i]) continue;
    used[j] = true;
    cur.pairs.emplace_back(i, j);
    match(signs, used, i + 1, cur, out);
    cur.pairs.pop_back();
    used[j] = false;
  }
  used[i] = false;
}

double law_factor(int b, int c, Law law) {
  if (b != c) return 0;
  if (law == Law::unit_phase) return 1;
  double f = 1;
  for (int i = 2; i <= b; ++i) f *= i;
  return f;
}

}  // namespace

std::vector<PairingStructure> enumerate_pairings(const std::vector<int>& signs) {
  if (signs.size() > 9) throw BudgetExceeded("enumerate_pairings: n > 9");
  std::vector<PairingStructure> out;
  std::vector<bool> used(signs.size(), false);
  PairingStructure cur;
  match(signs, used, 0, cur, out);
  // empty matching first, then by number of pairs
  std::stable_sort(out.begin(), out.end(),
                   [](const PairingStructure& x, const PairingStructure& y) { return x.pairs.size() < y.pairs.size(); });
  return out;
}

std::int64_t pairing_count_formula(const std::vector<int>& signs) {
  const int P = int(std::count(signs.begin(), signs.end(), 1));
  const int Q = int(signs.size()) - P;
  std::int64_t total = 0;
  for (int k = 0; k <= std::min(P, Q); ++k) {
    std::int64_t t = binomial(P, k) * binomial(Q, k) * factorial(k);
    total += t;
  }
  return total;
}

cplx eval_F(const MultilinearExpression& e, const std::vector<cplx>& g) {
  std::vector<cplx> gp(g.begin(), g.end()), gm(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) gm[i] = std::conj(g[i]);
  cplx sum = 0;
  std::size_t idx = 0;
  for_each_tuple(e.n, e.size, [&](const std::vector<int>& k) {
    const cplx c = e.a[idx++];
    if (c == cplx(0)) return;
    cplx prod = c;
    for (int j = 0; j < e.n; ++j) prod *= e.signs[j] > 0 ? gp[k[j]] : gm[k[j]];
    sum += prod;
  });
  return sum;
}

double compute_M(const MultilinearExpression& e) {
  double M = 0;
  for (const auto& ps : enumerate_pairings(e.signs)) {
    std::vector<bool> paired(e.n, false);
    for (auto [i, j] : ps.pairs) paired[i] = paired[j] = true;
    std::vector<int> free;
    for (int j = 0; j < e.n; ++j)
      if (!paired[j]) free.push_back(j);
    const int p = int(ps.pairs.size());
    std::vector<int> k(e.n);
    for_each_tuple(int(free.size()), e.size, [&](const std::vector<int>& fv) {
      for (std::size_t m = 0; m < free.size(); ++m) k[free[m]] = fv[m];
      double inner = 0;
      for_each_tuple(p, e.size, [&](const std::vector<int>& pv) {
        for (int s = 0; s < p; ++s) k[ps.pairs[s].first] = k[ps.pairs[s].second] = pv[s];
        inner += std::abs(e.at(k));
      });
      M += inner * inner;
    });
  }
  return M;
}

double isserlis_moment(const MonomialSpec& m, Law law, int max_degree) {
  if (m.beta.size() != m.gamma.size()) throw std::invalid_argument("isserlis_moment: beta and gamma differ in length");
  int deg = 0;
  for (std::size_t i = 0; i < m.beta.size(); ++i) {
    if (m.beta[i] < 0 || m.gamma[i] < 0) throw std::invalid_argument("isserlis_moment: negative exponent");
    deg += m.beta[i] + m.gamma[i];
  }
  if (deg > max_degree) throw BudgetExceeded("isserlis_moment: degree " + std::to_string(deg) + " above budget");
  double v = 1;
  for (std::size_t i = 0; i < m.beta.size(); ++i) v *= law_factor(m.beta[i], m.gamma[i], law);
  return v;
}

Polynomial to_polynomial(const MultilinearExpression& e) {
  Polynomial p;
  std::size_t idx = 0;
  for_each_tuple(e.n, e.size, [&](const std::vector<int>& k) {
    const cplx c = e.a[idx++];
    if (c == cplx(0)) return;
    Exponent x(2 * e.size, 0);
    for (int j = 0; j < e.n; ++j) ++x[(e.signs[j] > 0 ? 0 : e.size) + k[j]];
    p[x] += c;
  });
  return p;
}

Polynomial poly_multiply(const Polynomial& p, const Polynomial& q) {
  Polynomial out;
  for (const auto& [xp, cp] : p)
    for (const auto& [xq, cq] : q) {
      Exponent x(xp.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::uint8_t(xp[i] + xq[i]);
      out[x] += cp * cq;
    }
  return out;
}

double moment_abs(const MultilinearExpression& e, int d, Law law, int max_degree) {
  if (d < 1) throw std::invalid_argument("moment_abs: d >= 1");
  if (2 * e.n * d > max_degree)
    throw BudgetExceeded("moment_abs: degree " + std::to_string(2 * e.n * d) + " above budget");
  const Polynomial F = to_polynomial(e);
  Polynomial P = F;
  for (int i = 1; i < d; ++i) P = poly_multiply(P, F);
  // E[P conj P]: monomials pair up only when their charges beta - gamma agree.
  const int s = e.size;
  std::map<std::vector<int>, std::vector<const std::pair<const Exponent, cplx>*>> groups;
  for (const auto& term : P) {
    std::vector<int> q(s);
    for (int k = 0; k < s; ++k) q[k] = int(term.first[k]) - int(term.first[s + k]);
    groups[q].push_back(&term);
  }
  cplx total = 0;
  for (const auto& [q, terms] : groups)
    for (const auto* m1 : terms)
      for (const auto* m2 : terms) {
        double w = 1;
        for (int k = 0; k < s && w != 0; ++k)
          w *= law_factor(m1->first[k] + m2->first[s + k], m1->first[s + k] + m2->first[k], law);
        total += m1->second * std::conj(m2->second) * w;
      }
  return total.real();
}

DominationResult moment_domination(const MultilinearExpression& e, int d) {
  DominationResult r;
  r.d = d;
  r.F_moment = moment_abs(e, d, Law::unit_phase);
  r.G_moment = moment_abs(e.absolute(), d, Law::gaussian);
  r.holds = r.F_moment <= r.G_moment * (1 + 1e-12) + 1e-12;
  return r;
}

TailReport tail_check(const MultilinearExpression& e, const std::vector<double>& B, std::int64_t trials,
                      std::uint64_t seed, double fit_lo, double fit_hi, int workers) {
  TailReport rep;
  rep.M = compute_M(e);
  rep.trials = trials;
  const double root = std::sqrt(rep.M);
  const std::int64_t chunk = 4096;
  const std::size_t nchunks = std::size_t((trials + chunk - 1) / chunk);
  std::vector<std::vector<std::int64_t>> exceed(nchunks, std::vector<std::int64_t>(B.size(), 0));
  std::vector<double> s1(nchunks, 0), s2(nchunks, 0);
  parallel_for(
      nchunks,
      [&](std::size_t c) {
        std::vector<cplx> g(e.size);
        const std::int64_t lo = std::int64_t(c) * chunk, hi = std::min(trials, lo + chunk);
        for (std::int64_t t = lo; t < hi; ++t) {
          auto rng = make_rng(seed, std::uint64_t(t));
          for (auto& x : g) x = complex_gaussian(rng);
          const double v = std::norm(eval_F(e, g));
          s1[c] += v;
          s2[c] += v * v;
          const double mod = std::sqrt(v);
          for (std::size_t b = 0; b < B.size(); ++b)
            if (mod >= B[b] * root) ++exceed[c][b];
        }
      },
      workers);
  double m1 = 0, m2 = 0;
  for (std::size_t c = 0; c < nchunks; ++c) m1 += s1[c], m2 += s2[c];
  m1 /= double(trials);
  m2 /= double(trials);
  rep.second_moment = m1;
  rep.second_moment_se = std::sqrt(std::max(0.0, m2 - m1 * m1) / double(trials));
  std::vector<double> xs, ys;
  for (std::size_t b = 0; b < B.size(); ++b) {
    TailPoint pt;
    pt.B = B[b];
    for (std::size_t c = 0; c < nchunks; ++c) pt.exceed += exceed[c][b];
    pt.p = double(pt.exceed) / double(trials);
    rep.points.push_back(pt);
    if (pt.B >= fit_lo - 1e-12 && pt.B <= fit_hi + 1e-12 && pt.p > 0 && pt.p < 1) {
      xs.push_back(std::log(pt.B));
      ys.push_back(std::log(-std::log(pt.p)));
    }
  }
  rep.fit_points = int(xs.size());
  rep.slope = xs.size() >= 2 ? ols_slope(xs, ys) : 0;
  return rep;
}

MultilinearExpression random_expression(std::mt19937_64& rng, int n, int size, const std::vector<int>& signs,
                                        bool integer) {
  MultilinearExpression e(n, size, signs);
  std::uniform_int_distribution<int> small(-3, 3);
  for (auto& c : e.a) c = integer ? cplx(small(rng), small(rng)) : complex_gaussian(rng);
  return e;
}

bool measurability_holds(const CoefficientBuilder& build, const std::vector<int>& low, int size, std::uint64_t seed,
                         int redraws) {
  auto rng = make_rng(seed, 0);
  std::vector<cplx> g(size);
  for (auto& x : g) x = complex_gaussian(rng);
  const MultilinearExpression ref = build(g);
  std::vector<bool> is_low(size, false);
  for (int k : low) is_low.at(k) = true;
  for (int r = 1; r <= redraws; ++r) {
    auto rr = make_rng(seed, std::uint64_t(r));
    std::vector<cplx> h = g;
    for (int k = 0; k < size; ++k)
      if (!is_low[k]) h[k] = complex_gaussian(rr);
    const MultilinearExpression e = build(h);
    if (e.a.size() != ref.a.size() || std::memcmp(e.a.data(), ref.a.data(), ref.a.size() * sizeof(cplx)) != 0)
      return false;
  }
  return true;
}

double kernel_operator_norm(const KernelBins& h) {
  if (h.bins.empty()) return 0;
  const auto cols = h.bins.front().cols();
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(cols, cols);
  for (const auto& m : h.bins) G += h.dlambda * m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double aux_norm(const BilinearCoefficient& a, double delta) {
  const int L1 = int(a.lambda1.size()), L2 = int(a.lambda2.size());
  const double w6 = std::pow(delta, 6);
  auto diff = [](cplx lo, cplx hi, double h) { return (hi - lo) / h; };
  double total = 0;
  for (int k1 = 0; k1 < a.rows1; ++k1)
    for (int k2 = 0; k2 < a.rows2; ++k2)
      for (int l1 = 0; l1 < L1; ++l1)
        for (int l2 = 0; l2 < L2; ++l2) {
          const cplx v = a.at(k1, k2, l1, l2);
          cplx d1 = 0, d2 = 0;
          if (L1 > 1)
            d1 = l1 + 1 < L1 ? diff(v, a.at(k1, k2, l1 + 1, l2), a.dlambda1) : diff(a.at(k1, k2, l1 - 1, l2), v, a.dlambda1);
          if (L2 > 1)
            d2 = l2 + 1 < L2 ? diff(v, a.at(k1, k2, l1, l2 + 1), a.dlambda2) : diff(a.at(k1, k2, l1, l2 - 1), v, a.dlambda2);
          const double br = std::max(std::sqrt(1 + a.lambda1[l1] * a.lambda1[l1]),
                                      std::sqrt(1 + a.lambda2[l2] * a.lambda2[l2]));
          total += std::pow(br, w6) * (std::norm(v) + std::norm(d1) + std::norm(d2)) * a.dlambda1 * a.dlambda2;
        }
  return std::sqrt(total);
}

NoPairingSample no_pairing_check(const BilinearCoefficient& a, const KernelBins& h1, const KernelBins& h2,
                                 std::array<int, 2> signs, double delta, int draws, std::uint64_t seed) {
  const int L1 = int(h1.bins.size()), L2 = int(h2.bins.size());
  if (L1 != int(a.lambda1.size()) || L2 != int(a.lambda2.size()))
    throw std::invalid_argument("no_pairing_check: lambda grids differ");
  const int c1 = int(h1.bins.front().cols()), c2 = int(h2.bins.front().cols());
  const bool pair_possible = signs[0] == -signs[1];
  if (pair_possible && c1 != c2) throw std::invalid_argument("no_pairing_check: pairing needs a shared k* set");
  // T(k*) = sum a h1(k1,k*,l1) h2(k2,k*,l2): the k1* = k2* terms.
  std::vector<cplx> T(c1, 0);
  if (pair_possible) {
    for (int s = 0; s < c1; ++s) {
      cplx t = 0;
      for (int l1 = 0; l1 < L1; ++l1)
        for (int l2 = 0; l2 < L2; ++l2)
          for (int k1 = 0; k1 < a.rows1; ++k1) {
            const cplx x1 = signs[0] > 0 ? h1.bins[l1](k1, s) : std::conj(h1.bins[l1](k1, s));
            for (int k2 = 0; k2 < a.rows2; ++k2) {
              const cplx x2 = signs[1] > 0 ? h2.bins[l2](k2, s) : std::conj(h2.bins[l2](k2, s));
              t += a.at(k1, k2, l1, l2) * x1 * x2;
            }
          }
      T[s] = t * h1.dlambda * h2.dlambda;
    }
  }
  const double denom = kernel_operator_norm(h1) * kernel_operator_norm(h2) * aux_norm(a, delta);
  NoPairingSample out;
  for (int dr = 0; dr < draws; ++dr) {
    auto rng = make_rng(seed, std::uint64_t(dr));
    std::vector<cplx> g(std::max(c1, c2));
    for (auto& x : g) x = complex_gaussian(rng);
    auto field = [&](const KernelBins& h, int sign) {
      std::vector<cplx> u(std::size_t(h.bins.front().rows()) * h.bins.size());
      for (std::size_t l = 0; l < h.bins.size(); ++l)
        for (int k = 0; k < h.bins[l].rows(); ++k) {
          cplx s = 0;
          for (int c = 0; c < h.bins[l].cols(); ++c) {
            const cplx x = h.bins[l](k, c) * g[c];
            s += sign > 0 ? x : std::conj(x);
          }
          u[k * h.bins.size() + l] = s;
        }
      return u;
    };
    const auto u1 = field(h1, signs[0]), u2 = field(h2, signs[1]);
    cplx M = 0;
    for (int k1 = 0; k1 < a.rows1; ++k1)
      for (int k2 = 0; k2 < a.rows2; ++k2)
        for (int l1 = 0; l1 < L1; ++l1)
          for (int l2 = 0; l2 < L2; ++l2) M += a.at(k1, k2, l1, l2) * u1[k1 * L1 + l1] * u2[k2 * L2 + l2];
    M *= h1.dlambda * h2.dlambda;
    if (pair_possible)
      for (int s = 0; s < c1; ++s) M -= std::norm(g[s]) * T[s];
    const double r = denom > 0 ? std::abs(M) / denom : 0;
    out.ratio.push_back(r);
    out.max_ratio = std::max(out.max_ratio, r);
    out.mean_ratio += r / draws;
  }
  return out;
}

bool DeviationSuiteReport::pass() const {
  if (domination_checked == 0 || domination_failed) return false;
  for (const auto& [n, t] : tails)
    if (t.fit_points < 3 || t.slope < slope_bound.at(n)) return false;
  return std::abs(mc_z) <= 3.0;
}

DeviationSuiteReport run_deviation_suite(const DeviationSuiteOptions& opt) {
  DeviationSuiteReport rep;
  // Exact moment domination over random small expressions.
  struct Case {
    int n, size, d;
    std::uint64_t stream;
  };
  std::vector<Case> cases;
  for (int n = 1; n <= 3; ++n)
    for (int c = 0; c < opt.domination_cases; ++c)
      for (int d = 1; d <= 3; ++d) cases.push_back({n, 2 + c % 3, d, std::uint64_t(1000 * n + c)});
  std::vector<DominationResult> dom(cases.size());
  std::vector<double> gm(cases.size(), 0);
  parallel_for(
      cases.size(),
      [&](std::size_t i) {
        auto rng = make_rng(opt.seed, cases[i].stream);
        std::vector<int> signs(cases[i].n);
        for (auto& s : signs) s = std::uniform_int_distribution<int>(0, 1)(rng) ? 1 : -1;
        const auto e = random_expression(rng, cases[i].n, cases[i].size, signs);
        dom[i] = moment_domination(e, cases[i].d);
        if (cases[i].d == 1) {
          const auto G = e.absolute();
          gm[i] = moment_abs(G, 1, Law::gaussian) / compute_M(G);
        }
      },
      opt.workers);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    ++rep.domination_checked;
    if (!dom[i].holds) ++rep.domination_failed;
    if (dom[i].G_moment > 0) rep.worst_domination_ratio = std::max(rep.worst_domination_ratio, dom[i].F_moment / dom[i].G_moment);
    rep.worst_G_over_M = std::max(rep.worst_G_over_M, gm[i]);
  }

  // Tail shape for n = 1, 2, 3 with random coefficients on four modes.
  std::vector<double> B;
  for (double b = 0.5; b <= 6.0 + 1e-12; b += 0.25) B.push_back(b);
  for (int n = 1; n <= 3; ++n) {
    auto rng = make_rng(opt.seed, 50000 + n);
    std::vector<int> signs(n);
    for (int j = 0; j < n; ++j) signs[j] = j % 2 ? -1 : 1;
    const auto e = random_expression(rng, n, 4, signs);
    rep.tails[n] = tail_check(e, B, opt.tail_trials, derive_seed(opt.seed, 60000 + n), 2.0, 6.0, opt.workers);
    rep.slope_bound[n] = 1.0 / n - 0.15;
  }

  // Second moment against Monte Carlo, on an expression with pairings.
  {
    auto rng = make_rng(opt.seed, 70000);
    const auto e = random_expression(rng, 2, 3, {1, -1});
    rep.exact_second = moment_abs(e, 1, Law::gaussian);
    const auto t = tail_check(e, {1.0}, opt.mc_trials, derive_seed(opt.seed, 70001), 2.0, 6.0, opt.workers);
    rep.mc_second = t.second_moment;
    rep.mc_se = t.second_moment_se;
    rep.mc_z = rep.mc_se > 0 ? (rep.mc_second - rep.exact_second) / rep.mc_se : 0;
  }
  return rep;
}

}  // namespace wnls
