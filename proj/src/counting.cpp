#include "wnls/counting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "wnls/parallel.hpp"
#include "wnls/wick.hpp"

namespace wnls {

namespace {

std::int64_t isqrt(std::int64_t n) {
  if (n <= 0) return 0;
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

std::vector<std::pair<std::int64_t, int>> factor(std::int64_t n) {
  std::vector<std::pair<std::int64_t, int>> out;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    if (n % p) continue;
    int e = 0;
    while (n % p == 0) n /= p, ++e;
    out.emplace_back(p, e);
  }
  if (n > 1) out.emplace_back(n, 1);
  return out;
}

const GaussInt kUnits[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

void check_ring(GaussInt m, Ring ring) {
  if (m.re == 0 && m.im == 0) throw std::invalid_argument("divisor count: m = 0");
  if (ring == Ring::integers && m.im != 0) throw std::invalid_argument("divisor count: m not in Z");
}

std::int64_t dot(Wavenumber a, Wavenumber b) {
  return std::int64_t(a.kx) * b.kx + std::int64_t(a.ky) * b.ky;
}
std::int64_t norm2(Wavenumber a) { return dot(a, a); }
Wavenumber scale(int s, Wavenumber a) { return {s * a.kx, s * a.ky}; }

}  // namespace

bool gauss_divides(GaussInt b, GaussInt a, GaussInt* quotient) {
  const std::int64_t n = b.norm();
  if (n == 0) return false;
  // a conj(b) / |b|^2
  const std::int64_t re = a.re * b.re + a.im * b.im;
  const std::int64_t im = a.im * b.re - a.re * b.im;
  if (re % n || im % n) return false;
  if (quotient) *quotient = {re / n, im / n};
  return true;
}

std::vector<GaussInt> divisors(GaussInt m, Ring ring) {
  check_ring(m, ring);
  std::vector<GaussInt> out;
  if (ring == Ring::integers) {
    const std::int64_t a = std::llabs(m.re);
    for (std::int64_t d = 1; d * d <= a; ++d) {
      if (a % d) continue;
      for (std::int64_t v : {d, a / d}) {
        out.push_back({v, 0});
        out.push_back({-v, 0});
      }
      if (d * d == a) out.resize(out.size() - 2);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  // Gaussian primes over each rational prime dividing |m|^2, with valuations.
  std::vector<std::pair<GaussInt, int>> primes;
  for (auto [p, e] : factor(m.norm())) {
    std::vector<GaussInt> pis;
    if (p == 2) {
      pis.push_back({1, 1});
    } else if (p % 4 == 3) {
      pis.push_back({p, 0});
    } else {
      for (std::int64_t x = 1;; ++x) {
        const std::int64_t y = isqrt(p - x * x);
        if (x * x + y * y == p) {
          pis.push_back({x, y});
          pis.push_back({x, -y});
          break;
        }
      }
    }
    (void)e;
    for (auto pi : pis) {
      int v = 0;
      GaussInt r = m;
      while (gauss_divides(pi, r, &r)) ++v;
      if (v) primes.emplace_back(pi, v);
    }
  }
  std::vector<GaussInt> acc{{1, 0}};
  for (auto [pi, v] : primes) {
    std::vector<GaussInt> next;
    for (auto a : acc) {
      GaussInt x = a;
      for (int e = 0; e <= v; ++e) {
        next.push_back(x);
        x = x * pi;
      }
    }
    acc.swap(next);
  }
  for (auto a : acc)
    for (auto u : kUnits) out.push_back(a * u);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<GaussInt> divisors_naive(GaussInt m, Ring ring) {
  check_ring(m, ring);
  std::vector<GaussInt> out;
  if (ring == Ring::integers) {
    const std::int64_t a = std::llabs(m.re);
    for (std::int64_t d = 1; d <= a; ++d)
      if (a % d == 0) {
        out.push_back({d, 0});
        out.push_back({-d, 0});
      }
    std::sort(out.begin(), out.end());
    return out;
  }
  const std::int64_t n = m.norm();
  std::set<GaussInt> found;
  auto scan = [&](std::int64_t d) {
    const std::int64_t r = isqrt(d);
    for (std::int64_t x = -r; x <= r; ++x) {
      const std::int64_t y = isqrt(d - x * x);
      if (x * x + y * y != d) continue;
      for (std::int64_t s : {y, -y}) {
        if (gauss_divides({x, s}, m)) found.insert({x, s});
        if (y == 0) break;
      }
    }
  };
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    scan(d);
    if (d * d != n) scan(n / d);
  }
  out.assign(found.begin(), found.end());
  return out;
}

std::int64_t divisor_count_box(GaussInt m, cplx a0, double M, cplx b0, double N, Ring ring) {
  std::int64_t count = 0;
  const double tol = 1e-9;
  for (auto a : divisors(m, ring)) {
    GaussInt b;
    gauss_divides(a, m, &b);
    const cplx ac(double(a.re), double(a.im)), bc(double(b.re), double(b.im));
    if (std::abs(ac - a0) <= M + tol && std::abs(bc - b0) <= N + tol) ++count;
  }
  return count;
}

bool in_disc(Wavenumber x, Wavenumber c, double radius) {
  if (radius < 0) return false;
  return double(norm2(x - c)) <= radius * radius + 1e-9;
}

std::vector<Wavenumber> disc_points(Wavenumber c, double radius) {
  std::vector<Wavenumber> out;
  if (radius < 0) return out;
  const int r = int(std::floor(radius + 1e-9));
  for (int x = -r; x <= r; ++x)
    for (int y = -r; y <= r; ++y) {
      const Wavenumber w{c.kx + x, c.ky + y};
      if (in_disc(w, c, radius)) out.push_back(w);
    }
  return out;
}

bool has_pairing(const std::vector<Wavenumber>& k, const std::vector<int>& signs) {
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = i + 1; j < k.size(); ++j)
      if (k[i] == k[j] && signs[i] == -signs[j]) return true;
  return false;
}

std::int64_t count_S(const TripleInstance& inst, int loop, bool exclude_pairings) {
  if (!(inst.N1 >= inst.N2 && inst.N2 >= inst.N3 && inst.N3 >= 1))
    throw std::invalid_argument("count_S: need N1 >= N2 >= N3 >= 1");
  if (loop < 0 || loop > 2) throw std::invalid_argument("count_S: loop must be 0, 1 or 2");
  const std::array<Wavenumber, 3> ctr{inst.a, inst.b, inst.c};
  const std::array<int, 3> rad{inst.N1, inst.N2, inst.N3};
  const auto& s = inst.signs;
  const std::vector<int> sv(s.begin(), s.end());
  // Enumerated pair (u, v) and solved index w.
  const int w = loop == 0 ? 0 : (loop == 1 ? 1 : 2);
  const int u = w == 0 ? 1 : 0;
  const int v = w == 2 ? 1 : 2;
  const auto du = disc_points(ctr[u], rad[u]);
  const auto dv = disc_points(ctr[v], rad[v]);
  std::int64_t count = 0;
  std::vector<Wavenumber> k(3);
  for (auto ku : du)
    for (auto kv : dv) {
      const Wavenumber rest = inst.d - scale(s[u], ku) - scale(s[v], kv);
      const Wavenumber kw = scale(s[w], rest);
      if (!in_disc(kw, ctr[w], rad[w])) continue;
      k[u] = ku, k[v] = kv, k[w] = kw;
      std::int64_t q = 0;
      for (int j = 0; j < 3; ++j) q += s[j] * norm2(k[j]);
      if (q != inst.alpha) continue;
      if (exclude_pairings && has_pairing(k, sv)) continue;
      ++count;
    }
  return count;
}

double triple_bound(const TripleInstance& inst, double theta, bool strong) {
  if (strong && inst.signs[0] == inst.signs[1]) return std::pow(inst.N2, theta) * double(inst.N3) * inst.N3;
  return std::pow(inst.N2, 1 + theta) * inst.N3;
}

SetKind parse_set_kind(const std::string& s) {
  if (s == "S1") return SetKind::S1;
  if (s == "S2") return SetKind::S2;
  if (s == "S3") return SetKind::S3;
  throw std::invalid_argument("unknown set '" + s + "' (S1, S2, S3)");
}

std::string set_kind_name(SetKind s) {
  switch (s) {
    case SetKind::S1: return "S1";
    case SetKind::S2: return "S2";
    case SetKind::S3: return "S3";
  }
  return "?";
}

void CountingInstance::validate(SetKind kind, double delta) const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("counting instance: " + m); };
  if (n < 1) fail("n >= 1 required");
  if (int(signs.size()) != n || int(N.size()) != n) fail("signs and N need n entries");
  if (kind != SetKind::S3 && int(center.size()) != n) fail("centers need n entries");
  for (int s : signs)
    if (s != 1 && s != -1) fail("signs are +1 or -1");
  if (sign_prime != 1 && sign_prime != -1) fail("sign_prime is +1 or -1");
  for (int x : N)
    if (x < 1) fail("box radii >= 1");
  if (N0 < 1) fail("N0 >= 1");
  if (p < 0 || 2 * p > n || int(R.size()) != p) fail("need 2p <= n and p block radii");
  for (int i = 0; i < p; ++i) {
    const int a = N[2 * i], b = N[2 * i + 1];
    if (std::max(a, b) > 2 * std::min(a, b)) fail("block sizes must agree within a factor 2");
    if (signs[2 * i] != -signs[2 * i + 1]) fail("block signs must be opposite");
    if (R[i] < 0 || R[i] > std::pow(double(a), 1 - delta) + 1e-9) fail("block radius R_i <= N^{1-delta}");
  }
  std::set<int> As(A.begin(), A.end());
  for (int j : A)
    if (j < 0 || j >= n) fail("A out of range");
  for (int j = 0; j < 2 * p; ++j)
    if (!As.count(j)) fail("A must contain every block index");
  if (gamma_index < -1 || gamma_index >= n) fail("gamma_index out of range");
  if (kind == SetKind::S3 && M < 0) fail("M >= 0");
}

namespace {

struct Layout {
  int nv = 0;  // n, plus one for k' in S2
  std::vector<int> sign;
  std::vector<Wavenumber> ctr;
  std::vector<double> rad;
  std::vector<int> partner;       // block partner or -1
  std::vector<double> block_rad;  // R of the block
  int plus_var = -1;              // solved from the S+ relation
  int quad_var = -1;              // solved from the quadratic relation
  std::vector<int> order;         // enumerated variables, outermost first
};

std::size_t disc_size(double r) {
  const int ri = int(std::floor(r + 1e-9));
  std::size_t c = 0;
  for (int x = -ri; x <= ri; ++x) c += 2 * std::size_t(isqrt(std::int64_t(std::floor(r * r + 1e-9)) - x * x)) + 1;
  return c;
}

int top_index(const CountingInstance& inst) {
  return int(std::max_element(inst.N.begin(), inst.N.end()) - inst.N.begin());
}

Layout make_layout(const CountingInstance& inst, SetKind kind, bool plus, const CountOptions& opt, bool relaxed) {
  Layout L;
  const int n = inst.n;
  L.nv = n + (kind == SetKind::S2 ? 1 : 0);
  for (int j = 0; j < n; ++j) {
    L.sign.push_back(inst.signs[j]);
    L.ctr.push_back(kind == SetKind::S3 ? Wavenumber{} : inst.center[j]);
    L.rad.push_back(inst.N[j]);
  }
  if (kind == SetKind::S2) {
    L.sign.push_back(inst.sign_prime);
    L.ctr.push_back({});
    L.rad.push_back(inst.N0);
  }
  L.partner.assign(L.nv, -1);
  L.block_rad.assign(L.nv, 0);
  for (int i = 0; i < inst.p; ++i) {
    L.partner[2 * i] = 2 * i + 1, L.partner[2 * i + 1] = 2 * i;
    L.block_rad[2 * i] = L.block_rad[2 * i + 1] = inst.R[i];
  }
  std::set<int> A(inst.A.begin(), inst.A.end());
  if (plus && !A.empty()) {
    for (int j : A)
      if (L.plus_var < 0 || L.rad[j] > L.rad[L.plus_var]) L.plus_var = j;
  }
  if (kind != SetKind::S3 && opt.eliminate_quadratic && !relaxed) {
    for (int v = 0; v < L.nv; ++v) {
      if (v == L.plus_var || (plus && A.count(v))) continue;
      if (L.quad_var < 0 || L.rad[v] > L.rad[L.quad_var]) L.quad_var = v;
    }
  }
  for (int v = 0; v < L.nv; ++v)
    if (v != L.plus_var && v != L.quad_var) L.order.push_back(v);
  std::stable_sort(L.order.begin(), L.order.end(), [&](int a, int b) { return L.rad[a] > L.rad[b]; });
  if (opt.reverse_order) std::reverse(L.order.begin(), L.order.end());
  return L;
}

double layout_cost(const Layout& L) {
  double cost = 1;
  std::set<int> placed;
  for (int v : L.order) {
    double c = double(disc_size(L.rad[v]));
    if (L.partner[v] >= 0 && placed.count(L.partner[v])) c = std::min(c, double(disc_size(L.block_rad[v])));
    cost *= c;
    placed.insert(v);
  }
  if (L.quad_var >= 0) cost *= 2 * std::floor(L.rad[L.quad_var]) + 3;
  return cost;
}

double sigma_value(const CountingInstance& inst, SetKind kind, const LatticeTuple& t) {
  double s = -double(norm2(t.k));
  for (int j = 0; j < inst.n; ++j) s += inst.signs[j] * double(norm2(t.kj[j]));
  if (kind == SetKind::S2) s += inst.sign_prime * double(norm2(t.k_prime));
  return s;
}

bool gamma_condition(const CountingInstance& inst, const LatticeTuple& t) {
  const int a = inst.gamma_index >= 0 ? inst.gamma_index : top_index(inst);
  const double k2 = double(norm2(t.k)), ka2 = double(norm2(t.kj[a]));
  return (k2 >= inst.Gamma && inst.Gamma >= ka2) || (k2 <= inst.Gamma && inst.Gamma <= ka2);
}

// All constraints; `relaxed` drops the quadratic one (the sets S_j^lin).
bool admissible(const CountingInstance& inst, SetKind kind, bool plus, const LatticeTuple& t, bool exclude_pairings,
                bool relaxed) {
  const int n = inst.n;
  Wavenumber lin{};
  for (int j = 0; j < n; ++j) {
    const Wavenumber c = kind == SetKind::S3 ? Wavenumber{} : inst.center[j];
    if (!in_disc(t.kj[j], c, inst.N[j])) return false;
    lin = lin + scale(inst.signs[j], t.kj[j]);
  }
  if (kind == SetKind::S2) {
    if (!in_disc(t.k_prime, {}, inst.N0)) return false;
    lin = lin + scale(inst.sign_prime, t.k_prime);
  }
  if (!(lin == t.k + inst.d)) return false;
  if (kind != SetKind::S1 && !in_disc(t.k, {}, inst.N0)) return false;
  for (int i = 0; i < inst.p; ++i)
    if (!in_disc(t.kj[2 * i], t.kj[2 * i + 1], inst.R[i])) return false;
  if (plus) {
    Wavenumber s{};
    for (int j : inst.A) s = s + scale(inst.signs[j], t.kj[j]);
    if (!(s == inst.d_plus)) return false;
  }
  if (!relaxed) {
    const double sig = sigma_value(inst, kind, t);
    if (kind == SetKind::S3) {
      if (std::abs(sig - inst.alpha) > inst.M + 1e-9) return false;
    } else if (std::abs(sig - inst.alpha) > 1e-9) {
      return false;
    }
  }
  if (kind == SetKind::S3 && !gamma_condition(inst, t)) return false;
  if (exclude_pairings) {
    std::vector<Wavenumber> k{t.k};
    std::vector<int> s{-1};
    if (kind == SetKind::S2) k.push_back(t.k_prime), s.push_back(inst.sign_prime);
    for (int j = 0; j < n; ++j) k.push_back(t.kj[j]), s.push_back(inst.signs[j]);
    if (has_pairing(k, s)) return false;
  }
  return true;
}

class Enumerator {
 public:
  Enumerator(const CountingInstance& inst, SetKind kind, bool plus, const CountOptions& opt, bool relaxed,
             const std::function<void(const LatticeTuple&)>& visit)
      : inst_(inst), kind_(kind), plus_(plus), opt_(opt), relaxed_(relaxed), visit_(visit),
        L_(make_layout(inst, kind, plus, opt, relaxed)), val_(L_.nv), set_(L_.nv, false) {}

  void run() {
    const double cost = layout_cost(L_);
    if (cost > double(opt_.budget))
      throw BudgetExceeded("counting: predicted " + std::to_string(cost) + " visits exceed budget " +
                           std::to_string(opt_.budget));
    recurse(0);
  }

 private:
  Wavenumber& var(int v) { return val_[v]; }

  void recurse(std::size_t depth) {
    if (depth == L_.order.size()) {
      leaf();
      return;
    }
    const int v = L_.order[depth];
    const int pv = L_.partner[v];
    std::vector<Wavenumber> cand;
    if (pv >= 0 && set_[pv] && disc_size(L_.block_rad[v]) < disc_size(L_.rad[v]))
      cand = disc_points(val_[pv], L_.block_rad[v]);
    else
      cand = disc_points(L_.ctr[v], L_.rad[v]);
    set_[v] = true;
    for (auto c : cand) {
      if (!in_disc(c, L_.ctr[v], L_.rad[v])) continue;
      if (pv >= 0 && set_[pv] && !in_disc(c, val_[pv], L_.block_rad[v])) continue;
      val_[v] = c;
      recurse(depth + 1);
    }
    set_[v] = false;
  }

  void leaf() {
    if (L_.plus_var >= 0) {
      const int pv = L_.plus_var;
      Wavenumber s = inst_.d_plus;
      for (int j : inst_.A)
        if (j != pv) s = s - scale(L_.sign[j], val_[j]);
      val_[pv] = scale(L_.sign[pv], s);
    }
    if (L_.quad_var < 0) {
      emit();
      return;
    }
    // k = s + iota_q k_q with every other variable fixed.
    const int q = L_.quad_var;
    const int iq = L_.sign[q];
    Wavenumber s = scale(-1, inst_.d);
    double beta = inst_.alpha;
    for (int v = 0; v < L_.nv; ++v) {
      if (v == q) continue;
      s = s + scale(L_.sign[v], val_[v]);
      beta -= L_.sign[v] * double(norm2(val_[v]));
    }
    if (std::abs(beta - std::round(beta)) > 1e-9) return;
    const std::int64_t b = std::llround(beta);
    const Wavenumber c = L_.ctr[q];
    const int r = int(std::floor(L_.rad[q] + 1e-9));
    if (iq == 1) {
      // 2 s.k_q = -beta - |s|^2
      const std::int64_t rhs2 = -b - norm2(s);
      if (s.kx == 0 && s.ky == 0) {
        if (rhs2 != 0) return;
        for (auto w : disc_points(c, L_.rad[q])) val_[q] = w, emit();
        return;
      }
      if (rhs2 % 2) return;
      const std::int64_t rhs = rhs2 / 2;
      const bool by_y = std::llabs(s.kx) >= std::llabs(s.ky);
      for (int t = -r; t <= r; ++t) {
        Wavenumber w;
        if (by_y) {
          const std::int64_t y = c.ky + t;
          const std::int64_t num = rhs - std::int64_t(s.ky) * y;
          if (num % s.kx) continue;
          w = {int(num / s.kx), int(y)};
        } else {
          const std::int64_t x = c.kx + t;
          const std::int64_t num = rhs - std::int64_t(s.kx) * x;
          if (num % s.ky) continue;
          w = {int(x), int(num / s.ky)};
        }
        if (!in_disc(w, c, L_.rad[q])) continue;
        val_[q] = w;
        emit();
      }
    } else {
      // |2 k_q - s|^2 = -|s|^2 - 2 beta
      const std::int64_t T = -norm2(s) - 2 * b;
      if (T < 0) return;
      for (int t = -r; t <= r; ++t) {
        const std::int64_t x2 = 2 * std::int64_t(c.kx + t) - s.kx;
        const std::int64_t rem = T - x2 * x2;
        if (rem < 0) continue;
        const std::int64_t y2 = isqrt(rem);
        if (y2 * y2 != rem) continue;
        for (std::int64_t ys : {y2, -y2}) {
          if ((ys + s.ky) % 2) continue;
          const Wavenumber w{c.kx + t, int((ys + s.ky) / 2)};
          if (in_disc(w, c, L_.rad[q])) {
            val_[q] = w;
            emit();
          }
          if (y2 == 0) break;
        }
      }
    }
  }

  void emit() {
    LatticeTuple t;
    t.kj.assign(val_.begin(), val_.begin() + inst_.n);
    if (kind_ == SetKind::S2) t.k_prime = val_[inst_.n];
    Wavenumber k = scale(-1, inst_.d);
    for (int v = 0; v < L_.nv; ++v) k = k + scale(L_.sign[v], val_[v]);
    t.k = k;
    if (admissible(inst_, kind_, plus_, t, opt_.exclude_pairings, relaxed_)) visit_(t);
  }

  const CountingInstance& inst_;
  SetKind kind_;
  bool plus_;
  CountOptions opt_;
  bool relaxed_;
  const std::function<void(const LatticeTuple&)>& visit_;
  Layout L_;
  std::vector<Wavenumber> val_;
  std::vector<bool> set_;
};

}  // namespace

double count_cost(const CountingInstance& inst, SetKind kind, bool plus, const CountOptions& opt) {
  return layout_cost(make_layout(inst, kind, plus, opt, false));
}

bool in_set(const CountingInstance& inst, SetKind kind, bool plus, const LatticeTuple& t, bool exclude_pairings) {
  return admissible(inst, kind, plus, t, exclude_pairings, false);
}

void enumerate_S123(const CountingInstance& inst, SetKind kind, bool plus, const CountOptions& opt,
                    const std::function<void(const LatticeTuple&)>& visit) {
  Enumerator(inst, kind, plus, opt, false, visit).run();
}

std::int64_t count_S123(const CountingInstance& inst, SetKind kind, bool plus, const CountOptions& opt) {
  std::int64_t count = 0;
  enumerate_S123(inst, kind, plus, opt, [&](const LatticeTuple&) { ++count; });
  return count;
}

double weighted_sum_E(const CountingInstance& inst, SetKind kind, bool plus, double a0, const CountOptions& opt) {
  double total = 0;
  std::function<void(const LatticeTuple&)> visit = [&](const LatticeTuple& t) {
    const double x = sigma_value(inst, kind, t) - inst.alpha;
    total += std::pow(1.0 + x * x, -0.5 * a0);
  };
  Enumerator(inst, kind, plus, opt, true, visit).run();
  return total;
}

double counting_rhs(const CountingInstance& inst, SetKind kind, bool plus, double gamma0, bool weighted) {
  const int n = inst.n;
  std::vector<double> sorted(inst.N.begin(), inst.N.end());
  std::sort(sorted.rbegin(), sorted.rend());
  const double N1 = sorted[0];
  const double N2 = n > 1 ? sorted[1] : 1.0;
  const int a = top_index(inst);
  double prodN2 = 1;
  for (int x : inst.N) prodN2 *= double(x) * x;
  double NPR = 1;
  double block = 1;
  for (int i = 0; i < inst.p; ++i) {
    NPR = std::max({NPR, double(inst.N[2 * i]), double(inst.N[2 * i + 1])});
    block *= inst.R[i] / std::pow(double(inst.N[2 * i]), 1 + 2 * gamma0);
  }
  const double common = std::pow(NPR, 2 * gamma0) * block * prodN2;
  std::set<int> A(inst.A.begin(), inst.A.end());
  std::vector<double> outer;  // N_j for j in A beyond the blocks
  for (int j : inst.A)
    if (j >= 2 * inst.p) outer.push_back(inst.N[j]);
  std::sort(outer.rbegin(), outer.rend());
  const double extra = outer.empty() ? 1.0 : 1.0 / std::min(N2, outer[0]);
  const bool a_in_A = A.count(a) > 0;
  const double Mf = weighted ? 1.0 : inst.M;
  const double alpha_ratio = std::max(N2 * N2, std::abs(inst.alpha)) / (N2 * N2);

  switch (kind) {
    case SetKind::S1: {
      const bool strong = inst.signs[a] == -1 || (plus && a_in_A);
      double r = strong ? common / (N1 * N1) : common / (N1 * N2);
      if (plus) r *= extra;
      return r;
    }
    case SetKind::S2: {
      double r = common * inst.N0 / N1;
      if (plus) r *= (a_in_A && a >= 2 * inst.p) ? std::min(extra, 1.0 / N1) : extra;
      return r;
    }
    case SetKind::S3: {
      const double r5 = common * Mf * alpha_ratio / (N1 * N1);
      if (!plus) return r5;
      double second = 1.0 / (N1 * N2 * N2);
      if (outer.size() >= 2)
        second = std::min(second, std::max(N2 * N2, std::abs(inst.alpha)) / (N1 * N1 * N2 * N2) / outer[1]);
      const double r6 = common * Mf * second;
      return std::max(r5 * extra, r6);
    }
  }
  return 0;
}

TripleInstance random_triple(std::mt19937_64& rng, int N2, int N3, bool same_sign) {
  std::uniform_int_distribution<int> coin(0, 1), ctr(-20, 20);
  TripleInstance t;
  t.N2 = N2, t.N3 = N3;
  t.N1 = coin(rng) ? N2 : 2 * N2;
  for (auto& s : t.signs) s = coin(rng) ? 1 : -1;
  if (same_sign) t.signs[1] = t.signs[0];
  t.a = {ctr(rng), ctr(rng)}, t.b = {ctr(rng), ctr(rng)}, t.c = {ctr(rng), ctr(rng)};
  auto pick = [&](Wavenumber c, int r) {
    const auto pts = disc_points(c, r);
    return pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)];
  };
  const Wavenumber x = pick(t.a, t.N1), y = pick(t.b, t.N2), z = pick(t.c, t.N3);
  t.d = scale(t.signs[0], x) + scale(t.signs[1], y) + scale(t.signs[2], z);
  t.alpha = t.signs[0] * norm2(x) + t.signs[1] * norm2(y) + t.signs[2] * norm2(z);
  return t;
}

CountingInstance random_instance(std::mt19937_64& rng, SetKind kind, bool plus, int n, int Nmax, double delta) {
  std::uniform_int_distribution<int> coin(0, 1), ctr(-8, 8);
  auto dyadic = [&](int hi) {
    std::vector<int> v;
    for (int x = 1; x <= hi; x *= 2) v.push_back(x);
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto pick = [&](Wavenumber c, double r) {
    const auto pts = disc_points(c, r);
    return pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)];
  };
  CountingInstance in;
  in.n = n;
  in.p = std::uniform_int_distribution<int>(0, n / 2)(rng);
  in.signs.resize(n);
  in.N.resize(n);
  for (int j = 0; j < n; ++j) in.signs[j] = coin(rng) ? 1 : -1, in.N[j] = dyadic(Nmax);
  for (int i = 0; i < in.p; ++i) {
    const int a = std::max(in.N[2 * i], 2);
    in.N[2 * i] = a;
    in.N[2 * i + 1] = coin(rng) ? a : a / 2;
    in.signs[2 * i + 1] = -in.signs[2 * i];
    const int rmax = int(std::floor(std::pow(double(a), 1 - delta) + 1e-9));
    in.R.push_back(std::uniform_int_distribution<int>(1, std::max(rmax, 1))(rng));
  }
  for (int j = 0; j < 2 * in.p; ++j) in.A.push_back(j);
  for (int j = 2 * in.p; j < n; ++j)
    if (coin(rng)) in.A.push_back(j);
  if (plus && in.A.empty()) in.A.push_back(n - 1);
  in.sign_prime = coin(rng) ? 1 : -1;
  in.N0 = dyadic(Nmax);
  for (int j = 0; j < n; ++j) in.center.push_back(kind == SetKind::S3 ? Wavenumber{} : Wavenumber{ctr(rng), ctr(rng)});
  in.M = dyadic(16);

  LatticeTuple t;
  t.kj.resize(n);
  for (int j = n - 1; j >= 0; --j) {
    if (j < 2 * in.p && j % 2 == 0) {
      // inside both its own disc and the block disc around its partner
      std::vector<Wavenumber> ok;
      for (auto w : disc_points(t.kj[j + 1], in.R[j / 2]))
        if (in_disc(w, in.center[j], in.N[j])) ok.push_back(w);
      t.kj[j] = ok.empty() ? t.kj[j + 1] : ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    } else {
      t.kj[j] = pick(in.center[j], in.N[j]);
    }
  }
  if (kind == SetKind::S2) t.k_prime = pick({}, in.N0);
  t.k = kind == SetKind::S1 ? pick({}, 4) : pick({}, in.N0);
  Wavenumber lin{};
  for (int j = 0; j < n; ++j) lin = lin + scale(in.signs[j], t.kj[j]);
  if (kind == SetKind::S2) lin = lin + scale(in.sign_prime, t.k_prime);
  in.d = lin - t.k;
  for (int j : in.A) in.d_plus = in.d_plus + scale(in.signs[j], t.kj[j]);
  in.alpha = sigma_value(in, kind, t);
  if (kind == SetKind::S3) {
    in.alpha += std::uniform_int_distribution<int>(-int(in.M), int(in.M))(rng);
    const double k2 = double(norm2(t.k)), ka2 = double(norm2(t.kj[top_index(in)]));
    in.Gamma = std::uniform_real_distribution<double>(std::min(k2, ka2), std::max(k2, ka2))(rng);
  }
  return in;
}

ShapeCheck check_shape(const std::string& name, const std::vector<CountingRow>& rows) {
  ShapeCheck c;
  c.name = name;
  c.instances = int(rows.size());
  if (rows.empty()) return c;
  int top = 0;
  for (const auto& r : rows) top = std::max(top, r.size);
  bool finite = true;
  for (const auto& r : rows) {
    finite = finite && std::isfinite(r.ratio);
    c.fitted_constant = std::max(c.fitted_constant, r.ratio);
    if (r.size < top)
      c.smaller_max = std::max(c.smaller_max, r.ratio);
    else
      c.largest_max = std::max(c.largest_max, r.ratio);
  }
  c.growth = c.smaller_max > 0 ? c.largest_max / c.smaller_max : 0;
  c.pass = finite && c.fitted_constant > 0;
  return c;
}

}  // namespace wnls

namespace wnls {

bool CountingSuiteReport::pass() const {
  if (divisor_mismatches || pairing_failures || order_mismatches) return false;
  for (const auto& s : shapes)
    if (!s.pass) return false;
  return !shapes.empty();
}

namespace {

struct BatchSpec {
  std::string name;
  SetKind kind;
  bool plus;
  bool weighted;
  int n;
  std::vector<int> sizes;
};

double ratio_of(double value, double rhs) {
  if (value == 0) return 0;
  return rhs > 0 ? value / rhs : std::numeric_limits<double>::infinity();
}

}  // namespace

CountingSuiteReport run_counting_suite(const CountingSuiteOptions& opt) {
  CountingSuiteReport rep;
  const double gamma0 = Params::from_delta(opt.delta).gamma0;
  const int workers = opt.workers > 0 ? opt.workers : worker_count();

  // Triple sets of the two-dimensional count.
  for (bool same : {false, true}) {
    const std::vector<int> sizes{4, 8, 16, 32};
    std::vector<CountingRow> rows(sizes.size() * opt.per_class);
    std::vector<int> mism(rows.size(), 0);
    parallel_for(
        rows.size(),
        [&](std::size_t i) {
          auto rng = make_rng(opt.seed, (same ? 2000000 : 1000000) + i);
          const int N2 = sizes[i / opt.per_class];
          std::vector<int> n3;
          for (int x = 1; x <= N2; x *= 2) n3.push_back(x);
          const int N3 = n3[std::uniform_int_distribution<std::size_t>(0, n3.size() - 1)(rng)];
          const auto t = random_triple(rng, N2, N3, same);
          CountingRow r;
          r.set = same ? "S_same_sign" : "S";
          r.size = N2;
          r.count = count_S(t, 0);
          if (count_S(t, 1) != r.count || count_S(t, 2) != r.count) mism[i] = 1;
          r.value = double(r.count);
          r.rhs = triple_bound(t, opt.theta, same);
          r.ratio = ratio_of(r.value, r.rhs);
          rows[i] = r;
        },
        workers);
    for (int m : mism) rep.order_mismatches += m;
    rep.shapes.push_back(check_shape(rows.front().set, rows));
    rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
  }

  const std::vector<BatchSpec> specs{
      {"S1", SetKind::S1, false, false, 3, {4, 8, 16}},  {"S1+", SetKind::S1, true, false, 3, {4, 8, 16}},
      {"S2", SetKind::S2, false, false, 2, {4, 8, 16}},  {"S2+", SetKind::S2, true, false, 2, {4, 8, 16}},
      {"S3", SetKind::S3, false, false, 3, {2, 4, 8}},   {"S3+", SetKind::S3, true, false, 3, {2, 4, 8}},
      {"E1", SetKind::S1, false, true, 3, {2, 4, 8}},    {"E2", SetKind::S2, false, true, 2, {2, 4, 8}},
      {"E3", SetKind::S3, false, true, 3, {2, 4, 8}},
  };
  const double a0 = Params::from_delta(opt.delta).a0;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto& sp = specs[s];
    std::vector<CountingRow> rows(sp.sizes.size() * opt.per_class);
    std::vector<int> mism(rows.size(), 0);
    parallel_for(
        rows.size(),
        [&](std::size_t i) {
          auto rng = make_rng(opt.seed, 3000000 + 100000 * s + i);
          const int Nmax = sp.sizes[i / opt.per_class];
          const auto inst = random_instance(rng, sp.kind, sp.plus, sp.n, Nmax, opt.delta);
          inst.validate(sp.kind, opt.delta);
          CountingRow r;
          r.set = sp.name;
          r.size = Nmax;
          if (sp.weighted) {
            r.value = weighted_sum_E(inst, sp.kind, sp.plus, a0);
            r.rhs = counting_rhs(inst, sp.kind, sp.plus, gamma0, true);
          } else {
            r.count = count_S123(inst, sp.kind, sp.plus);
            CountOptions rev;
            rev.reverse_order = true;
            if (count_S123(inst, sp.kind, sp.plus, rev) != r.count) mism[i] = 1;
            r.value = double(r.count);
            r.rhs = counting_rhs(inst, sp.kind, sp.plus, gamma0);
          }
          r.ratio = ratio_of(r.value, r.rhs);
          rows[i] = r;
        },
        workers);
    for (int m : mism) rep.order_mismatches += m;
    rep.shapes.push_back(check_shape(sp.name, rows));
    rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
  }

  // Pairing exclusion: the excluded tuples are exactly those with a pairing,
  // and a tuple built with k_1 = k_2 (opposite signs) is dropped.
  {
    const int cases = 50;
    std::vector<int> fail(cases, 0);
    parallel_for(
        cases,
        [&](std::size_t i) {
          auto rng = make_rng(opt.seed, 4000000 + i);
          auto inst = random_instance(rng, SetKind::S1, false, 3, 8, opt.delta);
          inst.p = 0, inst.R.clear();
          inst.signs[0] = 1, inst.signs[1] = -1;
          // force the reference tuple to carry the pairing k_1 = k_2
          LatticeTuple t;
          t.kj = {Wavenumber{1, 2}, Wavenumber{1, 2}, Wavenumber{0, 0}};
          inst.center = {t.kj[0], t.kj[1], t.kj[2]};
          t.k = Wavenumber{-3, 1};
          inst.d = t.kj[0] - t.kj[1] + Wavenumber{inst.signs[2] * t.kj[2].kx, inst.signs[2] * t.kj[2].ky} - t.k;
          inst.alpha = inst.signs[2] * double(t.kj[2].norm2()) - double(t.k.norm2());
          CountOptions all;
          all.exclude_pairings = false;
          std::int64_t with_pair = 0, total = 0;
          enumerate_S123(inst, SetKind::S1, false, all, [&](const LatticeTuple& u) {
            ++total;
            std::vector<Wavenumber> k{u.k, u.kj[0], u.kj[1], u.kj[2]};
            if (has_pairing(k, {-1, inst.signs[0], inst.signs[1], inst.signs[2]})) ++with_pair;
          });
          const std::int64_t kept = count_S123(inst, SetKind::S1, false);
          bool ok = kept == total - with_pair && with_pair >= 1;
          ok = ok && in_set(inst, SetKind::S1, false, t, false) && !in_set(inst, SetKind::S1, false, t, true);
          fail[i] = ok ? 0 : 1;
        },
        workers);
    rep.pairing_cases = cases;
    for (int f : fail) rep.pairing_failures += f;
  }

  // Divisors against trial division: every |m| <= 2000 in Z, random samples
  // up to divisor_max in Z and Z[i].
  {
    std::vector<GaussInt> cases;
    std::vector<Ring> rings;
    for (std::int64_t m = -2000; m <= 2000; ++m)
      if (m) cases.push_back({m, 0}), rings.push_back(Ring::integers);
    auto rng = make_rng(opt.seed, 5000000);
    std::uniform_int_distribution<std::int64_t> zi(-opt.divisor_max, opt.divisor_max);
    const std::int64_t g = std::int64_t(opt.divisor_max / std::sqrt(2.0));
    std::uniform_int_distribution<std::int64_t> gi(-g, g);
    for (int i = 0; i < opt.divisor_samples; ++i) {
      GaussInt m{zi(rng), 0};
      if (m.re) cases.push_back(m), rings.push_back(Ring::integers);
      GaussInt q{gi(rng), gi(rng)};
      if (q.re || q.im) cases.push_back(q), rings.push_back(Ring::gaussian);
    }
    std::vector<int> bad(cases.size(), 0);
    parallel_for(
        cases.size(), [&](std::size_t i) { bad[i] = divisors(cases[i], rings[i]) != divisors_naive(cases[i], rings[i]); },
        workers);
    rep.divisor_cases = std::int64_t(cases.size());
    for (int b : bad) rep.divisor_mismatches += b;
  }
  return rep;
}

}  // namespace wnls
