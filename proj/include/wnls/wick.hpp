#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wnls/spectral.hpp"

namespace wnls {

// Small parameters derived from delta.
struct Params {
  double delta = 0.1;
  double delta0 = 0;  // delta^{1/50}
  double gamma = 0;   // delta^{3/4}
  double gamma0 = 0;  // delta^{5/4}
  double kappa = 0;   // delta^{-4}
  double b = 0;       // 1/2 + delta^4
  double b1 = 0;      // b + delta^4
  double b2 = 0;      // b - delta^6
  double a0 = 0;      // 2b - 10 delta^6
  double eps = 0.1;
  double theta = 0.1;

  static Params from_delta(double delta, double eps = 0.1, double theta = 0.1);
  // delta0 > gamma > delta > gamma0 > delta*gamma0 > delta^4 > delta^6 > 0.
  bool hierarchy_ordered() const;
};

std::int64_t factorial(int n);
std::int64_t binomial(int n, int k);

// sum over <k> <= N of <k>^{-2}
double sigma(int N);

// c_{rl} = C(r+1, r-l) r!/l!  (an integer, so stored exactly)
std::int64_t c_rl(int r, int l);

struct WickContext {
  int r = 1;
  int N = 1;
  double sigma_N = 1.0;
  std::vector<std::int64_t> c;  // c[l] = c_{rl}
  Params params;

  static WickContext make(int r, int N, double delta = 0.1);
  static WickContext make(int r, int N, const Params& p);
};

// Coefficients in powers of rho = |u|^2, with s standing for sigma (or m).
//   W^{2p}   = sum_j even[j] rho^j
//   W^{2p+1} = (sum_j odd[j] rho^j) u
std::vector<double> even_wick_coefficients(int p, double s);
std::vector<double> odd_wick_coefficients(int p, double s);
// d/ds of the same coefficient lists.
std::vector<double> even_wick_coefficients_ds(int p, double s);
std::vector<double> odd_wick_coefficients_ds(int p, double s);

// W^n(u) with the given sigma, read back at out_cutoff (0 keeps u.cutoff()).
SpectralField wick_power(const SpectralField& u, int n, double sig, int out_cutoff = 0);
// Same polynomial with sigma replaced by m = mean(|v|^2).
SpectralField wick_pairfree(const SpectralField& v, int n, int out_cutoff = 0);
// N_{2l+1}(v) = :|v|^{2l}v: - (l+1) A(:|v|^{2l}:) v
SpectralField script_N(const SpectralField& v, int l, int out_cutoff = 0);

enum class Parity { holomorphic, antiholomorphic };

struct PolarizationSlot {
  int index = 1;  // 1-based
  Parity parity = Parity::holomorphic;
  // Parity implied by the index: odd slots carry v, even slots carry conj(v).
  static PolarizationSlot at(int index);
};

// Multilinear form of N_{2l+1} with w in the given slot and v elsewhere.
// out_cutoff 0 means max of the two input cutoffs.
SpectralField script_N_polarized(int l, PolarizationSlot slot, const SpectralField& w,
                                 const SpectralField& v, int out_cutoff = 0);

enum class GaugedPath { checked, direct, expansion };

// Q_N(v) = W^{2r+1}(v) - (r+1) A[W^{2r}(v)] v (direct) or
// sum_l c_{rl} m*^{r-l} N_{2l+1}(v) (expansion). The checked path runs both and
// throws ConsistencyError when they disagree beyond 1e-9 relative.
SpectralField gauged_nonlinearity(const SpectralField& v, const WickContext& ctx, double m_star,
                                  GaugedPath path = GaugedPath::checked);

// Space mean of W^n(u) for even n; exact real part.
double wick_mean(const SpectralField& u, int n, double sig);

// Grid-resident evaluator for polynomials of the form F(rho) u + c u, the
// shape shared by every Wick nonlinearity. One instance per thread.
class RadialEvaluator {
 public:
  // Inputs have cutoff N_in, results are read at N_out; degree is the total
  // polynomial degree in (u, conj u) that will be formed.
  RadialEvaluator(int N_in, int N_out, int degree);
  int grid() const { return M_; }

  void load(const SpectralField& u);
  // A(rho^j), j = 0..max_moment, computed on load.
  double moment(int j) const { return moments_[j]; }
  int max_moment() const { return static_cast<int>(moments_.size()) - 1; }
  // out = Pi_{N_out}[(sum_j poly[j] rho^j + extra) u]
  void apply(std::span<const double> poly, double extra, SpectralField& out);
  // A(sum_j poly[j] rho^j)
  double mean_of(std::span<const double> poly) const;

  std::span<const cplx> field() const { return u_; }
  std::span<const double> rho() const { return rho_; }

 private:
  int N_in_;
  int N_out_;
  int M_;
  std::vector<cplx> u_;
  std::vector<double> rho_;
  std::vector<cplx> work_;
  std::vector<double> moments_;
};

// w -> sum_l (l+1) c_{rl} m*^{r-l} Pi N_{2l+1}(w, v, ..., v), with w in the first
// (holomorphic) slot. This is the linear operator driving the averaging
// equation, evaluated for many w against the same frozen v.
class HolomorphicLinearization {
 public:
  HolomorphicLinearization(int r, int N_w, int N_v, double m_star);
  int grid() const { return M_; }
  void load(const SpectralField& v);
  // out must have cutoff N_w.
  void apply(const SpectralField& w, SpectralField& out);

 private:
  int r_;
  int N_w_;
  int N_v_;
  double m_star_;
  int M_;
  std::vector<cplx> v_;
  std::vector<double> F_;  // multiplier of w
  std::vector<double> G_;  // multiplier of delta_m * v
  double s1_ = 0.0;        // coefficient of delta_m in the scalar part
  std::vector<double> e_;  // e_[j] multiplies A(rho^{j-1} w conj v)
  std::vector<double> rho_;
  std::vector<cplx> work_;
};

}  // namespace wnls
