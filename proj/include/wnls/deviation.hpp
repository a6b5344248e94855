#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wnls/common.hpp"

namespace wnls {

// F = sum over (k_1..k_n) in E^n of a_{k_1..k_n} prod_j g_{k_j}^{iota_j}, with
// g^+ = g and g^- = conj g. Modes of E are labelled 0..size-1; the tensor is
// stored flat with k_1 the slowest index.
struct MultilinearExpression {
  int n = 1;
  int size = 1;  // #E
  std::vector<int> signs;
  std::vector<cplx> a;

  MultilinearExpression() = default;
  MultilinearExpression(int n, int size, std::vector<int> signs);
  std::size_t flat(const std::vector<int>& k) const;
  cplx& at(const std::vector<int>& k) { return a[flat(k)]; }
  cplx at(const std::vector<int>& k) const { return a[flat(k)]; }
  // Same expression with every coefficient replaced by its modulus.
  MultilinearExpression absolute() const;
  void validate() const;
};

// Disjoint index pairs (i, j), i < j, with opposite signs.
struct PairingStructure {
  std::vector<std::pair<int, int>> pairs;
};

// Every partial matching of opposite-sign indices, the empty one first. n <= 9.
std::vector<PairingStructure> enumerate_pairings(const std::vector<int>& signs);
// sum_k C(P,k) C(Q,k) k! for P plus signs and Q minus signs.
std::int64_t pairing_count_formula(const std::vector<int>& signs);

cplx eval_F(const MultilinearExpression& e, const std::vector<cplx>& g);
// sum over matchings, sum over unmatched k_m, (sum over the paired values of |a|)^2.
double compute_M(const MultilinearExpression& e);

// Laws for the moment oracle: complex Gaussian E[z^b conj(z)^c] = [b=c] b!,
// uniform unit phase E[eta^b conj(eta)^c] = [b=c].
enum class Law { gaussian, unit_phase };

// A monomial prod_k z_k^{beta_k} conj(z_k)^{gamma_k} over independent modes.
struct MonomialSpec {
  std::vector<int> beta;
  std::vector<int> gamma;
};

// Exact moment; total degree up to `max_degree` (BudgetExceeded above).
double isserlis_moment(const MonomialSpec& m, Law law, int max_degree = 32);

// Sparse polynomial in (z, conj z): exponent vector (beta..., gamma...) -> coefficient.
using Exponent = std::vector<std::uint8_t>;
using Polynomial = std::map<Exponent, cplx>;

Polynomial to_polynomial(const MultilinearExpression& e);
Polynomial poly_multiply(const Polynomial& p, const Polynomial& q);
// E|F|^{2d} computed exactly from the expansion of F^d.
double moment_abs(const MultilinearExpression& e, int d, Law law, int max_degree = 32);

// E|F|^{2d} under the unit-phase law against E|G|^{2d} with G built from |a|
// and Gaussian modes.
struct DominationResult {
  int d = 1;
  double F_moment = 0;
  double G_moment = 0;
  bool holds = false;
};
DominationResult moment_domination(const MultilinearExpression& e, int d);

struct TailPoint {
  double B = 0;
  std::int64_t exceed = 0;
  double p = 0;
};

struct TailReport {
  double M = 0;
  std::int64_t trials = 0;
  std::vector<TailPoint> points;
  double slope = 0;       // log(-log p) against log B over B in [B_lo, B_hi] with 0 < p < 1
  int fit_points = 0;
  double second_moment = 0;     // Monte Carlo E|F|^2
  double second_moment_se = 0;  // its standard error
};

// |F| >= B M^{1/2} frequencies over `trials` Gaussian draws; draw t uses
// substream t of `seed`.
TailReport tail_check(const MultilinearExpression& e, const std::vector<double>& B, std::int64_t trials,
                      std::uint64_t seed, double fit_lo = 2.0, double fit_hi = 6.0, int workers = 0);

// Random expression: standard complex Gaussian coefficients (or integers in
// [-3, 3] when `integer`).
MultilinearExpression random_expression(std::mt19937_64& rng, int n, int size, const std::vector<int>& signs,
                                        bool integer = false);

// Coefficients declared measurable with respect to the modes in `low`:
// rebuilding them after redrawing every other mode must give identical bits.
using CoefficientBuilder = std::function<MultilinearExpression(const std::vector<cplx>& g)>;
bool measurability_holds(const CoefficientBuilder& build, const std::vector<int>& low, int size, std::uint64_t seed,
                         int redraws = 8);

// Kernels and coefficients for the no-pairing estimate on binned lambda grids.
// h[j] has shape (#k rows) x (#k* columns) for each lambda bin.
struct KernelBins {
  std::vector<Eigen::MatrixXcd> bins;  // one matrix per lambda bin
  std::vector<double> lambda;          // bin centres
  double dlambda = 1;
};

// ||h||_{l^2_{k*} -> l^2_k L^2_lambda}
double kernel_operator_norm(const KernelBins& h);

// a_{k1 k2}(lambda1, lambda2) on the product of the two bin grids.
struct BilinearCoefficient {
  int rows1 = 0, rows2 = 0;
  std::vector<double> lambda1, lambda2;
  double dlambda1 = 1, dlambda2 = 1;
  std::vector<cplx> values;  // index ((k1 * rows2 + k2) * L1 + l1) * L2 + l2
  cplx at(int k1, int k2, int l1, int l2) const {
    return values[((std::size_t(k1) * rows2 + k2) * lambda1.size() + l1) * lambda2.size() + l2];
  }
};

// ||a||_L^2 = sum_k int (max <lambda_j>)^{delta^6} (|a|^2 + |d_lambda a|^2),
// with one-sided differences at the bin edges.
double aux_norm(const BilinearCoefficient& a, double delta);

struct NoPairingSample {
  std::vector<double> ratio;  // |M(omega)| / (prod ||h_j|| ||a||_L) per draw
  double max_ratio = 0;
  double mean_ratio = 0;
};

// n = 2 instance of the no-pairing estimate: sum over k_j, k_j*, lambda_j of
// a h1 h2 g_{k1*}^{iota1} g_{k2*}^{iota2}, with k1* = k2* removed when the
// signs are opposite. The band modes k* are redrawn every sample.
NoPairingSample no_pairing_check(const BilinearCoefficient& a, const KernelBins& h1, const KernelBins& h2,
                                 std::array<int, 2> signs, double delta, int draws, std::uint64_t seed);

struct DeviationSuiteOptions {
  std::uint64_t seed = 1;
  std::int64_t tail_trials = 200000;
  std::int64_t mc_trials = 1000000;
  int domination_cases = 12;
  int workers = 0;
};

struct DeviationSuiteReport {
  int domination_checked = 0;
  int domination_failed = 0;
  double worst_domination_ratio = 0;  // max of E|F|^{2d} / E|G|^{2d}
  std::map<int, TailReport> tails;    // by n
  std::map<int, double> slope_bound;  // 1/n - 0.15
  double exact_second = 0, mc_second = 0, mc_se = 0;
  double mc_z = 0;
  double worst_G_over_M = 0;  // max E|G|^2 / M
  bool pass() const;
};

DeviationSuiteReport run_deviation_suite(const DeviationSuiteOptions& opt);

}  // namespace wnls
