#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wnls/dynamics.hpp"
#include "wnls/spectral.hpp"
#include "wnls/wick.hpp"

namespace wnls {

// Dyadic scales L >= 1/2 are stored as doubles; Pi_{1/2} is the zero map.
bool in_scale_set(int N, double L, double delta);
// 1/2, 1, 2, ... up to the largest L with (N, L) in the set.
std::vector<double> scales_below(int N, double delta);
double top_scale(int N, double delta);  // L_0
// Pi_L for a dyadic L, zero field at cutoff 1 when L < 1.
SpectralField project_scale(const SpectralField& u, double L);

// chi = 1 on [-1,1], 0 outside [-2,2], smooth; chi_tau(t) = chi(t/tau).
double bump(double z);

struct TimeGrid {
  double tau = 0.5;        // window scale; trajectories cover [-2 tau, 2 tau]
  int frames_per_unit = 0;  // saved frames per unit time (power of two)
  double dt = 0.0;          // integrator step, a divisor of the frame spacing
  int stride = 1;

  // Frame spacing 1/max(128, 2^ceil(log2(N^2/2))); dt the largest divisor of it
  // not exceeding 0.1/N^2.
  static TimeGrid for_cutoff(int N, double tau = 0.5);
  double half_span() const { return 2.0 * tau; }
  double window(double t) const { return bump(t / tau); }
};

// Spectrum of e^{i|k|^2 t} chi_tau(t) u_k(t) on the DFT dual grid, normalized
// so that sum_m |u~|^2 dlambda = dt * sum_j |chi u|^2 (Parseval).
struct TwistedTransform {
  std::vector<Wavenumber> modes;
  std::vector<double> lambda;
  double dlambda = 0.0;
  Eigen::MatrixXcd values;  // modes x lambda
  double leakage = 0.0;     // energy fraction in the outer eighth of the lambda band
};

TwistedTransform twisted_transform(const Trajectory& tr, const TimeGrid& grid, int cutoff);
double xsb_norm(const TwistedTransform& tt, double s, double b);
double xsb_norm(const Trajectory& tr, const TimeGrid& grid, double s, double b);

// Kernel h_{k k*}(t): one trajectory per band mode k*, each over the shell of N.
struct KernelMatrix {
  int N = 1;
  double L = 0.5;
  std::vector<Wavenumber> columns;
  std::vector<Trajectory> column_traj;
  std::vector<double> times() const;
};

KernelMatrix kernel_difference(const KernelMatrix& a, const KernelMatrix& b);
double zb_norm(const KernelMatrix& h, const TimeGrid& grid, double b);
// Operator norm l^2_{k*} -> l^2_k L^2_lambda through the Gram matrix.
double yb_norm(const KernelMatrix& h, const TimeGrid& grid, double b);
// Same quantity by power iteration started from random unit vectors; returns
// the best of `starts` runs of `iters` iterations.
double yb_norm_power(const KernelMatrix& h, const TimeGrid& grid, double b, int starts, int iters,
                     std::uint64_t seed);
// log of the Z^b norm with weight (1 + |k - k*|/L)^kappa, kept in log space.
double log_weighted_zb_norm(const KernelMatrix& h, const TimeGrid& grid, double b, double kappa);

// Solver for the linear equation
//   (i d_t + Delta) psi = sum_l (l+1) c_{rl} m*^{r-l} Pi_N N_{2l+1}(psi, v_L, ..., v_L)
// advanced in lockstep with the gauged flow of v_L from data Pi_L f. All psi
// data share one v_L computation.
struct LinearSolve {
  Trajectory v;                 // recomputed v_L (empty states when L < 1)
  std::vector<Trajectory> psi;  // one per datum
};

LinearSolve solve_linear(int N, double L, const SpectralField& f, double m_star_N, int r,
                         const std::vector<SpectralField>& data, const TimeGrid& grid, int workers = 0);

// A seeded data sample f = sum g_k/<k> e^{ik.x} at cutoff N_max together with
// cached solves at every dyadic scale.
class ScaleLadder {
 public:
  ScaleLadder(int r, int N_max, std::uint64_t seed, double delta = 0.1, double tau = 0.5);
  ScaleLadder(int r, const SpectralField& gaussians, double delta = 0.1, double tau = 0.5);

  int r() const { return r_; }
  int N_max() const { return N_max_; }
  const SpectralField& gaussians() const { return g_; }
  const SpectralField& data() const { return f_; }
  double delta() const { return delta_; }
  double tau() const { return tau_; }
  // Grid used for every solve of this ladder (fixed by N_max).
  const TimeGrid& grid() const { return grid_; }
  double m_star(int N) const;

  // Gauged solution v_N with data Pi_N f on [-2tau, 2tau]; N = 0 gives v_{1/2} = 0.
  const Trajectory& v(int N);
  // y_N = v_N - v_{N/2}
  Trajectory y(int N);
  // psi_{N,L} with data Delta_N f.
  const Trajectory& psi(int N, double L);
  // psi_{N,L}[w]: same equation with data w on the band of N.
  std::vector<Trajectory> psi_probe(int N, double L, const std::vector<SpectralField>& data);
  KernelMatrix H(int N, double L);
  KernelMatrix h(int N, double L);
  // zeta_{N,L} = psi_{N,L} - psi_{N,L/2}
  Trajectory zeta(int N, double L);
  // z_N = y_N - psi_{N,L_0}
  Trajectory z(int N);

 private:
  int r_;
  int N_max_;
  double delta_;
  double tau_;
  SpectralField g_;
  SpectralField f_;
  TimeGrid grid_;
  std::map<int, Trajectory> v_;
  std::map<std::pair<int, double>, Trajectory> psi_;
};

// Pointwise difference of two trajectories on the same grid, read at the
// larger cutoff.
Trajectory trajectory_difference(const Trajectory& a, const Trajectory& b);
// e^{it Delta} u(0) on the times of tr.
Trajectory free_evolution(const SpectralField& u0, const std::vector<double>& times);

// Duhamel operators on a uniform grid containing t = 0:
//   I F(t) = chi_tau(t) int_0^t e^{i(t-t')Delta} chi_tau(t') F(t') dt'
//   J F(t) = chi_tau(t) (int_{-inf}^t - int_t^inf) e^{i(t-t')Delta} chi_tau(t') F(t') dt'
// integrated with the trapezoidal rule in the interaction picture.
Trajectory duhamel_I(const Trajectory& F, const TimeGrid& grid);
Trajectory duhamel_J(const Trajectory& F, const TimeGrid& grid);

struct ScanRow {
  std::uint64_t seed = 0;
  int N = 0;
  double L = 0;
  std::string quantity;  // "z_Xb", "y_Xb", "h_Zb", "h_Yb", "h_Zb_probe", "h_Yb_lower"
  double value = 0;
  double bound = 0;
};

struct ScanOptions {
  std::vector<int> N_list{4, 8, 16, 32};
  int r = 1;
  std::vector<std::uint64_t> seeds{1};
  double delta = 0.1;
  double tau = 0.5;
  int full_kernel_max_N = 8;  // exact H columns up to this N, Hutchinson probes above
  int probes = 4;
  std::vector<int> L_scan_N{16};  // cutoffs at which h^{N,L} is scanned in L
  int workers = 0;
};

struct ScanFit {
  double z_slope = 0;          // log ||z_N||_{X^b} vs log N, pooled over seeds
  double z_slope_bound = 0;    // -1 + gamma + 0.3
  std::map<int, double> h_L_slope;  // per scanned N, log Z^b(h^{N,L}) vs log L over L >= 2
};

struct ScanReport {
  std::vector<ScanRow> rows;
  ScanFit fit;
  std::vector<std::string> warnings;
};

ScanReport apriori_scan(const ScanOptions& opt);

// Ordinary least squares slope of y on x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace wnls
