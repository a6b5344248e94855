#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "wnls/spectral.hpp"
#include "wnls/wick.hpp"

namespace wnls {

// ip_rk4: classical RK4 in the interaction picture (Lawson).
// ip_gauss4: two-stage Gauss collocation in the interaction picture. Implicit,
//   order four, and it conserves the mass exactly up to the Newton tolerance.
// strang: exact linear half steps around a pointwise phase rotation.
enum class Scheme { ip_rk4, ip_gauss4, strang };

Scheme parse_scheme(const std::string& name);
std::string scheme_name(Scheme s);

// Reference step 0.1/N^2. Larger steps are allowed; the interaction picture
// removes the linear stiffness, and the nonlinear frequencies set the limit.
double default_dt(int N);

struct EvolutionConfig {
  Scheme scheme = Scheme::ip_rk4;
  double dt = 0.0;  // 0 selects default_dt(N)
  double t0 = 0.0;
  double t1 = 1.0;  // may be below t0 for backward integration
  int save_stride = 1;
  bool nonlinear = true;
  bool record_energy = true;
  double blowup_factor = 1e3;  // abort when the l2 norm exceeds this multiple
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SpectralField> states;
  std::vector<double> mass;
  std::vector<double> energy;       // H_N, empty if not recorded
  std::vector<double> gauge_phase;  // B(t) = int_{t0}^t A[W^{2r}(u)]
  bool gauged = false;
  int r = 1;
  int N = 1;
  double dt = 0.0;  // integrator step actually used (signed)
  double m_star = 0.0;
  std::vector<std::string> warnings;

  std::size_t size() const { return states.size(); }
};

// Single-field integrator shared by evolve and by solvers that must advance
// linear equations in lockstep with a nonlinear trajectory. For the RK4 scheme
// step() can report the four stage arguments (u_n, u_2, u_3, u_4) at the
// times t, t+h/2, t+h/2, t+h.
class FieldStepper {
 public:
  FieldStepper(const WickContext& ctx, Scheme scheme, bool gauged, double m_star, double h, const SpectralField& u0,
               bool nonlinear = true);
  ~FieldStepper();
  FieldStepper(const FieldStepper&) = delete;
  FieldStepper& operator=(const FieldStepper&) = delete;

  // Advances u by h; returns A[W^{2r}(u)] at the start of the step.
  double step(SpectralField& u, std::array<SpectralField, 4>* stages = nullptr);
  double wick_mean(const SpectralField& u);
  // Constant frequency moved into the integrating factor.
  double shift() const;
  const std::vector<cplx>& half_phase() const;
  const std::vector<cplx>& full_phase() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SpectralField rhs_truncated(const SpectralField& u, const WickContext& ctx);
SpectralField rhs_gauged(const SpectralField& v, const WickContext& ctx, double m_star);

Trajectory evolve(const SpectralField& u0, const WickContext& ctx, const EvolutionConfig& cfg, bool gauged);
// Integrates forward to +T and backward to -T from data at t = 0 and joins the
// two halves into one trajectory on [-T, T].
Trajectory evolve_symmetric(const SpectralField& u0, const WickContext& ctx, double T, double dt, int save_stride,
                            bool gauged, bool nonlinear = true);

enum class PhaseSource { integrator, saved_grid };

// v(t) = u(t) exp(i (r+1) B(t)). With PhaseSource::integrator the phase
// integral recorded at every integrator step is used; otherwise it is rebuilt
// from the saved frames by Simpson's rule.
Trajectory gauge_forward(const Trajectory& traj_u, const WickContext& ctx,
                         PhaseSource src = PhaseSource::integrator);
Trajectory gauge_inverse(const Trajectory& traj_v, const WickContext& ctx,
                         PhaseSource src = PhaseSource::integrator);

// Cumulative Simpson integral of samples f on a uniform grid of step h.
std::vector<double> cumulative_simpson(const std::vector<double>& f, double h);

struct ConservationReport {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> energy;
  std::vector<double> mass_drift;    // relative to the initial value
  std::vector<double> energy_drift;  // relative to the initial value
  double max_mass_drift = 0;
  double max_energy_drift = 0;
  double mass_drift_rate = 0;    // max drift per unit time
  double energy_drift_rate = 0;  // max drift per unit time
};

ConservationReport conservation_report(const Trajectory& traj);

}  // namespace wnls
