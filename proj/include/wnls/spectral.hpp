#pragma once

#include <cstddef>
#include <cstdlib>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wnls/common.hpp"

namespace wnls {

struct Wavenumber {
  int kx = 0;
  int ky = 0;

  int norm2() const { return kx * kx + ky * ky; }
  // <k>^2 = |k|^2 + 1, always a positive integer.
  int bracket2() const { return norm2() + 1; }
  double bracket() const;

  friend bool operator==(Wavenumber, Wavenumber) = default;
  friend Wavenumber operator+(Wavenumber a, Wavenumber b) { return {a.kx + b.kx, a.ky + b.ky}; }
  friend Wavenumber operator-(Wavenumber a, Wavenumber b) { return {a.kx - b.kx, a.ky - b.ky}; }
  friend Wavenumber operator-(Wavenumber a) { return {-a.kx, -a.ky}; }
};

// <k> <= N, decided in integers.
inline bool in_shell(Wavenumber k, int N) { return k.bracket2() <= N * N; }
// N/2 < <k> <= N.
inline bool in_band(Wavenumber k, int N) { return in_shell(k, N) && 4 * k.bracket2() > N * N; }

// Half width K of the dense storage square [-K,K]^2: ceil(sqrt(N^2-1)).
int storage_half_width(int N);
// Largest |kx| actually present in the shell: floor(sqrt(N^2-1)).
int support_radius(int N);

// Shell modes in storage order (kx outer, ky inner).
std::vector<Wavenumber> shell_modes(int N);
std::vector<Wavenumber> band_modes(int N);

class SpectralField {
 public:
  SpectralField() : SpectralField(1) {}
  explicit SpectralField(int cutoff);

  static SpectralField single_mode(int cutoff, Wavenumber k, cplx amplitude);

  int cutoff() const { return cutoff_; }
  int half_width() const { return K_; }
  int side() const { return 2 * K_ + 1; }

  bool stores(Wavenumber k) const { return std::abs(k.kx) <= K_ && std::abs(k.ky) <= K_; }
  std::size_t index(Wavenumber k) const {
    return static_cast<std::size_t>(k.kx + K_) * side() + static_cast<std::size_t>(k.ky + K_);
  }
  Wavenumber mode_at(std::size_t idx) const {
    return {static_cast<int>(idx / side()) - K_, static_cast<int>(idx % side()) - K_};
  }

  // Zero outside the shell.
  cplx operator[](Wavenumber k) const;
  // Throws std::out_of_range if k is outside the shell.
  void set(Wavenumber k, cplx value);

  std::span<cplx> data() { return coeffs_; }
  std::span<const cplx> data() const { return coeffs_; }

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(cplx s);
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(cplx s, SpectralField a) { return a *= s; }

  // a += s * b
  void axpy(cplx s, const SpectralField& b);

 private:
  int cutoff_;
  int K_;
  std::vector<cplx> coeffs_;
};

SpectralField project(const SpectralField& u, int N);
// Same coefficients, larger cutoff (zero padding). N must be >= u.cutoff().
SpectralField embed(const SpectralField& u, int N);
SpectralField delta_band(const SpectralField& u, int N);
cplx mean(const SpectralField& u);
// sum_k |u_k|^2, which is the space mean of |u|^2.
double mass(const SpectralField& u);
// sum_k conj(a_k) b_k
cplx inner(const SpectralField& a, const SpectralField& b);
double sobolev_norm(const SpectralField& u, double s);
double max_abs_diff(const SpectralField& a, const SpectralField& b);
SpectralField linear_flow(const SpectralField& u, double t);

struct PhysicalGrid {
  int M = 0;
  std::vector<cplx> values;  // row-major, x1 outer

  cplx& at(int i1, int i2) { return values[static_cast<std::size_t>(i1) * M + i2]; }
  cplx at(int i1, int i2) const { return values[static_cast<std::size_t>(i1) * M + i2]; }
};

enum class GridRule { exact, fast };

// Smallest n' >= n of the form 2^a 3^b 5^c.
int fft_friendly(int n);

// Grid size making a pointwise product exact on the retained modes. The inputs
// have support radii summing to input_radius; the result is read on modes of
// radius <= output_radius. Exactness needs M >= input_radius + output_radius + 1.
// The fast rule takes the 3/2 size of the output box and aliases higher products.
int grid_size(int input_radius, int output_radius, GridRule rule = GridRule::exact);
// Degree-q product of a cutoff-N_in field read back at cutoff N_out.
int grid_size_for_degree(int N_in, int degree, int N_out, GridRule rule = GridRule::exact);
// Throws AliasingError when M is below the exact threshold.
void require_dealiased(int M, int input_radius, int output_radius);

PhysicalGrid to_physical(const SpectralField& u, int M);
SpectralField to_spectral(const PhysicalGrid& g, int N);

// Low-level helpers used by the evaluation kernels: scatter spectral
// coefficients into an M*M buffer (wrapping indices) and gather them back.
void scatter_to_grid(const SpectralField& u, int M, cplx* grid);
void gather_from_grid(const cplx* grid, int M, SpectralField& out);

// Per-thread cached FFTW plans. Plans are made with FFTW_ESTIMATE so that the
// chosen algorithm, and hence every rounding, is the same on each run.
class Fft2d {
 public:
  static Fft2d& get(int M);
  int size() const { return M_; }
  // spectral -> physical, u(x) = sum_k u_k e^{ik.x}
  void backward(cplx* data) const;
  // physical -> spectral including the 1/M^2 factor
  void forward(cplx* data) const;
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

 private:
  explicit Fft2d(int M);
  int M_;
  void* fwd_;
  void* bwd_;
};

class Fft1d {
 public:
  static Fft1d& get(int n);
  int size() const { return n_; }
  // X_m = sum_j x_j e^{-2 pi i jm/n}, unnormalized
  void forward(cplx* data) const;
  ~Fft1d();
  Fft1d(const Fft1d&) = delete;
  Fft1d& operator=(const Fft1d&) = delete;

 private:
  explicit Fft1d(int n);
  int n_;
  void* fwd_;
};

// Binary field format: "WNLS", u32 version, u32 cutoff, u32 side, then side*side
// little-endian f64 (re, im) pairs in row-major order over [-K,K]^2.
inline constexpr std::uint32_t kFieldFormatVersion = 1;
inline constexpr const char* kNormalizationTag = "torus-mean: u_k = (2pi)^-2 int e^{-ik.x} u dx";

void write_field(std::ostream& os, const SpectralField& u);
SpectralField read_field(std::istream& is);
// Writes path and a JSON sidecar path + ".json".
void write_field_file(const std::string& path, const std::vector<SpectralField>& frames);
std::vector<SpectralField> read_field_file(const std::string& path);

}  // namespace wnls
