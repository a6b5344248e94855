#include "wnls/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

#include <json.hpp>

namespace wnls {

static_assert(std::endian::native == std::endian::little,
              "field I/O writes host doubles directly and assumes little-endian");

double Wavenumber::bracket() const { return std::sqrt(static_cast<double>(bracket2())); }

namespace {

int isqrt(int n) {
  int r = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

void check_cutoff(int N) {
  if (N < 1) throw std::invalid_argument("cutoff must be >= 1");
}

}  // namespace

int support_radius(int N) {
  check_cutoff(N);
  return isqrt(N * N - 1);
}

int storage_half_width(int N) {
  check_cutoff(N);
  const int n = N * N - 1;
  const int r = isqrt(n);
  return r * r == n ? r : r + 1;
}

std::vector<Wavenumber> shell_modes(int N) {
  const int K = storage_half_width(N);
  std::vector<Wavenumber> out;
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      if (in_shell({kx, ky}, N)) out.push_back({kx, ky});
  return out;
}

std::vector<Wavenumber> band_modes(int N) {
  std::vector<Wavenumber> out;
  for (Wavenumber k : shell_modes(N))
    if (in_band(k, N)) out.push_back(k);
  return out;
}

SpectralField::SpectralField(int cutoff)
    : cutoff_(cutoff), K_(storage_half_width(cutoff)), coeffs_(static_cast<std::size_t>(side()) * side()) {}

SpectralField SpectralField::single_mode(int cutoff, Wavenumber k, cplx amplitude) {
  SpectralField u(cutoff);
  u.set(k, amplitude);
  return u;
}

cplx SpectralField::operator[](Wavenumber k) const {
  if (!in_shell(k, cutoff_)) return {};
  return coeffs_[index(k)];
}

void SpectralField::set(Wavenumber k, cplx value) {
  if (!in_shell(k, cutoff_)) throw std::out_of_range("mode outside the truncation shell");
  coeffs_[index(k)] = value;
}

namespace {
void require_same_cutoff(const SpectralField& a, const SpectralField& b) {
  if (a.cutoff() != b.cutoff()) throw std::invalid_argument("fields have different cutoffs");
}
}  // namespace

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  require_same_cutoff(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  require_same_cutoff(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(cplx s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

void SpectralField::axpy(cplx s, const SpectralField& b) {
  require_same_cutoff(*this, b);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * b.coeffs_[i];
}

SpectralField project(const SpectralField& u, int N) {
  check_cutoff(N);
  if (N >= u.cutoff()) return u;
  SpectralField out(N);
  const int K = out.half_width();
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      if (in_shell({kx, ky}, N)) out.data()[out.index({kx, ky})] = u.data()[u.index({kx, ky})];
  return out;
}

SpectralField embed(const SpectralField& u, int N) {
  if (N < u.cutoff()) throw std::invalid_argument("embed needs N >= cutoff");
  if (N == u.cutoff()) return u;
  SpectralField out(N);
  const int K = u.half_width();
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      out.data()[out.index({kx, ky})] = u.data()[u.index({kx, ky})];
  return out;
}

SpectralField delta_band(const SpectralField& u, int N) {
  SpectralField out = project(u, N);
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!in_band(out.mode_at(i), N)) d[i] = 0.0;
  return out;
}

cplx mean(const SpectralField& u) { return u[{0, 0}]; }

double mass(const SpectralField& u) {
  double s = 0.0;
  for (const cplx& c : u.data()) s += std::norm(c);
  return s;
}

cplx inner(const SpectralField& a, const SpectralField& b) {
  require_same_cutoff(a, b);
  cplx s = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) s += std::conj(da[i]) * db[i];
  return s;
}

double sobolev_norm(const SpectralField& u, double s) {
  double acc = 0.0;
  auto d = u.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) continue;
    acc += std::pow(static_cast<double>(u.mode_at(i).bracket2()), s) * std::norm(d[i]);
  }
  return std::sqrt(acc);
}

double max_abs_diff(const SpectralField& a, const SpectralField& b) {
  const int N = std::max(a.cutoff(), b.cutoff());
  const SpectralField ea = embed(a, N);
  const SpectralField eb = embed(b, N);
  double m = 0.0;
  for (std::size_t i = 0; i < ea.data().size(); ++i) m = std::max(m, std::abs(ea.data()[i] - eb.data()[i]));
  return m;
}

SpectralField linear_flow(const SpectralField& u, double t) {
  SpectralField out = u;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) continue;
    const double ph = -static_cast<double>(out.mode_at(i).norm2()) * t;
    d[i] *= cplx(std::cos(ph), std::sin(ph));
  }
  return out;
}

int fft_friendly(int n) {
  if (n < 1) n = 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

namespace {
int exact_threshold(int input_radius, int output_radius) {
  return std::max(input_radius + std::min(output_radius, input_radius) + 1, 2 * output_radius + 1);
}
}  // namespace

int grid_size(int input_radius, int output_radius, GridRule rule) {
  if (rule == GridRule::fast) {
    const int m = std::max(3 * output_radius + 1, 2 * output_radius + 1);
    return fft_friendly(std::min(m, exact_threshold(input_radius, output_radius)));
  }
  return fft_friendly(exact_threshold(input_radius, output_radius));
}

int grid_size_for_degree(int N_in, int degree, int N_out, GridRule rule) {
  return grid_size(degree * support_radius(N_in), support_radius(N_out), rule);
}

void require_dealiased(int M, int input_radius, int output_radius) {
  const int need = exact_threshold(input_radius, output_radius);
  if (M < need)
    throw AliasingError("grid size " + std::to_string(M) + " below exact threshold " + std::to_string(need));
}

namespace {
inline int wrap(int k, int M) { return k >= 0 ? k : k + M; }
}  // namespace

void scatter_to_grid(const SpectralField& u, int M, cplx* grid) {
  const int R = support_radius(u.cutoff());
  if (M < 2 * R + 1) throw AliasingError("grid too small to hold the field");
  std::fill(grid, grid + static_cast<std::size_t>(M) * M, cplx{});
  const auto d = u.data();
  const int K = u.half_width();
  const int side = u.side();
  for (int kx = -R; kx <= R; ++kx) {
    const std::size_t row = static_cast<std::size_t>(kx + K) * side;
    cplx* g = grid + static_cast<std::size_t>(wrap(kx, M)) * M;
    for (int ky = -R; ky <= R; ++ky) g[wrap(ky, M)] = d[row + ky + K];
  }
}

void gather_from_grid(const cplx* grid, int M, SpectralField& out) {
  const int R = support_radius(out.cutoff());
  if (M < 2 * R + 1) throw AliasingError("grid too small for the requested cutoff");
  auto d = out.data();
  const int K = out.half_width();
  const int side = out.side();
  const int N2 = out.cutoff() * out.cutoff();
  std::fill(d.begin(), d.end(), cplx{});
  for (int kx = -R; kx <= R; ++kx) {
    const std::size_t row = static_cast<std::size_t>(kx + K) * side;
    const cplx* g = grid + static_cast<std::size_t>(wrap(kx, M)) * M;
    for (int ky = -R; ky <= R; ++ky)
      if (kx * kx + ky * ky + 1 <= N2) d[row + ky + K] = g[wrap(ky, M)];
  }
}

PhysicalGrid to_physical(const SpectralField& u, int M) {
  PhysicalGrid g{M, std::vector<cplx>(static_cast<std::size_t>(M) * M)};
  scatter_to_grid(u, M, g.values.data());
  Fft2d::get(M).backward(g.values.data());
  return g;
}

SpectralField to_spectral(const PhysicalGrid& g, int N) {
  std::vector<cplx> buf = g.values;
  Fft2d::get(g.M).forward(buf.data());
  SpectralField out(N);
  gather_from_grid(buf.data(), g.M, out);
  return out;
}

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft2d::Fft2d(int M) : M_(M) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* buf = fftw_alloc_complex(static_cast<std::size_t>(M) * M);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_dft_2d(M, M, buf, buf, FFTW_FORWARD, flags);
  bwd_ = fftw_plan_dft_2d(M, M, buf, buf, FFTW_BACKWARD, flags);
  fftw_free(buf);
}

Fft2d::~Fft2d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

Fft2d& Fft2d::get(int M) {
  thread_local std::map<int, std::unique_ptr<Fft2d>> cache;
  auto& slot = cache[M];
  if (!slot) slot.reset(new Fft2d(M));
  return *slot;
}

void Fft2d::backward(cplx* data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(bwd_), p, p);
}

void Fft2d::forward(cplx* data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), p, p);
  const double s = 1.0 / (static_cast<double>(M_) * M_);
  const std::size_t n = static_cast<std::size_t>(M_) * M_;
  for (std::size_t i = 0; i < n; ++i) data[i] *= s;
}

Fft1d::Fft1d(int n) : n_(n) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
  fwd_ = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
}

Fft1d::~Fft1d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
}

Fft1d& Fft1d::get(int n) {
  thread_local std::map<int, std::unique_ptr<Fft1d>> cache;
  auto& slot = cache[n];
  if (!slot) slot.reset(new Fft1d(n));
  return *slot;
}

void Fft1d::forward(cplx* data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), p, p);
}

namespace {
void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
}  // namespace

void write_field(std::ostream& os, const SpectralField& u) {
  os.write("WNLS", 4);
  put_u32(os, kFieldFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(u.cutoff()));
  put_u32(os, static_cast<std::uint32_t>(u.side()));
  os.write(reinterpret_cast<const char*>(u.data().data()),
           static_cast<std::streamsize>(u.data().size() * sizeof(cplx)));
  if (!os) throw std::runtime_error("field write failed");
}

SpectralField read_field(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WNLS", 4) != 0) throw std::runtime_error("bad field magic");
  const std::uint32_t version = get_u32(is);
  if (version != kFieldFormatVersion) throw std::runtime_error("unsupported field format version");
  const int N = static_cast<int>(get_u32(is));
  const int side = static_cast<int>(get_u32(is));
  if (!is || N < 1) throw std::runtime_error("truncated field header");
  std::vector<cplx> raw(static_cast<std::size_t>(side) * side);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(cplx)));
  if (!is) throw std::runtime_error("truncated field payload");
  SpectralField u(N);
  const int Kf = (side - 1) / 2;
  for (int kx = -Kf; kx <= Kf; ++kx)
    for (int ky = -Kf; ky <= Kf; ++ky) {
      const cplx c = raw[static_cast<std::size_t>(kx + Kf) * side + (ky + Kf)];
      if (c == 0.0) continue;
      if (!in_shell({kx, ky}, N)) throw std::runtime_error("nonzero coefficient outside the shell");
      u.set({kx, ky}, c);
    }
  return u;
}

void write_field_file(const std::string& path, const std::vector<SpectralField>& frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  for (const auto& f : frames) write_field(os, f);
  nlohmann::json side;
  side["format"] = "WNLS";
  side["version"] = kFieldFormatVersion;
  side["normalization"] = kNormalizationTag;
  side["frames"] = frames.size();
  if (!frames.empty()) {
    side["cutoff"] = frames.front().cutoff();
    side["side"] = frames.front().side();
  }
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

std::vector<SpectralField> read_field_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<SpectralField> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_field(is));
  return out;
}

}  // namespace wnls
