#include "jumpnls/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace jumpnls {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// FFTW plans are created once per (dimension, N, direction) and executed
// through the new-array interface, which is safe to call concurrently.
class PlanCache {
 public:
  fftw_plan get(int dim, std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(dim, n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = dim == 1 ? n : n * n;
    std::vector<cplx> scratch(total);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = dim == 1
                         ? fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, flags)
                         : fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf, sign, flags);
    if (plan == nullptr) throw std::runtime_error("fftw: plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void execute(const GridSpec& grid, std::span<cplx> data, int sign) {
  if (data.size() != grid.size()) throw DomainError("transform: buffer size does not match grid");
  fftw_plan plan = plan_cache().get(grid.dimension(), grid.points(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw DomainError(std::string(what) + ": grid mismatch");
}

}  // namespace

GridSpec::GridSpec(int dimension, std::size_t points, double half_width)
    : dim_(dimension), n_(points), half_width_(half_width) {
  if (dimension != 1 && dimension != 2) throw DomainError("GridSpec: dimension must be 1 or 2");
  if (points < 8 || !std::has_single_bit(points))
    throw DomainError("GridSpec: points per axis must be a power of two >= 8");
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw DomainError("GridSpec: half-width must be positive");
}

double GridSpec::cell_volume() const { return dim_ == 1 ? mesh() : mesh() * mesh(); }

std::size_t GridSpec::size() const { return dim_ == 1 ? n_ : n_ * n_; }

double GridSpec::frequency(std::size_t k) const {
  auto signed_k = static_cast<std::ptrdiff_t>(k);
  if (k >= n_ / 2) signed_k -= static_cast<std::ptrdiff_t>(n_);
  return static_cast<double>(signed_k) / (2.0 * half_width_);
}

double GridSpec::radius_squared(std::size_t flat) const {
  if (dim_ == 1) {
    double x = coordinate(flat);
    return x * x;
  }
  double x = coordinate(flat / n_);
  double y = coordinate(flat % n_);
  return x * x + y * y;
}

double GridSpec::frequency_squared(std::size_t flat) const {
  if (dim_ == 1) {
    double k = frequency(flat);
    return k * k;
  }
  double kx = frequency(flat / n_);
  double ky = frequency(flat % n_);
  return kx * kx + ky * ky;
}

bool GridSpec::on_boundary(std::size_t flat) const {
  auto edge = [this](std::size_t j) { return j == 0 || j == n_ - 1; };
  if (dim_ == 1) return edge(flat);
  return edge(flat / n_) || edge(flat % n_);
}

ComplexField::ComplexField(GridSpec grid) : grid_(grid), values_(grid.size()) {}

ComplexField::ComplexField(GridSpec grid, std::vector<cplx> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw DomainError("ComplexField: value count must equal N^d");
}

bool ComplexField::is_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

void ComplexField::require_finite(const char* where) const {
  if (!is_finite()) throw InvalidStateError(std::string(where) + ": field contains non-finite values");
}

FourierMultiplier::FourierMultiplier(GridSpec grid, std::vector<cplx> symbol)
    : grid_(grid), symbol_(std::move(symbol)) {
  if (symbol_.size() != grid_.size()) throw DomainError("FourierMultiplier: symbol size must equal N^d");
}

FourierMultiplier FourierMultiplier::free_group(const GridSpec& grid, double t) {
  std::vector<cplx> symbol(grid.size());
  const double c = two_pi * two_pi * t;
  for (std::size_t i = 0; i < symbol.size(); ++i) symbol[i] = std::polar(1.0, c * grid.frequency_squared(i));
  return {grid, std::move(symbol)};
}

FourierMultiplier FourierMultiplier::sobolev_weight(const GridSpec& grid, double s) {
  std::vector<cplx> symbol(grid.size());
  for (std::size_t i = 0; i < symbol.size(); ++i)
    symbol[i] = std::pow(1.0 + two_pi * two_pi * grid.frequency_squared(i), 0.5 * s);
  return {grid, std::move(symbol)};
}

ComplexField FourierMultiplier::apply(const ComplexField& u) const {
  require_same_grid(grid_, u.grid(), "FourierMultiplier::apply");
  ComplexField out = u;
  forward_transform(grid_, out.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= symbol_[i];
  inverse_transform(grid_, out.values());
  return out;
}

void forward_transform(const GridSpec& grid, std::span<cplx> data) { execute(grid, data, FFTW_FORWARD); }

void inverse_transform(const GridSpec& grid, std::span<cplx> data) {
  execute(grid, data, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(grid.size());
  for (auto& z : data) z *= scale;
}

ComplexField to_fourier(const ComplexField& u) {
  ComplexField out = u;
  forward_transform(out.grid(), out.values());
  return out;
}

ComplexField from_fourier(const ComplexField& spectrum) {
  ComplexField out = spectrum;
  inverse_transform(out.grid(), out.values());
  return out;
}

ComplexField free_propagate(const ComplexField& u, double t) {
  u.require_finite("free_propagate");
  if (t == 0.0) return u;
  return FourierMultiplier::free_group(u.grid(), t).apply(u);
}

double lp_norm(const ComplexField& u, double p) {
  if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
  u.require_finite("lp_norm");
  if (std::isinf(p)) {
    double m = 0.0;
    for (cplx z : u.values()) m = std::max(m, std::abs(z));
    return m;
  }
  double sum = 0.0;
  if (p == 2.0) {
    for (cplx z : u.values()) sum += std::norm(z);
    return std::sqrt(sum * u.grid().cell_volume());
  }
  for (cplx z : u.values()) sum += std::pow(std::abs(z), p);
  return std::pow(sum * u.grid().cell_volume(), 1.0 / p);
}

double sobolev_norm(const ComplexField& u, double s) {
  u.require_finite("sobolev_norm");
  const GridSpec& g = u.grid();
  ComplexField spec = to_fourier(u);
  double sum = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i)
    sum += std::pow(1.0 + two_pi * two_pi * g.frequency_squared(i), s) * std::norm(spec[i]);
  return std::sqrt(sum * g.cell_volume() / static_cast<double>(g.size()));
}

std::vector<ComplexField> gradient_field(const ComplexField& u) {
  u.require_finite("gradient_field");
  const GridSpec& g = u.grid();
  const std::size_t n = g.points();
  ComplexField spec = to_fourier(u);
  std::vector<ComplexField> out;
  for (int axis = 0; axis < g.dimension(); ++axis) {
    ComplexField d = spec;
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::size_t k = g.dimension() == 1 ? i : (axis == 0 ? i / n : i % n);
      d[i] *= k == n / 2 ? cplx{} : cplx(0.0, two_pi * g.frequency(k));
    }
    inverse_transform(g, d.values());
    out.push_back(std::move(d));
  }
  return out;
}

double relative_l2_distance(const ComplexField& a, const ComplexField& b) {
  require_same_grid(a.grid(), b.grid(), "relative_l2_distance");
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += std::norm(a[i] - b[i]);
    ref += std::norm(b[i]);
  }
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff * a.grid().cell_volume());
}

double boundary_mass_fraction(const ComplexField& u) {
  const GridSpec& g = u.grid();
  double edge = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double m = std::norm(u[i]);
    total += m;
    if (g.on_boundary(i)) edge += m;
  }
  return total > 0.0 ? edge / total : 0.0;
}

namespace {

constexpr char field_magic[8] = {'J', 'N', 'L', 'S', 'F', 'L', 'D', '1'};

static_assert(std::endian::native == std::endian::little, "binary field I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_field(const ComplexField& u, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_field: cannot open " + path.string());
  os.write(field_magic, sizeof field_magic);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(u.grid().dimension()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(u.grid().points()));
  put<double>(os, u.grid().half_width());
  put<std::uint64_t>(os, 0);
  for (cplx z : u.values()) {
    put<double>(os, z.real());
    put<double>(os, z.imag());
  }
  if (!os) throw std::runtime_error("write_field: write failed for " + path.string());
}

ComplexField read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_field: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, field_magic, sizeof magic) != 0)
    throw std::runtime_error("read_field: bad magic in " + path.string());
  auto dim = take<std::uint32_t>(is);
  auto n = take<std::uint32_t>(is);
  auto half_width = take<double>(is);
  (void)take<std::uint64_t>(is);
  GridSpec grid(static_cast<int>(dim), n, half_width);
  std::vector<cplx> values(grid.size());
  for (auto& z : values) {
    double re = take<double>(is);
    double im = take<double>(is);
    z = {re, im};
  }
  if (!is) throw std::runtime_error("read_field: truncated payload in " + path.string());
  ComplexField u(grid, std::move(values));
  u.require_finite("read_field");
  return u;
}

}  // namespace jumpnls
