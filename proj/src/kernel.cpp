#include "pnpb/kernel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "pnpb/error.hpp"

namespace pnpb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;

// Quadrature error target for individual tensor pieces (relative to the
// piece's L1 norm, floored at 1); entries need 1e-10 absolute.
constexpr double kQuadTol = 1e-13;
constexpr double kQuadAccept = 1e-11;

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 20, kQuadTol, &error, &l1);
  if (!std::isfinite(value) || error > kQuadAccept * std::max(l1, 1.0)) {
    throw Error(ErrorKind::QuadratureNonConvergence,
                fmt::format("integral on [{}, {}] stalled with error estimate {:.3g}", a, b, error));
  }
  return value;
}

// ln(r) + K0(r/lambda), finite at r = 0; power series for small argument.
double log_plus_k0(double r, double lambda) {
  const double z = r / lambda;
  if (z >= 1.0) return std::log(r) + std::cyl_bessel_k(0.0, z);
  const double q = 0.25 * z * z;
  const double log_half_z = z > 0.0 ? std::log(0.5 * z) : 0.0;
  double sum = std::log(2.0 * lambda) - kEulerGamma;
  if (z == 0.0) return sum;
  double term = 1.0;
  double harmonic = 0.0;
  for (int k = 1; k < 40; ++k) {
    term *= q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    const double add = term * (harmonic - log_half_z - kEulerGamma);
    sum += add;
    if (std::abs(add) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// (1 - exp(-x)) / x, finite at x = 0.
double one_minus_exp_over(double x) {
  if (x < 1e-8) return 1.0 - 0.5 * x;
  return -std::expm1(-x) / x;
}

double picard_1d(double r, double lambda, double nu) {
  return lambda / (2.0 * nu * nu) * std::exp(-r / lambda);
}

int family_code(KernelFamily family) { return static_cast<int>(family); }

std::size_t good_fft_size(std::size_t minimum) {
  for (std::size_t n = minimum;; ++n) {
    std::size_t m = n;
    for (std::size_t p : {2u, 3u, 5u, 7u}) {
      while (m % p == 0) m /= p;
    }
    if (m == 1) return n;
  }
}

std::mutex& fftw_planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

// ---- 2D tensor pieces -------------------------------------------------------

// Integral over the unit-side quadrant whose corner is the kernel singularity.
// Local coordinates (a, b) in [0,1]^2 with hat weight (wa0 + wa1 a)(wb0 + wb1 b).
double singular_corner_quadrant(const KernelSpec& spec, double h, double wa0, double wa1, double wb0,
                                double wb1) {
  const bool log_only = spec.family == KernelFamily::Log2D ||
                        (spec.family == KernelFamily::LaplacePsi && spec.dim == 2);
  const double log_coef = spec.family == KernelFamily::Log2D ? -1.0 / (2.0 * kPi * spec.nu * spec.nu)
                                                             : -1.0 / (2.0 * kPi);
  const double log_h = std::log(h);

  auto radial = [&](double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double reach = theta <= 0.25 * kPi ? 1.0 / c : 1.0 / s;
    // weight as polynomial in rho: c0 + c1 rho + c2 rho^2
    const std::array<double, 3> coef{wa0 * wb0, wa0 * wb1 * s + wa1 * wb0 * c, wa1 * wb1 * c * s};
    double total = 0.0;
    if (log_only) {
      // integral_0^R rho^(k+1) (ln h + ln rho) d rho, exact
      for (int k = 0; k < 3; ++k) {
        const double p = k + 2.0;
        const double rp = std::pow(reach, p);
        total += coef[k] * (rp / p * log_h + rp * (std::log(reach) / p - 1.0 / (p * p)));
      }
      return log_coef * total;
    }
    return integrate(
        [&](double rho) {
          const double poly = coef[0] + rho * (coef[1] + rho * coef[2]);
          return eval_kernel(spec, rho * h) * poly * rho;
        },
        0.0, reach);
  };
  return integrate(radial, 0.0, 0.25 * kPi) + integrate(radial, 0.25 * kPi, 0.5 * kPi);
}

double tensor_entry_2d(const KernelSpec& spec, double h, int mx, int my) {
  double total = 0.0;
  // Quadrants of the bilinear hat support: s in [sx0, sx0+1], t in [sy0, sy0+1].
  for (int qx = -1; qx <= 0; ++qx) {
    for (int qy = -1; qy <= 0; ++qy) {
      const double s0 = qx;
      const double t0 = qy;
      auto hat = [](double u) { return 1.0 - std::abs(u); };
      const bool corner_x = (mx == qx || mx == qx + 1);
      const bool corner_y = (my == qy || my == qy + 1);
      if (spec.singular_at_origin() || spec.family == KernelFamily::FourPBikK) {
        if (corner_x && corner_y) {
          // Orient local axes to start at the singular corner (mx, my).
          const double dir_x = (mx == qx) ? 1.0 : -1.0;
          const double dir_y = (my == qy) ? 1.0 : -1.0;
          // hat(mx + dir*a) is linear in a on the quadrant.
          const double hx0 = hat(mx);
          const double hx1 = hat(mx + dir_x) - hx0;
          const double hy0 = hat(my);
          const double hy1 = hat(my + dir_y) - hy0;
          total += singular_corner_quadrant(spec, h, hx0, hx1, hy0, hy1);
          continue;
        }
      }
      total += integrate(
          [&](double s) {
            const double inner = integrate(
                [&](double t) { return eval_kernel_at(spec, (mx - s) * h, (my - t) * h) * hat(t); }, t0,
                t0 + 1.0);
            return inner * hat(s);
          },
          s0, s0 + 1.0);
    }
  }
  return h * h * total;
}

double tensor_entry_1d(const KernelSpec& spec, double h, int m) {
  auto integrand = [&](double s) { return eval_kernel_at(spec, (m - s) * h) * (1.0 - std::abs(s)); };
  // Kinks of the integrand: hat at -1, 0, 1 and |x| at s = m.
  std::vector<double> breaks{-1.0, 0.0, 1.0};
  if (m > -1 && m < 1) breaks.push_back(m);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) total += integrate(integrand, breaks[k], breaks[k + 1]);
  return h * total;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::LaplacePsi: return "laplace-psi";
    case KernelFamily::ScreenedW: return "screened-w";
    case KernelFamily::FourPBikK: return "fourpbik-k";
    case KernelFamily::Screened1DPicard: return "screened-1d-picard";
    case KernelFamily::Log2D: return "log-2d";
    case KernelFamily::Slab1DPicard: return "slab-1d-picard";
    case KernelFamily::Constant: return "constant";
  }
  return "unknown";
}

std::optional<KernelFamily> parse_kernel_family(std::string_view name) {
  for (auto family : {KernelFamily::LaplacePsi, KernelFamily::ScreenedW, KernelFamily::FourPBikK,
                      KernelFamily::Screened1DPicard, KernelFamily::Log2D, KernelFamily::Slab1DPicard,
                      KernelFamily::Constant}) {
    if (to_string(family) == name) return family;
  }
  return std::nullopt;
}

void KernelSpec::check() const {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("kernel {}: {}", to_string(family), what));
  };
  if (dim < 1 || dim > 3) fail("dimension must be 1, 2 or 3");
  switch (family) {
    case KernelFamily::ScreenedW:
    case KernelFamily::FourPBikK:
    case KernelFamily::Screened1DPicard:
    case KernelFamily::Slab1DPicard:
      if (!(lambda > 0.0)) fail("lambda must be positive");
      break;
    default:
      break;
  }
  switch (family) {
    case KernelFamily::FourPBikK:
    case KernelFamily::Screened1DPicard:
    case KernelFamily::Slab1DPicard:
    case KernelFamily::Log2D:
      if (!(nu > 0.0)) fail("nu must be positive");
      break;
    default:
      break;
  }
  if (family == KernelFamily::Screened1DPicard && dim != 1) fail("only defined in 1D");
  if (family == KernelFamily::Log2D && dim != 2) fail("only defined in 2D");
  if (family == KernelFamily::Slab1DPicard && dim != 2) fail("only defined in 2D");
  if (family == KernelFamily::Slab1DPicard && !(slab_width > 0.0)) fail("slab width must be positive");
}

bool KernelSpec::singular_at_origin() const {
  switch (family) {
    case KernelFamily::LaplacePsi:
    case KernelFamily::ScreenedW:
      return dim >= 2;
    case KernelFamily::Log2D:
      return true;
    default:
      return false;
  }
}

double eval_kernel(const KernelSpec& spec, double r) {
  if (!(r >= 0.0)) throw Error(ErrorKind::InvalidParameter, "kernel distance must be non-negative");
  if (r == 0.0 && spec.singular_at_origin()) {
    throw Error(ErrorKind::SingularAtZero, fmt::format("{} in {}D at r = 0", to_string(spec.family), spec.dim));
  }
  const double lam = spec.lambda;
  const double nu2 = spec.nu * spec.nu;
  switch (spec.family) {
    case KernelFamily::LaplacePsi:
      if (spec.dim == 1) return -0.5 * r;
      if (spec.dim == 2) return -std::log(r) / (2.0 * kPi);
      return 1.0 / (4.0 * kPi * r);
    case KernelFamily::ScreenedW:
      if (spec.dim == 1) return std::exp(-r / lam) / (2.0 * lam);
      if (spec.dim == 2) return std::cyl_bessel_k(0.0, r / lam) / (2.0 * kPi * lam * lam);
      return std::exp(-r / lam) / (4.0 * kPi * lam * lam * r);
    case KernelFamily::FourPBikK:
      if (spec.dim == 1) return -(r + lam * std::exp(-r / lam)) / (2.0 * nu2);
      if (spec.dim == 2) return -log_plus_k0(r, lam) / (2.0 * kPi * nu2);
      return one_minus_exp_over(r / lam) / (4.0 * kPi * nu2 * lam);
    case KernelFamily::Screened1DPicard:
      return picard_1d(r, lam, spec.nu);
    case KernelFamily::Log2D:
      return -std::log(r) / (2.0 * kPi * nu2);
    case KernelFamily::Slab1DPicard:
      return picard_1d(r, lam, spec.nu) / spec.slab_width;
    case KernelFamily::Constant:
      return spec.constant;
  }
  return 0.0;
}

double eval_kernel_at(const KernelSpec& spec, double x, double y) {
  if (spec.family == KernelFamily::Slab1DPicard) return eval_kernel(spec, std::abs(x));
  if (spec.dim == 1) return eval_kernel(spec, std::abs(x));
  return eval_kernel(spec, std::hypot(x, y));
}

KernelTable build_tensor(const KernelSpec& spec, const Grid& grid) {
  spec.check();
  if (spec.dim != grid.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("kernel is {}D but grid is {}D", spec.dim, grid.dim()));
  }
  const double h = grid.dx();
  KernelTable table;
  table.dim = grid.dim();
  table.n = grid.n();
  const int span = 2 * grid.n();
  const auto extent = static_cast<std::size_t>(table.extent());

  if (spec.dim == 1) {
    table.values.resize(extent);
    for (int m = 0; m <= span; ++m) {
      const double value = tensor_entry_1d(spec, h, m);
      table.values[static_cast<std::size_t>(span + m)] = value;
      table.values[static_cast<std::size_t>(span - m)] = value;
    }
    return table;
  }

  table.values.resize(extent * extent);
  auto store = [&](int mx, int my, double value) {
    for (int sx : {-1, 1}) {
      for (int sy : {-1, 1}) {
        const auto ix = static_cast<std::size_t>(span + sx * mx);
        const auto iy = static_cast<std::size_t>(span + sy * my);
        table.values[ix + extent * iy] = value;
      }
    }
  };

  if (spec.family == KernelFamily::Slab1DPicard || spec.family == KernelFamily::Constant) {
    // Separable in (x, y): the y factor is h * integral of the hat = h.
    KernelSpec line = spec;
    line.dim = 1;
    if (spec.family == KernelFamily::Slab1DPicard) line.family = KernelFamily::Screened1DPicard;
    const double scale = spec.family == KernelFamily::Slab1DPicard ? h / spec.slab_width : h;
    for (int mx = 0; mx <= span; ++mx) {
      const double value = tensor_entry_1d(line, h, mx) * scale;
      for (int my = 0; my <= span; ++my) store(mx, my, value);
    }
    return table;
  }

  for (int mx = 0; mx <= span; ++mx) {
    for (int my = 0; my <= mx; ++my) {
      const double value = tensor_entry_2d(spec, h, mx, my);
      store(mx, my, value);
      store(my, mx, value);
    }
  }
  return table;
}

// ---- convolution ------------------------------------------------------------

struct Convolver::Fft {
  int dim = 1;
  std::size_t n = 0;   // nodes per axis
  std::size_t px = 0;  // padded sizes
  std::size_t py = 1;
  std::size_t spectrum_size = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> kernel_spectrum;

  ~Fft() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Convolver::Convolver(KernelTable table) : table_(std::move(table)), fft_(std::make_unique<Fft>()) {
  auto& f = *fft_;
  f.dim = table_.dim;
  f.n = static_cast<std::size_t>(2 * table_.n + 1);
  f.px = good_fft_size(3 * f.n - 2);
  f.py = f.dim == 2 ? f.px : 1;
  const std::size_t half = f.px / 2 + 1;
  f.spectrum_size = half * f.py;
  const std::size_t real_size = f.px * f.py;

  auto in = alloc_real(real_size);
  auto out = alloc_complex(f.spectrum_size);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (f.dim == 1) {
      f.forward = fftw_plan_dft_r2c_1d(static_cast<int>(f.px), in.get(), out.get(), FFTW_ESTIMATE);
      f.backward = fftw_plan_dft_c2r_1d(static_cast<int>(f.px), out.get(), in.get(), FFTW_ESTIMATE);
    } else {
      f.forward = fftw_plan_dft_r2c_2d(static_cast<int>(f.py), static_cast<int>(f.px), in.get(), out.get(),
                                       FFTW_ESTIMATE);
      f.backward = fftw_plan_dft_c2r_2d(static_cast<int>(f.py), static_cast<int>(f.px), out.get(), in.get(),
                                        FFTW_ESTIMATE);
    }
  }

  // Kernel offsets -(n-1)..(n-1) placed at 0..2n-2 on each axis.
  std::fill(in.get(), in.get() + real_size, 0.0);
  const int span = 2 * table_.n;
  const std::size_t width = 2 * f.n - 1;
  const std::size_t rows = f.dim == 2 ? width : 1;
  for (std::size_t iy = 0; iy < rows; ++iy) {
    for (std::size_t ix = 0; ix < width; ++ix) {
      const int mx = static_cast<int>(ix) - span;
      const int my = f.dim == 2 ? static_cast<int>(iy) - span : 0;
      in[ix + f.px * iy] = table_.at(mx, my);
    }
  }
  fftw_execute_dft_r2c(f.forward, in.get(), out.get());
  f.kernel_spectrum.resize(f.spectrum_size);
  for (std::size_t k = 0; k < f.spectrum_size; ++k) f.kernel_spectrum[k] = {out[k][0], out[k][1]};
}

Convolver::~Convolver() = default;
Convolver::Convolver(Convolver&&) noexcept = default;
Convolver& Convolver::operator=(Convolver&&) noexcept = default;

std::size_t Convolver::size() const noexcept {
  return table_.dim == 1 ? fft_->n : fft_->n * fft_->n;
}

std::vector<double> Convolver::apply(std::span<const double> density, ConvolutionPath path) const {
  if (density.size() != size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("density has {} cells, grid has {}", density.size(), size()));
  }
  if (path == ConvolutionPath::Direct) return convolve_direct(table_, density);

  const auto& f = *fft_;
  const std::size_t real_size = f.px * f.py;
  auto in = alloc_real(real_size);
  auto spec = alloc_complex(f.spectrum_size);
  std::fill(in.get(), in.get() + real_size, 0.0);
  const std::size_t rows = f.dim == 2 ? f.n : 1;
  for (std::size_t iy = 0; iy < rows; ++iy) {
    for (std::size_t ix = 0; ix < f.n; ++ix) in[ix + f.px * iy] = density[ix + f.n * iy];
  }
  fftw_execute_dft_r2c(f.forward, in.get(), spec.get());
  for (std::size_t k = 0; k < f.spectrum_size; ++k) {
    const std::complex<double> v = std::complex<double>(spec[k][0], spec[k][1]) * f.kernel_spectrum[k];
    spec[k][0] = v.real();
    spec[k][1] = v.imag();
  }
  fftw_execute_dft_c2r(f.backward, spec.get(), in.get());

  const double scale = 1.0 / static_cast<double>(real_size);
  std::vector<double> result(size());
  const std::size_t shift = f.n - 1;
  for (std::size_t iy = 0; iy < rows; ++iy) {
    const std::size_t sy = f.dim == 2 ? iy + shift : 0;
    for (std::size_t ix = 0; ix < f.n; ++ix) result[ix + f.n * iy] = in[ix + shift + f.px * sy] * scale;
  }
  return result;
}

std::vector<double> convolve_direct(const KernelTable& table, std::span<const double> density) {
  const int n = 2 * table.n + 1;
  const std::size_t cells = table.dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
  if (density.size() != cells) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("density has {} cells, grid has {}", density.size(), cells));
  }
  std::vector<double> out(cells, 0.0);
  if (table.dim == 1) {
    // Summed by distance, pairing j - d with j + d, so mirrored input gives a bitwise mirrored result.
    for (int j = 0; j < n; ++j) {
      double acc = density[static_cast<std::size_t>(j)] * table.at(0);
      for (int d = 1; d < n; ++d) {
        const double left = j - d >= 0 ? density[static_cast<std::size_t>(j - d)] : 0.0;
        const double right = j + d < n ? density[static_cast<std::size_t>(j + d)] : 0.0;
        acc += (left + right) * table.at(d);
      }
      out[static_cast<std::size_t>(j)] = acc;
    }
    return out;
  }
  for (int jy = 0; jy < n; ++jy) {
    for (int jx = 0; jx < n; ++jx) {
      double acc = 0.0;
      for (int py = 0; py < n; ++py) {
        for (int px = 0; px < n; ++px) {
          acc += density[static_cast<std::size_t>(px + n * py)] * table.at(jx - px, jy - py);
        }
      }
      out[static_cast<std::size_t>(jx + n * jy)] = acc;
    }
  }
  return out;
}

std::vector<double> convolve(const KernelTable& table, std::span<const double> density, ConvolutionPath path) {
  if (path == ConvolutionPath::Direct) return convolve_direct(table, density);
  return Convolver(table).apply(density, path);
}

// ---- cache ------------------------------------------------------------------

namespace {

void write_le(std::ostream& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  std::array<char, 8> bytes{};
  for (int k = 0; k < 8; ++k) bytes[static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xffu);
  out.write(bytes.data(), 8);
}

bool read_le(std::istream& in, double& value) {
  std::array<unsigned char, 8> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 8)) return false;
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(k)]) << (8 * k);
  value = std::bit_cast<double>(bits);
  return true;
}

std::array<double, 6> cache_header(const KernelSpec& spec, const Grid& grid) {
  return {static_cast<double>(family_code(spec.family)), static_cast<double>(spec.dim), spec.lambda, spec.nu,
          static_cast<double>(grid.n()), grid.dx()};
}

}  // namespace

void save_kernel_table(const std::filesystem::path& path, const KernelSpec& spec, const Grid& grid,
                       const KernelTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write kernel cache " + path.string());
  for (double v : cache_header(spec, grid)) write_le(out, v);
  for (double v : table.values) write_le(out, v);
  if (!out) throw Error(ErrorKind::IoError, "short write to kernel cache " + path.string());
}

std::optional<KernelTable> load_kernel_table(const std::filesystem::path& path, const KernelSpec& spec,
                                             const Grid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const auto expected = cache_header(spec, grid);
  for (double want : expected) {
    double got = 0.0;
    if (!read_le(in, got) || std::bit_cast<std::uint64_t>(got) != std::bit_cast<std::uint64_t>(want)) {
      return std::nullopt;
    }
  }
  KernelTable table;
  table.dim = grid.dim();
  table.n = grid.n();
  const auto extent = static_cast<std::size_t>(table.extent());
  table.values.resize(table.dim == 1 ? extent : extent * extent);
  for (double& v : table.values) {
    if (!read_le(in, v)) return std::nullopt;
  }
  char extra = 0;
  if (in.read(&extra, 1)) return std::nullopt;
  return table;
}

KernelTable cached_tensor(const KernelSpec& spec, const Grid& grid, const std::filesystem::path& cache_dir) {
  // Constant and slab kernels carry an extra parameter the header does not key on.
  if (spec.family == KernelFamily::Constant || spec.family == KernelFamily::Slab1DPicard) {
    return build_tensor(spec, grid);
  }
  const auto file = cache_dir / fmt::format("kernel_{}_d{}_lam{:.17g}_nu{:.17g}_N{}.bin", to_string(spec.family),
                                            spec.dim, spec.lambda, spec.nu, grid.n());
  if (auto hit = load_kernel_table(file, spec, grid)) return *hit;
  auto table = build_tensor(spec, grid);
  std::filesystem::create_directories(cache_dir);
  save_kernel_table(file, spec, grid, table);
  return table;
}

}  // namespace pnpb
