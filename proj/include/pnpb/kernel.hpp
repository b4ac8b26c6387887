#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pnpb/grid.hpp"

namespace pnpb {

/// Green's functions available for the field convolution phi = K * rho.
enum class KernelFamily {
  LaplacePsi,        ///< -Delta Psi = delta
  ScreenedW,         ///< (I - lambda^2 Delta) W = delta
  FourPBikK,         ///< nu^2 (lambda^2 Delta - I) Delta K = delta, K = (Psi - lambda^2 W)/nu^2
  Screened1DPicard,  ///< lambda/(2 nu^2) exp(-|x|/lambda), decaying 1D kernel
  Log2D,             ///< -log(r)/(2 pi nu^2)
  Slab1DPicard,      ///< Screened1DPicard(x) / slab_width, constant in y (2D only)
  Constant,          ///< K == constant (test hook)
};

std::string_view to_string(KernelFamily family);
std::optional<KernelFamily> parse_kernel_family(std::string_view name);

struct KernelSpec {
  KernelFamily family = KernelFamily::Screened1DPicard;
  int dim = 1;
  double lambda = 1.0;
  double nu = 1.0;
  double constant = 0.0;    // Constant family value
  double slab_width = 1.0;  // Slab1DPicard normalisation

  /// Throws InvalidParameter when the parameters do not suit the family.
  void check() const;
  /// True when the family has a non-removable singularity at r = 0 in this dimension.
  bool singular_at_origin() const;
};

/// Closed-form value of a radially symmetric kernel at distance r >= 0.
double eval_kernel(const KernelSpec& spec, double r);
/// Kernel value at a displacement (x, y); y ignored in 1D.
double eval_kernel_at(const KernelSpec& spec, double x, double y = 0.0);

/// Hat-weighted convolution tensor T_m for offsets m in [-2N, 2N]^dim.
struct KernelTable {
  int dim = 1;
  int n = 0;  ///< grid N; offsets span -2N..2N per axis
  std::vector<double> values;

  int extent() const noexcept { return 4 * n + 1; }
  double at(int mx, int my = 0) const noexcept {
    const std::size_t ix = static_cast<std::size_t>(mx + 2 * n);
    if (dim == 1) return values[ix];
    return values[ix + static_cast<std::size_t>(extent()) * static_cast<std::size_t>(my + 2 * n)];
  }
};

/// T_m = dx^dim * integral over [-1,1]^dim of K((m - s) dx) * hat(s) ds.
KernelTable build_tensor(const KernelSpec& spec, const Grid& grid);

enum class ConvolutionPath { Fast, Direct };

/// Applies phi_j = sum_p density_p T_{j-p}. The fast path is a zero-padded FFT
/// (linear, never circular) with the kernel spectrum precomputed once.
class Convolver {
 public:
  explicit Convolver(KernelTable table);
  ~Convolver();
  Convolver(Convolver&&) noexcept;
  Convolver& operator=(Convolver&&) noexcept;
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  const KernelTable& table() const noexcept { return table_; }
  std::size_t size() const noexcept;

  std::vector<double> apply(std::span<const double> density,
                            ConvolutionPath path = ConvolutionPath::Fast) const;

 private:
  struct Fft;
  KernelTable table_;
  std::unique_ptr<Fft> fft_;
};

std::vector<double> convolve_direct(const KernelTable& table, std::span<const double> density);
std::vector<double> convolve(const KernelTable& table, std::span<const double> density,
                             ConvolutionPath path = ConvolutionPath::Fast);

/// Binary table cache: six little-endian float64 header values
/// (family, dim, lambda, nu, N, dx) followed by the row-major float64 entries.
void save_kernel_table(const std::filesystem::path& path, const KernelSpec& spec, const Grid& grid,
                       const KernelTable& table);
/// Returns nothing when the file is missing or its header does not match.
std::optional<KernelTable> load_kernel_table(const std::filesystem::path& path, const KernelSpec& spec,
                                             const Grid& grid);
/// build_tensor with a read-through cache in `cache_dir`.
KernelTable cached_tensor(const KernelSpec& spec, const Grid& grid, const std::filesystem::path& cache_dir);

}  // namespace pnpb
