#pragma once

// Shape-adaptive reconstruction.
//
// Each pixel's first-PC score is estimated along 8 rays with uniform
// directional kernels of every candidate length. The ICI rule picks, per
// direction, the longest kernel whose confidence intervals still share a
// common point; the filled octagon spanned by the 8 chosen ray ends is the
// pixel's shape-adaptive region. The pixel is then replaced by the mean of
// the region's spectra weighted by their (non-negative) Pearson correlation
// with it.

#include "dsirc/core.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace dsirc {

inline constexpr int kDirections = 8;

struct GridOffset {
  int drow = 0;
  int dcol = 0;

  friend bool operator==(const GridOffset&, const GridOffset&) = default;
};

/// Unit steps of the 8 rays, counter-clockwise from east in 45 degree increments
/// (row index grows downwards, so "north" is drow = -1).
inline constexpr std::array<GridOffset, kDirections> kDirectionSteps{{
    {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1},
}};

/// Directional kernel: `direction` indexes kDirectionSteps (0..7).
struct LpaKernel {
  int direction = 0;
  int length = 1;
  std::vector<GridOffset> offsets;
  std::vector<double> weights;

  double l2_norm() const;
};

/// Kernels for every (direction, candidate length) pair.
class LpaKernelTable {
 public:
  explicit LpaKernelTable(std::vector<int> lengths);

  const std::vector<int>& lengths() const { return lengths_; }
  const LpaKernel& kernel(int direction, std::size_t length_index) const {
    return kernels_[static_cast<std::size_t>(direction) * lengths_.size() + length_index];
  }

 private:
  std::vector<int> lengths_;
  std::vector<LpaKernel> kernels_;
};

/// Order-0 (uniform) kernels: offsets s * step for s = 0..l-1, weights 1/l.
LpaKernelTable build_lpa_kernels(std::span<const int> lengths);

struct LpaEstimate {
  double value = 0.0;
  /// l2 norm of the kernel weights that contributed.
  double gnorm = 0.0;
};

/// Kernel-weighted sum of the field along the ray from `center`.
///
/// Samples past the image border reuse the last in-bounds pixel on the ray.
LpaEstimate lpa_estimate(const PcScalarField& field, const LpaKernel& kernel, PixelCoord center);

struct IciConfig {
  double tau = 2.0;
  double sigma = 0.0;
  std::vector<int> lengths{1, 2, 3, 5, 7, 9};

  /// Throws ConfigError unless tau > 0, sigma >= 0 and lengths strictly increase from >= 1.
  void validate() const;
};

/// Longest candidate whose interval [v - tau*sigma*gnorm, v + tau*sigma*gnorm]
/// still intersects all intervals of the shorter candidates.
///
/// `estimates[j]` belongs to `config.lengths[j]`.
int ici_select_length(std::span<const LpaEstimate> estimates, const IciConfig& config);

struct SaRegion {
  PixelCoord center;
  std::array<int, kDirections> dir_lengths{};
  /// Row-major pixel indices in ascending order.
  std::vector<int> members;
};

/// In-bounds pixels inside the closed convex hull of center + (l_m - 1) * step_m.
SaRegion build_sa_region(PixelCoord center, const std::array<int, kDirections>& dir_lengths, int height,
                         int width);

/// Pearson-weighted mean of the region spectra around region.center.
///
/// Negative correlations are clipped to zero; a spectrum with zero variance
/// gets weight 0 except for the center itself, which always has weight 1.
Vector reconstruct_pixel(const PixelCloud& cloud, const SaRegion& region);

/// Robust noise level of the field: MAD of horizontal first differences / (0.6745 * sqrt 2).
///
/// Falls back to vertical differences on single-column images; 0 for a single pixel.
double estimate_noise_sigma(const PcScalarField& field);

struct SarConfig {
  double tau = 2.0;
  std::vector<int> lengths{1, 2, 3, 5, 7, 9};
  /// Noise level of the PC field; estimated with estimate_noise_sigma when empty.
  std::optional<double> sigma;
};

/// Directional ICI lengths of every pixel plus the sigma that produced them.
struct SarLayout {
  double sigma = 0.0;
  std::vector<std::array<int, kDirections>> dir_lengths;
};

SarLayout sar_layout(const PixelCloud& cloud, const SarConfig& config);

/// Pearson-weighted reconstruction of every pixel over its shape-adaptive region.
PixelCloud sar_reconstruct(const PixelCloud& cloud, const SarLayout& layout);

/// Shape-adaptive reconstruction of a full-grid cloud; coordinates are unchanged.
PixelCloud sar(const PixelCloud& cloud, const SarConfig& config = {});

}  // namespace dsirc
