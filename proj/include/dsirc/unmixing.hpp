#pragma once

// Blind linear unmixing: endmember count (HySime), endmember spectra (AVMAX),
// nonnegative abundances (Lawson-Hanson NNLS) and per-pixel purity.

#include "dsirc/core.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dsirc {

struct UnmixingModel {
  /// p x B, one endmember per row.
  Matrix endmembers;
  /// N x p, nonnegative.
  Matrix abundances;

  int p() const { return static_cast<int>(endmembers.rows()); }
};

struct PurityField {
  Vector eta;
  Vector etahat;
};

/// Signal subspace dimension by minimum-error subspace identification, clamped to [1, B-1].
///
/// Noise is estimated per band by ridge regression on the other bands; the
/// count is the number of signal-correlation eigendirections whose data power
/// exceeds twice their noise power.
int hysime(const PixelCloud& cloud);

struct AvmaxResult {
  Matrix endmembers;
  std::vector<int> indices;
  /// |det| of the edge matrix in the (p-1)-dim affine PCA subspace; 0 when p = 1.
  double volume = 0.0;
  /// Simplex volume after every accepted vertex replacement of the winning restart.
  std::vector<double> volume_trace;
};

/// Alternating volume maximization over the data points, best of `restarts` random starts.
AvmaxResult avmax(const PixelCloud& cloud, int p, int restarts, std::uint64_t seed);

/// Coordinates of the centered data on its top `dims` principal axes.
RowMatrix affine_pca_projection(const RowMatrix& spectra, int dims);

/// argmin_{a >= 0} || E^T a - x ||_2 by the Lawson-Hanson active-set method.
Vector nnls(const Matrix& endmembers, const Vector& x);

/// NNLS abundances of every pixel (N x p).
Matrix nnls_abundances(const Matrix& endmembers, const PixelCloud& cloud);

/// Purity from sum-normalized abundance rows; zero rows count as uniform.
PurityField purity(const Matrix& abundances);
inline PurityField purity(const UnmixingModel& model) { return purity(model.abundances); }

struct UnmixingOptions {
  /// Endmember count; estimated with hysime when empty.
  std::optional<int> p;
  int restarts = 10;
  std::uint64_t seed = 0;
};

UnmixingModel unmix(const PixelCloud& cloud, const UnmixingOptions& options = {});

}  // namespace dsirc
