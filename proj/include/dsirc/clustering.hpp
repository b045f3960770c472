#pragma once

// Mode-based diffusion clustering (DSIRC and its SaR-free ablation D-VIC)
// plus the K-means and spectral-clustering baselines.

#include "dsirc/core.hpp"
#include "dsirc/diffusion.hpp"
#include "dsirc/sar.hpp"
#include "dsirc/unmixing.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dsirc {

struct DensityField {
  Vector f;
  Vector fhat;
};

/// Gaussian KDE over each pixel's k nearest neighbors: f = sum exp(-d^2 / sigma0^2).
DensityField kde_density(const NeighborTable& neighbors, double sigma0);
DensityField kde_density(const PixelCloud& cloud, int k_n, double sigma0);

/// Median over pixels of the distance to the k-th neighbor.
///
/// Falls back to the smallest positive k-th neighbor distance when the median
/// is zero, and to 1 when every such distance is zero.
double median_knn_bandwidth(const NeighborTable& neighbors);

/// Harmonic mean of normalized density and normalized purity per pixel.
Vector zeta(const DensityField& density, const PurityField& purity);

/// Diffusion separation of each pixel from pixels ranked above it.
///
/// The rank order is zeta descending with ties to the smaller index. The
/// lowest-zeta pixel (smallest index among ties), and any pixel with nothing
/// ranked above it, gets its largest distance to any pixel; every other pixel
/// gets its smallest distance to a pixel ranked above it.
Vector dt_values(const DiffusionMap& map, const Vector& zeta);
Vector dt_values(const DiffusionSystem& system, const Vector& zeta, double t);

/// The K largest zeta * d_t (ties to the smaller index), in descending score
/// order; mode k receives label k + 1.
std::vector<int> select_modes(const Vector& zeta, const Vector& dt, int k);

struct Clustering {
  LabelMap labels;
  std::vector<int> modes;
  /// zeta * d_t for every pixel (empty for the baselines).
  Vector scores;
};

/// Labels non-modal pixels in order of non-increasing zeta with the label of
/// their diffusion-nearest labeled pixel of no smaller zeta; the top pixel
/// falls back to its diffusion-nearest mode when nothing qualifies.
Clustering propagate_labels(const DiffusionMap& map, const Vector& zeta, std::span<const int> modes);
Clustering propagate_labels(const DiffusionSystem& system, const Vector& zeta, std::span<const int> modes,
                            double t);

/// Modes and propagated labels for one diffusion time.
Clustering cluster_from_diffusion(const DiffusionSystem& system, const Vector& zeta, int k, double t);

struct DsircConfig {
  int clusters = 1;
  int k_n = 100;
  /// KDE bandwidth; median k_n-th neighbor distance when empty.
  std::optional<double> sigma0;
  double t = 30.0;
  SarConfig sar;
  /// false gives D-VIC.
  bool use_sar = true;
  /// Endmember count; HySime estimate when empty.
  std::optional<int> endmembers;
  int restarts = 10;
  std::uint64_t seed = 0;
  /// Retained eigenpairs; min(N, max(2K, 50)) when empty.
  std::optional<int> eigenpairs;
  /// Scale every spectrum to unit l2 norm before anything else.
  bool normalize = false;

  void validate(int n) const;
};

/// Intermediate quantities of a run, for reports and diagnostics.
struct DsircTrace {
  int endmembers = 0;
  double sigma0 = 0.0;
  double sar_sigma = 0.0;
  int eigenpairs = 0;
  Vector zeta;
};

/// Purity and density come from the input spectra; the graph, diffusion
/// distances, mode selection and propagation use the SaR reconstruction.
Clustering dsirc(const PixelCloud& cloud, const DsircConfig& config, DsircTrace* trace = nullptr);

/// dsirc with the reconstruction step replaced by the identity.
Clustering dvic(const PixelCloud& cloud, DsircConfig config, DsircTrace* trace = nullptr);

struct KMeansResult {
  LabelMap labels;  // 1..K
  Matrix centroids;  // K x dim
  double objective = 0.0;
};

/// Lloyd iterations from k-means++ seeding, best of `restarts` by objective.
KMeansResult kmeans(const RowMatrix& points, int k, int restarts, std::uint64_t seed);

Clustering kmeans_clustering(const PixelCloud& cloud, int k, int restarts, std::uint64_t seed);

/// K-means on the first K diffusion eigenvectors of the KNN graph.
Clustering spectral_clustering(const PixelCloud& cloud, int k, int k_n, int restarts = 10,
                               std::uint64_t seed = 0);

/// Rows of the first K diffusion eigenvectors (N x K).
RowMatrix spectral_embedding(const PixelCloud& cloud, int k, int k_n);

}  // namespace dsirc
