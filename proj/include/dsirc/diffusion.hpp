#pragma once

// Diffusion geometry on a symmetric k-nearest-neighbor graph of the pixels.

#include "dsirc/core.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <span>
#include <vector>

namespace dsirc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Exact k-nearest neighbors (self excluded, ties broken by smaller index).
struct NeighborTable {
  int n = 0;
  int k = 0;
  std::vector<int> indices;       // n * k, nearest first
  std::vector<double> sq_dists;   // matching squared l2 distances

  std::span<const int> neighbors(int i) const { return {indices.data() + static_cast<std::size_t>(i) * k, static_cast<std::size_t>(k)}; }
  std::span<const double> sq_distances(int i) const {
    return {sq_dists.data() + static_cast<std::size_t>(i) * k, static_cast<std::size_t>(k)};
  }
};

NeighborTable knn_search(const RowMatrix& points, int k);

/// Symmetric 0/1 adjacency: W_ij = 1 when j is among i's neighbors or vice versa.
struct KnnGraph {
  int n = 0;
  int k_n = 0;
  SparseMatrix adjacency;
};

KnnGraph knn_graph(const NeighborTable& neighbors);
KnnGraph knn_graph(const PixelCloud& cloud, int k_n);

/// Connected component count of the graph.
int count_components(const KnnGraph& graph);

/// Random walk P = D^-1 W with its stationary distribution and the M
/// eigenpairs of largest |lambda|. Eigenvectors are right eigenvectors of P,
/// orthonormal under the pi-weighted inner product.
struct DiffusionSystem {
  KnnGraph graph;
  Vector degrees;
  Vector pi;
  Vector eigenvalues;
  Matrix eigenvectors;  // N x M

  int size() const { return graph.n; }
  int eigenpair_count() const { return static_cast<int>(eigenvalues.size()); }
};

/// Throws NumericalError for disconnected graphs.
DiffusionSystem diffusion_system(const KnnGraph& graph, int num_eigenpairs);

/// Default truncation: min(N, max(2K, 50)).
int default_eigenpair_count(int n, int clusters);

struct SymmetricEigenpairs {
  Vector values;
  Matrix vectors;
};

/// `count` eigenpairs of largest magnitude of a sparse symmetric matrix by
/// Lanczos with full reorthogonalization; sorted by |lambda| descending.
///
/// Converged when every Ritz residual is below `tol` times the largest |Ritz value|.
SymmetricEigenpairs lanczos_largest_magnitude(const SparseMatrix& matrix, int count, double tol = 1e-10);

/// sqrt(sum_k (|lambda_k|^t psi_k(i) - |lambda_k|^t psi_k(j))^2) over the retained eigenpairs.
double diffusion_distance(const DiffusionSystem& system, int i, int j, double t);

/// Candidate closest to i in diffusion distance, ties to the smaller index.
int nearest_in_diffusion(const DiffusionSystem& system, int i, std::span<const int> candidates, double t);

/// Diffusion coordinates |lambda_k|^t psi_k(i) for one time t, so that
/// D_t(i, j) is a Euclidean distance between rows.
class DiffusionMap {
 public:
  DiffusionMap(const DiffusionSystem& system, double t);

  int size() const { return static_cast<int>(coords_.rows()); }
  double time() const { return t_; }
  const RowMatrix& coordinates() const { return coords_; }

  double distance(int i, int j) const { return std::sqrt(squared_distance(i, j)); }
  double squared_distance(int i, int j) const {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < coords_.cols(); ++k) {
      const double d = coords_(i, k) - coords_(j, k);
      sum += d * d;
    }
    return sum;
  }

 private:
  double t_;
  RowMatrix coords_;
};

}  // namespace dsirc
