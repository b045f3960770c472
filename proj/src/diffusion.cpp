#include "dsirc/diffusion.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dsirc {

namespace {

constexpr double kLanczosBreakdown = 1e-12;
constexpr std::uint64_t kLanczosSeed = 0x9e3779b97f4a7c15ULL;

// Index order of Ritz values: largest magnitude first, positive before negative.
std::vector<int> magnitude_order(const Vector& values) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(values[a]), mb = std::abs(values[b]);
    if (ma != mb) return ma > mb;
    return values[a] > values[b];
  });
  return order;
}

}  // namespace

NeighborTable knn_search(const RowMatrix& points, int k) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k >= n) {
    throw ConfigError("nearest-neighbor count must satisfy 1 <= k < N (k = " + std::to_string(k) +
                      ", N = " + std::to_string(n) + ")");
  }
  NeighborTable table;
  table.n = n;
  table.k = k;
  table.indices.resize(static_cast<std::size_t>(n) * k);
  table.sq_dists.resize(static_cast<std::size_t>(n) * k);

  std::vector<double> dist(n);
  std::vector<int> order(n - 1);
  for (int i = 0; i < n; ++i) {
    const auto xi = points.row(i);
    for (int j = 0; j < n; ++j) dist[j] = (points.row(j) - xi).squaredNorm();
    for (int j = 0, o = 0; j < n; ++j) {
      if (j != i) order[o++] = j;
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    });
    for (int r = 0; r < k; ++r) {
      table.indices[static_cast<std::size_t>(i) * k + r] = order[r];
      table.sq_dists[static_cast<std::size_t>(i) * k + r] = dist[order[r]];
    }
  }
  return table;
}

KnnGraph knn_graph(const NeighborTable& neighbors) {
  std::vector<Eigen::Triplet<double>> edges;
  edges.reserve(neighbors.indices.size() * 2);
  for (int i = 0; i < neighbors.n; ++i) {
    for (int j : neighbors.neighbors(i)) {
      edges.emplace_back(i, j, 1.0);
      edges.emplace_back(j, i, 1.0);
    }
  }
  KnnGraph graph;
  graph.n = neighbors.n;
  graph.k_n = neighbors.k;
  graph.adjacency.resize(neighbors.n, neighbors.n);
  graph.adjacency.setFromTriplets(edges.begin(), edges.end(), [](double a, double b) { return std::max(a, b); });
  graph.adjacency.makeCompressed();
  return graph;
}

KnnGraph knn_graph(const PixelCloud& cloud, int k_n) { return knn_graph(knn_search(cloud.spectra, k_n)); }

int count_components(const KnnGraph& graph) {
  std::vector<int> component(graph.n, -1);
  std::vector<int> stack;
  int count = 0;
  for (int s = 0; s < graph.n; ++s) {
    if (component[s] >= 0) continue;
    component[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(graph.adjacency, u); it; ++it) {
        const int v = static_cast<int>(it.col());
        if (it.value() != 0.0 && component[v] < 0) {
          component[v] = count;
          stack.push_back(v);
        }
      }
    }
    ++count;
  }
  return count;
}

int default_eigenpair_count(int n, int clusters) { return std::min(n, std::max(2 * clusters, 50)); }

SymmetricEigenpairs lanczos_largest_magnitude(const SparseMatrix& matrix, int count, double tol) {
  const int n = static_cast<int>(matrix.rows());
  if (matrix.cols() != n) throw ConfigError("lanczos: matrix must be square");
  if (count < 1 || count > n) throw ConfigError("lanczos: eigenpair count must lie in [1, N]");

  std::mt19937_64 rng(kLanczosSeed);
  std::normal_distribution<double> normal(0.0, 1.0);

  int capacity = std::min(n, std::max(2 * count + 20, 64));
  Matrix basis(n, capacity);
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples basis vectors j and j + 1

  auto fresh_vector = [&](int m) {
    for (int attempt = 0; attempt < 16; ++attempt) {
      Vector v(n);
      for (int i = 0; i < n; ++i) v[i] = normal(rng);
      for (int pass = 0; pass < 2 && m > 0; ++pass) v -= basis.leftCols(m) * (basis.leftCols(m).transpose() * v);
      const double norm = v.norm();
      if (norm > 1e-8) return Vector(v / norm);
    }
    throw NumericalError("lanczos: cannot extend the Krylov basis");
  };

  auto ritz = [&](int m) {
    Vector diag(m), sub(std::max(m - 1, 0));
    for (int i = 0; i < m; ++i) diag[i] = alpha[i];
    for (int i = 0; i + 1 < m; ++i) sub[i] = beta[i];
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) throw NumericalError("lanczos: tridiagonal eigensolver failed");
    return eig;
  };

  basis.col(0) = fresh_vector(0);
  int m = 0;
  int next_check = count;
  for (;;) {
    const int j = m;
    Vector w = matrix * basis.col(j);
    const double a = basis.col(j).dot(w);
    w -= a * basis.col(j);
    if (j > 0) w -= beta[j - 1] * basis.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
    alpha.push_back(a);
    m = j + 1;
    if (m == n) break;

    const double b = w.norm();
    if (m == capacity) {
      capacity = std::min(n, 2 * capacity);
      basis.conservativeResize(Eigen::NoChange, capacity);
    }
    if (b <= kLanczosBreakdown * std::max(1.0, std::abs(a))) {
      // Invariant subspace found; restart in its orthogonal complement.
      beta.push_back(0.0);
      basis.col(m) = fresh_vector(m);
    } else {
      beta.push_back(b);
      basis.col(m) = w / b;
    }

    if (m >= next_check) {
      const auto eig = ritz(m);
      const auto order = magnitude_order(eig.eigenvalues());
      const double scale = std::max(std::abs(eig.eigenvalues()[order[0]]), 1e-300);
      bool converged = true;
      for (int k = 0; k < count && converged; ++k) {
        const double residual = std::abs(beta[m - 1] * eig.eigenvectors()(m - 1, order[k]));
        converged = residual <= tol * scale;
      }
      if (converged) break;
      next_check = m + std::max(5, m / 8);
    }
  }

  const auto eig = ritz(m);
  const auto order = magnitude_order(eig.eigenvalues());
  SymmetricEigenpairs out;
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (int k = 0; k < count; ++k) {
    out.values[k] = eig.eigenvalues()[order[k]];
    out.vectors.col(k) = (basis.leftCols(m) * eig.eigenvectors().col(order[k])).normalized();
  }
  return out;
}

DiffusionSystem diffusion_system(const KnnGraph& graph, int num_eigenpairs) {
  const int n = graph.n;
  if (n < 1) throw ConfigError("diffusion_system: empty graph");
  if (num_eigenpairs < 1 || num_eigenpairs > n) {
    throw ConfigError("diffusion_system: eigenpair count must lie in [1, N]");
  }
  const int components = count_components(graph);
  if (components > 1) {
    throw NumericalError("diffusion_system: the KNN graph has " + std::to_string(components) +
                         " connected components; the random walk is not irreducible. Increase k_n.");
  }

  DiffusionSystem sys;
  sys.graph = graph;
  sys.degrees.resize(n);
  for (int i = 0; i < n; ++i) sys.degrees[i] = graph.adjacency.row(i).sum();
  const double volume = sys.degrees.sum();
  sys.pi = sys.degrees / volume;

  const Vector inv_sqrt = sys.degrees.cwiseSqrt().cwiseInverse();
  SparseMatrix sym = graph.adjacency;
  for (int i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(sym, i); it; ++it) it.valueRef() *= inv_sqrt[i] * inv_sqrt[it.col()];
  }

  const SymmetricEigenpairs eig = lanczos_largest_magnitude(sym, num_eigenpairs, 1e-10);
  sys.eigenvalues = eig.values.cwiseMax(-1.0).cwiseMin(1.0);
  sys.eigenvectors.resize(n, num_eigenpairs);
  for (int k = 0; k < num_eigenpairs; ++k) {
    Vector psi = inv_sqrt.cwiseProduct(eig.vectors.col(k));
    psi /= std::sqrt(sys.pi.dot(psi.cwiseAbs2()));
    Eigen::Index largest = 0;
    if (k == 0) {
      if (psi.sum() < 0) psi = -psi;
    } else {
      psi.cwiseAbs().maxCoeff(&largest);
      if (psi[largest] < 0) psi = -psi;
    }
    sys.eigenvectors.col(k) = psi;
  }
  return sys;
}

double diffusion_distance(const DiffusionSystem& system, int i, int j, double t) {
  const int n = system.size();
  if (i < 0 || i >= n || j < 0 || j >= n) throw ConfigError("diffusion_distance: index out of range");
  if (!(t >= 0.0)) throw ConfigError("diffusion_distance: t must be >= 0");
  double sum = 0.0;
  for (int k = 0; k < system.eigenpair_count(); ++k) {
    const double scale = std::pow(std::abs(system.eigenvalues[k]), t);
    const double d = scale * system.eigenvectors(i, k) - scale * system.eigenvectors(j, k);
    sum += d * d;
  }
  return std::sqrt(sum);
}

int nearest_in_diffusion(const DiffusionSystem& system, int i, std::span<const int> candidates, double t) {
  if (candidates.empty()) throw ConfigError("nearest_in_diffusion: empty candidate set");
  const DiffusionMap map(system, t);
  if (i < 0 || i >= map.size()) throw ConfigError("nearest_in_diffusion: index out of range");
  int best = -1;
  double best_d = 0.0;
  for (int c : candidates) {
    if (c < 0 || c >= map.size()) throw ConfigError("nearest_in_diffusion: candidate out of range");
    const double d = map.squared_distance(i, c);
    if (best < 0 || d < best_d || (d == best_d && c < best)) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

DiffusionMap::DiffusionMap(const DiffusionSystem& system, double t) : t_(t) {
  if (!(t >= 0.0)) throw ConfigError("diffusion time t must be >= 0");
  coords_.resize(system.size(), system.eigenpair_count());
  for (int k = 0; k < system.eigenpair_count(); ++k) {
    const double scale = std::pow(std::abs(system.eigenvalues[k]), t);
    for (int i = 0; i < system.size(); ++i) coords_(i, k) = scale * system.eigenvectors(i, k);
  }
}

}  // namespace dsirc
