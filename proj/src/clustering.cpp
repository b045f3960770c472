#include "dsirc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace dsirc {

namespace {

constexpr int kMaxLloydIterations = 300;

// Pixels sorted by zeta descending, ties to the smaller index.
std::vector<int> zeta_rank_order(const Vector& zeta) {
  std::vector<int> order(zeta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return zeta[a] > zeta[b]; });
  return order;
}

double farthest_distance(const DiffusionMap& map, int x) {
  double best = 0.0;
  for (int y = 0; y < map.size(); ++y) best = std::max(best, map.squared_distance(x, y));
  return std::sqrt(best);
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

}  // namespace

DensityField kde_density(const NeighborTable& neighbors, double sigma0) {
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw ConfigError("KDE bandwidth sigma0 must be positive");
  DensityField d;
  d.f.resize(neighbors.n);
  const double inv = 1.0 / (sigma0 * sigma0);
  for (int i = 0; i < neighbors.n; ++i) {
    double sum = 0.0;
    for (double sq : neighbors.sq_distances(i)) sum += std::exp(-sq * inv);
    d.f[i] = sum;
  }
  const double top = d.f.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("kde_density: every density underflowed to 0; increase sigma0");
  d.fhat = d.f / top;
  return d;
}

DensityField kde_density(const PixelCloud& cloud, int k_n, double sigma0) {
  return kde_density(knn_search(cloud.spectra, k_n), sigma0);
}

double median_knn_bandwidth(const NeighborTable& neighbors) {
  std::vector<double> kth(neighbors.n);
  for (int i = 0; i < neighbors.n; ++i) kth[i] = std::sqrt(neighbors.sq_distances(i).back());
  const double m = median(kth);
  if (m > 0.0) return m;
  double smallest = std::numeric_limits<double>::infinity();
  for (double d : kth) {
    if (d > 0.0) smallest = std::min(smallest, d);
  }
  return std::isfinite(smallest) ? smallest : 1.0;
}

Vector zeta(const DensityField& density, const PurityField& purity) {
  if (density.fhat.size() != purity.etahat.size()) throw ConfigError("zeta: density and purity sizes differ");
  Vector z(density.fhat.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double f = density.fhat[i], e = purity.etahat[i];
    z[i] = (f + e) > 0.0 ? 2.0 * f * e / (f + e) : 0.0;
  }
  return z;
}

Vector dt_values(const DiffusionMap& map, const Vector& zeta) {
  const int n = map.size();
  if (zeta.size() != n) throw ConfigError("dt_values: zeta size does not match the diffusion map");
  Vector dt(n);
  if (n == 0) return dt;

  const std::vector<int> order = zeta_rank_order(zeta);
  int lowest = 0;
  for (int i = 1; i < n; ++i) {
    if (zeta[i] < zeta[lowest]) lowest = i;
  }
  for (int r = 0; r < n; ++r) {
    const int x = order[r];
    if (x == lowest || r == 0) {
      dt[x] = farthest_distance(map, x);
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (int q = 0; q < r; ++q) best = std::min(best, map.squared_distance(x, order[q]));
    dt[x] = std::sqrt(best);
  }
  return dt;
}

Vector dt_values(const DiffusionSystem& system, const Vector& zeta, double t) {
  return dt_values(DiffusionMap(system, t), zeta);
}

std::vector<int> select_modes(const Vector& zeta, const Vector& dt, int k) {
  const int n = static_cast<int>(zeta.size());
  if (dt.size() != n) throw ConfigError("select_modes: zeta and d_t sizes differ");
  if (k < 1 || k > n) {
    throw ConfigError("cluster count K = " + std::to_string(k) + " must lie in [1, N = " + std::to_string(n) + "]");
  }
  const Vector score = zeta.cwiseProduct(dt);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
  order.resize(k);
  return order;
}

Clustering propagate_labels(const DiffusionMap& map, const Vector& zeta, std::span<const int> modes) {
  const int n = map.size();
  if (zeta.size() != n) throw ConfigError("propagate_labels: zeta size does not match the diffusion map");
  if (modes.empty()) throw ConfigError("propagate_labels: at least one mode is required");

  Clustering out;
  out.labels.assign(n, 0);
  out.modes.assign(modes.begin(), modes.end());
  std::vector<int> labeled;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const int m = modes[k];
    if (m < 0 || m >= n) throw ConfigError("propagate_labels: mode index out of range");
    if (out.labels[m] != 0) throw ConfigError("propagate_labels: duplicate mode");
    out.labels[m] = static_cast<int>(k) + 1;
    labeled.push_back(m);
  }

  for (int x : zeta_rank_order(zeta)) {
    if (out.labels[x] != 0) continue;
    int best = -1;
    double best_d = 0.0;
    for (int y : labeled) {
      if (zeta[y] < zeta[x]) continue;
      const double d = map.squared_distance(x, y);
      if (best < 0 || d < best_d || (d == best_d && y < best)) {
        best = y;
        best_d = d;
      }
    }
    if (best < 0) {
      for (int m : modes) {
        const double d = map.squared_distance(x, m);
        if (best < 0 || d < best_d || (d == best_d && m < best)) {
          best = m;
          best_d = d;
        }
      }
    }
    out.labels[x] = out.labels[best];
    labeled.push_back(x);
  }
  return out;
}

Clustering propagate_labels(const DiffusionSystem& system, const Vector& zeta, std::span<const int> modes,
                            double t) {
  return propagate_labels(DiffusionMap(system, t), zeta, modes);
}

Clustering cluster_from_diffusion(const DiffusionSystem& system, const Vector& zeta, int k, double t) {
  const DiffusionMap map(system, t);
  const Vector dt = dt_values(map, zeta);
  const std::vector<int> modes = select_modes(zeta, dt, k);
  Clustering out = propagate_labels(map, zeta, modes);
  out.scores = zeta.cwiseProduct(dt);
  return out;
}

void DsircConfig::validate(int n) const {
  if (clusters < 1 || clusters > n) {
    throw ConfigError("cluster count K = " + std::to_string(clusters) + " must lie in [1, N = " +
                      std::to_string(n) + "]");
  }
  if (k_n < 1 || k_n >= n) {
    throw ConfigError("k_n = " + std::to_string(k_n) + " must satisfy 1 <= k_n < N = " + std::to_string(n));
  }
  if (sigma0 && !(*sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("diffusion time t must be >= 0");
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (endmembers && *endmembers < 1) throw ConfigError("endmember count must be >= 1");
  if (eigenpairs && (*eigenpairs < 1 || *eigenpairs > n)) throw ConfigError("eigenpair count must lie in [1, N]");
  IciConfig ici;
  ici.tau = sar.tau;
  ici.lengths = sar.lengths;
  ici.sigma = sar.sigma.value_or(0.0);
  ici.validate();
}

Clustering dsirc(const PixelCloud& input, const DsircConfig& config, DsircTrace* trace) {
  config.validate(input.size());
  const PixelCloud cloud = config.normalize ? normalize_spectra(input) : input;

  UnmixingOptions unmixing;
  unmixing.p = config.endmembers;
  unmixing.restarts = config.restarts;
  unmixing.seed = config.seed;
  const UnmixingModel model = unmix(cloud, unmixing);
  const PurityField pure = purity(model);

  const NeighborTable neighbors = knn_search(cloud.spectra, config.k_n);
  const double sigma0 = config.sigma0 ? *config.sigma0 : median_knn_bandwidth(neighbors);
  const Vector z = zeta(kde_density(neighbors, sigma0), pure);

  KnnGraph graph;
  double sar_sigma = 0.0;
  if (config.use_sar) {
    const SarLayout layout = sar_layout(cloud, config.sar);
    sar_sigma = layout.sigma;
    graph = knn_graph(sar_reconstruct(cloud, layout), config.k_n);
  } else {
    graph = knn_graph(neighbors);
  }

  const int m = config.eigenpairs ? *config.eigenpairs : default_eigenpair_count(cloud.size(), config.clusters);
  Clustering out = cluster_from_diffusion(diffusion_system(graph, m), z, config.clusters, config.t);

  if (trace) {
    trace->endmembers = model.p();
    trace->sigma0 = sigma0;
    trace->sar_sigma = sar_sigma;
    trace->eigenpairs = m;
    trace->zeta = z;
  }
  return out;
}

Clustering dvic(const PixelCloud& cloud, DsircConfig config, DsircTrace* trace) {
  config.use_sar = false;
  return dsirc(cloud, config, trace);
}

KMeansResult kmeans(const RowMatrix& points, int k, int restarts, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n) {
    throw ConfigError("cluster count K = " + std::to_string(k) + " must lie in [1, N = " + std::to_string(n) + "]");
  }
  if (restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");

  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n);
  std::vector<int> assign(n);

  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding
    Matrix centers(k, points.cols());
    std::vector<char> chosen(n, 0);
    const int first = std::uniform_int_distribution<int>(0, n - 1)(rng);
    centers.row(0) = points.row(first);
    chosen[first] = 1;
    for (int i = 0; i < n; ++i) dist[i] = (points.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
      int next = -1;
      if (total > 0.0) {
        double u = std::uniform_real_distribution<double>(0.0, total)(rng);
        for (int i = 0; i < n; ++i) {
          if (dist[i] <= 0.0) continue;
          next = i;
          u -= dist[i];
          if (u <= 0.0) break;
        }
      }
      if (next < 0) next = static_cast<int>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      centers.row(c) = points.row(next);
      chosen[next] = 1;
      for (int i = 0; i < n; ++i) dist[i] = std::min(dist[i], (points.row(i) - centers.row(c)).squaredNorm());
    }

    std::fill(assign.begin(), assign.end(), -1);
    double objective = 0.0;
    for (int it = 0; it < kMaxLloydIterations; ++it) {
      bool changed = false;
      objective = 0.0;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double d = (points.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double dc = (points.row(i) - centers.row(c)).squaredNorm();
          if (dc < d) {
            d = dc;
            arg = c;
          }
        }
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
        dist[i] = d;
        objective += d;
      }
      if (!changed || it + 1 == kMaxLloydIterations) break;

      Matrix sums = Matrix::Zero(k, points.cols());
      std::vector<int> counts(k, 0);
      for (int i = 0; i < n; ++i) {
        sums.row(assign[i]) += points.row(i);
        ++counts[assign[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          centers.row(c) = sums.row(c) / counts[c];
          continue;
        }
        // Empty cluster: move it onto the point worst served by its center.
        const int far = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        centers.row(c) = points.row(far);
        dist[far] = 0.0;
        assign[far] = -1;
      }
    }

    if (objective < best.objective) {
      best.objective = objective;
      best.centroids = centers;
      best.labels.resize(n);
      for (int i = 0; i < n; ++i) best.labels[i] = assign[i] + 1;
    }
  }
  return best;
}

Clustering kmeans_clustering(const PixelCloud& cloud, int k, int restarts, std::uint64_t seed) {
  const KMeansResult km = kmeans(cloud.spectra, k, restarts, seed);
  Clustering out;
  out.labels = km.labels;
  for (int c = 0; c < k; ++c) {
    int best = -1;
    double best_d = 0.0;
    for (int i = 0; i < cloud.size(); ++i) {
      if (km.labels[i] != c + 1) continue;
      const double d = (cloud.spectra.row(i) - km.centroids.row(c)).squaredNorm();
      if (best < 0 || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    if (best >= 0) out.modes.push_back(best);
  }
  return out;
}

RowMatrix spectral_embedding(const PixelCloud& cloud, int k, int k_n) {
  if (k < 1 || k > cloud.size()) throw ConfigError("spectral clustering: K must lie in [1, N]");
  const DiffusionSystem system = diffusion_system(knn_graph(cloud, k_n), k);
  return system.eigenvectors;
}

Clustering spectral_clustering(const PixelCloud& cloud, int k, int k_n, int restarts, std::uint64_t seed) {
  const RowMatrix embedding = spectral_embedding(cloud, k, k_n);
  const KMeansResult km = kmeans(embedding, k, restarts, seed);
  Clustering out;
  out.labels = km.labels;
  for (int c = 0; c < k; ++c) {
    int best = -1;
    double best_d = 0.0;
    for (int i = 0; i < cloud.size(); ++i) {
      if (km.labels[i] != c + 1) continue;
      const double d = (embedding.row(i) - km.centroids.row(c)).squaredNorm();
      if (best < 0 || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    if (best >= 0) out.modes.push_back(best);
  }
  return out;
}

}  // namespace dsirc
