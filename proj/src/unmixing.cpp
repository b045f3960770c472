#include "dsirc/unmixing.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace dsirc {

namespace {

constexpr double kHysimeRidge = 1e-6;
constexpr int kMaxAvmaxCycles = 1000;

struct PcaBasis {
  Eigen::RowVectorXd mean;
  Matrix axes;      // B x dims, descending variance
  Vector variances;  // all eigenvalues, descending
};

PcaBasis pca_basis(const RowMatrix& spectra, int dims) {
  PcaBasis basis;
  basis.mean = spectra.colwise().mean();
  const RowMatrix xc = spectra.rowwise() - basis.mean;
  const Matrix cov = (xc.transpose() * xc) / static_cast<double>(std::max<Eigen::Index>(spectra.rows() - 1, 1));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  basis.variances = eig.eigenvalues().reverse();
  basis.axes = eig.eigenvectors().rightCols(dims).rowwise().reverse();
  for (int k = 0; k < dims; ++k) {
    Eigen::Index largest = 0;
    basis.axes.col(k).cwiseAbs().maxCoeff(&largest);
    if (basis.axes(largest, k) < 0) basis.axes.col(k) *= -1.0;
  }
  return basis;
}

// Signed cofactors of column `col` of a square matrix.
Vector column_cofactors(const Matrix& m, int col) {
  const int n = static_cast<int>(m.rows());
  Vector c(n);
  if (n == 1) {
    c[0] = 1.0;
    return c;
  }
  Matrix minor(n - 1, n - 1);
  for (int r = 0; r < n; ++r) {
    for (int i = 0, mi = 0; i < n; ++i) {
      if (i == r) continue;
      for (int j = 0, mj = 0; j < n; ++j) {
        if (j == col) continue;
        minor(mi, mj++) = m(i, j);
      }
      ++mi;
    }
    const double sign = ((r + col) % 2 == 0) ? 1.0 : -1.0;
    c[r] = sign * minor.partialPivLu().determinant();
  }
  return c;
}

struct AvmaxRun {
  std::vector<int> indices;
  double volume = 0.0;
  std::vector<double> trace;
};

AvmaxRun avmax_from(const Matrix& augmented, std::vector<int> indices) {
  const int p = static_cast<int>(indices.size());
  const Eigen::Index n = augmented.cols();
  Matrix simplex(p, p);
  for (int k = 0; k < p; ++k) simplex.col(k) = augmented.col(indices[k]);

  AvmaxRun run;
  double volume = std::abs(simplex.partialPivLu().determinant());
  run.trace.push_back(volume);
  for (int cycle = 0; cycle < kMaxAvmaxCycles; ++cycle) {
    bool changed = false;
    for (int j = 0; j < p; ++j) {
      // The determinant is linear in column j, so every candidate costs one dot product.
      const Vector cof = column_cofactors(simplex, j);
      const Vector volumes = (cof.transpose() * augmented).cwiseAbs().transpose();
      const double current = std::abs(cof.dot(simplex.col(j)));
      Eigen::Index best = 0;
      double best_volume = volumes[0];
      for (Eigen::Index i = 1; i < n; ++i) {
        if (volumes[i] > best_volume) {
          best_volume = volumes[i];
          best = i;
        }
      }
      if (best_volume > 0.0 && best_volume > current * (1.0 + 1e-12)) {
        indices[j] = static_cast<int>(best);
        simplex.col(j) = augmented.col(best);
        volume = best_volume;
        run.trace.push_back(volume);
        changed = true;
      }
    }
    if (!changed) break;
  }
  run.indices = std::move(indices);
  run.volume = std::abs(simplex.partialPivLu().determinant());
  return run;
}

}  // namespace

int hysime(const PixelCloud& cloud) {
  const int b = cloud.bands();
  const int n = cloud.size();
  if (n < 2) throw ConfigError("hysime needs at least two pixels");
  if (b < 2) return 1;

  const Matrix y = cloud.spectra;
  const Matrix r = y.transpose() * y;
  for (int k = 0; k < b; ++k) {
    if (!(r(k, k) > 0.0)) {
      throw NumericalError("hysime: band " + std::to_string(k) +
                           " carries no energy, so the band covariance is degenerate; remove the band");
    }
  }
  const double ridge = kHysimeRidge * r.trace();

  // Noise of band k = residual of its ridge regression on every other band.
  Matrix noise(n, b);
  std::vector<int> others(b - 1);
  for (int k = 0; k < b; ++k) {
    for (int i = 0, o = 0; i < b; ++i) {
      if (i != k) others[o++] = i;
    }
    Matrix normal = r(others, others);
    normal.diagonal().array() += ridge;
    const Vector rhs = r(others, k);
    const Vector beta = normal.ldlt().solve(rhs);
    noise.col(k) = y.col(k) - y(Eigen::all, others) * beta;
  }

  // Minimum-error criterion: eigenvectors of the signal-estimate correlation,
  // band-wise (diagonal) noise powers.
  const Matrix signal = y - noise;
  const Matrix ry = r / static_cast<double>(n);
  const Matrix rx = (signal.transpose() * signal) / static_cast<double>(n);
  Vector rn = noise.colwise().squaredNorm().transpose() / static_cast<double>(n);
  rn.array() += rx.trace() / b / 1e10;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(rx);
  if (eig.info() != Eigen::Success) throw NumericalError("hysime: eigendecomposition failed");
  const Matrix& e = eig.eigenvectors();

  int count = 0;
  for (int k = 0; k < b; ++k) {
    const Vector ek = e.col(k);
    const double py = ek.dot(ry * ek);
    const double pn = ek.cwiseAbs2().dot(rn);
    if (-py + 2.0 * pn < 0.0) ++count;
  }
  return std::clamp(count, 1, b - 1);
}

RowMatrix affine_pca_projection(const RowMatrix& spectra, int dims) {
  if (dims < 0 || dims > spectra.cols()) throw ConfigError("affine_pca_projection: invalid dimension count");
  const PcaBasis basis = pca_basis(spectra, dims);
  return (spectra.rowwise() - basis.mean) * basis.axes;
}

AvmaxResult avmax(const PixelCloud& cloud, int p, int restarts, std::uint64_t seed) {
  const int n = cloud.size();
  if (p < 1) throw ConfigError("avmax: endmember count must be >= 1");
  if (p > n) throw ConfigError("avmax: endmember count " + std::to_string(p) + " exceeds pixel count " +
                               std::to_string(n));
  if (restarts < 1) throw ConfigError("avmax: restarts must be >= 1");

  AvmaxResult result;
  if (p == 1) {
    const Eigen::RowVectorXd mean = cloud.spectra.colwise().mean();
    Eigen::Index far = 0;
    (cloud.spectra.rowwise() - mean).rowwise().squaredNorm().maxCoeff(&far);
    result.indices = {static_cast<int>(far)};
    result.endmembers = cloud.spectra.row(far);
    result.volume_trace = {0.0};
    return result;
  }
  if (p - 1 > cloud.bands()) {
    throw NumericalError("avmax: " + std::to_string(p) + " endmembers need at least " + std::to_string(p - 1) +
                         " bands");
  }

  const PcaBasis basis = pca_basis(cloud.spectra, p - 1);
  if (!(basis.variances[p - 2] > 1e-12 * basis.variances[0])) {
    throw NumericalError("avmax: data spans fewer than " + std::to_string(p - 1) +
                         " dimensions, every simplex has zero volume");
  }
  const RowMatrix projected = (cloud.spectra.rowwise() - basis.mean) * basis.axes;
  Matrix augmented(p, n);
  augmented.row(0).setOnes();
  augmented.bottomRows(p - 1) = projected.transpose();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  AvmaxRun best;
  best.volume = -1.0;
  for (int r = 0; r < restarts; ++r) {
    std::vector<int> start;
    while (static_cast<int>(start.size()) < p) {
      const int i = pick(rng);
      if (std::find(start.begin(), start.end(), i) == start.end()) start.push_back(i);
    }
    AvmaxRun run = avmax_from(augmented, std::move(start));
    if (run.volume > best.volume) best = std::move(run);
  }
  if (!(best.volume > 0.0)) throw NumericalError("avmax: all simplices have zero volume (rank-deficient data)");

  result.indices = best.indices;
  result.volume = best.volume;
  result.volume_trace = std::move(best.trace);
  result.endmembers.resize(p, cloud.bands());
  for (int k = 0; k < p; ++k) result.endmembers.row(k) = cloud.spectra.row(result.indices[k]);
  return result;
}

Vector nnls(const Matrix& endmembers, const Vector& x) {
  const int p = static_cast<int>(endmembers.rows());
  if (p < 1) throw ConfigError("nnls: at least one endmember is required");
  if (endmembers.cols() != x.size()) throw ConfigError("nnls: spectrum length does not match endmembers");
  if (!endmembers.allFinite() || !x.allFinite()) throw NumericalError("nnls: non-finite input");

  const Matrix a = endmembers.transpose();
  Vector sol = Vector::Zero(p);
  const double xnorm = x.norm();
  if (xnorm == 0.0) return sol;
  const double tol = 1e-11 * std::max(a.norm(), 1e-300) * xnorm;

  std::vector<char> passive(p, 0);
  std::vector<char> skip(p, 0);
  const int max_outer = 30 * p + 50;
  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = a.transpose() * (x - a * sol);
    int t = -1;
    double wmax = tol;
    for (int j = 0; j < p; ++j) {
      if (!passive[j] && !skip[j] && w[j] > wmax) {
        wmax = w[j];
        t = j;
      }
    }
    if (t < 0) break;
    passive[t] = 1;

    for (int inner = 0; inner <= p + 1; ++inner) {
      std::vector<int> cols;
      for (int j = 0; j < p; ++j) {
        if (passive[j]) cols.push_back(j);
      }
      const Matrix ap = a(Eigen::all, cols);
      const Vector sp = ap.colPivHouseholderQr().solve(x);
      Vector s = Vector::Zero(p);
      for (std::size_t k = 0; k < cols.size(); ++k) s[cols[k]] = sp[k];

      if (inner == 0 && s[t] <= 0.0) {
        // Numerically dependent column: leave it out of this round.
        passive[t] = 0;
        skip[t] = 1;
        break;
      }
      bool feasible = true;
      for (int j : cols) feasible = feasible && s[j] > 0.0;
      if (feasible) {
        sol = s;
        std::fill(skip.begin(), skip.end(), 0);
        break;
      }
      double alpha = 1.0;
      for (int j : cols) {
        if (s[j] <= 0.0) alpha = std::min(alpha, sol[j] / (sol[j] - s[j]));
      }
      sol += alpha * (s - sol);
      for (int j : cols) {
        if (sol[j] <= 1e-15 * xnorm) {
          sol[j] = 0.0;
          passive[j] = 0;
        }
      }
    }
  }
  return sol.cwiseMax(0.0);
}

Matrix nnls_abundances(const Matrix& endmembers, const PixelCloud& cloud) {
  Matrix out(cloud.size(), endmembers.rows());
  for (int i = 0; i < cloud.size(); ++i) out.row(i) = nnls(endmembers, cloud.spectra.row(i).transpose()).transpose();
  return out;
}

PurityField purity(const Matrix& abundances) {
  const Eigen::Index n = abundances.rows();
  const Eigen::Index p = abundances.cols();
  if (p < 1) throw ConfigError("purity: abundance matrix has no columns");
  PurityField field;
  field.eta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sum = abundances.row(i).sum();
    field.eta[i] = sum > 0.0 ? abundances.row(i).maxCoeff() / sum : 1.0 / static_cast<double>(p);
  }
  const double top = n > 0 ? field.eta.maxCoeff() : 1.0;
  field.etahat = field.eta / top;
  return field;
}

UnmixingModel unmix(const PixelCloud& cloud, const UnmixingOptions& options) {
  const int p = options.p ? *options.p : hysime(cloud);
  UnmixingModel model;
  model.endmembers = avmax(cloud, p, options.restarts, options.seed).endmembers;
  model.abundances = nnls_abundances(model.endmembers, cloud);
  return model;
}

}  // namespace dsirc
