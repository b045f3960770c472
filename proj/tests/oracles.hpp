#pragma once

// Slow, independent reference implementations used by the unit tests and the
// acceptance suite. None of these call into the library's algorithms.

#include "dsirc/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using dsirc::Matrix;
using dsirc::RowMatrix;
using dsirc::Vector;

inline constexpr int kSteps[8][2] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}};

/// Direct per-sample sum along a ray; a sample past the border walks back to the last in-bounds one.
inline double lpa(const dsirc::PcScalarField& field, int direction, int length, int row, int col) {
  const int dr = kSteps[direction][0], dc = kSteps[direction][1];
  double sum = 0.0;
  for (int s = 0; s < length; ++s) {
    int k = s;
    while (k > 0) {
      const int r = row + k * dr, c = col + k * dc;
      if (r >= 0 && r < field.height && c >= 0 && c < field.width) break;
      --k;
    }
    sum += (1.0 / length) * field.at(row + k * dr, col + k * dc);
  }
  return sum;
}

/// Largest candidate whose interval prefix has a common point, checked pairwise (1-D Helly).
inline int ici(const std::vector<double>& values, const std::vector<double>& halfwidths,
               const std::vector<int>& lengths) {
  int selected = lengths.front();
  for (std::size_t j = 0; j < values.size(); ++j) {
    bool common = true;
    for (std::size_t a = 0; a <= j && common; ++a) {
      for (std::size_t b = 0; b <= j && common; ++b) {
        common = values[a] - halfwidths[a] <= values[b] + halfwidths[b];
      }
    }
    if (!common) break;
    selected = lengths[j];
  }
  return selected;
}

/// Pixels of the convex hull of the 8 ray ends, by exact integer point-in-triangle /
/// on-segment tests over every triple of ends (Caratheodory).
inline std::vector<int> hull_members(int row, int col, const std::array<int, 8>& lengths, int height, int width) {
  std::vector<std::array<std::int64_t, 2>> ends;
  for (int m = 0; m < 8; ++m) {
    ends.push_back({static_cast<std::int64_t>(col + (lengths[m] - 1) * kSteps[m][1]),
                    static_cast<std::int64_t>(row + (lengths[m] - 1) * kSteps[m][0])});
  }
  auto cross = [](const std::array<std::int64_t, 2>& o, const std::array<std::int64_t, 2>& a,
                  const std::array<std::int64_t, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  auto on_segment = [&](const std::array<std::int64_t, 2>& a, const std::array<std::int64_t, 2>& b,
                        const std::array<std::int64_t, 2>& q) {
    if (cross(a, b, q) != 0) return false;
    return std::min(a[0], b[0]) <= q[0] && q[0] <= std::max(a[0], b[0]) && std::min(a[1], b[1]) <= q[1] &&
           q[1] <= std::max(a[1], b[1]);
  };
  auto inside = [&](const std::array<std::int64_t, 2>& q) {
    for (std::size_t a = 0; a < 8; ++a) {
      for (std::size_t b = a; b < 8; ++b) {
        if (on_segment(ends[a], ends[b], q)) return true;
        for (std::size_t c = b + 1; c < 8; ++c) {
          const auto d1 = cross(ends[a], ends[b], q), d2 = cross(ends[b], ends[c], q), d3 = cross(ends[c], ends[a], q);
          if (cross(ends[a], ends[b], ends[c]) == 0) continue;
          if ((d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0)) return true;
        }
      }
    }
    return false;
  };
  std::vector<int> members;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (inside({static_cast<std::int64_t>(c), static_cast<std::int64_t>(r)})) members.push_back(r * width + c);
    }
  }
  return members;
}

/// All-pairs diffusion distances from the dense walk matrix power:
/// D_t(i,j)^2 = sum_k (P^t(i,k) - P^t(j,k))^2 / pi_k.
inline Matrix dense_diffusion_distances(const Matrix& adjacency, int t) {
  const Eigen::Index n = adjacency.rows();
  const Vector degree = adjacency.rowwise().sum();
  const Vector pi = degree / degree.sum();
  Matrix p = degree.cwiseInverse().asDiagonal() * adjacency;
  Matrix pt = Matrix::Identity(n, n);
  for (int s = 0; s < t; ++s) pt = pt * p;
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double diff = pt(i, k) - pt(j, k);
        s += diff * diff / pi[k];
      }
      d(i, j) = std::sqrt(s);
    }
  }
  return d;
}

/// min 0.5 |Ax - b|^2 subject to x >= 0 by accelerated projected gradient with restarts.
inline Vector projected_gradient_nnls(const Matrix& a, const Vector& b, int iterations = 200000) {
  const Matrix ata = a.transpose() * a;
  const Vector atb = a.transpose() * b;
  const double lipschitz = Eigen::SelfAdjointEigenSolver<Matrix>(ata).eigenvalues().maxCoeff();
  const double step = 1.0 / lipschitz;
  Vector x = Vector::Zero(a.cols()), y = x;
  double theta = 1.0;
  auto objective = [&](const Vector& v) { return 0.5 * (a * v - b).squaredNorm(); };
  double last = objective(x);
  for (int it = 0; it < iterations; ++it) {
    const Vector next = (y - step * (ata * y - atb)).cwiseMax(0.0);
    const double f = objective(next);
    if (f > last) {  // adaptive restart
      y = x;
      theta = 1.0;
      continue;
    }
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    y = next + ((theta - 1.0) / theta_next) * (next - x);
    x = next;
    theta = theta_next;
    last = f;
  }
  return x;
}

/// Twice the area of the triangle spanned by three points in any dimension.
inline double doubled_triangle_area(const Vector& a, const Vector& b, const Vector& c) {
  const Vector u = b - a, v = c - a;
  const double g = u.squaredNorm() * v.squaredNorm() - u.dot(v) * u.dot(v);
  return std::sqrt(std::max(g, 0.0));
}

/// Best total agreement over every one-to-one assignment of rows to columns (rows <= cols).
inline double best_assignment_agreement(const Matrix& overlap) {
  std::vector<int> cols(overlap.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index r = 0; r < overlap.rows(); ++r) s += overlap(r, cols[r]);
    best = std::max(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
