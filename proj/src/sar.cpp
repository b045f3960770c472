#include "dsirc/sar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dsirc {

namespace {

constexpr double kHullTolerance = 1e-9;

bool in_bounds(int row, int col, int height, int width) {
  return row >= 0 && row < height && col >= 0 && col < width;
}

// Spectra centered and scaled to unit norm, so Pearson correlation is a dot product.
struct PearsonBasis {
  RowMatrix unit;
  std::vector<char> flat;
};

PearsonBasis pearson_basis(const RowMatrix& spectra) {
  PearsonBasis basis;
  basis.unit.resize(spectra.rows(), spectra.cols());
  basis.flat.assign(spectra.rows(), 0);
  for (Eigen::Index i = 0; i < spectra.rows(); ++i) {
    const auto row = spectra.row(i);
    const double mean = row.mean();
    const Eigen::RowVectorXd c = row.array() - mean;
    const double norm = c.norm();
    if (norm <= 1e-12 * row.norm()) {
      basis.flat[i] = 1;
      basis.unit.row(i).setZero();
    } else {
      basis.unit.row(i) = c / norm;
    }
  }
  return basis;
}

Vector weighted_mean(const RowMatrix& spectra, const PearsonBasis& basis, int center,
                     const std::vector<int>& members) {
  Vector num = Vector::Zero(spectra.cols());
  double den = 0.0;
  for (int y : members) {
    double w;
    if (y == center) {
      w = 1.0;
    } else if (basis.flat[center] || basis.flat[y]) {
      w = 0.0;
    } else {
      w = std::max(0.0, basis.unit.row(center).dot(basis.unit.row(y)));
    }
    if (w > 0.0) {
      num += w * spectra.row(y).transpose();
      den += w;
    }
  }
  if (den == 0.0) return spectra.row(center).transpose();
  return num / den;
}

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

struct Point {
  double x;
  double y;
};

// Andrew's monotone chain; collinear points dropped, counter-clockwise order.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
              return a.x == b.x && a.y == b.y;
            }),
            pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  auto turn = [](const Point& o, const Point& a, const Point& b) {
    return cross(a.x - o.x, a.y - o.y, b.x - o.x, b.y - o.y);
  };
  for (const Point& p : pts) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_hull(const std::vector<Point>& hull, const Point& q) {
  if (hull.size() == 1) {
    return std::abs(q.x - hull[0].x) <= kHullTolerance && std::abs(q.y - hull[0].y) <= kHullTolerance;
  }
  if (hull.size() == 2) {
    const double ex = hull[1].x - hull[0].x, ey = hull[1].y - hull[0].y;
    const double len = std::hypot(ex, ey);
    const double qx = q.x - hull[0].x, qy = q.y - hull[0].y;
    if (std::abs(cross(ex, ey, qx, qy)) / len > kHullTolerance) return false;
    const double along = (ex * qx + ey * qy) / len;
    return along >= -kHullTolerance && along <= len + kHullTolerance;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % hull.size()];
    const double ex = b.x - a.x, ey = b.y - a.y;
    if (cross(ex, ey, q.x - a.x, q.y - a.y) / std::hypot(ex, ey) < -kHullTolerance) return false;
  }
  return true;
}

}  // namespace

double LpaKernel::l2_norm() const {
  double s = 0.0;
  for (double g : weights) s += g * g;
  return std::sqrt(s);
}

LpaKernelTable::LpaKernelTable(std::vector<int> lengths) : lengths_(std::move(lengths)) {
  kernels_.reserve(kDirections * lengths_.size());
  for (int m = 0; m < kDirections; ++m) {
    const GridOffset step = kDirectionSteps[m];
    for (int l : lengths_) {
      LpaKernel k;
      k.direction = m;
      k.length = l;
      for (int s = 0; s < l; ++s) {
        k.offsets.push_back({s * step.drow, s * step.dcol});
        k.weights.push_back(1.0 / l);
      }
      kernels_.push_back(std::move(k));
    }
  }
}

LpaKernelTable build_lpa_kernels(std::span<const int> lengths) {
  IciConfig check;
  check.lengths.assign(lengths.begin(), lengths.end());
  check.validate();
  return LpaKernelTable(check.lengths);
}

LpaEstimate lpa_estimate(const PcScalarField& field, const LpaKernel& kernel, PixelCoord center) {
  if (!in_bounds(center.row, center.col, field.height, field.width)) {
    throw ConfigError("lpa_estimate: center outside the image");
  }
  const GridOffset step = kDirectionSteps[kernel.direction];
  // Largest number of whole steps that stays inside the image.
  int reach = 0;
  while (in_bounds(center.row + (reach + 1) * step.drow, center.col + (reach + 1) * step.dcol, field.height,
                   field.width)) {
    ++reach;
    if (reach >= kernel.length) break;
  }

  LpaEstimate est;
  double g2 = 0.0;
  for (std::size_t s = 0; s < kernel.offsets.size(); ++s) {
    int row = center.row + kernel.offsets[s].drow;
    int col = center.col + kernel.offsets[s].dcol;
    if (!in_bounds(row, col, field.height, field.width)) {
      row = center.row + reach * step.drow;
      col = center.col + reach * step.dcol;
    }
    est.value += kernel.weights[s] * field.at(row, col);
    g2 += kernel.weights[s] * kernel.weights[s];
  }
  est.gnorm = std::sqrt(g2);
  return est;
}

void IciConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("ICI threshold tau must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("ICI noise level sigma must be >= 0");
  if (lengths.empty()) throw ConfigError("ICI length candidate set is empty");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw ConfigError("ICI length candidates must be >= 1");
    if (i > 0 && lengths[i] <= lengths[i - 1]) {
      throw ConfigError("ICI length candidates must be strictly increasing");
    }
  }
}

int ici_select_length(std::span<const LpaEstimate> estimates, const IciConfig& config) {
  if (config.lengths.empty() || estimates.empty()) throw ConfigError("ici_select_length: empty candidate list");
  if (estimates.size() != config.lengths.size()) {
    throw ConfigError("ici_select_length: one estimate per candidate length is required");
  }
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  int selected = config.lengths.front();
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    const double half = config.tau * config.sigma * estimates[j].gnorm;
    lo = std::max(lo, estimates[j].value - half);
    hi = std::min(hi, estimates[j].value + half);
    if (lo > hi) break;
    selected = config.lengths[j];
  }
  return selected;
}

SaRegion build_sa_region(PixelCoord center, const std::array<int, kDirections>& dir_lengths, int height,
                         int width) {
  if (!in_bounds(center.row, center.col, height, width)) {
    throw ConfigError("build_sa_region: center outside the image");
  }
  std::vector<Point> ends;
  int row_min = center.row, row_max = center.row, col_min = center.col, col_max = center.col;
  for (int m = 0; m < kDirections; ++m) {
    if (dir_lengths[m] < 1) throw ConfigError("build_sa_region: directional lengths must be >= 1");
    const int r = center.row + (dir_lengths[m] - 1) * kDirectionSteps[m].drow;
    const int c = center.col + (dir_lengths[m] - 1) * kDirectionSteps[m].dcol;
    ends.push_back({static_cast<double>(c), static_cast<double>(r)});
    row_min = std::min(row_min, r);
    row_max = std::max(row_max, r);
    col_min = std::min(col_min, c);
    col_max = std::max(col_max, c);
  }
  const std::vector<Point> hull = convex_hull(std::move(ends));

  SaRegion region;
  region.center = center;
  region.dir_lengths = dir_lengths;
  for (int r = std::max(row_min, 0); r <= std::min(row_max, height - 1); ++r) {
    for (int c = std::max(col_min, 0); c <= std::min(col_max, width - 1); ++c) {
      const bool is_center = r == center.row && c == center.col;
      if (is_center || inside_hull(hull, {static_cast<double>(c), static_cast<double>(r)})) {
        region.members.push_back(r * width + c);
      }
    }
  }
  return region;
}

Vector reconstruct_pixel(const PixelCloud& cloud, const SaRegion& region) {
  const int center = region.center.row * cloud.width + region.center.col;
  if (center < 0 || center >= cloud.size()) throw ConfigError("reconstruct_pixel: center outside the cloud");
  if (region.members.empty()) throw ConfigError("reconstruct_pixel: empty region");

  // Only the rows that take part are normalized.
  RowMatrix local(region.members.size() + 1, cloud.bands());
  std::vector<int> local_members;
  local.row(0) = cloud.spectra.row(center);
  for (std::size_t k = 0; k < region.members.size(); ++k) {
    const int y = region.members[k];
    if (y < 0 || y >= cloud.size()) throw ConfigError("reconstruct_pixel: region member outside the cloud");
    local.row(k + 1) = cloud.spectra.row(y);
    local_members.push_back(y == center ? 0 : static_cast<int>(k + 1));
  }
  return weighted_mean(local, pearson_basis(local), 0, local_members);
}

double estimate_noise_sigma(const PcScalarField& field) {
  std::vector<double> diffs;
  if (field.width > 1) {
    for (int r = 0; r < field.height; ++r) {
      for (int c = 0; c + 1 < field.width; ++c) diffs.push_back(field.at(r, c + 1) - field.at(r, c));
    }
  } else {
    for (int r = 0; r + 1 < field.height; ++r) diffs.push_back(field.at(r + 1, 0) - field.at(r, 0));
  }
  if (diffs.empty()) return 0.0;

  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
    return m;
  };
  const double center = median(diffs);
  for (double& d : diffs) d = std::abs(d - center);
  return median(std::move(diffs)) / (0.6745 * std::sqrt(2.0));
}

SarLayout sar_layout(const PixelCloud& cloud, const SarConfig& config) {
  if (!cloud.is_full_grid()) throw ConfigError("sar requires a full-grid cloud in row-major order");

  PcScalarField field;
  try {
    field = first_pc(cloud);
  } catch (const NumericalError&) {
    // Identical pixels: every projection is constant, so the field is zero.
    field.height = cloud.height;
    field.width = cloud.width;
    field.values = Vector::Zero(cloud.size());
  }

  IciConfig ici;
  ici.tau = config.tau;
  ici.lengths = config.lengths;
  ici.sigma = config.sigma ? *config.sigma : estimate_noise_sigma(field);
  ici.validate();
  const LpaKernelTable kernels(ici.lengths);

  SarLayout layout;
  layout.sigma = ici.sigma;
  layout.dir_lengths.resize(cloud.size());
  std::vector<LpaEstimate> estimates(ici.lengths.size());
  for (int i = 0; i < cloud.size(); ++i) {
    const PixelCoord center = cloud.coords[i];
    for (int m = 0; m < kDirections; ++m) {
      for (std::size_t j = 0; j < ici.lengths.size(); ++j) {
        estimates[j] = lpa_estimate(field, kernels.kernel(m, j), center);
      }
      layout.dir_lengths[i][m] = ici_select_length(estimates, ici);
    }
  }
  return layout;
}

PixelCloud sar(const PixelCloud& cloud, const SarConfig& config) {
  return sar_reconstruct(cloud, sar_layout(cloud, config));
}

PixelCloud sar_reconstruct(const PixelCloud& cloud, const SarLayout& layout) {
  if (!cloud.is_full_grid()) throw ConfigError("sar requires a full-grid cloud in row-major order");
  if (layout.dir_lengths.size() != static_cast<std::size_t>(cloud.size())) {
    throw ConfigError("sar_reconstruct: layout does not match the cloud");
  }
  const PearsonBasis basis = pearson_basis(cloud.spectra);

  PixelCloud out = cloud;
  for (int i = 0; i < cloud.size(); ++i) {
    const SaRegion region = build_sa_region(cloud.coords[i], layout.dir_lengths[i], cloud.height, cloud.width);
    out.spectra.row(i) = weighted_mean(cloud.spectra, basis, i, region.members).transpose();
  }
  return out;
}

}  // namespace dsirc
