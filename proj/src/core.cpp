#include "dsirc/core.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace dsirc {

ImageCube::ImageCube(int height, int width, int bands, std::vector<double> data)
    : height_(height), width_(width), bands_(bands), data_(std::move(data)) {
  if (height < 1 || width < 1 || bands < 1) {
    throw ConfigError("image cube dimensions must be positive, got " + std::to_string(height) + "x" +
                      std::to_string(width) + "x" + std::to_string(bands));
  }
  const std::size_t expected = static_cast<std::size_t>(height) * width * bands;
  if (data_.size() != expected) {
    throw ConfigError("image cube expects " + std::to_string(expected) + " values, got " +
                      std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericalError("image cube value " + std::to_string(i) + " is not finite");
    }
  }
}

std::span<const double> ImageCube::band_plane(int band) const {
  const std::size_t plane = pixel_count();
  return {data_.data() + static_cast<std::size_t>(band) * plane, plane};
}

bool PixelCloud::is_full_grid() const {
  if (height < 1 || width < 1 || static_cast<long>(height) * width != size()) return false;
  if (coords.size() != static_cast<std::size_t>(size())) return false;
  for (int i = 0; i < size(); ++i) {
    if (coords[i].row != i / width || coords[i].col != i % width) return false;
  }
  return true;
}

PixelCloud PixelCloud::from_spectra(RowMatrix spectra) {
  PixelCloud cloud;
  const int n = static_cast<int>(spectra.rows());
  cloud.height = n > 0 ? 1 : 0;
  cloud.width = n;
  cloud.spectra = std::move(spectra);
  cloud.coords.reserve(n);
  for (int i = 0; i < n; ++i) cloud.coords.push_back({0, i});
  return cloud;
}

PixelCloud cube_to_cloud(const ImageCube& cube) {
  PixelCloud cloud;
  cloud.height = cube.height();
  cloud.width = cube.width();
  const Eigen::Index n = static_cast<Eigen::Index>(cube.pixel_count());
  cloud.spectra.resize(n, cube.bands());
  for (int b = 0; b < cube.bands(); ++b) {
    const auto plane = cube.band_plane(b);
    for (Eigen::Index i = 0; i < n; ++i) cloud.spectra(i, b) = plane[i];
  }
  cloud.coords.reserve(n);
  for (int r = 0; r < cube.height(); ++r) {
    for (int c = 0; c < cube.width(); ++c) cloud.coords.push_back({r, c});
  }
  return cloud;
}

ImageCube cloud_to_cube(const PixelCloud& cloud) {
  if (!cloud.is_full_grid()) {
    throw ConfigError("cloud_to_cube requires a full-grid cloud in row-major order");
  }
  const std::size_t n = static_cast<std::size_t>(cloud.size());
  std::vector<double> data(n * cloud.bands());
  for (int b = 0; b < cloud.bands(); ++b) {
    for (std::size_t i = 0; i < n; ++i) data[b * n + i] = cloud.spectra(static_cast<Eigen::Index>(i), b);
  }
  return ImageCube(cloud.height, cloud.width, cloud.bands(), std::move(data));
}

namespace {

constexpr int kMaxPowerIterations = 10000;
constexpr double kEigenvalueTolerance = 1e-10;
constexpr double kResidualTolerance = 1e-11;

RowMatrix centered(const RowMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return x.rowwise() - mean;
}

}  // namespace

Vector first_pc_axis(const PixelCloud& cloud) {
  if (cloud.size() < 2) throw ConfigError("first_pc needs at least two pixels");
  const RowMatrix xc = centered(cloud.spectra);
  const Matrix cov = (xc.transpose() * xc) / static_cast<double>(cloud.size() - 1);

  const double scale = cloud.spectra.squaredNorm() / static_cast<double>(cloud.spectra.size());
  if (!(cov.trace() > 1e-24 * std::max(scale, 1e-300))) {
    throw NumericalError("first_pc: covariance is degenerate (all pixels identical)");
  }

  Eigen::Index start = 0;
  cov.colwise().norm().maxCoeff(&start);
  Vector v = cov.col(start).normalized();
  double lambda = v.dot(cov * v);
  for (int it = 0; it < kMaxPowerIterations; ++it) {
    Vector w = cov * v;
    const double next = v.dot(w);
    const double residual = (w - next * v).norm();
    v = w.normalized();
    const bool value_settled = std::abs(next - lambda) <= kEigenvalueTolerance * std::abs(next);
    lambda = next;
    if (value_settled && residual <= kResidualTolerance * std::abs(next)) break;
  }

  Eigen::Index largest = 0;
  v.cwiseAbs().maxCoeff(&largest);
  if (v[largest] < 0) v = -v;
  return v;
}

PcScalarField first_pc(const PixelCloud& cloud) {
  const Vector axis = first_pc_axis(cloud);
  const Eigen::RowVectorXd mean = cloud.spectra.colwise().mean();
  PcScalarField field;
  field.height = cloud.height;
  field.width = cloud.width;
  field.values = (cloud.spectra.rowwise() - mean) * axis;
  return field;
}

PixelCloud normalize_spectra(const PixelCloud& cloud) {
  PixelCloud out = cloud;
  for (Eigen::Index i = 0; i < out.spectra.rows(); ++i) {
    const double norm = out.spectra.row(i).norm();
    if (norm > 0) out.spectra.row(i) /= norm;
  }
  return out;
}

}  // namespace dsirc
