#pragma once

// Data model shared by every stage: image cubes, pixel clouds, label maps and
// the first-principal-component field used by shape-adaptive reconstruction.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsirc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, missing or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside their valid range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data on which an algorithm is undefined (zero variance, disconnected graph, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PixelCoord {
  int row = 0;
  int col = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// H x W x B reflectance cube stored band-sequential: index (band * H + row) * W + col.
class ImageCube {
 public:
  ImageCube(int height, int width, int bands, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int bands() const { return bands_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  double at(int row, int col, int band) const {
    return data_[(static_cast<std::size_t>(band) * height_ + row) * width_ + col];
  }

  /// Contiguous H*W plane of one band.
  std::span<const double> band_plane(int band) const;

  const std::vector<double>& data() const { return data_; }

 private:
  int height_;
  int width_;
  int bands_;
  std::vector<double> data_;
};

/// Pixel spectra as an N x B matrix plus the grid coordinate of each row.
///
/// Cloud index i corresponds to coords[i]. Clouds built from a cube use row-major
/// ordering (i = row * width + col); clouds built from bare spectra sit on a
/// 1 x N grid.
struct PixelCloud {
  int height = 0;
  int width = 0;
  RowMatrix spectra;
  std::vector<PixelCoord> coords;

  int size() const { return static_cast<int>(spectra.rows()); }
  int bands() const { return static_cast<int>(spectra.cols()); }

  /// True when the cloud covers its full grid in row-major order.
  bool is_full_grid() const;

  static PixelCloud from_spectra(RowMatrix spectra);
};

/// Label per pixel: 0 = unlabeled, 1..K = cluster or class id.
using LabelMap = std::vector<int>;

/// First-PC score per pixel laid out on the image grid (row-major).
struct PcScalarField {
  int height = 0;
  int width = 0;
  Vector values;

  double at(int row, int col) const { return values[static_cast<Eigen::Index>(row) * width + col]; }
};

PixelCloud cube_to_cloud(const ImageCube& cube);

/// Inverse of cube_to_cloud; requires a full-grid cloud.
ImageCube cloud_to_cube(const PixelCloud& cloud);

/// Scores of every pixel on the dominant principal axis of the sample covariance.
///
/// The axis is found by power iteration; its sign makes the largest-magnitude
/// entry positive. Throws NumericalError when all pixels are identical.
PcScalarField first_pc(const PixelCloud& cloud);

/// Unit principal axis used by first_pc (exposed for testing).
Vector first_pc_axis(const PixelCloud& cloud);

/// Scales every spectrum to unit l2 norm; zero spectra are left as is.
PixelCloud normalize_spectra(const PixelCloud& cloud);

// ---------------------------------------------------------------------------
// ENVI raw cubes

enum class Interleave { Bsq, Bil, Bip };

Interleave parse_interleave(const std::string& text);
std::string to_string(Interleave interleave);

/// Reads an ENVI header plus raw 32-bit float data into a band-sequential cube.
ImageCube load_envi(const std::string& header_path, const std::string& data_path);

/// Writes a cube as 32-bit little-endian floats with the given interleave.
void save_envi(const ImageCube& cube, const std::string& header_path, const std::string& data_path,
               Interleave interleave = Interleave::Bsq);

// ---------------------------------------------------------------------------
// Label maps

/// RGB color of a label: 0 is black, labels 1.. cycle through 16 fixed colors.
std::array<std::uint8_t, 3> label_color(int label);

/// CSV with header "index,row,col,label".
void write_label_csv(const std::string& path, const LabelMap& labels, int width);
LabelMap read_label_csv(const std::string& path);

/// Raw label values as 8-bit gray levels (P5); labels above 255 saturate.
void write_label_pgm(const std::string& path, const LabelMap& labels, int height, int width);

/// Labels mapped through the fixed palette (P6).
void write_label_ppm(const std::string& path, const LabelMap& labels, int height, int width);

}  // namespace dsirc
