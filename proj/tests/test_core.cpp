#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsirc/core.hpp"

#include <Eigen/Eigenvalues>

#include <bit>
#include <filesystem>
#include <fstream>
#include <random>

using namespace dsirc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dsirc_test_core";
  fs::create_directories(dir);
  return dir / name;
}

void write_header(const fs::path& path, int samples, int lines, int bands, const std::string& interleave,
                  int byte_order = 0, const std::string& extra = "") {
  std::ofstream out(path);
  out << "ENVI\nsamples = " << samples << "\nlines = " << lines << "\nbands = " << bands
      << "\nheader offset = 0\ndata type = 4\ninterleave = " << interleave << "\nbyte order = " << byte_order << '\n'
      << extra;
}

void write_floats(const fs::path& path, const std::vector<float>& values, bool big_endian = false) {
  std::ofstream out(path, std::ios::binary);
  for (float v : values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    if (big_endian) bits = __builtin_bswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), 4);
  }
}

ImageCube random_cube(int h, int w, int b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
  std::vector<double> data(static_cast<std::size_t>(h) * w * b);
  for (double& v : data) v = unit(rng);  // float-representable so raw files round-trip
  return ImageCube(h, w, b, data);
}

// The same cube written by hand in a given interleave.
std::vector<float> interleave(const ImageCube& c, const std::string& order) {
  std::vector<float> out(static_cast<std::size_t>(c.height()) * c.width() * c.bands());
  std::size_t k = 0;
  if (order == "bsq") {
    for (int b = 0; b < c.bands(); ++b)
      for (int r = 0; r < c.height(); ++r)
        for (int col = 0; col < c.width(); ++col) out[k++] = static_cast<float>(c.at(r, col, b));
  } else if (order == "bil") {
    for (int r = 0; r < c.height(); ++r)
      for (int b = 0; b < c.bands(); ++b)
        for (int col = 0; col < c.width(); ++col) out[k++] = static_cast<float>(c.at(r, col, b));
  } else {
    for (int r = 0; r < c.height(); ++r)
      for (int col = 0; col < c.width(); ++col)
        for (int b = 0; b < c.bands(); ++b) out[k++] = static_cast<float>(c.at(r, col, b));
  }
  return out;
}

}  // namespace

TEST_CASE("ImageCube validates its shape and values") {
  CHECK_THROWS_AS(ImageCube(0, 1, 1, {}), ConfigError);
  CHECK_THROWS_AS(ImageCube(1, 1, 2, {1.0}), ConfigError);
  CHECK_THROWS_AS(ImageCube(1, 1, 1, {std::nan("")}), NumericalError);
  const ImageCube c(1, 2, 2, {1, 2, 3, 4});
  CHECK(c.at(0, 1, 0) == 2);
  CHECK(c.at(0, 0, 1) == 3);
  CHECK(c.band_plane(1).size() == 2);
}

TEST_CASE("load_envi reads a 2x2x1 bsq cube") {
  write_header(scratch("a.hdr"), 2, 2, 1, "bsq");
  write_floats(scratch("a.raw"), {1, 2, 3, 4});
  const ImageCube c = load_envi(scratch("a.hdr").string(), scratch("a.raw").string());
  CHECK(c.height() == 2);
  CHECK(c.width() == 2);
  CHECK(c.bands() == 1);
  CHECK(c.data() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("every interleave and byte order loads to the same canonical cube") {
  const ImageCube ref = random_cube(3, 4, 5, 7);
  for (const std::string order : {"bsq", "bil", "bip"}) {
    for (int byte_order : {0, 1}) {
      CAPTURE(order);
      CAPTURE(byte_order);
      write_header(scratch("i.hdr"), 4, 3, 5, order, byte_order);
      write_floats(scratch("i.raw"), interleave(ref, order), byte_order == 1);
      const ImageCube c = load_envi(scratch("i.hdr").string(), scratch("i.raw").string());
      CHECK(c.data() == ref.data());
    }
  }
}

TEST_CASE("save_envi round-trips through load_envi in every interleave") {
  const ImageCube ref = random_cube(2, 3, 4, 8);
  for (Interleave il : {Interleave::Bsq, Interleave::Bil, Interleave::Bip}) {
    save_envi(ref, scratch("s.hdr").string(), scratch("s.raw").string(), il);
    CHECK(load_envi(scratch("s.hdr").string(), scratch("s.raw").string()).data() == ref.data());
  }
}

TEST_CASE("load_envi rejects bad files") {
  write_header(scratch("t.hdr"), 2, 2, 1, "bsq");
  write_floats(scratch("t.raw"), {1, 2, 3});
  CHECK_THROWS_AS(load_envi(scratch("t.hdr").string(), scratch("t.raw").string()), IoError);

  write_floats(scratch("t.raw"), {1, 2, std::numeric_limits<float>::infinity(), 4});
  CHECK_THROWS_AS(load_envi(scratch("t.hdr").string(), scratch("t.raw").string()), IoError);

  write_floats(scratch("t.raw"), {1, 2, 3, 4});
  CHECK_THROWS_AS(load_envi(scratch("missing.hdr").string(), scratch("t.raw").string()), IoError);

  {
    std::ofstream out(scratch("t.hdr"));
    out << "ENVI\nsamples = 2\nlines = 2\ndata type = 4\ninterleave = bsq\nbyte order = 0\n";
  }
  CHECK_THROWS_AS(load_envi(scratch("t.hdr").string(), scratch("t.raw").string()), IoError);

  write_header(scratch("t.hdr"), 2, 2, 1, "bsq", 0, "samples = 3\n");
  CHECK_THROWS_AS(load_envi(scratch("t.hdr").string(), scratch("t.raw").string()), IoError);

  {
    std::ofstream out(scratch("t.hdr"));
    out << "ENVI\nsamples = 2\nlines = 2\nbands = 1\ndata type = 5\ninterleave = bsq\nbyte order = 0\n";
  }
  CHECK_THROWS_AS(load_envi(scratch("t.hdr").string(), scratch("t.raw").string()), IoError);
}

TEST_CASE("cube_to_cloud orders pixels row-major") {
  const PixelCloud one = cube_to_cloud(ImageCube(1, 1, 3, {5, 6, 7}));
  CHECK(one.size() == 1);
  CHECK(one.spectra(0, 0) == 5);
  CHECK(one.spectra(0, 2) == 7);
  CHECK(one.coords[0] == PixelCoord{0, 0});

  const PixelCloud four = cube_to_cloud(ImageCube(2, 2, 1, {1, 2, 3, 4}));
  const std::vector<PixelCoord> expected{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  CHECK(four.coords == expected);
  CHECK(four.is_full_grid());
}

TEST_CASE("cube to cloud to cube is bit-exact") {
  const ImageCube c = random_cube(4, 5, 3, 9);
  CHECK(cloud_to_cube(cube_to_cloud(c)).data() == c.data());
}

TEST_CASE("first_pc on hand-checkable data") {
  RowMatrix two(2, 2);
  two << 0, 0, 2, 0;
  const PcScalarField f = first_pc(PixelCloud::from_spectra(two));
  CHECK(f.values[0] == doctest::Approx(-1.0));
  CHECK(f.values[1] == doctest::Approx(1.0));

  RowMatrix line(3, 2);
  line << 0, 0, 0.6, 0.8, 1.2, 1.6;
  const PcScalarField g = first_pc(PixelCloud::from_spectra(line));
  CHECK(g.values[0] == doctest::Approx(-1.0));
  CHECK(g.values[1] == doctest::Approx(0.0));
  CHECK(g.values[2] == doctest::Approx(1.0));
}

TEST_CASE("first_pc matches a dense eigendecomposition") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = trial == 0 ? 50 : 10 + trial * 9;
    const int b = trial == 0 ? 8 : 2 + trial % 9;
    RowMatrix x(n, b);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng) * (1.0 + (i % b));
    const PixelCloud cloud = PixelCloud::from_spectra(x);

    const RowMatrix xc = x.rowwise() - x.colwise().mean();
    const Matrix cov = xc.transpose() * xc / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    Vector v = eig.eigenvectors().col(b - 1);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v[big] < 0) v = -v;
    const Vector ref = xc * v;

    const PcScalarField f = first_pc(cloud);
    CHECK((f.values - ref).norm() / ref.norm() <= 1e-8);
    // Projection variance equals the top covariance eigenvalue.
    const double var = f.values.squaredNorm() / static_cast<double>(n - 1);
    CHECK(std::abs(var - eig.eigenvalues()[b - 1]) / eig.eigenvalues()[b - 1] <= 1e-8);
    CHECK(std::abs(f.values.mean()) <= 1e-8 * (f.values.maxCoeff() - f.values.minCoeff()));
  }
}

TEST_CASE("first_pc rejects identical pixels") {
  RowMatrix x = RowMatrix::Constant(4, 3, 2.5);
  CHECK_THROWS_AS(first_pc(PixelCloud::from_spectra(x)), NumericalError);
}

TEST_CASE("normalize_spectra scales rows to unit norm and keeps zero rows") {
  RowMatrix x(2, 2);
  x << 3, 4, 0, 0;
  const PixelCloud n = normalize_spectra(PixelCloud::from_spectra(x));
  CHECK(n.spectra(0, 0) == doctest::Approx(0.6));
  CHECK(n.spectra(0, 1) == doctest::Approx(0.8));
  CHECK(n.spectra(1, 0) == 0.0);
}

TEST_CASE("label CSV round-trips and images have the right size") {
  const LabelMap labels{0, 1, 2, 3, 17, 5};
  write_label_csv(scratch("l.csv").string(), labels, 3);
  CHECK(read_label_csv(scratch("l.csv").string()) == labels);

  write_label_ppm(scratch("l.ppm").string(), labels, 2, 3);
  write_label_pgm(scratch("l.pgm").string(), labels, 2, 3);
  CHECK(fs::file_size(scratch("l.ppm")) == std::string("P6\n3 2\n255\n").size() + 18);
  CHECK(fs::file_size(scratch("l.pgm")) == std::string("P5\n3 2\n255\n").size() + 6);
  CHECK_THROWS_AS(write_label_ppm(scratch("l.ppm").string(), labels, 2, 2), ConfigError);
}

TEST_CASE("label palette: 0 is black and 16 colors cycle") {
  CHECK(label_color(0) == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(label_color(1) == label_color(17));
  CHECK(label_color(1) != label_color(2));
}
