#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsirc/synth.hpp"
#include "dsirc/unmixing.hpp"
#include "oracles.hpp"

#include <random>
#include <set>

using namespace dsirc;

namespace {

RowMatrix mixed_pixels(const Matrix& e, int n, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Matrix a(n, e.rows());
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < e.rows(); ++k) a(i, k) = gamma(rng);
    a.row(i) /= a.row(i).sum();
  }
  return a * e;
}

void add_noise_at_snr(RowMatrix& x, double snr_db, std::mt19937_64& rng) {
  const double power = x.squaredNorm() / static_cast<double>(x.size());
  std::normal_distribution<double> noise(0.0, std::sqrt(power / std::pow(10.0, snr_db / 10.0)));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += noise(rng);
}

RowMatrix planar_points(int n, int bands, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix q = Matrix::NullaryExpr(bands, 2, [&] { return unit(rng) - 0.5; });
  q = Eigen::HouseholderQR<Matrix>(q).householderQ() * Matrix::Identity(bands, 2);
  const Vector offset = Vector::NullaryExpr(bands, [&] { return unit(rng); });
  RowMatrix x(n, bands);
  for (int i = 0; i < n; ++i) x.row(i) = (offset + q * Eigen::Vector2d(unit(rng), unit(rng))).transpose();
  return x;
}

}  // namespace

TEST_CASE("hysime finds three endmembers in noiseless mixtures") {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const RowMatrix x = mixed_pixels(random_endmembers(3, 20, 40 + seed), 500, rng);
    CHECK(hysime(PixelCloud::from_spectra(x)) == 3);
  }
}

TEST_CASE("hysime is stable at 30 dB and 20 dB") {
  for (double snr : {30.0, 20.0}) {
    for (int seed = 0; seed < 5; ++seed) {
      CAPTURE(snr);
      CAPTURE(seed);
      std::mt19937_64 rng(70 + seed);
      RowMatrix x = mixed_pixels(random_endmembers(3, 20, 80 + seed), 500, rng);
      add_noise_at_snr(x, snr, rng);
      CHECK(hysime(PixelCloud::from_spectra(x)) == 3);
    }
  }
}

TEST_CASE("hysime on a single endmember with tiny noise gives 1") {
  std::mt19937_64 rng(3);
  const Matrix e = random_endmembers(1, 20, 9);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  RowMatrix x(300, 20);
  for (int i = 0; i < 300; ++i) x.row(i) = scale(rng) * e.row(0);
  add_noise_at_snr(x, 60.0, rng);
  CHECK(hysime(PixelCloud::from_spectra(x)) == 1);
}

TEST_CASE("hysime ignores pixel order") {
  std::mt19937_64 rng(5);
  RowMatrix x = mixed_pixels(random_endmembers(4, 25, 6), 400, rng);
  add_noise_at_snr(x, 25.0, rng);
  std::vector<int> perm(x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RowMatrix shuffled(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) shuffled.row(i) = x.row(perm[i]);
  CHECK(hysime(PixelCloud::from_spectra(x)) == hysime(PixelCloud::from_spectra(shuffled)));
}

TEST_CASE("hysime rejects a band with no energy") {
  std::mt19937_64 rng(6);
  RowMatrix x = mixed_pixels(random_endmembers(3, 10, 1), 100, rng);
  x.col(4).setZero();
  CHECK_THROWS_AS(hysime(PixelCloud::from_spectra(x)), NumericalError);
}

TEST_CASE("avmax recovers triangle vertices") {
  std::mt19937_64 rng(7);
  const RowMatrix corners = planar_points(3, 5, rng);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  RowMatrix x(40, 5);
  x.topRows(3) = corners;
  for (int i = 3; i < 40; ++i) {
    Eigen::Vector3d w(unit(rng), unit(rng), unit(rng));
    w /= w.sum();
    x.row(i) = w.transpose() * corners;
  }
  const AvmaxResult r = avmax(PixelCloud::from_spectra(x), 3, 10, 1);
  CHECK(std::set<int>(r.indices.begin(), r.indices.end()) == std::set<int>{0, 1, 2});
  CHECK(r.volume == doctest::Approx(oracle::doubled_triangle_area(corners.row(0).transpose(), corners.row(1).transpose(),
                                                                  corners.row(2).transpose())));
}

TEST_CASE("avmax with p = 1 picks the point farthest from the mean") {
  RowMatrix x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 5, 5;
  const AvmaxResult r = avmax(PixelCloud::from_spectra(x), 1, 3, 0);
  CHECK(r.indices == std::vector<int>{3});
  CHECK(r.endmembers.row(0) == x.row(3));
}

TEST_CASE("avmax matches exhaustive triple search on small planar clouds") {
  for (int seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(200 + seed);
    const int n = 5 + seed % 8;
    const RowMatrix x = planar_points(n, 6, rng);
    double best = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        for (int c = b + 1; c < n; ++c)
          best = std::max(best, oracle::doubled_triangle_area(x.row(a).transpose(), x.row(b).transpose(),
                                                              x.row(c).transpose()));
    const AvmaxResult r = avmax(PixelCloud::from_spectra(x), 3, 10, seed);
    CHECK(r.volume == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("avmax volume never decreases and errors are typed") {
  std::mt19937_64 rng(8);
  const RowMatrix x = mixed_pixels(random_endmembers(4, 15, 2), 300, rng);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AvmaxResult r = avmax(PixelCloud::from_spectra(x), 4, 1, seed);
    REQUIRE(!r.volume_trace.empty());
    for (std::size_t i = 1; i < r.volume_trace.size(); ++i) CHECK(r.volume_trace[i] >= r.volume_trace[i - 1]);
    CHECK(r.volume == doctest::Approx(r.volume_trace.back()).epsilon(1e-12));
  }
  CHECK_THROWS_AS(avmax(PixelCloud::from_spectra(x.topRows(3)), 4, 1, 0), ConfigError);
  RowMatrix flat(5, 3);
  flat << 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4;
  CHECK_THROWS_AS(avmax(PixelCloud::from_spectra(flat), 3, 2, 0), NumericalError);
}

TEST_CASE("nnls hand cases") {
  Matrix e(3, 4);
  e << 1, 2, 0, 1, 0, 1, 3, 1, 2, 0, 1, 0;
  for (int j = 0; j < 3; ++j) {
    const Vector a = nnls(e, e.row(j).transpose());
    CHECK((a - Vector::Unit(3, j)).norm() <= 1e-12);
  }

  Matrix orth(2, 3);
  orth << 1, 0, 0, 0, 2, 0;
  const Vector a = nnls(orth, (0.3 * orth.row(0) + 0.7 * orth.row(1)).transpose());
  CHECK(a[0] == doctest::Approx(0.3));
  CHECK(a[1] == doctest::Approx(0.7));

  // The unconstrained optimum has a negative weight; it must be clipped.
  Matrix one(1, 2);
  one << 1, 1;
  CHECK(nnls(one, Vector::Constant(2, -1.0))[0] == 0.0);
  CHECK_THROWS_AS(nnls(e, Vector::Zero(3)), ConfigError);
}

TEST_CASE("nnls matches the projected-gradient oracle and satisfies KKT") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 40; ++trial) {
    const Matrix e = Matrix::NullaryExpr(3, 10, [&] { return gauss(rng); });
    const Vector x = Vector::NullaryExpr(10, [&] { return gauss(rng); });
    const Vector a = nnls(e, x);
    const Matrix at = e.transpose();
    const Vector ref = oracle::projected_gradient_nnls(at, x, 20000);
    const double f = 0.5 * (at * a - x).squaredNorm();
    const double f_ref = 0.5 * (at * ref - x).squaredNorm();
    CHECK(std::abs(f - f_ref) <= 1e-8 * std::max(1.0, f_ref));

    const Vector grad = at.transpose() * (at * a - x);
    const double tol = 1e-9 * (at.norm() * x.norm() + 1.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(a[k] >= 0.0);
      if (a[k] > 0.0) {
        CHECK(std::abs(grad[k]) <= tol);
      } else {
        CHECK(grad[k] >= -tol);
      }
    }
  }
}

TEST_CASE("purity examples and range") {
  Matrix a(4, 3);
  a << 1, 0, 0, 0.5, 0.5, 0, 0, 0, 0, 2, 1, 1;
  const PurityField p = purity(a);
  CHECK(p.eta[0] == 1.0);
  CHECK(p.eta[1] == doctest::Approx(0.5));
  CHECK(p.eta[2] == doctest::Approx(1.0 / 3.0));
  CHECK(p.eta[3] == doctest::Approx(0.5));
  CHECK(p.etahat.maxCoeff() == 1.0);

  CHECK(purity(Matrix::Zero(1, 4)).eta[0] == doctest::Approx(0.25));

  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Matrix r = Matrix::NullaryExpr(200, 5, [&] { return unit(rng) < 0.3 ? 0.0 : unit(rng); });
  const PurityField q = purity(r);
  CHECK(q.eta.minCoeff() > 0.0);
  CHECK(q.eta.maxCoeff() <= 1.0);
  CHECK(q.etahat.maxCoeff() == 1.0);
}

TEST_CASE("unmix uses the hysime count unless p is given") {
  std::mt19937_64 rng(11);
  const RowMatrix x = mixed_pixels(random_endmembers(3, 20, 12), 300, rng);
  const PixelCloud cloud = PixelCloud::from_spectra(x);
  CHECK(unmix(cloud).p() == 3);
  UnmixingOptions fixed;
  fixed.p = 2;
  const UnmixingModel model = unmix(cloud, fixed);
  CHECK(model.p() == 2);
  CHECK(model.abundances.rows() == 300);
  CHECK(model.abundances.minCoeff() >= 0.0);
}
