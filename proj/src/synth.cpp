#include "dsirc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace dsirc {

namespace {

constexpr int kMaxEndmemberDraws = 1000;
constexpr double kMaxEndmemberCorrelation = 0.9;

double pearson(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  const double den = ac.norm() * bc.norm();
  return den > 0.0 ? ac.dot(bc) / den : 1.0;
}

// Blob index along one axis plus the share of the owner and of the blob across the nearest border.
struct AxisWeight {
  int blob = 0;
  int other = -1;
  double owner = 1.0;
};

std::vector<AxisWeight> axis_weights(int extent, int blobs, double mixing_width) {
  std::vector<int> edge(blobs + 1);
  for (int k = 0; k <= blobs; ++k) {
    edge[k] = static_cast<int>(std::lround(static_cast<double>(k) * extent / blobs));
  }
  std::vector<AxisWeight> out(extent);
  for (int b = 0; b < blobs; ++b) {
    for (int x = edge[b]; x < edge[b + 1]; ++x) {
      AxisWeight& w = out[x];
      w.blob = b;
      const double center = x + 0.5;
      double d = std::numeric_limits<double>::infinity();
      if (b > 0) {
        d = center - edge[b];
        w.other = b - 1;
      }
      if (b + 1 < blobs && edge[b + 1] - center < d) {
        d = edge[b + 1] - center;
        w.other = b + 1;
      }
      if (w.other < 0) continue;
      w.owner = mixing_width > 0.0 ? 0.5 + 0.5 * std::min(1.0, d / mixing_width) : 1.0;
      if (w.owner >= 1.0) w.other = -1;
    }
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (height < 1 || width < 1) throw ConfigError("synthetic scene needs at least one pixel");
  if (bands < 2) throw ConfigError("synthetic scene needs at least two bands");
  if (endmembers < 2) throw ConfigError("synthetic scene needs p >= 2 endmembers");
  if (blob_rows < 1 || blob_cols < 1 || blob_rows > height || blob_cols > width) {
    throw ConfigError("blob grid must have 1..H rows and 1..W columns");
  }
  if (!(mixing_width >= 0.0) || !std::isfinite(mixing_width)) throw ConfigError("mixing width must be >= 0");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise level must be >= 0");
  auto owner = [&](int r, int c) { return (r * blob_cols + c) % endmembers; };
  for (int r = 0; r < blob_rows; ++r) {
    for (int c = 0; c < blob_cols; ++c) {
      for (int dr = 0; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc <= 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr >= blob_rows || cc < 0 || cc >= blob_cols) continue;
          if (owner(r, c) == owner(rr, cc)) {
            throw ConfigError("blob grid " + std::to_string(blob_rows) + "x" + std::to_string(blob_cols) +
                              " puts the same endmember in touching blobs; change p or the grid");
          }
        }
      }
    }
  }
}

Matrix random_endmembers(int p, int bands, std::uint64_t seed) {
  if (p < 1 || bands < 2) throw ConfigError("random_endmembers: need p >= 1 and at least two bands");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> bump_count(2, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double last = bands - 1;

  std::vector<Vector> accepted;
  for (int draw = 0; draw < kMaxEndmemberDraws && static_cast<int>(accepted.size()) < p; ++draw) {
    Vector s = Vector::Zero(bands);
    const int bumps = bump_count(rng);
    for (int k = 0; k < bumps; ++k) {
      const double center = unit(rng) * last;
      const double width = (0.03 + 0.15 * unit(rng)) * bands + 0.5;
      const double height = 0.2 + 0.8 * unit(rng);
      for (int b = 0; b < bands; ++b) {
        const double z = (b - center) / width;
        s[b] += height * std::exp(-0.5 * z * z);
      }
    }
    const double top = s.maxCoeff();
    if (top > 1.0) s /= top;
    bool ok = s.maxCoeff() > s.minCoeff();
    for (const Vector& a : accepted) ok = ok && pearson(a, s) <= kMaxEndmemberCorrelation;
    if (ok) accepted.push_back(std::move(s));
  }
  if (static_cast<int>(accepted.size()) < p) {
    throw ConfigError("could not draw " + std::to_string(p) + " endmembers with pairwise correlation <= 0.9 in " +
                      std::to_string(kMaxEndmemberDraws) + " draws; use more bands");
  }
  Matrix e(p, bands);
  for (int k = 0; k < p; ++k) e.row(k) = accepted[k].transpose();
  return e;
}

SynthScene synth_hsi(const SynthConfig& config) {
  config.validate();
  const int h = config.height, w = config.width, bands = config.bands, p = config.endmembers;
  const int n = h * w;
  const Matrix e = random_endmembers(p, bands, config.seed);

  const std::vector<AxisWeight> rows = axis_weights(h, config.blob_rows, config.mixing_width);
  const std::vector<AxisWeight> cols = axis_weights(w, config.blob_cols, config.mixing_width);
  auto owner = [&](int br, int bc) { return (br * config.blob_cols + bc) % p; };

  Matrix a = Matrix::Zero(n, p);
  LabelMap gt(n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int i = r * w + c;
      const AxisWeight& rw = rows[r];
      const AxisWeight& cw = cols[c];
      gt[i] = owner(rw.blob, cw.blob) + 1;
      const int rb[2] = {rw.blob, rw.other};
      const double rs[2] = {rw.owner, 1.0 - rw.owner};
      const int cb[2] = {cw.blob, cw.other};
      const double cs[2] = {cw.owner, 1.0 - cw.owner};
      for (int u = 0; u < 2; ++u) {
        if (rb[u] < 0) continue;
        for (int v = 0; v < 2; ++v) {
          if (cb[v] < 0) continue;
          a(i, owner(rb[u], cb[v])) += rs[u] * cs[v];
        }
      }
    }
  }

  const Matrix x = a * e;  // N x B
  std::vector<double> clean(static_cast<std::size_t>(n) * bands);
  for (int b = 0; b < bands; ++b) {
    for (int i = 0; i < n; ++i) clean[static_cast<std::size_t>(b) * n + i] = x(i, b);
  }
  const auto [lo, hi] = std::minmax_element(clean.begin(), clean.end());
  const double sigma = config.noise * (*hi - *lo);

  std::vector<double> noisy = clean;
  if (sigma > 0.0) {
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& v : noisy) v += gauss(rng);
  }

  return SynthScene{ImageCube(h, w, bands, std::move(noisy)), ImageCube(h, w, bands, std::move(clean)),
                    std::move(gt), e, std::move(a)};
}

}  // namespace dsirc
