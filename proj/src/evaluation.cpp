#include "dsirc/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace dsirc {

namespace {

void check_maps(const LabelMap& pred, const LabelMap& gt) {
  if (pred.size() != gt.size()) {
    throw ConfigError("label maps differ in length (" + std::to_string(pred.size()) + " vs " +
                      std::to_string(gt.size()) + ")");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || gt[i] < 0) throw ConfigError("labels must be >= 0 (pixel " + std::to_string(i) + ")");
  }
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(const LabelMap& pred, const LabelMap& gt) {
  check_maps(pred, gt);
  int kp = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] > 0) {
      kp = std::max(kp, pred[i]);
      gt_classes_ = std::max(gt_classes_, gt[i]);
    }
  }
  counts_.assign(kp, std::vector<std::int64_t>(gt_classes_, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] == 0) continue;
    ++total_;
    if (pred[i] > 0) ++counts_[pred[i] - 1][gt[i] - 1];
  }
}

ConfusionMatrix ConfusionMatrix::from_counts(std::vector<std::vector<std::int64_t>> counts) {
  ConfusionMatrix cm;
  cm.gt_classes_ = counts.empty() ? 0 : static_cast<int>(counts.front().size());
  for (const auto& row : counts) {
    if (static_cast<int>(row.size()) != cm.gt_classes_) throw ConfigError("confusion matrix rows differ in length");
    for (std::int64_t c : row) {
      if (c < 0) throw ConfigError("confusion counts must be >= 0");
      cm.total_ += c;
    }
  }
  cm.counts_ = std::move(counts);
  return cm;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (int c = 0; c < std::min(predicted_classes(), gt_classes_); ++c) s += counts_[c][c];
  return s;
}

std::int64_t ConfusionMatrix::row_sum(int pred) const {
  std::int64_t s = 0;
  for (std::int64_t c : counts_[pred]) s += c;
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int gt) const {
  std::int64_t s = 0;
  for (const auto& row : counts_) s += row[gt];
  return s;
}

std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw ConfigError("hungarian: more rows than columns");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();

  // Potentials u (rows), v (columns); way[j] is the previous column on the augmenting path.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (match[j] != 0) assignment[match[j] - 1] = j - 1;
  }
  return assignment;
}

LabelMap align_labels(const LabelMap& pred, const LabelMap& gt) {
  check_maps(pred, gt);
  int kp = 0, kg = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    kp = std::max(kp, pred[i]);
    kg = std::max(kg, gt[i]);
  }
  Matrix overlap = Matrix::Zero(kp, kg);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 0 && gt[i] > 0) overlap(pred[i] - 1, gt[i] - 1) += 1.0;
  }

  std::vector<int> target(kp, -1);
  if (kp > 0 && kg > 0) {
    if (kp <= kg) {
      target = hungarian(-overlap);
    } else {
      const std::vector<int> cluster_of_class = hungarian(-overlap.transpose());
      for (int g = 0; g < kg; ++g) target[cluster_of_class[g]] = g;
      for (int p = 0; p < kp; ++p) {
        if (target[p] >= 0) continue;
        Eigen::Index best = 0;
        if (overlap.row(p).maxCoeff(&best) > 0.0) target[p] = static_cast<int>(best);
      }
    }
  }

  // Clusters that meet no GT pixel and were left unmatched get labels above kg.
  std::vector<int> relabel(kp + 1, 0);
  int fresh = kg;
  for (int p = 0; p < kp; ++p) relabel[p + 1] = target[p] >= 0 ? target[p] + 1 : ++fresh;
  LabelMap out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = relabel[pred[i]];
  return out;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("no ground-truth labeled pixels to evaluate");
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

double overall_accuracy(const LabelMap& pred, const LabelMap& gt) {
  return overall_accuracy(ConfusionMatrix(pred, gt));
}

double cohens_kappa(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("no ground-truth labeled pixels to evaluate");
  // kappa = (n * trace - sum row*col) / (n^2 - sum row*col), kept in integers until the final division.
  const std::int64_t n = cm.total();
  std::int64_t chance = 0;
  for (int c = 0; c < std::min(cm.predicted_classes(), cm.truth_classes()); ++c) {
    chance += cm.row_sum(c) * cm.col_sum(c);
  }
  const std::int64_t den = n * n - chance;
  if (den == 0) return cm.trace() == n ? 1.0 : 0.0;
  return static_cast<double>(n * cm.trace() - chance) / static_cast<double>(den);
}

double cohens_kappa(const LabelMap& pred, const LabelMap& gt) { return cohens_kappa(ConfusionMatrix(pred, gt)); }

}  // namespace dsirc
