#pragma once

// Agreement between a clustering and ground truth after optimal relabeling.
// Pixels with ground-truth label 0 are ignored throughout.

#include "dsirc/core.hpp"

#include <cstdint>
#include <vector>

namespace dsirc {

/// counts(p - 1, g - 1) = pixels with predicted label p and GT label g > 0.
///
/// Predicted label 0 (unassigned) gets no row and never counts as a match.
class ConfusionMatrix {
 public:
  ConfusionMatrix(const LabelMap& pred, const LabelMap& gt);

  /// Hand-built matrix; rows are predicted labels, columns GT classes.
  static ConfusionMatrix from_counts(std::vector<std::vector<std::int64_t>> counts);

  int predicted_classes() const { return static_cast<int>(counts_.size()); }
  int truth_classes() const { return gt_classes_; }
  std::int64_t count(int pred, int gt) const { return counts_[pred][gt]; }

  /// GT-labeled pixels, including those predicted as 0.
  std::int64_t total() const { return total_; }
  std::int64_t trace() const;
  std::int64_t row_sum(int pred) const;
  std::int64_t col_sum(int gt) const;

 private:
  ConfusionMatrix() = default;

  std::vector<std::vector<std::int64_t>> counts_;
  int gt_classes_ = 0;
  std::int64_t total_ = 0;
};

/// Minimum-cost assignment of rows to columns of a rows <= cols cost matrix.
///
/// Returns the column of every row; O(rows^2 cols).
std::vector<int> hungarian(const Matrix& cost);

/// Relabels `pred` so that predicted clusters are matched one-to-one with GT
/// classes maximizing agreement; surplus clusters go to their most overlapping
/// class (smallest class on ties), clusters that never meet a GT pixel keep a
/// fresh label above every GT class.
LabelMap align_labels(const LabelMap& pred, const LabelMap& gt);

/// Fraction of GT-labeled pixels with pred == gt.
double overall_accuracy(const LabelMap& pred, const LabelMap& gt);
double overall_accuracy(const ConfusionMatrix& cm);

/// (OA - p_e) / (1 - p_e), p_e = sum_c row_c * col_c / total^2.
double cohens_kappa(const LabelMap& pred, const LabelMap& gt);
double cohens_kappa(const ConfusionMatrix& cm);

}  // namespace dsirc
