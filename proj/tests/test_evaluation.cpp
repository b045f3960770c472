#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsirc/evaluation.hpp"
#include "oracles.hpp"

#include <random>

using namespace dsirc;

namespace {

LabelMap relabel(const LabelMap& labels, const std::vector<int>& perm) {
  LabelMap out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == 0 ? 0 : perm[labels[i] - 1];
  return out;
}

LabelMap random_labels(int n, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(1, k);
  LabelMap out(n);
  for (int& l : out) l = pick(rng);
  return out;
}

}  // namespace

TEST_CASE("overall accuracy examples") {
  const LabelMap gt{1, 2, 2, 1};
  CHECK(overall_accuracy(gt, gt) == 1.0);
  CHECK(overall_accuracy(LabelMap{1, 2, 1, 1}, gt) == 0.75);

  LabelMap balanced, constant;
  for (int c = 1; c <= 16; ++c)
    for (int r = 0; r < 5; ++r) {
      balanced.push_back(c);
      constant.push_back(1);
    }
  CHECK(overall_accuracy(constant, balanced) == 1.0 / 16.0);
}

TEST_CASE("kappa examples") {
  const LabelMap gt{1, 2, 2, 1};
  CHECK(cohens_kappa(gt, gt) == 1.0);
  CHECK(cohens_kappa(LabelMap{1, 1, 2, 2}, LabelMap{1, 2, 1, 2}) == 0.0);

  const ConfusionMatrix cm = ConfusionMatrix::from_counts({{40, 10}, {20, 30}});
  CHECK(overall_accuracy(cm) == 0.7);
  CHECK(cohens_kappa(cm) == 0.4);

  // OA = 85/100, p_e = (50*45 + 50*55) / 100^2 = 0.5, kappa = 0.35 / 0.5.
  const ConfusionMatrix cm2 = ConfusionMatrix::from_counts({{40, 10}, {5, 45}});
  CHECK(cohens_kappa(cm2) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("background pixels are excluded and unassigned pixels count as errors") {
  const LabelMap gt{0, 1, 1, 2, 0};
  const LabelMap pred{3, 1, 0, 2, 1};
  const ConfusionMatrix cm(pred, gt);
  CHECK(cm.total() == 3);
  CHECK(cm.trace() == 2);
  CHECK(overall_accuracy(cm) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(overall_accuracy(LabelMap{1, 2}, LabelMap{0, 0}), ConfigError);
  CHECK_THROWS_AS(overall_accuracy(LabelMap{1}, LabelMap{1, 2}), ConfigError);
  CHECK_THROWS_AS(overall_accuracy(LabelMap{-1}, LabelMap{1}), ConfigError);
}

TEST_CASE("align_labels hand cases") {
  const LabelMap gt{1, 1, 2, 2, 3, 3};
  CHECK(align_labels(gt, gt) == gt);
  const LabelMap swapped{2, 2, 1, 1, 3, 3};
  CHECK(align_labels(swapped, gt) == gt);

  // Four clusters, two classes: the extra clusters join their best class.
  const LabelMap pred{1, 2, 3, 3, 4, 4};
  const LabelMap two{1, 1, 2, 2, 2, 2};
  CHECK(align_labels(pred, two) == LabelMap{1, 1, 2, 2, 2, 2});

  // A cluster with no labeled pixels keeps a label outside the GT range.
  CHECK(align_labels(LabelMap{1, 2, 3}, LabelMap{1, 2, 0}) == LabelMap{1, 2, 3});
}

TEST_CASE("hungarian finds the minimum-cost assignment") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 1 + trial % 5;
    const int cols = rows + trial % 3;
    const Matrix cost = Matrix::NullaryExpr(rows, cols, [&] { return unit(rng); });
    const std::vector<int> a = hungarian(cost);
    double total = 0.0;
    std::vector<bool> used(cols, false);
    for (int r = 0; r < rows; ++r) {
      REQUIRE(a[r] >= 0);
      CHECK(!used[a[r]]);
      used[a[r]] = true;
      total += cost(r, a[r]);
    }
    CHECK(-total == doctest::Approx(oracle::best_assignment_agreement(-cost)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(hungarian(Matrix::Zero(3, 2)), ConfigError);
}

TEST_CASE("aligned OA is at least OA under every one-to-one relabeling") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 2 + trial % 4;
    const LabelMap gt = random_labels(120, k, rng);
    LabelMap pred = gt;
    std::uniform_int_distribution<int> noise(0, 2);
    for (int& l : pred)
      if (noise(rng) == 0) l = 1 + static_cast<int>(rng() % k);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    pred = relabel(pred, perm);

    const double aligned = overall_accuracy(align_labels(pred, gt), gt);
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 1);
    double best = 0.0;
    do best = std::max(best, overall_accuracy(relabel(pred, p), gt));
    while (std::next_permutation(p.begin(), p.end()));
    CHECK(aligned == best);
  }
}

TEST_CASE("metric properties on random label maps") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + trial % 5;
    const LabelMap gt = random_labels(200, k, rng);
    LabelMap pred = random_labels(200, k, rng);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (rng() % 2) pred[i] = gt[i];
    const double oa = overall_accuracy(pred, gt);
    const double kappa = cohens_kappa(pred, gt);
    CHECK(kappa <= oa);
    CHECK(kappa >= -1.0);

    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(overall_accuracy(relabel(pred, perm), relabel(gt, perm)) == oa);
    CHECK(cohens_kappa(relabel(pred, perm), relabel(gt, perm)) == doctest::Approx(kappa).epsilon(1e-14));
  }
  const LabelMap gt{1, 2, 3, 1};
  CHECK(cohens_kappa(gt, gt) == 1.0);
  CHECK(cohens_kappa(LabelMap{1, 2, 3, 2}, gt) < 1.0);
}
