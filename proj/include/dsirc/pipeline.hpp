#pragma once

// End-to-end runs: configuration, input loading, multi-seed clustering,
// evaluation and artifact export, plus the hyperparameter sweep.

#include "dsirc/clustering.hpp"
#include "dsirc/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dsirc {

enum class Algorithm { Dsirc, Dvic, KMeans, Spectral };

/// "dsirc", "dvic", "kmeans" or "sc".
Algorithm parse_algorithm(const std::string& text);
std::string to_string(Algorithm algorithm);

struct PipelineConfig {
  Algorithm algorithm = Algorithm::Dsirc;
  /// 0 takes the number of ground-truth classes.
  int clusters = 0;
  int k_n = 100;
  /// KDE bandwidth; median k_n-th neighbor distance when empty ("auto").
  std::optional<double> sigma0;
  double t = 30.0;
  double tau = 2.0;
  std::vector<int> lengths{1, 2, 3, 5, 7, 9};
  int restarts = 10;
  std::uint64_t seed = 0;
  /// Number of trials; trial s uses seed + s.
  int seeds = 1;
  /// Endmember count; HySime estimate when empty.
  std::optional<int> endmembers;
  bool normalize = false;

  /// ENVI header of the cube.
  std::string input;
  /// Raw data file; found next to the header when empty.
  std::string data;
  /// Ground truth: label CSV or single-band ENVI header. Optional for `cluster`.
  std::string gt;
  std::string output = "dsirc_out";

  std::vector<int> grid_kn{20, 50, 100, 200};
  std::vector<double> grid_t{10, 30, 100};
  /// Empty entries mean "auto".
  std::vector<std::optional<double>> grid_sigma0{std::nullopt};
  std::vector<double> grid_tau{1, 2, 3};

  /// Assigns one setting from its text form; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Range checks that do not need the data.
  void validate() const;

  /// Every setting as "key = value" lines, readable by apply_config_file.
  std::string echo() const;
};

/// Applies a flat "key = value" file ('#' starts a comment) on top of `config`.
void apply_config_file(PipelineConfig& config, const std::string& path);

struct SceneInput {
  ImageCube cube;
  /// Empty when no ground truth was given.
  LabelMap gt;
};

/// Loads the cube and, when configured, the ground truth.
SceneInput load_scene(const PipelineConfig& config);

/// Reads ground truth from a label CSV or a single-band ENVI cube (values rounded).
LabelMap load_ground_truth(const std::string& path);

/// One clustering with the configured algorithm and an explicit seed.
Clustering run_algorithm(const PixelCloud& cloud, const PipelineConfig& config, int clusters,
                         std::uint64_t seed);

struct TrialResult {
  std::uint64_t seed = 0;
  LabelMap labels;  // aligned to the ground truth when one is given
  std::optional<double> oa;
  std::optional<double> kappa;
};

struct PipelineReport {
  Algorithm algorithm = Algorithm::Dsirc;
  int clusters = 0;
  std::vector<TrialResult> trials;
  std::optional<double> oa_mean, oa_std, kappa_mean, kappa_std;

  /// {algorithm, OA, kappa, K, seed, params, ...} as JSON text.
  std::string metrics_json(const PipelineConfig& config) const;
};

/// Clusters every trial of an already loaded scene.
PipelineReport cluster_scene(const SceneInput& scene, const PipelineConfig& config);

/// Loads, clusters and writes labels (CSV, PPM, PGM), metrics.json and params.txt
/// to config.output. Single-trial labels go to the output directory itself,
/// multi-trial labels to seed_<seed>/ subdirectories.
PipelineReport run_pipeline(const PipelineConfig& config);

struct SweepPoint {
  int k_n = 0;
  double t = 0.0;
  std::optional<double> sigma0;
  double tau = 0.0;
  double oa = 0.0;
  double kappa = 0.0;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  std::size_t best = 0;
  LabelMap best_labels;
};

/// Grid search over k_n, t, sigma0 and tau for one seed; requires ground truth.
///
/// Each point gives the same labels as run_algorithm with that setting.
/// Parameters an algorithm ignores are not swept.
SweepReport sweep_scene(const SceneInput& scene, const PipelineConfig& config);

/// sweep_scene plus sweep.csv, sweep.json and the best labels in config.output.
SweepReport run_sweep(const PipelineConfig& config);

}  // namespace dsirc
