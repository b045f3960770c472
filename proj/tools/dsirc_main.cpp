// dsirc: unsupervised hyperspectral clustering from the command line.
//
//   dsirc synth   --output scene/
//   dsirc cluster --input scene/cube.hdr --gt scene/gt.csv --k 4 --output run/
//   dsirc eval    --pred run/labels.csv --gt scene/gt.csv
//   dsirc sweep   --input scene/cube.hdr --gt scene/gt.csv --output sweep/
//
// Exit status: 0 success, 1 algorithm failure, 2 I/O or configuration error.

#include "dsirc/evaluation.hpp"
#include "dsirc/pipeline.hpp"
#include "dsirc/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace {

namespace fs = std::filesystem;

constexpr int kExitAlgorithm = 1;
constexpr int kExitUsage = 2;

// Pipeline settings given on the command line, applied after any --config file.
struct Overrides {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  CLI::Option* normalize = nullptr;
  bool normalize_flag = false;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options[key] = app->add_option(flag, values[key], help);
  }

  void apply(dsirc::PipelineConfig& config) const {
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) config.set(key, values.at(key));
    }
    if (normalize && normalize->count() > 0) config.normalize = normalize_flag;
  }
};

void add_pipeline_options(CLI::App* app, Overrides& o, std::string& config_path, bool sweep) {
  app->add_option("--config", config_path, "key = value file; command-line flags take precedence");
  o.add(app, "-i,--input", "input", "ENVI header of the cube");
  o.add(app, "--data", "data", "raw data file (default: next to the header)");
  o.add(app, "--gt", "gt", "ground truth: label CSV or single-band ENVI header");
  o.add(app, "-o,--output", "output", "output directory");
  o.add(app, "--algorithm", "algorithm", "dsirc, dvic, kmeans or sc");
  o.add(app, "--k", "k", "number of clusters (0: ground-truth class count)");
  o.add(app, "--kn", "kn", "nearest neighbors for density and graph");
  o.add(app, "--sigma0", "sigma0", "KDE bandwidth or 'auto'");
  o.add(app, "--t", "t", "diffusion time");
  o.add(app, "--tau", "tau", "ICI threshold");
  o.add(app, "--lsar", "lsar", "comma-separated ICI kernel lengths");
  o.add(app, "--restarts", "restarts", "AVMAX and k-means restarts");
  o.add(app, "--seed", "seed", "random seed");
  o.add(app, "--p", "p", "endmember count or 'auto' (HySime)");
  o.normalize = app->add_flag("--normalize,!--no-normalize", o.normalize_flag, "scale spectra to unit norm");
  if (sweep) {
    o.add(app, "--grid-kn", "grid.kn", "k_n values, comma-separated");
    o.add(app, "--grid-t", "grid.t", "t values, comma-separated");
    o.add(app, "--grid-sigma0", "grid.sigma0", "sigma0 values or 'auto', comma-separated");
    o.add(app, "--grid-tau", "grid.tau", "tau values, comma-separated");
  } else {
    o.add(app, "--seeds", "seeds", "number of trials (seed, seed + 1, ...)");
  }
}

dsirc::PipelineConfig build_config(const std::string& config_path, const Overrides& o) {
  dsirc::PipelineConfig config;
  if (!config_path.empty()) dsirc::apply_config_file(config, config_path);
  o.apply(config);
  return config;
}

void write_matrix_csv(const fs::path& path, const dsirc::Matrix& m) {
  std::ofstream out(path);
  if (!out) throw dsirc::IoError("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

int run_synth(const dsirc::SynthConfig& config, const std::string& output) {
  const dsirc::SynthScene scene = dsirc::synth_hsi(config);
  std::error_code ec;
  fs::create_directories(output, ec);
  if (!fs::is_directory(output)) throw dsirc::IoError("cannot create output directory " + output);
  const fs::path out(output);
  dsirc::save_envi(scene.cube, (out / "cube.hdr").string(), (out / "cube.raw").string());
  dsirc::save_envi(scene.clean, (out / "clean.hdr").string(), (out / "clean.raw").string());
  dsirc::write_label_csv((out / "gt.csv").string(), scene.gt, config.width);
  dsirc::write_label_ppm((out / "gt.ppm").string(), scene.gt, config.height, config.width);
  write_matrix_csv(out / "endmembers.csv", scene.endmembers);
  write_matrix_csv(out / "abundances.csv", scene.abundances);
  std::cout << "wrote " << config.height << "x" << config.width << "x" << config.bands << " scene with "
            << config.endmembers << " endmembers to " << output << '\n';
  return 0;
}

int run_cluster_command(const dsirc::PipelineConfig& config) {
  const dsirc::PipelineReport report = dsirc::run_pipeline(config);
  std::cout << "algorithm " << dsirc::to_string(report.algorithm) << ", K = " << report.clusters << ", "
            << report.trials.size() << " trial(s)\n";
  for (const auto& t : report.trials) {
    std::cout << "  seed " << t.seed;
    if (t.oa) std::cout << "  OA " << *t.oa << "  kappa " << *t.kappa;
    std::cout << '\n';
  }
  if (report.oa_mean) {
    std::cout << "mean OA " << *report.oa_mean << " (sd " << *report.oa_std << "), mean kappa " << *report.kappa_mean
              << " (sd " << *report.kappa_std << ")\n";
  }
  std::cout << "results in " << config.output << '\n';
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_path, const std::string& output) {
  if (!fs::is_regular_file(pred_path)) throw dsirc::IoError("predicted labels not found: " + pred_path);
  const dsirc::LabelMap pred = dsirc::read_label_csv(pred_path);
  const dsirc::LabelMap gt = dsirc::load_ground_truth(gt_path);
  const dsirc::LabelMap aligned = dsirc::align_labels(pred, gt);
  const dsirc::ConfusionMatrix cm(aligned, gt);
  nlohmann::ordered_json j;
  j["OA"] = dsirc::overall_accuracy(cm);
  j["kappa"] = dsirc::cohens_kappa(cm);
  j["labeled_pixels"] = cm.total();
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!output.empty()) {
    std::ofstream out(output);
    if (!out || !(out << text)) throw dsirc::IoError("cannot write " + output);
  }
  return 0;
}

int run_sweep_command(const dsirc::PipelineConfig& config) {
  const dsirc::SweepReport report = dsirc::run_sweep(config);
  const dsirc::SweepPoint& b = report.points.at(report.best);
  std::cout << report.points.size() << " settings evaluated; best OA " << b.oa << " (kappa " << b.kappa
            << ") at k_n = " << b.k_n << ", t = " << b.t << ", sigma0 = "
            << (b.sigma0 ? std::to_string(*b.sigma0) : std::string("auto")) << ", tau = " << b.tau << '\n'
            << "results in " << config.output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised hyperspectral image clustering"};
  app.require_subcommand(1);

  dsirc::SynthConfig synth;
  std::string synth_output = "scene";
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic mixed scene with ground truth");
  synth_cmd->add_option("--height", synth.height, "rows")->capture_default_str();
  synth_cmd->add_option("--width", synth.width, "columns")->capture_default_str();
  synth_cmd->add_option("--bands", synth.bands, "spectral bands")->capture_default_str();
  synth_cmd->add_option("--p", synth.endmembers, "endmembers")->capture_default_str();
  synth_cmd->add_option("--blob-rows", synth.blob_rows, "blob rows")->capture_default_str();
  synth_cmd->add_option("--blob-cols", synth.blob_cols, "blob columns")->capture_default_str();
  synth_cmd->add_option("--mixing-width", synth.mixing_width, "border blend width in pixels")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "noise sd as a fraction of the signal range")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("-o,--output", synth_output, "output directory")->capture_default_str();

  Overrides cluster_overrides, sweep_overrides;
  std::string cluster_config, sweep_config;
  CLI::App* cluster_cmd = app.add_subcommand("cluster", "cluster a cube and export labels and metrics");
  add_pipeline_options(cluster_cmd, cluster_overrides, cluster_config, false);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid search over k_n, t, sigma0 and tau reporting the best OA");
  add_pipeline_options(sweep_cmd, sweep_overrides, sweep_config, true);

  std::string pred_path, gt_path, eval_output;
  CLI::App* eval_cmd = app.add_subcommand("eval", "OA and kappa of a label CSV after optimal alignment");
  eval_cmd->add_option("--pred", pred_path, "predicted label CSV")->required();
  eval_cmd->add_option("--gt", gt_path, "ground truth: label CSV or single-band ENVI header")->required();
  eval_cmd->add_option("-o,--output", eval_output, "also write the metrics JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth, synth_output);
    if (cluster_cmd->parsed()) return run_cluster_command(build_config(cluster_config, cluster_overrides));
    if (sweep_cmd->parsed()) return run_sweep_command(build_config(sweep_config, sweep_overrides));
    if (eval_cmd->parsed()) return run_eval(pred_path, gt_path, eval_output);
  } catch (const dsirc::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const dsirc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAlgorithm;
  }
  return kExitUsage;
}
