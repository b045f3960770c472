#include "dsirc/pipeline.hpp"

#include "dsirc/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dsirc {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("setting '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  if (out.empty()) throw ConfigError("setting '" + key + "' needs at least one value");
  return out;
}

std::optional<double> parse_auto_double(const std::string& key, const std::string& text) {
  if (lower(trim(text)) == "auto") return std::nullopt;
  return parse_number<double>(key, text);
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = lower(trim(text));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("setting '" + key + "': expected true or false, got '" + text + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }

template <class T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::optional<double>> || std::is_same_v<T, double>) {
      out += fmt(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

// Re-raises library errors with the failing stage prepended, keeping their type.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const IoError& e) {
    throw IoError(name + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(name + ": " + e.what());
  }
}

bool ends_with_hdr(const std::string& path) {
  return path.size() >= 4 && lower(path.substr(path.size() - 4)) == ".hdr";
}

std::string find_data_file(const std::string& header) {
  const std::string stem = ends_with_hdr(header) ? header.substr(0, header.size() - 4) : header;
  std::vector<std::string> tried;
  for (const char* ext : {"", ".raw", ".img", ".dat", ".bsq", ".bil", ".bip"}) {
    const std::string candidate = stem + ext;
    if (candidate == header) continue;
    tried.push_back(candidate);
    if (fs::is_regular_file(candidate)) return candidate;
  }
  std::string list;
  for (const auto& t : tried) list += (list.empty() ? "" : ", ") + t;
  throw IoError("no raw data file found for header " + header + " (tried " + list + ")");
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path);
}

int resolve_clusters(const PipelineConfig& config, const LabelMap& gt) {
  if (config.clusters > 0) return config.clusters;
  const int classes = gt.empty() ? 0 : *std::max_element(gt.begin(), gt.end());
  if (classes < 1) throw ConfigError("cluster count K is not set and there is no ground truth to take it from");
  return classes;
}

void write_labels(const fs::path& dir, const LabelMap& labels, int height, int width) {
  fs::create_directories(dir);
  write_label_csv((dir / "labels.csv").string(), labels, width);
  write_label_ppm((dir / "labels.ppm").string(), labels, height, width);
  write_label_pgm((dir / "labels.pgm").string(), labels, height, width);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void make_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

nlohmann::ordered_json params_json(const PipelineConfig& c) {
  nlohmann::ordered_json p;
  p["k_n"] = c.k_n;
  p["sigma0"] = c.sigma0 ? nlohmann::ordered_json(*c.sigma0) : nlohmann::ordered_json("auto");
  p["t"] = c.t;
  p["tau"] = c.tau;
  p["lsar"] = c.lengths;
  p["restarts"] = c.restarts;
  p["endmembers"] = c.endmembers ? nlohmann::ordered_json(*c.endmembers) : nlohmann::ordered_json("auto");
  p["normalize"] = c.normalize;
  return p;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

Algorithm parse_algorithm(const std::string& text) {
  const std::string s = lower(trim(text));
  if (s == "dsirc") return Algorithm::Dsirc;
  if (s == "dvic") return Algorithm::Dvic;
  if (s == "kmeans") return Algorithm::KMeans;
  if (s == "sc") return Algorithm::Spectral;
  throw ConfigError("unknown algorithm '" + text + "' (expected dsirc, dvic, kmeans or sc)");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Dsirc: return "dsirc";
    case Algorithm::Dvic: return "dvic";
    case Algorithm::KMeans: return "kmeans";
    case Algorithm::Spectral: return "sc";
  }
  return "dsirc";
}

void PipelineConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = lower(trim(raw_key));
  if (key == "algorithm") {
    algorithm = parse_algorithm(value);
  } else if (key == "k" || key == "clusters") {
    clusters = parse_number<int>(key, value);
  } else if (key == "kn" || key == "k_n") {
    k_n = parse_number<int>(key, value);
  } else if (key == "sigma0") {
    sigma0 = parse_auto_double(key, value);
  } else if (key == "t") {
    t = parse_number<double>(key, value);
  } else if (key == "tau") {
    tau = parse_number<double>(key, value);
  } else if (key == "lsar") {
    lengths = parse_list<int>(key, value);
  } else if (key == "restarts") {
    restarts = parse_number<int>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "seeds") {
    seeds = parse_number<int>(key, value);
  } else if (key == "p" || key == "endmembers") {
    if (lower(trim(value)) == "auto") {
      endmembers.reset();
    } else {
      endmembers = parse_number<int>(key, value);
    }
  } else if (key == "normalize") {
    normalize = parse_bool(key, value);
  } else if (key == "input") {
    input = trim(value);
  } else if (key == "data") {
    data = trim(value);
  } else if (key == "gt") {
    gt = trim(value);
  } else if (key == "output") {
    output = trim(value);
  } else if (key == "grid.kn") {
    grid_kn = parse_list<int>(key, value);
  } else if (key == "grid.t") {
    grid_t = parse_list<double>(key, value);
  } else if (key == "grid.sigma0") {
    grid_sigma0.clear();
    for (const std::string& item : split_list(value)) grid_sigma0.push_back(parse_auto_double(key, item));
    if (grid_sigma0.empty()) throw ConfigError("setting 'grid.sigma0' needs at least one value");
  } else if (key == "grid.tau") {
    grid_tau = parse_list<double>(key, value);
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

void PipelineConfig::validate() const {
  if (clusters < 0) throw ConfigError("K must be >= 1 (or 0 to use the ground-truth class count)");
  if (k_n < 1) throw ConfigError("k_n must be >= 1");
  if (sigma0 && !(*sigma0 > 0.0 && std::isfinite(*sigma0))) throw ConfigError("sigma0 must be positive or auto");
  if (!(t >= 0.0 && std::isfinite(t))) throw ConfigError("diffusion time t must be >= 0");
  IciConfig ici;
  ici.tau = tau;
  ici.lengths = lengths;
  ici.validate();
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (endmembers && *endmembers < 1) throw ConfigError("endmember count p must be >= 1 or auto");
  for (int k : grid_kn) {
    if (k < 1) throw ConfigError("grid.kn values must be >= 1");
  }
  for (double v : grid_t) {
    if (!(v >= 0.0 && std::isfinite(v))) throw ConfigError("grid.t values must be >= 0");
  }
  for (const auto& s : grid_sigma0) {
    if (s && !(*s > 0.0 && std::isfinite(*s))) throw ConfigError("grid.sigma0 values must be positive or auto");
  }
  for (double v : grid_tau) {
    if (!(v > 0.0 && std::isfinite(v))) throw ConfigError("grid.tau values must be positive");
  }
  if (grid_kn.empty() || grid_t.empty() || grid_sigma0.empty() || grid_tau.empty()) {
    throw ConfigError("sweep grids must not be empty");
  }
}

std::string PipelineConfig::echo() const {
  std::ostringstream out;
  out << "algorithm = " << to_string(algorithm) << '\n'
      << "k = " << clusters << '\n'
      << "kn = " << k_n << '\n'
      << "sigma0 = " << fmt(sigma0) << '\n'
      << "t = " << fmt(t) << '\n'
      << "tau = " << fmt(tau) << '\n'
      << "lsar = " << join(lengths) << '\n'
      << "restarts = " << restarts << '\n'
      << "seed = " << seed << '\n'
      << "seeds = " << seeds << '\n'
      << "p = " << (endmembers ? std::to_string(*endmembers) : "auto") << '\n'
      << "normalize = " << (normalize ? "true" : "false") << '\n'
      << "input = " << input << '\n'
      << "data = " << data << '\n'
      << "gt = " << gt << '\n'
      << "output = " << output << '\n'
      << "grid.kn = " << join(grid_kn) << '\n'
      << "grid.t = " << join(grid_t) << '\n'
      << "grid.sigma0 = " << join(grid_sigma0) << '\n'
      << "grid.tau = " << join(grid_tau) << '\n';
  return out.str();
}

void apply_config_file(PipelineConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      config.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

LabelMap load_ground_truth(const std::string& path) {
  require_file(path, "ground truth");
  if (!ends_with_hdr(path)) return read_label_csv(path);
  const ImageCube cube = load_envi(path, find_data_file(path));
  if (cube.bands() != 1) {
    throw IoError("ground-truth cube " + path + " has " + std::to_string(cube.bands()) + " bands, expected 1");
  }
  LabelMap labels(cube.pixel_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const long v = std::lround(cube.data()[i]);
    if (v < 0) throw IoError("ground truth " + path + " contains a negative label");
    labels[i] = static_cast<int>(v);
  }
  return labels;
}

SceneInput load_scene(const PipelineConfig& config) {
  require_file(config.input, "input cube header");
  const std::string data = config.data.empty() ? find_data_file(config.input) : config.data;
  require_file(data, "input cube data");
  SceneInput scene{load_envi(config.input, data), {}};
  if (!config.gt.empty()) {
    scene.gt = load_ground_truth(config.gt);
    if (scene.gt.size() != scene.cube.pixel_count()) {
      throw IoError("ground truth " + config.gt + " has " + std::to_string(scene.gt.size()) +
                    " pixels but the cube has " + std::to_string(scene.cube.pixel_count()));
    }
  }
  return scene;
}

Clustering run_algorithm(const PixelCloud& cloud, const PipelineConfig& config, int clusters,
                         std::uint64_t seed) {
  switch (config.algorithm) {
    case Algorithm::Dsirc:
    case Algorithm::Dvic: {
      DsircConfig d;
      d.clusters = clusters;
      d.k_n = config.k_n;
      d.sigma0 = config.sigma0;
      d.t = config.t;
      d.sar.tau = config.tau;
      d.sar.lengths = config.lengths;
      d.use_sar = config.algorithm == Algorithm::Dsirc;
      d.endmembers = config.endmembers;
      d.restarts = config.restarts;
      d.seed = seed;
      d.normalize = config.normalize;
      return dsirc(cloud, d);
    }
    case Algorithm::KMeans:
      return kmeans_clustering(config.normalize ? normalize_spectra(cloud) : cloud, clusters, config.restarts, seed);
    case Algorithm::Spectral: {
      if (config.k_n >= cloud.size()) throw ConfigError("k_n must be smaller than the pixel count");
      return spectral_clustering(config.normalize ? normalize_spectra(cloud) : cloud, clusters, config.k_n,
                                 config.restarts, seed);
    }
  }
  throw ConfigError("unknown algorithm");
}

PipelineReport cluster_scene(const SceneInput& scene, const PipelineConfig& config) {
  config.validate();
  const PixelCloud cloud = cube_to_cloud(scene.cube);
  if (!scene.gt.empty() && scene.gt.size() != static_cast<std::size_t>(cloud.size())) {
    throw ConfigError("ground truth and cube differ in pixel count");
  }
  PipelineReport report;
  report.algorithm = config.algorithm;
  report.clusters = resolve_clusters(config, scene.gt);

  std::vector<double> oas, kappas;
  for (int s = 0; s < config.seeds; ++s) {
    TrialResult trial;
    trial.seed = config.seed + static_cast<std::uint64_t>(s);
    Clustering c = stage("cluster (" + to_string(config.algorithm) + ", seed " + std::to_string(trial.seed) + ")",
                         [&] { return run_algorithm(cloud, config, report.clusters, trial.seed); });
    if (scene.gt.empty()) {
      trial.labels = std::move(c.labels);
    } else {
      stage("evaluate", [&] {
        trial.labels = align_labels(c.labels, scene.gt);
        const ConfusionMatrix cm(trial.labels, scene.gt);
        trial.oa = overall_accuracy(cm);
        trial.kappa = cohens_kappa(cm);
      });
      oas.push_back(*trial.oa);
      kappas.push_back(*trial.kappa);
    }
    report.trials.push_back(std::move(trial));
  }

  auto mean_std = [](const std::vector<double>& v, std::optional<double>& mean, std::optional<double>& sd) {
    if (v.empty()) return;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    mean = m;
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  mean_std(oas, report.oa_mean, report.oa_std);
  mean_std(kappas, report.kappa_mean, report.kappa_std);
  return report;
}

std::string PipelineReport::metrics_json(const PipelineConfig& config) const {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(algorithm);
  j["OA"] = optional_json(oa_mean);
  j["kappa"] = optional_json(kappa_mean);
  j["K"] = clusters;
  j["seed"] = config.seed;
  j["params"] = params_json(config);
  j["seeds"] = trials.size();
  j["OA_std"] = optional_json(oa_std);
  j["kappa_std"] = optional_json(kappa_std);
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const TrialResult& t : trials) {
    nlohmann::ordered_json r;
    r["seed"] = t.seed;
    r["OA"] = optional_json(t.oa);
    r["kappa"] = optional_json(t.kappa);
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

PipelineReport run_pipeline(const PipelineConfig& config) {
  stage("config", [&] { config.validate(); });
  const SceneInput scene = stage("load", [&] { return load_scene(config); });
  PipelineReport report = cluster_scene(scene, config);

  stage("write", [&] {
    make_output_dir(config.output);
    const fs::path out(config.output);
    const int h = scene.cube.height(), w = scene.cube.width();
    if (report.trials.size() == 1) {
      write_labels(out, report.trials.front().labels, h, w);
    } else {
      for (const TrialResult& t : report.trials) {
        write_labels(out / ("seed_" + std::to_string(t.seed)), t.labels, h, w);
      }
    }
    write_text(out / "metrics.json", report.metrics_json(config));
    write_text(out / "params.txt", config.echo());
  });
  return report;
}

SweepReport sweep_scene(const SceneInput& scene, const PipelineConfig& config) {
  config.validate();
  if (scene.gt.empty()) throw ConfigError("sweep needs ground truth (set gt)");
  const PixelCloud raw = cube_to_cloud(scene.cube);
  if (scene.gt.size() != static_cast<std::size_t>(raw.size())) {
    throw ConfigError("ground truth and cube differ in pixel count");
  }
  const int k = resolve_clusters(config, scene.gt);
  const int n = raw.size();

  SweepReport report;
  double best_oa = -1.0;
  auto record = [&](SweepPoint point, const LabelMap& labels) {
    const LabelMap aligned = align_labels(labels, scene.gt);
    const ConfusionMatrix cm(aligned, scene.gt);
    point.oa = overall_accuracy(cm);
    point.kappa = cohens_kappa(cm);
    if (point.oa > best_oa) {
      best_oa = point.oa;
      report.best = report.points.size();
      report.best_labels = aligned;
    }
    report.points.push_back(point);
  };
  auto check_kn = [&](int k_n) {
    if (k_n >= n) {
      throw ConfigError("grid k_n = " + std::to_string(k_n) + " must be smaller than N = " + std::to_string(n));
    }
  };

  if (config.algorithm == Algorithm::KMeans) {
    SweepPoint p{config.k_n, config.t, config.sigma0, config.tau, 0.0, 0.0};
    record(p, stage("cluster (kmeans)", [&] { return run_algorithm(raw, config, k, config.seed).labels; }));
    return report;
  }
  if (config.algorithm == Algorithm::Spectral) {
    for (int k_n : config.grid_kn) {
      check_kn(k_n);
      PipelineConfig c = config;
      c.k_n = k_n;
      SweepPoint p{k_n, config.t, config.sigma0, config.tau, 0.0, 0.0};
      record(p, stage("cluster (sc, k_n " + std::to_string(k_n) + ")",
                      [&] { return run_algorithm(raw, c, k, config.seed).labels; }));
    }
    return report;
  }

  // Mode-based methods: share every stage that a grid axis does not touch.
  const PixelCloud cloud = config.normalize ? normalize_spectra(raw) : raw;
  const bool use_sar = config.algorithm == Algorithm::Dsirc;
  const std::vector<double> taus = use_sar ? config.grid_tau : std::vector<double>{config.tau};

  const PurityField pure = stage("unmixing", [&] {
    UnmixingOptions u;
    u.p = config.endmembers;
    u.restarts = config.restarts;
    u.seed = config.seed;
    return purity(unmix(cloud, u));
  });

  std::vector<PixelCloud> reconstructed;
  if (use_sar) {
    for (double tau : taus) {
      SarConfig s;
      s.tau = tau;
      s.lengths = config.lengths;
      reconstructed.push_back(stage("sar", [&] { return sar(cloud, s); }));
    }
  }

  const int m = default_eigenpair_count(n, k);
  for (int k_n : config.grid_kn) {
    check_kn(k_n);
    const NeighborTable neighbors = knn_search(cloud.spectra, k_n);
    std::vector<Vector> zetas;
    for (const auto& s0 : config.grid_sigma0) {
      zetas.push_back(zeta(kde_density(neighbors, s0 ? *s0 : median_knn_bandwidth(neighbors)), pure));
    }
    for (std::size_t ti = 0; ti < taus.size(); ++ti) {
      const DiffusionSystem system = stage("diffusion (k_n " + std::to_string(k_n) + ")", [&] {
        return diffusion_system(use_sar ? knn_graph(reconstructed[ti], k_n) : knn_graph(neighbors), m);
      });
      for (std::size_t si = 0; si < config.grid_sigma0.size(); ++si) {
        for (double t : config.grid_t) {
          SweepPoint p{k_n, t, config.grid_sigma0[si], taus[ti], 0.0, 0.0};
          record(p, cluster_from_diffusion(system, zetas[si], k, t).labels);
        }
      }
    }
  }
  return report;
}

SweepReport run_sweep(const PipelineConfig& config) {
  stage("config", [&] { config.validate(); });
  const SceneInput scene = stage("load", [&] { return load_scene(config); });
  SweepReport report = sweep_scene(scene, config);

  stage("write", [&] {
    make_output_dir(config.output);
    const fs::path out(config.output);
    std::ostringstream csv;
    csv << "k_n,t,sigma0,tau,OA,kappa\n";
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const SweepPoint& p : report.points) {
      csv << p.k_n << ',' << fmt(p.t) << ',' << fmt(p.sigma0) << ',' << fmt(p.tau) << ',' << fmt(p.oa) << ','
          << fmt(p.kappa) << '\n';
      nlohmann::ordered_json j;
      j["k_n"] = p.k_n;
      j["t"] = p.t;
      j["sigma0"] = p.sigma0 ? nlohmann::ordered_json(*p.sigma0) : nlohmann::ordered_json("auto");
      j["tau"] = p.tau;
      j["OA"] = p.oa;
      j["kappa"] = p.kappa;
      points.push_back(std::move(j));
    }
    nlohmann::ordered_json j;
    j["algorithm"] = to_string(config.algorithm);
    j["K"] = resolve_clusters(config, scene.gt);
    j["seed"] = config.seed;
    j["best"] = points.at(report.best);
    j["points"] = std::move(points);
    write_text(out / "sweep.csv", csv.str());
    write_text(out / "sweep.json", j.dump(2) + "\n");
    write_text(out / "params.txt", config.echo());
    write_labels(out, report.best_labels, scene.cube.height(), scene.cube.width());
  });
  return report;
}

}  // namespace dsirc
