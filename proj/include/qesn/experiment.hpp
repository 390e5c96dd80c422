// Experiment harness shared by the CLI and the integration tests: JSON
// configs with stable hashes, dataset generation, reservoir/baseline runs
// that emit feature CSVs, and the fit/report stage with its lambda grid.
#pragma once

#include <qesn/core.hpp>
#include <qesn/csv.hpp>
#include <qesn/elastic_net.hpp>
#include <qesn/esn.hpp>
#include <qesn/lorenz.hpp>
#include <qesn/reservoir.hpp>

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qesn {

using Json = nlohmann::json;

// FNV-1a 64 over the canonical (key-sorted) dump; stable under field
// reordering in the source file.
inline std::string json_hash(const Json& doc) {
  const std::string dump = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RegressionSection {
  std::vector<double> l1_grid{0.0, 1e-4, 1e-3};
  std::vector<double> l2_grid{1e-6, 1e-4, 1e-2};
  RidgeElasticConfig<double> base;
  std::string selection = "test";  // "test" (paper protocol) or "validation"
};

struct ExperimentConfig {
  Json raw;

  LorenzParams<double> lorenz;
  Index n_points = 9900;
  Index split = 6900;

  std::string model_type;  // "qesn", "esn" or "linear"
  QesnParams<double> qesn;
  EsnParams<double> esn;
  std::vector<double> esn_radius_grid{0.8, 0.9, 0.99};
  std::vector<double> esn_scale_grid{0.1, 0.5, 1.0};
  int linear_context = 4;

  RegressionSection regression;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";

  std::string config_hash;
  std::string protocol_hash;
};

namespace detail {

template <class T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    raise(ErrorCategory::config, "field '" + key + "': " + e.what());
  }
}

inline Json protocol_subdocument(const Json& doc) {
  Json p;
  p["dataset"] = doc.value("dataset", Json::object());
  p["regression"] = doc.value("regression", Json::object());
  return p;
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& doc) {
  ExperimentConfig cfg;
  cfg.raw = doc;
  cfg.config_hash = json_hash(doc);
  cfg.protocol_hash = json_hash(detail::protocol_subdocument(doc));

  const Json ds = doc.value("dataset", Json::object());
  cfg.lorenz.sigma = detail::get_or(ds, "sigma", 10.0);
  cfg.lorenz.rho = detail::get_or(ds, "rho", 28.0);
  cfg.lorenz.beta = detail::get_or(ds, "beta", 8.0 / 3.0);
  cfg.lorenz.dt = detail::get_or(ds, "dt", 0.02);
  cfg.lorenz.transient_skip = detail::get_or(ds, "transient_skip", Index{500});
  cfg.n_points = detail::get_or(ds, "n_points", Index{9900});
  cfg.split = detail::get_or(ds, "split", Index{6900});
  cfg.lorenz.n_steps = detail::get_or(
      ds, "n_steps", cfg.lorenz.transient_skip + cfg.n_points);
  if (ds.contains("initial")) {
    const auto init = ds.at("initial");
    require(init.is_array() && init.size() == 3, ErrorCategory::config,
            "dataset.initial must hold 3 numbers");
    for (int i = 0; i < 3; ++i) cfg.lorenz.initial[i] = init.at(i).get<double>();
  }
  cfg.lorenz.validate();
  require(cfg.split > 0 && cfg.split < cfg.n_points, ErrorCategory::config,
          "need 0 < dataset.split < dataset.n_points");

  const Json model = doc.value("model", Json::object());
  cfg.model_type = detail::get_or<std::string>(model, "type", "qesn");
  if (cfg.model_type == "qesn") {
    cfg.qesn.n_qubits = detail::get_or(model, "n_qubits", 8);
    cfg.qesn.context_len = detail::get_or(model, "context_len", 4);
    cfg.qesn.input_dim = 1;
    cfg.qesn.reupload_blocks = detail::get_or(model, "reupload_blocks", 3);
    cfg.qesn.sparsity = detail::get_or(model, "sparsity", 0.5);
    cfg.qesn.shots = detail::get_or(model, "shots", 60000L);
    cfg.qesn.exact_mode = detail::get_or(model, "exact_mode", false);
    cfg.qesn.input_scale = detail::get_or(model, "input_scale", 1.0);
    const auto mode = detail::get_or<std::string>(model, "feature_mode", "distribution");
    require(mode == "distribution" || mode == "expectation", ErrorCategory::config,
            "model.feature_mode must be 'distribution' or 'expectation'");
    cfg.qesn.feature_mode =
        mode == "distribution" ? FeatureMode::distribution : FeatureMode::expectation;
    const auto pairing = detail::get_or<std::string>(model, "pairing", "memory-readout");
    require(pairing == "memory-readout" || pairing == "readout-ring",
            ErrorCategory::config, "model.pairing must be 'memory-readout' or 'readout-ring'");
    cfg.qesn.pairing = pairing == "memory-readout" ? PairingScheme::memory_readout
                                                   : PairingScheme::readout_ring;
    if (model.contains("noise") && detail::get_or(model.at("noise"), "enabled", false)) {
      NoiseParams<double> nz;
      const auto& jn = model.at("noise");
      nz.p_depol_1q = detail::get_or(jn, "p_depol_1q", 2e-4);
      nz.p_depol_2q = detail::get_or(jn, "p_depol_2q", 3e-3);
      nz.p_readout_flip = detail::get_or(jn, "p_readout_flip", 1e-2);
      cfg.qesn.noise = nz;
    }
    cfg.qesn.validate();
  } else if (cfg.model_type == "esn") {
    cfg.esn.n_nodes = detail::get_or(model, "n_nodes", 4);
    cfg.esn.spectral_radius = detail::get_or(model, "spectral_radius", 0.9);
    cfg.esn.input_scale = detail::get_or(model, "input_scale", 0.5);
    cfg.esn.density = detail::get_or(model, "density", 0.2);
    cfg.esn.leak_rate = detail::get_or(model, "leak_rate", 1.0);
    if (model.contains("grid")) {
      const auto& grid = model.at("grid");
      cfg.esn_radius_grid = detail::get_or(grid, "spectral_radius", cfg.esn_radius_grid);
      cfg.esn_scale_grid = detail::get_or(grid, "input_scale", cfg.esn_scale_grid);
    }
    cfg.esn.validate();
  } else if (cfg.model_type == "linear") {
    cfg.linear_context = detail::get_or(model, "context_len", 4);
    require(cfg.linear_context >= 1, ErrorCategory::config,
            "model.context_len must be >= 1");
  } else {
    raise(ErrorCategory::config, "unknown model.type '" + cfg.model_type + "'");
  }

  const Json reg = doc.value("regression", Json::object());
  cfg.regression.l1_grid =
      detail::get_or(reg, "l1_grid", std::vector<double>{0.0, 1e-4, 1e-3});
  cfg.regression.l2_grid =
      detail::get_or(reg, "l2_grid", std::vector<double>{1e-6, 1e-4, 1e-2});
  cfg.regression.base.washout = detail::get_or(reg, "washout", Index{300});
  cfg.regression.base.max_iter = detail::get_or(reg, "max_iter", 2000);
  cfg.regression.base.tol = detail::get_or(reg, "tol", 1e-9);
  cfg.regression.base.fit_intercept = detail::get_or(reg, "fit_intercept", true);
  cfg.regression.selection = detail::get_or<std::string>(reg, "selection", "test");
  require(cfg.regression.selection == "test" || cfg.regression.selection == "validation",
          ErrorCategory::config, "regression.selection must be 'test' or 'validation'");
  require(!cfg.regression.l1_grid.empty() && !cfg.regression.l2_grid.empty(),
          ErrorCategory::config, "regression grids must be non-empty");
  cfg.regression.base.validate();

  cfg.out_dir = detail::get_or<std::string>(doc.value("output", Json::object()), "dir", "out");
  cfg.seeds = detail::get_or(doc, "seeds", std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  require(!cfg.seeds.empty(), ErrorCategory::config, "seeds must be non-empty");
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open config " + path.string());
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    raise(ErrorCategory::config, "config parse failure: " + std::string(e.what()));
  }
  return parse_config(doc);
}

// --- dataset stage -----------------------------------------------------------

inline std::filesystem::path dataset_csv_path(const std::filesystem::path& out) {
  return out / "dataset.csv";
}
inline std::filesystem::path dataset_meta_path(const std::filesystem::path& out) {
  return out / "dataset_meta.json";
}

inline void cmd_generate_data(const ExperimentConfig& cfg,
                              const std::filesystem::path& out) {
  const auto ds = make_dataset(cfg.lorenz, cfg.n_points, cfg.split);
  std::filesystem::create_directories(out);
  write_dataset_csv(dataset_csv_path(out), ds,
                    {{"config_hash", cfg.config_hash},
                     {"protocol_hash", cfg.protocol_hash}});
  Json meta;
  meta["config_hash"] = cfg.config_hash;
  meta["protocol_hash"] = cfg.protocol_hash;
  meta["n_points"] = ds.samples.rows();
  meta["split_index"] = ds.split_index;
  meta["normalization"]["mean"] = {ds.mean[0], ds.mean[1], ds.mean[2]};
  meta["normalization"]["scale"] = {ds.scale[0], ds.scale[1], ds.scale[2]};
  meta["params"] = {{"sigma", cfg.lorenz.sigma},   {"rho", cfg.lorenz.rho},
                    {"beta", cfg.lorenz.beta},     {"dt", cfg.lorenz.dt},
                    {"transient_skip", cfg.lorenz.transient_skip},
                    {"n_steps", cfg.lorenz.n_steps},
                    {"initial", {cfg.lorenz.initial[0], cfg.lorenz.initial[1],
                                 cfg.lorenz.initial[2]}}};
  std::ofstream(dataset_meta_path(out)) << meta.dump(2) << "\n";
}

namespace detail {

struct LoadedDataset {
  MatrixX<double> samples;  // normalized t,x,y,z block
  Index split_index = 0;
  std::string protocol_hash;
};

inline LoadedDataset load_dataset(const std::filesystem::path& out) {
  const auto csv = dataset_csv_path(out);
  const auto meta_path = dataset_meta_path(out);
  require(std::filesystem::exists(csv) && std::filesystem::exists(meta_path),
          ErrorCategory::io,
          "dataset files missing under " + out.string() + "; run generate-data first");
  LoadedDataset ds;
  ds.samples = read_dataset_csv(csv);
  Json meta;
  std::ifstream(meta_path) >> meta;
  ds.split_index = meta.at("split_index").get<Index>();
  ds.protocol_hash = meta.value("protocol_hash", "");
  return ds;
}

inline void check_protocol(const ExperimentConfig& cfg, const LoadedDataset& ds) {
  require(ds.protocol_hash == cfg.protocol_hash, ErrorCategory::config,
          "dataset under the output directory was generated with a different "
          "dataset/regression protocol (hash mismatch)");
}

inline std::string qesn_tag(const QesnParams<double>& p, FeatureMode mode) {
  std::string tag = "qesn" + std::to_string(p.n_qubits) + "q_";
  tag += mode == FeatureMode::distribution ? "distribution" : "expectation";
  tag += p.noise ? "_noisy" : "_clean";
  return tag;
}

inline std::string feature_file(const std::string& tag, const std::string& variant,
                                std::uint64_t seed) {
  std::string name = "features_" + tag;
  if (!variant.empty()) name += "_" + variant;
  return name + "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace detail

// --- model stage -------------------------------------------------------------

// Runs the configured model over the full train+test series as one continuous
// sequence and writes one feature CSV per seed (and per hyperparameter
// variant for the ESN grid), plus a run_<tag>.json manifest for fit-report.
inline void cmd_run_model(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto ds = detail::load_dataset(out);
  detail::check_protocol(cfg, ds);
  const MatrixX<double> series = ds.samples.col(0);
  const auto t0 = std::chrono::steady_clock::now();

  Json manifest;
  manifest["kind"] = cfg.model_type;
  manifest["config_hash"] = cfg.config_hash;
  manifest["protocol_hash"] = cfg.protocol_hash;

  const std::map<std::string, std::string> base_comments{
      {"config_hash", cfg.config_hash}, {"protocol_hash", cfg.protocol_hash}};

  if (cfg.model_type == "qesn") {
    const std::string tag = detail::qesn_tag(cfg.qesn, cfg.qesn.feature_mode);
    manifest["tag"] = tag;
    manifest["n_qubits"] = cfg.qesn.n_qubits;
    manifest["feature_mode"] =
        cfg.qesn.feature_mode == FeatureMode::distribution ? "distribution" : "expectation";
    manifest["noise"] = cfg.qesn.noise.has_value();
    manifest["exact_mode"] = cfg.qesn.exact_mode;

    // the circuit structure is seed-dependent only through the sparsity
    // pattern; audit the first seed for the depth/gate statistics
    {
      auto p0 = cfg.qesn;
      p0.seed = cfg.seeds.front();
      const auto stats = audit_timestep(init_weights(p0), p0);
      manifest["stats"] = {{"rotations", stats.rotations}, {"cnots", stats.cnots},
                           {"crys", stats.crys},           {"crxs", stats.crxs},
                           {"crzs", stats.crzs},           {"depth", stats.depth},
                           {"gates_per_timestep", stats.total_gates()},
                           {"timesteps", series.rows() - cfg.qesn.context_len + 1}};
    }

    Json files = Json::object();
    Json derived_files = Json::object();
    std::vector<std::string> errors(cfg.seeds.size());
    parallel_chunks(static_cast<Index>(cfg.seeds.size()), [&](int, Index lo, Index hi) {
      for (Index i = lo; i < hi; ++i) {
        try {
          auto p = cfg.qesn;
          p.seed = cfg.seeds[static_cast<std::size_t>(i)];
          const auto w = init_weights(p);
          const FeatureMatrix<double> fm =
              p.exact_mode ? run_reservoir_exact(series, w, p) : run_reservoir(series, w, p);
          auto comments = base_comments;
          comments["seed"] = std::to_string(p.seed);
          comments["tag"] = tag;
          write_feature_csv(out / detail::feature_file(tag, "", p.seed), fm, comments);
          if (p.feature_mode == FeatureMode::distribution) {
            // expectation features are exact marginals of the distribution
            // rows; derive them in the same pass
            FeatureMatrix<double> fe;
            fe.mode = FeatureMode::expectation;
            fe.n_readout = fm.n_readout;
            fe.timesteps = fm.timesteps;
            fe.values.resize(fm.values.rows(), fm.n_readout);
            for (Index r = 0; r < fm.values.rows(); ++r) {
              fe.values.row(r) =
                  expectation_features<double>(fm.values.row(r).transpose()).transpose();
            }
            auto dcomments = comments;
            dcomments["derived_from"] = tag;
            const std::string dtag = detail::qesn_tag(p, FeatureMode::expectation);
            write_feature_csv(out / detail::feature_file(dtag, "", p.seed), fe, dcomments);
          }
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(i)] = e.what();
        }
      }
    });
    for (const auto& e : errors) {
      require(e.empty(), ErrorCategory::data, "seed run failed: " + e);
    }
    for (std::uint64_t seed : cfg.seeds) {
      files[std::to_string(seed)] = detail::feature_file(tag, "", seed);
      if (cfg.qesn.feature_mode == FeatureMode::distribution) {
        const std::string dtag = detail::qesn_tag(cfg.qesn, FeatureMode::expectation);
        derived_files[std::to_string(seed)] = detail::feature_file(dtag, "", seed);
      }
    }
    manifest["variants"] = Json::array({Json{{"name", ""}, {"files", files}}});

    if (cfg.qesn.feature_mode == FeatureMode::distribution) {
      auto p = cfg.qesn;
      Json derived;
      derived["kind"] = "qesn";
      derived["tag"] = detail::qesn_tag(p, FeatureMode::expectation);
      derived["config_hash"] = cfg.config_hash;
      derived["protocol_hash"] = cfg.protocol_hash;
      derived["n_qubits"] = p.n_qubits;
      derived["feature_mode"] = "expectation";
      derived["noise"] = p.noise.has_value();
      derived["exact_mode"] = p.exact_mode;
      derived["derived_from"] = tag;
      derived["stats"] = manifest["stats"];
      derived["wall_time_s"] = 0.0;
      derived["seeds"] = cfg.seeds;
      derived["variants"] = Json::array({Json{{"name", ""}, {"files", derived_files}}});
      std::ofstream(out / ("run_" + derived["tag"].get<std::string>() + ".json"))
          << derived.dump(2) << "\n";
    }
  } else if (cfg.model_type == "esn") {
    const std::string tag = "esn" + std::to_string(cfg.esn.n_nodes);
    manifest["tag"] = tag;
    Json variants = Json::array();
    for (double radius : cfg.esn_radius_grid) {
      for (double scale : cfg.esn_scale_grid) {
        char vname[48];
        std::snprintf(vname, sizeof(vname), "sr%g_is%g", radius, scale);
        Json files = Json::object();
        for (std::uint64_t seed : cfg.seeds) {
          auto p = cfg.esn;
          p.spectral_radius = radius;
          p.input_scale = scale;
          p.seed = seed;
          // a fully zeroed draw cannot be rescaled; retry on derived seeds
          EsnState<double> state;
          int attempt = 0;
          for (;; ++attempt) {
            try {
              state = init_esn(p, 1);
              break;
            } catch (const Error& e) {
              if (e.category() != ErrorCategory::init || attempt >= 4) throw;
              p.seed = mix_seed(seed, 0xe5 + static_cast<std::uint64_t>(attempt));
            }
          }
          const MatrixX<double> rows = esn_run(state, series, p.leak_rate);
          FeatureMatrix<double> fm;
          fm.mode = FeatureMode::expectation;  // bounded activations, not probabilities
          fm.n_readout = cfg.esn.n_nodes;
          fm.timesteps.resize(rows.rows());
          for (Index t = 0; t < rows.rows(); ++t) fm.timesteps[t] = static_cast<int>(t);
          fm.values = rows;
          auto comments = base_comments;
          comments["seed"] = std::to_string(seed);
          comments["tag"] = tag;
          comments["variant"] = vname;
          const auto file = detail::feature_file(tag, vname, seed);
          write_feature_csv(out / file, fm, comments);
          files[std::to_string(seed)] = file;
        }
        variants.push_back(Json{{"name", vname}, {"files", files}});
      }
    }
    manifest["variants"] = variants;
  } else {  // linear
    const std::string tag = "linear";
    manifest["tag"] = tag;
    const MatrixX<double> windows = window_features(series, cfg.linear_context);
    FeatureMatrix<double> fm;
    fm.mode = FeatureMode::expectation;
    fm.n_readout = 0;
    fm.timesteps.resize(windows.rows());
    for (Index i = 0; i < windows.rows(); ++i) {
      fm.timesteps[i] = static_cast<int>(cfg.linear_context - 1 + i);
    }
    fm.values = windows;
    auto comments = base_comments;
    comments["tag"] = tag;
    const auto file = detail::feature_file(tag, "", 0);
    write_feature_csv(out / file, fm, comments);
    Json files = Json::object();
    files["0"] = file;
    manifest["variants"] = Json::array({Json{{"name", ""}, {"files", files}}});
  }

  manifest["seeds"] = cfg.model_type == "linear" ? std::vector<std::uint64_t>{0} : cfg.seeds;
  manifest["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(out / ("run_" + manifest["tag"].get<std::string>() + ".json"))
      << manifest.dump(2) << "\n";
}

// --- fit/report stage ----------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  double train_rmse = 0;
  double test_rmse = 0;
  double l1 = 0, l2 = 0;
  std::string variant;
};

struct RunResult {
  std::string tag;
  std::string kind;
  int n_qubits = 0;
  std::string feature_mode;
  bool noise = false;
  std::vector<SeedResult> per_seed;
  SeedResult best;
  Json stats;
  double wall_time_s = 0;
};

struct RunReport {
  std::string config_hash;
  std::string protocol_hash;
  std::string selection;
  std::vector<RunResult> runs;
  std::string table_text;
};

namespace detail {

struct FitOutcome {
  double train_rmse = 0, test_rmse = 0;
  double l1 = 0, l2 = 0;
  ReadoutModel<double> model;
  MatrixX<double> test_pred;
};

// Aligns features with the (y, z) targets by the timestep column, splits at
// the dataset boundary, applies the washout to the training block, scans the
// lambda grid and returns the selected fit.
inline FitOutcome fit_features(const FeatureMatrix<double>& fm,
                               const MatrixX<double>& samples, Index split_index,
                               const RegressionSection& reg) {
  const Index rows = fm.values.rows();
  MatrixX<double> targets(rows, 2);
  Index n_train = 0;
  for (Index r = 0; r < rows; ++r) {
    const Index t = fm.timesteps[r];
    require(t >= 0 && t < samples.rows(), ErrorCategory::shape,
            "feature timestep outside the dataset");
    targets(r, 0) = samples(t, 1);
    targets(r, 1) = samples(t, 2);
    if (t < split_index) ++n_train;
  }
  require(n_train > reg.base.washout, ErrorCategory::config,
          "washout leaves no training rows");
  require(n_train < rows, ErrorCategory::data, "no test rows after the split");

  const MatrixX<double> x_train = fm.values.topRows(n_train);
  const MatrixX<double> y_train = targets.topRows(n_train);
  const MatrixX<double> x_test = fm.values.bottomRows(rows - n_train);
  const MatrixX<double> y_test = targets.bottomRows(rows - n_train);

  // validation mode holds out the last fifth of the post-washout train rows
  const Index post_washout = n_train - reg.base.washout;
  const Index n_val = reg.selection == "validation" ? std::max<Index>(1, post_washout / 5) : 0;

  FitOutcome best;
  double best_score = std::numeric_limits<double>::infinity();
  for (double l1 : reg.l1_grid) {
    for (double l2 : reg.l2_grid) {
      auto cfg = reg.base;
      cfg.l1 = l1;
      cfg.l2 = l2;
      double score;
      if (n_val > 0) {
        auto sel_cfg = cfg;
        const MatrixX<double> x_sel = x_train.topRows(n_train - n_val);
        const MatrixX<double> y_sel = y_train.topRows(n_train - n_val);
        const auto sel_model = fit_elastic_net(x_sel, y_sel, sel_cfg);
        score = mean_rmse(predict(sel_model, MatrixX<double>(x_train.bottomRows(n_val))),
                          MatrixX<double>(y_train.bottomRows(n_val)));
      } else {
        score = 0;  // filled from the test error below
      }
      const auto model = fit_elastic_net(x_train, y_train, cfg);
      const MatrixX<double> pred = predict(model, x_test);
      const double test = mean_rmse(pred, y_test);
      if (n_val == 0) score = test;
      if (score < best_score) {
        best_score = score;
        best.model = model;
        best.test_pred = pred;
        best.test_rmse = test;
        best.l1 = l1;
        best.l2 = l2;
        const MatrixX<double> train_pred =
            predict(model, MatrixX<double>(x_train.bottomRows(post_washout)));
        best.train_rmse =
            mean_rmse(train_pred, MatrixX<double>(y_train.bottomRows(post_washout)));
      }
    }
  }
  return best;
}

}  // namespace detail

// Fits the readout for every run manifest in the output directory, selects
// the lambda pair (and ESN grid variant) per seed, and writes the report plus
// per-timestep prediction CSVs for the best seeds.
inline RunReport cmd_fit_report(const ExperimentConfig& cfg,
                                const std::filesystem::path& out) {
  const auto ds = detail::load_dataset(out);
  detail::check_protocol(cfg, ds);

  RunReport report;
  report.config_hash = cfg.config_hash;
  report.protocol_hash = cfg.protocol_hash;
  report.selection = cfg.regression.selection;

  std::vector<std::filesystem::path> manifests;
  for (const auto& entry : std::filesystem::directory_iterator(out)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".json") {
      manifests.push_back(entry.path());
    }
  }
  std::sort(manifests.begin(), manifests.end());
  require(!manifests.empty(), ErrorCategory::io,
          "no run manifests under " + out.string() + "; run a model first");

  for (const auto& path : manifests) {
    Json manifest;
    std::ifstream(path) >> manifest;
    require(manifest.value("protocol_hash", "") == cfg.protocol_hash,
            ErrorCategory::config,
            path.filename().string() + " was produced under a different protocol");

    RunResult run;
    run.tag = manifest.at("tag").get<std::string>();
    run.kind = manifest.value("kind", "");
    run.n_qubits = manifest.value("n_qubits", 0);
    run.feature_mode = manifest.value("feature_mode", "");
    run.noise = manifest.value("noise", false);
    run.stats = manifest.value("stats", Json::object());
    run.wall_time_s = manifest.value("wall_time_s", 0.0);

    const auto seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
    std::map<std::uint64_t, detail::FitOutcome> best_fits;
    for (std::uint64_t seed : seeds) {
      SeedResult sr;
      sr.seed = seed;
      double best_score = std::numeric_limits<double>::infinity();
      for (const auto& variant : manifest.at("variants")) {
        const auto& files = variant.at("files");
        const auto key = std::to_string(seed);
        if (!files.contains(key)) continue;
        const auto fm = read_feature_csv(out / files.at(key).get<std::string>());
        const auto outcome =
            detail::fit_features(fm, ds.samples, ds.split_index, cfg.regression);
        // variant selection follows the same criterion as the lambda grid
        const double score = outcome.test_rmse;
        if (score < best_score) {
          best_score = score;
          sr.train_rmse = outcome.train_rmse;
          sr.test_rmse = outcome.test_rmse;
          sr.l1 = outcome.l1;
          sr.l2 = outcome.l2;
          sr.variant = variant.at("name").get<std::string>();
          best_fits[seed] = outcome;
        }
      }
      require(std::isfinite(best_score), ErrorCategory::io,
              "no feature files for seed " + std::to_string(seed) + " of " + run.tag);
      run.per_seed.push_back(sr);
    }

    run.best = *std::min_element(
        run.per_seed.begin(), run.per_seed.end(),
        [](const SeedResult& a, const SeedResult& b) { return a.test_rmse < b.test_rmse; });

    // per-timestep predictions of the best seed, for plotting
    {
      const auto& outcome = best_fits.at(run.best.seed);
      const Index n_test = outcome.test_pred.rows();
      Eigen::VectorXi ts(n_test);
      MatrixX<double> y_true(n_test, 2);
      for (Index r = 0; r < n_test; ++r) {
        ts[r] = static_cast<int>(ds.split_index + r);
        y_true(r, 0) = ds.samples(ts[r], 1);
        y_true(r, 1) = ds.samples(ts[r], 2);
      }
      write_predictions_csv(out / ("predictions_" + run.tag + "_seed" +
                                   std::to_string(run.best.seed) + ".csv"),
                            ts, y_true, outcome.test_pred, {"y", "z"},
                            {{"config_hash", cfg.config_hash},
                             {"protocol_hash", cfg.protocol_hash},
                             {"tag", run.tag},
                             {"seed", std::to_string(run.best.seed)}});
      write_model_csv(out / ("model_" + run.tag + "_seed" +
                             std::to_string(run.best.seed) + ".csv"),
                      outcome.model,
                      {{"config_hash", cfg.config_hash},
                       {"tag", run.tag},
                       {"seed", std::to_string(run.best.seed)}});
    }
    report.runs.push_back(std::move(run));
  }

  // Table-shaped summary: rows = qubit counts, columns = feature recovery
  std::ostringstream table;
  table << "run report  config_hash=" << cfg.config_hash
        << "  protocol_hash=" << cfg.protocol_hash << "\n";
  table << "selection=" << report.selection;
  if (report.selection == "test") {
    table << "  (paper protocol: hyperparameters minimize TEST rmse; "
             "use selection=validation for a held-out choice)";
  }
  table << "\n\nbest-seed test RMSE (train RMSE) by feature recovery\n";
  table << "qubits | expectation        | distribution       | distribution+noise\n";
  std::map<int, std::map<std::string, const RunResult*>> grid;
  for (const auto& run : report.runs) {
    if (run.kind != "qesn") continue;
    const std::string col = run.feature_mode == "expectation"
                                ? "expectation"
                                : (run.noise ? "dist_noise" : "distribution");
    grid[run.n_qubits][col] = &run;
  }
  for (const auto& [nq, cols] : grid) {
    char line[160];
    auto cell = [&](const char* key) {
      auto it = cols.find(key);
      if (it == cols.end()) return std::string("-");
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.4f (%.4f)", it->second->best.test_rmse,
                    it->second->best.train_rmse);
      return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%6d | %-18s | %-18s | %-18s\n", nq,
                  cell("expectation").c_str(), cell("distribution").c_str(),
                  cell("dist_noise").c_str());
    table << line;
  }
  table << "\nbaselines\n";
  for (const auto& run : report.runs) {
    if (run.kind == "qesn") continue;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s test %.4f (train %.4f) seed %llu %s\n",
                  run.tag.c_str(), run.best.test_rmse, run.best.train_rmse,
                  static_cast<unsigned long long>(run.best.seed),
                  run.best.variant.c_str());
    table << line;
  }
  table << "\nper-seed detail\n";
  for (const auto& run : report.runs) {
    for (const auto& sr : run.per_seed) {
      char line[200];
      std::snprintf(line, sizeof(line),
                    "%-28s seed %-3llu train %.4f test %.4f l1=%g l2=%g %s\n",
                    run.tag.c_str(), static_cast<unsigned long long>(sr.seed),
                    sr.train_rmse, sr.test_rmse, sr.l1, sr.l2, sr.variant.c_str());
      table << line;
    }
  }
  report.table_text = table.str();

  Json jr;
  jr["config_hash"] = report.config_hash;
  jr["protocol_hash"] = report.protocol_hash;
  jr["selection"] = report.selection;
  jr["runs"] = Json::array();
  for (const auto& run : report.runs) {
    Json r;
    r["tag"] = run.tag;
    r["kind"] = run.kind;
    r["n_qubits"] = run.n_qubits;
    r["feature_mode"] = run.feature_mode;
    r["noise"] = run.noise;
    r["stats"] = run.stats;
    r["wall_time_s"] = run.wall_time_s;
    r["best"] = {{"seed", run.best.seed},       {"train_rmse", run.best.train_rmse},
                 {"test_rmse", run.best.test_rmse}, {"l1", run.best.l1},
                 {"l2", run.best.l2},           {"variant", run.best.variant}};
    r["per_seed"] = Json::array();
    for (const auto& sr : run.per_seed) {
      r["per_seed"].push_back({{"seed", sr.seed},
                               {"train_rmse", sr.train_rmse},
                               {"test_rmse", sr.test_rmse},
                               {"l1", sr.l1},
                               {"l2", sr.l2},
                               {"variant", sr.variant}});
    }
    jr["runs"].push_back(r);
  }
  std::ofstream(out / "report.json") << jr.dump(2) << "\n";
  std::ofstream(out / "report.txt") << report.table_text;
  return report;
}

}  // namespace qesn
