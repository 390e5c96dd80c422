// Command-line experiment runner: dataset generation, QESN/ESN/linear runs,
// readout fitting and report emission.
#include <qesn/experiment.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

int exit_code_for(qesn::ErrorCategory cat) {
  using EC = qesn::ErrorCategory;
  switch (cat) {
    case EC::config: return 2;
    case EC::capacity: return 3;
    case EC::operand: return 4;
    case EC::shape: return 5;
    case EC::data: return 6;
    case EC::numeric: return 7;
    case EC::integration: return 8;
    case EC::init: return 9;
    case EC::io: return 10;
  }
  return 1;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed_override = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
  cmd->add_option("--out", args.out_dir, "output directory (default: config output.dir)");
  cmd->add_option("--seed-override", args.seed_override,
                  "replace the config's seed list with this single seed");
}

qesn::ExperimentConfig load(const CommonArgs& args, const std::string& forced_type = "") {
  auto cfg = qesn::load_config(args.config_path);
  if (!forced_type.empty() && cfg.model_type != forced_type) {
    qesn::raise(qesn::ErrorCategory::config,
                "config model.type is '" + cfg.model_type + "', this subcommand runs '" +
                    forced_type + "'");
  }
  if (args.seed_override >= 0) {
    cfg.seeds = {static_cast<std::uint64_t>(args.seed_override)};
  }
  return cfg;
}

std::filesystem::path out_dir(const CommonArgs& args, const qesn::ExperimentConfig& cfg) {
  return args.out_dir.empty() ? std::filesystem::path(cfg.out_dir)
                              : std::filesystem::path(args.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum echo-state network laboratory"};
  app.require_subcommand(1);

  CommonArgs gen_args, qesn_args, esn_args, lin_args, fit_args;
  auto* gen = app.add_subcommand("generate-data", "integrate and normalize the dataset");
  add_common(gen, gen_args);
  auto* run_qesn = app.add_subcommand("run-qesn", "run the quantum reservoir over the series");
  add_common(run_qesn, qesn_args);
  auto* run_esn = app.add_subcommand("run-esn", "run the classical ESN baseline");
  add_common(run_esn, esn_args);
  auto* run_lin = app.add_subcommand("run-baseline", "emit raw context-window features");
  add_common(run_lin, lin_args);
  auto* fit = app.add_subcommand("fit-report", "fit readouts for every run and report RMSE");
  add_common(fit, fit_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = load(gen_args);
      qesn::cmd_generate_data(cfg, out_dir(gen_args, cfg));
    } else if (run_qesn->parsed()) {
      const auto cfg = load(qesn_args, "qesn");
      qesn::cmd_run_model(cfg, out_dir(qesn_args, cfg));
    } else if (run_esn->parsed()) {
      const auto cfg = load(esn_args, "esn");
      qesn::cmd_run_model(cfg, out_dir(esn_args, cfg));
    } else if (run_lin->parsed()) {
      const auto cfg = load(lin_args, "linear");
      qesn::cmd_run_model(cfg, out_dir(lin_args, cfg));
    } else if (fit->parsed()) {
      const auto cfg = load(fit_args);
      const auto report = qesn::cmd_fit_report(cfg, out_dir(fit_args, cfg));
      std::cout << report.table_text;
    }
  } catch (const qesn::Error& e) {
    std::cerr << "error(" << qesn::error_category_name(e.category()) << "): "
              << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
