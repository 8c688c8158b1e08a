// Command-line driver for the experiment runners.
//
//   preopt <experiment> [--config path] [--seed N] [--out path]
//          [--override key=value ...]
//
// Writes the result CSV to the output path and a JSON summary next to it.
// Exit codes: 0 success, 1 verification failure (or runtime error), 2 config
// error.

#include <chrono>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "preopt/experiments.hpp"
#include "preopt/io.hpp"

namespace {

std::string summary_path_for(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".summary.json";
  }
  return csv_path + ".summary.json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"preopt: preprocess-then-optimize in-context regression laboratory"};
  std::string experiment;
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;

  app.add_option("experiment", experiment, "verify|sweep|heads|concentration|probe|decompose")
      ->required();
  app.add_option("--config", config_path, "flat key = value config file");
  auto* seed_opt = app.add_option("--seed", seed, "root seed (overrides config)");
  app.add_option("--out", out_path, "CSV output path; the JSON summary lands next to it");
  app.add_option("--override", overrides, "key=value override, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = preopt::load_config_file(config_path);
    for (const std::string& o : overrides) preopt::apply_override(kv, o);
    if (seed_opt->count() > 0) kv["seed"] = std::to_string(seed);
    if (!out_path.empty()) kv["out"] = out_path;

    const preopt::ExperimentConfig cfg = preopt::build_config(experiment, kv);

    const auto t0 = std::chrono::steady_clock::now();
    const preopt::RunOutput result = preopt::run_experiment(cfg);
    const double wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    preopt::write_csv(result.rows, cfg.output_path);
    if (cfg.experiment == "sweep" && !cfg.svg_path.empty()) {
      preopt::write_sweep_svg(result, cfg, cfg.svg_path);
    }

    preopt::Json summary = result.summary;
    summary["experiment"] = cfg.experiment;
    summary["config"] = cfg.to_map();
    summary["row_count"] = result.rows.size();
    const std::string summary_path = summary_path_for(cfg.output_path);
    {
      std::ofstream out(summary_path);
      if (!out) throw preopt::IoError("cannot open " + summary_path);
      out << summary.dump(2) << '\n';
    }

    bool all_pass = true;
    for (const preopt::CheckResult& check : result.checks) {
      if (!check.pass) all_pass = false;
      std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name
                << " (max deviation " << preopt::format_significant(check.max_deviation) << ")";
      if (!check.note.empty()) std::cout << " " << check.note;
      std::cout << "\n";
    }
    std::cout << "wrote " << cfg.output_path << " (" << result.rows.size() << " rows) and "
              << summary_path << " in " << preopt::format_significant(wall_seconds) << " s\n";
    return all_pass ? 0 : 1;
  } catch (const preopt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
