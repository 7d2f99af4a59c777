#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ntkinfo/experiment.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kVerifyFailed = 2 };

ntkinfo::ExperimentConfig resolve(const std::string& path) {
  ntkinfo::ExperimentConfig cfg = path.empty() ? ntkinfo::ExperimentConfig{} : ntkinfo::load_config(path);
  ntkinfo::apply_environment(cfg);
  cfg.validate();
  return cfg;
}

int print_report(const ntkinfo::VerifyReport& report) {
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
  }
  return report.passed() ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infinite-width information dynamics sweeps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool with_verify = false;
  auto* sweep = app.add_subcommand("sweep", "Run the weight-variance sweep and write trajectory CSVs");
  sweep->add_option("--config", config_path, "JSON config (defaults apply to missing keys)");
  sweep->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  sweep->add_flag("--verify", with_verify, "Also run the oracle checks and record them in the manifest");

  auto* verify = app.add_subcommand("verify", "Check analytic routes against Monte Carlo oracles");
  verify->add_option("--config", config_path, "JSON config");

  std::string frontier_out;
  auto* frontier = app.add_subcommand("frontier", "Tabulate the Gaussian IB frontier");
  frontier->add_option("--config", config_path, "JSON config");
  frontier->add_option("--out", frontier_out, "CSV path (stdout when omitted)");
  int points = 200;
  frontier->add_option("--points", points, "Number of rows")->check(CLI::Range(2, 1000000));

  CLI11_PARSE(app, argc, argv);

  ntkinfo::ExperimentConfig cfg;
  try {
    cfg = resolve(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (with_verify) cfg.emit_verify = true;
  } catch (const ntkinfo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (sweep->parsed()) {
      const auto result = ntkinfo::run_sweep(cfg);
      for (const auto& o : result.outputs) {
        std::cout << o.csv.string() << "  rows=" << o.records.size()
                  << "  fisher_trace=" << ntkinfo::format_double(o.fisher_trace) << '\n';
      }
      std::cout << result.manifest.string() << '\n';
      return kOk;
    }
    if (verify->parsed()) return print_report(ntkinfo::verify(cfg));
    if (frontier->parsed()) {
      const auto table = ntkinfo::frontier_table(cfg, points);
      if (frontier_out.empty()) {
        ntkinfo::write_frontier_csv(std::cout, table);
      } else {
        std::ofstream out(frontier_out);
        if (!out) {
          std::cerr << "cannot write " << frontier_out << '\n';
          return kConfigError;
        }
        ntkinfo::write_frontier_csv(out, table);
      }
      return kOk;
    }
  } catch (const ntkinfo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
