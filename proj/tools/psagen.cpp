#include "psa/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

int main(int argc, char** argv) {
  namespace cli = psa::cli;
  CLI::App app{"Partial-secular master-equation generator"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.require_subcommand(1, 1);

  const std::map<std::string, std::string> about = {
      {"threshold-sweep", "CP threshold and bounds on |sinc| versus a swept parameter (CSV)"},
      {"evolve", "qubit density matrix over time with the analytic cross-check (CSV)"},
      {"choi", "Choi-state eigenvalues of the qubit channel over time (CSV)"},
      {"qho", "oscillator second moments with the truncated-ladder cross-check (CSV)"},
      {"certify", "positivity report: lambda_min, critical times, dilution checks (JSON)"},
  };

  std::string config_path, out_path;
  unsigned threads = 0;
  for (const auto& name : cli::command_names()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_path, "output file (default: config output.path, else stdout)");
    sub->add_option("--threads", threads, "worker threads (0 = available parallelism)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const cli::RunConfig config = cli::load_config(config_path);
    const std::string text = cli::run_command(command, config, threads);
    const std::string target = !out_path.empty() ? out_path : config.output_path;
    if (target.empty() || target == "-") {
      std::cout << text;
    } else {
      std::ofstream out(target, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open output file " + target);
      out << text;
      if (!out) throw std::runtime_error("failed writing " + target);
    }
    return cli::kSuccess;
  } catch (const std::exception& e) {
    std::cerr << "psagen " << command << ": " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
}
