#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qladder/cli/commands.hpp"

int main(int argc, char** argv) {
  namespace cli = qladder::cli;
  CLI::App app{"Two-region quality-ladder model: equilibria, thresholds, bifurcations and dynamics"};
  std::string command, config_path, out_dir = "out";
  int threads = -1;
  long long seed = -1;
  std::vector<std::string> names;
  for (const auto& [name, fn] : cli::commands()) names.push_back(name);
  app.add_option("command", command, "equilibria | thresholds | bifurcate | regions | simulate | sweep | scenario")
      ->required()
      ->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "JSON configuration (a manifest.json is accepted too)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)")->check(CLI::Range(0, 1024));
  app.add_option("--seed", seed, "seed for sampled validations")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  cli::RunConfig config;
  try {
    config = cli::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return cli::kConfigError;
  }
  if (threads >= 0) config.threads = static_cast<unsigned>(threads);
  if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
  return cli::run_command(command, config, out_dir, std::cout, std::cerr);
}
