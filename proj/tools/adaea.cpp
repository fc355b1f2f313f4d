// Command-line entry point. Thin shell over adaea::run_cli.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adaea/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive model-ensemble adversarial attack toolkit"};

  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "key=value config file");

  // Every flag mirrors a config-file key; only flags the user actually
  // passes override the file.
  const std::vector<std::string> keys{
      "command", "dataset", "zoo",     "epsilon", "alpha", "iters",
      "beta",    "eta",     "mu",      "di-prob", "gamma", "samples",
      "epochs",  "lr",      "seed",    "out"};
  std::map<std::string, std::string> values;
  for (const auto& k : keys)
    app.add_option("--" + k, values[k], "config key '" + k + "'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? adaea::kExitUsage : adaea::kExitOk;
  }

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& k : keys)
      if (app.count("--" + k)) overrides.emplace_back(k, values[k]);
    adaea::RunConfig cfg = adaea::build_run_config(config_path, overrides);
    return adaea::run_cli(cfg);
  } catch (const adaea::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return adaea::kExitUsage;
  } catch (const adaea::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return adaea::kExitData;
  } catch (const adaea::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return adaea::kExitData;
  } catch (const adaea::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return adaea::kExitData;
  } catch (const adaea::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return adaea::kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return adaea::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return adaea::kExitNumeric;
  }
}
