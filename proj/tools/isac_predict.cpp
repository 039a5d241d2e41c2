// SPDX-License-Identifier: Apache-2.0
// isac-predict: generate data, train, evaluate and sweep the CSI predictors.
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "isac/cli/commands.hpp"
#include "isac/errors.hpp"

using namespace isac;

int main(int argc, char** argv) {
  CLI::App app{"Sensing-assisted CSI prediction experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> epochs;
  std::vector<std::string> schemes;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment file (overrides --preset)")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "built-in configuration")->check(CLI::IsMember({"desk", "paper"}));
    sub->add_option("--seed", seed, "experiment seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--schemes", schemes, "schemes to train or evaluate");
  };
  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"generate", "synthesize the train and test datasets"},
      {"train", "train every configured scheme"},
      {"eval", "test-set NMSE of the trained schemes"},
      {"sweep-speed", "test NMSE per UE speed bin"},
      {"sweep-snr", "test NMSE versus SNR of the historical CSI"},
      {"ablate", "train and test the ablation variants over several seeds"},
      {"show-config", "print the resolved configuration"},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help));

  CLI11_PARSE(app, argc, argv);

  try {
    cli::ExperimentConfig config =
        config_path.empty() ? (preset == "paper" ? cli::ExperimentConfig::paper() : cli::ExperimentConfig::desk())
                            : cli::load_experiment(config_path);
    if (seed) config.seed = *seed;
    if (out) config.output_dir = *out;
    if (epochs) config.train.epochs = *epochs;
    if (!schemes.empty()) config.schemes = schemes;
    config.validate();

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "show-config") {
      std::cout << cli::dump_experiment(config);
    } else if (command == "generate") {
      cli::cmd_generate(config, std::cerr);
    } else if (command == "train") {
      cli::cmd_train(config, std::cerr);
    } else if (command == "eval") {
      std::cout << cli::cmd_eval(config, std::cerr).to_csv();
    } else if (command == "sweep-speed") {
      std::cout << cli::cmd_sweep_speed(config, std::cerr).to_csv();
    } else if (command == "sweep-snr") {
      std::cout << cli::cmd_sweep_snr(config, std::cerr).to_csv();
    } else if (command == "ablate") {
      std::cout << cli::cmd_ablate(config, std::cerr).to_csv();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
