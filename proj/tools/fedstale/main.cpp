#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedstale/commands.hpp"
#include "fedstale/version.hpp"

int main(int argc, char** argv) {
  using fedstale::cli::CommandOptions;

  CLI::App app{"Federated learning simulator with stale-update aggregation"};
  app.set_version_flag("--version", std::string(fedstale::kVersion));
  app.require_subcommand(1);

  CommandOptions opts;
  std::string config, out, seeds, trace;
  std::size_t threads = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Experiment config (key=value sections or JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (default: $FEDSTALE_OUT_ROOT/<cmd>-<config>)");
    sub->add_option("--seeds", seeds, "Seed list, e.g. 0,1,2 or 0-9");
    sub->add_option("--set", opts.overrides, "Override a config key (KEY=VALUE), repeatable")
        ->take_all();
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--force", opts.force, "Replace a non-empty output directory");
    sub->add_flag("--comparability", opts.comparability,
                  "Share the participation realization across rules");
  };

  const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"run", "Single training run"},
      {"repeat", "Repeated runs over seeds with mean/stderr curves"},
      {"grid", "Participation x heterogeneity x beta grid"},
      {"theory", "Bound terms, learning-rate constraints and beta*"},
      {"lowerbound", "Frontier, expectation and dominance checks on the hard instance"},
      {"replay", "Run against a recorded participation trace"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "replay") {
      sub->add_option("--trace", trace, "Participation trace CSV (round,client_id,present)")
          ->required()
          ->check(CLI::ExistingFile);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fedstale::cli::kExitConfig;
  }

  opts.command = app.get_subcommands().front()->get_name();
  opts.config = config;
  if (!out.empty()) opts.out = out;
  if (!trace.empty()) opts.trace = trace;
  if (threads > 0) opts.threads = threads;
  if (!seeds.empty()) {
    try {
      opts.seeds = fedstale::cli::parse_seed_list(seeds);
    } catch (const std::exception& e) {
      std::cerr << "fedstale: " << e.what() << '\n';
      return fedstale::cli::kExitConfig;
    }
  }
  return fedstale::cli::run_command(opts);
}
