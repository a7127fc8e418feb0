#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "wtlstrike/config.hpp"
#include "wtlstrike/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> output;
  std::optional<unsigned> workers;
  std::optional<std::string> season;
  bool verbose = false;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration")->required();
  sub->add_option("--output", f.output, "Output directory (overrides config)");
  sub->add_option("--workers", f.workers, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  sub->add_option("--season", f.season, "Season filter override")->check(CLI::IsMember({"all", "warm", "cold"}));
  sub->add_flag("--verbose", f.verbose, "Print progress to stderr");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace wtlstrike;
  CLI::App app{"Wind-turbine lightning attraction analysis"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<const char*, Command> commands[] = {
      {"match", Command::kMatch},       {"fit", Command::kFit},
      {"sweep", Command::kSweep},       {"turbines", Command::kTurbines},
      {"seasonal", Command::kSeasonal}, {"synth", Command::kSynth},
  };
  const char* help[] = {"Match strokes to turbines and write pairs.bin",
                        "Iteratively fit the distance histogram",
                        "Fit each tip-height category",
                        "Per-turbine attraction radii and CDFs",
                        "Cold-season grid ratios",
                        "Generate a synthetic dataset"};
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    add_flags(sub, flags);
    subs.emplace_back(sub, commands[i].second);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  Command command = Command::kMatch;
  for (const auto& [sub, cmd] : subs) {
    if (sub->parsed()) command = cmd;
  }

  try {
    RunConfig config = load_config(flags.config);
    if (flags.output) config.output_dir = std::filesystem::absolute(*flags.output).lexically_normal();
    if (flags.workers) config.workers = *flags.workers;
    if (flags.season) config.season = *flags.season;
    RunOptions options;
    if (flags.verbose) options.log = &std::cerr;
    const Outcome out = run_command(command, config, options);
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
    if (flags.verbose) {
      for (const auto& p : out.outputs) std::cerr << "wrote " << p.string() << '\n';
    }
    return out.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
