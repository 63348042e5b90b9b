// carfollow: command line front end for the car-following pipeline.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "carfollow/errors.hpp"
#include "carfollow/pipeline.hpp"

namespace pl = carfollow::pipeline;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("carfollow");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("CARFOLLOW_LOG");
  if (!env) return;
  const std::string level = env;
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "warn") spdlog::set_level(spdlog::level::warn);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::warn("ignoring CARFOLLOW_LOG='{}' (expected error, warn, info or debug)", level);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Car-following distance extraction and analysis"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::vector<std::string> defines;
  std::string seed, workers, out;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--workers", workers, "worker threads");
  app.add_option("--out", out, "output directory");
  app.add_option("-D,--set", defines, "config override key=value (repeatable)");

  auto* calibrate = app.add_subcommand("calibrate", "fit depth calibration against lidar and pick a depth model");
  auto* extract = app.add_subcommand("extract", "build following-distance series for every drive");

  auto* groups = app.add_subcommand("groups", "compare following distances between driver groups");
  std::vector<std::string> group_args;
  groups->add_option("groups", group_args, "label=series.csv entries")->required();

  auto* train = app.add_subcommand("train", "train a boosted-tree acceleration model");
  std::string target = "ego";
  std::vector<std::string> series_args;
  train->add_option("--target", target, "ego or lv")->check(CLI::IsMember({"ego", "lv"}));
  train->add_option("series", series_args, "series.csv files")->required();

  auto* simulate = app.add_subcommand("simulate", "render a synthetic drive");
  std::string scenario;
  simulate->add_option("--scenario", scenario, "scenario key=value file (default scenario if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  pl::PipelineConfig config;
  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& d : defines) {
      const auto eq = d.find('=');
      if (eq == std::string::npos) throw carfollow::ConfigError("override must be key=value: " + d);
      overrides.emplace_back(d.substr(0, eq), d.substr(eq + 1));
    }
    if (!seed.empty()) overrides.emplace_back("seed", seed);
    if (!workers.empty()) overrides.emplace_back("workers", workers);
    if (!out.empty()) overrides.emplace_back("out", out);
    config = pl::load_config(config_path, overrides);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }

  if (*calibrate) return pl::cmd_calibrate(config, std::cout);
  if (*extract) return pl::cmd_extract(config, std::cout);
  if (*groups) return pl::cmd_groups(config, group_args, std::cout);
  if (*train) {
    std::vector<pl::fs::path> paths(series_args.begin(), series_args.end());
    return pl::cmd_train(config, paths, pl::parse_target(target), std::cout);
  }
  if (*simulate) return pl::cmd_simulate(config, scenario, std::cout);
  return 2;
}
