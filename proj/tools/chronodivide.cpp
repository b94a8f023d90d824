#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chronodivide/chronodivide.hpp"

namespace cd = chronodivide;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> format;
  std::optional<std::string> output;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_format) {
  cmd->add_option("--config", opts.config, "configuration file")->required();
  cmd->add_option("--seed", opts.seed, "master seed (overrides the config)");
  cmd->add_option("--threads", opts.threads, "worker threads, 0 = available parallelism");
  cmd->add_option("--output", opts.output, "output directory (overrides the config)");
  if (with_format) {
    cmd->add_option("--format", opts.format, "json: reports and plots; csv: tables only")
        ->check(CLI::IsMember({"json", "csv"}));
  }
}

cd::RunConfig resolve(const CommonOptions& opts) {
  auto cfg = cd::load_config(opts.config);
  if (opts.seed) cfg.selection.master_seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;
  if (opts.format) cfg.format = cd::parse_output_format(*opts.format);
  if (opts.output) cfg.output = *opts.output;
  return cfg;
}

void print_run_line(const nlohmann::json& summary) {
  const auto& divide = summary.at("divide");
  std::cout << "d* = " << summary.at("d_star").get<std::size_t>() << "; ";
  if (divide.at("divide_found").get<bool>()) {
    std::cout << "divide after sample ordinal " << divide.at("divide_after_ordinal").get<std::size_t>();
    if (!divide.at("divide_after_document").is_null()) {
      std::cout << " (document " << divide.at("divide_after_document").get<std::size_t>() << ")";
    }
  } else {
    std::cout << "no divide";
  }
  std::cout << ", agreement " << divide.at("agreeing").get<std::size_t>() << "/"
            << divide.at("total").get<std::size_t>() << "; kendall tau "
            << summary.at("trend").at("kendall_tau").get<double>() << ", p = "
            << summary.at("trend").at("p_value").get<double>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detects a chronological change of authorship in an ordered corpus."};
  app.require_subcommand(1);
  app.name("chronodivide");

  CommonOptions opts;
  auto* extract = app.add_subcommand("extract", "corpus -> features.csv");
  auto* select = app.add_subcommand("select", "features.csv -> ranking, d*, model");
  auto* analyze = app.add_subcommand("analyze", "model + corpus -> series, divide and trend reports, plots");
  auto* distance = app.add_subcommand("distance", "model features + groups -> distance summary");
  auto* synth = app.add_subcommand("synth", "[synth] section -> synthetic corpus");
  auto* run = app.add_subcommand("run", "extract, select, analyze and distance in one go");
  add_common(extract, opts, true);
  add_common(select, opts, true);
  add_common(analyze, opts, true);
  add_common(distance, opts, true);
  add_common(synth, opts, false);
  add_common(run, opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "chronodivide: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const auto cfg = resolve(opts);
    const cd::Executor executor(cfg.threads);
    if (*extract) {
      const auto report = cd::pipeline::run_extract(cfg);
      std::cout << report.at("samples").get<std::size_t>() << " samples x " << report.at("dimension").get<std::size_t>()
                << " features -> " << (cfg.output / cd::pipeline::files::kFeatures).string() << "\n";
    } else if (*select) {
      const auto report = cd::pipeline::run_select(cfg, executor);
      std::cout << "d* = " << report.at("d_star").get<std::size_t>() << " of "
                << report.at("eligible_features").get<std::size_t>() << " eligible features\n";
    } else if (*analyze) {
      print_run_line(cd::pipeline::run_analyze(cfg));
    } else if (*distance) {
      for (const auto& p : cd::pipeline::run_distance(cfg)) {
        std::cout << p.at("group_a").get<std::string>() << " / " << p.at("group_b").get<std::string>()
                  << ": mean " << p.at("mean").get<double>() << ", sd " << p.at("stddev").get<double>() << "\n";
      }
    } else if (*synth) {
      const auto corpus = cd::pipeline::run_synth(cfg);
      std::cout << corpus.truth.at("chapters").get<std::size_t>() << " chapters -> " << corpus.chapters_dir.string()
                << "\n";
    } else if (*run) {
      print_run_line(cd::pipeline::run_pipeline(cfg, executor));
    }
  } catch (const cd::StageError& e) {
    std::cerr << "chronodivide: error in stage '" << e.stage() << "': " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "chronodivide: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
