#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "smartaug/runtime.hpp"
#include "smartaug_cli/commands.hpp"

namespace fs = std::filesystem;
using namespace smartaug;

namespace {

cli::ExperimentConfig config_with_seed(const std::string& path, std::optional<std::uint64_t> seed) {
  cli::ExperimentConfig config = cli::load_config(path);
  if (seed) config.seed = *seed;
  return config;
}

int report(const cli::RunManifest& m) {
  if (m.error) {
    std::cerr << "error: " << *m.error << "\n";
  } else {
    std::printf("%s: test_accuracy %.4f\n", m.run_dir.string().c_str(), m.test_accuracy.value_or(0));
  }
  return m.test_accuracy ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Smart augmentation experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out = "out", grid, checkpoint, metrics, size = "32x32";
  std::optional<std::uint64_t> seed;
  std::size_t count = 3;

  auto* train = app.add_subcommand("train", "Run one experiment (or a grid of them)");
  auto* train_cfg = train->add_option("--config", config_path, "key = value experiment file");
  auto* train_grid = train->add_option("--grid", grid, "Directory of *.cfg files, run in name order");
  train_cfg->excludes(train_grid);
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out", out, "Root directory for run directories")->capture_default_str();

  auto* dump = app.add_subcommand("dump-aug", "Write Network A blends with their sources");
  dump->add_option("--config", config_path)->required();
  dump->add_option("--seed", seed, "Override the config seed");
  dump->add_option("--checkpoint", checkpoint, "Run directory holding network_a*.saug");
  dump->add_option("--out", out, "Output directory for images")->capture_default_str();
  dump->add_option("--count", count, "Number of blends")->capture_default_str();

  auto* curves = app.add_subcommand("export-curves", "Render metrics.csv as an SVG loss chart");
  curves->add_option("metrics", metrics, "metrics.csv path")->required();
  curves->add_option("--out", out, "SVG path (default: next to the CSV)");

  auto* gen = app.add_subcommand("gen-synthetic", "Write the synthetic rectangle/disc dataset");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--count", count, "Samples per class")->capture_default_str();
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--size", size, "HEIGHTxWIDTH")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (!grid.empty()) {
        int status = 0;
        for (const auto& m : cli::cmd_train_grid(grid, out, seed)) status |= report(m);
        return status;
      }
      if (config_path.empty()) throw CLI::RequiredError("--config or --grid");
      return report(cli::cmd_train(config_with_seed(config_path, seed), out));
    }
    if (dump->parsed()) {
      const auto config = config_with_seed(config_path, seed);
      const fs::path run_dir = checkpoint.empty() ? cli::run_directory("out", config) : fs::path(checkpoint);
      const auto files = cli::cmd_dump_aug(config, run_dir, count, out);
      std::printf("wrote %zu images to %s\n", files.size(), out.c_str());
      return 0;
    }
    if (curves->parsed()) {
      fs::path svg = out == "out" ? fs::path(metrics).replace_extension(".svg") : fs::path(out);
      cli::cmd_export_curves(metrics, svg);
      std::printf("wrote %s\n", svg.string().c_str());
      return 0;
    }
    if (gen->parsed()) {
      const auto x = size.find('x');
      if (x == std::string::npos) throw std::invalid_argument("--size must be HEIGHTxWIDTH");
      const auto d = cli::cmd_gen_synthetic(out, count, std::stoul(size.substr(0, x)),
                                            std::stoul(size.substr(x + 1)), seed.value_or(0));
      std::printf("wrote %zu images to %s\n", d.size(), out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
