#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smartaug/data.hpp"
#include "smartaug/metrics.hpp"
#include "smartaug_cli/config.hpp"

namespace smartaug::cli {

/// Loads, preprocesses and splits the configured dataset; applies the
/// traditional flip x blur x rotation expansion to the training split when
/// requested.
DatasetSplits load_experiment_data(const ExperimentConfig& config);

/// `<out_root>/exp<exp_id>_seed<seed>`
std::filesystem::path run_directory(const std::filesystem::path& out_root,
                                    const ExperimentConfig& config);

struct RunManifest {
  std::string config_text;
  std::string started_at;
  std::string finished_at;
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> outputs;
  std::optional<double> test_accuracy;
  std::optional<std::size_t> best_epoch;
  std::optional<std::string> error;
};

std::string manifest_to_json(const RunManifest& manifest);

/// Trains one experiment and writes metrics.csv, the Network B checkpoint at
/// the best validation epoch, the final Network A checkpoints and
/// manifest.json into the run directory. The manifest is written on failure
/// too, with `error` set.
RunManifest cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_root);

/// Trains every *.cfg file in `grid_dir`, in name order.
std::vector<RunManifest> cmd_train_grid(const std::filesystem::path& grid_dir,
                                        const std::filesystem::path& out_root,
                                        std::optional<std::uint64_t> seed_override);

/// Loads the Network A checkpoint(s) from `run_dir`, blends `count` fresh
/// same-class selections from the training split and writes each blend with
/// its k sources. Returns the written paths.
std::vector<std::filesystem::path> cmd_dump_aug(const ExperimentConfig& config,
                                                const std::filesystem::path& run_dir,
                                                std::size_t count,
                                                const std::filesystem::path& out_dir);

/// SVG line chart of training loss and validation loss per epoch.
std::string render_curves_svg(const MetricsTable& table);
void cmd_export_curves(const std::filesystem::path& metrics_csv, const std::filesystem::path& svg);

/// Writes a synthetic dataset in the image-directory layout.
Dataset cmd_gen_synthetic(const std::filesystem::path& out_dir, std::size_t per_class,
                          std::size_t height, std::size_t width, std::uint64_t seed);

}  // namespace smartaug::cli
