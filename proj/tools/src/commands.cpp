#include "smartaug_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "smartaug/augment.hpp"
#include "smartaug/checkpoint.hpp"
#include "smartaug/error.hpp"
#include "smartaug/trainer.hpp"

namespace smartaug::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string network_a_stem(int key) {
  return key < 0 ? "network_a" : "network_a_class" + std::to_string(key);
}

}  // namespace

DatasetSplits load_experiment_data(const ExperimentConfig& config) {
  const PreprocessTarget target{config.grayscale, config.height, config.width};
  Dataset all;
  if (config.dataset == "synthetic") {
    all = gen_synthetic(config.synthetic_per_class, 2, {config.height, config.width}, config.seed);
  } else if (config.dataset.rfind("idx:", 0) == 0) {
    const std::string paths = config.dataset.substr(4);
    const auto comma = paths.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("config key 'dataset': expected idx:<images>,<labels>");
    }
    all = preprocess(load_idx(paths.substr(0, comma), paths.substr(comma + 1)), target);
  } else {
    all = preprocess(load_image_dir(config.dataset), target);
  }
  SplitSpec spec;
  spec.subject_exclusive = config.subject_exclusive;
  DatasetSplits splits = split(all, spec, config.seed);
  if (config.traditional_aug) splits.train = traditional_expand(splits.train, TraditionalAugConfig{});
  return splits;
}

fs::path run_directory(const fs::path& out_root, const ExperimentConfig& config) {
  return out_root / ("exp" + std::to_string(config.exp_id) + "_seed" + std::to_string(config.seed));
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config"] = m.config_text;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["run_dir"] = m.run_dir.string();
  j["outputs"] = nlohmann::json::array();
  for (const auto& p : m.outputs) j["outputs"].push_back(p.string());
  j["test_accuracy"] = m.test_accuracy ? nlohmann::json(*m.test_accuracy) : nlohmann::json();
  j["best_epoch"] = m.best_epoch ? nlohmann::json(*m.best_epoch) : nlohmann::json();
  j["error"] = m.error ? nlohmann::json(*m.error) : nlohmann::json();
  return j.dump(2) + "\n";
}

RunManifest cmd_train(const ExperimentConfig& config, const fs::path& out_root) {
  RunManifest m;
  m.config_text = serialize_config(config);
  m.started_at = utc_now();
  m.run_dir = run_directory(out_root, config);
  try {
    fs::create_directories(m.run_dir);
    config.validate();
    if (config.net_b != "b1") {
      throw ConfigError("config key 'net_b': only b1 can be trained, got '" + config.net_b + "'");
    }
    const DatasetSplits data = load_experiment_data(config);
    if (config.num_net_a >= 2 && config.num_net_a != data.train.num_classes()) {
      throw ConfigError("config key 'num_net_a': " + std::to_string(config.num_net_a) +
                        " Network As for " + std::to_string(data.train.num_classes()) +
                        " classes; use one per class");
    }
    const TrainState state = run_training(config.training_config(), data);

    const fs::path metrics = m.run_dir / "metrics.csv";
    write_text(metrics, metrics_to_csv(state.metrics, state.test_accuracy));
    m.outputs.push_back(metrics);
    save_checkpoint(m.run_dir / "network_b.saug", state.tested_network_b);
    write_text(m.run_dir / "network_b.arch", state.network_b_description);
    m.outputs.push_back(m.run_dir / "network_b.saug");
    m.outputs.push_back(m.run_dir / "network_b.arch");
    for (const auto& [key, tensors] : state.network_a_states) {
      const std::string stem = network_a_stem(key);
      save_checkpoint(m.run_dir / (stem + ".saug"), tensors);
      write_text(m.run_dir / (stem + ".arch"), state.network_a_description);
      m.outputs.push_back(m.run_dir / (stem + ".saug"));
      m.outputs.push_back(m.run_dir / (stem + ".arch"));
    }
    m.test_accuracy = state.test_accuracy;
    m.best_epoch = state.best_epoch;
  } catch (const std::exception& e) {
    m.error = e.what();
  }
  m.finished_at = utc_now();
  try {
    fs::create_directories(m.run_dir);
    write_text(m.run_dir / "manifest.json", manifest_to_json(m));
  } catch (const std::exception& e) {
    if (!m.error) m.error = e.what();
  }
  return m;
}

std::vector<RunManifest> cmd_train_grid(const fs::path& grid_dir, const fs::path& out_root,
                                        std::optional<std::uint64_t> seed_override) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(grid_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cfg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .cfg files in grid directory " + grid_dir.string());
  std::vector<RunManifest> out;
  for (const auto& file : files) {
    ExperimentConfig config = load_config(file);
    if (seed_override) config.seed = *seed_override;
    out.push_back(cmd_train(config, out_root));
  }
  return out;
}

std::vector<fs::path> cmd_dump_aug(const ExperimentConfig& config, const fs::path& run_dir,
                                   std::size_t count, const fs::path& out_dir) {
  if (config.num_net_a == 0) throw ConfigError("dump-aug needs a config with num_net_a >= 1");
  std::map<int, NetworkA> nets;
  const std::vector<int> keys = [&] {
    std::vector<int> k;
    if (config.num_net_a == 1) {
      k.push_back(-1);
    } else {
      for (std::size_t c = 0; c < config.num_net_a; ++c) k.push_back(static_cast<int>(c));
    }
    return k;
  }();
  for (int key : keys) {
    const fs::path ckpt = run_dir / (network_a_stem(key) + ".saug");
    const fs::path arch = run_dir / (network_a_stem(key) + ".arch");
    if (!fs::exists(ckpt) || !fs::exists(arch)) {
      throw std::runtime_error("missing Network A checkpoint " + ckpt.string() + " (run train first)");
    }
    NetworkA net;
    net.graph = graph_from_description(read_text(arch));
    net.graph.load_state(load_checkpoint(ckpt));
    net.in_channels = net.graph.input_spec().channels;
    net.out_channels = net.graph.output_spec().front();
    nets.emplace(key, std::move(net));
  }

  ExperimentConfig plain = config;
  plain.traditional_aug = false;
  const Dataset train = load_experiment_data(plain).train;
  const std::size_t c = train.channels;
  if (nets.begin()->second.in_channels != config.a_channels * c) {
    throw ConfigError("checkpoint expects " + std::to_string(nets.begin()->second.in_channels) +
                      " input channels but the config packs " +
                      std::to_string(config.a_channels * c));
  }
  const auto members = train.class_indices();
  Rng rng = make_rng(config.seed, 4);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = train.samples[i % train.size()].label;
    const int labels[] = {label};
    const AugmentBatch batch = make_augment_batch(train, members, labels, config.a_channels, rng);
    NetworkA& net = nets.at(config.num_net_a == 1 ? -1 : label);
    const Tensor blend = net.forward(batch.packed_input, Mode::kInfer, rng);
    const Tensor blend_chw = reshape(blend, {c, train.height, train.width});
    const Tensor packed = reshape(batch.packed_input, {config.a_channels * c, train.height, train.width});
    const auto sources = unpack_channels(packed, c);
    auto paths = write_triptych(out_dir, config.epochs, i, blend_chw, sources);
    written.insert(written.end(), paths.begin(), paths.end());
  }
  return written;
}

std::string render_curves_svg(const MetricsTable& table) {
  if (table.records.empty()) throw FormatError("metrics CSV has no epoch rows");
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 20, kTop = 20, kBottom = 60;
  double e_min = static_cast<double>(table.records.front().epoch), e_max = e_min;
  double l_min = table.records.front().train_loss_total, l_max = l_min;
  for (const MetricsRecord& r : table.records) {
    e_min = std::min(e_min, static_cast<double>(r.epoch));
    e_max = std::max(e_max, static_cast<double>(r.epoch));
    l_min = std::min({l_min, r.train_loss_total, r.val_loss_b});
    l_max = std::max({l_max, r.train_loss_total, r.val_loss_b});
  }
  if (e_max == e_min) e_max = e_min + 1;
  if (l_max == l_min) l_max = l_min + 1;
  auto px = [&](double e) { return kLeft + (e - e_min) / (e_max - e_min) * (kWidth - kLeft - kRight); };
  auto py = [&](double l) { return kTop + (l_max - l) / (l_max - l_min) * (kHeight - kTop - kBottom); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  auto polyline = [&](auto value, const char* color, const char* id) {
    std::string pts;
    for (const MetricsRecord& r : table.records) {
      if (!pts.empty()) pts += ' ';
      pts += num(px(static_cast<double>(r.epoch))) + "," + num(py(value(r)));
    }
    return std::string("  <polyline id=\"") + id + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  };
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-size=\"14\">epoch</text>\n"
      << "  <text x=\"18\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" font-size=\"14\" "
      << "transform=\"rotate(-90 18 " << (y0 + y1) / 2 << ")\">loss</text>\n"
      << "  <text x=\"" << x0 << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << static_cast<std::size_t>(e_min) << "</text>\n"
      << "  <text x=\"" << x1 << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << static_cast<std::size_t>(e_max) << "</text>\n"
      << "  <text x=\"" << x0 - 6 << "\" y=\"" << y0 << "\" text-anchor=\"end\" font-size=\"11\">"
      << num(l_min) << "</text>\n"
      << "  <text x=\"" << x0 - 6 << "\" y=\"" << y1 + 10 << "\" text-anchor=\"end\" font-size=\"11\">"
      << num(l_max) << "</text>\n"
      << polyline([](const MetricsRecord& r) { return r.train_loss_total; }, "#1f77b4", "train")
      << polyline([](const MetricsRecord& r) { return r.val_loss_b; }, "#d62728", "validation")
      << "  <g font-size=\"12\">\n"
      << "    <line x1=\"" << x1 - 150 << "\" y1=\"" << y1 + 10 << "\" x2=\"" << x1 - 125 << "\" y2=\""
      << y1 + 10 << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n"
      << "    <text x=\"" << x1 - 120 << "\" y=\"" << y1 + 14 << "\">training loss</text>\n"
      << "    <line x1=\"" << x1 - 150 << "\" y1=\"" << y1 + 28 << "\" x2=\"" << x1 - 125 << "\" y2=\""
      << y1 + 28 << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n"
      << "    <text x=\"" << x1 - 120 << "\" y=\"" << y1 + 32 << "\">validation loss</text>\n"
      << "  </g>\n"
      << "</svg>\n";
  return svg.str();
}

void cmd_export_curves(const fs::path& metrics_csv, const fs::path& svg) {
  write_text(svg, render_curves_svg(parse_metrics_csv(read_text(metrics_csv))));
}

Dataset cmd_gen_synthetic(const fs::path& out_dir, std::size_t per_class, std::size_t height,
                          std::size_t width, std::uint64_t seed) {
  Dataset d = gen_synthetic(per_class, 2, {height, width}, seed);
  write_image_dir(d, out_dir);
  return d;
}

}  // namespace smartaug::cli
