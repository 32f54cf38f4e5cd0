#include "smartaug_cli/config.hpp"

#include <cerrno>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "smartaug/error.hpp"

namespace smartaug::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': " + what + ", got '" + value + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "expected a non-negative integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "expected an integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) bad_value(key, v, "expected a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "expected true or false");
}

std::pair<std::size_t, std::size_t> to_size(const std::string& key, const std::string& v) {
  const auto x = v.find('x');
  if (x == std::string::npos) bad_value(key, v, "expected <height>x<width>");
  return {to_u64(key, v.substr(0, x)), to_u64(key, v.substr(x + 1))};
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"exp_id", [](auto& c, auto& k, auto& v) { c.exp_id = to_int(k, v); }},
      {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
      {"num_net_a", [](auto& c, auto& k, auto& v) { c.num_net_a = to_u64(k, v); }},
      {"a_channels", [](auto& c, auto& k, auto& v) { c.a_channels = to_u64(k, v); }},
      {"net_b", [](auto& c, auto&, auto& v) { c.net_b = v; }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"beta", [](auto& c, auto& k, auto& v) { c.beta = to_double(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.learning_rate = to_double(k, v); }},
      {"momentum", [](auto& c, auto& k, auto& v) { c.momentum = to_double(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.epochs = to_u64(k, v); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = to_u64(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"traditional_aug", [](auto& c, auto& k, auto& v) { c.traditional_aug = to_bool(k, v); }},
      {"alpha_final", [](auto& c, auto& k, auto& v) { c.alpha_final = to_double(k, v); }},
      {"beta_final", [](auto& c, auto& k, auto& v) { c.beta_final = to_double(k, v); }},
      {"image_size", [](auto& c, auto& k, auto& v) { std::tie(c.height, c.width) = to_size(k, v); }},
      {"grayscale", [](auto& c, auto& k, auto& v) { c.grayscale = to_bool(k, v); }},
      {"subject_exclusive", [](auto& c, auto& k, auto& v) { c.subject_exclusive = to_bool(k, v); }},
      {"synthetic_per_class", [](auto& c, auto& k, auto& v) { c.synthetic_per_class = to_u64(k, v); }},
      {"a_filters", [](auto& c, auto& k, auto& v) { c.a_filters = to_u64(k, v); }},
      {"b_conv1_filters", [](auto& c, auto& k, auto& v) { c.b_conv1_filters = to_u64(k, v); }},
      {"b_conv2_filters", [](auto& c, auto& k, auto& v) { c.b_conv2_filters = to_u64(k, v); }},
      {"b_hidden_units", [](auto& c, auto& k, auto& v) { c.b_hidden_units = to_u64(k, v); }},
      {"dropout_rate", [](auto& c, auto& k, auto& v) { c.dropout_rate = to_double(k, v); }},
  };
  return table;
}

}  // namespace

double ExperimentConfig::effective_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return num_net_a >= 2 ? 0.005 : 0.01;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& msg) {
    throw ConfigError("config key '" + key + "': " + msg);
  };
  if (dataset.empty()) fail("dataset", "must not be empty");
  if (net_b != "b1" && net_b != "b2") fail("net_b", "must be b1 or b2");
  if (num_net_a >= 1) {
    if (a_channels < 1) fail("a_channels", "must be at least 1 when num_net_a >= 1");
    if (!(alpha >= 0.0)) fail("alpha", "must be >= 0");
    if (!(beta >= 0.0)) fail("beta", "must be >= 0");
    if (!(alpha + beta > 0.0)) fail("alpha", "alpha + beta must be positive (beta too)");
    if (alpha_final.has_value() != beta_final.has_value()) {
      fail(alpha_final ? "beta_final" : "alpha_final", "alpha_final and beta_final go together");
    }
    if (alpha_final && (!(*alpha_final >= 0.0) || !(*beta_final >= 0.0) ||
                        !(*alpha_final + *beta_final > 0.0))) {
      fail("alpha_final", "final alpha/beta must be >= 0 with a positive sum");
    }
    if (batch_size < 2) fail("batch_size", "must be at least 2 with smart augmentation");
  }
  if (!(effective_learning_rate() > 0.0)) fail("learning_rate", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (height == 0 || width == 0) fail("image_size", "dimensions must be positive");
  if (height % 4 != 0 || width % 4 != 0) {
    fail("image_size", "height and width must be divisible by 4 for Network B");
  }
  if (synthetic_per_class == 0) fail("synthetic_per_class", "must be positive");
  if (a_filters == 0) fail("a_filters", "must be positive");
  if (b_conv1_filters == 0) fail("b_conv1_filters", "must be positive");
  if (b_conv2_filters == 0) fail("b_conv2_filters", "must be positive");
  if (b_hidden_units == 0) fail("b_hidden_units", "must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate", "must lie in [0, 1)");
}

TrainingConfig ExperimentConfig::training_config() const {
  TrainingConfig t;
  t.mode = num_net_a == 0 ? AugmentMode::kBaseline
           : num_net_a == 1 ? AugmentMode::kSingleA
                            : AugmentMode::kMultiA;
  t.k = a_channels;
  t.loss = {alpha, beta};
  if (alpha_final) t.final_loss = CombinedLossParams{*alpha_final, *beta_final};
  t.learning_rate = effective_learning_rate();
  t.momentum = momentum;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.seed = seed;
  t.a_options.filters = a_filters;
  t.b_options = {b_conv1_filters, b_conv2_filters, b_hidden_units, dropout_rate};
  return t;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    }
    it->second(config, key, value);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "exp_id = " << c.exp_id << "\n"
      << "dataset = " << c.dataset << "\n"
      << "num_net_a = " << c.num_net_a << "\n"
      << "a_channels = " << c.a_channels << "\n"
      << "net_b = " << c.net_b << "\n"
      << "alpha = " << fmt_double(c.alpha) << "\n"
      << "beta = " << fmt_double(c.beta) << "\n"
      << "learning_rate = " << fmt_double(c.effective_learning_rate()) << "\n"
      << "momentum = " << fmt_double(c.momentum) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "seed = " << c.seed << "\n"
      << "traditional_aug = " << b(c.traditional_aug) << "\n";
  if (c.alpha_final) out << "alpha_final = " << fmt_double(*c.alpha_final) << "\n";
  if (c.beta_final) out << "beta_final = " << fmt_double(*c.beta_final) << "\n";
  out << "image_size = " << c.height << "x" << c.width << "\n"
      << "grayscale = " << b(c.grayscale) << "\n"
      << "subject_exclusive = " << b(c.subject_exclusive) << "\n"
      << "synthetic_per_class = " << c.synthetic_per_class << "\n"
      << "a_filters = " << c.a_filters << "\n"
      << "b_conv1_filters = " << c.b_conv1_filters << "\n"
      << "b_conv2_filters = " << c.b_conv2_filters << "\n"
      << "b_hidden_units = " << c.b_hidden_units << "\n"
      << "dropout_rate = " << fmt_double(c.dropout_rate) << "\n";
  return out.str();
}

}  // namespace smartaug::cli
