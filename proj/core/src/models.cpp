#include "smartaug/models.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "smartaug/error.hpp"

namespace smartaug {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Shape propagate(const Layer& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const Conv2dLayer& l) -> Shape {
            if (in.size() != 3 || in[0] != l.weight.dim(1)) {
              throw ShapeError("layer " + l.name + " expects " + std::to_string(l.weight.dim(1)) +
                               " input channels, previous layer yields " + shape_to_string(in));
            }
            if (l.padding == Padding::kSame) return Shape{l.weight.dim(0), in[1], in[2]};
            if (in[1] < l.weight.dim(2) || in[2] < l.weight.dim(3)) {
              throw ShapeError("layer " + l.name + ": kernel larger than input " +
                               shape_to_string(in));
            }
            return Shape{l.weight.dim(0), in[1] - l.weight.dim(2) + 1, in[2] - l.weight.dim(3) + 1};
          },
          [&](const BatchNormLayer& l) -> Shape {
            if (in.size() != 3 || in[0] != l.gamma.dim(0)) {
              throw ShapeError("layer " + l.name + " normalizes " + std::to_string(l.gamma.dim(0)) +
                               " channels, previous layer yields " + shape_to_string(in));
            }
            return in;
          },
          [&](const DenseLayer& l) -> Shape {
            if (in.size() != 1 || in[0] != l.weight.dim(0)) {
              throw ShapeError("layer " + l.name + " expects " + std::to_string(l.weight.dim(0)) +
                               " features, previous layer yields " + shape_to_string(in));
            }
            return Shape{l.weight.dim(1)};
          },
          [&](const MaxPoolLayer&) -> Shape {
            if (in.size() != 3 || in[1] % 2 != 0 || in[2] % 2 != 0) {
              throw ShapeError("maxpool needs even spatial dims, previous layer yields " +
                               shape_to_string(in) + "; resize the input");
            }
            return Shape{in[0], in[1] / 2, in[2] / 2};
          },
          [&](const FlattenLayer&) -> Shape { return Shape{shape_numel(in)}; },
          [&](const auto&) -> Shape { return in; },
      },
      layer);
}

const char* padding_name(Padding p) { return p == Padding::kSame ? "same" : "valid"; }

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(const ImageSpec& spec) {
  return "(" + std::to_string(spec.channels) + "," + std::to_string(spec.height) + "," +
         std::to_string(spec.width) + ")";
}

LayerGraph::LayerGraph(ImageSpec input_spec)
    : input_spec_(input_spec),
      output_spec_{input_spec.channels, input_spec.height, input_spec.width} {
  if (input_spec.channels == 0 || input_spec.height == 0 || input_spec.width == 0) {
    throw ShapeError("input spec must be positive, got " + to_string(input_spec));
  }
}

void LayerGraph::add(Layer layer) {
  output_spec_ = propagate(layer, output_spec_);
  layers_.push_back(std::move(layer));
}

Tensor LayerGraph::forward(const Tensor& input, Mode mode, Rng& rng) {
  if (input.rank() != 4 || input.dim(1) != input_spec_.channels ||
      input.dim(2) != input_spec_.height || input.dim(3) != input_spec_.width) {
    throw ShapeError("network expects input (N," + std::to_string(input_spec_.channels) + "," +
                     std::to_string(input_spec_.height) + "," + std::to_string(input_spec_.width) +
                     "), got " + shape_to_string(input.shape()));
  }
  ++forward_calls_;
  Tensor x = input;
  for (Layer& layer : layers_) {
    x = std::visit(
        Overloaded{
            [&](Conv2dLayer& l) { return conv2d(x, l.weight, l.bias, l.padding); },
            [&](BatchNormLayer& l) {
              return batchnorm2d(x, l.gamma, l.beta, mode, l.stats, l.epsilon);
            },
            [&](DenseLayer& l) { return dense(x, l.weight, l.bias); },
            [&](ReluLayer&) { return relu(x); },
            [&](SigmoidLayer&) { return sigmoid(x); },
            [&](MaxPoolLayer&) { return maxpool2d(x); },
            [&](FlattenLayer&) { return flatten(x); },
            [&](DropoutLayer& l) { return dropout(x, l.rate, mode, rng); },
        },
        layer);
  }
  return x;
}

ParameterList LayerGraph::parameters() const {
  ParameterList params;
  for (const Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](const Conv2dLayer& l) {
                     params.push_back({l.name + ".weight", l.weight});
                     params.push_back({l.name + ".bias", l.bias});
                   },
                   [&](const BatchNormLayer& l) {
                     params.push_back({l.name + ".gamma", l.gamma});
                     params.push_back({l.name + ".beta", l.beta});
                   },
                   [&](const DenseLayer& l) {
                     params.push_back({l.name + ".weight", l.weight});
                     params.push_back({l.name + ".bias", l.bias});
                   },
                   [](const auto&) {},
               },
               layer);
  }
  return params;
}

std::size_t LayerGraph::parameter_count() const {
  std::size_t total = 0;
  for (const Parameter& p : parameters()) total += p.tensor.numel();
  return total;
}

std::vector<NamedTensor> LayerGraph::state() const {
  std::vector<NamedTensor> out;
  for (const Parameter& p : parameters()) out.push_back({p.name, p.tensor.clone()});
  for (const Layer& layer : layers_) {
    if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      const std::size_t c = bn->stats.running_mean.size();
      out.push_back({bn->name + ".running_mean", Tensor(Shape{c}, bn->stats.running_mean)});
      out.push_back({bn->name + ".running_var", Tensor(Shape{c}, bn->stats.running_var)});
    }
  }
  return out;
}

void LayerGraph::load_state(const std::vector<NamedTensor>& state) {
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& nt : state) by_name[nt.name] = &nt.tensor;
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing '" + name + "'");
    if (it->second->shape() != shape) {
      throw ShapeError("checkpoint entry '" + name + "' has shape " +
                       shape_to_string(it->second->shape()) + ", network expects " +
                       shape_to_string(shape));
    }
    return *it->second;
  };
  auto copy_into = [&](Tensor& dst, const std::string& name) {
    const Tensor& src = fetch(name, dst.shape());
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  };
  for (Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](Conv2dLayer& l) {
                     copy_into(l.weight, l.name + ".weight");
                     copy_into(l.bias, l.name + ".bias");
                   },
                   [&](BatchNormLayer& l) {
                     copy_into(l.gamma, l.name + ".gamma");
                     copy_into(l.beta, l.name + ".beta");
                     const Shape c{l.stats.running_mean.size()};
                     const auto& rm = fetch(l.name + ".running_mean", c).values();
                     const auto& rv = fetch(l.name + ".running_var", c).values();
                     l.stats.running_mean = rm;
                     l.stats.running_var = rv;
                   },
                   [&](DenseLayer& l) {
                     copy_into(l.weight, l.name + ".weight");
                     copy_into(l.bias, l.name + ".bias");
                   },
                   [](auto&) {},
               },
               layer);
  }
}

std::string LayerGraph::describe() const {
  std::ostringstream os;
  os << "input channels=" << input_spec_.channels << " height=" << input_spec_.height
     << " width=" << input_spec_.width << '\n';
  for (const Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](const Conv2dLayer& l) {
                     os << "conv2d name=" << l.name << " in=" << l.weight.dim(1)
                        << " out=" << l.weight.dim(0) << " kh=" << l.weight.dim(2)
                        << " kw=" << l.weight.dim(3) << " padding=" << padding_name(l.padding);
                   },
                   [&](const BatchNormLayer& l) {
                     os << "batchnorm2d name=" << l.name << " channels=" << l.gamma.dim(0)
                        << " epsilon=" << format_double(l.epsilon)
                        << " momentum=" << format_double(l.stats.momentum);
                   },
                   [&](const DenseLayer& l) {
                     os << "dense name=" << l.name << " in=" << l.weight.dim(0)
                        << " out=" << l.weight.dim(1);
                   },
                   [&](const ReluLayer&) { os << "relu"; },
                   [&](const SigmoidLayer&) { os << "sigmoid"; },
                   [&](const MaxPoolLayer&) { os << "maxpool2d window=2 stride=2"; },
                   [&](const FlattenLayer&) { os << "flatten"; },
                   [&](const DropoutLayer& l) { os << "dropout rate=" << format_double(l.rate); },
               },
               layer);
    os << '\n';
  }
  return os.str();
}

LayerGraph graph_from_description(const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  LayerGraph graph;
  bool have_input = false;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream words(line);
    std::string kind;
    words >> kind;
    std::map<std::string, std::string> kv;
    std::string token;
    while (words >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw FormatError("architecture line " + std::to_string(line_no) + ": bad token '" +
                          token + "'");
      }
      kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
      auto it = kv.find(key);
      if (it == kv.end()) {
        throw FormatError("architecture line " + std::to_string(line_no) + ": missing '" + key +
                          "'");
      }
      return it->second;
    };
    auto num = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
    if (kind == "input") {
      graph = LayerGraph(ImageSpec{num("channels"), num("height"), num("width")});
      have_input = true;
      continue;
    }
    if (!have_input) {
      throw FormatError("architecture line " + std::to_string(line_no) +
                        ": layers must follow an input line");
    }
    if (kind == "conv2d") {
      const std::size_t f = num("out");
      graph.add(Conv2dLayer{get("name"), Tensor(Shape{f, num("in"), num("kh"), num("kw")}, 0.0),
                            Tensor(Shape{f}, 0.0),
                            get("padding") == "valid" ? Padding::kValid : Padding::kSame});
    } else if (kind == "batchnorm2d") {
      const std::size_t c = num("channels");
      BatchNormLayer bn{get("name"), Tensor(Shape{c}, 1.0), Tensor(Shape{c}, 0.0),
                        BatchNormStats(c), std::stod(get("epsilon"))};
      bn.stats.momentum = std::stod(get("momentum"));
      graph.add(std::move(bn));
    } else if (kind == "dense") {
      graph.add(DenseLayer{get("name"), Tensor(Shape{num("in"), num("out")}, 0.0),
                           Tensor(Shape{num("out")}, 0.0)});
    } else if (kind == "relu") {
      graph.add(ReluLayer{});
    } else if (kind == "sigmoid") {
      graph.add(SigmoidLayer{});
    } else if (kind == "maxpool2d") {
      graph.add(MaxPoolLayer{});
    } else if (kind == "flatten") {
      graph.add(FlattenLayer{});
    } else if (kind == "dropout") {
      graph.add(DropoutLayer{std::stod(get("rate"))});
    } else {
      throw FormatError("architecture line " + std::to_string(line_no) + ": unknown layer '" +
                        kind + "'");
    }
  }
  if (!have_input) throw FormatError("architecture description has no input line");
  return graph;
}

Tensor forward(LayerGraph& net, const Tensor& input, Mode mode, Rng& rng) {
  return net.forward(input, mode, rng);
}

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(std::move(shape), 0.0, true);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

namespace {

Conv2dLayer make_conv(std::string name, std::size_t in, std::size_t out, Rng& rng) {
  return Conv2dLayer{std::move(name), he_normal(Shape{out, in, 3, 3}, in * 9, rng),
                     Tensor(Shape{out}, 0.0, true), Padding::kSame};
}

DenseLayer make_dense(std::string name, std::size_t in, std::size_t out, Rng& rng) {
  return DenseLayer{std::move(name), he_normal(Shape{in, out}, in, rng),
                    Tensor(Shape{out}, 0.0, true)};
}

BatchNormLayer make_bn(std::string name, std::size_t channels) {
  return BatchNormLayer{std::move(name), Tensor(Shape{channels}, 1.0, true),
                        Tensor(Shape{channels}, 0.0, true), BatchNormStats(channels),
                        kBatchNormEpsilon};
}

}  // namespace

NetworkA build_network_a(std::size_t in_channels, std::size_t out_channels,
                         std::pair<std::size_t, std::size_t> spatial, Rng& init_rng,
                         const NetworkAOptions& options) {
  if (in_channels == 0 || out_channels == 0 || options.filters == 0) {
    throw ConfigError("network A needs at least one input channel, output channel and filter");
  }
  NetworkA net;
  net.in_channels = in_channels;
  net.out_channels = out_channels;
  net.graph = LayerGraph(ImageSpec{in_channels, spatial.first, spatial.second});
  net.graph.add(make_conv("a_conv1", in_channels, options.filters, init_rng));
  net.graph.add(ReluLayer{});
  net.graph.add(make_conv("a_conv2", options.filters, options.filters, init_rng));
  net.graph.add(ReluLayer{});
  net.graph.add(make_conv("a_conv3", options.filters, out_channels, init_rng));
  net.graph.add(SigmoidLayer{});
  return net;
}

NetworkB1 build_network_b1(std::size_t in_channels, std::size_t num_classes,
                           std::pair<std::size_t, std::size_t> spatial, Rng& init_rng,
                           const NetworkB1Options& options) {
  const auto [h, w] = spatial;
  if (h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0) {
    throw ShapeError("network B1 needs height and width divisible by 4 (two pooling stages), got " +
                     std::to_string(h) + "x" + std::to_string(w) + "; resize the dataset");
  }
  if (num_classes < 2) throw ConfigError("network B1 needs at least 2 classes");
  if (in_channels == 0) throw ConfigError("network B1 needs at least one input channel");
  if (!(options.dropout_rate >= 0.0 && options.dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  NetworkB1 net;
  net.num_classes = num_classes;
  net.graph = LayerGraph(ImageSpec{in_channels, h, w});
  const std::size_t f1 = options.conv1_filters, f2 = options.conv2_filters;
  net.graph.add(make_conv("b_conv1", in_channels, f1, init_rng));
  net.graph.add(make_bn("b_bn1", f1));
  net.graph.add(ReluLayer{});
  net.graph.add(MaxPoolLayer{});
  net.graph.add(make_conv("b_conv2", f1, f2, init_rng));
  net.graph.add(make_bn("b_bn2", f2));
  net.graph.add(ReluLayer{});
  net.graph.add(MaxPoolLayer{});
  net.graph.add(FlattenLayer{});
  const std::size_t flat = f2 * (h / 4) * (w / 4);
  net.graph.add(make_dense("b_fc1", flat, options.hidden_units, init_rng));
  net.graph.add(ReluLayer{});
  net.graph.add(DropoutLayer{options.dropout_rate});
  net.graph.add(make_dense("b_fc2", options.hidden_units, num_classes, init_rng));
  return net;
}

}  // namespace smartaug
