#include "smartaug/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "smartaug/error.hpp"

namespace smartaug {

void CombinedLossParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw ConfigError("alpha and beta must be finite and non-negative");
  }
  if (!(alpha + beta > 0.0)) throw ConfigError("alpha + beta must be positive");
}

double combined_loss(double loss_a, double loss_b, const CombinedLossParams& params) {
  params.validate();
  if (!std::isfinite(loss_a) || !std::isfinite(loss_b)) {
    throw std::domain_error("combined_loss: losses must be finite");
  }
  if (loss_a < 0.0 || loss_b < 0.0) throw std::domain_error("combined_loss: losses must be >= 0");
  return params.alpha * loss_a + params.beta * loss_b;
}

Tensor combined_loss(const Tensor& loss_a, const Tensor& loss_b, const CombinedLossParams& params) {
  combined_loss(loss_a.item(), loss_b.item(), params);
  const Tensor terms[] = {loss_a, loss_b};
  const double weights[] = {params.alpha, params.beta};
  return weighted_sum(terms, weights);
}

namespace {

std::vector<int> twice(std::span<const int> labels) {
  std::vector<int> out(labels.begin(), labels.end());
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

}  // namespace

StepLosses joint_step(const AugmentBatch& batch, NetworkA& net_a, NetworkB1& net_b,
                      const CombinedLossParams& params, NesterovSgd& optimizer, Rng& rng) {
  optimizer.zero_grad();
  const Tensor out1 = net_a.forward(batch.packed_input, Mode::kTrain, rng);
  const Tensor loss_a = mse_loss(out1, batch.target_image);
  const Tensor parts[] = {out1, batch.target_image};
  const Tensor logits = net_b.forward(concat(parts), Mode::kTrain, rng);
  const auto labels = twice(batch.class_label);
  const Tensor loss_b = softmax_cross_entropy(logits, labels);
  const Tensor total = combined_loss(loss_a, loss_b, params);
  backward(total);
  optimizer.step();
  return {loss_a.item(), loss_b.item(), total.item()};
}

StepLosses multi_a_step(const AugmentBatch& batch, const std::map<int, NetworkA*>& augmenters,
                        NetworkB1& net_b, const CombinedLossParams& params,
                        NesterovSgd& optimizer, Rng& rng) {
  const auto partitions = route_by_class(batch, augmenters);
  optimizer.zero_grad();
  std::vector<Tensor> outputs, targets, mse_terms;
  std::vector<double> weights;
  std::vector<int> labels;
  for (const ClassPartition& part : partitions) {
    NetworkA& net_a = *augmenters.at(part.class_label);
    Tensor out = net_a.forward(part.batch.packed_input, Mode::kTrain, rng);
    mse_terms.push_back(mse_loss(out, part.batch.target_image));
    weights.push_back(static_cast<double>(part.batch.size()) / static_cast<double>(batch.size()));
    outputs.push_back(std::move(out));
    targets.push_back(part.batch.target_image);
    labels.insert(labels.end(), part.batch.class_label.begin(), part.batch.class_label.end());
  }
  const Tensor loss_a = weighted_sum(mse_terms, weights);
  std::vector<Tensor> b_inputs = outputs;
  b_inputs.insert(b_inputs.end(), targets.begin(), targets.end());
  const Tensor logits = net_b.forward(concat(b_inputs), Mode::kTrain, rng);
  const Tensor loss_b = softmax_cross_entropy(logits, twice(labels));
  const Tensor total = combined_loss(loss_a, loss_b, params);
  backward(total);
  optimizer.step();
  return {loss_a.item(), loss_b.item(), total.item()};
}

double baseline_step(const Tensor& images, std::span<const int> labels, NetworkB1& net_b,
                     NesterovSgd& optimizer, Rng& rng) {
  optimizer.zero_grad();
  const Tensor logits = net_b.forward(images, Mode::kTrain, rng);
  const Tensor loss = softmax_cross_entropy(logits, labels);
  backward(loss);
  optimizer.step();
  return loss.item();
}

ValidationResult validate(NetworkB1& net_b, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.size() == 0) throw ConfigError("validate: empty dataset");
  if (batch_size == 0) throw ConfigError("validate: batch size must be positive");
  NoGradGuard no_grad;
  Rng unused(0);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = net_b.forward(dataset.batch_images(idx), Mode::kInfer, unused);
    const auto labels = dataset.batch_labels(idx);
    loss_sum += softmax_cross_entropy(logits, labels).item() * static_cast<double>(idx.size());
    const std::size_t k = logits.dim(1);
    const auto z = logits.data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = z.subspan(i * k, k);
      const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      if (arg == labels[i]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(dataset.size()),
          static_cast<double>(correct) / static_cast<double>(dataset.size())};
}

void TrainingConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (mode != AugmentMode::kBaseline) {
    if (k == 0) throw ConfigError("a_channels (k) must be at least 1");
    loss.validate();
    if (final_loss) final_loss->validate();
    if (batch_size < 2) throw ConfigError("smart augmentation needs batch_size >= 2");
  }
}

CombinedLossParams TrainingConfig::loss_at_epoch(std::size_t epoch) const {
  if (!final_loss || epochs <= 1) return loss;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return {loss.alpha + (final_loss->alpha - loss.alpha) * t,
          loss.beta + (final_loss->beta - loss.beta) * t};
}

namespace {

void check_datasets(const TrainingConfig& config, const DatasetSplits& data) {
  const Dataset* parts[] = {&data.train, &data.val, &data.test};
  const char* names[] = {"training", "validation", "test"};
  for (int i = 0; i < 3; ++i) {
    if (parts[i]->size() == 0) throw ConfigError(std::string(names[i]) + " split is empty");
    if (parts[i]->channels != data.train.channels || parts[i]->height != data.train.height ||
        parts[i]->width != data.train.width) {
      throw ConfigError(std::string(names[i]) + " split geometry differs from the training split");
    }
    if (parts[i]->num_classes() != data.train.num_classes()) {
      throw ConfigError(std::string(names[i]) + " split has a different class list");
    }
  }
  if (data.train.num_classes() < 2) throw ConfigError("need at least two classes");
  if (config.mode == AugmentMode::kBaseline) return;
  const auto members = data.train.class_indices();
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (!members[c].empty() && members[c].size() < config.k + 1) {
      throw ConfigError("class " + std::to_string(c) + " (" + data.train.class_names[c] +
                        ") has " + std::to_string(members[c].size()) +
                        " training samples; smart augmentation with k=" + std::to_string(config.k) +
                        " needs at least " + std::to_string(config.k + 1));
    }
  }
}

struct EpochTotals {
  double total = 0.0, a = 0.0, b = 0.0;
  double weight = 0.0;

  void add(const StepLosses& s, double w) {
    total += s.total * w;
    a += s.loss_a * w;
    b += s.loss_b * w;
    weight += w;
  }
};

}  // namespace

TrainState run_training(const TrainingConfig& config, const DatasetSplits& data,
                        const TrainingHooks& hooks) {
  config.validate();
  check_datasets(config, data);

  Rng init_rng = make_rng(config.seed, 1);
  Rng data_rng = make_rng(config.seed, 2);
  Rng dropout_rng = make_rng(config.seed, 3);

  const Dataset& train = data.train;
  const std::size_t c = train.channels;
  const std::pair<std::size_t, std::size_t> spatial{train.height, train.width};
  NetworkB1 net_b = build_network_b1(c, train.num_classes(), spatial, init_rng, config.b_options);

  // Augmenters live only for the duration of training.
  std::vector<std::unique_ptr<NetworkA>> nets_a;
  std::map<int, NetworkA*> by_class;
  if (config.mode == AugmentMode::kSingleA) {
    nets_a.push_back(std::make_unique<NetworkA>(
        build_network_a(config.k * c, c, spatial, init_rng, config.a_options)));
  } else if (config.mode == AugmentMode::kMultiA) {
    for (std::size_t label = 0; label < train.num_classes(); ++label) {
      nets_a.push_back(std::make_unique<NetworkA>(
          build_network_a(config.k * c, c, spatial, init_rng, config.a_options)));
      by_class[static_cast<int>(label)] = nets_a.back().get();
    }
  }

  ParameterList params = net_b.graph.parameters();
  for (const auto& a : nets_a) {
    auto pa = a->graph.parameters();
    params.insert(params.end(), pa.begin(), pa.end());
  }
  NesterovSgd optimizer(params, config.learning_rate, config.momentum);

  auto a_calls = [&] {
    std::size_t n = 0;
    for (const auto& a : nets_a) n += a->graph.forward_calls();
    return n;
  };

  TrainState state;
  state.network_b_description = net_b.graph.describe();
  if (!nets_a.empty()) state.network_a_description = nets_a.front()->graph.describe();

  auto evaluate = [&](const Dataset& ds, std::size_t epoch, bool selection) {
    const std::size_t before = a_calls();
    ValidationResult r = (selection && hooks.validator) ? hooks.validator(net_b, ds, epoch)
                                                        : validate(net_b, ds);
    state.a_forward_passes_during_eval += a_calls() - before;
    return r;
  };

  const auto members = train.class_indices();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t aug_batch = (config.batch_size + 1) / 2;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), data_rng);
    EpochTotals totals;
    if (config.mode == AugmentMode::kBaseline) {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const auto labels = train.batch_labels(idx);
        const double loss = baseline_step(train.batch_images(idx), labels, net_b, optimizer, dropout_rng);
        totals.add({0.0, loss, loss}, static_cast<double>(idx.size()));
      }
    } else {
      // Each augment sample yields two B samples (out1 and its target), so
      // half as many augment samples keep B's per-epoch sample count equal to
      // the training set size.
      const std::size_t n_aug = (order.size() + 1) / 2;
      const CombinedLossParams loss_params = config.loss_at_epoch(epoch);
      for (std::size_t start = 0; start < n_aug; start += aug_batch) {
        const std::size_t end = std::min(n_aug, start + aug_batch);
        std::vector<int> labels;
        for (std::size_t i = start; i < end; ++i) labels.push_back(train.samples[order[i]].label);
        const AugmentBatch batch = make_augment_batch(train, members, labels, config.k, data_rng);
        const StepLosses s =
            config.mode == AugmentMode::kSingleA
                ? joint_step(batch, *nets_a.front(), net_b, loss_params, optimizer, dropout_rng)
                : multi_a_step(batch, by_class, net_b, loss_params, optimizer, dropout_rng);
        totals.add(s, static_cast<double>(labels.size()));
      }
    }

    const ValidationResult val = evaluate(data.val, epoch, true);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss_total = totals.total / totals.weight;
    rec.train_loss_b = totals.b / totals.weight;
    if (config.mode != AugmentMode::kBaseline) rec.train_loss_a = totals.a / totals.weight;
    rec.val_loss_b = val.loss;
    rec.val_accuracy = val.accuracy;
    if (val.loss < state.best_validation_loss) {
      state.best_validation_loss = val.loss;
      state.best_epoch = epoch;
      state.best_checkpoint = net_b.graph.state();
    }
    state.best_validation_history.push_back(state.best_validation_loss);
    state.metrics.push_back(rec);
    state.epoch = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }

  state.a_forward_passes_training = a_calls() - state.a_forward_passes_during_eval;
  for (std::size_t i = 0; i < nets_a.size(); ++i) {
    const int key = config.mode == AugmentMode::kMultiA ? static_cast<int>(i) : -1;
    state.network_a_states[key] = nets_a[i]->graph.state();
  }
  by_class.clear();
  nets_a.clear();

  if (state.best_epoch) net_b.graph.load_state(state.best_checkpoint);
  const ValidationResult test = validate(net_b, data.test);
  state.test_accuracy = test.accuracy;
  state.test_loss = test.loss;
  state.tested_network_b = net_b.graph.state();
  if (state.best_epoch) state.metrics[*state.best_epoch].test_accuracy_at_best = test.accuracy;
  return state;
}

}  // namespace smartaug
