#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smartaug/augment.hpp"
#include "smartaug/checkpoint.hpp"
#include "smartaug/data.hpp"
#include "smartaug/metrics.hpp"
#include "smartaug/models.hpp"
#include "smartaug/optimizer.hpp"

namespace smartaug {

/// Weights of the joint objective alpha * L_A + beta * L_B.
struct CombinedLossParams {
  double alpha = 0.3;
  double beta = 0.7;

  void validate() const;
};

double combined_loss(double loss_a, double loss_b, const CombinedLossParams& params);
Tensor combined_loss(const Tensor& loss_a, const Tensor& loss_b, const CombinedLossParams& params);

struct StepLosses {
  double loss_a = 0.0;
  double loss_b = 0.0;
  double total = 0.0;
};

/// One joint update. Network A blends the packed sources into out1; L_A is the
/// MSE between out1 and the held-out target; Network B classifies out1 and the
/// target as two separate labeled samples (L_B is the mean cross-entropy over
/// both). A and B are updated from the combined loss in one optimizer step.
StepLosses joint_step(const AugmentBatch& batch, NetworkA& net_a, NetworkB1& net_b,
                      const CombinedLossParams& params, NesterovSgd& optimizer, Rng& rng);

/// joint_step with one Network A per class. L_A is the sample-weighted mean of
/// the per-class MSEs; each class's samples flow only through that class's A.
StepLosses multi_a_step(const AugmentBatch& batch, const std::map<int, NetworkA*>& augmenters,
                        NetworkB1& net_b, const CombinedLossParams& params,
                        NesterovSgd& optimizer, Rng& rng);

/// Plain supervised step on Network B.
double baseline_step(const Tensor& images, std::span<const int> labels, NetworkB1& net_b,
                     NesterovSgd& optimizer, Rng& rng);

struct ValidationResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Infer-mode cross-entropy and accuracy of Network B alone over `dataset`.
ValidationResult validate(NetworkB1& net_b, const Dataset& dataset, std::size_t batch_size = 100);

enum class AugmentMode { kBaseline, kSingleA, kMultiA };

struct TrainingConfig {
  AugmentMode mode = AugmentMode::kSingleA;
  std::size_t k = 2;
  CombinedLossParams loss;
  /// When set, alpha/beta move linearly from `loss` at epoch 0 to this value at
  /// the final epoch.
  std::optional<CombinedLossParams> final_loss;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 1000;
  /// Samples seen by Network B per step. Smart-augmentation steps draw
  /// ceil(batch_size / 2) augment samples, each contributing out1 and target.
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  NetworkAOptions a_options;
  NetworkB1Options b_options;

  void validate() const;
  CombinedLossParams loss_at_epoch(std::size_t epoch) const;
};

struct TrainState {
  std::size_t epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_epoch;
  std::vector<NamedTensor> best_checkpoint;  // Network B at best_epoch; empty if none
  std::vector<MetricsRecord> metrics;
  std::vector<double> best_validation_history;  // best_validation_loss after each epoch

  double test_accuracy = 0.0;
  double test_loss = 0.0;
  std::vector<NamedTensor> tested_network_b;  // the state test_accuracy was measured on
  std::string network_b_description;

  /// Final Network A parameters by class (-1 for the single shared A).
  std::map<int, std::vector<NamedTensor>> network_a_states;
  std::string network_a_description;

  std::size_t a_forward_passes_training = 0;
  std::size_t a_forward_passes_during_eval = 0;
};

struct TrainingHooks {
  /// Replaces validate() for per-epoch model selection when set.
  std::function<ValidationResult(NetworkB1&, const Dataset&, std::size_t epoch)> validator;
  std::function<void(const MetricsRecord&)> on_epoch;
};

/// Runs `config.epochs` epochs, checkpoints Network B whenever validation loss
/// improves, then restores the best checkpoint, drops every Network A and
/// measures test accuracy.
TrainState run_training(const TrainingConfig& config, const DatasetSplits& data,
                        const TrainingHooks& hooks = {});

}  // namespace smartaug
