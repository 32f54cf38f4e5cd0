#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace smartaug {

struct MetricsRecord {
  std::size_t epoch = 0;
  double train_loss_total = 0.0;
  std::optional<double> train_loss_a;  // absent without smart augmentation
  double train_loss_b = 0.0;
  double val_loss_b = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> test_accuracy_at_best;
};

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss_total,train_loss_a,train_loss_b,val_loss_b,val_accuracy";

struct MetricsTable {
  std::vector<MetricsRecord> records;
  std::optional<double> test_accuracy;
};

/// Header, one row per epoch (17 significant digits, missing values empty),
/// then `test_accuracy,<value>` when given.
std::string metrics_to_csv(const std::vector<MetricsRecord>& records,
                           std::optional<double> test_accuracy);

/// Throws FormatError naming the offending line number.
MetricsTable parse_metrics_csv(const std::string& text);

}  // namespace smartaug
