#ifndef NOISYLAB_METRICS_HPP
#define NOISYLAB_METRICS_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noisylab/data.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/selection.hpp"

namespace noisylab {

struct EpochRecord {
  int epoch = 0;
  Scalar keep_ratio = 1.0;
  Scalar lr = 0.0;
  Scalar loss_cls = 0.0;
  Scalar loss_ag = 0.0;
  Scalar loss_ens = 0.0;
  Scalar acc_m1 = 0.0;
  Scalar acc_m2 = 0.0;
  Scalar acc_ens = 0.0;
  Scalar clean_rate = 0.0;

  /// Value of a CSV column by name; throws std::out_of_range for unknown names.
  Scalar column(std::string_view name) const;
};

/// Column order of history.csv. Plotting and external tools rely on it.
inline constexpr std::array<std::string_view, 10> kHistoryColumns = {
    "epoch", "keep_ratio", "lr", "loss_cls", "loss_ag", "loss_ens", "acc_m1", "acc_m2", "acc_ens", "clean_rate"};

struct MetricsHistory {
  std::vector<EpochRecord> records;
  std::string fingerprint;
  std::vector<Scalar> epoch_seconds;
};

struct AccuracySummary {
  Scalar best = 0.0;
  Scalar last = 0.0;
  Scalar last10_mean = 0.0;
};

struct RunSummary {
  int epochs = 0;
  AccuracySummary model1;
  AccuracySummary model2;
  AccuracySummary ensemble;
  Scalar final_clean_rate = 0.0;

  /// The figure reported in tables: model 1's mean accuracy over the last 10 epochs.
  Scalar headline() const { return model1.last10_mean; }
};

/// Untaped logits for a whole set, evaluated in fixed-size chunks.
RowMatrix predict_logits(const ModelParams& params, const LabeledImageSet& set, std::size_t chunk = 500);

/// Index of the row maximum; ties go to the smallest index.
std::size_t argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row);

Scalar accuracy(const ModelParams& params, const LabeledImageSet& set);
Scalar accuracy_from_logits(const RowMatrix& logits, std::span<const int> labels);
/// Accuracy of the mean of the two models' softmax outputs.
Scalar ensemble_accuracy(const ModelParams& model1, const ModelParams& model2, const LabeledImageSet& set);

/// Fraction of the selected indexes whose labels are not corrupted.
Scalar selected_clean_rate(std::span<const std::size_t> selected, const Mask& corrupted);
inline Scalar selected_clean_rate(const SelectedSet& selected, const Mask& corrupted) {
  return selected_clean_rate(selected.indexes, corrupted);
}

AccuracySummary summarize_column(const MetricsHistory& history, std::string_view column);
RunSummary summarize(const MetricsHistory& history);

/// Writes history.csv-style output to `path` and a sibling summary.txt.
void write_history(const MetricsHistory& history, const std::filesystem::path& path);
MetricsHistory read_history(const std::filesystem::path& path);

std::string format_summary(const RunSummary& summary, const std::string& fingerprint);
/// Parses the `key = value` document written by format_summary.
RunSummary parse_summary(const std::string& text);
RunSummary read_summary(const std::filesystem::path& path);

}  // namespace noisylab

#endif  // NOISYLAB_METRICS_HPP
