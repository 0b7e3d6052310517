#ifndef NOISYLAB_TRAINER_HPP
#define NOISYLAB_TRAINER_HPP

#include <cstdint>
#include <functional>

#include "noisylab/config.hpp"
#include "noisylab/data.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/metrics.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/selection.hpp"

namespace noisylab {

/// Two models of identical architecture with distinct initial seeds, each
/// with its own Adam state. Single-model regimes use only the first.
struct DualModelState {
  ModelParams model1;
  ModelParams model2;
  AdamState adam1;
  AdamState adam2;
};

DualModelState make_dual_state(const Architecture& arch, std::uint64_t seed1, std::uint64_t seed2,
                               const AdamOptions& adam);

struct EpochOptions {
  std::size_t batch_size = 128;
  SelectionView selection_view = SelectionView::flip;
};

/// Result of one training epoch. `selected` is the set the clean rate was
/// measured on; test accuracies are filled in by the caller.
struct EpochOutcome {
  EpochRecord record;
  SelectedSet selected;
  /// FNV-1a over the pixel buffer that fed small-loss ranking (0 if none).
  std::uint64_t ranking_input_checksum = 0;
};

std::uint64_t checksum(const RowMatrix& m);

/// One epoch of the dual-model flip-selection / mean-point-ensemble regime:
/// whole-set selection loss on the flip view, small-loss set at R(t), then
/// per batch cls on selected samples plus gamma * ensemble on all samples.
EpochOutcome run_mda_epoch(DualModelState& state, const NoisyDataset& noisy, const FlipView& flip,
                           const SelectionSchedule& schedule, const LossWeights& weights, Scalar lr, int epoch,
                           std::uint64_t seed, const EpochOptions& options = {});

/// Plain cross-entropy on every noisy sample, model 1 only.
EpochOutcome run_baseline_epoch(ModelParams& params, AdamState& adam, const NoisyDataset& noisy, Scalar lr,
                                int epoch, std::uint64_t seed, const EpochOptions& options = {});

/// Two independently trained cross-entropy models sharing batch order.
EpochOutcome run_paired_ce_epoch(DualModelState& state, const NoisyDataset& noisy, Scalar lr, int epoch,
                                 std::uint64_t seed, const EpochOptions& options = {});

/// Each model picks its floor(R*b) smallest-CE samples per batch and its peer
/// trains on them.
EpochOutcome run_coteaching_epoch(DualModelState& state, const NoisyDataset& noisy,
                                  const SelectionSchedule& schedule, Scalar lr, int epoch, std::uint64_t seed,
                                  const EpochOptions& options = {});

/// Per-batch joint loss (1-lambda)(CE1+CE2) + lambda*symKL ranks samples on
/// the original images; both models train on the selected joint loss.
EpochOutcome run_jocor_epoch(DualModelState& state, const NoisyDataset& noisy, const SelectionSchedule& schedule,
                             const LossWeights& weights, Scalar lr, int epoch, std::uint64_t seed,
                             const EpochOptions& options = {});

/// Co-teaching cross-update with ranking on flipped batch images and
/// gamma * ensemble over the whole batch added to the update.
EpochOutcome run_coteaching_mda_epoch(DualModelState& state, const NoisyDataset& noisy, const FlipView& flip,
                                      const SelectionSchedule& schedule, const LossWeights& weights, Scalar lr,
                                      int epoch, std::uint64_t seed, const EpochOptions& options = {});

struct ExperimentData {
  NoisyDataset train;
  LabeledImageSet test;
};

ExperimentData make_experiment_data(const ExperimentConfig& config);
Architecture make_architecture(const ExperimentConfig& config, const LabeledImageSet& sample);

struct TrainHooks {
  std::function<void(int epoch, const DualModelState&)> on_epoch_end;
  std::function<void(const SelectedSet&)> on_selection;
};

struct TrainResult {
  MetricsHistory history;
  DualModelState state;
};

TrainResult train_with_state(const ExperimentConfig& config, const TrainHooks& hooks = {});
MetricsHistory train(const ExperimentConfig& config, const TrainHooks& hooks = {});

/// Clean rate of the (1 - tau) small-loss set of a model trained with plain
/// cross-entropy for `config.epochs`, ranked by original versus flipped images.
struct FlipProbe {
  Scalar clean_rate_original = 0.0;
  Scalar clean_rate_flip = 0.0;
};

FlipProbe probe_flip_detection(const ExperimentConfig& config);

}  // namespace noisylab

#endif  // NOISYLAB_TRAINER_HPP
