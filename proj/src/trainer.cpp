#include "noisylab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <sstream>

#include "noisylab/seed.hpp"

namespace noisylab {

namespace {

Tensor as_tensor(const RowMatrix& m) {
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                Eigen::Map<const Vector>(m.data(), m.size()));
}

struct EpochTotals {
  Scalar cls = 0.0;
  Scalar ag = 0.0;
  Scalar ens = 0.0;
  std::size_t batches = 0;

  void fill(EpochRecord& r) const {
    const Scalar n = batches ? static_cast<Scalar>(batches) : 1.0;
    r.loss_cls = cls / n;
    r.loss_ag = ag / n;
    r.loss_ens = ens / n;
  }
};

Mask all_selected(std::size_t n) { return Mask(n, 1); }

Mask mask_from_picks(std::size_t n, const std::vector<std::size_t>& picks) {
  Mask mask(n, 0);
  for (auto p : picks) mask[p] = 1;
  return mask;
}

// Backpropagates a joint loss and takes one Adam step per model on its own
// parameters. A loss that never touched the tape yields zero gradients.
void step_models(const Tape& tape, const Tensor& loss, ModelParams* model1, const ModelParams* bound1,
                 AdamState* adam1, ModelParams* model2, const ModelParams* bound2, AdamState* adam2, Scalar lr) {
  std::vector<Tensor> g1, g2;
  if (loss.tape() == &tape) {
    const Gradients grads = tape.backward(loss);
    g1 = gradients_for(grads, *bound1);
    if (model2) g2 = gradients_for(grads, *bound2);
  } else {
    for (const auto& t : model1->tensors) g1.push_back(zeros(t.shape()));
    if (model2) {
      for (const auto& t : model2->tensors) g2.push_back(zeros(t.shape()));
    }
  }
  adam_step(*model1, g1, *adam1, lr);
  if (model2) adam_step(*model2, g2, *adam2, lr);
}

Scalar ensemble_value(const Tensor& z1, const Tensor& z2) {
  return mean_point_ensemble(softmax(z1.detached()), softmax(z2.detached())).item();
}

Scalar agreement_value(const Tensor& z1, const Tensor& z2) {
  return symmetric_kl_rows(log_softmax(z1.detached()), log_softmax(z2.detached())).values().mean();
}

SelectedSet finish_selection(std::vector<std::size_t> picked, int epoch, Scalar ratio) {
  std::sort(picked.begin(), picked.end());
  return SelectedSet{epoch, ratio, std::move(picked)};
}

void set_clean_rate(EpochOutcome& out, const NoisyDataset& noisy) {
  out.record.clean_rate = out.selected.indexes.empty() ? 0.0 : selected_clean_rate(out.selected, noisy.corrupted);
}

}  // namespace

std::uint64_t checksum(const RowMatrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(Scalar); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

DualModelState make_dual_state(const Architecture& arch, std::uint64_t seed1, std::uint64_t seed2,
                               const AdamOptions& adam) {
  DualModelState s{init_model(arch, seed1), init_model(arch, seed2), {}, {}};
  s.adam1 = make_adam(s.model1, adam);
  s.adam2 = make_adam(s.model2, adam);
  return s;
}

EpochOutcome run_mda_epoch(DualModelState& state, const NoisyDataset& noisy, const FlipView& flip,
                           const SelectionSchedule& schedule, const LossWeights& weights, Scalar lr, int epoch,
                           std::uint64_t seed, const EpochOptions& options) {
  EpochOutcome out;
  const Scalar ratio = keep_ratio(schedule, epoch);

  // Whole-set selection pass, no tape.
  const LabeledImageSet& view = options.selection_view == SelectionView::flip ? flip.images() : noisy.data;
  out.ranking_input_checksum = checksum(view.images);
  const RowMatrix z1 = predict_logits(state.model1, view);
  const RowMatrix z2 = predict_logits(state.model2, view);
  const PerSampleLosses sel = selection_loss(as_tensor(z1), as_tensor(z2), view.labels, weights);
  out.selected = select_small_loss(sel, ratio, epoch);

  EpochTotals totals;

  for (const Batch& batch : batches(noisy.data, options.batch_size, epoch, seed)) {
    Tape tape;
    const ModelParams b1 = bind(tape, state.model1);
    const ModelParams b2 = bind(tape, state.model2);
    const Tensor l1 = forward(b1, batch.images);
    const Tensor l2 = forward(b2, batch.images);

    const Tensor cls_rows = add(cross_entropy_rows(l1, batch.labels), cross_entropy_rows(l2, batch.labels));
    const Tensor cls = masked_mean(cls_rows, batch_selected(out.selected, batch.indexes));
    Tensor loss = cls;
    if (weights.gamma != 0.0) {
      const Tensor ens = mean_point_ensemble(softmax(l1), softmax(l2));
      totals.ens += ens.item();
      loss = training_loss(cls, ens, weights);
    } else {
      totals.ens += ensemble_value(l1, l2);
    }
    totals.cls += cls.item();
    ++totals.batches;
    step_models(tape, loss, &state.model1, &b1, &state.adam1, &state.model2, &b2, &state.adam2, lr);
  }

  out.record.epoch = epoch;
  out.record.keep_ratio = ratio;
  out.record.lr = lr;
  totals.fill(out.record);
  out.record.loss_ag = symmetric_kl_per_sample(softmax_rows(z1), softmax_rows(z2)).mean();
  set_clean_rate(out, noisy);
  return out;
}

EpochOutcome run_baseline_epoch(ModelParams& params, AdamState& adam, const NoisyDataset& noisy, Scalar lr,
                                int epoch, std::uint64_t seed, const EpochOptions& options) {
  EpochOutcome out;
  EpochTotals totals;
  for (const Batch& batch : batches(noisy.data, options.batch_size, epoch, seed)) {
    Tape tape;
    const ModelParams bound = bind(tape, params);
    const Tensor ce = cross_entropy_rows(forward(bound, batch.images), batch.labels);
    const Tensor loss = masked_mean(ce, all_selected(batch.indexes.size()));
    totals.cls += loss.item();
    ++totals.batches;
    step_models(tape, loss, &params, &bound, &adam, nullptr, nullptr, nullptr, lr);
  }
  out.record.epoch = epoch;
  out.record.keep_ratio = 1.0;
  out.record.lr = lr;
  totals.fill(out.record);
  std::vector<std::size_t> everything(noisy.size());
  for (std::size_t i = 0; i < everything.size(); ++i) everything[i] = i;
  out.selected = SelectedSet{epoch, 1.0, std::move(everything)};
  set_clean_rate(out, noisy);
  return out;
}

EpochOutcome run_paired_ce_epoch(DualModelState& state, const NoisyDataset& noisy, Scalar lr, int epoch,
                                 std::uint64_t seed, const EpochOptions& options) {
  EpochOutcome out;
  EpochTotals totals;
  for (const Batch& batch : batches(noisy.data, options.batch_size, epoch, seed)) {
    Tape tape;
    const ModelParams b1 = bind(tape, state.model1);
    const ModelParams b2 = bind(tape, state.model2);
    const Tensor l1 = forward(b1, batch.images);
    const Tensor l2 = forward(b2, batch.images);
    const Mask all = all_selected(batch.indexes.size());
    const Tensor loss = add(masked_mean(cross_entropy_rows(l1, batch.labels), all),
                            masked_mean(cross_entropy_rows(l2, batch.labels), all));
    totals.cls += loss.item();
    totals.ens += ensemble_value(l1, l2);
    ++totals.batches;
    step_models(tape, loss, &state.model1, &b1, &state.adam1, &state.model2, &b2, &state.adam2, lr);
  }
  out.record.epoch = epoch;
  out.record.keep_ratio = 1.0;
  out.record.lr = lr;
  totals.fill(out.record);
  std::vector<std::size_t> everything(noisy.size());
  for (std::size_t i = 0; i < everything.size(); ++i) everything[i] = i;
  out.selected = SelectedSet{epoch, 1.0, std::move(everything)};
  set_clean_rate(out, noisy);
  return out;
}

namespace {

// Shared body of the two co-teaching regimes. With `flip` null the ranking
// uses the taped losses on the original images.
EpochOutcome coteaching_epoch(DualModelState& state, const NoisyDataset& noisy, const FlipView* flip,
                              const SelectionSchedule& schedule, Scalar gamma, Scalar lr, int epoch,
                              std::uint64_t seed, const EpochOptions& options) {
  EpochOutcome out;
  EpochTotals totals;
  const Scalar ratio = keep_ratio(schedule, epoch);
  std::vector<std::size_t> picked_by_model1;
  if (flip) out.ranking_input_checksum = checksum(flip->images().images);

  for (const Batch& batch : batches(noisy.data, options.batch_size, epoch, seed)) {
    Tape tape;
    const ModelParams b1 = bind(tape, state.model1);
    const ModelParams b2 = bind(tape, state.model2);
    const Tensor l1 = forward(b1, batch.images);
    const Tensor l2 = forward(b2, batch.images);
    const Tensor ce1 = cross_entropy_rows(l1, batch.labels);
    const Tensor ce2 = cross_entropy_rows(l2, batch.labels);

    Vector rank1 = ce1.values(), rank2 = ce2.values();
    if (flip) {
      const Tensor flipped = flip->images().batch(batch.indexes);
      rank1 = cross_entropy_per_sample(forward(state.model1, flipped), batch.labels);
      rank2 = cross_entropy_per_sample(forward(state.model2, flipped), batch.labels);
    }
    const std::size_t b = batch.indexes.size();
    const std::size_t keep = kept_count(ratio, b);
    const auto picks1 = smallest(std::span<const Scalar>(rank1.data(), b), keep);
    const auto picks2 = smallest(std::span<const Scalar>(rank2.data(), b), keep);
    for (auto p : picks1) picked_by_model1.push_back(batch.indexes[p]);

    // Each model learns from the samples its peer judged clean.
    const Tensor cls1 = masked_mean(ce1, mask_from_picks(b, picks2));
    const Tensor cls2 = masked_mean(ce2, mask_from_picks(b, picks1));
    Tensor loss = add(cls1, cls2);
    if (gamma != 0.0) {
      const Tensor ens = mean_point_ensemble(softmax(l1), softmax(l2));
      totals.ens += ens.item();
      loss = add(loss, scale(ens, gamma));
    } else {
      totals.ens += ensemble_value(l1, l2);
    }
    totals.cls += cls1.item() + cls2.item();
    totals.ag += agreement_value(l1, l2);
    ++totals.batches;
    step_models(tape, loss, &state.model1, &b1, &state.adam1, &state.model2, &b2, &state.adam2, lr);
  }

  out.record.epoch = epoch;
  out.record.keep_ratio = ratio;
  out.record.lr = lr;
  totals.fill(out.record);
  out.selected = finish_selection(std::move(picked_by_model1), epoch, ratio);
  set_clean_rate(out, noisy);
  return out;
}

}  // namespace

EpochOutcome run_coteaching_epoch(DualModelState& state, const NoisyDataset& noisy,
                                  const SelectionSchedule& schedule, Scalar lr, int epoch, std::uint64_t seed,
                                  const EpochOptions& options) {
  return coteaching_epoch(state, noisy, nullptr, schedule, 0.0, lr, epoch, seed, options);
}

EpochOutcome run_coteaching_mda_epoch(DualModelState& state, const NoisyDataset& noisy, const FlipView& flip,
                                      const SelectionSchedule& schedule, const LossWeights& weights, Scalar lr,
                                      int epoch, std::uint64_t seed, const EpochOptions& options) {
  const FlipView* ranking = options.selection_view == SelectionView::flip ? &flip : nullptr;
  return coteaching_epoch(state, noisy, ranking, schedule, weights.gamma, lr, epoch, seed, options);
}

EpochOutcome run_jocor_epoch(DualModelState& state, const NoisyDataset& noisy, const SelectionSchedule& schedule,
                             const LossWeights& weights, Scalar lr, int epoch, std::uint64_t seed,
                             const EpochOptions& options) {
  EpochOutcome out;
  EpochTotals totals;
  const Scalar ratio = keep_ratio(schedule, epoch);
  std::vector<std::size_t> picked;

  for (const Batch& batch : batches(noisy.data, options.batch_size, epoch, seed)) {
    Tape tape;
    const ModelParams b1 = bind(tape, state.model1);
    const ModelParams b2 = bind(tape, state.model2);
    const Tensor l1 = forward(b1, batch.images);
    const Tensor l2 = forward(b2, batch.images);
    const Tensor lp1 = log_softmax(l1);
    const Tensor lp2 = log_softmax(l2);
    const Tensor ce = add(neg(pick(lp1, batch.labels)), neg(pick(lp2, batch.labels)));
    const Tensor kl = symmetric_kl_rows(lp1, lp2);
    const Tensor joint = add(scale(ce, 1.0 - weights.lambda), scale(kl, weights.lambda));

    const std::size_t b = batch.indexes.size();
    const auto picks = smallest(std::span<const Scalar>(joint.values().data(), b), kept_count(ratio, b));
    for (auto p : picks) picked.push_back(batch.indexes[p]);
    const Mask mask = mask_from_picks(b, picks);
    const Tensor loss = masked_mean(joint, mask);

    totals.cls += masked_mean(ce.detached(), mask).item();
    totals.ag += kl.values().mean();
    totals.ens += ensemble_value(l1, l2);
    ++totals.batches;
    step_models(tape, loss, &state.model1, &b1, &state.adam1, &state.model2, &b2, &state.adam2, lr);
  }

  out.record.epoch = epoch;
  out.record.keep_ratio = ratio;
  out.record.lr = lr;
  totals.fill(out.record);
  out.selected = finish_selection(std::move(picked), epoch, ratio);
  set_clean_rate(out, noisy);
  return out;
}

// -- Experiment driver -------------------------------------------------------

ExperimentData make_experiment_data(const ExperimentConfig& config) {
  LabeledImageSet train_clean, test;
  if (config.dataset == DatasetSource::synthetic) {
    train_clean = gen_symmetric_shapes(config.n_train, config.classes, config.side, config.data_seed());
    test = gen_symmetric_shapes(config.n_test, config.classes, config.side, derive_seed(config.data_seed(), 1));
  } else {
    const LabeledImageSet all = load_idx(config.idx_images, config.idx_labels);
    std::tie(train_clean, test) = split(all, 1.0 - config.test_fraction, config.test_fraction, config.data_seed());
  }
  return {inject_symmetric_noise(train_clean, config.noise_rate, config.noise_seed()), std::move(test)};
}

Architecture make_architecture(const ExperimentConfig& config, const LabeledImageSet& sample) {
  std::ostringstream text;
  text << "input=" << sample.channels << 'x' << sample.height << 'x' << sample.width;
  if (!config.conv.empty()) text << " conv=" << config.conv;
  text << " dense=";
  if (!config.hidden.empty()) text << config.hidden << ',';
  text << sample.classes;
  return Architecture::parse(text.str());
}

TrainResult train_with_state(const ExperimentConfig& config, const TrainHooks& hooks) {
  config.validate();
  const ExperimentData data = make_experiment_data(config);
  const FlipView flip(data.train);
  const Architecture arch = make_architecture(config, data.train.data);

  AdamOptions adam;
  adam.weight_decay = config.weight_decay;
  TrainResult result{{}, make_dual_state(arch, config.model_seed(1), config.model_seed(2), adam)};
  DualModelState& state = result.state;
  MetricsHistory& history = result.history;
  history.fingerprint = fingerprint(config);

  const SelectionSchedule schedule{config.noise_rate, config.tk, config.epochs};
  const LossWeights weights{config.lambda, config.gamma};
  const LrSchedule lrs{config.lr, config.epochs, config.decay_start};
  const EpochOptions options{config.batch_size, config.selection_view};
  const std::uint64_t seed = config.shuffle_seed();

  for (int t = 1; t <= config.epochs; ++t) {
    const auto started = std::chrono::steady_clock::now();
    const Scalar lr = lr_at(lrs, t - 1);
    EpochOutcome outcome;
    switch (config.method) {
      case Method::baseline:
        outcome = run_baseline_epoch(state.model1, state.adam1, data.train, lr, t, seed, options);
        break;
      case Method::coteaching:
        outcome = run_coteaching_epoch(state, data.train, schedule, lr, t, seed, options);
        break;
      case Method::jocor:
        outcome = run_jocor_epoch(state, data.train, schedule, weights, lr, t, seed, options);
        break;
      case Method::mda:
        outcome = run_mda_epoch(state, data.train, flip, schedule, weights, lr, t, seed, options);
        break;
      case Method::coteaching_mda:
        outcome = run_coteaching_mda_epoch(state, data.train, flip, schedule, weights, lr, t, seed, options);
        break;
    }

    EpochRecord& rec = outcome.record;
    const RowMatrix z1 = predict_logits(state.model1, data.test);
    rec.acc_m1 = accuracy_from_logits(z1, data.test.labels);
    if (config.method == Method::baseline) {
      rec.acc_m2 = rec.acc_m1;
      rec.acc_ens = rec.acc_m1;
    } else {
      const RowMatrix z2 = predict_logits(state.model2, data.test);
      rec.acc_m2 = accuracy_from_logits(z2, data.test.labels);
      rec.acc_ens = accuracy_from_logits(0.5 * (softmax_rows(z1) + softmax_rows(z2)), data.test.labels);
    }
    history.records.push_back(rec);
    history.epoch_seconds.push_back(
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - started).count());
    if (hooks.on_selection) hooks.on_selection(outcome.selected);
    if (hooks.on_epoch_end) hooks.on_epoch_end(t, state);
  }
  return result;
}

MetricsHistory train(const ExperimentConfig& config, const TrainHooks& hooks) {
  return train_with_state(config, hooks).history;
}

FlipProbe probe_flip_detection(const ExperimentConfig& config) {
  config.validate();
  const ExperimentData data = make_experiment_data(config);
  const FlipView flip(data.train);
  ModelParams model = init_model(make_architecture(config, data.train.data), config.model_seed(1));
  AdamOptions adam_options;
  adam_options.weight_decay = config.weight_decay;
  AdamState adam = make_adam(model, adam_options);
  const LrSchedule lrs{config.lr, config.epochs, config.decay_start};
  const EpochOptions options{config.batch_size, config.selection_view};
  for (int t = 1; t <= config.epochs; ++t) {
    run_baseline_epoch(model, adam, data.train, lr_at(lrs, t - 1), t, config.shuffle_seed(), options);
  }

  const Scalar ratio = 1.0 - config.noise_rate;
  const auto& labels = data.train.data.labels;
  const auto original = cross_entropy_per_sample(as_tensor(predict_logits(model, data.train.data)), labels);
  const auto flipped = cross_entropy_per_sample(as_tensor(predict_logits(model, flip.images())), labels);
  return {selected_clean_rate(select_small_loss(original, ratio), data.train.corrupted),
          selected_clean_rate(select_small_loss(flipped, ratio), data.train.corrupted)};
}

}  // namespace noisylab
