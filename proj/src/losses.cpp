#include "noisylab/losses.hpp"

namespace noisylab {

namespace {

void require_labels(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw TensorError("loss: logits " + to_string(logits.shape()) + " do not match " +
                      std::to_string(labels.size()) + " labels");
  }
  const auto classes = static_cast<int>(logits.dim(1));
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw TensorError("loss: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> labels) {
  require_labels(logits, labels);
  return neg(pick(log_softmax(logits), labels));
}

Tensor symmetric_kl_rows(const Tensor& log_p1, const Tensor& log_p2) {
  if (log_p1.shape() != log_p2.shape() || log_p1.rank() != 2) {
    throw TensorError("symmetric_kl_rows: shape mismatch");
  }
  return sum(mul(sub(exp(log_p1), exp(log_p2)), sub(log_p1, log_p2)), 1);
}

Tensor masked_mean(const Tensor& rows, std::span<const std::uint8_t> mask) {
  if (rows.rank() != 1 || rows.size() != mask.size()) throw TensorError("masked_mean: mask length mismatch");
  Vector weights(static_cast<Eigen::Index>(mask.size()));
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    weights[static_cast<Eigen::Index>(i)] = mask[i] ? 1.0 : 0.0;
    count += mask[i] ? 1 : 0;
  }
  if (count == 0) return zeros({});
  return scale(sum(mul(rows, Tensor(rows.shape(), std::move(weights)))), 1.0 / static_cast<Scalar>(count));
}

Tensor mean_point_ensemble(const Tensor& p1, const Tensor& p2) {
  if (p1.shape() != p2.shape() || p1.rank() != 2) throw TensorError("mean_point_ensemble: shape mismatch");
  if (p1.dim(0) == 0) return zeros({});
  const Tensor center = scale(add(p1, p2), 0.5);
  const Tensor spread = add(sum(square(sub(p1, center))), sum(square(sub(p2, center))));
  return scale(spread, 1.0 / static_cast<Scalar>(p1.dim(0)));
}

Tensor training_loss(const Tensor& cls_mean_selected, const Tensor& ens_all, const LossWeights& weights) {
  return add(cls_mean_selected, scale(ens_all, weights.gamma));
}

PerSampleLosses cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels) {
  return cross_entropy_rows(logits.detached(), labels).values();
}

ClassificationLoss classification_loss(const Tensor& logits1, const Tensor& logits2, std::span<const int> labels) {
  if (logits1.shape() != logits2.shape()) throw TensorError("classification_loss: logits shape mismatch");
  ClassificationLoss out;
  out.per_sample = cross_entropy_per_sample(logits1, labels) + cross_entropy_per_sample(logits2, labels);
  out.mean = out.per_sample.size() ? out.per_sample.mean() : 0.0;
  return out;
}

PerSampleLosses selection_loss(const Tensor& logits1, const Tensor& logits2, std::span<const int> labels,
                               const LossWeights& weights) {
  PerSampleLosses loss = classification_loss(logits1, logits2, labels).per_sample;
  if (weights.lambda != 0.0) {
    loss += weights.lambda * symmetric_kl_per_sample(softmax_rows(logits1.matrix()), softmax_rows(logits2.matrix()));
  }
  return loss;
}

}  // namespace noisylab
