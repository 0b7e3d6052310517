#ifndef NOISYLAB_LOSSES_HPP
#define NOISYLAB_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <span>

#include "noisylab/autodiff.hpp"

namespace noisylab {

/// Loss weights: lambda scales the agreement term during selection, gamma the
/// mean-point-ensemble term during training.
struct LossWeights {
  Scalar lambda = 0.65;
  Scalar gamma = 1.0;
};

/// One loss value per dataset sample, aligned with dataset indexes.
using PerSampleLosses = Vector;

inline constexpr Scalar kProbabilityFloor = 1e-12;
inline constexpr Scalar kNormalizationTolerance = 1e-8;

// ---------------------------------------------------------------------------
// Probability-space helpers on plain Eigen expressions (inference only).

/// Symmetric KL between corresponding rows of two row-stochastic matrices:
/// KL(p1||p2) + KL(p2||p1), written as sum_j (p1 - p2)(ln p1 - ln p2) with
/// probabilities floored at 1e-12 inside the logarithms.
template <typename Derived1, typename Derived2>
Eigen::Matrix<typename Derived1::Scalar, Eigen::Dynamic, 1> symmetric_kl_per_sample(
    const Eigen::MatrixBase<Derived1>& p1, const Eigen::MatrixBase<Derived2>& p2) {
  using S = typename Derived1::Scalar;
  if (p1.rows() != p2.rows() || p1.cols() != p2.cols()) {
    throw TensorError("symmetric_kl_per_sample: shape mismatch");
  }
  for (Eigen::Index r = 0; r < p1.rows(); ++r) {
    if (std::abs(p1.row(r).sum() - S(1)) > kNormalizationTolerance ||
        std::abs(p2.row(r).sum() - S(1)) > kNormalizationTolerance) {
      throw TensorError("symmetric_kl_per_sample: row " + std::to_string(r) + " is not normalized");
    }
  }
  const auto log1 = p1.array().max(S(kProbabilityFloor)).log();
  const auto log2 = p2.array().max(S(kProbabilityFloor)).log();
  return ((p1.array() - p2.array()) * (log1 - log2)).rowwise().sum();
}

/// Row-wise softmax of a logit matrix, max-shifted.
template <typename Derived>
RowMatrixT<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  RowMatrixT<typename Derived::Scalar> p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    p.row(r) = (p.row(r).array() - p.row(r).maxCoeff()).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Tensor forms. These record onto the tape of their inputs when present.

/// Per-row cross-entropy -log softmax(logits)[i, label_i], shape [B].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> labels);

/// Per-row symmetric KL from two log-probability tensors, shape [B].
Tensor symmetric_kl_rows(const Tensor& log_p1, const Tensor& log_p2);

/// Mean of the rows selected by a 0/1 mask. An empty selection yields an
/// untaped scalar zero.
Tensor masked_mean(const Tensor& rows, std::span<const std::uint8_t> mask);

/// (1/B) sum_i ||p1_i - mean_i||^2 + ||p2_i - mean_i||^2, with mean_i the
/// average of the two predictions. Inputs are probability tensors [B x M].
Tensor mean_point_ensemble(const Tensor& p1, const Tensor& p2);

/// cls + gamma * ens.
Tensor training_loss(const Tensor& cls_mean_selected, const Tensor& ens_all, const LossWeights& weights);

// ---------------------------------------------------------------------------
// Per-sample values, computed without a tape.

PerSampleLosses cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels);

struct ClassificationLoss {
  PerSampleLosses per_sample;
  Scalar mean = 0.0;
};

/// Sum of both models' cross-entropies per sample, and its batch mean.
ClassificationLoss classification_loss(const Tensor& logits1, const Tensor& logits2, std::span<const int> labels);

/// (CE1 + CE2) + lambda * symmetric KL of the two softmax outputs, per sample.
PerSampleLosses selection_loss(const Tensor& logits1, const Tensor& logits2, std::span<const int> labels,
                               const LossWeights& weights);

}  // namespace noisylab

#endif  // NOISYLAB_LOSSES_HPP
