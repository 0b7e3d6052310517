#ifndef NOISYLAB_DATA_HPP
#define NOISYLAB_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/autodiff.hpp"

namespace noisylab {

enum class Provenance { synthetic, idx };

/// Images stored one per row (C*H*W values in [0,1], channel-major) with
/// class labels in [0, classes).
struct LabeledImageSet {
  RowMatrix images;
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;
  int classes = 0;
  Provenance provenance = Provenance::synthetic;

  std::size_t size() const { return labels.size(); }
  std::size_t pixels() const { return channels * height * width; }

  /// Images for the given rows as a [b x C*H*W] tensor.
  Tensor batch(std::span<const std::size_t> rows) const;
  /// All images as a [N x C*H*W] tensor.
  Tensor all() const;
};

/// Training set whose labels were corrupted. `data.labels` holds the noisy
/// labels; `corrupted[i]` is 1 exactly when they differ from `true_labels[i]`.
struct NoisyDataset {
  LabeledImageSet data;
  std::vector<int> true_labels;
  Mask corrupted;
  Scalar noise_rate = 0.0;

  std::size_t size() const { return data.size(); }
  std::size_t corrupted_count() const;
};

/// Horizontally flipped counterpart of a noisy dataset. Labels and the
/// corruption mask are the base's own objects; images are flipped on first use.
class FlipView {
 public:
  explicit FlipView(const NoisyDataset& base) : base_(&base) {}
  FlipView(const FlipView&) = delete;
  FlipView& operator=(const FlipView&) = delete;

  const NoisyDataset& base() const { return *base_; }
  const std::vector<int>& labels() const { return base_->data.labels; }
  const Mask& corrupted() const { return base_->corrupted; }
  const LabeledImageSet& images() const;

 private:
  const NoisyDataset* base_;
  mutable std::once_flag once_;
  mutable LabeledImageSet flipped_;
};

struct Batch {
  std::vector<std::size_t> indexes;
  Tensor images;
  std::vector<int> labels;
};

/// Reverses column order in every row of every channel of a C x H x W image.
std::vector<Scalar> hflip(std::span<const Scalar> image, std::size_t channels, std::size_t height, std::size_t width);
LabeledImageSet hflip(const LabeledImageSet& set);

inline constexpr int kShapeClassCount = 6;
inline constexpr std::size_t kMinShapeSide = 12;

/// Balanced synthetic set of mirror-symmetric shape classes (disk, ring,
/// plus, horizontal bars, vertical bars, checker), each placed at a random
/// offset of up to side/6 pixels and perturbed with N(0, 0.1) pixel noise.
LabeledImageSet gen_symmetric_shapes(std::size_t n, int classes, std::size_t side, std::uint64_t seed);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { format, consistency, length, io };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

LabeledImageSet load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path);
/// Writes a single-channel set as IDX (pixels rounded to u8).
void write_idx(const LabeledImageSet& set, const std::filesystem::path& image_path,
               const std::filesystem::path& label_path);

/// Corrupts exactly floor(noise_rate * N) labels, chosen uniformly without
/// replacement; each moves to a uniformly drawn different class.
NoisyDataset inject_symmetric_noise(const LabeledImageSet& set, Scalar noise_rate, std::uint64_t seed);

LabeledImageSet subset(const LabeledImageSet& set, std::span<const std::size_t> rows);

/// Seeded shuffle then contiguous split: test gets floor(test_fraction * N),
/// train the remainder.
std::pair<LabeledImageSet, LabeledImageSet> split(const LabeledImageSet& set, Scalar train_fraction,
                                                  Scalar test_fraction, std::uint64_t seed);

/// Index batches of one epoch: a permutation of 0..n-1 derived from (seed, epoch).
std::vector<std::vector<std::size_t>> batch_order(std::size_t n, std::size_t batch_size, int epoch,
                                                  std::uint64_t seed);
std::vector<Batch> batches(const LabeledImageSet& set, std::size_t batch_size, int epoch, std::uint64_t seed);

}  // namespace noisylab

#endif  // NOISYLAB_DATA_HPP
