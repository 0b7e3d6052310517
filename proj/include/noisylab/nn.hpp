#ifndef NOISYLAB_NN_HPP
#define NOISYLAB_NN_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noisylab/autodiff.hpp"

namespace noisylab {

struct ConvSpec {
  std::size_t kernels = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  bool operator==(const ConvSpec&) const = default;
};

/// Network shape: an input image geometry, an optional stack of valid
/// stride-1 convolutions (each followed by relu), then dense layers. The last
/// dense width is the class count; relu sits between dense layers.
struct Architecture {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 0;
  std::vector<ConvSpec> conv;
  std::vector<std::size_t> dense;

  std::size_t input_features() const { return channels * height * width; }
  std::size_t classes() const { return dense.empty() ? 0 : dense.back(); }

  /// Throws std::invalid_argument when the layer chain is not realizable.
  void validate() const;

  /// Text form, e.g. "input=1x16x16 conv=8x3x3 dense=64,4".
  std::string describe() const;
  static Architecture parse(std::string_view text);

  bool operator==(const Architecture&) const = default;
};

/// Multilayer perceptron from layer sizes [input, hidden..., classes].
Architecture mlp(std::span<const std::size_t> sizes);
Architecture mlp(std::initializer_list<std::size_t> sizes);

/// Parameters in forward order: for each layer its weight then its bias.
struct ModelParams {
  Architecture arch;
  std::vector<Tensor> tensors;
  std::uint64_t seed = 0;

  std::size_t layer_count() const { return tensors.size() / 2; }
  const Tensor& weight(std::size_t layer) const { return tensors.at(2 * layer); }
  const Tensor& bias(std::size_t layer) const { return tensors.at(2 * layer + 1); }
  std::size_t parameter_count() const;
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases, deterministic in seed.
ModelParams init_model(const Architecture& arch, std::uint64_t seed);

/// Copy of the parameters registered as trainable leaves on a tape.
ModelParams bind(Tape& tape, const ModelParams& params);

/// Gradients for each tensor of a bound model, in parameter order.
std::vector<Tensor> gradients_for(const Gradients& grads, const ModelParams& bound);

/// Logits for a batch shaped [B x features] or [B x C x H x W]. Taped when the
/// parameters or the batch are.
Tensor forward(const ModelParams& params, const Tensor& batch);

struct AdamOptions {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Scalar weight_decay = 0.0;  // coupled L2, added to the gradient
};

struct AdamState {
  AdamOptions options;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::int64_t step = 0;
};

AdamState make_adam(const ModelParams& params, AdamOptions options = {});

/// One bias-corrected Adam update in place.
void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state, Scalar lr);

/// Constant rate until decay_start * total_epochs, then linear decay to zero
/// at total_epochs.
struct LrSchedule {
  Scalar base = 0.001;
  int total_epochs = 200;
  Scalar decay_start = 0.4;
};

Scalar lr_at(const LrSchedule& schedule, int epoch);

// Checkpoint container: "NLAB", u32 version, u32-length-prefixed architecture
// text, then per tensor u32 rank, u32 extents, little-endian f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams read_checkpoint(const std::filesystem::path& path);

}  // namespace noisylab

#endif  // NOISYLAB_NN_HPP
