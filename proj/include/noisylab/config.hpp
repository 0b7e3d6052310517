#ifndef NOISYLAB_CONFIG_HPP
#define NOISYLAB_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace noisylab {

enum class Method { baseline, coteaching, jocor, mda, coteaching_mda };
enum class DatasetSource { synthetic, idx };
/// Which images feed small-loss ranking: the flipped view or the originals.
enum class SelectionView { flip, original };

std::string_view to_string(Method m);
std::string_view to_string(DatasetSource d);
std::string_view to_string(SelectionView v);
Method parse_method(std::string_view text);

/// Configuration problem reported to the user; the message names the key.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `--help` was given; the message is the usage text.
class HelpRequested : public UsageError {
 public:
  using UsageError::UsageError;
};

struct ExperimentConfig {
  Method method = Method::mda;
  DatasetSource dataset = DatasetSource::synthetic;
  std::string idx_images;
  std::string idx_labels;
  double test_fraction = 0.2;  // idx only

  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  int classes = 4;
  std::size_t side = 16;

  double noise_rate = 0.2;
  int tk = 10;
  int epochs = 60;
  std::size_t batch_size = 128;
  double lr = 0.001;
  double decay_start = 0.4;
  double weight_decay = 1e-4;
  double lambda = 0.65;
  double gamma = 1.0;
  SelectionView selection_view = SelectionView::flip;

  std::string hidden = "128,64";
  std::string conv;

  std::uint64_t seed = 1;
  std::string out = "noisylab-out";
  int checkpoint_every = 0;
  bool dump_selection = false;

  /// Derived sub-seeds; all follow from `seed`.
  std::uint64_t data_seed() const;
  std::uint64_t noise_seed() const;
  std::uint64_t model_seed(int which) const;
  std::uint64_t shuffle_seed() const;

  /// Throws UsageError naming the offending key.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Sorted `key = value` lines; accepted back by parse_config as a config file.
std::string canonical_text(const ExperimentConfig& config);
/// Hex FNV-1a of the canonical text without output-only keys.
std::string fingerprint(const ExperimentConfig& config);

/// Parses experiment flags (`--noise-rate 0.5`, ...). A flat `key = value`
/// file given by `--config` or `config_file` may set any flag; the command
/// line wins. Throws UsageError.
ExperimentConfig parse_config(const std::vector<std::string>& args,
                              const std::optional<std::filesystem::path>& config_file = std::nullopt);

struct SweepRequest {
  ExperimentConfig base;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

/// Experiment flags plus `--methods a,b`, `--seeds 1,2,3`, `--jobs N`.
SweepRequest parse_sweep(const std::vector<std::string>& args);

}  // namespace noisylab

#endif  // NOISYLAB_CONFIG_HPP
