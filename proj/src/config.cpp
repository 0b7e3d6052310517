#include "noisylab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "noisylab/seed.hpp"

namespace noisylab {

namespace {

constexpr std::pair<Method, std::string_view> kMethods[] = {
    {Method::baseline, "baseline"}, {Method::coteaching, "coteaching"}, {Method::jocor, "jocor"},
    {Method::mda, "mda"},           {Method::coteaching_mda, "coteaching_mda"},
};

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Registers every experiment flag. Enum-valued flags land in strings that
// are converted after parsing.
struct Binding {
  std::string method = "mda";
  std::string dataset = "synthetic";
  std::string selection_view = "flip";
};

void add_experiment_options(CLI::App& app, ExperimentConfig& cfg, Binding& b) {
  app.add_option("--method", b.method, "baseline | coteaching | jocor | mda | coteaching_mda");
  app.add_option("--dataset", b.dataset, "synthetic | idx");
  app.add_option("--idx-images", cfg.idx_images, "IDX image file");
  app.add_option("--idx-labels", cfg.idx_labels, "IDX label file");
  app.add_option("--test-fraction", cfg.test_fraction, "Held-out fraction for idx data");
  app.add_option("--n-train", cfg.n_train, "Synthetic training samples");
  app.add_option("--n-test", cfg.n_test, "Synthetic test samples");
  app.add_option("--classes", cfg.classes, "Synthetic class count (2-6)");
  app.add_option("--side", cfg.side, "Synthetic image side");
  app.add_option("--noise-rate", cfg.noise_rate, "Symmetric label noise rate tau");
  app.add_option("--tk", cfg.tk, "Warm-up epochs of the keep-ratio schedule");
  app.add_option("--epochs", cfg.epochs, "Total epochs");
  app.add_option("--batch-size", cfg.batch_size, "Mini-batch size");
  app.add_option("--lr", cfg.lr, "Initial learning rate");
  app.add_option("--decay-start", cfg.decay_start, "Fraction of epochs before linear decay");
  app.add_option("--weight-decay", cfg.weight_decay, "Coupled L2 weight decay");
  app.add_option("--lambda", cfg.lambda, "Agreement weight in selection");
  app.add_option("--gamma", cfg.gamma, "Ensemble weight in training");
  app.add_option("--selection-view", b.selection_view, "flip | original");
  app.add_option("--hidden", cfg.hidden, "Hidden dense widths, comma separated");
  app.add_option("--conv", cfg.conv, "Conv layers KxKHxKW, comma separated");
  app.add_option("--seed", cfg.seed, "Base seed");
  app.add_option("--out", cfg.out, "Output directory")->envname("NOISYLAB_OUT");
  app.add_option("--checkpoint-every", cfg.checkpoint_every, "Write checkpoints every k epochs (0 = off)");
  app.add_flag("--dump-selection", cfg.dump_selection, "Write selected indexes per epoch");
  app.set_config("--config", "", "Flat key = value config file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  // List flags are single comma-joined values, not config arrays.
  auto format = std::make_shared<CLI::ConfigBase>();
  format->arrayDelimiter(';');
  app.config_formatter(format);
}

void resolve(ExperimentConfig& cfg, const Binding& b) {
  cfg.method = parse_method(b.method);
  if (b.dataset == "synthetic") {
    cfg.dataset = DatasetSource::synthetic;
  } else if (b.dataset == "idx") {
    cfg.dataset = DatasetSource::idx;
  } else {
    throw UsageError("dataset: expected synthetic or idx, got '" + b.dataset + "'");
  }
  if (b.selection_view == "flip") {
    cfg.selection_view = SelectionView::flip;
  } else if (b.selection_view == "original") {
    cfg.selection_view = SelectionView::original;
  } else {
    throw UsageError("selection-view: expected flip or original, got '" + b.selection_view + "'");
  }
}

void run_parser(CLI::App& app, const std::vector<std::string>& args,
                const std::optional<std::filesystem::path>& config_file) {
  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (config_file) {
    argv.push_back(config_file->string());
    argv.push_back("--config");
  }
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
}

bool valid_list(const std::string& text, char inner) {
  if (text.empty()) return true;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) return false;
    for (char c : item) {
      if (!(std::isdigit(static_cast<unsigned char>(c)) || c == inner)) return false;
    }
  }
  return text.back() != ',';
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [value, name] : kMethods) {
    if (value == m) return name;
  }
  return "unknown";
}

std::string_view to_string(DatasetSource d) { return d == DatasetSource::synthetic ? "synthetic" : "idx"; }
std::string_view to_string(SelectionView v) { return v == SelectionView::flip ? "flip" : "original"; }

Method parse_method(std::string_view text) {
  for (const auto& [value, name] : kMethods) {
    if (name == text) return value;
  }
  throw UsageError("method: unknown method '" + std::string(text) + "'");
}

std::uint64_t ExperimentConfig::data_seed() const { return derive_seed(seed, 10); }
std::uint64_t ExperimentConfig::noise_seed() const { return derive_seed(seed, 11); }
std::uint64_t ExperimentConfig::model_seed(int which) const {
  return derive_seed(seed, 20 + static_cast<std::uint64_t>(which));
}
std::uint64_t ExperimentConfig::shuffle_seed() const { return derive_seed(seed, 30); }

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw UsageError(key + ": " + why); };
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) fail("noise-rate", "must be in [0, 1), got " + exact(noise_rate));
  if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
  if (!(gamma >= 0.0)) fail("gamma", "must be >= 0");
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (tk < 1) fail("tk", "must be >= 1");
  if (epochs > 0 && tk > epochs) fail("tk", "must not exceed epochs (" + std::to_string(epochs) + ")");
  if (batch_size < 1) fail("batch-size", "must be >= 1");
  if (!(lr >= 0.0)) fail("lr", "must be >= 0");
  if (!(decay_start >= 0.0 && decay_start <= 1.0)) fail("decay-start", "must be in [0, 1]");
  if (!(weight_decay >= 0.0)) fail("weight-decay", "must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint-every", "must be >= 0");
  if (!valid_list(hidden, '\0')) fail("hidden", "expected comma-separated widths, got '" + hidden + "'");
  if (!valid_list(conv, 'x')) fail("conv", "expected KxKHxKW[,KxKHxKW...], got '" + conv + "'");
  if (dataset == DatasetSource::synthetic) {
    if (classes < 2 || classes > 6) fail("classes", "synthetic data supports 2 to 6 classes");
    if (side < 12) fail("side", "must be >= 12");
    if (n_train < 1) fail("n-train", "must be >= 1");
    if (n_test < 1) fail("n-test", "must be >= 1");
  } else {
    if (idx_images.empty()) fail("idx-images", "required when dataset = idx");
    if (idx_labels.empty()) fail("idx-labels", "required when dataset = idx");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test-fraction", "must be in (0, 1)");
  }
}

std::string canonical_text(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv{
      {"method", std::string(to_string(c.method))},
      {"dataset", std::string(to_string(c.dataset))},
      {"test-fraction", exact(c.test_fraction)},
      {"n-train", std::to_string(c.n_train)},
      {"n-test", std::to_string(c.n_test)},
      {"classes", std::to_string(c.classes)},
      {"side", std::to_string(c.side)},
      {"noise-rate", exact(c.noise_rate)},
      {"tk", std::to_string(c.tk)},
      {"epochs", std::to_string(c.epochs)},
      {"batch-size", std::to_string(c.batch_size)},
      {"lr", exact(c.lr)},
      {"decay-start", exact(c.decay_start)},
      {"weight-decay", exact(c.weight_decay)},
      {"lambda", exact(c.lambda)},
      {"gamma", exact(c.gamma)},
      {"selection-view", std::string(to_string(c.selection_view))},
      {"seed", std::to_string(c.seed)},
      {"out", c.out},
      {"checkpoint-every", std::to_string(c.checkpoint_every)},
      {"dump-selection", c.dump_selection ? "true" : "false"},
  };
  if (!c.hidden.empty()) kv["hidden"] = c.hidden;
  if (!c.conv.empty()) kv["conv"] = c.conv;
  if (!c.idx_images.empty()) kv["idx-images"] = c.idx_images;
  if (!c.idx_labels.empty()) kv["idx-labels"] = c.idx_labels;

  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  return text;
}

std::string fingerprint(const ExperimentConfig& config) {
  // Output-only settings do not change results.
  ExperimentConfig c = config;
  c.out.clear();
  c.checkpoint_every = 0;
  c.dump_selection = false;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::vector<std::string>& args,
                              const std::optional<std::filesystem::path>& config_file) {
  ExperimentConfig cfg;
  Binding binding;
  CLI::App app{"noisylab experiment"};
  add_experiment_options(app, cfg, binding);
  run_parser(app, args, config_file);
  resolve(cfg, binding);
  cfg.validate();
  return cfg;
}

SweepRequest parse_sweep(const std::vector<std::string>& args) {
  SweepRequest req;
  Binding binding;
  std::vector<std::string> methods{"baseline", "mda"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  CLI::App app{"noisylab sweep"};
  add_experiment_options(app, req.base, binding);
  app.add_option("--methods", methods, "Methods to run")->delimiter(',');
  app.add_option("--seeds", seeds, "Seeds to run")->delimiter(',');
  app.add_option("--jobs", req.jobs, "Concurrent runs");
  run_parser(app, args, std::nullopt);
  resolve(req.base, binding);
  req.base.validate();
  if (methods.empty()) throw UsageError("methods: at least one method required");
  if (seeds.empty()) throw UsageError("seeds: at least one seed required");
  if (req.jobs < 1) throw UsageError("jobs: must be >= 1");
  for (const auto& m : methods) req.methods.push_back(parse_method(m));
  req.seeds = std::move(seeds);
  return req;
}

}  // namespace noisylab
