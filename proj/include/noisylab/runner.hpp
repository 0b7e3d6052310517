#ifndef NOISYLAB_RUNNER_HPP
#define NOISYLAB_RUNNER_HPP

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "noisylab/config.hpp"
#include "noisylab/metrics.hpp"

namespace noisylab {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Trains one configuration and writes history.csv, summary.txt, timing.csv,
/// config.txt and, if requested, checkpoints and selection dumps under
/// `config.out`. Throws on failure.
MetricsHistory run_experiment(const ExperimentConfig& config);

/// run_experiment with errors reported on `err` and mapped to an exit code.
int run(const ExperimentConfig& config, std::ostream& err);

std::filesystem::path run_directory(const std::filesystem::path& root, Method method, std::uint64_t seed);

struct AggregateRow {
  Method method = Method::mda;
  std::size_t runs = 0;
  double acc_m1_mean = 0.0, acc_m1_std = 0.0;
  double acc_m2_mean = 0.0, acc_m2_std = 0.0;
  double acc_ens_mean = 0.0, acc_ens_std = 0.0;
  double clean_rate_mean = 0.0, clean_rate_std = 0.0;
};

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);

/// Per-method mean +/- std of last-10 accuracies and final clean rate.
AggregateRow aggregate(Method method, const std::vector<RunSummary>& runs);

void write_aggregate(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
std::vector<AggregateRow> read_aggregate(const std::filesystem::path& path);

/// Runs methods x seeds into `<out>/<method>/seed<k>/` with up to `jobs`
/// concurrent runs, then writes `<out>/aggregate.csv` from completed runs.
/// Returns kExitRuntime if any run failed.
int sweep(const SweepRequest& request, std::ostream& err);

}  // namespace noisylab

#endif  // NOISYLAB_RUNNER_HPP
