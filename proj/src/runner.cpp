#include "noisylab/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "noisylab/nn.hpp"
#include "noisylab/trainer.hpp"

namespace noisylab {

namespace fs = std::filesystem;

namespace {

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os << text;
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

fs::path run_directory(const fs::path& root, Method method, std::uint64_t seed) {
  return root / std::string(to_string(method)) / ("seed" + std::to_string(seed));
}

MetricsHistory run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path out = config.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error(out.string() + ": cannot create output directory: " + ec.message());
  write_text(out / "config.txt", canonical_text(config));

  TrainHooks hooks;
  if (config.checkpoint_every > 0) {
    hooks.on_epoch_end = [&](int epoch, const DualModelState& state) {
      if (epoch % config.checkpoint_every != 0) return;
      write_checkpoint(out / "model1.nlab", state.model1);
      if (config.method != Method::baseline) write_checkpoint(out / "model2.nlab", state.model2);
    };
  }
  if (config.dump_selection) {
    fs::create_directories(out / "selection");
    hooks.on_selection = [&](const SelectedSet& s) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch%03d.txt", s.epoch);
      std::ostringstream os;
      for (auto i : s.indexes) os << i << '\n';
      write_text(out / "selection" / name, os.str());
    };
  }

  MetricsHistory history = train(config, hooks);
  write_history(history, out / "history.csv");

  std::ostringstream timing;
  timing << "epoch,seconds\n";
  for (std::size_t i = 0; i < history.epoch_seconds.size(); ++i) {
    timing << (i + 1) << ',' << exact(history.epoch_seconds[i]) << '\n';
  }
  write_text(out / "timing.csv", timing.str());
  return history;
}

int run(const ExperimentConfig& config, std::ostream& err) {
  try {
    run_experiment(config);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "noisylab: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "noisylab: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

AggregateRow aggregate(Method method, const std::vector<RunSummary>& runs) {
  AggregateRow row;
  row.method = method;
  row.runs = runs.size();
  if (runs.empty()) return row;
  std::vector<double> m1, m2, ens, clean;
  for (const auto& r : runs) {
    m1.push_back(r.model1.last10_mean);
    m2.push_back(r.model2.last10_mean);
    ens.push_back(r.ensemble.last10_mean);
    clean.push_back(r.final_clean_rate);
  }
  std::tie(row.acc_m1_mean, row.acc_m1_std) = mean_std(m1);
  std::tie(row.acc_m2_mean, row.acc_m2_std) = mean_std(m2);
  std::tie(row.acc_ens_mean, row.acc_ens_std) = mean_std(ens);
  std::tie(row.clean_rate_mean, row.clean_rate_std) = mean_std(clean);
  return row;
}

constexpr const char* kAggregateHeader =
    "method,runs,acc_m1_mean,acc_m1_std,acc_m2_mean,acc_m2_std,acc_ens_mean,acc_ens_std,clean_rate_mean,"
    "clean_rate_std";

void write_aggregate(const std::vector<AggregateRow>& rows, const fs::path& path) {
  std::ostringstream os;
  os << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << r.runs;
    for (double v : {r.acc_m1_mean, r.acc_m1_std, r.acc_m2_mean, r.acc_m2_std, r.acc_ens_mean, r.acc_ens_std,
                     r.clean_rate_mean, r.clean_rate_std}) {
      os << ',' << exact(v);
    }
    os << '\n';
  }
  write_text(path, os.str());
}

std::vector<AggregateRow> read_aggregate(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path.string() + ": cannot open aggregate");
  std::string line;
  std::getline(is, line);
  if (line != kAggregateHeader) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<AggregateRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw std::runtime_error(path.string() + ": expected 10 fields");
    AggregateRow r;
    r.method = parse_method(cells[0]);
    r.runs = std::stoul(cells[1]);
    double* fields[] = {&r.acc_m1_mean, &r.acc_m1_std,   &r.acc_m2_mean,     &r.acc_m2_std,
                        &r.acc_ens_mean, &r.acc_ens_std, &r.clean_rate_mean, &r.clean_rate_std};
    for (std::size_t i = 0; i < 8; ++i) *fields[i] = std::stod(cells[i + 2]);
    rows.push_back(r);
  }
  return rows;
}

int sweep(const SweepRequest& request, std::ostream& err) {
  if (request.methods.empty() || request.seeds.empty()) {
    err << "noisylab: sweep needs at least one method and one seed\n";
    return kExitUsage;
  }
  struct Job {
    ExperimentConfig config;
    std::string error;
  };
  std::vector<Job> jobs;
  for (Method m : request.methods) {
    for (std::uint64_t s : request.seeds) {
      Job job{request.base, {}};
      job.config.method = m;
      job.config.seed = s;
      job.config.out = run_directory(request.base.out, m, s).string();
      jobs.push_back(std::move(job));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        run_experiment(jobs[i].config);
      } catch (const std::exception& e) {
        jobs[i].error = e.what();
        if (jobs[i].error.empty()) jobs[i].error = "unknown error";
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, request.jobs)), jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  bool failed = false;
  std::vector<AggregateRow> rows;
  std::size_t k = 0;
  for (Method m : request.methods) {
    std::vector<RunSummary> summaries;
    for (std::size_t s = 0; s < request.seeds.size(); ++s, ++k) {
      const Job& job = jobs[k];
      if (!job.error.empty()) {
        failed = true;
        err << "noisylab: run " << to_string(m) << " seed " << job.config.seed << " failed: " << job.error << '\n';
        continue;
      }
      try {
        const RunSummary summary = read_summary(fs::path(job.config.out) / "summary.txt");
        if (summary.epochs > 0) summaries.push_back(summary);
      } catch (const std::exception& e) {
        failed = true;
        err << "noisylab: " << e.what() << '\n';
      }
    }
    rows.push_back(aggregate(m, summaries));
  }
  try {
    fs::create_directories(request.base.out);
    write_aggregate(rows, fs::path(request.base.out) / "aggregate.csv");
  } catch (const std::exception& e) {
    err << "noisylab: " << e.what() << '\n';
    return kExitRuntime;
  }
  return failed ? kExitRuntime : kExitOk;
}

}  // namespace noisylab
