#include "noisylab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "noisylab/losses.hpp"

namespace noisylab {

Scalar EpochRecord::column(std::string_view name) const {
  if (name == "epoch") return epoch;
  if (name == "keep_ratio") return keep_ratio;
  if (name == "lr") return lr;
  if (name == "loss_cls") return loss_cls;
  if (name == "loss_ag") return loss_ag;
  if (name == "loss_ens") return loss_ens;
  if (name == "acc_m1") return acc_m1;
  if (name == "acc_m2") return acc_m2;
  if (name == "acc_ens") return acc_ens;
  if (name == "clean_rate") return clean_rate;
  throw std::out_of_range("unknown history column '" + std::string(name) + "'");
}

RowMatrix predict_logits(const ModelParams& params, const LabeledImageSet& set, std::size_t chunk) {
  RowMatrix out(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(params.arch.classes()));
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    const std::size_t end = std::min(set.size(), start + chunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const Tensor logits = forward(params, set.batch(rows));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = logits.matrix();
  }
  return out;
}

std::size_t argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::size_t best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row[j] > row[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(j);
  }
  return best;
}

Scalar accuracy_from_logits(const RowMatrix& logits, std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<int>(argmax_row(logits.row(static_cast<Eigen::Index>(i)))) == labels[i]) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(labels.size());
}

Scalar accuracy(const ModelParams& params, const LabeledImageSet& set) {
  if (set.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  return accuracy_from_logits(predict_logits(params, set), set.labels);
}

Scalar ensemble_accuracy(const ModelParams& model1, const ModelParams& model2, const LabeledImageSet& set) {
  if (set.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const RowMatrix mean_prob =
      0.5 * (softmax_rows(predict_logits(model1, set)) + softmax_rows(predict_logits(model2, set)));
  return accuracy_from_logits(mean_prob, set.labels);
}

Scalar selected_clean_rate(std::span<const std::size_t> selected, const Mask& corrupted) {
  if (selected.empty()) throw std::invalid_argument("selected_clean_rate: empty selection");
  std::size_t clean = 0;
  for (auto i : selected) clean += corrupted.at(i) ? 0 : 1;
  return static_cast<Scalar>(clean) / static_cast<Scalar>(selected.size());
}

AccuracySummary summarize_column(const MetricsHistory& history, std::string_view column) {
  const auto& r = history.records;
  if (r.empty()) throw std::invalid_argument("summarize: empty history");
  AccuracySummary s;
  s.best = r.front().column(column);
  for (const auto& rec : r) s.best = std::max(s.best, rec.column(column));
  s.last = r.back().column(column);
  const std::size_t window = std::min<std::size_t>(10, r.size());
  Scalar total = 0.0;
  for (std::size_t i = r.size() - window; i < r.size(); ++i) total += r[i].column(column);
  s.last10_mean = total / static_cast<Scalar>(window);
  return s;
}

RunSummary summarize(const MetricsHistory& history) {
  RunSummary s;
  s.epochs = static_cast<int>(history.records.size());
  s.model1 = summarize_column(history, "acc_m1");
  s.model2 = summarize_column(history, "acc_m2");
  s.ensemble = summarize_column(history, "acc_ens");
  s.final_clean_rate = history.records.back().clean_rate;
  return s;
}

// -- Serialization -----------------------------------------------------------

namespace {

std::string format_real(Scalar v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string exact(Scalar v) { return format_real(v, "%.17g"); }

}  // namespace

std::string format_summary(const RunSummary& s, const std::string& fingerprint) {
  std::ostringstream os;
  os << "fingerprint = " << fingerprint << '\n';
  os << "epochs = " << s.epochs << '\n';
  const std::pair<const char*, const AccuracySummary*> columns[] = {
      {"acc_m1", &s.model1}, {"acc_m2", &s.model2}, {"acc_ens", &s.ensemble}};
  for (const auto& [name, acc] : columns) {
    os << name << ".best = " << exact(acc->best) << '\n';
    os << name << ".last = " << exact(acc->last) << '\n';
    os << name << ".last10_mean = " << exact(acc->last10_mean) << '\n';
  }
  os << "final_clean_rate = " << exact(s.final_clean_rate) << '\n';
  return os.str();
}

RunSummary parse_summary(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto real = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("summary: missing key '" + key + "'");
    return std::stod(it->second);
  };
  RunSummary s;
  s.epochs = static_cast<int>(real("epochs"));
  if (s.epochs == 0) return s;
  const std::pair<const char*, AccuracySummary*> columns[] = {
      {"acc_m1", &s.model1}, {"acc_m2", &s.model2}, {"acc_ens", &s.ensemble}};
  for (const auto& [name, acc] : columns) {
    acc->best = real(std::string(name) + ".best");
    acc->last = real(std::string(name) + ".last");
    acc->last10_mean = real(std::string(name) + ".last10_mean");
  }
  s.final_clean_rate = real("final_clean_rate");
  return s;
}

RunSummary read_summary(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path.string() + ": cannot open summary");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_summary(buf.str());
}

void write_history(const MetricsHistory& history, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  for (std::size_t i = 0; i < kHistoryColumns.size(); ++i) os << (i ? "," : "") << kHistoryColumns[i];
  os << '\n';
  for (const auto& r : history.records) {
    os << r.epoch;
    for (std::size_t i = 1; i < kHistoryColumns.size(); ++i) os << ',' << format_real(r.column(kHistoryColumns[i]), "%.6f");
    os << '\n';
  }
  if (!os) throw std::runtime_error(path.string() + ": write failed");

  const auto summary_path = path.parent_path() / "summary.txt";
  std::ofstream ss(summary_path, std::ios::binary);
  if (!ss) throw std::runtime_error(summary_path.string() + ": cannot open for writing");
  if (history.records.empty()) {
    ss << "fingerprint = " << history.fingerprint << "\nepochs = 0\n";
  } else {
    ss << format_summary(summarize(history), history.fingerprint);
  }
  if (!ss) throw std::runtime_error(summary_path.string() + ": write failed");
}

MetricsHistory read_history(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path.string() + ": cannot open history");
  std::string line;
  std::getline(is, line);
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  if (header.size() != kHistoryColumns.size() || !std::equal(header.begin(), header.end(), kHistoryColumns.begin())) {
    throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
  }

  MetricsHistory history;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<Scalar> v;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != kHistoryColumns.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(kHistoryColumns.size()) + " fields");
    }
    history.records.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
  }
  return history;
}

}  // namespace noisylab
