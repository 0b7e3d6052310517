#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "noisylab/data.hpp"
#include "noisylab/metrics.hpp"
#include "support.hpp"

using namespace noisylab;
using testsupport::TempDir;

namespace {

MetricsHistory history_of(const std::vector<double>& acc) {
  MetricsHistory h;
  h.fingerprint = "abc";
  for (std::size_t i = 0; i < acc.size(); ++i) {
    EpochRecord r;
    r.epoch = static_cast<int>(i + 1);
    r.acc_m1 = acc[i];
    r.acc_m2 = acc[i] / 2;
    r.acc_ens = acc[i];
    r.clean_rate = 0.5;
    r.keep_ratio = 1.0 - 0.01 * static_cast<double>(i);
    r.lr = 0.001;
    r.loss_cls = 1.0 / static_cast<double>(i + 1);
    h.records.push_back(r);
  }
  return h;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("accuracy") {
  const LabeledImageSet s = gen_symmetric_shapes(100, 4, 12, 1);
  // Constant logits: ties go to class 0, a quarter of a balanced set.
  ModelParams constant = init_model(mlp({144, 4}), 1);
  for (auto& t : constant.tensors) t.values().setZero();
  CHECK(accuracy(constant, s) == 0.25);

  // A "model" that copies a one-hot label channel is always right.
  LabeledImageSet onehot;
  onehot.channels = 1;
  onehot.height = 1;
  onehot.width = 4;
  onehot.classes = 4;
  onehot.labels = s.labels;
  onehot.images = RowMatrix::Zero(100, 4);
  for (std::size_t i = 0; i < 100; ++i) onehot.images(static_cast<Eigen::Index>(i), s.labels[i]) = 1.0;
  const ModelParams id{mlp({4, 4}), {tensor({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}), zeros({4})}, 0};
  CHECK(accuracy(id, onehot) == 1.0);

  LabeledImageSet empty = s;
  empty.labels.clear();
  empty.images.resize(0, 144);
  CHECK_THROWS(accuracy(constant, empty));
}

TEST_CASE("random-init accuracy is near chance") {
  const LabeledImageSet s = gen_symmetric_shapes(400, 4, 12, 2);
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) total += accuracy(init_model(mlp({144, 32, 4}), seed), s);
  CHECK(total / 10 == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("argmax tie-break") {
  Eigen::RowVectorXd r(4);
  r << 1, 3, 3, 0;
  CHECK(argmax_row(r) == 1);
  r << 2, 2, 2, 2;
  CHECK(argmax_row(r) == 0);
}

TEST_CASE("selected_clean_rate") {
  const Mask corrupted{0, 0, 1, 0};
  const std::vector<std::size_t> sel{0, 1, 2};
  CHECK(selected_clean_rate(sel, corrupted) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(selected_clean_rate(sel, Mask(4, 0)) == 1.0);
  CHECK_THROWS(selected_clean_rate(std::vector<std::size_t>{}, corrupted));

  // Uniformly random selections at noise tau average 1 - tau.
  const std::size_t n = 1000, k = 200;
  const double tau = 0.4;
  Mask mask(n, 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(tau * n); ++i) mask[i] = 1;
  std::mt19937_64 rng(5);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double total = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    total += selected_clean_rate(std::span<const std::size_t>(perm.data(), k), mask);
  }
  // Hypergeometric standard error of the mean over all trials.
  const double var = tau * (1 - tau) / k * (n - k) / (n - 1.0);
  CHECK(std::abs(total / trials - (1 - tau)) <= 3 * std::sqrt(var / trials));
}

TEST_CASE("summarize") {
  const RunSummary one = summarize(history_of({0.7}));
  CHECK(one.model1.best == 0.7);
  CHECK(one.model1.last == 0.7);
  CHECK(one.model1.last10_mean == 0.7);

  const RunSummary three = summarize(history_of({0.1, 0.9, 0.5}));
  CHECK(three.model1.best == 0.9);
  CHECK(three.model1.last == 0.5);
  CHECK(three.model1.last10_mean == doctest::Approx(0.5));
  CHECK(three.headline() == three.model1.last10_mean);

  const RunSummary up = summarize(history_of({0.1, 0.2, 0.3, 0.4}));
  CHECK(up.model1.best == up.model1.last);

  std::vector<double> acc(15);
  for (int i = 0; i < 15; ++i) acc[static_cast<std::size_t>(i)] = i / 20.0;
  const RunSummary many = summarize(history_of(acc));
  CHECK(many.model1.last10_mean == doctest::Approx((5 + 14) / 2.0 / 20.0));
  CHECK(many.model2.best == doctest::Approx(14 / 40.0));
  CHECK(many.final_clean_rate == 0.5);

  CHECK_THROWS(summarize(MetricsHistory{}));
}

TEST_CASE("summarize invariants on random histories") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> acc(static_cast<std::size_t>(len(rng)));
    for (auto& a : acc) a = u(rng);
    const auto s = summarize_column(history_of(acc), "acc_m1");
    CHECK(s.best == *std::max_element(acc.begin(), acc.end()));
    CHECK(s.best >= s.last);
    CHECK(s.best >= s.last10_mean);
  }
}

TEST_CASE("history CSV and summary") {
  TempDir dir;
  const MetricsHistory h = history_of({0.123456789, 0.5, 0.25});
  write_history(h, dir / "history.csv");
  const std::string text = testsupport::slurp(dir / "history.csv");
  CHECK(text.substr(0, text.find('\n')) ==
        "epoch,keep_ratio,lr,loss_cls,loss_ag,loss_ens,acc_m1,acc_m2,acc_ens,clean_rate");
  CHECK(text.find("\n1,1.000000,0.001000,1.000000,0.000000,0.000000,0.123457,0.061728,0.123457,0.500000\n") !=
        std::string::npos);

  const MetricsHistory back = read_history(dir / "history.csv");
  REQUIRE(back.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (auto c : kHistoryColumns) CHECK(back.records[i].column(c) == doctest::Approx(h.records[i].column(c)).epsilon(1e-6));
  }

  write_history(h, dir / "again.csv");
  CHECK(testsupport::slurp(dir / "again.csv") == text);

  const RunSummary s = read_summary(dir / "summary.txt");
  const RunSummary expect = summarize(h);
  CHECK(s.model1.last10_mean == expect.model1.last10_mean);
  CHECK(s.model2.best == expect.model2.best);
  CHECK(s.ensemble.last == expect.ensemble.last);
  CHECK(testsupport::slurp(dir / "summary.txt").find("fingerprint = abc") != std::string::npos);

  write_history(MetricsHistory{}, dir / "empty.csv");
  CHECK(read_history(dir / "empty.csv").records.empty());
  CHECK(read_summary(dir / "summary.txt").epochs == 0);

  CHECK_THROWS(write_history(h, dir / "no-such-dir" / "h.csv"));
  std::ofstream(dir / "bad.csv") << "epoch,acc\n1,2\n";
  CHECK_THROWS(read_history(dir / "bad.csv"));
  CHECK_THROWS_AS(h.records[0].column("nope"), std::out_of_range);
}

}  // TEST_SUITE
