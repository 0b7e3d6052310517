#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "noisylab/metrics.hpp"
#include "noisylab/selection.hpp"

using namespace noisylab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("keep_ratio examples") {
  const SelectionSchedule s{0.5, 10, 20};
  CHECK(keep_ratio(s, 0) == 1.0);
  CHECK(keep_ratio(s, 10) == 0.5);
  CHECK(keep_ratio(s, 5) == 0.75);
  CHECK(keep_ratio(s, 20) == 0.5);
  CHECK_THROWS_AS(keep_ratio(s, 21), std::out_of_range);
  CHECK_THROWS_AS(keep_ratio(s, -1), std::out_of_range);
}

TEST_CASE("keep_ratio against direct evaluation") {
  for (double tau : {0.2, 0.5, 0.8}) {
    const SelectionSchedule s{tau, 10, 20};
    double prev = 1.0;
    for (int t = 0; t <= 20; ++t) {
      const double direct = 1.0 - std::min(static_cast<double>(t) / 10.0 * tau, tau);
      CHECK(keep_ratio(s, t) == direct);
      const double rational = t >= 10 ? 1.0 - tau : 1.0 - tau * t / 10.0;
      CHECK(std::abs(keep_ratio(s, t) - rational) <= 2e-16);
      CHECK(keep_ratio(s, t) <= prev);
      CHECK(keep_ratio(s, t) >= 1.0 - tau);
      if (t >= 10) CHECK(keep_ratio(s, t) == 1.0 - tau);
      prev = keep_ratio(s, t);
    }
  }
}

TEST_CASE("schedule validation") {
  CHECK_NOTHROW(SelectionSchedule{0.5, 10, 10}.validate());
  CHECK_THROWS(SelectionSchedule{1.0, 10, 20}.validate());
  CHECK_THROWS(SelectionSchedule{0.5, 0, 20}.validate());
  CHECK_THROWS(SelectionSchedule{0.5, 30, 20}.validate());
}

TEST_CASE("select_small_loss examples") {
  CHECK(select_small_loss(vec({0.9, 0.1, 0.5, 0.3}), 0.5).indexes == std::vector<std::size_t>{1, 3});
  CHECK(select_small_loss(vec({0.9, 0.1, 0.5, 0.3}), 1.0).indexes == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(select_small_loss(vec({1, 1, 1, 1}), 0.5).indexes == std::vector<std::size_t>{0, 1});
  CHECK(select_small_loss(vec({2, 1, 1, 0}), 0.5).indexes == std::vector<std::size_t>{1, 3});
  const auto s = select_small_loss(vec({0.9, 0.1, 0.5, 0.3}), 0.5, 7);
  CHECK(s.epoch == 7);
  CHECK(s.keep_ratio == 0.5);

  CHECK_THROWS(select_small_loss(Vector(), 0.5));
  CHECK_THROWS(select_small_loss(vec({1, 2}), 0.0));
  CHECK_THROWS(select_small_loss(vec({1, 2}), 1.5));
  CHECK_THROWS(select_small_loss(vec({1, std::nan("")}), 0.5));
}

TEST_CASE("selection size and ordering properties") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t n : {1u, 7u, 100u, 1001u}) {
    for (int trial = 0; trial < 20; ++trial) {
      Vector losses(static_cast<Eigen::Index>(n));
      for (auto& v : losses) v = u(rng);
      const double r = std::max(0.05, u(rng));
      const SelectedSet s = select_small_loss(losses, r);
      CHECK(s.indexes.size() == static_cast<std::size_t>(std::floor(r * static_cast<double>(n))));
      CHECK(std::is_sorted(s.indexes.begin(), s.indexes.end()));
      CHECK(std::adjacent_find(s.indexes.begin(), s.indexes.end()) == s.indexes.end());
      std::vector<std::uint8_t> in(n, 0);
      for (auto i : s.indexes) {
        REQUIRE(i < n);
        in[i] = 1;
      }
      double max_in = -1, min_out = 2;
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i]) max_in = std::max(max_in, losses[static_cast<Eigen::Index>(i)]);
        else min_out = std::min(min_out, losses[static_cast<Eigen::Index>(i)]);
      }
      CHECK(max_in <= min_out);
    }
  }
}

TEST_CASE("batch_selected") {
  const SelectedSet s{1, 0.5, {1, 3}};
  const std::vector<std::size_t> b{0, 1, 2, 3};
  CHECK(batch_selected(s, b) == Mask{0, 1, 0, 1});
  const SelectedSet all{1, 1.0, {0, 1, 2, 3}};
  CHECK(batch_selected(all, b) == Mask{1, 1, 1, 1});
  const std::vector<std::size_t> other{5, 6};
  CHECK(batch_selected(s, other) == Mask{0, 0});

  // Union over a partition into batches recovers the selected set.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  Vector losses(50);
  for (auto& v : losses) v = u(rng);
  const SelectedSet sel = select_small_loss(losses, 0.6);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> recovered;
  for (std::size_t start = 0; start < 50; start += 8) {
    const std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                         perm.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(50, start + 8)));
    const Mask m = batch_selected(sel, batch);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (m[j]) recovered.push_back(batch[j]);
    }
  }
  std::sort(recovered.begin(), recovered.end());
  CHECK(recovered == sel.indexes);
}

TEST_CASE("planted losses give exact clean rate") {
  for (double tau : {0.2, 0.5, 0.8}) {
    const std::size_t n = 1000;
    Mask corrupted(n, 0);
    std::mt19937_64 rng(4);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto bad = static_cast<std::size_t>(std::floor(tau * n));
    for (std::size_t k = 0; k < bad; ++k) corrupted[order[k]] = 1;
    Vector losses(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) losses[static_cast<Eigen::Index>(i)] = corrupted[i] ? 1.0 : 0.0;

    const SelectionSchedule sched{tau, 10, 20};
    for (int t = 0; t <= 20; ++t) {
      const double r = keep_ratio(sched, t);
      const double rate = selected_clean_rate(select_small_loss(losses, r), corrupted);
      const double kept = std::floor(r * n);
      CHECK(rate == doctest::Approx(std::min(1.0, static_cast<double>(n - bad) / kept)).epsilon(1e-15));
      if (t >= 10) CHECK(rate == 1.0);
    }
  }
}

}  // TEST_SUITE
