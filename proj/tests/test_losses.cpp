#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace noisylab;

namespace {

Tensor logits(std::initializer_list<double> v, std::size_t rows) { return tensor({rows, v.size() / rows}, v); }

// Plain two-pass softmax cross-entropy.
double ce_oracle(const std::vector<double>& z, int y) {
  double s = 0.0;
  for (double v : z) s += std::exp(v);
  return std::log(s) - z[static_cast<std::size_t>(y)];
}

double skl_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * std::log(p[j] / q[j]) + q[j] * std::log(q[j] / p[j]);
  return s;
}

std::vector<double> softmax_oracle(const std::vector<double>& z) {
  double s = 0.0;
  for (double v : z) s += std::exp(v);
  std::vector<double> p;
  for (double v : z) p.push_back(std::exp(v) / s);
  return p;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cross_entropy_per_sample") {
  for (int m : {2, 4, 10}) {
    const Tensor z = zeros({3, static_cast<std::size_t>(m)});
    const std::vector<int> y{0, m - 1, 1};
    const Vector ce = cross_entropy_per_sample(z, y);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(ce[i] - std::log(m)) <= 1e-12);
  }
  const std::vector<int> y0{0};
  CHECK(cross_entropy_per_sample(logits({100, 0}, 1), y0)[0] <= 1e-10);
  CHECK(cross_entropy_per_sample(logits({std::log(3.0), 0}, 1), y0)[0] ==
        doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-14));
  CHECK(cross_entropy_per_sample(logits({std::log(3.0), 0}, 1), y0)[0] == doctest::Approx(0.287682).epsilon(1e-6));
  const std::vector<int> bad{2};
  CHECK_THROWS_AS(cross_entropy_per_sample(logits({1, 0}, 1), bad), TensorError);
}

TEST_CASE("classification_loss") {
  const std::vector<int> y{0, 1};
  const Tensor u = zeros({2, 2});
  const auto c = classification_loss(u, u, y);
  CHECK(c.per_sample[0] == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
  CHECK(c.mean == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));

  const Tensor confident = logits({60, 0, 0, 60}, 2);
  CHECK(classification_loss(confident, confident, y).mean <= 1e-20);

  const Tensor a = logits({0.3, -1.2, 2.0, 0.1, 0.0, -0.4}, 2), b = logits({1.1, 0.2, -0.5, -2.0, 0.7, 0.9}, 2);
  const std::vector<int> y2{2, 1};
  const auto cl = classification_loss(a, b, y2);
  CHECK(cl.per_sample[0] == doctest::Approx(ce_oracle({0.3, -1.2, 2.0}, 2) + ce_oracle({1.1, 0.2, -0.5}, 2)));
  CHECK(cl.per_sample[1] == doctest::Approx(ce_oracle({0.1, 0.0, -0.4}, 1) + ce_oracle({-2.0, 0.7, 0.9}, 1)));
  CHECK(cl.mean == doctest::Approx((cl.per_sample[0] + cl.per_sample[1]) / 2));
}

TEST_CASE("symmetric_kl_per_sample") {
  RowMatrix p(1, 2), q(1, 2);
  p << 0.75, 0.25;
  q << 0.25, 0.75;
  CHECK(symmetric_kl_per_sample(p, q)[0] == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(symmetric_kl_per_sample(p, q)[0] == doctest::Approx(1.098612).epsilon(1e-6));
  CHECK(symmetric_kl_per_sample(q, p)[0] == symmetric_kl_per_sample(p, q)[0]);
  CHECK(symmetric_kl_per_sample(p, p)[0] == 0.0);

  std::mt19937_64 rng(7);
  const RowMatrix a = testsupport::random_probabilities(20, 5, rng), b = testsupport::random_probabilities(20, 5, rng);
  const Vector s = symmetric_kl_per_sample(a, b);
  CHECK(symmetric_kl_per_sample(a, a).isZero(0.0));
  for (Eigen::Index r = 0; r < 20; ++r) {
    std::vector<double> pr(a.row(r).data(), a.row(r).data() + 5), qr(b.row(r).data(), b.row(r).data() + 5);
    CHECK(s[r] == doctest::Approx(skl_oracle(pr, qr)).epsilon(1e-12));
    CHECK(s[r] >= 0.0);
  }

  RowMatrix unnorm(1, 2);
  unnorm << 0.5, 0.6;
  CHECK_THROWS_AS(symmetric_kl_per_sample(unnorm, p), TensorError);

  // Zero probabilities are floored inside the logarithm.
  RowMatrix hard(1, 2);
  hard << 1.0, 0.0;
  CHECK(std::isfinite(symmetric_kl_per_sample(hard, q)[0]));
}

TEST_CASE("symmetric_kl_rows agrees with the probability form") {
  std::mt19937_64 rng(8);
  const Tensor z1 = testsupport::random_tensor({6, 4}, rng), z2 = testsupport::random_tensor({6, 4}, rng);
  const Tensor t = symmetric_kl_rows(log_softmax(z1), log_softmax(z2));
  const Vector e = symmetric_kl_per_sample(softmax_rows(z1.matrix()), softmax_rows(z2.matrix()));
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(t[static_cast<std::size_t>(i)] == doctest::Approx(e[i]).epsilon(1e-12));
}

TEST_CASE("selection_loss") {
  const Tensor a = logits({0.3, -1.2, 2.0, 0.1, 0.0, -0.4}, 2), b = logits({1.1, 0.2, -0.5, -2.0, 0.7, 0.9}, 2);
  const std::vector<int> y{2, 1};
  const Vector cls = classification_loss(a, b, y).per_sample;
  CHECK(selection_loss(a, b, y, {0.0, 1.0}) == cls);

  const Vector s = selection_loss(a, b, y, {0.65, 1.0});
  const double oracle0 = ce_oracle({0.3, -1.2, 2.0}, 2) + ce_oracle({1.1, 0.2, -0.5}, 2) +
                         0.65 * skl_oracle(softmax_oracle({0.3, -1.2, 2.0}), softmax_oracle({1.1, 0.2, -0.5}));
  CHECK(s[0] == doctest::Approx(oracle0).epsilon(1e-12));

  const Tensor confident = logits({60, 0, 0, 60}, 2);
  const std::vector<int> yc{0, 1};
  CHECK(selection_loss(confident, confident, yc, {0.65, 1.0}).maxCoeff() <= 1e-20);

  // Affine in lambda.
  const Vector s0 = selection_loss(a, b, y, {0.0, 1.0}), s1 = selection_loss(a, b, y, {1.0, 1.0}),
               s2 = selection_loss(a, b, y, {2.0, 1.0});
  CHECK((s2 - 2 * s1 + s0).cwiseAbs().maxCoeff() <= 1e-12);

  // Permutation equivariance.
  const Tensor ap = logits({0.1, 0.0, -0.4, 0.3, -1.2, 2.0}, 2), bp = logits({-2.0, 0.7, 0.9, 1.1, 0.2, -0.5}, 2);
  const std::vector<int> yp{1, 2};
  const Vector sp = selection_loss(ap, bp, yp, {0.65, 1.0});
  CHECK(sp[0] == s[1]);
  CHECK(sp[1] == s[0]);
}

TEST_CASE("mean_point_ensemble") {
  const Tensor p = tensor({1, 2}, {1, 0}), q = tensor({1, 2}, {0, 1});
  CHECK(mean_point_ensemble(p, q).item() == 1.0);
  CHECK(mean_point_ensemble(p, p).item() == 0.0);

  std::mt19937_64 rng(12);
  const RowMatrix a = testsupport::random_probabilities(50, 4, rng), b = testsupport::random_probabilities(50, 4, rng);
  const auto ta = Tensor({50, 4}, Eigen::Map<const Vector>(a.data(), a.size()));
  const auto tb = Tensor({50, 4}, Eigen::Map<const Vector>(b.data(), b.size()));
  const double half_mean_sq = 0.5 * (a - b).rowwise().squaredNorm().mean();
  CHECK(std::abs(mean_point_ensemble(ta, tb).item() - half_mean_sq) <= 1e-12);
  CHECK(mean_point_ensemble(ta, tb).item() >= 0.0);
  CHECK_THROWS_AS(mean_point_ensemble(ta, tensor({1, 4}, {0.25, 0.25, 0.25, 0.25})), TensorError);
}

TEST_CASE("masked_mean") {
  const Tensor rows = tensor({4}, {1, 2, 3, 10});
  const Mask m{1, 0, 1, 0};
  CHECK(masked_mean(rows, m).item() == 2.0);
  const Mask none(4, 0);
  CHECK(masked_mean(rows, none).item() == 0.0);
  CHECK_FALSE(masked_mean(rows, none).taped());

  Tape tape;
  const Tensor x = tape.leaf(rows);
  const Gradients g = tape.backward(masked_mean(x, m));
  CHECK(g.of(x).values() == (Vector(4) << 0.5, 0, 0.5, 0).finished());
}

TEST_CASE("training_loss") {
  const Tensor cls = tensor({}, {0.5}), ens = tensor({}, {0.25});
  CHECK(training_loss(cls, ens, {0.65, 1.0}).item() == 0.75);
  CHECK(training_loss(cls, ens, {0.65, 0.0}).item() == 0.5);
  const double t0 = training_loss(cls, ens, {0.65, 0.0}).item(), t1 = training_loss(cls, ens, {0.65, 1.0}).item(),
               t2 = training_loss(cls, ens, {0.65, 2.0}).item();
  CHECK(t2 - 2 * t1 + t0 == doctest::Approx(0.0));

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = testsupport::training_loss_composition(seed);
    CHECK(grad_check(c.f, c.point, 1e-5) <= 1e-4);
  }
}

TEST_CASE("zero-agreement identity on identical logits") {
  std::mt19937_64 rng(21);
  const Tensor z = testsupport::random_tensor({8, 3}, rng);
  const std::vector<int> y = testsupport::random_labels(8, 3, rng);
  CHECK(symmetric_kl_rows(log_softmax(z), log_softmax(z)).values().isZero(0.0));
  CHECK(mean_point_ensemble(softmax(z), softmax(z)).item() == 0.0);
  CHECK(selection_loss(z, z, y, {0.65, 1.0}) == classification_loss(z, z, y).per_sample);
}

}  // TEST_SUITE
