#ifndef NOISYLAB_TESTS_SUPPORT_HPP
#define NOISYLAB_TESTS_SUPPORT_HPP

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "noisylab/autodiff.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/nn.hpp"

namespace testsupport {

using namespace noisylab;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("noisylab-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = n(rng);
  return tensor(std::move(shape), v);
}

inline RowMatrix random_probabilities(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  RowMatrix z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);
  return softmax_rows(z);
}

// Flat parameter vector carved into named tensors; the same layout is sliced
// back out of the grad_check point inside the function under test.
class Packing {
 public:
  std::size_t add(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    const std::size_t offset = values_.size();
    for (std::size_t i = 0; i < element_count(shape); ++i) values_.push_back(n(rng));
    parts_.push_back({offset, std::move(shape)});
    return parts_.size() - 1;
  }
  Tensor part(const Tensor& flat, std::size_t id) const { return slice(flat, parts_[id].first, parts_[id].second); }
  Tensor point() const { return tensor({values_.size()}, values_); }

 private:
  std::vector<double> values_;
  std::vector<std::pair<std::size_t, Shape>> parts_;
};

struct Composition {
  std::string name;
  std::function<Tensor(const Tensor&)> f;
  Tensor point;
};

inline std::vector<int> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> out(n);
  for (auto& y : out) y = d(rng);
  return out;
}

// Random scalar-valued composition of affine, relu, conv2d, log_softmax,
// elementwise and reductions. Every input and parameter is a slice of the
// single point so grad_check covers all of them.
inline Composition random_composition(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pack = std::make_shared<Packing>();
  std::uniform_int_distribution<int> pick_kind(0, 3);
  std::uniform_int_distribution<std::size_t> small(2, 4);
  const int kind = pick_kind(rng);
  const std::size_t b = small(rng), i = small(rng), h = small(rng), m = small(rng);

  if (kind == 0) {
    const auto x = pack->add({b, i}, rng);
    const auto w1 = pack->add({i, h}, rng, 0.7);
    const auto b1 = pack->add({h}, rng, 0.3);
    const auto w2 = pack->add({h, m}, rng, 0.7);
    const auto b2 = pack->add({m}, rng, 0.3);
    auto labels = random_labels(b, static_cast<int>(m), rng);
    return {"mlp-ce", [=](const Tensor& p) {
              const Tensor z = affine(relu(affine(pack->part(p, x), pack->part(p, w1), pack->part(p, b1))),
                                      pack->part(p, w2), pack->part(p, b2));
              return mean(neg(pick(log_softmax(z), labels)));
            },
            pack->point()};
  }
  if (kind == 1) {
    const std::size_t c = small(rng) - 1, k = small(rng) - 1, side = small(rng) + 2;
    const auto x = pack->add({b, c, side, side}, rng);
    const auto kern = pack->add({k, c, 2, 2}, rng, 0.7);
    const auto kb = pack->add({k}, rng, 0.3);
    const std::size_t feat = k * (side - 1) * (side - 1);
    const auto w = pack->add({feat, m}, rng, 0.5);
    const auto wb = pack->add({m}, rng, 0.3);
    return {"conv-logsoftmax", [=](const Tensor& p) {
              const Tensor a = relu(conv2d(pack->part(p, x), pack->part(p, kern), pack->part(p, kb)));
              const Tensor z = affine(reshape(a, {b, feat}), pack->part(p, w), pack->part(p, wb));
              return sum(mean(log_softmax(z), 0));
            },
            pack->point()};
  }
  if (kind == 2) {
    const auto a = pack->add({b, m}, rng);
    const auto c = pack->add({b, m}, rng);
    return {"elementwise", [=](const Tensor& p) {
              const Tensor u = pack->part(p, a), v = pack->part(p, c);
              const Tensor t = add(mul(u, v), sub(square(u), scale(v, 0.5)));
              return mean(add_scalar(sum(add(t, exp(scale(v, 0.3))), 1), 1.0));
            },
            pack->point()};
  }
  const auto x = pack->add({b, i}, rng);
  const auto w = pack->add({i, m}, rng, 0.8);
  const auto bias = pack->add({m}, rng, 0.3);
  std::vector<std::size_t> rows;
  std::uniform_int_distribution<std::size_t> r(0, b - 1);
  for (std::size_t k = 0; k < b + 1; ++k) rows.push_back(r(rng));
  return {"gather-softmax", [=](const Tensor& p) {
            const Tensor z = affine(pack->part(p, x), pack->part(p, w), pack->part(p, bias));
            const Tensor s = softmax(gather_rows(z, rows));
            return sum(square(sub(s, scale(s, 0.25))));
          },
          pack->point()};
}

// Smallest |pre-activation| over the hidden layers of a dense model.
inline double relu_margin(const ModelParams& params, const Tensor& images) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l < params.arch.dense.size(); ++l) {
    ModelParams prefix{params.arch, {params.tensors.begin(), params.tensors.begin() + static_cast<std::ptrdiff_t>(2 * l)},
                       params.seed};
    prefix.arch.dense.resize(l);
    margin = std::min(margin, forward(prefix, images).values().cwiseAbs().minCoeff());
  }
  return margin;
}

// True when every central difference of f at point is either exactly zero or
// large enough to sit well above floating-point roundoff.
inline bool resolvable(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double eps,
                       double floor) {
  Tensor probe = point.detached();
  for (std::size_t k = 0; k < point.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double saved = probe.values()[i];
    probe.values()[i] = saved + eps;
    const double up = f(probe).item();
    probe.values()[i] = saved - eps;
    const double down = f(probe).item();
    probe.values()[i] = saved;
    const double d = std::abs(up - down) / (2 * eps);
    if (d != 0.0 && d < floor) return false;
  }
  return true;
}

// Full selected-CE plus gamma * mean-point-ensemble training loss through two
// small three-layer networks; gradients cover both models' parameters. Points
// with a hidden unit near the relu kink, or with partial derivatives too small
// for central differences to resolve, are redrawn.
inline Composition training_loss_composition(std::uint64_t seed, double gamma = 1.0) {
  std::mt19937_64 rng(seed);
  const std::size_t b = 6, in = 5, h1 = 4, h2 = 4, m = 3;
  const Architecture arch = mlp({in, h1, h2, m});
  const LossWeights weights{0.65, gamma};
  auto unpack = [arch](const Packing& pk, const std::vector<std::size_t>& ix, const Tensor& p, std::size_t which) {
    ModelParams out{arch, {}, which + 1};
    const std::size_t per = ix.size() / 2;
    for (std::size_t k = 0; k < per; ++k) out.tensors.push_back(pk.part(p, ix[which * per + k]));
    return out;
  };
  for (;;) {
    auto pack = std::make_shared<Packing>();
    std::vector<std::size_t> ids;
    for (int model = 0; model < 2; ++model) {
      for (std::size_t l = 0; l < arch.dense.size(); ++l) {
        const std::size_t fan_in = l == 0 ? in : arch.dense[l - 1];
        ids.push_back(pack->add({fan_in, arch.dense[l]}, rng, 0.8));
        ids.push_back(pack->add({arch.dense[l]}, rng, 0.3));
      }
    }
    const Tensor images = random_tensor({b, in}, rng);
    const auto labels = random_labels(b, static_cast<int>(m), rng);
    Mask mask(b, 0);
    std::bernoulli_distribution keep(0.6);
    for (auto& v : mask) v = keep(rng) ? 1 : 0;
    mask[0] = 1;
    Composition c{"training-loss", [=](const Tensor& p) {
                    const ModelParams m1 = unpack(*pack, ids, p, 0), m2 = unpack(*pack, ids, p, 1);
                    const Tensor z1 = forward(m1, images), z2 = forward(m2, images);
                    const Tensor cls =
                        masked_mean(add(cross_entropy_rows(z1, labels), cross_entropy_rows(z2, labels)), mask);
                    return training_loss(cls, mean_point_ensemble(softmax(z1), softmax(z2)), weights);
                  },
                  pack->point()};
    const double margin = std::min(relu_margin(unpack(*pack, ids, c.point, 0), images),
                                   relu_margin(unpack(*pack, ids, c.point, 1), images));
    if (margin >= 1e-3 && resolvable(c.f, c.point, 1e-5, 1e-6)) return c;
  }
}

}  // namespace testsupport

#endif  // NOISYLAB_TESTS_SUPPORT_HPP
