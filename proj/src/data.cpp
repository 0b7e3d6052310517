#include "noisylab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "noisylab/seed.hpp"

namespace noisylab {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

}  // namespace

Tensor LabeledImageSet::batch(std::span<const std::size_t> rows) const {
  Vector values(idx(rows.size() * pixels()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    values.segment(idx(r * pixels()), idx(pixels())) = images.row(idx(rows[r])).transpose();
  }
  return Tensor({rows.size(), pixels()}, std::move(values));
}

Tensor LabeledImageSet::all() const {
  return Tensor({size(), pixels()}, Eigen::Map<const Vector>(images.data(), images.size()));
}

std::size_t NoisyDataset::corrupted_count() const {
  return static_cast<std::size_t>(std::count(corrupted.begin(), corrupted.end(), std::uint8_t{1}));
}

const LabeledImageSet& FlipView::images() const {
  std::call_once(once_, [this] { flipped_ = hflip(base_->data); });
  return flipped_;
}

// -- Flip --------------------------------------------------------------------

std::vector<Scalar> hflip(std::span<const Scalar> image, std::size_t channels, std::size_t height,
                          std::size_t width) {
  if (image.size() != channels * height * width) throw std::invalid_argument("hflip: image size mismatch");
  std::vector<Scalar> out(image.size());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t row = (c * height + y) * width;
      for (std::size_t x = 0; x < width; ++x) out[row + x] = image[row + width - 1 - x];
    }
  return out;
}

LabeledImageSet hflip(const LabeledImageSet& set) {
  LabeledImageSet out = set;
  for (Eigen::Index i = 0; i < set.images.rows(); ++i) {
    const auto flipped = hflip(std::span<const Scalar>(set.images.row(i).data(), set.pixels()), set.channels,
                               set.height, set.width);
    out.images.row(i) = Eigen::Map<const Eigen::RowVectorXd>(flipped.data(), idx(flipped.size()));
  }
  return out;
}

// -- Synthetic shapes --------------------------------------------------------

namespace {

// Every template depends on |dx|, so each class is mirror-symmetric about its
// own centre column.
bool shape_pixel(int cls, double dx, double dy, double side) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  const double r = std::hypot(dx, dy);
  const double box = 0.35 * side;
  switch (cls) {
    case 0:  // disk
      return r <= 0.25 * side;
    case 1:  // ring
      return r >= 0.22 * side && r <= 0.36 * side;
    case 2:  // plus-cross
      return (ax <= 1.0 && ay <= box) || (ay <= 1.0 && ax <= box);
    case 3:  // horizontal bars
      return ax <= box && ay <= box && static_cast<int>(std::floor(ay)) % 4 < 2;
    case 4:  // vertical bars
      return ax <= box && ay <= box && static_cast<int>(std::floor(ax)) % 4 < 2;
    case 5:  // checker
      return ax <= box && ay <= box &&
             (static_cast<int>(std::floor(ax / 2.0)) + static_cast<int>(std::floor(ay / 2.0))) % 2 == 0;
    default:
      return false;
  }
}

}  // namespace

LabeledImageSet gen_symmetric_shapes(std::size_t n, int classes, std::size_t side, std::uint64_t seed) {
  if (classes < 1 || classes > kShapeClassCount) {
    throw std::invalid_argument("gen_symmetric_shapes: classes must be in [1, " + std::to_string(kShapeClassCount) +
                                "], got " + std::to_string(classes));
  }
  if (side < kMinShapeSide) throw std::invalid_argument("gen_symmetric_shapes: side must be >= 12");

  LabeledImageSet set;
  set.channels = 1;
  set.height = side;
  set.width = side;
  set.classes = classes;
  set.provenance = Provenance::synthetic;
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) set.labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));

  std::mt19937_64 rng = make_rng(seed);
  std::shuffle(set.labels.begin(), set.labels.end(), rng);

  const int max_offset = static_cast<int>(side / 6);
  std::uniform_int_distribution<int> offset(-max_offset, max_offset);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double centre = (static_cast<double>(side) - 1.0) / 2.0;
  const double s = static_cast<double>(side);

  set.images.resize(idx(n), idx(side * side));
  for (std::size_t i = 0; i < n; ++i) {
    const int ox = offset(rng);
    const int oy = offset(rng);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const double dx = static_cast<double>(x) - centre - ox;
        const double dy = static_cast<double>(y) - centre - oy;
        const double base = shape_pixel(set.labels[i], dx, dy, s) ? 1.0 : 0.0;
        set.images(idx(i), idx(y * side + x)) = std::clamp(base + noise(rng), 0.0, 1.0);
      }
  }
  return set;
}

// -- IDX ---------------------------------------------------------------------

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IdxError(IdxError::Kind::io, path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t at, const std::filesystem::path& path) {
  if (at + 4 > bytes.size()) throw IdxError(IdxError::Kind::length, path.string() + ": truncated header");
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void put_be32(std::ostream& os, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) os.put(static_cast<char>((v >> shift) & 0xff));
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

LabeledImageSet load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path) {
  const auto images = read_file(image_path);
  const auto magic = be32(images, 0, image_path);
  if (magic != kIdxImageMagic) {
    throw IdxError(IdxError::Kind::format, image_path.string() + ": bad magic " + hex(magic) + ", expected " +
                                               hex(kIdxImageMagic));
  }
  const std::size_t n = be32(images, 4, image_path);
  const std::size_t h = be32(images, 8, image_path);
  const std::size_t w = be32(images, 12, image_path);
  if (images.size() != 16 + n * h * w) {
    throw IdxError(IdxError::Kind::length, image_path.string() + ": expected " + std::to_string(16 + n * h * w) +
                                               " bytes, found " + std::to_string(images.size()));
  }

  const auto labels = read_file(label_path);
  const auto label_magic = be32(labels, 0, label_path);
  if (label_magic != kIdxLabelMagic) {
    throw IdxError(IdxError::Kind::format, label_path.string() + ": bad magic " + hex(label_magic) +
                                               ", expected " + hex(kIdxLabelMagic));
  }
  const std::size_t label_count = be32(labels, 4, label_path);
  if (labels.size() != 8 + label_count) {
    throw IdxError(IdxError::Kind::length, label_path.string() + ": expected " + std::to_string(8 + label_count) +
                                               " bytes, found " + std::to_string(labels.size()));
  }
  if (label_count != n) {
    throw IdxError(IdxError::Kind::consistency, image_path.string() + " has " + std::to_string(n) + " images but " +
                                                    label_path.string() + " has " + std::to_string(label_count) +
                                                    " labels");
  }

  LabeledImageSet set;
  set.channels = 1;
  set.height = h;
  set.width = w;
  set.provenance = Provenance::idx;
  set.images.resize(idx(n), idx(h * w));
  for (std::size_t i = 0; i < n * h * w; ++i) set.images.data()[i] = images[16 + i] / 255.0;
  set.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    set.labels[i] = labels[8 + i];
    max_label = std::max(max_label, set.labels[i]);
  }
  set.classes = n ? max_label + 1 : 0;
  return set;
}

void write_idx(const LabeledImageSet& set, const std::filesystem::path& image_path,
               const std::filesystem::path& label_path) {
  if (set.channels != 1) throw std::invalid_argument("write_idx: only single-channel sets are supported");
  std::ofstream images(image_path, std::ios::binary);
  if (!images) throw IdxError(IdxError::Kind::io, image_path.string() + ": cannot open for writing");
  put_be32(images, kIdxImageMagic);
  put_be32(images, static_cast<std::uint32_t>(set.size()));
  put_be32(images, static_cast<std::uint32_t>(set.height));
  put_be32(images, static_cast<std::uint32_t>(set.width));
  for (Eigen::Index i = 0; i < set.images.size(); ++i) {
    images.put(static_cast<char>(std::lround(std::clamp(set.images.data()[i], 0.0, 1.0) * 255.0)));
  }

  std::ofstream labels(label_path, std::ios::binary);
  if (!labels) throw IdxError(IdxError::Kind::io, label_path.string() + ": cannot open for writing");
  put_be32(labels, kIdxLabelMagic);
  put_be32(labels, static_cast<std::uint32_t>(set.size()));
  for (int y : set.labels) labels.put(static_cast<char>(y));
  if (!images || !labels) throw IdxError(IdxError::Kind::io, image_path.string() + ": write failed");
}

// -- Noise, splits, batching -------------------------------------------------

NoisyDataset inject_symmetric_noise(const LabeledImageSet& set, Scalar noise_rate, std::uint64_t seed) {
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw std::invalid_argument("inject_symmetric_noise: noise rate must be in [0, 1), got " +
                                std::to_string(noise_rate));
  }
  if (set.classes < 2) throw std::invalid_argument("inject_symmetric_noise: need at least 2 classes");

  NoisyDataset noisy{set, set.labels, Mask(set.size(), 0), noise_rate};
  const auto count = static_cast<std::size_t>(std::floor(noise_rate * static_cast<Scalar>(set.size())));

  std::mt19937_64 rng = make_rng(seed, 1);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<int> other(0, set.classes - 2);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = order[k];
    int label = other(rng);
    if (label >= noisy.true_labels[i]) ++label;
    noisy.data.labels[i] = label;
    noisy.corrupted[i] = 1;
  }
  return noisy;
}

LabeledImageSet subset(const LabeledImageSet& set, std::span<const std::size_t> rows) {
  LabeledImageSet out;
  out.channels = set.channels;
  out.height = set.height;
  out.width = set.width;
  out.classes = set.classes;
  out.provenance = set.provenance;
  out.images.resize(idx(rows.size()), idx(set.pixels()));
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.labels.push_back(set.labels.at(rows[r]));
    out.images.row(idx(r)) = set.images.row(idx(rows[r]));
  }
  return out;
}

std::pair<LabeledImageSet, LabeledImageSet> split(const LabeledImageSet& set, Scalar train_fraction,
                                                  Scalar test_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(test_fraction > 0.0) || std::abs(train_fraction + test_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must be positive and sum to 1");
  }
  const auto test_count = static_cast<std::size_t>(std::floor(test_fraction * static_cast<Scalar>(set.size())));
  const std::size_t train_count = set.size() - test_count;

  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng = make_rng(seed, 2);
  std::shuffle(order.begin(), order.end(), rng);

  const std::span<const std::size_t> all(order);
  return {subset(set, all.first(train_count)), subset(set, all.subspan(train_count))};
}

std::vector<std::vector<std::size_t>> batch_order(std::size_t n, std::size_t batch_size, int epoch,
                                                  std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_order: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(derive_seed(seed, 3), static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<Batch> batches(const LabeledImageSet& set, std::size_t batch_size, int epoch, std::uint64_t seed) {
  std::vector<Batch> out;
  for (auto& rows : batch_order(set.size(), batch_size, epoch, seed)) {
    Batch b;
    b.images = set.batch(rows);
    b.labels.reserve(rows.size());
    for (auto r : rows) b.labels.push_back(set.labels[r]);
    b.indexes = std::move(rows);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace noisylab
