#include "noisylab/nn.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace noisylab {

namespace {

std::vector<std::size_t> parse_list(std::string_view text, char sep) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(sep, start), text.size());
    const std::string item(text.substr(start, end - start));
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw std::invalid_argument("bad number '" + item + "' in architecture");
    out.push_back(static_cast<std::size_t>(value));
    start = end + 1;
  }
  return out;
}

}  // namespace

void Architecture::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw std::invalid_argument("architecture: empty input geometry");
  if (dense.empty()) throw std::invalid_argument("architecture: needs at least one dense layer");
  std::size_t h = height, w = width, c = channels;
  for (const auto& layer : conv) {
    if (layer.kernels == 0 || layer.kh == 0 || layer.kw == 0) throw std::invalid_argument("architecture: empty conv layer");
    if (layer.kh > h || layer.kw > w) throw std::invalid_argument("architecture: conv kernel larger than its input");
    h -= layer.kh - 1;
    w -= layer.kw - 1;
    c = layer.kernels;
  }
  (void)c;
  for (auto d : dense) {
    if (d == 0) throw std::invalid_argument("architecture: zero-width dense layer");
  }
}

std::string Architecture::describe() const {
  std::ostringstream os;
  os << "input=" << channels << 'x' << height << 'x' << width;
  if (!conv.empty()) {
    os << " conv=";
    for (std::size_t i = 0; i < conv.size(); ++i) {
      os << (i ? "," : "") << conv[i].kernels << 'x' << conv[i].kh << 'x' << conv[i].kw;
    }
  }
  os << " dense=";
  for (std::size_t i = 0; i < dense.size(); ++i) os << (i ? "," : "") << dense[i];
  return os.str();
}

Architecture Architecture::parse(std::string_view text) {
  Architecture arch;
  arch.width = 0;
  std::istringstream is{std::string(text)};
  std::string token;
  bool seen_input = false;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("architecture: bad token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string_view value = std::string_view(token).substr(eq + 1);
    if (key == "input") {
      const auto dims = parse_list(value, 'x');
      if (dims.size() != 3) throw std::invalid_argument("architecture: input needs CxHxW");
      arch.channels = dims[0];
      arch.height = dims[1];
      arch.width = dims[2];
      seen_input = true;
    } else if (key == "conv") {
      std::size_t start = 0;
      while (start <= value.size()) {
        const auto end = std::min(value.find(',', start), value.size());
        const auto dims = parse_list(value.substr(start, end - start), 'x');
        if (dims.size() != 3) throw std::invalid_argument("architecture: conv layer needs KxKHxKW");
        arch.conv.push_back({dims[0], dims[1], dims[2]});
        start = end + 1;
      }
    } else if (key == "dense") {
      arch.dense = parse_list(value, ',');
    } else {
      throw std::invalid_argument("architecture: unknown key '" + key + "'");
    }
  }
  if (!seen_input) throw std::invalid_argument("architecture: missing input=");
  arch.validate();
  return arch;
}

Architecture mlp(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
  Architecture arch;
  arch.channels = 1;
  arch.height = 1;
  arch.width = sizes[0];
  arch.dense.assign(sizes.begin() + 1, sizes.end());
  arch.validate();
  return arch;
}

Architecture mlp(std::initializer_list<std::size_t> sizes) {
  return mlp(std::span<const std::size_t>(sizes.begin(), sizes.size()));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

ModelParams init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams params{arch, {}, seed};
  std::mt19937_64 rng(seed);

  auto he = [&](Shape shape, std::size_t fan_in) {
    std::normal_distribution<Scalar> normal(0.0, std::sqrt(2.0 / static_cast<Scalar>(fan_in)));
    Vector values(static_cast<Eigen::Index>(element_count(shape)));
    for (auto& v : values) v = normal(rng);
    return Tensor(std::move(shape), std::move(values));
  };

  std::size_t c = arch.channels, h = arch.height, w = arch.width;
  for (const auto& layer : arch.conv) {
    params.tensors.push_back(he({layer.kernels, c, layer.kh, layer.kw}, c * layer.kh * layer.kw));
    params.tensors.push_back(zeros({layer.kernels}));
    c = layer.kernels;
    h -= layer.kh - 1;
    w -= layer.kw - 1;
  }
  std::size_t in = c * h * w;
  for (auto out : arch.dense) {
    params.tensors.push_back(he({in, out}, in));
    params.tensors.push_back(zeros({out}));
    in = out;
  }
  return params;
}

ModelParams bind(Tape& tape, const ModelParams& params) {
  ModelParams bound{params.arch, {}, params.seed};
  bound.tensors.reserve(params.tensors.size());
  for (const auto& t : params.tensors) bound.tensors.push_back(tape.leaf(t));
  return bound;
}

std::vector<Tensor> gradients_for(const Gradients& grads, const ModelParams& bound) {
  std::vector<Tensor> out;
  out.reserve(bound.tensors.size());
  for (const auto& t : bound.tensors) out.push_back(grads.of(t));
  return out;
}

Tensor forward(const ModelParams& params, const Tensor& batch) {
  const auto& arch = params.arch;
  if (batch.rank() < 2 || batch.size() != batch.dim(0) * arch.input_features()) {
    throw TensorError("forward: batch " + to_string(batch.shape()) + " does not match input " +
                      arch.describe());
  }
  const std::size_t rows = batch.dim(0);
  std::size_t layer = 0;
  Tensor x = batch;
  if (!arch.conv.empty()) {
    x = reshape(x, {rows, arch.channels, arch.height, arch.width});
    for (std::size_t i = 0; i < arch.conv.size(); ++i, ++layer) {
      x = relu(conv2d(x, params.weight(layer), params.bias(layer)));
    }
  }
  if (x.rank() != 2) x = reshape(x, {rows, x.size() / std::max<std::size_t>(rows, 1)});
  for (std::size_t i = 0; i < arch.dense.size(); ++i, ++layer) {
    x = affine(x, params.weight(layer), params.bias(layer));
    if (i + 1 < arch.dense.size()) x = relu(x);
  }
  return x;
}

AdamState make_adam(const ModelParams& params, AdamOptions options) {
  AdamState state;
  state.options = options;
  for (const auto& t : params.tensors) {
    state.first_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(t.size())));
    state.second_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(t.size())));
  }
  return state;
}

void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state, Scalar lr) {
  if (grads.size() != params.tensors.size() || state.first_moment.size() != params.tensors.size()) {
    throw TensorError("adam_step: gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.tensors[i].shape()) {
      throw TensorError("adam_step: gradient shape " + to_string(grads[i].shape()) + " vs parameter " +
                        to_string(params.tensors[i].shape()));
    }
  }
  if (lr < 0.0) throw std::invalid_argument("adam_step: negative learning rate");

  const auto& opt = state.options;
  state.step += 1;
  const Scalar correction1 = 1.0 - std::pow(opt.beta1, static_cast<Scalar>(state.step));
  const Scalar correction2 = 1.0 - std::pow(opt.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Vector& p = params.tensors[i].values();
    Vector g = grads[i].values();
    if (opt.weight_decay != 0.0) g += opt.weight_decay * p;
    Vector& m = state.first_moment[i];
    Vector& v = state.second_moment[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + opt.eps);
  }
}

Scalar lr_at(const LrSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch > schedule.total_epochs) {
    throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(schedule.total_epochs) + "]");
  }
  const Scalar total = schedule.total_epochs;
  const Scalar start = schedule.decay_start * total;
  if (epoch < start) return schedule.base;
  if (total - start <= 0.0) return 0.0;
  return schedule.base * (total - epoch) / (total - start);
}

// -- Checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'N', 'L', 'A', 'B'};

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& is, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error(path.string() + ": truncated checkpoint");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  const std::string arch = params.arch.describe();
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(arch.size()));
  os.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  for (const auto& t : params.tensors) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(extent));
    for (Scalar v : t.values()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path.string() + ": cannot open checkpoint");
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw std::runtime_error(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get_le<std::uint32_t>(is, path);
  std::string text(length, '\0');
  if (!is.read(text.data(), length)) throw std::runtime_error(path.string() + ": truncated checkpoint");

  ModelParams params = init_model(Architecture::parse(text), 0);
  for (auto& t : params.tensors) {
    const auto rank = get_le<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& extent : shape) extent = get_le<std::uint32_t>(is, path);
    if (shape != t.shape()) {
      throw std::runtime_error(path.string() + ": tensor shape " + to_string(shape) + " does not match architecture");
    }
    for (auto& v : t.values()) v = std::bit_cast<Scalar>(get_le<std::uint64_t>(is, path));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path.string() + ": trailing bytes");
  return params;
}

}  // namespace noisylab
