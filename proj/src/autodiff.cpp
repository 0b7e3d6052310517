#include "noisylab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace noisylab {

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->taped()) continue;
    if (tape && tape != t->tape()) throw TensorError("operands belong to different tapes");
    tape = t->tape();
  }
  return tape;
}

// Wraps a freshly computed value. The backward rule is only built when some
// input is taped, so inference pays nothing for it.
template <typename MakeRule>
Tensor finish(Shape shape, Vector values, std::initializer_list<const Tensor*> inputs, MakeRule&& make_rule) {
  Tape* tape = common_tape(inputs);
  if (!tape) return Tensor(std::move(shape), std::move(values));
  std::vector<const Tensor*> in(inputs);
  return tape->record(std::move(shape), std::move(values), in, make_rule());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw TensorError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                      to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw TensorError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                      to_string(a.shape()));
  }
}

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

}  // namespace

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != size()) {
    throw TensorError("shape " + to_string(shape_) + " does not match " + std::to_string(size()) + " values");
  }
}

Scalar Tensor::item() const {
  if (size() != 1) throw TensorError("item() on tensor of shape " + to_string(shape_));
  return values_[0];
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  if (rank() != 2) throw TensorError("matrix() needs rank 2, got " + to_string(shape_));
  return {values_.data(), idx(shape_[0]), idx(shape_[1])};
}

Tensor tensor(Shape shape, std::span<const Scalar> values) {
  if (element_count(shape) != values.size()) {
    throw TensorError("shape " + to_string(shape) + " does not match " + std::to_string(values.size()) +
                      " values");
  }
  for (Scalar v : values) {
    if (!std::isfinite(v)) throw TensorError("tensor values must be finite");
  }
  Vector data = Eigen::Map<const Vector>(values.data(), idx(values.size()));
  return Tensor(std::move(shape), std::move(data));
}

Tensor tensor(Shape shape, std::initializer_list<Scalar> values) {
  return tensor(std::move(shape), std::span<const Scalar>(values.begin(), values.size()));
}

Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor full(Shape shape, Scalar value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), Vector::Constant(idx(n), value));
}

// -- Gradients / Tape --------------------------------------------------------

const Tensor& Gradients::at(NodeId leaf) const {
  auto it = grads_.find(leaf);
  if (it == grads_.end()) throw TensorError("no gradient for node " + std::to_string(leaf));
  return it->second;
}

const Tensor& Gradients::of(const Tensor& leaf) const {
  if (!leaf.node()) throw TensorError("tensor is not on a tape");
  return at(*leaf.node());
}

Tensor Tape::leaf(const Tensor& value) {
  Node node;
  node.size = value.size();
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  Tensor out(value.shape(), value.values());
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  leaf_shapes_.emplace(out.node_, value.shape());
  return out;
}

Tensor Tape::record(Shape shape, Vector values, std::span<const Tensor* const> inputs, BackwardFn rule) {
  Node node;
  node.size = static_cast<std::size_t>(values.size());
  node.rule = std::move(rule);
  node.inputs.reserve(inputs.size());
  for (const Tensor* t : inputs) {
    if (t->tape() == this) {
      node.inputs.emplace_back(t->node_);
    } else {
      node.inputs.emplace_back(std::nullopt);
    }
  }
  nodes_.push_back(std::move(node));
  Tensor out(std::move(shape), std::move(values));
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  return out;
}

Gradients Tape::backward(const Tensor& loss) const {
  if (loss.tape() != this) throw TensorError("backward: loss is not on this tape");
  if (loss.size() != 1) throw TensorError("backward: loss must be scalar, got " + to_string(loss.shape()));

  std::vector<Vector> grads(loss.node_ + 1);
  std::vector<bool> touched(loss.node_ + 1, false);
  grads[loss.node_] = Vector::Ones(1);
  touched[loss.node_] = true;

  std::vector<Vector*> slots;
  for (std::size_t i = loss.node_ + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!touched[i] || node.is_leaf) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!node.inputs[k]) continue;
      const NodeId in = *node.inputs[k];
      if (!touched[in]) {
        grads[in] = Vector::Zero(idx(nodes_[in].size));
        touched[in] = true;
      }
      slots[k] = &grads[in];
    }
    node.rule(grads[i], slots);
  }

  Gradients out;
  for (const auto& [id, shape] : leaf_shapes_) {
    if (id <= loss.node_ && touched[id]) {
      out.grads_.emplace(id, Tensor(shape, grads[id]));
    } else {
      out.grads_.emplace(id, zeros(shape));
    }
  }
  return out;
}

Gradients backward(const Tensor& loss) {
  if (!loss.taped()) throw TensorError("backward: loss was computed without an active tape");
  return loss.tape()->backward(loss);
}

// -- Layer primitives --------------------------------------------------------

Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "affine");
  require_rank(weight, 2, "affine");
  require_rank(bias, 1, "affine");
  const auto batch = input.dim(0), in = input.dim(1), out = weight.dim(1);
  if (weight.dim(0) != in || bias.dim(0) != out) {
    throw TensorError("affine: incompatible shapes " + to_string(input.shape()) + " x " +
                      to_string(weight.shape()) + " + " + to_string(bias.shape()));
  }
  RowMatrix y = input.matrix() * weight.matrix();
  y.rowwise() += bias.values().transpose();
  Vector values = Eigen::Map<const Vector>(y.data(), y.size());

  return finish({batch, out}, std::move(values), {&input, &weight, &bias}, [&] {
    return [x = input.values(), w = weight.values(), batch, in, out](const Vector& g, std::span<Vector* const> gin) {
      Eigen::Map<const RowMatrix> G(g.data(), idx(batch), idx(out));
      if (gin[0]) {
        Eigen::Map<const RowMatrix> W(w.data(), idx(in), idx(out));
        RowMatrix dx = G * W.transpose();
        *gin[0] += Eigen::Map<const Vector>(dx.data(), dx.size());
      }
      if (gin[1]) {
        Eigen::Map<const RowMatrix> X(x.data(), idx(batch), idx(in));
        RowMatrix dw = X.transpose() * G;
        *gin[1] += Eigen::Map<const Vector>(dw.data(), dw.size());
      }
      if (gin[2]) *gin[2] += G.colwise().sum().transpose();
    };
  });
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width, kernels, kh, kw, out_h, out_w;
  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

// Column matrix (C*kh*kw) x (H'*W') for one image.
RowMatrix im2col(const Scalar* image, const ConvGeometry& g) {
  RowMatrix cols(idx(g.patch()), idx(g.positions()));
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const auto row = idx((c * g.kh + i) * g.kw + j);
        for (std::size_t y = 0; y < g.out_h; ++y)
          for (std::size_t x = 0; x < g.out_w; ++x)
            cols(row, idx(y * g.out_w + x)) = image[(c * g.height + y + i) * g.width + x + j];
      }
  return cols;
}

void col2im_add(const RowMatrix& cols, Scalar* image, const ConvGeometry& g) {
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const auto row = idx((c * g.kh + i) * g.kw + j);
        for (std::size_t y = 0; y < g.out_h; ++y)
          for (std::size_t x = 0; x < g.out_w; ++x)
            image[(c * g.height + y + i) * g.width + x + j] += cols(row, idx(y * g.out_w + x));
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require_rank(input, 4, "conv2d");
  require_rank(kernels, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 kernels.dim(0), kernels.dim(2), kernels.dim(3), 0, 0};
  if (kernels.dim(1) != g.channels || bias.dim(0) != g.kernels) {
    throw TensorError("conv2d: incompatible shapes " + to_string(input.shape()) + ", " +
                      to_string(kernels.shape()) + ", " + to_string(bias.shape()));
  }
  if (g.kh > g.height || g.kw > g.width) {
    throw TensorError("conv2d: kernel " + to_string(kernels.shape()) + " larger than input " +
                      to_string(input.shape()));
  }
  g.out_h = g.height - g.kh + 1;
  g.out_w = g.width - g.kw + 1;

  const std::size_t image_size = g.channels * g.height * g.width;
  const std::size_t out_size = g.kernels * g.positions();
  Eigen::Map<const RowMatrix> K(kernels.values().data(), idx(g.kernels), idx(g.patch()));
  Vector values(idx(g.batch * out_size));
  for (std::size_t b = 0; b < g.batch; ++b) {
    RowMatrix y = K * im2col(input.values().data() + b * image_size, g);
    y.colwise() += bias.values();
    values.segment(idx(b * out_size), idx(out_size)) = Eigen::Map<const Vector>(y.data(), y.size());
  }

  return finish({g.batch, g.kernels, g.out_h, g.out_w}, std::move(values), {&input, &kernels, &bias}, [&] {
    return [x = input.values(), k = kernels.values(), g, image_size, out_size](const Vector& grad,
                                                                               std::span<Vector* const> gin) {
      Eigen::Map<const RowMatrix> K(k.data(), idx(g.kernels), idx(g.patch()));
      for (std::size_t b = 0; b < g.batch; ++b) {
        Eigen::Map<const RowMatrix> G(grad.data() + b * out_size, idx(g.kernels), idx(g.positions()));
        if (gin[0]) {
          RowMatrix dcols = K.transpose() * G;
          col2im_add(dcols, gin[0]->data() + b * image_size, g);
        }
        if (gin[1]) {
          RowMatrix dk = G * im2col(x.data() + b * image_size, g).transpose();
          *gin[1] += Eigen::Map<const Vector>(dk.data(), dk.size());
        }
        if (gin[2]) *gin[2] += G.rowwise().sum();
      }
    };
  });
}

// -- Elementwise -------------------------------------------------------------

Tensor relu(const Tensor& a) {
  Vector values = a.values().cwiseMax(0.0);
  return finish(a.shape(), std::move(values), {&a}, [&] {
    // Subgradient at exactly 0 is 0.
    Vector mask = (a.values().array() > 0.0).cast<Scalar>();
    return [mask = std::move(mask)](const Vector& g, std::span<Vector* const> gin) {
      gin[0]->array() += g.array() * mask.array();
    };
  });
}

Tensor exp(const Tensor& a) {
  Vector values = a.values().array().exp();
  return finish(a.shape(), values, {&a}, [&] {
    return [e = values](const Vector& g, std::span<Vector* const> gin) {
      gin[0]->array() += g.array() * e.array();
    };
  });
}

Tensor square(const Tensor& a) {
  Vector values = a.values().array().square();
  return finish(a.shape(), std::move(values), {&a}, [&] {
    return [x = a.values()](const Vector& g, std::span<Vector* const> gin) {
      gin[0]->array() += 2.0 * g.array() * x.array();
    };
  });
}

Tensor scale(const Tensor& a, Scalar factor) {
  Vector values = a.values() * factor;
  return finish(a.shape(), std::move(values), {&a}, [&] {
    return [factor](const Vector& g, std::span<Vector* const> gin) { *gin[0] += g * factor; };
  });
}

Tensor add_scalar(const Tensor& a, Scalar offset) {
  Vector values = a.values().array() + offset;
  return finish(a.shape(), std::move(values), {&a}, [] {
    return [](const Vector& g, std::span<Vector* const> gin) { *gin[0] += g; };
  });
}

Tensor neg(const Tensor& a) {
  Vector values = -a.values();
  return finish(a.shape(), std::move(values), {&a}, [] {
    return [](const Vector& g, std::span<Vector* const> gin) { *gin[0] -= g; };
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Vector values = a.values() + b.values();
  return finish(a.shape(), std::move(values), {&a, &b}, [] {
    return [](const Vector& g, std::span<Vector* const> gin) {
      if (gin[0]) *gin[0] += g;
      if (gin[1]) *gin[1] += g;
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Vector values = a.values() - b.values();
  return finish(a.shape(), std::move(values), {&a, &b}, [] {
    return [](const Vector& g, std::span<Vector* const> gin) {
      if (gin[0]) *gin[0] += g;
      if (gin[1]) *gin[1] -= g;
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Vector values = a.values().cwiseProduct(b.values());
  return finish(a.shape(), std::move(values), {&a, &b}, [&] {
    return [x = a.values(), y = b.values()](const Vector& g, std::span<Vector* const> gin) {
      if (gin[0]) gin[0]->array() += g.array() * y.array();
      if (gin[1]) gin[1]->array() += g.array() * x.array();
    };
  });
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case Elementwise::add: return add(a, b);
    case Elementwise::sub: return sub(a, b);
    case Elementwise::mul: return mul(a, b);
    case Elementwise::relu: return relu(a);
    case Elementwise::square: return square(a);
    case Elementwise::scale: break;
  }
  throw TensorError("elementwise: scale takes a scalar operand");
}

Tensor elementwise(Elementwise kind, const Tensor& a, Scalar b) {
  switch (kind) {
    case Elementwise::relu: return relu(a);
    case Elementwise::square: return square(a);
    case Elementwise::scale:
    case Elementwise::mul: return scale(a, b);
    case Elementwise::add: return add_scalar(a, b);
    case Elementwise::sub: return add_scalar(a, -b);
  }
  throw TensorError("elementwise: unknown kind");
}

// -- Reductions --------------------------------------------------------------

Tensor sum(const Tensor& a) {
  Vector values = Vector::Constant(1, a.values().sum());
  return finish({}, std::move(values), {&a}, [] {
    return [](const Vector& g, std::span<Vector* const> gin) { gin[0]->array() += g[0]; };
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw TensorError("mean of an empty tensor");
  const Scalar inv = 1.0 / static_cast<Scalar>(a.size());
  Vector values = Vector::Constant(1, a.values().sum() * inv);
  return finish({}, std::move(values), {&a}, [&] {
    return [inv](const Vector& g, std::span<Vector* const> gin) { gin[0]->array() += g[0] * inv; };
  });
}

namespace {

Tensor reduce_axis(const Tensor& a, std::size_t axis, bool average) {
  if (axis >= a.rank()) {
    throw TensorError("reduce: axis " + std::to_string(axis) + " invalid for shape " + to_string(a.shape()));
  }
  const auto& s = a.shape();
  const std::size_t n = s[axis];
  if (average && n == 0) throw TensorError("mean over an empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));

  const Scalar factor = average ? 1.0 / static_cast<Scalar>(n) : 1.0;
  Vector values = Vector::Zero(idx(outer * inner));
  const Scalar* x = a.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i) values[idx(o * inner + i)] += x[(o * n + k) * inner + i];
  if (average) values *= factor;

  return finish(std::move(out_shape), std::move(values), {&a}, [&] {
    return [outer, n, inner, factor](const Vector& g, std::span<Vector* const> gin) {
      Scalar* d = gin[0]->data();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t i = 0; i < inner; ++i) d[(o * n + k) * inner + i] += g[idx(o * inner + i)] * factor;
    };
  });
}

}  // namespace

Tensor sum(const Tensor& a, std::size_t axis) { return reduce_axis(a, axis, false); }
Tensor mean(const Tensor& a, std::size_t axis) { return reduce_axis(a, axis, true); }

// -- Softmax family ----------------------------------------------------------

Tensor log_softmax(const Tensor& logits) {
  require_rank(logits, 2, "log_softmax");
  const auto rows = logits.dim(0), cols = logits.dim(1);
  Eigen::Map<const RowMatrix> z(logits.values().data(), idx(rows), idx(cols));
  RowMatrix out(idx(rows), idx(cols));
  for (Eigen::Index r = 0; r < idx(rows); ++r) {
    const Scalar m = z.row(r).maxCoeff();
    const Scalar lse = m + std::log((z.row(r).array() - m).exp().sum());
    out.row(r) = z.row(r).array() - lse;
  }
  Vector values = Eigen::Map<const Vector>(out.data(), out.size());

  return finish({rows, cols}, values, {&logits}, [&] {
    return [lp = values, rows, cols](const Vector& g, std::span<Vector* const> gin) {
      Eigen::Map<const RowMatrix> G(g.data(), idx(rows), idx(cols));
      Eigen::Map<const RowMatrix> L(lp.data(), idx(rows), idx(cols));
      Eigen::Map<RowMatrix> D(gin[0]->data(), idx(rows), idx(cols));
      const Vector row_sums = G.rowwise().sum();
      D.array() += G.array() - L.array().exp().colwise() * row_sums.array();
    };
  });
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const auto rows = logits.dim(0), cols = logits.dim(1);
  Eigen::Map<const RowMatrix> z(logits.values().data(), idx(rows), idx(cols));
  RowMatrix out(idx(rows), idx(cols));
  for (Eigen::Index r = 0; r < idx(rows); ++r) {
    out.row(r) = (z.row(r).array() - z.row(r).maxCoeff()).exp();
    out.row(r) /= out.row(r).sum();
  }
  Vector values = Eigen::Map<const Vector>(out.data(), out.size());

  return finish({rows, cols}, values, {&logits}, [&] {
    return [p = values, rows, cols](const Vector& g, std::span<Vector* const> gin) {
      Eigen::Map<const RowMatrix> G(g.data(), idx(rows), idx(cols));
      Eigen::Map<const RowMatrix> P(p.data(), idx(rows), idx(cols));
      Eigen::Map<RowMatrix> D(gin[0]->data(), idx(rows), idx(cols));
      const Vector dots = (G.array() * P.array()).rowwise().sum();
      D.array() += P.array() * (G.array().colwise() - dots.array());
    };
  });
}

// -- Indexing ----------------------------------------------------------------

Tensor pick(const Tensor& a, std::span<const int> index) {
  require_rank(a, 2, "pick");
  const auto rows = a.dim(0), cols = a.dim(1);
  if (index.size() != rows) throw TensorError("pick: index length does not match rows");
  Vector values(idx(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= cols) {
      throw TensorError("pick: index " + std::to_string(index[r]) + " out of range [0," + std::to_string(cols) + ")");
    }
    values[idx(r)] = a.values()[idx(r * cols + static_cast<std::size_t>(index[r]))];
  }
  return finish({rows}, std::move(values), {&a}, [&] {
    return [at = std::vector<int>(index.begin(), index.end()), cols](const Vector& g, std::span<Vector* const> gin) {
      for (std::size_t r = 0; r < at.size(); ++r) (*gin[0])[idx(r * cols + static_cast<std::size_t>(at[r]))] += g[idx(r)];
    };
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (element_count(shape) != a.size()) {
    throw TensorError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  return finish(std::move(shape), a.values(), {&a}, [] {
    return [](const Vector& g, std::span<Vector* const> gin) { *gin[0] += g; };
  });
}

Tensor slice(const Tensor& a, std::size_t offset, Shape shape) {
  const std::size_t n = element_count(shape);
  if (offset + n > a.size()) throw TensorError("slice: range exceeds tensor of size " + std::to_string(a.size()));
  Vector values = a.values().segment(idx(offset), idx(n));
  return finish(std::move(shape), std::move(values), {&a}, [&] {
    return [offset, n](const Vector& g, std::span<Vector* const> gin) {
      gin[0]->segment(idx(offset), idx(n)) += g;
    };
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  if (a.rank() == 0) throw TensorError("gather_rows: scalar input");
  const std::size_t stride = a.size() / std::max<std::size_t>(a.dim(0), 1);
  Shape shape = a.shape();
  shape[0] = rows.size();
  Vector values(idx(rows.size() * stride));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.dim(0)) throw TensorError("gather_rows: row index out of range");
    values.segment(idx(r * stride), idx(stride)) = a.values().segment(idx(rows[r] * stride), idx(stride));
  }
  return finish(std::move(shape), std::move(values), {&a}, [&] {
    return [at = std::vector<std::size_t>(rows.begin(), rows.end()), stride](const Vector& g,
                                                                            std::span<Vector* const> gin) {
      for (std::size_t r = 0; r < at.size(); ++r)
        gin[0]->segment(idx(at[r] * stride), idx(stride)) += g.segment(idx(r * stride), idx(stride));
    };
  });
}

// -- Verification ------------------------------------------------------------

Scalar grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, Scalar eps) {
  Tape tape;
  const Tensor x = tape.leaf(point);
  const Tensor loss = f(x);
  Vector analytic = Vector::Zero(idx(point.size()));
  if (loss.tape() == &tape) analytic = tape.backward(loss).of(x).values();

  Scalar worst = 0.0;
  Tensor probe = point.detached();
  for (std::size_t k = 0; k < point.size(); ++k) {
    const Scalar saved = probe.values()[idx(k)];
    probe.values()[idx(k)] = saved + eps;
    const Scalar up = f(probe).item();
    probe.values()[idx(k)] = saved - eps;
    const Scalar down = f(probe).item();
    probe.values()[idx(k)] = saved;

    const Scalar numeric = (up - down) / (2.0 * eps);
    const Scalar a = analytic[idx(k)];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric)));
  }
  return worst;
}

}  // namespace noisylab
