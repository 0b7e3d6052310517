#ifndef NOISYLAB_AUTODIFF_HPP
#define NOISYLAB_AUTODIFF_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace noisylab {

using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename S>
using RowMatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrix = RowMatrixT<Scalar>;
using Shape = std::vector<std::size_t>;
using NodeId = std::size_t;
/// Per-sample boolean flags stored one byte each so they can be viewed as spans.
using Mask = std::vector<std::uint8_t>;

/// Raised for shape, rank, and domain violations in tensor operations.
class TensorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

/// Dense row-major array of doubles. A tensor created through a Tape carries a
/// node handle and participates in differentiation; otherwise it is a plain
/// inference value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Vector values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  const Vector& values() const { return values_; }
  /// Mutable access for optimizers. Any recorded tape node keeps its own copy.
  Vector& values() { return values_; }

  Scalar item() const;
  Scalar operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  /// Row-major matrix view of a rank-2 tensor.
  Eigen::Map<const RowMatrix> matrix() const;

  bool taped() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::optional<NodeId> node() const {
    return tape_ ? std::optional<NodeId>(node_) : std::nullopt;
  }

  /// Copy of the values with the tape handle stripped.
  Tensor detached() const { return Tensor(shape_, values_); }

 private:
  friend class Tape;
  Shape shape_{0};
  Vector values_;
  Tape* tape_ = nullptr;
  NodeId node_ = 0;
};

/// Builds a leaf tensor. Throws TensorError on length mismatch or non-finite values.
Tensor tensor(Shape shape, std::span<const Scalar> values);
Tensor tensor(Shape shape, std::initializer_list<Scalar> values);
Tensor zeros(Shape shape);
Tensor full(Shape shape, Scalar value);

/// Gradient of a scalar loss with respect to every leaf registered on a tape.
class Gradients {
 public:
  const Tensor& at(NodeId leaf) const;
  const Tensor& of(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }
  const std::map<NodeId, Tensor>& map() const { return grads_; }

 private:
  friend class Tape;
  std::map<NodeId, Tensor> grads_;
};

/// Define-by-run record of operations. Confined to one thread; rebuilt per
/// forward pass. Tensors point back at their tape, so a Tape never moves.
class Tape {
 public:
  /// Backward rule: receives the output gradient and one slot per input
  /// (nullptr for inputs that are not on this tape) to accumulate into.
  using BackwardFn = std::function<void(const Vector& grad_out, std::span<Vector* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a trainable leaf and returns its taped handle.
  Tensor leaf(const Tensor& value);

  /// Reverse sweep from a scalar loss produced on this tape.
  Gradients backward(const Tensor& loss) const;

  std::size_t node_count() const { return nodes_.size(); }

  /// Records an operation whose output values are already computed. Used by
  /// the op implementations; inputs not on this tape are treated as constants.
  Tensor record(Shape shape, Vector values, std::span<const Tensor* const> inputs, BackwardFn rule);

 private:
  struct Node {
    std::size_t size = 0;
    std::vector<std::optional<NodeId>> inputs;
    BackwardFn rule;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
  std::map<NodeId, Shape> leaf_shapes_;
};

/// Runs the reverse sweep on the loss's own tape. Throws TensorError when the
/// loss is not scalar or was computed without a tape.
Gradients backward(const Tensor& loss);

// Layer primitives. All ops record onto the tape of any taped input; mixing
// tensors from two different tapes is an error.

/// out[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]
Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Valid, stride-1 cross-correlation. input B x C x H x W, kernels K x C x kh x kw.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor scale(const Tensor& a, Scalar factor);
Tensor add_scalar(const Tensor& a, Scalar offset);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

enum class Elementwise { relu, add, sub, mul, square, scale };

/// Dispatcher over the elementwise family. Binary kinds take a tensor of the
/// same shape or a scalar; unary kinds ignore the operand.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b);
Tensor elementwise(Elementwise kind, const Tensor& a, Scalar b = 0.0);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);

/// Row-wise log-softmax of a B x M tensor, stabilized by the row maximum.
Tensor log_softmax(const Tensor& logits);
Tensor softmax(const Tensor& logits);

/// out[b] = a[b, index[b]]
Tensor pick(const Tensor& a, std::span<const int> index);

Tensor reshape(const Tensor& a, Shape shape);
/// Contiguous slice of the flattened tensor, reshaped.
Tensor slice(const Tensor& a, std::size_t offset, Shape shape);
/// Row subset of a tensor along axis 0.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

/// Central-difference gradient check of a scalar-valued function. Returns
/// max_k |a_k - n_k| / max(1e-8, |a_k| + |n_k|).
Scalar grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, Scalar eps);

}  // namespace noisylab

#endif  // NOISYLAB_AUTODIFF_HPP
