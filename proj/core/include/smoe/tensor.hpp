#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "smoe/errors.hpp"

namespace smoe {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Gradient buffers of an op's inputs, in the order the inputs were given.
// Entries are null for inputs that do not require a gradient.
using ParentGrads = std::vector<std::vector<double>*>;
using BackwardFn = std::function<void(std::span<const double> grad_out, ParentGrads& parent_grads)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first backward reaches this node
  bool requires_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

}  // namespace detail

/// Dense row-major float64 array with an optional reverse-mode gradient.
///
/// A Tensor is a shared handle: copies alias the same storage. Results of
/// operations on tensors that require a gradient record their inputs and a
/// backward closure; `backward()` replays that graph once and then releases it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view for leaf tensors (parameters, inputs). Mutating a tensor that
  // is already part of a recorded graph invalidates that graph.
  std::span<double> mutable_data();
  double item() const;
  // NCHW element access; the tensor must be rank 4.
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, cut out of the graph.
  Tensor detach() const;
  // Deep copy of the values (no gradient, no graph).
  Tensor clone() const;

  bool is_leaf() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&, BackwardFn);

  std::shared_ptr<detail::Node> node_;
};

// While alive, ops on this thread produce constants instead of recording a graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

// Builds an op output. When any parent requires a gradient, the result records
// the parents and `backward`; otherwise it is a plain constant tensor.
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
                   BackwardFn backward);

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate (+=) until
// zero_grad(). The recorded graph is released afterwards; calling backward a
// second time on the same loss throws GraphError.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Primitive operations
// ---------------------------------------------------------------------------

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

// Cross-correlation over NCHW input with [Cout, Cin, kh, kw] weights.
// `bias` may be undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              Conv2dOptions options = {});

// Backward routes each window's gradient to its first maximal element in
// row-major order.
Tensor max_pool2d(const Tensor& input, std::size_t window = 2, std::size_t stride = 2);

// Nearest-neighbour 2x upsampling of the two trailing axes.
Tensor upsample2x(const Tensor& input);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& input, std::size_t begin, std::size_t count);
Tensor crop2d(const Tensor& input, std::size_t top, std::size_t left, std::size_t height,
              std::size_t width);

enum class UnaryOp { sigmoid, exp, neg, square, relu };
Tensor map_unary(const Tensor& input, UnaryOp op);
inline Tensor sigmoid(const Tensor& x) { return map_unary(x, UnaryOp::sigmoid); }
inline Tensor exp(const Tensor& x) { return map_unary(x, UnaryOp::exp); }
inline Tensor neg(const Tensor& x) { return map_unary(x, UnaryOp::neg); }
inline Tensor square(const Tensor& x) { return map_unary(x, UnaryOp::square); }
inline Tensor relu(const Tensor& x) { return map_unary(x, UnaryOp::relu); }

// Elementwise with numpy-style broadcasting: on every axis the extents agree
// or one of them is 1. Ranks must match, except that a rank-0/1 single-element
// operand broadcasts against anything.
enum class BinaryOp { add, sub, mul, div };
Tensor zip_binary(const Tensor& a, const Tensor& b, BinaryOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return zip_binary(a, b, BinaryOp::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return zip_binary(a, b, BinaryOp::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return zip_binary(a, b, BinaryOp::mul); }
inline Tensor div(const Tensor& a, const Tensor& b) { return zip_binary(a, b, BinaryOp::div); }

enum class ReduceMode { sum, mean };
Tensor reduce(const Tensor& input, ReduceMode mode);
inline Tensor sum(const Tensor& x) { return reduce(x, ReduceMode::sum); }
inline Tensor mean(const Tensor& x) { return reduce(x, ReduceMode::mean); }

// Sum over the channel axis of an NCHW tensor, keeping it: [N,C,H,W] -> [N,1,H,W].
// With `order_invariant`, each pixel's terms are added in sorted order so the
// result is bit-identical under any permutation of the channels.
Tensor sum_channels(const Tensor& input, bool order_invariant = false);

// Constant arithmetic helpers (the constant never requires a gradient).
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

// True when every element of data is finite.
bool all_finite(std::span<const double> values);

}  // namespace smoe
