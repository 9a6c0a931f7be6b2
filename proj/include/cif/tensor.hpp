// cif/tensor.hpp

// Copyright 2026  The cif-align Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// A small dense-array engine with tape-free reverse-mode differentiation.
//
// A Tensor is a shared handle to a node holding row-major float64 values.
// Operations build a DAG; backward() walks it in reverse topological order.
// Handles are cheap to copy and alias the same node.
//
// Broadcasting is limited to leading-dimension expansion: in a binary op the
// second operand's shape must be a suffix of the first's (so [T, D] + [D] and
// [T, D] * [] are fine, [T, 1] + [T, D] is not).
//
// Threading: a graph belongs to one thread. Parameters may be shared across
// threads for read-only forward passes; gradient accumulation into shared
// parameters goes through a GradientSink installed on the calling thread.

#ifndef CIF_TENSOR_HPP_
#define CIF_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cif {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  bool is_leaf = true;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  // Leaf that collects gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Matrix views; rows() of a rank-1 tensor is its length.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // In-place edits are for leaves only (optimizer updates, test probes).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool has_grad() const;
  // Zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(detail::Node&)>);
};

// Builds an op result. The backward closure receives the result node, whose
// grad is populated, and must accumulate into its parents through
// grad_buffer(). When no parent requires grad the closure is dropped.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward);

// Where gradients for `n` accumulate on this thread.
std::vector<double>& grad_buffer(detail::Node& n);

// Redirects parameter-gradient accumulation on the current thread into a
// private buffer, so that independent graphs sharing parameters can run
// backward concurrently and be reduced in a fixed order afterwards.
class GradientSink {
 public:
  std::vector<double>& buffer(detail::Node& n);
  // Gradient collected for `param`, or nullptr when untouched.
  const std::vector<double>* find(const Tensor& param) const;
  // param.grad += collected, for every param in order.
  void flush_into(std::span<const Tensor> params) const;

 private:
  std::unordered_map<const detail::Node*, std::vector<double>> buffers_;
};

class ScopedGradientSink {
 public:
  explicit ScopedGradientSink(GradientSink& sink);
  ~ScopedGradientSink();
  ScopedGradientSink(const ScopedGradientSink&) = delete;
  ScopedGradientSink& operator=(const ScopedGradientSink&) = delete;

 private:
  GradientSink* previous_;
};

// Disables graph recording on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Populates gradients of every leaf reachable from `loss`, which must hold a
// single element. Repeated calls accumulate into leaves.
void backward(const Tensor& loss);

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor div(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
// Inputs are clamped to [-700, 700] before exponentiation.
Tensor exp(const Tensor& a);
// Inputs are clamped below at exp(-700), so outputs are >= -700.
Tensor log(const Tensor& a);
// Subgradient 0 at the origin.
Tensor abs(const Tensor& a);

// Softmax over the last dimension. With `causal`, row i of a square matrix
// only attends to columns <= i.
Tensor softmax(const Tensor& a, bool causal = false);
Tensor log_softmax(const Tensor& a);

Tensor sum(const Tensor& a);

// Rows [begin, end) / columns [begin, end) of a matrix.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// Rows 0, stride, 2*stride, ...
Tensor subsample_rows(const Tensor& a, std::size_t stride);
// Non-overlapping max over `window` consecutive rows; the last window may be
// short. Output has ceil(rows / window) rows.
Tensor max_pool_rows(const Tensor& a, std::size_t window);
// table[ids[i], :] for each i.
Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids);

// Same-padded 1-D convolution over time.
//   input  [T, C]
//   weight [K * C, F], row k * C + c holds the tap for offset k - K/2
//   bias   [F]
// Throws ConfigError for even K.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t kernel_size);

// Per-row normalization over the last dimension followed by gain and bias.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Elementwise product with a fixed 0/1 mask, kept entries scaled by 1/(1-p).
Tensor dropout_with_mask(const Tensor& a, std::span<const std::uint8_t> keep, double p);
// Mask drawn from `seed`; keep[i] = 1 with probability 1 - p.
std::vector<std::uint8_t> dropout_mask(std::size_t n, double p, std::uint64_t seed);
Tensor dropout(const Tensor& a, double p, std::uint64_t seed);

}  // namespace cif

#endif  // CIF_TENSOR_HPP_
