// src/tensor.cpp

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

#include "cif/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_set>

#include "cif/errors.hpp"

namespace cif {

namespace {

thread_local bool tls_grad_enabled = true;
thread_local GradientSink* tls_sink = nullptr;

constexpr double kExpClamp = 700.0;

using detail::Node;

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(a.shape()));
  }
}

// b's shape must be a suffix of a's.
void require_suffix(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sb.size() <= sa.size() &&
            std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()));
  if (!ok) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " +
                         shape_str(sa));
  }
}

template <typename F, typename G>
Tensor unary(const Tensor& a, F forward, G derivative) {
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [derivative](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_buffer(p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * derivative(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  std::vector<double> values(shape_numel(shape), v);
  return from(std::move(shape), std::move(values));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return from(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return from({rows, cols}, std::move(values));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s[0];
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.size() < 2 ? 1 : s[1];
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t i) const { return node_->value.at(i); }
double Tensor::at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(numel(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->value); }

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->is_leaf = false;
  bool needs = false;
  if (tls_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

std::vector<double>& grad_buffer(Node& n) {
  if (n.is_leaf && tls_sink != nullptr) return tls_sink->buffer(n);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

// ---- gradient sinks and guards ---------------------------------------------

std::vector<double>& GradientSink::buffer(Node& n) {
  auto& b = buffers_[&n];
  if (b.empty()) b.assign(n.value.size(), 0.0);
  return b;
}

const std::vector<double>* GradientSink::find(const Tensor& param) const {
  auto it = buffers_.find(param.node());
  return it == buffers_.end() ? nullptr : &it->second;
}

void GradientSink::flush_into(std::span<const Tensor> params) const {
  for (const auto& p : params) {
    const auto* b = find(p);
    if (b == nullptr) continue;
    Node& n = *p.node();
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    for (std::size_t i = 0; i < b->size(); ++i) n.grad[i] += (*b)[i];
  }
}

ScopedGradientSink::ScopedGradientSink(GradientSink& sink) : previous_(tls_sink) {
  tls_sink = &sink;
}
ScopedGradientSink::~ScopedGradientSink() { tls_sink = previous_; }

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }

bool grad_enabled() { return tls_grad_enabled; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
  }
  grad_buffer(*root)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += x * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = grad_buffer(pa);
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = pb.value.data() + p * n;
          const double* grow = G + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      auto& gb = grad_buffer(pb);
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double x = pa.value[i * k + p];
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += x * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  auto A = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> v(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(v), {a}, [](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_suffix(a, b, "add");
  auto A = a.data();
  auto B = b.data();
  const std::size_t nb = B.size();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % nb] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_suffix(a, b, "sub");
  auto A = a.data();
  auto B = b.data();
  const std::size_t nb = B.size();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % nb] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_suffix(a, b, "mul");
  auto A = a.data();
  auto B = b.data();
  const std::size_t nb = B.size();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i % nb];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i % nb] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_suffix(a, b, "div");
  auto A = a.data();
  auto B = b.data();
  const std::size_t nb = B.size();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] / B[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i % nb];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double d = pb.value[i % nb];
        g[i % nb] -= self.grad[i] * pa.value[i] / (d * d);
      }
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(std::clamp(x, -kExpClamp, kExpClamp)); },
      [](double x, double y) { return (x < -kExpClamp || x > kExpClamp) ? 0.0 : y; });
}

Tensor log(const Tensor& a) {
  static const double floor_v = std::exp(-kExpClamp);
  return unary(
      a, [](double x) { return std::log(std::max(x, floor_v)); },
      [](double x, double) { return x < floor_v ? 0.0 : 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

// ---- reductions and normalizers ----------------------------------------------

Tensor softmax(const Tensor& a, bool causal) {
  if (a.rank() == 0) throw DimensionError("softmax: scalar input");
  const std::size_t c = a.shape().back();
  const std::size_t r = a.numel() / c;
  if (causal && (a.rank() != 2 || r != c)) {
    throw DimensionError("softmax: causal mask needs a square matrix, got " +
                         shape_str(a.shape()));
  }
  auto A = a.data();
  std::vector<double> out(A.size(), 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t width = causal ? i + 1 : c;
    const double* x = A.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < width; ++j) y[j] /= z;
  }
  return make_result(a.shape(), std::move(out), {a}, [r, c](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* gy = self.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  if (a.rank() == 0) throw DimensionError("log_softmax: scalar input");
  const std::size_t c = a.shape().back();
  const std::size_t r = a.numel() / c;
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = A.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a}, [r, c](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i) {
      const double* ly = self.value.data() + i * c;
      const double* gy = self.grad.data() + i * c;
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) total += gy[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += gy[j] - std::exp(ly[j]) * total;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_result({}, {s}, {a}, [](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (auto& x : g) x += self.grad[0];
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  if (a.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t c = a.shape().back();
  if (gain.numel() != c || bias.numel() != c) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(c) + " entries");
  }
  const std::size_t r = a.numel() / c;
  auto A = a.data();
  auto Gm = gain.data();
  auto Bt = bias.data();
  std::vector<double> out(A.size());
  std::vector<double> xhat(A.size());
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = A.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (x[j] - mean) * inv_std[i];
      out[i * c + j] = xhat[i * c + j] * Gm[j] + Bt[j];
    }
  }
  return make_result(
      a.shape(), std::move(out), {a, gain, bias},
      [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const double* G = self.grad.data();
        if (pg.requires_grad) {
          auto& gg = grad_buffer(pg);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += G[i * c + j] * xhat[i * c + j];
        }
        if (pb.requires_grad) {
          auto& gb = grad_buffer(pb);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += G[i * c + j];
        }
        if (px.requires_grad) {
          auto& gx = grad_buffer(px);
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = G[i * c + j] * pg.value[j];
              m1 += d;
              m2 += d * xhat[i * c + j];
            }
            m1 *= inv_c;
            m2 *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = G[i * c + j] * pg.value[j];
              gx[i * c + j] += inv_std[i] * (d - m1 - xhat[i * c + j] * m2);
            }
          }
        }
      });
}

// ---- structural --------------------------------------------------------------

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_rows");
  if (begin > end || end > a.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of " + shape_str(a.shape()));
  }
  const std::size_t c = a.cols();
  auto A = a.data();
  std::vector<double> out(A.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          A.begin() + static_cast<std::ptrdiff_t>(end * c));
  return make_result({end - begin, c}, std::move(out), {a}, [begin, c](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  if (begin > end || end > a.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of " + shape_str(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  auto A = a.data();
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = A[i * c + begin + j];
  return make_result({r, w}, std::move(out), {a}, [r, c, w, begin](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
    total += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({total, c}, std::move(out), std::move(parents), [](Node& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      const std::size_t n = p->value.size();
      if (p->requires_grad) {
        auto& g = grad_buffer(*p);
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != r) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto P = p.data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total + offset + j] = P[i * w + j];
    offset += w;
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({r, total}, std::move(out), std::move(parents), [r, total](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t w = p->shape[1];
      if (p->requires_grad) {
        auto& g = grad_buffer(*p);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * total + off + j];
      }
      off += w;
    }
  });
}

Tensor subsample_rows(const Tensor& a, std::size_t stride) {
  require_matrix(a, "subsample_rows");
  if (stride == 0) throw ContractError("subsample_rows: zero stride");
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t out_r = (r + stride - 1) / stride;
  auto A = a.data();
  std::vector<double> out(out_r * c);
  for (std::size_t i = 0; i < out_r; ++i)
    std::copy_n(A.begin() + static_cast<std::ptrdiff_t>(i * stride * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  return make_result({out_r, c}, std::move(out), {a}, [out_r, c, stride](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < out_r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * stride * c + j] += self.grad[i * c + j];
  });
}

Tensor max_pool_rows(const Tensor& a, std::size_t window) {
  require_matrix(a, "max_pool_rows");
  if (window == 0) throw ContractError("max_pool_rows: zero window");
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t out_r = (r + window - 1) / window;
  auto A = a.data();
  std::vector<double> out(out_r * c);
  std::vector<std::size_t> argmax(out_r * c);
  for (std::size_t i = 0; i < out_r; ++i) {
    const std::size_t lo = i * window, hi = std::min(r, lo + window);
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = lo;
      for (std::size_t t = lo + 1; t < hi; ++t)
        if (A[t * c + j] > A[best * c + j]) best = t;
      argmax[i * c + j] = best * c + j;
      out[i * c + j] = A[best * c + j];
    }
  }
  return make_result({out_r, c}, std::move(out), {a}, [argmax = std::move(argmax)](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids) {
  require_matrix(table, "embedding");
  const std::size_t v = table.rows(), d = table.cols();
  auto T = table.data();
  std::vector<double> out(ids.size() * d);
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw ContractError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                          std::to_string(v));
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
    std::copy_n(T.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return make_result({ids.size(), d}, std::move(out), {table},
                     [rows = std::move(rows), d](Node& self) {
                       auto& g = grad_buffer(*self.parents[0]);
                       for (std::size_t i = 0; i < rows.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j)
                           g[rows[i] * d + j] += self.grad[i * d + j];
                     });
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t kernel_size) {
  if (kernel_size % 2 == 0) {
    throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(kernel_size));
  }
  require_matrix(input, "conv1d");
  require_matrix(weight, "conv1d");
  const std::size_t T = input.rows(), C = input.cols(), F = weight.cols();
  if (T == 0) throw ContractError("conv1d: empty input");
  if (weight.rows() != kernel_size * C || bias.numel() != F) {
    throw DimensionError("conv1d: weight " + shape_str(weight.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not fit input " +
                         shape_str(input.shape()) + " with kernel " +
                         std::to_string(kernel_size));
  }
  const auto half = static_cast<std::ptrdiff_t>(kernel_size / 2);
  auto X = input.data();
  auto W = weight.data();
  auto B = bias.data();
  std::vector<double> out(T * F);
  for (std::size_t t = 0; t < T; ++t) {
    double* y = out.data() + t * F;
    std::copy(B.begin(), B.end(), y);
    for (std::size_t k = 0; k < kernel_size; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      for (std::size_t c = 0; c < C; ++c) {
        const double x = X[static_cast<std::size_t>(src) * C + c];
        const double* w = W.data() + (k * C + c) * F;
        for (std::size_t f = 0; f < F; ++f) y[f] += x * w[f];
      }
    }
  }
  return make_result({T, F}, std::move(out), {input, weight, bias},
                     [T, C, F, kernel_size, half](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pw = *self.parents[1];
                       Node& pb = *self.parents[2];
                       const double* G = self.grad.data();
                       if (pb.requires_grad) {
                         auto& gb = grad_buffer(pb);
                         for (std::size_t t = 0; t < T; ++t)
                           for (std::size_t f = 0; f < F; ++f) gb[f] += G[t * F + f];
                       }
                       std::vector<double>* gw = pw.requires_grad ? &grad_buffer(pw) : nullptr;
                       std::vector<double>* gx = px.requires_grad ? &grad_buffer(px) : nullptr;
                       for (std::size_t t = 0; t < T; ++t) {
                         const double* g = G + t * F;
                         for (std::size_t k = 0; k < kernel_size; ++k) {
                           const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - half;
                           if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                           const auto s = static_cast<std::size_t>(src);
                           for (std::size_t c = 0; c < C; ++c) {
                             const std::size_t row = (k * C + c) * F;
                             if (gw != nullptr) {
                               const double x = px.value[s * C + c];
                               for (std::size_t f = 0; f < F; ++f) (*gw)[row + f] += x * g[f];
                             }
                             if (gx != nullptr) {
                               double acc = 0.0;
                               for (std::size_t f = 0; f < F; ++f) acc += pw.value[row + f] * g[f];
                               (*gx)[s * C + c] += acc;
                             }
                           }
                         }
                       }
                     });
}

// ---- dropout -------------------------------------------------------------------

std::vector<std::uint8_t> dropout_mask(std::size_t n, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  std::vector<std::uint8_t> keep(n, 1);
  if (p == 0.0) return keep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& k : keep) k = u(rng) >= p ? 1 : 0;
  return keep;
}

Tensor dropout_with_mask(const Tensor& a, std::span<const std::uint8_t> keep, double p) {
  if (keep.size() != a.numel()) throw DimensionError("dropout: mask size mismatch");
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  const double s = 1.0 / (1.0 - p);
  std::vector<double> factor(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) factor[i] = keep[i] ? s : 0.0;
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * factor[i];
  return make_result(a.shape(), std::move(out), {a}, [factor = std::move(factor)](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor[i];
  });
}

Tensor dropout(const Tensor& a, double p, std::uint64_t seed) {
  if (p == 0.0) return a;
  auto keep = dropout_mask(a.numel(), p, seed);
  return dropout_with_mask(a, keep, p);
}

}  // namespace cif
