// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cmbrl/errors.hpp"

namespace cmbrl::nn {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ContractViolation(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                          " and " + shape_string(b.shape()));
}

// Builds an op result; the tape entry is only kept when some input needs it.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool track = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                   [](const NodePtr& p) { return p->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

struct Broadcast {
  std::size_t rows, cols, b_rows, b_cols;
  std::size_t b_index(std::size_t i, std::size_t j) const {
    return (b_rows == 1 ? 0 : i) * b_cols + (b_cols == 1 ? 0 : j);
  }
};

Broadcast broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
  Broadcast bc{a.rows(), a.cols(), b.rows(), b.cols()};
  const bool rows_ok = bc.b_rows == bc.rows || bc.b_rows == 1;
  const bool cols_ok = bc.b_cols == bc.cols || bc.b_cols == 1;
  if (!rows_ok || !cols_ok) shape_error(op, a, b);
  return bc;
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd dfdx) {
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x.node()}, [dfdx](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double v) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  for (auto d : shape) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ContractViolation("tensor data length " + std::to_string(values.size()) +
                            " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::row(std::span<const double> values) {
  return from({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::scalar(double v) { return from({1, 1}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->ensure_grad();
  return t;
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() < 2) return 1;
  return shape_size(Shape(s.begin(), s.end() - 1));
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::grad() const& { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  auto& g = node_->ensure_grad();
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(node_->shape, node_->value); }

void Tensor::backward() const {
  if (size() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Contractions

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_error("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
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
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.value[i * k + p];
          if (av == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          const double* grow = G + i * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != w.cols()) shape_error("affine(bias)", w, b);
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (w.rows() != k) shape_error("affine", x, w);
  std::vector<double> out(m * n);
  auto X = x.data();
  auto W = w.data();
  auto Bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    std::copy(Bv.begin(), Bv.end(), row);
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = X[i * k + p];
      if (xv == 0.0) continue;
      const double* wrow = W.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += xv * wrow[j];
    }
  }
  return make_result({m, n}, std::move(out), {x.node(), w.node(), b.node()},
                     [m, k, n](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pw = *self.parents[1];
                       Node& pb = *self.parents[2];
                       const double* G = self.grad.data();
                       if (px.requires_grad) {
                         auto& gx = px.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = G + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double* wrow = pw.value.data() + p * n;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += grow[j] * wrow[j];
                             gx[i * k + p] += acc;
                           }
                         }
                       }
                       if (pw.requires_grad) {
                         auto& gw = pw.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = G + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double xv = px.value[i * k + p];
                             if (xv == 0.0) continue;
                             double* gwrow = gw.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) gwrow[j] += xv * grow[j];
                           }
                         }
                       }
                       if (pb.requires_grad) {
                         auto& gb = pb.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) gb[j] += G[i * n + j];
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Elementwise binary ops with size-1 broadcasting of the right operand

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast bc = broadcast_shape("add", a, b);
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < bc.rows; ++i)
    for (std::size_t j = 0; j < bc.cols; ++j) out[i * bc.cols + j] = A[i * bc.cols + j] + B[bc.b_index(i, j)];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < bc.rows; ++i)
        for (std::size_t j = 0; j < bc.cols; ++j) g[bc.b_index(i, j)] += self.grad[i * bc.cols + j];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast bc = broadcast_shape("sub", a, b);
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < bc.rows; ++i)
    for (std::size_t j = 0; j < bc.cols; ++j) out[i * bc.cols + j] = A[i * bc.cols + j] - B[bc.b_index(i, j)];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < bc.rows; ++i)
        for (std::size_t j = 0; j < bc.cols; ++j) g[bc.b_index(i, j)] -= self.grad[i * bc.cols + j];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = broadcast_shape("mul", a, b);
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < bc.rows; ++i)
    for (std::size_t j = 0; j < bc.cols; ++j) out[i * bc.cols + j] = A[i * bc.cols + j] * B[bc.b_index(i, j)];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < bc.rows; ++i)
        for (std::size_t j = 0; j < bc.cols; ++j)
          g[i * bc.cols + j] += self.grad[i * bc.cols + j] * pb.value[bc.b_index(i, j)];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < bc.rows; ++i)
        for (std::size_t j = 0; j < bc.cols; ++j)
          g[bc.b_index(i, j)] += self.grad[i * bc.cols + j] * pa.value[i * bc.cols + j];
    }
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("minimum", a, b);
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(A[i], B[i]);
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      // ties route the gradient to the left operand
      const bool left = pa.value[i] <= pb.value[i];
      if (left && pa.requires_grad) pa.ensure_grad()[i] += self.grad[i];
      if (!left && pb.requires_grad) pb.ensure_grad()[i] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

// ---------------------------------------------------------------------------
// Row-wise normalizers

Tensor softmax(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.size());
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = X.data() + i * n;
    double* o = out.data() + i * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.size());
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = X.data() + i * n;
    double* o = out.data() + i * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(in[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) o[j] = in[j] - lse;
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += gy[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += gy[j] - std::exp(y[j]) * total;
    }
  });
}

// ---------------------------------------------------------------------------
// Structure

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat: no inputs");
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t n = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_error("concat", parts.front(), p);
    widths.push_back(p.cols());
    n += p.cols();
    parents.push_back(p.node());
  }
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto d = parts[k].data();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(d.data() + i * widths[k], widths[k], out.data() + i * n + offset);
    }
    offset += widths[k];
  }
  return make_result({m, n}, std::move(out), std::move(parents), [m, n, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += self.grad[i * n + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor slice(const Tensor& x, std::size_t col_begin, std::size_t col_end) {
  const std::size_t m = x.rows(), n = x.cols();
  if (col_begin >= col_end || col_end > n) {
    throw ContractViolation("slice: columns [" + std::to_string(col_begin) + ", " +
                            std::to_string(col_end) + ") out of range for shape " +
                            shape_string(x.shape()));
  }
  const std::size_t w = col_end - col_begin;
  std::vector<double> out(m * w);
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(X.data() + i * n + col_begin, w, out.data() + i * w);
  return make_result({m, w}, std::move(out), {x.node()}, [m, n, w, col_begin](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + col_begin + j] += self.grad[i * w + j];
  });
}

Tensor sum(const Tensor& x) {
  auto X = x.data();
  const double total = std::accumulate(X.begin(), X.end(), 0.0);
  return make_result({1, 1}, {total}, {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor row_sum(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m, 0.0);
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += X[i * n + j];
  return make_result({m, 1}, std::move(out), {x.node()}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
  });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> index) {
  const std::size_t m = x.rows(), n = x.cols();
  if (index.size() != m) {
    throw ContractViolation("gather: " + std::to_string(index.size()) + " indices for shape " +
                            shape_string(x.shape()));
  }
  std::vector<double> out(m);
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] >= n) {
      throw ContractViolation("gather: index " + std::to_string(index[i]) + " out of range for shape " +
                              shape_string(x.shape()));
    }
    out[i] = X[i * n + index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({m, 1}, std::move(out), {x.node()}, [n, idx = std::move(idx)](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * n + idx[i]] += self.grad[i];
  });
}

}  // namespace cmbrl::nn
