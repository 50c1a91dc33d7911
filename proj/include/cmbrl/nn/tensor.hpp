// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensors with a reverse-mode gradient tape.
//
// Every op result keeps shared ownership of its inputs and a closure that
// accumulates input gradients, so the graph lives exactly as long as the
// tensors built on it. Ops treat tensors as matrices: the last dimension is
// the column count and all leading dimensions collapse into rows.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cmbrl::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor row(std::span<const double> values);
  static Tensor scalar(double v);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return node_->value.size(); }

  /// Views into the storage; not available on temporaries, whose storage
  /// may die with them.
  std::span<const double> data() const& { return node_->value; }
  std::span<const double> data() const&& = delete;
  std::span<double> mutable_data() & { return node_->value; }
  std::span<double> mutable_data() && = delete;
  std::vector<double> values() const { return node_->value; }
  /// Gradient buffer; zeros if nothing has been accumulated yet.
  std::span<const double> grad() const&;
  std::span<const double> grad() const&& = delete;
  std::span<double> mutable_grad() & { return node_->ensure_grad(); }
  std::span<double> mutable_grad() && = delete;
  void zero_grad();

  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  /// Same values, no history.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  /// Reverse-mode sweep from this scalar. Throws UsageError otherwise.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// Disables tape recording on the current thread while alive.
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

// ---------------------------------------------------------------------------
// Primitives. Shape errors throw ContractViolation listing both shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
/// x W + b with b a row vector; equal to add(matmul(x, w), b).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

/// Elementwise; `b` may broadcast along any dimension of size 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

/// Row-wise, max-shifted.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts);  // along columns
Tensor slice(const Tensor& x, std::size_t col_begin, std::size_t col_end);

Tensor sum(const Tensor& x);       // -> [1, 1]
Tensor mean(const Tensor& x);      // -> [1, 1]
Tensor row_sum(const Tensor& x);   // -> [rows, 1]
/// out[i] = x[i, index[i]] -> [rows, 1]
Tensor gather(const Tensor& x, std::span<const std::size_t> index);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace cmbrl::nn
