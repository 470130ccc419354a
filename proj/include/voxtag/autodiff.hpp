// Copyright 2026 The voxtag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voxtag::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;

  bool is_leaf() const noexcept { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Handle to a node of the dynamic tape. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  /// Leaf without gradient. Throws ShapeMismatch when sizes disagree.
  static Tensor constant(Shape shape, std::vector<double> values);
  /// Leaf that accumulates gradient.
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }
  /// Rows and columns of a rank-2 tensor; a rank-1 tensor is one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node_->values; }
  std::span<double> mutable_values() { return node_->values; }
  /// Empty until a backward pass reaches this tensor.
  std::span<const double> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  void zero_grad();

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Primitive operations. Shapes are rank 1 or 2; a rank-1 tensor of length n
// behaves as a 1 x n row where a matrix is expected.

/// [m x k] * [k x n]. With `transpose_b`, b is [n x k] and used as b^T.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);
/// Elementwise; `b` may also be a scalar or a row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Softmax along the last axis.
Tensor softmax(const Tensor& x);
/// Natural log, inputs clamped below at 1e-300.
Tensor log(const Tensor& x);
/// Each row normalized to zero mean and unit variance, then scaled by
/// `gain` and shifted by `bias` (both of length cols).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Mean over axis 0 (rows -> one row), axis 1 (columns -> one column) or,
/// with axis < 0, every element (-> scalar).
Tensor mean(const Tensor& x, int axis);
/// Sum of every element, as mean(x, -1) * size.
Tensor sum(const Tensor& x);
/// Concatenation along axis 0 (stack rows) or 1 (join columns).
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Rows of `table` picked by `ids`. Throws InvalidArgument for an id out of range.
Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids);

/// Gradient reversal: identity forward, upstream gradient times -lambda
/// backward. Throws InvalidArgument for lambda < 0.
Tensor grl(const Tensor& x, double lambda);

/// Reverse topological pass from a scalar `loss`. Leaf gradients accumulate
/// across calls; intermediate gradients are recomputed each call. Throws
/// NonScalarLoss.
void backward(const Tensor& loss);

struct LambdaSchedule {
  double gamma = 10.0;
  std::int64_t total_updates = 1;
  std::optional<double> fixed_lambda;
};

/// fixed_lambda if set, else 2 / (1 + exp(-gamma p)) - 1 with
/// p = updates_done / total_updates. Throws OutOfRangeStep.
double lambda_at(const LambdaSchedule& schedule, std::int64_t updates_done);

/// Named parameter values, detached from any tape.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

using Checkpoint = std::vector<NamedArray>;

/// Little-endian "VXCK", u32 count, then per entry: u32 name length, name
/// bytes, u32 rank, u32 dims, f64 values.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace voxtag::ad
