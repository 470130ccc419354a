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

#include "voxtag/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "binio.hpp"
#include "voxtag/error.hpp"

namespace voxtag::ad {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::size_t numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape, std::size_t count) {
  if (shape.empty() || shape.size() > 2) {
    throw Error(Errc::ShapeMismatch, "rank must be 1 or 2, got " + shape_string(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw Error(Errc::ShapeMismatch, "zero dimension in " + shape_string(shape));
  }
  if (numel(shape) != count) {
    throw Error(Errc::ShapeMismatch, "shape " + shape_string(shape) + " needs " +
                                         std::to_string(numel(shape)) + " values, got " +
                                         std::to_string(count));
  }
}

void check_finite(const Node& n, const char* op) {
  for (double v : n.values) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, std::string("non-finite output of ") + op);
  }
}

std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) { return s.back(); }

// New interior node; requires_grad when any parent does.
NodePtr make_node(Shape shape, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->values.assign(numel(shape), 0.0);
  n->shape = std::move(shape);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  n->parents = std::move(parents);
  return n;
}

Tensor finish(NodePtr n, const char* op) {
  check_finite(*n, op);
  if (!n->requires_grad) {
    n->parents.clear();
    n->backward = nullptr;
  }
  return Tensor(std::move(n));
}

enum class Broadcast { Same, Scalar, Row };

Broadcast broadcast_kind(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::Same;
  if (numel(b) == 1) return Broadcast::Scalar;
  if (rows_of(b) == 1 && cols_of(b) == cols_of(a) && a.size() == 2) return Broadcast::Row;
  throw Error(Errc::ShapeMismatch, std::string(op) + ": cannot broadcast " + shape_string(b) +
                                       " onto " + shape_string(a));
}

// Index into b for element i of a.
std::size_t bidx(Broadcast k, std::size_t i, std::size_t cols) {
  switch (k) {
    case Broadcast::Same: return i;
    case Broadcast::Scalar: return 0;
    case Broadcast::Row: return i % cols;
  }
  return i;
}

}  // namespace

std::size_t Tensor::rows() const { return rows_of(node_->shape); }
std::size_t Tensor::cols() const { return cols_of(node_->shape); }

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  check_shape(shape, values.size());
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  check_finite(*n, "constant");
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  Tensor t = constant(std::move(shape), std::vector<double>(n, 0.0));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

double Tensor::item() const {
  if (size() != 1) throw Error(Errc::ShapeMismatch, "item() needs one element");
  return node_->values[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  const std::size_t m = a.rows(), k = a.cols();
  const std::size_t bk = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (b.rank() != 2 || bk != k) {
    throw Error(Errc::ShapeMismatch, "matmul " + shape_string(a.shape()) + " x " +
                                         shape_string(b.shape()) +
                                         (transpose_b ? "^T" : ""));
  }
  NodePtr out = make_node({m, n}, {a.shared(), b.shared()});
  const double* A = a.node()->values.data();
  const double* B = b.node()->values.data();
  double* C = out->values.data();
  if (transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
        C[i * n + j] = acc;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        if (av == 0.0) continue;
        const double* brow = B + p * n;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  Node* pa = a.node();
  Node* pb = b.node();
  Node* po = out.get();
  out->backward = [pa, pb, po, m, k, n, transpose_b] {
    const double* G = po->grad.data();
    if (pa->requires_grad) {
      pa->ensure_grad();
      double* GA = pa->grad.data();
      const double* B = pb->values.data();
      // dA = G * B^T (or G * B when b was transposed).
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          if (transpose_b) {
            const double* brow = B + j * k;
            for (std::size_t p = 0; p < k; ++p) GA[i * k + p] += g * brow[p];
          } else {
            for (std::size_t p = 0; p < k; ++p) GA[i * k + p] += g * B[p * n + j];
          }
        }
      }
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      double* GB = pb->grad.data();
      const double* A = pa->values.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          if (transpose_b) {
            for (std::size_t j = 0; j < n; ++j) GB[j * k + p] += av * G[i * n + j];
          } else {
            double* gbrow = GB + p * n;
            const double* grow = G + i * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
    }
  };
  return finish(std::move(out), "matmul");
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a.shape(), b.shape(), "add");
  NodePtr out = make_node(a.shape(), {a.shared(), b.shared()});
  const std::size_t cols = a.cols();
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  for (std::size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] + bv[bidx(kind, i, cols)];
  Node* pa = a.node();
  Node* pb = b.node();
  Node* po = out.get();
  out->backward = [pa, pb, po, kind, cols] {
    const auto& g = po->grad;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pb->grad[bidx(kind, i, cols)] += g[i];
    }
  };
  return finish(std::move(out), "add");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a.shape(), b.shape(), "mul");
  NodePtr out = make_node(a.shape(), {a.shared(), b.shared()});
  const std::size_t cols = a.cols();
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  for (std::size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] * bv[bidx(kind, i, cols)];
  Node* pa = a.node();
  Node* pb = b.node();
  Node* po = out.get();
  out->backward = [pa, pb, po, kind, cols] {
    const auto& g = po->grad;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        pa->grad[i] += g[i] * pb->values[bidx(kind, i, cols)];
      }
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        pb->grad[bidx(kind, i, cols)] += g[i] * pa->values[i];
      }
    }
  };
  return finish(std::move(out), "mul");
}

Tensor mul(const Tensor& a, double s) {
  NodePtr out = make_node(a.shape(), {a.shared()});
  const auto& av = a.node()->values;
  for (std::size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] * s;
  Node* pa = a.node();
  Node* po = out.get();
  out->backward = [pa, po, s] {
    pa->ensure_grad();
    for (std::size_t i = 0; i < po->grad.size(); ++i) pa->grad[i] += po->grad[i] * s;
  };
  return finish(std::move(out), "mul");
}

Tensor relu(const Tensor& x) {
  NodePtr out = make_node(x.shape(), {x.shared()});
  const auto& xv = x.node()->values;
  for (std::size_t i = 0; i < xv.size(); ++i) out->values[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Node* px = x.node();
  Node* po = out.get();
  out->backward = [px, po] {
    px->ensure_grad();
    for (std::size_t i = 0; i < po->grad.size(); ++i) {
      if (px->values[i] > 0.0) px->grad[i] += po->grad[i];
    }
  };
  return finish(std::move(out), "relu");
}

Tensor tanh(const Tensor& x) {
  NodePtr out = make_node(x.shape(), {x.shared()});
  const auto& xv = x.node()->values;
  for (std::size_t i = 0; i < xv.size(); ++i) out->values[i] = std::tanh(xv[i]);
  Node* px = x.node();
  Node* po = out.get();
  out->backward = [px, po] {
    px->ensure_grad();
    for (std::size_t i = 0; i < po->grad.size(); ++i) {
      const double y = po->values[i];
      px->grad[i] += po->grad[i] * (1.0 - y * y);
    }
  };
  return finish(std::move(out), "tanh");
}

Tensor softmax(const Tensor& x) {
  NodePtr out = make_node(x.shape(), {x.shared()});
  const std::size_t rows = x.rows(), cols = x.cols();
  const auto& xv = x.node()->values;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double* o = out->values.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  Node* px = x.node();
  Node* po = out.get();
  out->backward = [px, po, rows, cols] {
    px->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = po->values.data() + r * cols;
      const double* g = po->grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
      double* gx = px->grad.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gx[c] += y[c] * (g[c] - dot);
    }
  };
  return finish(std::move(out), "softmax");
}

Tensor log(const Tensor& x) {
  constexpr double kFloor = 1e-300;
  NodePtr out = make_node(x.shape(), {x.shared()});
  const auto& xv = x.node()->values;
  for (std::size_t i = 0; i < xv.size(); ++i) out->values[i] = std::log(std::max(xv[i], kFloor));
  Node* px = x.node();
  Node* po = out.get();
  out->backward = [px, po] {
    px->ensure_grad();
    for (std::size_t i = 0; i < po->grad.size(); ++i) {
      if (px->values[i] > kFloor) px->grad[i] += po->grad[i] / px->values[i];
    }
  };
  return finish(std::move(out), "log");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.size() != cols || bias.size() != cols) {
    throw Error(Errc::ShapeMismatch, "layer_norm: gain and bias need " + std::to_string(cols) +
                                         " values");
  }
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "layer_norm: eps must be positive");
  NodePtr out = make_node(x.shape(), {x.shared(), gain.shared(), bias.shared()});
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.node()->values;
  const auto& gv = gain.node()->values;
  const auto& bv = bias.node()->values;
  const double n = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += in[c];
    mu /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    const double is = 1.0 / std::sqrt(var / n + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[c] - mu) * is;
      (*xhat)[r * cols + c] = h;
      out->values[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  Node* px = x.node();
  Node* pg = gain.node();
  Node* pb = bias.node();
  Node* po = out.get();
  out->backward = [px, pg, pb, po, xhat, inv_std, rows, cols, n] {
    px->ensure_grad();
    pg->ensure_grad();
    pb->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = po->grad.data() + r * cols;
      const double* h = xhat->data() + r * cols;
      double mean_gh = 0.0, mean_ghh = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double gh = g[c] * pg->values[c];
        mean_gh += gh;
        mean_ghh += gh * h[c];
        pg->grad[c] += g[c] * h[c];
        pb->grad[c] += g[c];
      }
      mean_gh /= n;
      mean_ghh /= n;
      double* gx = px->grad.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        gx[c] += (*inv_std)[r] * (g[c] * pg->values[c] - mean_gh - h[c] * mean_ghh);
      }
    }
  };
  return finish(std::move(out), "layer_norm");
}

Tensor mean(const Tensor& x, int axis) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Shape shape;
  if (axis < 0) {
    shape = {1};
  } else if (axis == 0) {
    shape = x.rank() == 2 ? Shape{1, cols} : Shape{cols};
  } else if (axis == 1) {
    shape = Shape{rows, 1};
  } else {
    throw Error(Errc::ShapeMismatch, "mean axis must be -1, 0 or 1");
  }
  NodePtr out = make_node(shape, {x.shared()});
  const auto& xv = x.node()->values;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = xv[r * cols + c];
      if (axis < 0) out->values[0] += v;
      else if (axis == 0) out->values[c] += v;
      else out->values[r] += v;
    }
  }
  const double count = axis < 0 ? static_cast<double>(rows * cols)
                                 : static_cast<double>(axis == 0 ? rows : cols);
  for (double& v : out->values) v /= count;
  Node* px = x.node();
  Node* po = out.get();
  out->backward = [px, po, rows, cols, axis, count] {
    px->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double g = axis < 0 ? po->grad[0] : (axis == 0 ? po->grad[c] : po->grad[r]);
        px->grad[r * cols + c] += g / count;
      }
    }
  };
  return finish(std::move(out), "mean");
}

Tensor sum(const Tensor& x) { return mul(mean(x, -1), static_cast<double>(x.size())); }

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat of nothing");
  if (axis != 0 && axis != 1) throw Error(Errc::ShapeMismatch, "concat axis must be 0 or 1");
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (cols != 0 && p.cols() != cols) throw Error(Errc::ShapeMismatch, "concat column mismatch");
      cols = p.cols();
      rows += p.rows();
    } else {
      if (rows != 0 && p.rows() != rows) throw Error(Errc::ShapeMismatch, "concat row mismatch");
      rows = p.rows();
      cols += p.cols();
    }
  }
  std::vector<NodePtr> parents;
  for (const auto& p : parts) parents.push_back(p.shared());
  NodePtr out = make_node({rows, cols}, parents);
  // Offsets of each part: first row (axis 0) or first column (axis 1).
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto& pv = p.node()->values;
    const std::size_t pr = p.rows(), pc = p.cols();
    for (std::size_t r = 0; r < pr; ++r) {
      for (std::size_t c = 0; c < pc; ++c) {
        const std::size_t dst = axis == 0 ? (off + r) * cols + c : r * cols + off + c;
        out->values[dst] = pv[r * pc + c];
      }
    }
    off += axis == 0 ? pr : pc;
  }
  Node* po = out.get();
  out->backward = [po, offsets, axis, cols] {
    for (std::size_t i = 0; i < po->parents.size(); ++i) {
      Node* p = po->parents[i].get();
      if (!p->requires_grad) continue;
      p->ensure_grad();
      const std::size_t pr = rows_of(p->shape), pc = cols_of(p->shape);
      for (std::size_t r = 0; r < pr; ++r) {
        for (std::size_t c = 0; c < pc; ++c) {
          const std::size_t src =
              axis == 0 ? (offsets[i] + r) * cols + c : r * cols + offsets[i] + c;
          p->grad[r * pc + c] += po->grad[src];
        }
      }
    }
  };
  return finish(std::move(out), "concat");
}

Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids) {
  if (table.rank() != 2) throw Error(Errc::ShapeMismatch, "embedding table must be rank 2");
  if (ids.empty()) throw Error(Errc::ShapeMismatch, "embedding of no ids");
  const std::size_t vocab = table.rows(), dim = table.cols();
  for (std::int64_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw Error(Errc::InvalidArgument, "embedding id " + std::to_string(id) + " out of range");
    }
  }
  NodePtr out = make_node({ids.size(), dim}, {table.shared()});
  const auto& tv = table.node()->values;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[r]) * dim),
                dim, out->values.begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  Node* pt = table.node();
  Node* po = out.get();
  std::vector<std::int64_t> rows(ids.begin(), ids.end());
  out->backward = [pt, po, rows = std::move(rows), dim] {
    pt->ensure_grad();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t base = static_cast<std::size_t>(rows[r]) * dim;
      for (std::size_t c = 0; c < dim; ++c) pt->grad[base + c] += po->grad[r * dim + c];
    }
  };
  return finish(std::move(out), "embedding");
}

Tensor grl(const Tensor& x, double lambda) {
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "GRL lambda must be >= 0");
  NodePtr out = make_node(x.shape(), {x.shared()});
  out->values = x.node()->values;
  Node* px = x.node();
  Node* po = out.get();
  out->backward = [px, po, lambda] {
    px->ensure_grad();
    for (std::size_t i = 0; i < po->grad.size(); ++i) px->grad[i] += -lambda * po->grad[i];
  };
  return finish(std::move(out), "grl");
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(Errc::NonScalarLoss, "backward needs a scalar loss");
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->values.size(), 0.0);
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
  for (Node* n : order) {
    for (double g : n->grad) {
      if (!std::isfinite(g)) throw Error(Errc::NonFinite, "non-finite gradient");
    }
  }
}

double lambda_at(const LambdaSchedule& schedule, std::int64_t updates_done) {
  if (schedule.total_updates <= 0) {
    throw Error(Errc::InvalidArgument, "total_updates must be positive");
  }
  if (updates_done < 0 || updates_done > schedule.total_updates) {
    throw Error(Errc::OutOfRangeStep, "update " + std::to_string(updates_done) + " outside [0, " +
                                          std::to_string(schedule.total_updates) + "]");
  }
  if (schedule.fixed_lambda) return *schedule.fixed_lambda;
  const double p =
      static_cast<double>(updates_done) / static_cast<double>(schedule.total_updates);
  return 2.0 / (1.0 + std::exp(-schedule.gamma * p)) - 1.0;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  out.write("VXCK", 4);
  voxtag::detail::put_u32(out, static_cast<std::uint32_t>(ckpt.size()));
  for (const auto& p : ckpt) {
    if (numel(p.shape) != p.values.size()) {
      throw Error(Errc::ShapeMismatch, "parameter " + p.name + " has inconsistent shape");
    }
    voxtag::detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    voxtag::detail::put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) voxtag::detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.values) voxtag::detail::put_f64(out, v);
  }
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "VXCK") {
    throw Error(Errc::MalformedHeader, "bad checkpoint magic in " + path.string());
  }
  const std::uint32_t count = voxtag::detail::get_u32(in);
  Checkpoint ckpt;
  ckpt.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray p;
    const std::uint32_t len = voxtag::detail::get_u32(in);
    p.name.resize(len);
    if (!in.read(p.name.data(), len)) throw Error(Errc::MalformedHeader, "truncated name");
    const std::uint32_t rank = voxtag::detail::get_u32(in);
    if (rank == 0 || rank > 8) throw Error(Errc::MalformedHeader, "implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) p.shape.push_back(voxtag::detail::get_u32(in));
    p.values.resize(numel(p.shape));
    for (double& v : p.values) v = voxtag::detail::get_f64(in);
    ckpt.push_back(std::move(p));
  }
  return ckpt;
}

}  // namespace voxtag::ad
