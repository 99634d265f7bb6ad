/* Copyright 2026 The BCDE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include "bcde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bcde {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : shape_{}, data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape_));
  }
  if (shape_numel(shape_) != values.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col) requires a matrix, got " + shape_to_string(shape_));
  return (*data_)[row * shape_[1] + col];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single element, got " + shape_to_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = kNoNode;
  return t;
}

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), value.detach(), trainable});
  return params_.back();
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

const Parameter& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return params_[it->second];
}

Parameter& ParameterStore::get(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).get(name));
}

void ParameterStore::set_value(std::string_view name, Tensor value) {
  Parameter& p = get(name);
  if (p.value.shape() != value.shape()) {
    throw ShapeError("parameter " + p.name + " has shape " + shape_to_string(p.value.shape()) +
                     ", cannot assign " + shape_to_string(value.shape()));
  }
  p.value = value.detach();
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::watch(const Parameter& param) {
  auto it = watch_index_.find(param.name);
  if (it != watch_index_.end()) {
    Tensor t = param.value.detach();
    t.data_ = nodes_[it->second].value;
    t.shape_ = nodes_[it->second].shape;
    t.tape_ = this;
    t.node_ = it->second;
    return t;
  }
  Tensor t = leaf(param.value);
  watch_index_.emplace(param.name, t.node_);
  watched_.emplace_back(param.name, t.node_);
  return t;
}

Tensor Tape::leaf(const Tensor& value) {
  Tensor t = value.detach();
  t.tape_ = this;
  t.node_ = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{t.shape_, t.data_});
  return t;
}

Tensor Tape::record(std::string primitive, const std::vector<const Tensor*>& inputs, Shape shape,
                    std::vector<double> values, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(values));
  out.tape_ = this;
  out.node_ = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{out.shape_, out.data_});
  Record rec{std::move(primitive), {}, out.node_, std::move(backward)};
  for (const Tensor* in : inputs) rec.inputs.push_back(in->node_);
  records_.push_back(std::move(rec));
  return out;
}

void Tape::accumulate(NodeId node, std::span<const double> grad) {
  if (node == kNoNode) return;
  auto& buf = grads_[static_cast<std::size_t>(node)];
  if (buf.empty()) {
    buf.assign(grad.begin(), grad.end());
    return;
  }
  for (std::size_t i = 0; i < grad.size(); ++i) buf[i] += grad[i];
}

void Tape::run_backward(const Tensor& root) {
  if (root.tape_ != this || root.node_ == kNoNode) {
    throw std::invalid_argument("backward: root is not attached to this tape");
  }
  if (root.numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " + shape_to_string(root.shape()));
  }
  if (std::find(consumed_roots_.begin(), consumed_roots_.end(), root.node_) != consumed_roots_.end()) {
    throw std::logic_error("backward: tape already consumed for this root");
  }
  consumed_roots_.push_back(root.node_);

  grads_.assign(nodes_.size(), {});
  grads_[static_cast<std::size_t>(root.node_)] = {1.0};
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output > root.node_) continue;
    const auto& g = grads_[static_cast<std::size_t>(it->output)];
    if (g.empty()) continue;
    it->backward(g, *this);
  }
}

Gradients backward(Tape& tape, const Tensor& root) {
  tape.run_backward(root);
  Gradients out;
  for (const auto& [name, node] : tape.watched_) {
    const auto& g = tape.grads_[static_cast<std::size_t>(node)];
    const Shape& shape = tape.nodes_[static_cast<std::size_t>(node)].shape;
    out.emplace(name, g.empty() ? Tensor::zeros(shape) : Tensor(shape, g));
  }
  return out;
}

Gradients backward(Tape& tape, const Tensor& root, const ParameterStore& params) {
  Gradients grads = backward(tape, root);
  Gradients out;
  for (const auto& p : params) {
    if (!p.trainable) continue;
    auto it = grads.find(p.name);
    out.emplace(p.name, it != grads.end() ? it->second : Tensor::zeros(p.value.shape()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitive helpers

namespace {

Tape* common_tape(const std::vector<const Tensor*>& inputs, std::string_view name) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->attached()) continue;
    if (tape && tape != t->tape()) {
      throw std::invalid_argument(std::string(name) + ": inputs attached to different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tensor finish(std::string_view name, const std::vector<const Tensor*>& inputs, Shape shape,
              std::vector<double> values, Tape::BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError(std::string(name) + ": non-finite result");
  }
  Tape* tape = common_tape(inputs, name);
  if (!tape) return Tensor(std::move(shape), std::move(values));
  return tape->record(std::string(name), inputs, std::move(shape), std::move(values),
                      std::move(backward));
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Resolves the output shape of a broadcasting binary op.
Shape broadcast_shape(std::string_view name, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1 || is_suffix(b.shape(), a.shape())) return a.shape();
  if (a.numel() == 1 || is_suffix(a.shape(), b.shape())) return b.shape();
  throw ShapeError(std::string(name) + ": cannot broadcast " + shape_to_string(a.shape()) +
                   " with " + shape_to_string(b.shape()));
}

// Sums a full-size gradient down to an operand of `n` elements broadcast by
// modulo indexing.
std::vector<double> reduce_modulo(std::span<const double> g, std::size_t n) {
  if (g.size() == n) return {g.begin(), g.end()};
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) out[i % n] += g[i];
  return out;
}

template <class Fwd, class Grad>
Tensor unary(std::string_view name, const Tensor& a, Fwd fwd, Grad grad) {
  const auto src = a.values();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = fwd(src[i]);
  auto in_store = a.storage();
  const NodeId in_node = a.node();
  auto out_copy = std::make_shared<const std::vector<double>>(out);
  return finish(name, {&a}, a.shape(), std::move(out),
                [in_store, in_node, out_copy, grad](std::span<const double> g, Tape& tape) {
                  std::vector<double> gi(g.size());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    gi[i] = g[i] * grad((*in_store)[i], (*out_copy)[i]);
                  }
                  tape.accumulate(in_node, gi);
                });
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1) || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.rank() == 2 ? b.dim(1) : 1;
  const double* A = a.values().data();
  const double* B = b.values().data();
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  Shape out_shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
  auto sa = a.storage();
  auto sb = b.storage();
  const NodeId na = a.node(), nb = b.node();
  return finish("matmul", {&a, &b}, std::move(out_shape), std::move(c),
                [sa, sb, na, nb, m, k, n](std::span<const double> g, Tape& tape) {
                  const double* A = sa->data();
                  const double* B = sb->data();
                  if (na != kNoNode) {
                    std::vector<double> ga(m * k, 0.0);
                    for (std::size_t i = 0; i < m; ++i) {
                      const double* grow = g.data() + i * n;
                      for (std::size_t p = 0; p < k; ++p) {
                        const double* brow = B + p * n;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[i * k + p] = acc;
                      }
                    }
                    tape.accumulate(na, ga);
                  }
                  if (nb != kNoNode) {
                    std::vector<double> gb(k * n, 0.0);
                    for (std::size_t i = 0; i < m; ++i) {
                      const double* grow = g.data() + i * n;
                      for (std::size_t p = 0; p < k; ++p) {
                        const double av = A[i * k + p];
                        if (av == 0.0) continue;
                        double* gbrow = gb.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                      }
                    }
                    tape.accumulate(nb, gb);
                  }
                });
}

namespace {

enum class BinaryKind { add, sub, mul };

Tensor binary(std::string_view name, BinaryKind kind, const Tensor& a, const Tensor& b) {
  Shape shape = broadcast_shape(name, a, b);
  const std::size_t n = shape_numel(shape);
  const std::size_t na_el = a.numel(), nb_el = b.numel();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i % na_el], y = bv[i % nb_el];
    switch (kind) {
      case BinaryKind::add: out[i] = x + y; break;
      case BinaryKind::sub: out[i] = x - y; break;
      case BinaryKind::mul: out[i] = x * y; break;
    }
  }
  auto sa = a.storage();
  auto sb = b.storage();
  const NodeId ida = a.node(), idb = b.node();
  return finish(name, {&a, &b}, std::move(shape), std::move(out),
                [kind, sa, sb, ida, idb, na_el, nb_el](std::span<const double> g, Tape& tape) {
                  if (ida != kNoNode) {
                    if (kind == BinaryKind::mul) {
                      std::vector<double> full(g.size());
                      for (std::size_t i = 0; i < g.size(); ++i) full[i] = g[i] * (*sb)[i % nb_el];
                      tape.accumulate(ida, reduce_modulo(full, na_el));
                    } else {
                      tape.accumulate(ida, reduce_modulo(g, na_el));
                    }
                  }
                  if (idb != kNoNode) {
                    std::vector<double> full(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      switch (kind) {
                        case BinaryKind::add: full[i] = g[i]; break;
                        case BinaryKind::sub: full[i] = -g[i]; break;
                        case BinaryKind::mul: full[i] = g[i] * (*sa)[i % na_el]; break;
                      }
                    }
                    tape.accumulate(idb, reduce_modulo(full, nb_el));
                  }
                });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinaryKind::mul, a, b); }

Tensor scale(const Tensor& a, double factor) { return mul(a, Tensor::scalar(factor)); }

Tensor negate(const Tensor& a) {
  return unary("negate", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw DomainError("log: input must be strictly positive");
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary("softplus", a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes_in) {
  const std::size_t r = a.rank();
  std::vector<bool> reduce(r, axes_in.empty());
  for (std::size_t ax : axes_in) {
    if (ax >= r) {
      throw ShapeError("sum: axis " + std::to_string(ax) + " out of range for " +
                       shape_to_string(a.shape()));
    }
    reduce[ax] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < r; ++i) {
    if (!reduce[i]) out_shape.push_back(a.shape()[i]);
  }
  // Output index of every input element.
  const std::size_t n = a.numel();
  auto map = std::make_shared<std::vector<std::size_t>>(n);
  {
    std::vector<std::size_t> out_stride(r, 0);
    std::size_t s = 1;
    for (std::size_t i = r; i-- > 0;) {
      if (!reduce[i]) {
        out_stride[i] = s;
        s *= a.shape()[i];
      }
    }
    std::vector<std::size_t> coord(r, 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
      std::size_t o = 0;
      for (std::size_t i = 0; i < r; ++i) o += coord[i] * out_stride[i];
      (*map)[flat] = o;
      for (std::size_t i = r; i-- > 0;) {
        if (++coord[i] < a.shape()[i]) break;
        coord[i] = 0;
      }
    }
  }
  std::vector<double> out(shape_numel(out_shape), 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[(*map)[i]] += av[i];
  const NodeId id = a.node();
  return finish("sum", {&a}, std::move(out_shape), std::move(out),
                [map, id, n](std::span<const double> g, Tape& tape) {
                  std::vector<double> gi(n);
                  for (std::size_t i = 0; i < n; ++i) gi[i] = g[(*map)[i]];
                  tape.accumulate(id, gi);
                });
}

Tensor sum(const Tensor& a) { return sum(a, {}); }

Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes) {
  std::size_t count = 1;
  if (axes.empty()) {
    count = a.numel();
  } else {
    for (std::size_t ax : axes) count *= a.dim(ax);
  }
  return scale(sum(a, axes), 1.0 / static_cast<double>(count));
}

Tensor mean(const Tensor& a) { return mean(a, {}); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    out_shape[axis] += s[axis];
    s[axis] = first[axis];
    if (s != first) {
      throw ShapeError("concat: incompatible shapes " + shape_to_string(first) + " and " +
                       shape_to_string(p.shape()));
    }
  }
  const AxisSplit os = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const AxisSplit ps = split_axis(p.shape(), axis);
    const auto pv = p.values();
    const std::size_t block = ps.len * ps.inner;
    for (std::size_t o = 0; o < ps.outer; ++o) {
      std::copy_n(pv.data() + o * block, block, out.data() + o * os.len * os.inner + off * os.inner);
    }
    off += ps.len;
  }
  std::vector<const Tensor*> inputs;
  std::vector<NodeId> ids;
  std::vector<AxisSplit> splits;
  for (const auto& p : parts) {
    inputs.push_back(&p);
    ids.push_back(p.node());
    splits.push_back(split_axis(p.shape(), axis));
  }
  return finish("concat", inputs, std::move(out_shape), std::move(out),
                [ids, splits, offsets, os](std::span<const double> g, Tape& tape) {
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (ids[k] == kNoNode) continue;
                    const AxisSplit& ps = splits[k];
                    const std::size_t block = ps.len * ps.inner;
                    std::vector<double> gi(ps.outer * block);
                    for (std::size_t o = 0; o < ps.outer; ++o) {
                      std::copy_n(g.data() + o * os.len * os.inner + offsets[k] * os.inner, block,
                                  gi.data() + o * block);
                    }
                    tape.accumulate(ids[k], gi);
                  }
                });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    throw ShapeError("slice: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " of " + shape_to_string(a.shape()));
  }
  const AxisSplit is = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * is.inner;
  std::vector<double> out(is.outer * block);
  const auto av = a.values();
  for (std::size_t o = 0; o < is.outer; ++o) {
    std::copy_n(av.data() + o * is.len * is.inner + begin * is.inner, block, out.data() + o * block);
  }
  const NodeId id = a.node();
  const std::size_t n = a.numel();
  return finish("slice", {&a}, std::move(out_shape), std::move(out),
                [id, is, begin, block, n](std::span<const double> g, Tape& tape) {
                  std::vector<double> gi(n, 0.0);
                  for (std::size_t o = 0; o < is.outer; ++o) {
                    std::copy_n(g.data() + o * block, block,
                                gi.data() + o * is.len * is.inner + begin * is.inner);
                  }
                  tape.accumulate(id, gi);
                });
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

struct PrimitiveEntry {
  Primitive p;
  std::string_view name;
};

constexpr PrimitiveEntry kPrimitives[] = {
    {Primitive::matmul, "matmul"},   {Primitive::add, "add"},       {Primitive::sub, "sub"},
    {Primitive::mul, "mul"},         {Primitive::negate, "negate"}, {Primitive::exp, "exp"},
    {Primitive::log, "log"},         {Primitive::sigmoid, "sigmoid"},
    {Primitive::softplus, "softplus"}, {Primitive::tanh, "tanh"},   {Primitive::relu, "relu"},
    {Primitive::square, "square"},   {Primitive::clamp, "clamp"},   {Primitive::sum, "sum"},
    {Primitive::mean, "mean"},       {Primitive::concat, "concat"}, {Primitive::slice, "slice"},
};

void require_arity(std::string_view name, const std::vector<Tensor>& inputs, std::size_t n) {
  if (inputs.size() != n) {
    throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(n) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
}

}  // namespace

Primitive primitive_from_name(std::string_view name) {
  for (const auto& e : kPrimitives) {
    if (e.name == name) return e.p;
  }
  throw std::invalid_argument("unknown primitive: " + std::string(name));
}

std::string_view primitive_name(Primitive p) {
  for (const auto& e : kPrimitives) {
    if (e.p == p) return e.name;
  }
  return "?";
}

const std::vector<Primitive>& all_primitives() {
  static const std::vector<Primitive> all = [] {
    std::vector<Primitive> v;
    for (const auto& e : kPrimitives) v.push_back(e.p);
    return v;
  }();
  return all;
}

Tensor apply_primitive(Primitive p, const std::vector<Tensor>& in, const PrimitiveArgs& args) {
  const std::string_view name = primitive_name(p);
  switch (p) {
    case Primitive::matmul: require_arity(name, in, 2); return matmul(in[0], in[1]);
    case Primitive::add: require_arity(name, in, 2); return add(in[0], in[1]);
    case Primitive::sub: require_arity(name, in, 2); return sub(in[0], in[1]);
    case Primitive::mul: require_arity(name, in, 2); return mul(in[0], in[1]);
    case Primitive::negate: require_arity(name, in, 1); return negate(in[0]);
    case Primitive::exp: require_arity(name, in, 1); return exp(in[0]);
    case Primitive::log: require_arity(name, in, 1); return log(in[0]);
    case Primitive::sigmoid: require_arity(name, in, 1); return sigmoid(in[0]);
    case Primitive::softplus: require_arity(name, in, 1); return softplus(in[0]);
    case Primitive::tanh: require_arity(name, in, 1); return tanh(in[0]);
    case Primitive::relu: require_arity(name, in, 1); return relu(in[0]);
    case Primitive::square: require_arity(name, in, 1); return square(in[0]);
    case Primitive::clamp: require_arity(name, in, 1); return clamp(in[0], args.lo, args.hi);
    case Primitive::sum: require_arity(name, in, 1); return sum(in[0], args.axes);
    case Primitive::mean: require_arity(name, in, 1); return mean(in[0], args.axes);
    case Primitive::concat: return concat(in, args.axis);
    case Primitive::slice: require_arity(name, in, 1); return slice(in[0], args.axis, args.begin, args.end);
  }
  throw std::invalid_argument("unhandled primitive");
}

Tensor apply_primitive(std::string_view name, const std::vector<Tensor>& inputs,
                       const PrimitiveArgs& args) {
  return apply_primitive(primitive_from_name(name), inputs, args);
}

// ---------------------------------------------------------------------------
// Gradient check

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

GradCheckReport grad_check(const ScalarFunction& f, ParameterStore& params,
                           const std::vector<std::string>& names, double h, double tol) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  Gradients analytic;
  {
    Tape tape;
    Tensor root = f(tape);
    analytic = backward(tape, root, params);
  }
  auto eval = [&] {
    Tape tape;
    return f(tape).item();
  };

  GradCheckReport report;
  for (const auto& name : names) {
    Parameter& p = params.get(name);
    const Tensor original = p.value;
    const auto& a = analytic.at(name);
    GradCheckEntry entry{name};
    std::vector<double> work(original.values().begin(), original.values().end());
    for (std::size_t i = 0; i < work.size(); ++i) {
      const double x0 = work[i];
      work[i] = x0 + h;
      p.value = Tensor(original.shape(), work);
      const double fp = eval();
      work[i] = x0 - h;
      p.value = Tensor(original.shape(), work);
      const double fm = eval();
      work[i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double an = a[i];
      const double rel = std::abs(an - numeric) / std::max({1.0, std::abs(an), std::abs(numeric)});
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
      }
    }
    p.value = original;
    entry.passed = entry.max_rel_error <= tol;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace bcde
