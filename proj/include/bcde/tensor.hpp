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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bcde {

using Shape = std::vector<std::size_t>;
using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

/// Raised when operand shapes do not fit a primitive's signature.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a primitive is evaluated outside its domain (log of a
/// non-positive value, a non-finite result).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tape;

/// Dense row-major array of doubles. Storage is immutable and shared, so
/// copies are cheap. A tensor produced by a primitive with at least one
/// tape-attached input is itself attached to that tape.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data_->size(); }

  std::span<const double> values() const { return *data_; }
  const std::shared_ptr<const std::vector<double>>& storage() const { return data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const;
  /// Value of a single-element tensor.
  double item() const;

  bool attached() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }
  /// Same values, no tape attachment.
  Tensor detach() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Insertion-ordered collection of uniquely named parameters.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);
  bool contains(std::string_view name) const;
  const Parameter& get(std::string_view name) const;
  Parameter& get(std::string_view name);
  void set_value(std::string_view name, Tensor value);

  std::size_t size() const { return params_.size(); }
  std::vector<std::string> names() const;
  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }
  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Gradients = std::map<std::string, Tensor>;

/// Define-by-run record of primitive applications. Rebuilt for every
/// gradient evaluation; not copyable because attached tensors point at it.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out, Tape& tape)>;

  struct Record {
    std::string primitive;
    std::vector<NodeId> inputs;
    NodeId output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Attached leaf for a parameter. Watching the same name twice returns the
  /// same node.
  Tensor watch(const Parameter& param);
  /// Anonymous differentiable leaf.
  Tensor leaf(const Tensor& value);

  Tensor record(std::string primitive, const std::vector<const Tensor*>& inputs, Shape shape,
                std::vector<double> values, BackwardFn backward);

  std::size_t num_records() const { return records_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }
  const std::vector<Record>& records() const { return records_; }
  const std::vector<std::pair<std::string, NodeId>>& watched() const { return watched_; }

  /// Adds `grad` into the gradient buffer of `node`; used by backward rules.
  void accumulate(NodeId node, std::span<const double> grad);

 private:
  friend Gradients backward(Tape& tape, const Tensor& root);

  struct Node {
    Shape shape;
    std::shared_ptr<const std::vector<double>> value;
  };

  void run_backward(const Tensor& root);

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::pair<std::string, NodeId>> watched_;
  std::unordered_map<std::string, NodeId> watch_index_;
  std::vector<NodeId> consumed_roots_;
};

/// Gradient of a scalar attached root with respect to every watched
/// parameter of its tape. Parameters the root does not depend on map to
/// zeros of matching shape.
Gradients backward(Tape& tape, const Tensor& root);

/// Gradient with respect to the given parameters; any not watched on the
/// tape map to zeros.
Gradients backward(Tape& tape, const Tensor& root, const ParameterStore& params);

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise operations broadcast an operand whose shape
// is a suffix of the other's (scalar and row broadcast included).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor negate(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// max(x,0) + ln(1 + e^{-|x|}).
Tensor softplus(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Subgradient at exactly zero is zero.
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
/// Clamps into [lo, hi]; gradient passes only strictly inside the interval.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor mean(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

/// Multiplies by a detached constant.
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return negate(a); }

enum class Primitive {
  matmul, add, sub, mul, negate, exp, log, sigmoid, softplus, tanh, relu, square,
  clamp, sum, mean, concat, slice
};

struct PrimitiveArgs {
  std::vector<std::size_t> axes;  // sum, mean (empty: all axes)
  std::size_t axis = 0;           // concat, slice
  std::size_t begin = 0;          // slice
  std::size_t end = 0;            // slice
  double lo = 0.0;                // clamp
  double hi = 0.0;                // clamp
};

Primitive primitive_from_name(std::string_view name);
std::string_view primitive_name(Primitive p);
const std::vector<Primitive>& all_primitives();

/// Name-dispatched entry point over the primitive set.
Tensor apply_primitive(Primitive p, const std::vector<Tensor>& inputs,
                       const PrimitiveArgs& args = {});
Tensor apply_primitive(std::string_view name, const std::vector<Tensor>& inputs,
                       const PrimitiveArgs& args = {});

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  double max_rel_error() const;
};

using ScalarFunction = std::function<Tensor(Tape&)>;

/// Compares reverse-mode gradients of `f` against central differences
/// (f(p+h) - f(p-h)) / 2h for every element of every listed parameter.
/// Relative error is |a-b| / max(1, |a|, |b|).
GradCheckReport grad_check(const ScalarFunction& f, ParameterStore& params,
                           const std::vector<std::string>& names, double h, double tol);

}  // namespace bcde
