#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "lmseg/params.hpp"
#include "lmseg/rng.hpp"
#include "lmseg/tensor.hpp"

namespace lmseg {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid for the
// lifetime of its tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode record. Nodes are appended in evaluation order, so the node
// list is always topologically sorted.
class Tape {
 public:
  // Receives the gradient flowing into a node and the node's own value;
  // pushes input gradients through Tape::grad_sink().
  using BackwardFn =
      std::function<void(Tape&, const Tensor& upstream, const Tensor& output)>;

  // A tape built with record = false keeps values only; backward() is then
  // unavailable. Used for inference.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf that receives a gradient.
  Var variable(Tensor value);
  // Leaf bound to a stored parameter. Repeated calls for the same id return
  // the same node.
  Var param(const ParamStore& store, ParamId id);
  // Leaf holding one row of a matrix parameter (embedding lookup). Its
  // gradient is scattered back into that row only.
  Var param_row(const ParamStore& store, ParamId id, std::size_t row);

  // Appends an operation result. `inputs` must already be on this tape.
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Gradient of the last backward() target with respect to node id; zero
  // tensor if nothing flowed into it.
  Tensor grad(Var v) const;
  // Mutable gradient buffer of an input, or nullptr when the input does not
  // need a gradient.
  Tensor* grad_sink(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  bool recording() const { return record_; }

  // Adds the gradients of all bound parameters into grads.
  void accumulate(Gradients& grads) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<ParamId> param;
    std::size_t param_row = 0;
    bool is_row = false;
  };

  Var append(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<ParamId, std::size_t> param_nodes_;
  std::unordered_map<std::uint64_t, std::size_t> row_nodes_;
  std::vector<std::size_t> bound_;  // every node with a param binding
  const ParamStore* store_ = nullptr;
  bool record_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// Differentiable operations. Vectors are rank-1 tensors, matrices rank-2.
// Every operation throws DimensionError on incompatible shapes.

Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise (Hadamard) product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var matmul(Var a, Var b);   // [m x k] * [k x n]
Var matvec(Var m, Var x);   // [m x k] * [k] -> [m]
Var vecmat(Var x, Var m);   // [k]^T * [k x n] -> [n]
Var dot(Var a, Var b);      // -> [1]
Var sum(Var a);             // -> [1]

Var sigmoid(Var a);
Var tanh(Var a);

// Concatenation along the last axis. Vectors join end to end; matrices
// with equal row counts join column-wise.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var v, std::size_t begin, std::size_t end);  // vector [begin, end)
Var row(Var m, std::size_t r);                         // -> vector
Var rows(Var m, std::size_t begin, std::size_t end);   // -> matrix
Var stack(std::span<const Var> vectors);               // -> [count x dim]
Var repeat(Var v, std::size_t count);                  // -> [count x dim]
Var max_rows(Var m);                                   // column-wise max

// Numerically stable log-softmax over a vector (DomainError when empty).
Var log_softmax(Var v);
Var pick(Var v, std::size_t index);  // -> [1]

// Inverted dropout: in training mode each unit is zeroed with probability
// ratio and survivors are scaled by 1 / (1 - ratio). Identity otherwise.
Var dropout(Var x, double ratio, bool training, Rng& rng);

// Plain (non-differentiable) helper, shared with the decoders.
std::vector<double> log_softmax_values(std::span<const double> scores);

}  // namespace lmseg
