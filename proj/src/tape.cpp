#include "lmseg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmseg/errors.hpp"

namespace lmseg {

Var Tape::append(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return append(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return append(std::move(n));
}

Var Tape::param(const ParamStore& store, ParamId id) {
  if (store_ != nullptr && store_ != &store)
    throw ContractError("a tape can bind parameters of one store only");
  store_ = &store;
  if (auto it = param_nodes_.find(id); it != param_nodes_.end())
    return Var(this, it->second);
  Node n;
  n.value = store[id].value;
  n.requires_grad = record_;
  n.param = id;
  Var v = append(std::move(n));
  param_nodes_.emplace(id, v.id());
  bound_.push_back(v.id());
  return v;
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& in : inputs) {
      if (&in.tape() != this) throw ContractError("operand belongs to another tape");
      if (nodes_[in.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return append(std::move(n));
}

Var Tape::param_row(const ParamStore& store, ParamId id, std::size_t r) {
  if (store_ != nullptr && store_ != &store)
    throw ContractError("a tape can bind parameters of one store only");
  store_ = &store;
  const Tensor& m = store[id].value;
  if (m.rank() != 2 || r >= m.rows())
    throw DimensionError("param_row: row " + std::to_string(r) + " outside " +
                         shape_string(m.shape()) + " of '" + store[id].name + "'");
  const std::uint64_t key = (static_cast<std::uint64_t>(id) << 40) | r;
  if (auto it = row_nodes_.find(key); it != row_nodes_.end()) return Var(this, it->second);
  const std::size_t n = m.cols();
  Node node;
  node.value = Tensor(Shape{n}, std::vector<double>(m.data() + r * n, m.data() + (r + 1) * n));
  node.requires_grad = record_;
  node.param = id;
  node.param_row = r;
  node.is_row = true;
  Var v = append(std::move(node));
  row_nodes_.emplace(key, v.id());
  bound_.push_back(v.id());
  return v;
}

void Tape::backward(Var loss) {
  if (!record_) throw ContractError("backward() on a non-recording tape");
  if (&loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (loss.size() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(loss.shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[loss.id()].grad = Tensor::zeros_like(nodes_[loss.id()].value);
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.backward || n.grad.empty()) continue;
    // The closure may allocate grads of earlier nodes, never of node k, so
    // holding a reference to n.grad is safe.
    n.backward(*this, n.grad, n.value);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Tensor::zeros_like(n.value);
  return n.grad;
}

Tensor* Tape::grad_sink(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return &n.grad;
}

void Tape::accumulate(Gradients& grads) const {
  for (std::size_t id : bound_) {
    const Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    Tensor& target = grads[*n.param];
    if (!n.is_row) {
      target.add(n.grad);
      continue;
    }
    const std::size_t cols = n.grad.size();
    if (target.rank() != 2 || target.cols() != cols)
      throw AccountingError("row gradient does not fit its parameter");
    double* dst = target.data() + n.param_row * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += n.grad[c];
  }
}

namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
}

Var unary(Var a, Tensor out, Tape::BackwardFn fn) {
  Var in[] = {a};
  return a.tape().push(std::move(out), in, std::move(fn));
}

Var binary(Var a, Var b, Tensor out, Tape::BackwardFn fn) {
  Var in[] = {a, b};
  return a.tape().push(std::move(out), in, std::move(fn));
}

}  // namespace

Var add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("add", x, y);
  Tensor out = x;
  out.add(y);
  return binary(a, b, std::move(out), [a, b](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(a)) g->add(up);
    if (auto* g = t.grad_sink(b)) g->add(up);
  });
}

Var sub(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("sub", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return binary(a, b, std::move(out), [a, b](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(a)) g->add(up);
    if (auto* g = t.grad_sink(b))
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] -= up[i];
  });
}

Var mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("mul", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return binary(a, b, std::move(out), [a, b](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(a)) {
      const Tensor& y = b.value();
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += up[i] * y[i];
    }
    if (auto* g = t.grad_sink(b)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += up[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return unary(a, std::move(out), [a, factor](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(a))
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += factor * up[i];
  });
}

Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank("matmul", x, 2);
  require_rank("matmul", y, 2);
  if (x.cols() != y.rows()) mismatch("matmul", x, y);
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x.at(i, p);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += xv * y.at(p, j);
    }
  return binary(a, b, std::move(out), [a, b, m, k, n](Tape& t, const Tensor& up, const Tensor&) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (auto* g = t.grad_sink(a))  // up * y^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += up.at(i, j) * y.at(p, j);
          g->at(i, p) += s;
        }
    if (auto* g = t.grad_sink(b))  // x^T * up
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x.at(i, p);
          for (std::size_t j = 0; j < n; ++j) g->at(p, j) += xv * up.at(i, j);
        }
  });
}

Var matvec(Var a, Var b) {
  const Tensor& w = a.value();
  const Tensor& x = b.value();
  require_rank("matvec", w, 2);
  require_rank("matvec", x, 1);
  if (w.cols() != x.size()) mismatch("matvec", w, x);
  const std::size_t m = w.rows(), k = w.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = w.data() + i * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += wr[p] * x[p];
    out[i] = s;
  }
  return binary(a, b, std::move(out), [a, b, m, k](Tape& t, const Tensor& up, const Tensor&) {
    const Tensor& w = a.value();
    const Tensor& x = b.value();
    if (auto* g = t.grad_sink(a))
      for (std::size_t i = 0; i < m; ++i) {
        double* gr = g->data() + i * k;
        const double u = up[i];
        if (u == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) gr[p] += u * x[p];
      }
    if (auto* g = t.grad_sink(b))
      for (std::size_t i = 0; i < m; ++i) {
        const double* wr = w.data() + i * k;
        const double u = up[i];
        if (u == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) (*g)[p] += u * wr[p];
      }
  });
}

Var vecmat(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  require_rank("vecmat", x, 1);
  require_rank("vecmat", w, 2);
  if (w.rows() != x.size()) mismatch("vecmat", x, w);
  const std::size_t k = w.rows(), n = w.cols();
  Tensor out({n});
  for (std::size_t p = 0; p < k; ++p) {
    const double xv = x[p];
    const double* wr = w.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += xv * wr[j];
  }
  return binary(a, b, std::move(out), [a, b, k, n](Tape& t, const Tensor& up, const Tensor&) {
    const Tensor& x = a.value();
    const Tensor& w = b.value();
    if (auto* g = t.grad_sink(a))
      for (std::size_t p = 0; p < k; ++p) {
        const double* wr = w.data() + p * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += wr[j] * up[j];
        (*g)[p] += s;
      }
    if (auto* g = t.grad_sink(b))
      for (std::size_t p = 0; p < k; ++p) {
        double* gr = g->data() + p * n;
        const double xv = x[p];
        for (std::size_t j = 0; j < n; ++j) gr[j] += xv * up[j];
      }
  });
}

Var dot(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("dot", x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return binary(a, b, Tensor::scalar(s), [a, b](Tape& t, const Tensor& up, const Tensor&) {
    const double u = up[0];
    if (auto* g = t.grad_sink(a)) {
      const Tensor& y = b.value();
      for (std::size_t i = 0; i < y.size(); ++i) (*g)[i] += u * y[i];
    }
    if (auto* g = t.grad_sink(b)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += u * x[i];
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return unary(a, Tensor::scalar(s), [a](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(a))
      for (double& v : g->values()) v += up[0];
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return unary(a, std::move(out),
               [a](Tape& t, const Tensor& up, const Tensor& y) {
                 if (auto* g = t.grad_sink(a))
                   for (std::size_t i = 0; i < up.size(); ++i)
                     (*g)[i] += up[i] * y[i] * (1.0 - y[i]);
               });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return unary(a, std::move(out),
               [a](Tape& t, const Tensor& up, const Tensor& y) {
                 if (auto* g = t.grad_sink(a))
                   for (std::size_t i = 0; i < up.size(); ++i)
                     (*g)[i] += up[i] * (1.0 - y[i] * y[i]);
               });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  const Tensor& first = parts[0].value();
  const std::size_t rank = first.rank();
  if (rank != 1 && rank != 2)
    throw DimensionError("concat: unsupported shape " + shape_string(first.shape()));
  const std::size_t nrows = first.rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != rank || v.rows() != nrows) mismatch("concat", first, v);
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out(rank == 1 ? Shape{total} : Shape{nrows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < nrows; ++r)
      std::copy_n(v.data() + r * widths[k], widths[k],
                  out.data() + r * total + offset);
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Tape& tape = parts[0].tape();
  return tape.push(std::move(out), inputs,
                   [inputs, widths, total, nrows](Tape& t, const Tensor& up,
                                                  const Tensor&) {
                     std::size_t offset = 0;
                     for (std::size_t k = 0; k < inputs.size(); ++k) {
                       if (auto* g = t.grad_sink(inputs[k]))
                         for (std::size_t r = 0; r < nrows; ++r)
                           for (std::size_t c = 0; c < widths[k]; ++c)
                             (*g)[r * widths[k] + c] += up[r * total + offset + c];
                       offset += widths[k];
                     }
                   });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var v, std::size_t begin, std::size_t end) {
  const Tensor& x = v.value();
  require_rank("slice", x, 1);
  if (begin >= end || end > x.size())
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_string(x.shape()));
  Tensor out(Shape{end - begin}, std::vector<double>(x.data() + begin, x.data() + end));
  return unary(v, std::move(out), [v, begin](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(v))
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[begin + i] += up[i];
  });
}

Var row(Var m, std::size_t r) {
  const Tensor& x = m.value();
  require_rank("row", x, 2);
  if (r >= x.rows())
    throw DimensionError("row: index " + std::to_string(r) + " outside " +
                         shape_string(x.shape()));
  const std::size_t n = x.cols();
  Tensor out(Shape{n}, std::vector<double>(x.data() + r * n, x.data() + (r + 1) * n));
  return unary(m, std::move(out), [m, r, n](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(m))
      for (std::size_t c = 0; c < n; ++c) (*g)[r * n + c] += up[c];
  });
}

Var rows(Var m, std::size_t begin, std::size_t end) {
  const Tensor& x = m.value();
  require_rank("rows", x, 2);
  if (begin >= end || end > x.rows())
    throw DimensionError("rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_string(x.shape()));
  const std::size_t n = x.cols();
  Tensor out(Shape{end - begin, n},
             std::vector<double>(x.data() + begin * n, x.data() + end * n));
  return unary(m, std::move(out), [m, begin, n](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(m))
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[begin * n + i] += up[i];
  });
}

Var stack(std::span<const Var> vectors) {
  if (vectors.empty()) throw DimensionError("stack: no vectors");
  const Tensor& first = vectors[0].value();
  require_rank("stack", first, 1);
  const std::size_t n = first.size();
  std::vector<double> values;
  values.reserve(n * vectors.size());
  for (const Var& v : vectors) {
    const Tensor& x = v.value();
    if (x.shape() != first.shape()) mismatch("stack", first, x);
    values.insert(values.end(), x.data(), x.data() + n);
  }
  std::vector<Var> inputs(vectors.begin(), vectors.end());
  Tape& tape = vectors[0].tape();
  return tape.push(Tensor(Shape{vectors.size(), n}, std::move(values)), inputs,
                   [inputs, n](Tape& t, const Tensor& up, const Tensor&) {
                     for (std::size_t r = 0; r < inputs.size(); ++r)
                       if (auto* g = t.grad_sink(inputs[r]))
                         for (std::size_t c = 0; c < n; ++c)
                           (*g)[c] += up[r * n + c];
                   });
}

Var repeat(Var v, std::size_t count) {
  const Tensor& x = v.value();
  require_rank("repeat", x, 1);
  if (count == 0) throw DimensionError("repeat: zero count");
  const std::size_t n = x.size();
  Tensor out(Shape{count, n});
  for (std::size_t r = 0; r < count; ++r)
    std::copy_n(x.data(), n, out.data() + r * n);
  return unary(v, std::move(out), [v, count, n](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(v))
      for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < n; ++c) (*g)[c] += up[r * n + c];
  });
}

Var max_rows(Var m) {
  const Tensor& x = m.value();
  require_rank("max_rows", x, 2);
  const std::size_t nr = x.rows(), nc = x.cols();
  Tensor out(Shape{nc});
  std::vector<std::size_t> arg(nc, 0);
  for (std::size_t c = 0; c < nc; ++c) {
    double best = x.at(0, c);
    for (std::size_t r = 1; r < nr; ++r)
      if (x.at(r, c) > best) {
        best = x.at(r, c);
        arg[c] = r;
      }
    out[c] = best;
  }
  return unary(m, std::move(out), [m, arg, nc](Tape& t, const Tensor& up, const Tensor&) {
    if (auto* g = t.grad_sink(m))
      for (std::size_t c = 0; c < nc; ++c) (*g)[arg[c] * nc + c] += up[c];
  });
}

std::vector<double> log_softmax_values(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("log_softmax of an empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lz;
  return out;
}

Var log_softmax(Var v) {
  const Tensor& x = v.value();
  require_rank("log_softmax", x, 1);
  Tensor out(Shape{x.size()}, log_softmax_values(x.values()));
  return unary(v, std::move(out), [v](Tape& t, const Tensor& up, const Tensor& y) {
    if (auto* g = t.grad_sink(v)) {
      double total = 0.0;
      for (double u : up.values()) total += u;
      for (std::size_t i = 0; i < up.size(); ++i)
        (*g)[i] += up[i] - std::exp(y[i]) * total;
    }
  });
}

Var pick(Var v, std::size_t index) {
  const Tensor& x = v.value();
  require_rank("pick", x, 1);
  if (index >= x.size())
    throw DimensionError("pick: index " + std::to_string(index) + " outside " +
                         shape_string(x.shape()));
  return unary(v, Tensor::scalar(x[index]),
               [v, index](Tape& t, const Tensor& up, const Tensor&) {
                 if (auto* g = t.grad_sink(v)) (*g)[index] += up[0];
               });
}

Var dropout(Var x, double ratio, bool training, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw DomainError("dropout ratio must lie in [0, 1), got " + std::to_string(ratio));
  if (!training || ratio == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - ratio);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() < ratio ? 0.0 : keep_scale;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return unary(x, std::move(out),
               [x, mask = std::move(mask)](Tape& t, const Tensor& up, const Tensor&) {
                 if (auto* g = t.grad_sink(x))
                   for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += up[i] * mask[i];
               });
}

}  // namespace lmseg
