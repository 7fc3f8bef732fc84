#include "lmseg/layers.hpp"

#include <cmath>

#include "lmseg/errors.hpp"

namespace lmseg {

LstmState lstm_cell(Var x, const LstmState& prev, const LstmWeights& w) {
  const std::size_t hidden = prev.h.size();
  if (w.bias.size() != 4 * hidden || prev.c.size() != hidden)
    throw DimensionError("lstm_cell: state of size " + std::to_string(hidden) +
                         " does not fit bias " + shape_string(w.bias.shape()));
  Var gates = add(add(matvec(w.input, x), matvec(w.recurrent, prev.h)), w.bias);
  Var in_gate = sigmoid(slice(gates, 0, hidden));
  Var forget_gate = sigmoid(slice(gates, hidden, 2 * hidden));
  Var candidate = tanh(slice(gates, 2 * hidden, 3 * hidden));
  Var out_gate = sigmoid(slice(gates, 3 * hidden, 4 * hidden));
  Var c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_tensor({rows, cols}, bound, rng);
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor lstm_bias(std::size_t hidden) {
  Tensor b({4 * hidden});
  for (std::size_t k = hidden; k < 2 * hidden; ++k) b[k] = 1.0;
  return b;
}

}  // namespace lmseg
