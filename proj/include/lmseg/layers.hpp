#pragma once

#include <cstddef>
#include <utility>

#include "lmseg/rng.hpp"
#include "lmseg/tape.hpp"
#include "lmseg/tensor.hpp"

namespace lmseg {

// Weights of one LSTM cell with gate blocks ordered input, forget,
// candidate, output: input [4H x I], recurrent [4H x H], bias [4H].
struct LstmWeights {
  Var input;
  Var recurrent;
  Var bias;
};

struct LstmState {
  Var h;
  Var c;
};

// One step of the standard LSTM recurrence.
LstmState lstm_cell(Var x, const LstmState& prev, const LstmWeights& w);

// Glorot-uniform matrix in [-sqrt(6 / (fan_in + fan_out)), +sqrt(...)],
// fan_in = cols and fan_out = rows.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
// Uniform in [-bound, bound].
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);
// LSTM bias: zeros except the forget-gate block, which is 1.
Tensor lstm_bias(std::size_t hidden);

}  // namespace lmseg
