#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lmseg/corpus.hpp"
#include "lmseg/model.hpp"
#include "lmseg/tape.hpp"

namespace lmseg {

struct IndexedSentence {
  std::vector<std::size_t> tokens;
  std::vector<std::vector<std::size_t>> chars;

  std::size_t size() const { return tokens.size(); }
};

IndexedSentence index_sentence(const Vocab& vocab, const Sentence& sentence);

// Contextual states of one sentence. Vectors are 0-based internally; the
// accessors take the 1-based token positions used by segments.
struct EncoderOutput {
  std::vector<Var> forward;   // top-layer left-to-right states
  std::vector<Var> backward;  // top-layer right-to-left states
  std::vector<Var> context;   // forward ⊕ backward
  Var context_matrix;         // context stacked as rows [n x 2H]

  std::size_t size() const { return context.size(); }
  Var state(std::size_t k) const { return context.at(k - 1); }
};

// Character features: embeddings, one convolution of odd width with zero
// same-padding, max-pooling over positions. ContractError when empty.
Var char_cnn(Pass& pass, std::span<const std::size_t> chars);

// e_k = E^t(x_k) ⊕ CharCNN(x_k), with dropout in training mode.
std::vector<Var> embed_tokens(Pass& pass, const IndexedSentence& sentence);

// Stacked bidirectional LSTM over token representations; boundary states
// are zero and dropout sits between layers.
EncoderOutput encode(Pass& pass, std::span<const Var> token_reprs);

EncoderOutput encode_sentence(Pass& pass, const IndexedSentence& sentence);

// h^p_{i,j} = h^c_j ⊕ (h^c_j − h^c_i) ⊕ h^c_i. Reads exactly two states.
Var phrase_repr(const EncoderOutput& enc, std::size_t i, std::size_t j);

// Rows h^p_{i,i}, h^p_{i,i+1}, ..., h^p_{i,n}: the phrase representations
// of every span starting at i, as an [(n - i + 1) x 6H] matrix.
Var phrase_rows(const EncoderOutput& enc, std::size_t i);

}  // namespace lmseg
