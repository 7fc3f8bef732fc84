#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lmseg/encoder.hpp"
#include "lmseg/layers.hpp"
#include "lmseg/model.hpp"

namespace lmseg {

// Segment with its label as an index into the vocabulary's label space.
struct LabeledSpan {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t label = 0;

  friend auto operator<=>(const LabeledSpan&, const LabeledSpan&) = default;
};

struct DecoderState {
  std::vector<LstmState> layers;  // empty for the MLP decoder
  Var hidden;                     // h^d_k; invalid before the first step
  std::size_t cursor = 1;         // i_k, n + 1 once the sentence is covered
};

DecoderState initial_state(Pass& pass);

// h^s_{k-1}: v when there is no previous segment, otherwise the previous
// segment's phrase representation and/or label embedding (per the
// use-phrase / use-label switches).
Var segment_embedding(Pass& pass, const EncoderOutput& enc,
                      const std::optional<LabeledSpan>& prev);

// h^d_k = f^d(h^d_{k-1}, h^s_{k-1} ⊕ h^p_{i_k,n}); the cursor is unchanged.
// ContractError when the cursor is past the end.
DecoderState decoder_step(Pass& pass, const DecoderState& state, Var segment_emb,
                          const EncoderOutput& enc);

// Unnormalized scores behind span_scores / label_scores.
Var span_logits(Pass& pass, const DecoderState& state, const EncoderOutput& enc);
Var label_logits(Pass& pass, const DecoderState& state, const EncoderOutput& enc,
                 std::size_t i, std::size_t j);

// Log-probabilities over S_k = {(i_k, i_k), ..., (i_k, n)}; entry t is the
// span (i_k, i_k + t).
Var span_scores(Pass& pass, const DecoderState& state, const EncoderOutput& enc);

// Log-probabilities over the label space for span (i, j).
Var label_scores(Pass& pass, const DecoderState& state, const EncoderOutput& enc,
                 std::size_t i, std::size_t j);

struct Selection {
  LabeledSpan segment;
  double span_logprob = 0.0;
  double label_logprob = 0.0;
  std::size_t candidates = 0;  // |S_k|
};

// Argmax span, then argmax label for that span. Ties go to the smallest
// span end, then the smallest label id.
Selection select_segment(Pass& pass, const DecoderState& state, const EncoderOutput& enc);

// Index of the largest value; first one wins ties.
std::size_t argmax(std::span<const double> values);

}  // namespace lmseg
