#include "lmseg/decoder.hpp"

#include "lmseg/errors.hpp"

namespace lmseg {

DecoderState initial_state(Pass& pass) {
  DecoderState s;
  const std::size_t hidden = pass.config().decoder_hidden;
  for (std::size_t l = 0; l < pass.model().ids().decoder.size(); ++l)
    s.layers.push_back({pass.zeros(hidden), pass.zeros(hidden)});
  return s;
}

Var segment_embedding(Pass& pass, const EncoderOutput& enc,
                      const std::optional<LabeledSpan>& prev) {
  const auto& ids = pass.model().ids();
  if (!prev) return pass.param(ids.start);
  const Config& c = pass.config();
  if (prev->label >= pass.model().vocab().label_count())
    throw ContractError("segment_embedding: label id out of range");
  std::vector<Var> parts;
  if (c.use_phrase) parts.push_back(phrase_repr(enc, prev->i, prev->j));
  if (c.use_label) parts.push_back(row(pass.param(ids.label_emb), prev->label));
  return concat(parts);
}

DecoderState decoder_step(Pass& pass, const DecoderState& state, Var segment_emb,
                          const EncoderOutput& enc) {
  if (state.cursor < 1 || state.cursor > enc.size())
    throw ContractError("decoder_step: cursor " + std::to_string(state.cursor) +
                        " is past the end of a " + std::to_string(enc.size()) +
                        "-token sentence");
  const auto& ids = pass.model().ids();
  const Var input = concat({segment_emb, phrase_repr(enc, state.cursor, enc.size())});
  DecoderState next;
  next.cursor = state.cursor;
  if (pass.config().decoder == DecoderKind::kMlp) {
    next.hidden = tanh(add(matvec(pass.param(*ids.mlp_weight), input),
                           pass.param(*ids.mlp_bias)));
    return next;
  }
  Var x = input;
  for (std::size_t l = 0; l < ids.decoder.size(); ++l) {
    const auto& w = ids.decoder[l];
    const LstmWeights weights{pass.param(w.input), pass.param(w.recurrent),
                              pass.param(w.bias)};
    if (l > 0) x = pass.dropout(x);
    LstmState s = lstm_cell(x, state.layers.at(l), weights);
    next.layers.push_back(s);
    x = s.h;
  }
  next.hidden = x;
  return next;
}

namespace {

void check_active(const DecoderState& state, const EncoderOutput& enc, const char* op) {
  if (!state.hidden.valid())
    throw ContractError(std::string(op) + ": decoder has not been stepped");
  if (state.cursor < 1 || state.cursor > enc.size())
    throw ContractError(std::string(op) + ": cursor " + std::to_string(state.cursor) +
                        " out of range for " + std::to_string(enc.size()) + " tokens");
}

}  // namespace

Var span_logits(Pass& pass, const DecoderState& state, const EncoderOutput& enc) {
  check_active(state, enc, "span_scores");
  // score(i, j) = (h^d)^T W^s h^p_{i,j} for every candidate at once.
  const Var projected = vecmat(state.hidden, pass.param(pass.model().ids().span_weight));
  return matvec(phrase_rows(enc, state.cursor), projected);
}

Var label_logits(Pass& pass, const DecoderState& state, const EncoderOutput& enc,
                 std::size_t i, std::size_t j) {
  check_active(state, enc, "label_scores");
  const auto& ids = pass.model().ids();
  const Var features = concat({phrase_repr(enc, i, j), state.hidden});
  const Var projected = matvec(pass.param(ids.label_weight), features);
  return matvec(pass.param(ids.label_emb), projected);
}

Var span_scores(Pass& pass, const DecoderState& state, const EncoderOutput& enc) {
  return log_softmax(span_logits(pass, state, enc));
}

Var label_scores(Pass& pass, const DecoderState& state, const EncoderOutput& enc,
                 std::size_t i, std::size_t j) {
  return log_softmax(label_logits(pass, state, enc, i, j));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

Selection select_segment(Pass& pass, const DecoderState& state, const EncoderOutput& enc) {
  // Argmax over the raw scores: normalization cannot change the winner.
  const Var span_raw = span_logits(pass, state, enc);
  const Var span_lp = log_softmax(span_raw);
  const std::size_t t = argmax(span_raw.value().values());
  const double span_logprob = span_lp.value()[t];
  const std::size_t candidates = span_lp.size();
  const std::size_t i = state.cursor;
  const std::size_t j = i + t;
  const Var label_raw = label_logits(pass, state, enc, i, j);
  const Var label_lp = log_softmax(label_raw);
  const std::size_t l = argmax(label_raw.value().values());
  return {{i, j, l}, span_logprob, label_lp.value()[l], candidates};
}

}  // namespace lmseg
