#include "lmseg/encoder.hpp"

#include "lmseg/errors.hpp"
#include "lmseg/layers.hpp"

namespace lmseg {

IndexedSentence index_sentence(const Vocab& vocab, const Sentence& sentence) {
  IndexedSentence out;
  out.tokens.reserve(sentence.size());
  for (std::size_t k = 0; k < sentence.size(); ++k) {
    out.tokens.push_back(vocab.token_id(sentence.tokens[k]));
    std::vector<std::size_t> cs;
    for (const auto& c : sentence.chars[k]) cs.push_back(vocab.char_id(c));
    out.chars.push_back(std::move(cs));
  }
  return out;
}

Var char_cnn(Pass& pass, std::span<const std::size_t> chars) {
  if (chars.empty()) throw ContractError("char_cnn: token without characters");
  const auto& ids = pass.model().ids();
  const Config& c = pass.config();
  std::vector<Var> embedded;
  embedded.reserve(chars.size());
  for (std::size_t id : chars) embedded.push_back(pass.param_row(*ids.char_emb, id));
  const Var pad = pass.zeros(c.char_emb_dim);
  const Var weight = pass.param(*ids.char_conv);
  const Var bias = pass.param(*ids.char_conv_bias);
  const long half = static_cast<long>(c.char_width / 2);
  const long len = static_cast<long>(chars.size());
  std::vector<Var> positions;
  positions.reserve(chars.size());
  std::vector<Var> window(c.char_width);
  for (long p = 0; p < len; ++p) {
    for (long o = -half; o <= half; ++o) {
      const long q = p + o;
      window[static_cast<std::size_t>(o + half)] =
          (q < 0 || q >= len) ? pad : embedded[static_cast<std::size_t>(q)];
    }
    positions.push_back(add(matvec(weight, concat(window)), bias));
  }
  return max_rows(stack(positions));
}

std::vector<Var> embed_tokens(Pass& pass, const IndexedSentence& sentence) {
  const auto& ids = pass.model().ids();
  std::vector<Var> out;
  out.reserve(sentence.size());
  for (std::size_t k = 0; k < sentence.size(); ++k) {
    Var e = pass.param_row(ids.token_emb, sentence.tokens[k]);
    if (pass.config().char_cnn) e = concat({e, char_cnn(pass, sentence.chars[k])});
    out.push_back(pass.dropout(e));
  }
  return out;
}

EncoderOutput encode(Pass& pass, std::span<const Var> token_reprs) {
  const std::size_t n = token_reprs.size();
  if (n == 0) throw ContractError("encode: empty sentence");
  const auto& ids = pass.model().ids();
  const std::size_t hidden = pass.config().encoder_hidden;
  const LstmState zero{pass.zeros(hidden), pass.zeros(hidden)};

  std::vector<Var> inputs(token_reprs.begin(), token_reprs.end());
  EncoderOutput out;
  for (std::size_t layer = 0; layer < ids.encoder.size(); ++layer) {
    auto weights = [&](std::size_t dir) {
      const auto& w = ids.encoder[layer][dir];
      return LstmWeights{pass.param(w.input), pass.param(w.recurrent), pass.param(w.bias)};
    };
    const LstmWeights fwd_w = weights(0);
    const LstmWeights bwd_w = weights(1);
    std::vector<Var> fwd(n), bwd(n);
    LstmState s = zero;
    for (std::size_t k = 0; k < n; ++k) {
      s = lstm_cell(inputs[k], s, fwd_w);
      fwd[k] = s.h;
    }
    s = zero;
    for (std::size_t k = n; k-- > 0;) {
      s = lstm_cell(inputs[k], s, bwd_w);
      bwd[k] = s.h;
    }
    const bool top = layer + 1 == ids.encoder.size();
    for (std::size_t k = 0; k < n; ++k) {
      Var joined = concat({fwd[k], bwd[k]});
      inputs[k] = top ? joined : pass.dropout(joined);
    }
    if (top) {
      out.forward = std::move(fwd);
      out.backward = std::move(bwd);
      out.context = inputs;
    }
  }
  out.context_matrix = stack(out.context);
  return out;
}

EncoderOutput encode_sentence(Pass& pass, const IndexedSentence& sentence) {
  const auto reprs = embed_tokens(pass, sentence);
  return encode(pass, reprs);
}

namespace {

void check_span(const EncoderOutput& enc, std::size_t i, std::size_t j) {
  if (i < 1 || i > j || j > enc.size())
    throw ContractError("span (" + std::to_string(i) + "," + std::to_string(j) +
                        ") outside a sentence of " + std::to_string(enc.size()) +
                        " tokens");
}

}  // namespace

Var phrase_repr(const EncoderOutput& enc, std::size_t i, std::size_t j) {
  check_span(enc, i, j);
  const Var hi = enc.state(i);
  const Var hj = enc.state(j);
  return concat({hj, sub(hj, hi), hi});
}

Var phrase_rows(const EncoderOutput& enc, std::size_t i) {
  check_span(enc, i, enc.size());
  const std::size_t count = enc.size() - i + 1;
  const Var ends = rows(enc.context_matrix, i - 1, enc.size());  // h^c_j, j = i..n
  const Var start = repeat(enc.state(i), count);
  return concat({ends, sub(ends, start), start});
}

}  // namespace lmseg
