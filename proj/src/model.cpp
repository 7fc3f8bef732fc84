#include "lmseg/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lmseg/corpus.hpp"
#include "lmseg/errors.hpp"
#include "lmseg/layers.hpp"

namespace lmseg {

namespace {

std::string lstm_name(const std::string& prefix, const char* part) {
  return prefix + "." + part;
}

void add_lstm(ParamStore& store, const std::string& prefix, std::size_t input,
              std::size_t hidden, Rng& rng) {
  Rng r = rng.split(prefix);
  store.add(lstm_name(prefix, "input"), glorot_uniform(4 * hidden, input, r));
  store.add(lstm_name(prefix, "recurrent"), glorot_uniform(4 * hidden, hidden, r));
  store.add(lstm_name(prefix, "bias"), lstm_bias(hidden));
}

std::string encoder_prefix(std::size_t layer, std::size_t dir) {
  return "encoder.l" + std::to_string(layer) + (dir == 0 ? ".fwd" : ".bwd");
}

std::string decoder_prefix(std::size_t layer) {
  return "decoder.l" + std::to_string(layer);
}

// Embedding tables use the per-row bound sqrt(3 / dim) so that large
// vocabularies do not shrink the initial vectors.
Tensor embedding_table(std::size_t rows, std::size_t dim, Rng rng) {
  return uniform_tensor({rows, dim}, std::sqrt(3.0 / static_cast<double>(dim)), rng);
}

}  // namespace

ParamStore Model::initial_params(const Config& c, const Vocab& vocab) {
  c.validate();
  Rng rng = Rng(c.seed).split("init");
  ParamStore s;
  s.seed = c.seed;
  s.add("token_emb", embedding_table(vocab.token_count(), c.token_emb_dim,
                                     rng.split("token_emb")));
  if (c.char_cnn) {
    s.add("char_emb", embedding_table(vocab.char_count(), c.char_emb_dim,
                                      rng.split("char_emb")));
    Rng r = rng.split("char_conv");
    s.add("char_conv.weight", glorot_uniform(c.char_filters, c.char_width * c.char_emb_dim, r));
    s.add("char_conv.bias", Tensor({c.char_filters}));
  }
  for (std::size_t l = 0; l < c.layers; ++l)
    for (std::size_t d = 0; d < 2; ++d)
      add_lstm(s, encoder_prefix(l, d), l == 0 ? c.token_repr_dim() : c.context_dim(),
               c.encoder_hidden, rng);
  const std::size_t seg_dim = c.segment_emb_dim();
  Rng rv = rng.split("start");
  s.add("start", uniform_tensor({seg_dim}, std::sqrt(3.0 / static_cast<double>(seg_dim)), rv));
  s.add("label_emb", embedding_table(vocab.label_count(), c.label_emb_dim,
                                     rng.split("label_emb")));
  const std::size_t dec_in = seg_dim + c.phrase_dim();
  if (c.decoder == DecoderKind::kLstm) {
    for (std::size_t l = 0; l < c.layers; ++l)
      add_lstm(s, decoder_prefix(l), l == 0 ? dec_in : c.decoder_hidden, c.decoder_hidden,
               rng);
  } else {
    Rng r = rng.split("mlp");
    s.add("mlp.weight", glorot_uniform(c.decoder_hidden, dec_in, r));
    s.add("mlp.bias", Tensor({c.decoder_hidden}));
  }
  Rng rs = rng.split("span");
  s.add("span.weight", glorot_uniform(c.decoder_hidden, c.phrase_dim(), rs));
  Rng rl = rng.split("label");
  s.add("label.weight",
        glorot_uniform(c.label_emb_dim, c.phrase_dim() + c.decoder_hidden, rl));
  return s;
}

Model::Model(Config config, Vocab vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  params_ = initial_params(config_, vocab_);
  bind_ids();
}

Model::Model(Config config, Vocab vocab, ParamStore params)
    : config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)) {
  const ParamStore expected = initial_params(config_, vocab_);
  std::vector<std::string> problems;
  for (const auto& p : expected) {
    if (!params_.contains(p.name)) {
      problems.push_back("missing '" + p.name + "'");
    } else if (params_[params_.id(p.name)].value.shape() != p.value.shape()) {
      problems.push_back("'" + p.name + "' has shape " +
                         shape_string(params_[params_.id(p.name)].value.shape()) +
                         ", configuration and vocabulary imply " +
                         shape_string(p.value.shape()));
    }
  }
  if (params_.size() != expected.size())
    problems.push_back("checkpoint holds " + std::to_string(params_.size()) +
                       " parameters, expected " + std::to_string(expected.size()));
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match configuration/vocabulary:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  bind_ids();
}

void Model::bind_ids() {
  const auto& s = params_;
  auto lstm = [&](const std::string& prefix) {
    return LstmParamIds{s.id(lstm_name(prefix, "input")), s.id(lstm_name(prefix, "recurrent")),
                        s.id(lstm_name(prefix, "bias"))};
  };
  ids_ = {};
  ids_.token_emb = s.id("token_emb");
  if (config_.char_cnn) {
    ids_.char_emb = s.id("char_emb");
    ids_.char_conv = s.id("char_conv.weight");
    ids_.char_conv_bias = s.id("char_conv.bias");
  }
  for (std::size_t l = 0; l < config_.layers; ++l)
    ids_.encoder.push_back({lstm(encoder_prefix(l, 0)), lstm(encoder_prefix(l, 1))});
  ids_.start = s.id("start");
  ids_.label_emb = s.id("label_emb");
  if (config_.decoder == DecoderKind::kLstm) {
    for (std::size_t l = 0; l < config_.layers; ++l) ids_.decoder.push_back(lstm(decoder_prefix(l)));
  } else {
    ids_.mlp_weight = s.id("mlp.weight");
    ids_.mlp_bias = s.id("mlp.bias");
  }
  ids_.span_weight = s.id("span.weight");
  ids_.label_weight = s.id("label.weight");
}

std::size_t Model::load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Tensor& table = params_[ids_.token_emb].value;
  const std::size_t dim = table.cols();
  std::size_t replaced = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    auto fields = split_fields(line);
    if (fields.size() == 2 && lineno == 1) continue;  // word2vec-style header
    if (fields.size() != dim + 1)
      throw ParseError("embedding of dimension " + std::to_string(fields.size() - 1) +
                           ", token-emb-dim is " + std::to_string(dim),
                       lineno);
    const std::size_t id = vocab_.token_id(fields[0]);
    if (id == Vocab::kUnk) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      try {
        table.at(id, k) = std::stod(fields[k + 1]);
      } catch (const std::exception&) {
        throw ParseError("bad number '" + fields[k + 1] + "'", lineno);
      }
    }
    ++replaced;
  }
  return replaced;
}

void Model::save(const std::filesystem::path& checkpoint) const {
  save_checkpoint(checkpoint, params_, config_.to_text());
}

Model Model::load(const std::filesystem::path& checkpoint,
                  const std::filesystem::path& vocab) {
  Checkpoint ck = load_checkpoint(checkpoint);
  Config config = Config::from_text(ck.config);
  return Model(std::move(config), Vocab::load(vocab), std::move(ck.params));
}

}  // namespace lmseg
