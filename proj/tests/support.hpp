// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lmseg/config.hpp"
#include "lmseg/corpus.hpp"
#include "lmseg/model.hpp"
#include "lmseg/rng.hpp"
#include "lmseg/tape.hpp"
#include "lmseg/vocab.hpp"

namespace support {

using namespace lmseg;

// Every configured size at most 8.
inline Config tiny_config(std::uint64_t seed = 1, DecoderKind decoder = DecoderKind::kLstm) {
  Config c;
  c.token_emb_dim = 4;
  c.char_emb_dim = 3;
  c.char_filters = 3;
  c.char_width = 3;
  c.label_emb_dim = 3;
  c.encoder_hidden = 2;
  c.decoder_hidden = 4;
  c.layers = 2;
  c.decoder = decoder;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

inline const std::vector<std::string>& tiny_words() {
  static const std::vector<std::string> words = {"the", "cat", "sat", "on", "a", "mat", "ü"};
  return words;
}

inline Vocab tiny_vocab(std::size_t labels) {
  static const std::vector<std::string> names = {"O", "NP", "VP", "PP", "ADJP", "SBAR"};
  std::vector<std::string> chars;
  for (const auto& w : tiny_words())
    for (const auto& ch : utf8_chars(w))
      if (std::find(chars.begin(), chars.end(), ch) == chars.end()) chars.push_back(ch);
  return Vocab::from_lists(tiny_words(), chars,
                           std::vector<std::string>(names.begin(), names.begin() + labels));
}

// Adds uniform noise in [-spread, spread] to every parameter so that
// distributions are far from uniform.
inline void perturb(Model& model, Rng rng, double spread) {
  for (std::size_t id = 0; id < model.params().size(); ++id)
    for (double& x : model.params()[id].value.values()) x += rng.uniform(-spread, spread);
}

inline Model random_model(std::uint64_t seed, std::size_t labels, double spread = 1.0,
                          DecoderKind decoder = DecoderKind::kLstm) {
  Model m(tiny_config(seed, decoder), tiny_vocab(labels));
  perturb(m, Rng(seed).split("perturb"), spread);
  return m;
}

// Random tokens, including one outside the vocabulary now and then.
inline Sentence random_sentence(Rng& rng, std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t k = 0; k < n; ++k) {
    if (rng.below(8) == 0) tokens.push_back("zebra");
    else tokens.push_back(tiny_words()[rng.below(tiny_words().size())]);
  }
  return Sentence::from_tokens(std::move(tokens));
}

// Random segmentation of n tokens over the first `labels` labels of vocab.
inline Segmentation random_segmentation(Rng& rng, std::size_t n, const Vocab& vocab) {
  std::vector<Segment> segs;
  std::size_t i = 1;
  while (i <= n) {
    const std::size_t j = i + rng.below(n - i + 1);
    segs.push_back({i, j, vocab.label(rng.below(vocab.label_count()))});
    i = j + 1;
  }
  return Segmentation(std::move(segs), n);
}

// |a - b| / max(|a|, |b|, floor): relative error, absolute below floor.
inline double relative_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradientReport {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

// Compares the tape gradient of `loss` with central differences for every
// scalar of every parameter of `model`.
inline GradientReport check_parameter_gradients(Model& model,
                                                const std::function<Var(Pass&)>& loss,
                                                Mode mode = Mode::kEval, double step = 1e-5) {
  const Rng dropout_rng(99);
  Gradients analytic(model.params());
  {
    Tape tape;
    Pass pass(model, tape, mode, dropout_rng);
    const Var l = loss(pass);
    tape.backward(l);
    tape.accumulate(analytic);
  }
  auto value = [&] {
    Tape tape(false);
    Pass pass(model, tape, mode, dropout_rng);
    return loss(pass).value()[0];
  };
  GradientReport report;
  for (std::size_t id = 0; id < model.params().size(); ++id) {
    auto& p = model.params()[id];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double saved = p.value[k];
      p.value[k] = saved + step;
      const double up = value();
      p.value[k] = saved - step;
      const double down = value();
      p.value[k] = saved;
      const double numeric = (up - down) / (2 * step);
      const double err = relative_error(analytic[id][k], numeric);
      ++report.checked;
      if (err > report.worst) {
        report.worst = err;
        report.where = p.name + "[" + std::to_string(k) + "] analytic " +
                       std::to_string(analytic[id][k]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return report;
}

// The "Tangible capital" chunking sentence and its tags.
inline const std::vector<std::string>& capital_tokens() {
  static const std::vector<std::string> t = {"Tangible", "capital", "will",    "be", "about",
                                             "$",        "115",     "million", "."};
  return t;
}
inline const std::vector<std::string>& capital_tags() {
  static const std::vector<std::string> t = {"B-NP", "I-NP", "B-VP", "I-VP", "B-NP",
                                             "I-NP", "I-NP", "I-NP", "O"};
  return t;
}

}  // namespace support
