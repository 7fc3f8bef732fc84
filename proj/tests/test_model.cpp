#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lmseg/decoder.hpp"
#include "lmseg/encoder.hpp"
#include "lmseg/errors.hpp"
#include "lmseg/trainer.hpp"
#include "support.hpp"

using namespace lmseg;
using support::random_model;
using support::random_sentence;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lmseg_test_model_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> values(Var v) { return {v.value().values().begin(), v.value().values().end()}; }

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain-array LSTM over a sequence of inputs; gates ordered i, f, g, o.
std::vector<std::vector<double>> reference_lstm(const std::vector<std::vector<double>>& xs,
                                                const Tensor& wx, const Tensor& wh,
                                                const Tensor& b, bool reverse) {
  const std::size_t hidden = wh.cols();
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
  std::vector<std::vector<double>> out(xs.size());
  for (std::size_t step = 0; step < xs.size(); ++step) {
    const std::size_t k = reverse ? xs.size() - 1 - step : step;
    std::vector<double> z(4 * hidden);
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
      z[r] = b[r];
      for (std::size_t q = 0; q < xs[k].size(); ++q) z[r] += wx.at(r, q) * xs[k][q];
      for (std::size_t q = 0; q < hidden; ++q) z[r] += wh.at(r, q) * h[q];
    }
    for (std::size_t u = 0; u < hidden; ++u) {
      const double in = sigm(z[u]), forget = sigm(z[hidden + u]);
      const double cand = std::tanh(z[2 * hidden + u]), outg = sigm(z[3 * hidden + u]);
      c[u] = forget * c[u] + in * cand;
      h[u] = outg * std::tanh(c[u]);
    }
    out[k] = h;
  }
  return out;
}

}  // namespace

TEST_CASE("parameter inventory") {
  const Model m(support::tiny_config(), support::tiny_vocab(3));
  const auto& p = m.params();
  const Config& c = m.config();
  CHECK(p[p.id("token_emb")].value.shape() == Shape{m.vocab().token_count(), 4});
  CHECK(p[p.id("char_conv.weight")].value.shape() == Shape{3, 9});
  CHECK(p[p.id("encoder.l0.fwd.input")].value.shape() == Shape{8, c.token_repr_dim()});
  CHECK(p[p.id("encoder.l1.bwd.recurrent")].value.shape() == Shape{8, 2});
  CHECK(p[p.id("start")].value.shape() == Shape{c.segment_emb_dim()});
  CHECK(p[p.id("label_emb")].value.shape() == Shape{3, 3});
  CHECK(p[p.id("decoder.l0.input")].value.shape() ==
        Shape{16, c.segment_emb_dim() + c.phrase_dim()});
  CHECK(p[p.id("span.weight")].value.shape() == Shape{4, 12});
  CHECK(p[p.id("label.weight")].value.shape() == Shape{3, 16});
  CHECK_FALSE(p.contains("mlp.weight"));
  // Forget-gate bias starts at 1.
  CHECK(p[p.id("decoder.l0.bias")].value[4] == 1.0);

  const Model mlp(support::tiny_config(1, DecoderKind::kMlp), support::tiny_vocab(3));
  CHECK(mlp.params().contains("mlp.weight"));
  CHECK_FALSE(mlp.params().contains("decoder.l0.input"));

  Config nochar = support::tiny_config();
  nochar.char_cnn = false;
  CHECK_FALSE(Model(nochar, support::tiny_vocab(3)).params().contains("char_emb"));
}

TEST_CASE("initialization is a function of the seed") {
  const Model a(support::tiny_config(5), support::tiny_vocab(2));
  const Model b(support::tiny_config(5), support::tiny_vocab(2));
  const Model c(support::tiny_config(6), support::tiny_vocab(2));
  CHECK(a.params() == b.params());
  CHECK_FALSE(a.params() == c.params());
}

TEST_CASE("checkpoint save and load") {
  const fs::path dir = scratch_dir("ckpt");
  Model m = random_model(3, 3);
  m.params().step = 12;
  m.save(dir / "model.ckpt");
  m.vocab().save(dir / "vocab.json");
  const Model back = Model::load(dir / "model.ckpt", dir / "vocab.json");
  CHECK(back.params() == m.params());
  CHECK(back.config() == m.config());
  CHECK(back.vocab() == m.vocab());

  // A vocabulary with a different label count no longer fits the weights.
  support::tiny_vocab(4).save(dir / "other.json");
  CHECK_THROWS_AS(Model::load(dir / "model.ckpt", dir / "other.json"), ValidationError);
}

TEST_CASE("pretrained embeddings override rows") {
  const fs::path dir = scratch_dir("emb");
  Model m(support::tiny_config(), support::tiny_vocab(2));
  {
    std::ofstream out(dir / "vec.txt");
    out << "2 4\ncat 1 2 3 4\nunknownword 9 9 9 9\n";
  }
  CHECK(m.load_embeddings(dir / "vec.txt") == 1);
  const auto& table = m.params()[m.ids().token_emb].value;
  const std::size_t cat = m.vocab().token_id("cat");
  CHECK(table.at(cat, 0) == 1.0);
  CHECK(table.at(cat, 3) == 4.0);
  {
    std::ofstream out(dir / "bad.txt");
    out << "cat 1 2 3\n";
  }
  CHECK_THROWS_AS(m.load_embeddings(dir / "bad.txt"), ParseError);
}

TEST_CASE("character features match a direct computation") {
  const Model m = random_model(8, 2);
  Tape tape(false);
  Pass pass(m, tape, Mode::kEval);
  const std::vector<std::size_t> chars = {2, 3, 4, 2};
  const auto got = values(char_cnn(pass, chars));

  const auto& p = m.params();
  const Tensor& emb = p[*m.ids().char_emb].value;
  const Tensor& w = p[*m.ids().char_conv].value;
  const Tensor& b = p[*m.ids().char_conv_bias].value;
  const std::size_t d = emb.cols();
  for (std::size_t f = 0; f < w.rows(); ++f) {
    double best = -1e300;
    for (long pos = 0; pos < 4; ++pos) {
      double z = b[f];
      for (long o = -1; o <= 1; ++o) {
        const long q = pos + o;
        if (q < 0 || q >= 4) continue;
        for (std::size_t e = 0; e < d; ++e)
          z += w.at(f, static_cast<std::size_t>(o + 1) * d + e) *
               emb.at(chars[static_cast<std::size_t>(q)], e);
      }
      best = std::max(best, z);
    }
    CHECK(got[f] == doctest::Approx(best).epsilon(1e-12));
  }
  CHECK_THROWS_AS(char_cnn(pass, std::vector<std::size_t>{}), ContractError);
}

TEST_CASE("encoder states match a direct bidirectional LSTM") {
  Config c = support::tiny_config(4);
  c.char_cnn = false;
  c.layers = 1;
  Model m(c, support::tiny_vocab(2));
  support::perturb(m, Rng(1), 0.5);
  Rng rng(2);
  const Sentence s = random_sentence(rng, 5);
  const IndexedSentence idx = index_sentence(m.vocab(), s);
  Tape tape(false);
  Pass pass(m, tape, Mode::kEval);
  const EncoderOutput enc = encode_sentence(pass, idx);

  const auto& p = m.params();
  std::vector<std::vector<double>> xs;
  for (std::size_t t : idx.tokens) {
    std::vector<double> x(c.token_emb_dim);
    for (std::size_t e = 0; e < x.size(); ++e) x[e] = p[m.ids().token_emb].value.at(t, e);
    xs.push_back(x);
  }
  auto run = [&](std::size_t dir) {
    const auto& w = m.ids().encoder[0][dir];
    return reference_lstm(xs, p[w.input].value, p[w.recurrent].value, p[w.bias].value, dir == 1);
  };
  const auto fwd = run(0), bwd = run(1);
  REQUIRE(enc.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto got = values(enc.state(k + 1));
    for (std::size_t u = 0; u < 2; ++u) {
      CHECK(got[u] == doctest::Approx(fwd[k][u]).epsilon(1e-12));
      CHECK(got[2 + u] == doctest::Approx(bwd[k][u]).epsilon(1e-12));
    }
  }
}

TEST_CASE("phrase representations") {
  const Model m = random_model(2, 2);
  Rng rng(3);
  Tape tape(false);
  Pass pass(m, tape, Mode::kEval);
  const EncoderOutput enc = encode_sentence(pass, index_sentence(m.vocab(), random_sentence(rng, 6)));
  const auto hi = values(enc.state(2)), hj = values(enc.state(5));
  const auto p = values(phrase_repr(enc, 2, 5));
  REQUIRE(p.size() == 3 * hi.size());
  for (std::size_t u = 0; u < hi.size(); ++u) {
    CHECK(p[u] == hj[u]);
    CHECK(p[hi.size() + u] == hj[u] - hi[u]);
    CHECK(p[2 * hi.size() + u] == hi[u]);
  }
  // Single-token spans have a zero middle block.
  const auto single = values(phrase_repr(enc, 3, 3));
  for (std::size_t u = 0; u < hi.size(); ++u) CHECK(single[hi.size() + u] == 0.0);

  const Var rowsv = phrase_rows(enc, 3);
  CHECK(rowsv.shape() == Shape{4, 12});
  for (std::size_t t = 0; t < 4; ++t) {
    const auto expect = values(phrase_repr(enc, 3, 3 + t));
    for (std::size_t e = 0; e < 12; ++e) CHECK(rowsv.value().at(t, e) == expect[e]);
  }
  CHECK_THROWS_AS(phrase_repr(enc, 3, 2), ContractError);
  CHECK_THROWS_AS(phrase_repr(enc, 1, 7), ContractError);
  CHECK_THROWS_AS(phrase_repr(enc, 0, 1), ContractError);
}

TEST_CASE("segment embedding") {
  const Model m = random_model(2, 3);
  Rng rng(3);
  Tape tape(false);
  Pass pass(m, tape, Mode::kEval);
  const EncoderOutput enc = encode_sentence(pass, index_sentence(m.vocab(), random_sentence(rng, 9)));
  CHECK(values(segment_embedding(pass, enc, std::nullopt)) ==
        std::vector<double>(m.params()[m.ids().start].value.values().begin(),
                            m.params()[m.ids().start].value.values().end()));
  const auto got = values(segment_embedding(pass, enc, LabeledSpan{1, 2, 1}));
  auto expect = values(phrase_repr(enc, 1, 2));
  const auto& table = m.params()[m.ids().label_emb].value;
  for (std::size_t e = 0; e < table.cols(); ++e) expect.push_back(table.at(1, e));
  CHECK(got == expect);

  Config no_label = support::tiny_config();
  no_label.use_label = false;
  const Model m2(no_label, support::tiny_vocab(3));
  Tape t2(false);
  Pass p2(m2, t2, Mode::kEval);
  const EncoderOutput e2 = encode_sentence(p2, index_sentence(m2.vocab(), random_sentence(rng, 4)));
  CHECK(segment_embedding(p2, e2, LabeledSpan{1, 2, 0}).size() == no_label.phrase_dim());
}

TEST_CASE("decoder contracts") {
  const Model m = random_model(2, 2);
  Rng rng(3);
  Tape tape(false);
  Pass pass(m, tape, Mode::kEval);
  const EncoderOutput enc = encode_sentence(pass, index_sentence(m.vocab(), random_sentence(rng, 3)));
  DecoderState s = initial_state(pass);
  CHECK_THROWS_AS(span_scores(pass, s, enc), ContractError);
  s = decoder_step(pass, s, segment_embedding(pass, enc, std::nullopt), enc);
  CHECK(span_scores(pass, s, enc).size() == 3);
  s.cursor = 4;
  CHECK_THROWS_AS(decoder_step(pass, s, segment_embedding(pass, enc, std::nullopt), enc),
                  ContractError);
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0, 2.0}) == 1);
}

TEST_CASE("span and label distributions are normalized") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Model m = random_model(100 + trial, 2 + trial % 3, 2.0);
    const std::size_t n = 1 + rng.below(10);
    Tape tape(false);
    Pass pass(m, tape, Mode::kEval);
    const EncoderOutput enc = encode_sentence(pass, index_sentence(m.vocab(), random_sentence(rng, n)));
    DecoderState s = decoder_step(pass, initial_state(pass),
                                  segment_embedding(pass, enc, std::nullopt), enc);
    s.cursor = 1 + rng.below(n);
    const Var spans = span_scores(pass, s, enc);
    CHECK(spans.size() == n - s.cursor + 1);
    double total = 0.0;
    for (double x : spans.value().values()) total += std::exp(x);
    CHECK(std::abs(total - 1.0) < 1e-12);
    const std::size_t j = s.cursor + rng.below(n - s.cursor + 1);
    double ltotal = 0.0;
    for (double x : label_scores(pass, s, enc, s.cursor, j).value().values()) ltotal += std::exp(x);
    CHECK(std::abs(ltotal - 1.0) < 1e-12);
  }
}

TEST_CASE("uniform model loss on the capital sentence") {
  // Zero span and label weights make every distribution uniform. Gold
  // cursors 1, 3, 5, 9 with n = 9 give |S_k| = n - i_k + 1 = 9, 7, 5, 1, and
  // there are four labels.
  const Sentence sentence = Sentence::from_tokens(support::capital_tokens());
  Vocab v = Vocab::from_lists(support::capital_tokens(), {"T", "a"}, {"NP", "O", "VP", "PP"});
  Model m(support::tiny_config(), v);
  m.params()[m.ids().span_weight].value.fill(0.0);
  m.params()[m.ids().label_weight].value.fill(0.0);
  const Segmentation gold = iob_to_segments(support::capital_tags());
  const double expect = std::log(9.0) + std::log(7.0) + std::log(5.0) + std::log(1.0) +
                        4 * std::log(4.0);
  CHECK(loss_value(m, sentence, gold) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss is teacher forced") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = random_model(40 + trial, 3, 2.0);
    const Sentence s = random_sentence(rng, 2 + rng.below(7));
    const Segmentation gold = support::random_segmentation(rng, s.size(), m.vocab());
    const Example ex = make_example(m.vocab(), s, gold);
    Tape tape(false);
    Pass pass(m, tape, Mode::kEval);
    TeacherForcingTrace trace;
    const double loss = sentence_loss(pass, ex.input, ex.gold, &trace).value()[0];
    CHECK(loss >= 0.0);
    REQUIRE(trace.previous.size() == gold.count());
    CHECK_FALSE(trace.previous[0].has_value());
    for (std::size_t k = 0; k < gold.count(); ++k) {
      CHECK(trace.cursors[k] == gold[k].i);
      CHECK(trace.candidates[k] == s.size() - gold[k].i + 1);
      if (k > 0) CHECK(*trace.previous[k] == ex.gold[k - 1]);
    }
  }
}

TEST_CASE("loss rejects gold that does not cover the sentence") {
  const Model m = random_model(1, 2);
  Rng rng(1);
  const IndexedSentence s = index_sentence(m.vocab(), random_sentence(rng, 4));
  Tape tape;
  Pass pass(m, tape, Mode::kTrain);
  const std::vector<LabeledSpan> gap = {{1, 2, 0}, {4, 4, 1}};
  CHECK_THROWS_AS(sentence_loss(pass, s, gap), ContractError);
  const std::vector<LabeledSpan> short_cover = {{1, 3, 0}};
  CHECK_THROWS_AS(sentence_loss(pass, s, short_cover), ContractError);
}

TEST_CASE("end-to-end loss gradients match central differences") {
  Rng rng(12);
  auto run = [&](Config config, Mode mode, std::size_t n) {
    Model m(config, support::tiny_vocab(2));
    support::perturb(m, Rng(config.seed), 0.3);
    const Sentence s = random_sentence(rng, n);
    const Example ex = make_example(m.vocab(), s, support::random_segmentation(rng, n, m.vocab()));
    const auto report = support::check_parameter_gradients(
        m, [&](Pass& pass) { return sentence_loss(pass, ex.input, ex.gold); }, mode);
    INFO(report.where);
    CHECK(report.checked == m.params().scalar_count());
    CHECK(report.worst < 1e-4);
  };
  SUBCASE("recurrent decoder") { run(support::tiny_config(1), Mode::kEval, 3); }
  SUBCASE("mlp decoder") { run(support::tiny_config(2, DecoderKind::kMlp), Mode::kEval, 3); }
  SUBCASE("no previous phrase") {
    Config c = support::tiny_config(3);
    c.use_phrase = false;
    run(c, Mode::kEval, 4);
  }
  SUBCASE("no previous label, no characters") {
    Config c = support::tiny_config(4);
    c.use_label = false;
    c.char_cnn = false;
    run(c, Mode::kEval, 4);
  }
  SUBCASE("training mode with dropout") {
    Config c = support::tiny_config(5);
    c.dropout = 0.3;
    run(c, Mode::kTrain, 3);
  }
}
