#include "lmseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "json.hpp"
#include "lmseg/errors.hpp"
#include "lmseg/eval.hpp"
#include "lmseg/inference.hpp"

namespace lmseg {

Example make_example(const Vocab& vocab, const Sentence& sentence, const Segmentation& gold) {
  if (gold.length() != sentence.size())
    throw ContractError("make_example: segmentation length differs from sentence length");
  return {index_sentence(vocab, sentence), to_spans(vocab, gold)};
}

std::vector<Example> make_examples(const Vocab& vocab, const Corpus& corpus) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(make_example(vocab, s.sentence, iob_to_segments(s.tags)));
  return out;
}

Var sentence_loss(Pass& pass, const IndexedSentence& sentence,
                  std::span<const LabeledSpan> gold, TeacherForcingTrace* trace) {
  std::size_t expect = 1;
  for (const auto& s : gold) {
    if (s.i != expect || s.j < s.i || s.j > sentence.size())
      throw ContractError("sentence_loss: gold segments do not cover the sentence");
    expect = s.j + 1;
  }
  if (expect != sentence.size() + 1)
    throw ContractError("sentence_loss: gold segments do not cover the sentence");

  const EncoderOutput enc = encode_sentence(pass, sentence);
  DecoderState state = initial_state(pass);
  std::optional<LabeledSpan> prev;
  std::vector<Var> terms;
  for (const auto& s : gold) {
    if (trace) {
      trace->previous.push_back(prev);
      trace->cursors.push_back(s.i);
    }
    state = decoder_step(pass, state, segment_embedding(pass, enc, prev), enc);
    const Var span_lp = span_scores(pass, state, enc);
    if (trace) trace->candidates.push_back(span_lp.size());
    terms.push_back(pick(span_lp, s.j - s.i));
    terms.push_back(pick(label_scores(pass, state, enc, s.i, s.j), s.label));
    prev = s;
    state.cursor = s.j + 1;
  }
  return scale(sum(concat(terms)), -1.0);
}

double loss_value(const Model& model, const Sentence& sentence, const Segmentation& gold) {
  Tape tape(false);
  Pass pass(model, tape, Mode::kEval);
  const Example ex = make_example(model.vocab(), sentence, gold);
  return sentence_loss(pass, ex.input, ex.gold).value()[0];
}

namespace {

// Sentences sorted by length (ties in shuffled order), cut into batches,
// batch order shuffled.
std::vector<std::vector<std::size_t>> make_batches(std::span<const Example> examples,
                                                   std::size_t batch_size, Rng rng) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return examples[a].input.size() < examples[b].input.size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t k = 0; k < order.size(); k += batch_size)
    batches.emplace_back(order.begin() + k,
                         order.begin() + std::min(order.size(), k + batch_size));
  shuffle(batches, rng);
  return batches;
}

}  // namespace

double train_epoch(Model& model, std::span<const Example> examples, std::size_t epoch) {
  const Config& config = model.config();
  const Rng epoch_rng = Rng(config.seed).split("train").split(epoch);
  const AdamOptions adam{config.lr, config.beta1, config.beta2, config.eps, config.l2};
  double total = 0.0;
  for (const auto& batch : make_batches(examples, config.batch_size, epoch_rng.split("order"))) {
    Gradients grads(model.params());
    for (std::size_t k : batch) {
      Tape tape;
      Pass pass(model, tape, Mode::kTrain, epoch_rng.split("dropout").split(k));
      const Var loss = sentence_loss(pass, examples[k].input, examples[k].gold);
      tape.backward(loss);
      tape.accumulate(grads);
      total += loss.value()[0];
    }
    if (config.clip_norm > 0.0) clip_global_norm(grads, config.clip_norm);
    adam_step(model.params(), grads, adam);
  }
  return total;
}

double corpus_f1(const Model& model, const Corpus& corpus, std::size_t threads) {
  std::vector<Sentence> sentences;
  std::vector<Segmentation> gold;
  for (const auto& s : corpus) {
    sentences.push_back(s.sentence);
    gold.push_back(iob_to_segments(s.tags));
  }
  const auto pred = decode_all(model, sentences, 1, threads);
  return chunk_f1(gold, pred).f1();
}

std::string TrainReport::records(bool with_timing) const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::json rec = {{"epoch", e.epoch},
                          {"loss", e.loss},
                          {"dev_f1", e.dev_f1},
                          {"improved", e.improved}};
    if (with_timing) rec["seconds"] = e.seconds;
    out += rec.dump() + "\n";
  }
  out += nlohmann::json{{"best_epoch", best_epoch}, {"best_dev_f1", best_dev_f1}}.dump() + "\n";
  return out;
}

TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const Config& config,
                  const TrainOptions& options) {
  if (train_corpus.empty()) throw DomainError("train: empty training corpus");
  if (dev_corpus.empty()) throw DomainError("train: empty development corpus");
  config.validate();

  Model model(config, Vocab::build(train_corpus, config.min_count));
  if (!config.embeddings.empty()) model.load_embeddings(config.embeddings);
  const auto examples = make_examples(model.vocab(), train_corpus);

  TrainReport report;
  ParamStore best = model.params();
  double best_f1 = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = train_epoch(model, examples, epoch);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.dev_f1 = corpus_f1(model, dev_corpus, options.threads);
    rec.improved = rec.dev_f1 > best_f1;
    if (rec.improved) {
      best_f1 = rec.dev_f1;
      best = model.params();
      report.best_epoch = epoch;
      report.best_dev_f1 = rec.dev_f1;
      stale = 0;
    } else {
      ++stale;
    }
    report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (stale > config.patience) break;
  }
  return {Model(config, model.vocab(), std::move(best)), std::move(report)};
}

}  // namespace lmseg
