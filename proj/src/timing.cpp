#include "lmseg/timing.hpp"

#include <chrono>
#include <cstdio>

#include "json.hpp"
#include "lmseg/errors.hpp"
#include "lmseg/inference.hpp"
#include "lmseg/trainer.hpp"

namespace lmseg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TimingReport timing(const Model& model, const Corpus& corpus, std::size_t batch_size,
                    std::size_t threads) {
  if (corpus.empty()) throw DomainError("timing: empty corpus");
  if (batch_size < 1) throw DomainError("timing: batch size must be at least 1");
  TimingReport r;
  r.sentences = corpus.size();

  Config config = model.config();
  config.batch_size = batch_size;
  Model scratch(config, model.vocab(), model.params());
  const auto examples = make_examples(scratch.vocab(), corpus);
  std::size_t gold_segments = 0;
  for (const auto& ex : examples) gold_segments += ex.gold.size();

  auto start = std::chrono::steady_clock::now();
  train_epoch(scratch, examples, 1);
  r.train_seconds = seconds_since(start);

  std::vector<Sentence> sentences;
  for (const auto& s : corpus) sentences.push_back(s.sentence);
  std::vector<DecodeTrace> traces;
  start = std::chrono::steady_clock::now();
  decode_all(model, sentences, 1, threads, &traces);
  r.eval_seconds = seconds_since(start);

  double iterations = 0.0, ratio = 0.0;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const std::size_t n = sentences[k].size();
    r.tokens += n;
    iterations += static_cast<double>(traces[k].iterations);
    ratio += static_cast<double>(traces[k].iterations) / static_cast<double>(n);
    r.scored_spans += traces[k].scored_spans();
    r.span_bound += n * (n + 1) / 2;
  }
  const double count = static_cast<double>(r.sentences);
  r.mean_gold_segments = static_cast<double>(gold_segments) / count;
  r.mean_iterations = iterations / count;
  r.mean_iterations_per_token = ratio / count;
  return r;
}

std::string TimingReport::format() const {
  char buf[640];
  std::snprintf(buf, sizeof buf,
                "sentences: %zu  tokens: %zu\n"
                "train epoch: %.3f s total, %.3f ms/sentence\n"
                "evaluation:  %.3f s total, %.3f ms/sentence\n"
                "decoder steps: mean %.3f per sentence (gold segments %.3f), %.3f per token\n"
                "scored spans: %zu of at most %zu\n",
                sentences, tokens, train_seconds, 1000.0 * train_per_sentence(), eval_seconds,
                1000.0 * eval_per_sentence(), mean_iterations, mean_gold_segments,
                mean_iterations_per_token, scored_spans, span_bound);
  return buf;
}

std::string TimingReport::record() const {
  return nlohmann::json{{"sentences", sentences},
                        {"tokens", tokens},
                        {"train_seconds", train_seconds},
                        {"eval_seconds", eval_seconds},
                        {"train_seconds_per_sentence", train_per_sentence()},
                        {"eval_seconds_per_sentence", eval_per_sentence()},
                        {"mean_gold_segments", mean_gold_segments},
                        {"mean_iterations", mean_iterations},
                        {"mean_iterations_per_token", mean_iterations_per_token},
                        {"scored_spans", scored_spans},
                        {"span_bound", span_bound}}
      .dump();
}

}  // namespace lmseg
