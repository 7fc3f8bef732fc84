#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmseg/config.hpp"
#include "lmseg/corpus.hpp"
#include "lmseg/decoder.hpp"
#include "lmseg/encoder.hpp"
#include "lmseg/model.hpp"

namespace lmseg {

// A training sentence in index space.
struct Example {
  IndexedSentence input;
  std::vector<LabeledSpan> gold;
};

// ContractError when a gold label is outside the vocabulary.
Example make_example(const Vocab& vocab, const Sentence& sentence, const Segmentation& gold);
std::vector<Example> make_examples(const Vocab& vocab, const Corpus& corpus);

// What the decoder was fed at each teacher-forced step.
struct TeacherForcingTrace {
  std::vector<std::optional<LabeledSpan>> previous;
  std::vector<std::size_t> cursors;
  std::vector<std::size_t> candidates;
};

// −Σ_k (log Q^s + log Q^l) at the gold spans and labels, with the decoder
// always conditioned on the gold previous segment and gold cursor.
// ContractError unless gold covers the sentence left to right.
Var sentence_loss(Pass& pass, const IndexedSentence& sentence,
                  std::span<const LabeledSpan> gold, TeacherForcingTrace* trace = nullptr);

// Loss value without dropout or gradient recording.
double loss_value(const Model& model, const Sentence& sentence, const Segmentation& gold);

// One pass over the examples: length-bucketed batches in a seed-determined
// order, loss summed per batch, one clipped Adam step per batch. Returns the
// summed loss.
double train_epoch(Model& model, std::span<const Example> examples, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double dev_f1 = 0.0;    // ratio in [0, 1]
  double seconds = 0.0;
  bool improved = false;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;

  // One JSON object per epoch, then a summary object. Wall-clock fields are
  // only written when asked for, so fixed-seed runs compare byte for byte.
  std::string records(bool with_timing = false) const;
};

struct TrainOptions {
  std::size_t threads = 1;  // dev evaluation workers
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model model;  // parameters of the best dev epoch
  TrainReport report;
};

// Builds the vocabulary from the training corpus, trains, and keeps the
// parameters of the epoch with the highest dev F1. Stops after max_epochs
// or once more than `patience` epochs pass without improvement.
// DomainError for an empty corpus; ValidationError for a bad config.
TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const Config& config,
                  const TrainOptions& options = {});

// Chunk F1 ratio of greedy decoding against the corpus tags.
double corpus_f1(const Model& model, const Corpus& corpus, std::size_t threads = 1);

}  // namespace lmseg
