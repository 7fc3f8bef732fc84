#pragma once

#include <cstddef>
#include <string>

#include "lmseg/corpus.hpp"
#include "lmseg/model.hpp"

namespace lmseg {

struct TimingReport {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  double train_seconds = 0.0;  // one epoch on a copy of the model
  double eval_seconds = 0.0;   // one greedy decoding pass
  double mean_gold_segments = 0.0;      // teacher-forced steps per sentence
  double mean_iterations = 0.0;         // greedy steps per sentence (mean m)
  double mean_iterations_per_token = 0.0;  // mean of m / n
  std::size_t scored_spans = 0;         // Σ |S_k| over the decoding pass
  std::size_t span_bound = 0;           // Σ n(n+1)/2

  double train_per_sentence() const { return sentences ? train_seconds / sentences : 0.0; }
  double eval_per_sentence() const { return sentences ? eval_seconds / sentences : 0.0; }

  std::string format() const;
  std::string record() const;  // one JSON object
};

// Wall-clock for one training epoch (with the given batch size) and one
// evaluation pass over the corpus. The model itself is not modified.
// DomainError for an empty corpus.
TimingReport timing(const Model& model, const Corpus& corpus, std::size_t batch_size,
                    std::size_t threads = 1);

}  // namespace lmseg
