#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lmseg/corpus.hpp"
#include "lmseg/decoder.hpp"
#include "lmseg/model.hpp"

namespace lmseg {

// Instrumentation filled in by the decoders.
struct DecodeTrace {
  std::size_t iterations = 0;           // decoder steps taken (greedy)
  std::vector<std::size_t> candidates;  // |S_k| at each greedy step
  std::vector<double> segment_logprobs; // log Q^s + log Q^l per output segment
  std::size_t max_hypotheses = 0;       // beam search only
  std::size_t complete_segmentations = 0;  // exhaustive oracle only
  double score = 0.0;                   // total log-probability of the output

  std::size_t scored_spans() const;
};

// Greedy decoding: repeatedly extract the leftmost segment of the remaining
// tokens, feeding the predicted segment back into the decoder.
Segmentation greedy_decode(const Model& model, const Sentence& sentence,
                           DecodeTrace* trace = nullptr);

// Beam search over segment sequences ranked by accumulated
// log Q^s + log Q^l. Each hypothesis is extended by its beam_width best
// spans, each paired with its beam_width best labels, then the pool is cut
// back to beam_width. The greedy path is tracked alongside and returned if
// it scores higher, so the result never scores below greedy_decode.
// DomainError when beam_width < 1.
Segmentation beam_decode(const Model& model, const Sentence& sentence,
                         std::size_t beam_width, DecodeTrace* trace = nullptr);

inline constexpr std::size_t kOracleMaxTokens = 12;

// Scores every segmentation and labeling by its teacher-forced
// log-probability and returns the best; ties go to the lexicographically
// smallest (end, label) sequence. DomainError for n > kOracleMaxTokens.
Segmentation exhaustive_oracle(const Model& model, const Sentence& sentence,
                               DecodeTrace* trace = nullptr);

// Σ_k log Q^s_{k,i_k,j_k} + log Q^l_{k,i_k,j_k,l_k} with the decoder
// conditioned on the segmentation's own segments.
double model_score(const Model& model, const Sentence& sentence,
                   const Segmentation& segmentation);

std::vector<LabeledSpan> to_spans(const Vocab& vocab, const Segmentation& segmentation);
Segmentation to_segmentation(const Vocab& vocab, std::span<const LabeledSpan> spans,
                             std::size_t length);

// Decodes many sentences on `threads` worker threads (beam_width 1 is
// greedy). Traces are optional and indexed like sentences.
std::vector<Segmentation> decode_all(const Model& model,
                                     std::span<const Sentence> sentences,
                                     std::size_t beam_width = 1, std::size_t threads = 1,
                                     std::vector<DecodeTrace>* traces = nullptr);

}  // namespace lmseg
