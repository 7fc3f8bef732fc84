#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmseg/corpus.hpp"

namespace lmseg {

struct ChunkCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  ChunkCounts& operator+=(const ChunkCounts& o) {
    gold += o.gold;
    predicted += o.predicted;
    correct += o.correct;
    return *this;
  }
  friend bool operator==(const ChunkCounts&, const ChunkCounts&) = default;
};

// Ratios in [0, 1]. Precision is 0 without predictions, recall 0 without
// gold chunks, F1 0 when both are 0.
struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
Scores scores(const ChunkCounts& counts);

struct F1Report {
  ChunkCounts overall;
  std::map<std::string, ChunkCounts> per_label;  // every label seen in gold or pred
  std::size_t tokens = 0;
  std::size_t tokens_correct = 0;
  std::size_t sentences = 0;

  Scores overall_scores() const { return scores(overall); }
  double f1() const { return overall_scores().f1; }
  double accuracy() const {
    return tokens == 0 ? 0.0 : static_cast<double>(tokens_correct) / static_cast<double>(tokens);
  }
  F1Report& operator+=(const F1Report& o);
};

// Chunk-level comparison: a predicted chunk is correct iff its span and
// label both match a gold chunk; O segments are not chunks. ContractError
// when the corpora are not aligned sentence by sentence.
F1Report chunk_f1(std::span<const Segmentation> gold, std::span<const Segmentation> pred);

// Same over raw IOB tag sequences; token accuracy compares the tags
// themselves, as conlleval does.
F1Report chunk_f1_tags(std::span<const std::vector<std::string>> gold,
                       std::span<const std::vector<std::string>> pred);

// 100 * ratio rounded half-up to two decimals, e.g. "66.67".
std::string percent(double ratio);

// conlleval-style summary and per-label table.
std::string format_report(const F1Report& report);
// One JSON object per line: overall first, then each label.
std::string report_records(const F1Report& report);

inline const std::vector<std::size_t> kDefaultBucketEdges = {22, 44, 66, 88};

struct Bucket {
  std::size_t low = 1;   // inclusive token counts
  std::size_t high = 0;  // 0 for the open-ended overflow bucket
  bool overflow = false;
  std::size_t sentences = 0;
  std::optional<F1Report> report;  // absent when the bucket is empty
};

struct BucketReport {
  std::vector<Bucket> buckets;
};

// Buckets [1, e1], [e1 + 1, e2], ... by sentence length, plus an overflow
// bucket for sentences past the last edge, present only when used.
// ContractError unless edges are positive and strictly increasing.
BucketReport bucket_f1(std::span<const Segmentation> gold, std::span<const Segmentation> pred,
                       std::span<const std::size_t> edges = kDefaultBucketEdges);
BucketReport bucket_f1_tags(std::span<const std::vector<std::string>> gold,
                            std::span<const std::vector<std::string>> pred,
                            std::span<const std::size_t> edges = kDefaultBucketEdges);

std::string format_buckets(const BucketReport& report);
std::string bucket_records(const BucketReport& report);

// Gold and predicted tags from "token ... gold predicted" lines, one block
// per sentence. ParseError with the line number on short lines or bad tags.
struct PredictionFile {
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> pred;
};
PredictionFile read_predictions(std::istream& in);
PredictionFile read_prediction_file(const std::string& path);

}  // namespace lmseg
