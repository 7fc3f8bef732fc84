#include "lmseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lmseg/errors.hpp"

namespace lmseg {

Scores scores(const ChunkCounts& c) {
  Scores s;
  if (c.predicted > 0) s.precision = static_cast<double>(c.correct) / static_cast<double>(c.predicted);
  if (c.gold > 0) s.recall = static_cast<double>(c.correct) / static_cast<double>(c.gold);
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

F1Report& F1Report::operator+=(const F1Report& o) {
  overall += o.overall;
  for (const auto& [label, counts] : o.per_label) per_label[label] += counts;
  tokens += o.tokens;
  tokens_correct += o.tokens_correct;
  sentences += o.sentences;
  return *this;
}

namespace {

void count_chunks(const Segmentation& gold, const Segmentation& pred, F1Report& report) {
  std::set<Segment> gold_chunks;
  for (const auto& s : gold) {
    if (s.label == kOutside) continue;
    gold_chunks.insert(s);
    ++report.per_label[s.label].gold;
    ++report.overall.gold;
  }
  for (const auto& s : pred) {
    if (s.label == kOutside) continue;
    ++report.per_label[s.label].predicted;
    ++report.overall.predicted;
    if (gold_chunks.contains(s)) {
      ++report.per_label[s.label].correct;
      ++report.overall.correct;
    }
  }
  ++report.sentences;
}

void check_aligned(std::size_t gold, std::size_t pred) {
  if (gold != pred)
    throw ContractError("chunk_f1: " + std::to_string(gold) + " gold sentences but " +
                        std::to_string(pred) + " predicted");
}

void check_length(std::size_t k, std::size_t gold, std::size_t pred) {
  if (gold != pred)
    throw ContractError("chunk_f1: sentence " + std::to_string(k + 1) + " has " +
                        std::to_string(gold) + " gold tokens but " + std::to_string(pred) +
                        " predicted");
}

}  // namespace

F1Report chunk_f1(std::span<const Segmentation> gold, std::span<const Segmentation> pred) {
  check_aligned(gold.size(), pred.size());
  F1Report report;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    check_length(k, gold[k].length(), pred[k].length());
    count_chunks(gold[k], pred[k], report);
    const auto gt = segments_to_iob(gold[k]);
    const auto pt = segments_to_iob(pred[k]);
    report.tokens += gt.size();
    for (std::size_t t = 0; t < gt.size(); ++t) report.tokens_correct += gt[t] == pt[t];
  }
  return report;
}

F1Report chunk_f1_tags(std::span<const std::vector<std::string>> gold,
                       std::span<const std::vector<std::string>> pred) {
  check_aligned(gold.size(), pred.size());
  F1Report report;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    check_length(k, gold[k].size(), pred[k].size());
    count_chunks(iob_to_segments(gold[k]), iob_to_segments(pred[k]), report);
    report.tokens += gold[k].size();
    for (std::size_t t = 0; t < gold[k].size(); ++t)
      report.tokens_correct += gold[k][t] == pred[k][t];
  }
  return report;
}

std::string percent(double ratio) {
  const double hundredths = std::floor(ratio * 10000.0 + 0.5);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", hundredths / 100.0);
  return buf;
}

std::string format_report(const F1Report& r) {
  const Scores s = r.overall_scores();
  std::ostringstream out;
  out << "processed " << r.tokens << " tokens with " << r.overall.gold << " phrases; found: "
      << r.overall.predicted << " phrases; correct: " << r.overall.correct << ".\n";
  out << "accuracy: " << percent(r.accuracy()) << "%; precision: " << percent(s.precision)
      << "%; recall: " << percent(s.recall) << "%; FB1: " << percent(s.f1) << "\n";
  for (const auto& [label, counts] : r.per_label) {
    const Scores ls = scores(counts);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%17s: precision: %6s%%; recall: %6s%%; FB1: %6s  %zu\n",
                  label.c_str(), percent(ls.precision).c_str(), percent(ls.recall).c_str(),
                  percent(ls.f1).c_str(), counts.predicted);
    out << buf;
  }
  return out.str();
}

namespace {

nlohmann::json counts_json(const ChunkCounts& c) {
  const Scores s = scores(c);
  return {{"gold", c.gold},        {"predicted", c.predicted}, {"correct", c.correct},
          {"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1}};
}

}  // namespace

std::string report_records(const F1Report& r) {
  nlohmann::json overall = counts_json(r.overall);
  overall["label"] = nullptr;
  overall["tokens"] = r.tokens;
  overall["accuracy"] = r.accuracy();
  overall["sentences"] = r.sentences;
  std::string out = overall.dump() + "\n";
  for (const auto& [label, counts] : r.per_label) {
    nlohmann::json rec = counts_json(counts);
    rec["label"] = label;
    out += rec.dump() + "\n";
  }
  return out;
}

namespace {

template <typename Seq, typename Score>
BucketReport bucket_impl(std::span<const Seq> gold, std::span<const Seq> pred,
                         std::span<const std::size_t> edges, auto length, Score score) {
  check_aligned(gold.size(), pred.size());
  if (edges.empty()) throw ContractError("bucket_f1: no bucket edges");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e] == 0 || (e > 0 && edges[e] <= edges[e - 1]))
      throw ContractError("bucket_f1: edges must be positive and strictly increasing");
  }
  BucketReport report;
  std::size_t low = 1;
  for (std::size_t e : edges) {
    report.buckets.push_back({low, e, false, 0, std::nullopt});
    low = e + 1;
  }
  Bucket overflow{low, 0, true, 0, std::nullopt};

  for (std::size_t k = 0; k < gold.size(); ++k) {
    const std::size_t n = length(gold[k]);
    auto it = std::lower_bound(edges.begin(), edges.end(), n);
    Bucket& b = it == edges.end() ? overflow : report.buckets[it - edges.begin()];
    ++b.sentences;
    F1Report one = score(std::span<const Seq>(&gold[k], 1), std::span<const Seq>(&pred[k], 1));
    if (b.report) *b.report += one;
    else b.report = std::move(one);
  }
  if (overflow.sentences > 0) report.buckets.push_back(std::move(overflow));
  return report;
}

}  // namespace

BucketReport bucket_f1(std::span<const Segmentation> gold, std::span<const Segmentation> pred,
                       std::span<const std::size_t> edges) {
  return bucket_impl<Segmentation>(
      gold, pred, edges, [](const Segmentation& s) { return s.length(); },
      [](auto g, auto p) { return chunk_f1(g, p); });
}

BucketReport bucket_f1_tags(std::span<const std::vector<std::string>> gold,
                            std::span<const std::vector<std::string>> pred,
                            std::span<const std::size_t> edges) {
  return bucket_impl<std::vector<std::string>>(
      gold, pred, edges, [](const std::vector<std::string>& s) { return s.size(); },
      [](auto g, auto p) { return chunk_f1_tags(g, p); });
}

namespace {

std::string bucket_name(const Bucket& b) {
  if (b.overflow) return std::to_string(b.low) + "+";
  return std::to_string(b.low) + "-" + std::to_string(b.high);
}

}  // namespace

std::string format_buckets(const BucketReport& r) {
  std::ostringstream out;
  out << "   length  sentences      FB1\n";
  for (const auto& b : r.buckets) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%9s  %9zu  %7s%s\n", bucket_name(b).c_str(), b.sentences,
                  b.report ? percent(b.report->f1()).c_str() : "-",
                  b.overflow ? "  (overflow)" : "");
    out << buf;
  }
  return out.str();
}

std::string bucket_records(const BucketReport& r) {
  std::string out;
  for (const auto& b : r.buckets) {
    nlohmann::json rec = {{"low", b.low}, {"sentences", b.sentences}, {"overflow", b.overflow}};
    rec["high"] = b.overflow ? nlohmann::json(nullptr) : nlohmann::json(b.high);
    rec["f1"] = b.report ? nlohmann::json(b.report->f1()) : nlohmann::json(nullptr);
    out += rec.dump() + "\n";
  }
  return out;
}

PredictionFile read_predictions(std::istream& in) {
  PredictionFile file;
  std::vector<std::string> gold, pred;
  auto flush = [&] {
    if (gold.empty()) return;
    file.gold.push_back(std::move(gold));
    file.pred.push_back(std::move(pred));
    gold.clear();
    pred.clear();
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) {
      flush();
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.front() == "-DOCSTART-") {
      flush();
      continue;
    }
    if (fields.size() < 3)
      throw ParseError("expected \"token ... gold predicted\", got " +
                           std::to_string(fields.size()) + " field(s)",
                       lineno);
    const std::string& g = fields[fields.size() - 2];
    const std::string& p = fields.back();
    parse_iob_tag(g, lineno);
    parse_iob_tag(p, lineno);
    gold.push_back(g);
    pred.push_back(p);
  }
  flush();
  return file;
}

PredictionFile read_prediction_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return read_predictions(in);
}

}  // namespace lmseg
