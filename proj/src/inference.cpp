#include "lmseg/inference.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "lmseg/encoder.hpp"
#include "lmseg/errors.hpp"

namespace lmseg {

std::size_t DecodeTrace::scored_spans() const {
  return std::accumulate(candidates.begin(), candidates.end(), std::size_t{0});
}

std::vector<LabeledSpan> to_spans(const Vocab& vocab, const Segmentation& seg) {
  std::vector<LabeledSpan> out;
  out.reserve(seg.count());
  for (const auto& s : seg) out.push_back({s.i, s.j, vocab.require_label(s.label)});
  return out;
}

Segmentation to_segmentation(const Vocab& vocab, std::span<const LabeledSpan> spans,
                             std::size_t length) {
  std::vector<Segment> segs;
  segs.reserve(spans.size());
  for (const auto& s : spans) segs.push_back({s.i, s.j, vocab.label(s.label)});
  return Segmentation(std::move(segs), length);
}

namespace {

// Encoded sentence plus the decoding context shared by all searches.
struct Search {
  Search(const Model& model, const Sentence& sentence)
      : tape(false), pass(model, tape, Mode::kEval) {
    enc = encode_sentence(pass, index_sentence(model.vocab(), sentence));
  }

  // Decoder state after reading the segment that ends the prefix
  // (`prev` = nullopt for the empty prefix).
  DecoderState advance(const DecoderState& state, const std::optional<LabeledSpan>& prev) {
    return decoder_step(pass, state, segment_embedding(pass, enc, prev), enc);
  }

  std::size_t n() const { return enc.size(); }

  Tape tape;
  Pass pass;
  EncoderOutput enc;
};

// Candidate order: larger raw score first, then smaller index.
std::vector<std::size_t> ranked(std::span<const double> raw, std::size_t keep) {
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] > raw[b]; });
  order.resize(std::min(keep, order.size()));
  return order;
}

struct GreedyResult {
  std::vector<LabeledSpan> spans;
  std::vector<double> logprobs;
  std::vector<std::size_t> candidates;
  double score = 0.0;
};

GreedyResult run_greedy(Search& search) {
  GreedyResult r;
  DecoderState state = initial_state(search.pass);
  std::optional<LabeledSpan> prev;
  while (state.cursor <= search.n()) {
    state = search.advance(state, prev);
    const Selection sel = select_segment(search.pass, state, search.enc);
    r.spans.push_back(sel.segment);
    r.logprobs.push_back(sel.span_logprob + sel.label_logprob);
    r.candidates.push_back(sel.candidates);
    r.score += sel.span_logprob;
    r.score += sel.label_logprob;
    prev = sel.segment;
    state.cursor = sel.segment.j + 1;
  }
  return r;
}

void fill_trace(DecodeTrace* trace, const std::vector<double>& logprobs, double score) {
  if (!trace) return;
  trace->segment_logprobs = logprobs;
  trace->score = score;
}

}  // namespace

Segmentation greedy_decode(const Model& model, const Sentence& sentence, DecodeTrace* trace) {
  Search search(model, sentence);
  GreedyResult r = run_greedy(search);
  if (trace) {
    *trace = {};
    trace->iterations = r.spans.size();
    trace->candidates = r.candidates;
    fill_trace(trace, r.logprobs, r.score);
  }
  return to_segmentation(model.vocab(), r.spans, sentence.size());
}

Segmentation beam_decode(const Model& model, const Sentence& sentence,
                         std::size_t beam_width, DecodeTrace* trace) {
  if (beam_width < 1) throw DomainError("beam width must be at least 1");
  Search search(model, sentence);
  const std::size_t n = search.n();

  struct Hypothesis {
    DecoderState state;
    std::vector<LabeledSpan> spans;
    std::vector<double> logprobs;
    double score = 0.0;
  };
  auto finished = [n](const Hypothesis& h) { return h.state.cursor > n; };

  std::vector<Hypothesis> beam(1);
  beam[0].state = initial_state(search.pass);
  std::size_t max_hyps = 1;

  auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.spans < b.spans;
  };

  while (std::any_of(beam.begin(), beam.end(), [&](const Hypothesis& h) { return !finished(h); })) {
    std::vector<Hypothesis> pool;
    for (const Hypothesis& h : beam) {
      if (finished(h)) {
        pool.push_back(h);
        continue;
      }
      std::optional<LabeledSpan> prev;
      if (!h.spans.empty()) prev = h.spans.back();
      DecoderState state = search.advance(h.state, prev);
      const Var span_raw = span_logits(search.pass, state, search.enc);
      const Var span_lp = log_softmax(span_raw);
      const std::vector<double> sraw(span_raw.value().values().begin(),
                                     span_raw.value().values().end());
      const std::vector<double> slp(span_lp.value().values().begin(),
                                    span_lp.value().values().end());
      for (std::size_t t : ranked(sraw, beam_width)) {
        const std::size_t i = state.cursor, j = i + t;
        const Var label_raw = label_logits(search.pass, state, search.enc, i, j);
        const Var label_lp = log_softmax(label_raw);
        const std::vector<double> lraw(label_raw.value().values().begin(),
                                       label_raw.value().values().end());
        const std::vector<double> llp(label_lp.value().values().begin(),
                                      label_lp.value().values().end());
        for (std::size_t l : ranked(lraw, beam_width)) {
          Hypothesis next = h;
          next.state = state;
          next.state.cursor = j + 1;
          next.spans.push_back({i, j, l});
          next.logprobs.push_back(slp[t] + llp[l]);
          next.score += slp[t];
          next.score += llp[l];
          pool.push_back(std::move(next));
        }
      }
    }
    std::stable_sort(pool.begin(), pool.end(), better);
    if (pool.size() > beam_width) pool.resize(beam_width);
    beam = std::move(pool);
    max_hyps = std::max(max_hyps, beam.size());
  }

  Hypothesis best = beam.front();
  // The greedy path may have been pruned; never return something worse.
  GreedyResult greedy = run_greedy(search);
  if (greedy.score > best.score) {
    best.spans = greedy.spans;
    best.logprobs = greedy.logprobs;
    best.score = greedy.score;
  }
  if (trace) {
    *trace = {};
    trace->iterations = best.spans.size();
    trace->max_hypotheses = max_hyps;
    fill_trace(trace, best.logprobs, best.score);
  }
  return to_segmentation(model.vocab(), best.spans, n);
}

Segmentation exhaustive_oracle(const Model& model, const Sentence& sentence,
                               DecodeTrace* trace) {
  if (sentence.size() > kOracleMaxTokens)
    throw DomainError("exhaustive_oracle: " + std::to_string(sentence.size()) +
                      " tokens exceeds the limit of " + std::to_string(kOracleMaxTokens));
  Search search(model, sentence);
  const std::size_t n = search.n();
  const std::size_t labels = model.vocab().label_count();

  std::vector<LabeledSpan> path, best_path;
  std::vector<double> lps, best_lps;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t complete = 0;

  // Depth-first in (end, label) order; a later candidate must score strictly
  // higher to win, which yields lexicographic tie-breaking.
  auto visit = [&](auto&& self, const DecoderState& state, double score) -> void {
    if (state.cursor > n) {
      ++complete;
      if (score > best_score) {
        best_score = score;
        best_path = path;
        best_lps = lps;
      }
      return;
    }
    std::optional<LabeledSpan> prev;
    if (!path.empty()) prev = path.back();
    const DecoderState stepped = search.advance(state, prev);
    const Var span_lp = span_scores(search.pass, stepped, search.enc);
    const std::vector<double> slp(span_lp.value().values().begin(),
                                  span_lp.value().values().end());
    for (std::size_t t = 0; t < slp.size(); ++t) {
      const std::size_t i = stepped.cursor, j = i + t;
      const Var label_lp = label_scores(search.pass, stepped, search.enc, i, j);
      const std::vector<double> llp(label_lp.value().values().begin(),
                                    label_lp.value().values().end());
      for (std::size_t l = 0; l < labels; ++l) {
        DecoderState next = stepped;
        next.cursor = j + 1;
        path.push_back({i, j, l});
        lps.push_back(slp[t] + llp[l]);
        double s = score;
        s += slp[t];
        s += llp[l];
        self(self, next, s);
        path.pop_back();
        lps.pop_back();
      }
    }
  };
  visit(visit, initial_state(search.pass), 0.0);

  if (trace) {
    *trace = {};
    trace->iterations = best_path.size();
    trace->complete_segmentations = complete;
    fill_trace(trace, best_lps, best_score);
  }
  return to_segmentation(model.vocab(), best_path, n);
}

double model_score(const Model& model, const Sentence& sentence,
                   const Segmentation& segmentation) {
  if (segmentation.length() != sentence.size())
    throw ContractError("model_score: segmentation length differs from sentence length");
  Search search(model, sentence);
  const auto spans = to_spans(model.vocab(), segmentation);
  DecoderState state = initial_state(search.pass);
  std::optional<LabeledSpan> prev;
  double score = 0.0;
  for (const auto& s : spans) {
    state = search.advance(state, prev);
    const Var span_lp = span_scores(search.pass, state, search.enc);
    score += span_lp.value()[s.j - s.i];
    const Var label_lp = label_scores(search.pass, state, search.enc, s.i, s.j);
    score += label_lp.value()[s.label];
    prev = s;
    state.cursor = s.j + 1;
  }
  return score;
}

std::vector<Segmentation> decode_all(const Model& model, std::span<const Sentence> sentences,
                                     std::size_t beam_width, std::size_t threads,
                                     std::vector<DecodeTrace>* traces) {
  std::vector<Segmentation> out(sentences.size());
  if (traces) traces->assign(sentences.size(), {});
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < sentences.size(); k = next++) {
      try {
        DecodeTrace* t = traces ? &(*traces)[k] : nullptr;
        out[k] = beam_width == 1 ? greedy_decode(model, sentences[k], t)
                                 : beam_decode(model, sentences[k], beam_width, t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, sentences.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace lmseg
