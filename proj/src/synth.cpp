#include "lmseg/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <utility>

#include "lmseg/errors.hpp"
#include "lmseg/rng.hpp"

namespace lmseg {

namespace {

using Words = std::span<const std::string_view>;

constexpr std::array<std::string_view, 5> kDets = {"the", "a", "this", "every", "some"};
constexpr std::array<std::string_view, 8> kAdjs = {"big",  "small", "red",   "old",
                                                   "new",  "green", "quiet", "fast"};
constexpr std::array<std::string_view, 10> kNouns = {"cat",  "dog",   "house", "car",  "tree",
                                                     "bird", "river", "book",  "city", "farmer"};
constexpr std::array<std::string_view, 4> kAuxes = {"will", "can", "must", "may"};
constexpr std::array<std::string_view, 3> kAdvs = {"quickly", "often", "never"};
constexpr std::array<std::string_view, 8> kVerbs = {"runs",   "sees",  "takes", "finds",
                                                    "builds", "likes", "moves", "eats"};
constexpr std::array<std::string_view, 5> kPreps = {"in", "on", "with", "at", "under"};
constexpr std::array<std::string_view, 2> kPuncts = {",", ";"};
constexpr std::array<std::string_view, 3> kLinks = {"so", "then", "still"};

bool in(Words words, std::string_view w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

bool is_digit(std::string_view w) { return w.size() == 1 && w[0] >= '0' && w[0] <= '9'; }

}  // namespace

RuleSet parse_rule_set(std::string_view name) {
  if (name == "basic") return RuleSet::kBasic;
  if (name == "cross") return RuleSet::kCross;
  throw DomainError("unknown rule set '" + std::string(name) + "' (expected basic or cross)");
}

std::string_view rule_set_name(RuleSet rules) {
  return rules == RuleSet::kBasic ? "basic" : "cross";
}

Segmentation apply_rules(RuleSet rules, std::span<const std::string> tokens) {
  const std::size_t n = tokens.size();
  std::vector<Segment> segs;
  std::size_t k = 0;  // 0-based position of the next unlabeled token
  auto emit = [&](std::size_t len, std::string label) {
    segs.push_back({k + 1, k + len, std::move(label)});
    k += len;
  };
  while (k < n) {
    const std::string& w = tokens[k];
    if (is_digit(w)) {
      std::size_t e = k;
      while (e < n && is_digit(tokens[e])) ++e;
      emit(e - k, "NUM");
      continue;
    }
    if (in(kDets, w) || in(kAdjs, w) || in(kNouns, w)) {
      std::size_t e = k;
      if (in(kDets, tokens[e])) ++e;
      while (e < n && in(kAdjs, tokens[e])) ++e;
      if (e < n && in(kNouns, tokens[e])) {
        emit(e - k + 1, "NP");
        continue;
      }
    } else if (in(kAuxes, w) || in(kAdvs, w) || in(kVerbs, w)) {
      std::size_t e = k;
      if (in(kAuxes, tokens[e])) ++e;
      if (e < n && in(kAdvs, tokens[e])) ++e;
      if (e < n && in(kVerbs, tokens[e])) {
        emit(e - k + 1, "VP");
        continue;
      }
    } else if (in(kPreps, w)) {
      emit(1, "PP");
      continue;
    } else if (rules == RuleSet::kCross && in(kLinks, w)) {
      // Parity of the segment's own 1-based position in the sentence.
      emit(1, segs.size() % 2 == 0 ? "ODD" : "EVEN");
      continue;
    }
    emit(1, std::string(kOutside));
  }
  return Segmentation(std::move(segs), n);
}

namespace {

enum class Unit { kNp, kVp, kPp, kNum, kPunct, kLink };

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return std::string(words[rng.below(N)]);
}

void emit_unit(Unit unit, Rng& rng, std::vector<std::string>& out) {
  switch (unit) {
    case Unit::kNp: {
      // Lengths 1 to 5: usually a determiner, up to three adjectives, noun.
      if (rng.below(4)) out.push_back(pick(kDets, rng));
      for (std::size_t a = rng.below(4); a > 0; --a) out.push_back(pick(kAdjs, rng));
      out.push_back(pick(kNouns, rng));
      break;
    }
    case Unit::kVp:
      if (rng.below(2)) out.push_back(pick(kAuxes, rng));
      if (rng.below(3) == 0) out.push_back(pick(kAdvs, rng));
      out.push_back(pick(kVerbs, rng));
      break;
    case Unit::kPp:
      out.push_back(pick(kPreps, rng));
      break;
    case Unit::kNum:
      for (std::size_t d = 2 + rng.below(5); d > 0; --d)
        out.push_back(std::string(1, static_cast<char>('0' + rng.below(10))));
      break;
    case Unit::kPunct:
      out.push_back(pick(kPuncts, rng));
      break;
    case Unit::kLink:
      out.push_back(pick(kLinks, rng));
      break;
  }
}

std::vector<std::string> draw_sentence(RuleSet rules, Rng& rng) {
  std::vector<std::string> tokens;
  const std::size_t units = 4 + rng.below(6);
  std::optional<Unit> last;
  for (std::size_t u = 0; u < units; ++u) {
    Unit unit;
    do {
      const std::size_t r = rng.below(rules == RuleSet::kCross ? 14 : 12);
      unit = r < 5    ? Unit::kNp
             : r < 8  ? Unit::kVp
             : r < 9  ? Unit::kPp
             : r < 11 ? Unit::kNum
             : r < 12 ? Unit::kPunct
                      : Unit::kLink;
      // Adjacent digit runs would merge. Back-to-back links would let the
      // previous label alone decide the next one.
    } while ((unit == Unit::kNum || unit == Unit::kLink) && last == unit);
    emit_unit(unit, rng, tokens);
    last = unit;
  }
  tokens.push_back(".");
  return tokens;
}

}  // namespace

SynthCorpus generate(RuleSet rules, std::size_t n_sentences, std::uint64_t seed) {
  if (n_sentences < 3)
    throw DomainError("generate: need at least 3 sentences to split, got " +
                      std::to_string(n_sentences));
  Rng rng = Rng(seed).split("synth").split(rule_set_name(rules));
  const std::size_t held = std::max<std::size_t>(1, n_sentences / 10);
  const std::size_t train_size = n_sentences - 2 * held;
  SynthCorpus out;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    auto tokens = draw_sentence(rules, rng);
    auto tags = segments_to_iob(apply_rules(rules, tokens));
    LabeledSentence ls{Sentence::from_tokens(std::move(tokens)), std::move(tags)};
    Corpus& target = s < train_size ? out.train : s < train_size + held ? out.dev : out.test;
    target.push_back(std::move(ls));
  }
  return out;
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const Corpus*> parts[] = {
      {"train.txt", &corpus.train}, {"dev.txt", &corpus.dev}, {"test.txt", &corpus.test}};
  for (const auto& [name, part] : parts) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    write_columns(out, *part);
  }
}

}  // namespace lmseg
