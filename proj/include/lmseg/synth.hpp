#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "lmseg/corpus.hpp"

namespace lmseg {

// Token grammars for generated corpora.
//   basic: [det] adj* noun -> NP, [aux] [adv] verb -> VP, preposition -> PP,
//          digit run -> NUM, anything else -> O.
//   cross: basic plus single-token linking words ("so", "then", "still")
//          labeled ODD or EVEN by the parity of their segment position, so
//          the label depends on how the whole prefix was segmented.
enum class RuleSet { kBasic, kCross };

RuleSet parse_rule_set(std::string_view name);  // DomainError when unknown
std::string_view rule_set_name(RuleSet rules);

// Labels a token sequence under the rules, left to right.
Segmentation apply_rules(RuleSet rules, std::span<const std::string> tokens);

struct SynthCorpus {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Draws n_sentences sentences and splits them 80/10/10 (dev and test get at
// least one each). DomainError when n_sentences < 3.
SynthCorpus generate(RuleSet rules, std::size_t n_sentences, std::uint64_t seed);

// Writes train.txt, dev.txt and test.txt in two-column format.
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace lmseg
