#include <filesystem>
#include <set>

#include "doctest.h"
#include "lmseg/errors.hpp"
#include "lmseg/synth.hpp"

using namespace lmseg;

namespace {

Segmentation label(RuleSet rules, std::vector<std::string> tokens) {
  return apply_rules(rules, tokens);
}

}  // namespace

TEST_CASE("digit runs are one segment") {
  CHECK(label(RuleSet::kBasic, {"a", "1", "2", "3", "b"}) ==
        Segmentation({{1, 1, "O"}, {2, 4, "NUM"}, {5, 5, "O"}}, 5));
}

TEST_CASE("phrase rules") {
  CHECK(label(RuleSet::kBasic, {"the", "big", "old", "cat", "will", "often", "eats", "in", "a",
                                "city", "."}) ==
        Segmentation({{1, 4, "NP"}, {5, 7, "VP"}, {8, 8, "PP"}, {9, 10, "NP"}, {11, 11, "O"}},
                     11));
  // A determiner without its noun is not a phrase.
  CHECK(label(RuleSet::kBasic, {"the", "big", "4"}) ==
        Segmentation({{1, 1, "O"}, {2, 2, "O"}, {3, 3, "NUM"}}, 3));
}

TEST_CASE("linking words take the parity of their position") {
  CHECK(label(RuleSet::kCross, {"so", "big", "cat", "then"}) ==
        Segmentation({{1, 1, "ODD"}, {2, 3, "NP"}, {4, 4, "ODD"}}, 4));
  CHECK(label(RuleSet::kCross, {"cat", "so", "1", "2", "then", "dog", "still"}) ==
        Segmentation({{1, 1, "NP"}, {2, 2, "EVEN"}, {3, 4, "NUM"}, {5, 5, "EVEN"},
                      {6, 6, "NP"}, {7, 7, "EVEN"}},
                     7));
  // Without the cross rules they are ordinary O tokens.
  CHECK(label(RuleSet::kBasic, {"so"}) == Segmentation({{1, 1, "O"}}, 1));
}

TEST_CASE("generation is deterministic and well formed") {
  const SynthCorpus a = generate(RuleSet::kCross, 300, 4);
  const SynthCorpus b = generate(RuleSet::kCross, 300, 4);
  const SynthCorpus c = generate(RuleSet::kCross, 300, 5);
  CHECK(a.train.size() == 240);
  CHECK(a.dev.size() == 30);
  CHECK(a.test.size() == 30);
  auto same = [](const Corpus& x, const Corpus& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k].sentence.tokens != y[k].sentence.tokens || x[k].tags != y[k].tags) return false;
    return true;
  };
  CHECK(same(a.train, b.train));
  CHECK(same(a.test, b.test));
  CHECK_FALSE(same(a.train, c.train));

  std::set<std::size_t> lengths;
  std::set<std::string> labels;
  for (const Corpus* part : {&a.train, &a.dev, &a.test}) {
    for (const auto& ls : *part) {
      const Segmentation s = iob_to_segments(ls.tags);
      CHECK(segments_to_iob(s) == ls.tags);
      CHECK(s == apply_rules(RuleSet::kCross, ls.sentence.tokens));
      for (const auto& seg : s) {
        lengths.insert(seg.length());
        labels.insert(seg.label);
      }
    }
  }
  for (std::size_t len = 1; len <= 5; ++len) CHECK(lengths.contains(len));
  CHECK(labels == std::set<std::string>{"EVEN", "NP", "NUM", "O", "ODD", "PP", "VP"});
}

TEST_CASE("small corpora") {
  CHECK_THROWS_AS(generate(RuleSet::kBasic, 2, 1), DomainError);
  const SynthCorpus tiny = generate(RuleSet::kBasic, 3, 1);
  CHECK(tiny.train.size() == 1);
  CHECK(tiny.dev.size() == 1);
  CHECK(tiny.test.size() == 1);
  CHECK_THROWS_AS(parse_rule_set("fancy"), DomainError);
  CHECK(parse_rule_set("cross") == RuleSet::kCross);
}

TEST_CASE("written splits parse back") {
  const auto dir = std::filesystem::temp_directory_path() / "lmseg_test_synth";
  std::filesystem::remove_all(dir);
  const SynthCorpus c = generate(RuleSet::kBasic, 30, 2);
  write_synth(c, dir);
  const Corpus back = parse_column_file(dir / "train.txt");
  REQUIRE(back.size() == c.train.size());
  CHECK(back[3].tags == c.train[3].tags);
}
