#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lmseg {

inline constexpr std::string_view kOutside = "O";

struct Sentence {
  std::vector<std::string> tokens;
  // UTF-8 code points of each token.
  std::vector<std::vector<std::string>> chars;

  std::size_t size() const { return tokens.size(); }

  // Throws ContractError for an empty sentence or an empty token.
  static Sentence from_tokens(std::vector<std::string> tokens);
};

std::vector<std::string> utf8_chars(std::string_view text);

// A labeled span with 1-based inclusive bounds.
struct Segment {
  std::size_t i = 0;
  std::size_t j = 0;
  std::string label;

  std::size_t length() const { return j - i + 1; }
  friend auto operator<=>(const Segment&, const Segment&) = default;
};

// Ordered segments that exactly tile tokens 1..n. The cover invariant is
// checked on construction (ContractError when violated).
class Segmentation {
 public:
  Segmentation() = default;
  Segmentation(std::vector<Segment> segments, std::size_t length);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t length() const { return length_; }
  std::size_t count() const { return segments_.size(); }
  auto begin() const { return segments_.begin(); }
  auto end() const { return segments_.end(); }
  const Segment& operator[](std::size_t k) const { return segments_[k]; }

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

 private:
  std::vector<Segment> segments_;
  std::size_t length_ = 0;
};

// Splits "B-NP" into ('B', "NP"); "O" gives ('O', ""). Throws SchemeError
// (line number `line`) for anything outside O / B-X / I-X.
struct IobTag {
  char prefix = 'O';
  std::string type;
};
IobTag parse_iob_tag(std::string_view tag, std::size_t line = 0);
bool is_valid_iob_tag(std::string_view tag);

// Maximal runs become segments; every O token is its own segment labeled
// O; an I-X that does not continue a chunk of type X opens a new segment.
Segmentation iob_to_segments(std::span<const std::string> tags);
std::vector<std::string> segments_to_iob(const Segmentation& segmentation);

struct LabeledSentence {
  Sentence sentence;
  std::vector<std::string> tags;
};
using Corpus = std::vector<LabeledSentence>;

// Column reader. Column indices are 0-based; a negative tag column counts
// from the end (-1 = last field). Blank lines separate sentences.
struct ColumnSpec {
  int token_column = 0;
  int tag_column = -1;
};

Corpus parse_columns(std::istream& in, ColumnSpec spec = {});
Corpus parse_column_file(const std::filesystem::path& path, ColumnSpec spec = {});
// Tokens only, for unlabeled prediction input.
std::vector<Sentence> parse_token_columns(std::istream& in, int token_column = 0);

// Writes "token tag" blocks separated by blank lines.
void write_columns(std::ostream& out, const Corpus& corpus);

std::vector<std::string> split_fields(std::string_view line);
bool is_blank(std::string_view line);

}  // namespace lmseg
