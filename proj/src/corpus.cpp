#include "lmseg/corpus.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "lmseg/errors.hpp"

namespace lmseg {

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t k = 0;
  while (k < text.size()) {
    const auto lead = static_cast<unsigned char>(text[k]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, text.size() - k);  // truncated sequence: keep bytes
    out.emplace_back(text.substr(k, len));
    k += len;
  }
  return out;
}

Sentence Sentence::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw ContractError("sentence has no tokens");
  Sentence s;
  s.chars.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.empty()) throw ContractError("sentence contains an empty token");
    s.chars.push_back(utf8_chars(t));
  }
  s.tokens = std::move(tokens);
  return s;
}

Segmentation::Segmentation(std::vector<Segment> segments, std::size_t length)
    : segments_(std::move(segments)), length_(length) {
  if (length_ == 0) throw ContractError("segmentation of an empty sentence");
  std::size_t next = 1;
  for (const auto& s : segments_) {
    if (s.i != next || s.j < s.i || s.j > length_)
      throw ContractError("segments do not tile 1.." + std::to_string(length_) +
                          ": got (" + std::to_string(s.i) + "," +
                          std::to_string(s.j) + ") where start " +
                          std::to_string(next) + " was expected");
    if (s.label.empty()) throw ContractError("segment with empty label");
    next = s.j + 1;
  }
  if (next != length_ + 1)
    throw ContractError("segments stop at token " + std::to_string(next - 1) +
                        " of " + std::to_string(length_));
}

bool is_valid_iob_tag(std::string_view tag) {
  if (tag == kOutside) return true;
  return tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

IobTag parse_iob_tag(std::string_view tag, std::size_t line) {
  if (!is_valid_iob_tag(tag))
    throw SchemeError("tag '" + std::string(tag) + "' is not O, B-X or I-X", line);
  if (tag == kOutside) return {'O', ""};
  return {tag[0], std::string(tag.substr(2))};
}

Segmentation iob_to_segments(std::span<const std::string> tags) {
  if (tags.empty()) throw ContractError("iob_to_segments: empty tag sequence");
  std::vector<Segment> segs;
  std::string open_type;  // type of the chunk the previous token belongs to
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const std::size_t pos = k + 1;
    const IobTag tag = parse_iob_tag(tags[k]);
    if (tag.prefix == 'O') {
      segs.push_back({pos, pos, std::string(kOutside)});
      open_type.clear();
    } else if (tag.prefix == 'I' && !open_type.empty() && open_type == tag.type) {
      segs.back().j = pos;
    } else {
      segs.push_back({pos, pos, tag.type});
      open_type = tag.type;
    }
  }
  return Segmentation(std::move(segs), tags.size());
}

std::vector<std::string> segments_to_iob(const Segmentation& seg) {
  std::vector<std::string> tags;
  tags.reserve(seg.length());
  for (const auto& s : seg) {
    if (s.label == kOutside) {
      for (std::size_t k = s.i; k <= s.j; ++k) tags.emplace_back(kOutside);
      continue;
    }
    tags.push_back("B-" + s.label);
    for (std::size_t k = s.i + 1; k <= s.j; ++k) tags.push_back("I-" + s.label);
  }
  return tags;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t k = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (k < line.size()) {
    while (k < line.size() && space(line[k])) ++k;
    const std::size_t start = k;
    while (k < line.size() && !space(line[k])) ++k;
    if (k > start) out.emplace_back(line.substr(start, k - start));
  }
  return out;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

namespace {

std::size_t resolve_column(int column, std::size_t fields, std::size_t line,
                           const char* what) {
  const long idx = column < 0 ? static_cast<long>(fields) + column : column;
  if (idx < 0 || static_cast<std::size_t>(idx) >= fields)
    throw ParseError(std::string("missing ") + what + " column " +
                         std::to_string(column) + " (line has " +
                         std::to_string(fields) + " fields)",
                     line);
  return static_cast<std::size_t>(idx);
}

template <typename OnToken>
void read_blocks(std::istream& in, OnToken on_token,
                 const std::function<void()>& on_end) {
  std::string line;
  std::size_t lineno = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) {
      if (open) on_end();
      open = false;
      continue;
    }
    on_token(split_fields(line), lineno);
    open = true;
  }
  if (open) on_end();
}

}  // namespace

Corpus parse_columns(std::istream& in, ColumnSpec spec) {
  Corpus corpus;
  std::vector<std::string> tokens, tags;
  read_blocks(
      in,
      [&](const std::vector<std::string>& fields, std::size_t line) {
        const auto tc = resolve_column(spec.token_column, fields.size(), line, "token");
        const auto gc = resolve_column(spec.tag_column, fields.size(), line, "tag");
        parse_iob_tag(fields[gc], line);
        tokens.push_back(fields[tc]);
        tags.push_back(fields[gc]);
      },
      [&] {
        corpus.push_back({Sentence::from_tokens(std::move(tokens)), std::move(tags)});
        tokens.clear();
        tags.clear();
      });
  return corpus;
}

Corpus parse_column_file(const std::filesystem::path& path, ColumnSpec spec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return parse_columns(in, spec);
}

std::vector<Sentence> parse_token_columns(std::istream& in, int token_column) {
  std::vector<Sentence> out;
  std::vector<std::string> tokens;
  read_blocks(
      in,
      [&](const std::vector<std::string>& fields, std::size_t line) {
        tokens.push_back(fields[resolve_column(token_column, fields.size(), line, "token")]);
      },
      [&] {
        out.push_back(Sentence::from_tokens(std::move(tokens)));
        tokens.clear();
      });
  return out;
}

void write_columns(std::ostream& out, const Corpus& corpus) {
  for (const auto& ls : corpus) {
    for (std::size_t k = 0; k < ls.sentence.size(); ++k)
      out << ls.sentence.tokens[k] << ' ' << ls.tags[k] << '\n';
    out << '\n';
  }
}

}  // namespace lmseg
