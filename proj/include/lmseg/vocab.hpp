#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmseg/corpus.hpp"

namespace lmseg {

// Index domains of the token embedding, character embedding and label
// embedding tables. Token and character ids 0 and 1 are reserved for
// padding and unknown; labels have no reserved entries.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocab() = default;
  // Tokens seen fewer than min_count times map to kUnk. Characters come
  // from every training token; labels from every segment, O included.
  static Vocab build(const Corpus& corpus, std::size_t min_count = 1);
  static Vocab from_lists(std::vector<std::string> tokens,
                          std::vector<std::string> chars,
                          std::vector<std::string> labels);

  std::size_t token_id(std::string_view token) const;
  std::size_t char_id(std::string_view ch) const;
  std::optional<std::size_t> label_id(std::string_view label) const;
  // Throws ContractError for labels outside the label space.
  std::size_t require_label(std::string_view label) const;

  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::size_t token_count() const { return tokens_.size(); }
  std::size_t char_count() const { return chars_.size(); }
  std::size_t label_count() const { return labels_.size(); }

  std::string to_json() const;
  static Vocab from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_ && a.chars_ == b.chars_ && a.labels_ == b.labels_;
  }

 private:
  void reindex();

  std::vector<std::string> tokens_;
  std::vector<std::string> chars_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> token_index_;
  std::unordered_map<std::string, std::size_t> char_index_;
  std::unordered_map<std::string, std::size_t> label_index_;
};

}  // namespace lmseg
