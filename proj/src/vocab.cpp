#include "lmseg/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lmseg/errors.hpp"

namespace lmseg {

namespace {
const std::string kPadSymbol = "<pad>";
const std::string kUnkSymbol = "<unk>";
}  // namespace

Vocab Vocab::build(const Corpus& corpus, std::size_t min_count) {
  if (corpus.empty()) throw DomainError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  std::set<std::string> chars;
  std::set<std::string> labels;
  for (const auto& ls : corpus) {
    for (const auto& t : ls.sentence.tokens) ++counts[t];
    for (const auto& cs : ls.sentence.chars) chars.insert(cs.begin(), cs.end());
    for (const auto& seg : iob_to_segments(ls.tags)) labels.insert(seg.label);
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  // Frequent first, ties alphabetical: ids do not depend on corpus order.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_lists(std::move(tokens), {chars.begin(), chars.end()},
                    {labels.begin(), labels.end()});
}

Vocab Vocab::from_lists(std::vector<std::string> tokens, std::vector<std::string> chars,
                        std::vector<std::string> labels) {
  Vocab v;
  v.tokens_ = {kPadSymbol, kUnkSymbol};
  v.tokens_.insert(v.tokens_.end(), tokens.begin(), tokens.end());
  v.chars_ = {kPadSymbol, kUnkSymbol};
  v.chars_.insert(v.chars_.end(), chars.begin(), chars.end());
  v.labels_ = std::move(labels);
  v.reindex();
  return v;
}

void Vocab::reindex() {
  auto index = [](const std::vector<std::string>& items, std::size_t first,
                  std::unordered_map<std::string, std::size_t>& out, const char* kind) {
    out.clear();
    for (std::size_t id = first; id < items.size(); ++id)
      if (!out.emplace(items[id], id).second)
        throw ValidationError(std::string("duplicate ") + kind + " '" + items[id] + "'");
  };
  index(tokens_, 2, token_index_, "token");
  index(chars_, 2, char_index_, "character");
  index(labels_, 0, label_index_, "label");
  if (labels_.empty()) throw ValidationError("label space is empty");
}

std::size_t Vocab::token_id(std::string_view token) const {
  auto it = token_index_.find(std::string(token));
  return it == token_index_.end() ? kUnk : it->second;
}

std::size_t Vocab::char_id(std::string_view ch) const {
  auto it = char_index_.find(std::string(ch));
  return it == char_index_.end() ? kUnk : it->second;
}

std::optional<std::size_t> Vocab::label_id(std::string_view label) const {
  auto it = label_index_.find(std::string(label));
  if (it == label_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocab::require_label(std::string_view label) const {
  if (auto id = label_id(label)) return *id;
  throw ContractError("label '" + std::string(label) + "' is not in the label space");
}

std::string Vocab::to_json() const {
  nlohmann::json j;
  j["tokens"] = std::vector<std::string>(tokens_.begin() + 2, tokens_.end());
  j["chars"] = std::vector<std::string>(chars_.begin() + 2, chars_.end());
  j["labels"] = labels_;
  return j.dump(1);
}

Vocab Vocab::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return from_lists(j.at("tokens").get<std::vector<std::string>>(),
                      j.at("chars").get<std::vector<std::string>>(),
                      j.at("labels").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed vocabulary: ") + e.what());
  }
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json() << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace lmseg
