#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lmseg {

enum class DecoderKind { kLstm, kMlp };

// Model and training hyperparameters. Defaults are the published settings
// for the chunking model; keys use kebab-case both in configuration files
// ("key = value" lines, '#' comments) and as CLI flags.
struct Config {
  std::size_t token_emb_dim = 300;
  std::size_t char_emb_dim = 30;
  std::size_t char_filters = 50;
  std::size_t char_width = 3;
  std::size_t label_emb_dim = 50;
  std::size_t encoder_hidden = 256;
  std::size_t decoder_hidden = 512;
  std::size_t layers = 2;

  bool char_cnn = true;
  DecoderKind decoder = DecoderKind::kLstm;
  bool use_phrase = true;  // h^p of the previous segment in its embedding
  bool use_label = true;   // label embedding of the previous segment

  double dropout = 0.4;
  double l2 = 1e-6;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // 0 disables clipping

  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;
  std::string embeddings;  // optional pretrained token vectors

  static const std::vector<std::string>& keys();
  // Throws ValidationError for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  // Throws ValidationError naming every offending key.
  void validate() const;

  // Derived sizes.
  std::size_t token_repr_dim() const {
    return token_emb_dim + (char_cnn ? char_filters : 0);
  }
  std::size_t context_dim() const { return 2 * encoder_hidden; }
  std::size_t phrase_dim() const { return 3 * context_dim(); }
  std::size_t segment_emb_dim() const {
    return (use_phrase ? phrase_dim() : 0) + (use_label ? label_emb_dim : 0);
  }

  std::string to_text() const;
  static Config from_text(std::string_view text);
  // Applies the assignments in text on top of this configuration.
  void merge_text(std::string_view text);
  static Config load(const std::filesystem::path& path);

  friend bool operator==(const Config& a, const Config& b) {
    return a.to_text() == b.to_text();
  }
};

}  // namespace lmseg
