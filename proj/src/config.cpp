#include "lmseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "lmseg/corpus.hpp"
#include "lmseg/errors.hpp"

namespace lmseg {

namespace {

std::string normalize(std::string_view key) {
  std::string k(key);
  for (char& c : k)
    if (c == '_') c = '-';
  return k;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ValidationError("invalid value '" + std::string(value) + "' for key '" +
                        std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<void(Config&, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
Field size_field(std::string key, T Config::*member) {
  return {key,
          [key, member](Config& c, std::string_view v) {
            c.*member = parse_number<T>(key, v);
          },
          [member](const Config& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string key, double Config::*member) {
  return {key,
          [key, member](Config& c, std::string_view v) {
            c.*member = parse_number<double>(key, v);
          },
          [member](const Config& c) { return format_double(c.*member); }};
}

Field bool_field(std::string key, bool Config::*member) {
  return {key,
          [key, member](Config& c, std::string_view v) { c.*member = parse_bool(key, v); },
          [member](const Config& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      size_field("token-emb-dim", &Config::token_emb_dim),
      size_field("char-emb-dim", &Config::char_emb_dim),
      size_field("char-filters", &Config::char_filters),
      size_field("char-width", &Config::char_width),
      size_field("label-emb-dim", &Config::label_emb_dim),
      size_field("encoder-hidden", &Config::encoder_hidden),
      size_field("decoder-hidden", &Config::decoder_hidden),
      size_field("layers", &Config::layers),
      bool_field("char-cnn", &Config::char_cnn),
      {"decoder",
       [](Config& c, std::string_view v) {
         if (v == "lstm") c.decoder = DecoderKind::kLstm;
         else if (v == "mlp") c.decoder = DecoderKind::kMlp;
         else bad_value("decoder", v);
       },
       [](const Config& c) {
         return std::string(c.decoder == DecoderKind::kLstm ? "lstm" : "mlp");
       }},
      bool_field("use-phrase", &Config::use_phrase),
      bool_field("use-label", &Config::use_label),
      double_field("dropout", &Config::dropout),
      double_field("l2", &Config::l2),
      double_field("lr", &Config::lr),
      double_field("beta1", &Config::beta1),
      double_field("beta2", &Config::beta2),
      double_field("eps", &Config::eps),
      double_field("clip-norm", &Config::clip_norm),
      size_field("batch-size", &Config::batch_size),
      size_field("max-epochs", &Config::max_epochs),
      size_field("patience", &Config::patience),
      size_field("min-count", &Config::min_count),
      size_field("seed", &Config::seed),
      {"embeddings", [](Config& c, std::string_view v) { c.embeddings = std::string(v); },
       [](const Config& c) { return c.embeddings; }},
  };
  return table;
}

const Field& field(std::string_view key) {
  const std::string k = normalize(key);
  for (const auto& f : fields())
    if (f.key == k) return f;
  throw ValidationError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return out;
}

void Config::set(std::string_view key, std::string_view value) {
  field(key).set(*this, value);
}

std::string Config::get(std::string_view key) const { return field(key).get(*this); }

void Config::validate() const {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* key) {
    if (!ok) bad.emplace_back(key);
  };
  need(token_emb_dim > 0, "token-emb-dim");
  need(!char_cnn || char_emb_dim > 0, "char-emb-dim");
  need(!char_cnn || char_filters > 0, "char-filters");
  need(!char_cnn || (char_width > 0 && char_width % 2 == 1), "char-width");
  need(label_emb_dim > 0, "label-emb-dim");
  need(encoder_hidden > 0, "encoder-hidden");
  need(decoder_hidden > 0, "decoder-hidden");
  need(layers > 0, "layers");
  need(dropout >= 0.0 && dropout < 1.0, "dropout");
  need(l2 >= 0.0, "l2");
  need(lr > 0.0, "lr");
  need(beta1 >= 0.0 && beta1 < 1.0, "beta1");
  need(beta2 >= 0.0 && beta2 < 1.0, "beta2");
  need(eps > 0.0, "eps");
  need(clip_norm >= 0.0, "clip-norm");
  need(batch_size >= 1, "batch-size");
  need(max_epochs >= 1, "max-epochs");
  need(min_count >= 1, "min-count");
  if (!use_phrase && !use_label) {
    // The previous-segment embedding would be empty.
    bad.emplace_back("use-phrase");
    bad.emplace_back("use-label");
  }
  if (bad.empty()) return;
  std::string msg = "invalid configuration; check keys:";
  for (const auto& k : bad) msg += " " + k;
  throw ValidationError(msg);
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

void Config::merge_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (is_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) +
                            ": expected 'key = value'");
    auto key = split_fields(line.substr(0, eq));
    auto value = split_fields(line.substr(eq + 1));
    if (key.size() != 1 || value.size() > 1)
      throw ValidationError("config line " + std::to_string(lineno) +
                            ": expected 'key = value'");
    set(key[0], value.empty() ? "" : value[0]);
  }
}

Config Config::from_text(std::string_view text) {
  Config c;
  c.merge_text(text);
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace lmseg
