#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "lmseg/config.hpp"
#include "lmseg/params.hpp"
#include "lmseg/rng.hpp"
#include "lmseg/tape.hpp"
#include "lmseg/vocab.hpp"

namespace lmseg {

struct LstmParamIds {
  ParamId input = 0;
  ParamId recurrent = 0;
  ParamId bias = 0;
};

struct ModelParamIds {
  ParamId token_emb = 0;
  std::optional<ParamId> char_emb;
  std::optional<ParamId> char_conv;
  std::optional<ParamId> char_conv_bias;
  // encoder[layer][0] runs left to right, encoder[layer][1] right to left.
  std::vector<std::array<LstmParamIds, 2>> encoder;
  ParamId start = 0;      // v, the previous-segment embedding at step 1
  ParamId label_emb = 0;  // E^l, shared by segment embedding and label scores
  std::vector<LstmParamIds> decoder;
  std::optional<ParamId> mlp_weight;
  std::optional<ParamId> mlp_bias;
  ParamId span_weight = 0;   // W^s [decoder_hidden x phrase_dim]
  ParamId label_weight = 0;  // W^l [label_emb_dim x (phrase_dim + decoder_hidden)]
};

// Configuration, vocabulary and parameters of one segmenter.
class Model {
 public:
  // Fresh parameters drawn from config.seed.
  Model(Config config, Vocab vocab);
  // Adopts stored parameters; throws ValidationError when any name or shape
  // disagrees with what config and vocab imply.
  Model(Config config, Vocab vocab, ParamStore params);

  const Config& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const ModelParamIds& ids() const { return ids_; }

  // Overrides token embedding rows from a text file of "token v1 v2 ...".
  // Returns the number of rows replaced.
  std::size_t load_embeddings(const std::filesystem::path& path);

  void save(const std::filesystem::path& checkpoint) const;
  static Model load(const std::filesystem::path& checkpoint,
                    const std::filesystem::path& vocab);

 private:
  static ParamStore initial_params(const Config& config, const Vocab& vocab);
  void bind_ids();

  Config config_;
  Vocab vocab_;
  ParamStore params_;
  ModelParamIds ids_;
};

enum class Mode { kTrain, kEval };

// One forward computation: the tape it records on, the model it reads and
// the dropout stream it draws from.
class Pass {
 public:
  Pass(const Model& model, Tape& tape, Mode mode, Rng rng = Rng(0))
      : model_(model), tape_(tape), mode_(mode), rng_(rng) {}

  const Model& model() const { return model_; }
  const Config& config() const { return model_.config(); }
  Tape& tape() { return tape_; }
  bool training() const { return mode_ == Mode::kTrain; }

  Var param(ParamId id) { return tape_.param(model_.params(), id); }
  Var param_row(ParamId id, std::size_t row) {
    return tape_.param_row(model_.params(), id, row);
  }
  Var zeros(std::size_t n) { return tape_.constant(Tensor({n})); }
  Var dropout(Var x) { return lmseg::dropout(x, config().dropout, training(), rng_); }

 private:
  const Model& model_;
  Tape& tape_;
  Mode mode_;
  Rng rng_;
};

}  // namespace lmseg
