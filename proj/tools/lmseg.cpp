// Command-line front end: train, predict, eval, bucket-eval, time, inspect,
// synth.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lmseg/config.hpp"
#include "lmseg/corpus.hpp"
#include "lmseg/errors.hpp"
#include "lmseg/eval.hpp"
#include "lmseg/inference.hpp"
#include "lmseg/model.hpp"
#include "lmseg/synth.hpp"
#include "lmseg/timing.hpp"
#include "lmseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace lmseg;

namespace {

constexpr const char* kSeedEnv = "LMSEG_SEED";

struct ModelPaths {
  std::string dir;
  std::string checkpoint;
  std::string vocab;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", dir, "Directory written by 'train'");
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint file (overrides --model)");
    cmd->add_option("--vocab", vocab, "Vocabulary file (overrides --model)");
  }

  Model load() const {
    fs::path ck = checkpoint, vo = vocab;
    if (ck.empty()) ck = fs::path(dir) / "model.ckpt";
    if (vo.empty()) vo = fs::path(dir) / "vocab.json";
    if (dir.empty() && (checkpoint.empty() || vocab.empty()))
      throw ValidationError("give --model, or both --checkpoint and --vocab");
    return Model::load(ck, vo);
  }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string train_path;
  std::string dev_path;
  std::string out_dir;
  std::size_t threads = 1;
  std::map<std::string, std::string> overrides;
};

int run_train(const TrainArgs& args) {
  // Precedence: built-in defaults < LMSEG_SEED < config file < flags.
  Config config;
  if (const char* seed = std::getenv(kSeedEnv)) config.set("seed", seed);
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw IoError("cannot read " + args.config_path);
    std::stringstream text;
    text << in.rdbuf();
    config.merge_text(text.str());
  }
  for (const auto& [key, value] : args.overrides) config.set(key, value);
  config.validate();

  const Corpus train_corpus = parse_column_file(args.train_path);
  const Corpus dev_corpus = parse_column_file(args.dev_path);
  fs::create_directories(args.out_dir);
  const fs::path out = args.out_dir;

  TrainOptions options;
  options.threads = args.threads;
  options.on_epoch = [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << "  loss " << e.loss << "  dev F1 " << percent(e.dev_f1)
              << "  " << e.seconds << "s" << (e.improved ? "  *" : "") << "\n";
  };
  const TrainResult result = train(train_corpus, dev_corpus, config, options);

  result.model.save(out / "model.ckpt");
  result.model.vocab().save(out / "vocab.json");
  write_file(out / "config.txt", config.to_text());
  write_file(out / "report.jsonl", result.report.records());
  write_file(out / "timing.jsonl", result.report.records(true));
  std::cout << "best epoch " << result.report.best_epoch << ", dev F1 "
            << percent(result.report.best_dev_f1) << "\n";
  return 0;
}

// predict -------------------------------------------------------------------

struct PredictArgs {
  ModelPaths model;
  std::string input;
  std::string output;
  std::string segments_out;
  std::size_t beam = 1;
  std::size_t threads = 1;
  int token_column = 0;
};

int run_predict(const PredictArgs& args) {
  if (args.beam < 1) throw DomainError("--beam must be at least 1");
  const Model model = args.model.load();
  const auto lines = read_lines(args.input);

  // Sentences are runs of non-blank lines; remember where each one starts.
  std::vector<Sentence> sentences;
  std::vector<std::size_t> starts;
  std::vector<std::string> tokens;
  for (std::size_t k = 0; k <= lines.size(); ++k) {
    if (k == lines.size() || is_blank(lines[k])) {
      if (!tokens.empty()) {
        starts.push_back(k - tokens.size());
        sentences.push_back(Sentence::from_tokens(std::move(tokens)));
        tokens.clear();
      }
      continue;
    }
    const auto fields = split_fields(lines[k]);
    const int c = args.token_column < 0 ? static_cast<int>(fields.size()) + args.token_column
                                        : args.token_column;
    if (c < 0 || c >= static_cast<int>(fields.size()))
      throw ParseError("no token column " + std::to_string(args.token_column), k + 1);
    tokens.push_back(fields[c]);
  }

  std::vector<DecodeTrace> traces;
  const auto predictions = decode_all(model, sentences, args.beam, args.threads, &traces);

  std::vector<std::string> tags(lines.size());
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto t = segments_to_iob(predictions[s]);
    for (std::size_t k = 0; k < t.size(); ++k) tags[starts[s] + k] = t[k];
  }
  std::ostringstream text;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (is_blank(lines[k])) text << "\n";
    else text << lines[k] << ' ' << tags[k] << "\n";
  }
  if (args.output.empty() || args.output == "-") std::cout << text.str();
  else write_file(args.output, text.str());

  if (!args.segments_out.empty()) {
    std::string records;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      std::size_t k = 0;
      for (const auto& seg : predictions[s]) {
        records += nlohmann::json{{"sentence", s + 1},
                                  {"i", seg.i},
                                  {"j", seg.j},
                                  {"label", seg.label},
                                  {"logprob", traces[s].segment_logprobs.at(k++)}}
                       .dump() +
                   "\n";
      }
    }
    write_file(args.segments_out, records);
  }
  return 0;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string path;
  std::vector<std::size_t> buckets;
  bool json = false;
};

int run_eval(const EvalArgs& args, bool force_buckets) {
  const PredictionFile file = read_prediction_file(args.path);
  const F1Report report = chunk_f1_tags(file.gold, file.pred);
  std::cout << (args.json ? report_records(report) : format_report(report));
  if (!args.buckets.empty() || force_buckets) {
    const auto edges = args.buckets.empty() ? kDefaultBucketEdges : args.buckets;
    const BucketReport buckets = bucket_f1_tags(file.gold, file.pred, edges);
    std::cout << (args.json ? bucket_records(buckets) : format_buckets(buckets));
  }
  return 0;
}

// time / inspect / synth ----------------------------------------------------

struct TimeArgs {
  ModelPaths model;
  std::string data;
  std::size_t batch_size = 16;
  std::size_t threads = 1;
  bool json = false;
};

int run_time(const TimeArgs& args) {
  const Model model = args.model.load();
  const TimingReport r = timing(model, parse_column_file(args.data), args.batch_size, args.threads);
  std::cout << (args.json ? r.record() + "\n" : r.format());
  return 0;
}

int run_inspect(const ModelPaths& paths) {
  const Model model = paths.load();
  const ParamStore& params = model.params();
  std::cout << "step: " << params.step << "\nseed: " << params.seed << "\n";
  std::cout << "tokens: " << model.vocab().token_count() << "  chars: " << model.vocab().char_count()
            << "  labels: " << model.vocab().label_count() << "\n";
  std::cout << "labels:";
  for (const auto& l : model.vocab().labels()) std::cout << ' ' << l;
  std::cout << "\nparameters: " << params.scalar_count() << "\n";
  for (const auto& p : params) std::cout << "  " << p.name << ' ' << shape_string(p.value.shape()) << "\n";
  std::cout << "config:\n" << model.config().to_text();
  return 0;
}

struct SynthArgs {
  std::string rules = "cross";
  std::size_t sentences = 250;
  std::uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& args) {
  const SynthCorpus corpus = generate(parse_rule_set(args.rules), args.sentences, args.seed);
  write_synth(corpus, args.out);
  std::cout << corpus.train.size() << " train, " << corpus.dev.size() << " dev, "
            << corpus.test.size() << " test sentences in " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leftmost-segment sequence segmenter"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best dev epoch");
  train_cmd->add_option("--config", train_args.config_path, "key = value configuration file");
  train_cmd->add_option("--train", train_args.train_path, "Training data (token ... tag)")->required();
  train_cmd->add_option("--dev", train_args.dev_path, "Development data")->required();
  train_cmd->add_option("--out", train_args.out_dir, "Output directory")->required();
  train_cmd->add_option("--threads", train_args.threads, "Dev evaluation threads");
  std::map<std::string, std::string> flag_values;
  for (const auto& key : Config::keys())
    train_cmd->add_option("--" + key, flag_values[key], "Overrides '" + key + "'");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Append a predicted tag column");
  predict_args.model.add_to(predict_cmd);
  predict_cmd->add_option("--input", predict_args.input, "Column file")->required();
  predict_cmd->add_option("--output", predict_args.output, "Output file (default stdout)");
  predict_cmd->add_option("--beam", predict_args.beam, "Beam width; 1 is greedy");
  predict_cmd->add_option("--threads", predict_args.threads, "Decoding threads");
  predict_cmd->add_option("--token-column", predict_args.token_column, "0-based, negative from end");
  predict_cmd->add_option("--segments-out", predict_args.segments_out,
                          "Per-segment JSON lines with log-probabilities");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Chunk F1 of a token/gold/predicted file");
  eval_cmd->add_option("file", eval_args.path, "Prediction file")->required();
  eval_cmd->add_option("--buckets", eval_args.buckets, "Length bucket edges, e.g. 22,44,66,88")
      ->delimiter(',');
  eval_cmd->add_flag("--json", eval_args.json, "JSON lines instead of tables");

  EvalArgs bucket_args;
  auto* bucket_cmd = app.add_subcommand("bucket-eval", "Chunk F1 by sentence length");
  bucket_cmd->add_option("file", bucket_args.path, "Prediction file")->required();
  bucket_cmd->add_option("--buckets", bucket_args.buckets, "Bucket edges")->delimiter(',');
  bucket_cmd->add_flag("--json", bucket_args.json, "JSON lines instead of tables");

  TimeArgs time_args;
  auto* time_cmd = app.add_subcommand("time", "Time one training epoch and one decoding pass");
  time_args.model.add_to(time_cmd);
  time_cmd->add_option("--data", time_args.data, "Labeled column file")->required();
  time_cmd->add_option("--batch-size", time_args.batch_size, "Training batch size");
  time_cmd->add_option("--threads", time_args.threads, "Decoding threads");
  time_cmd->add_flag("--json", time_args.json, "One JSON object instead of text");

  ModelPaths inspect_paths;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print checkpoint metadata");
  inspect_paths.add_to(inspect_cmd);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--rules", synth_args.rules, "basic or cross");
  synth_cmd->add_option("--sentences", synth_args.sentences, "Total sentences");
  synth_cmd->add_option("--seed", synth_args.seed, "Generator seed");
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) {
      for (const auto& key : Config::keys())
        if (train_cmd->count("--" + key)) train_args.overrides[key] = flag_values[key];
      return run_train(train_args);
    }
    if (*predict_cmd) return run_predict(predict_args);
    if (*eval_cmd) return run_eval(eval_args, false);
    if (*bucket_cmd) return run_eval(bucket_args, true);
    if (*time_cmd) return run_time(time_args);
    if (*inspect_cmd) return run_inspect(inspect_paths);
    if (*synth_cmd) return run_synth(synth_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
