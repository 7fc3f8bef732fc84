#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lmseg/corpus.hpp"
#include "lmseg/inference.hpp"
#include "lmseg/model.hpp"
#include "lmseg/synth.hpp"

using namespace lmseg;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "lmseg_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run cli(const std::string& args) {
  const fs::path out = workdir() / "stdout.txt", err = workdir() / "stderr.txt";
  const std::string cmd = std::string(LMSEG_CLI) + " " + args + " > " + out.string() + " 2> " +
                          err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

const std::string kSmall =
    " --token-emb-dim 16 --char-emb-dim 4 --char-filters 4 --label-emb-dim 4"
    " --encoder-hidden 8 --decoder-hidden 12 --layers 1 --max-epochs 3 --lr 0.01";

// Synthetic data plus one trained model, shared by the tests below.
const fs::path& trained() {
  static const fs::path dir = [] {
    const fs::path data = workdir() / "data";
    REQUIRE(cli("synth --rules cross --sentences 60 --seed 3 --out " + data.string()).status == 0);
    const Run r = cli("train --train " + (data / "train.txt").string() + " --dev " +
                      (data / "dev.txt").string() + " --out " + (workdir() / "model").string() +
                      kSmall);
    INFO(r.err);
    REQUIRE(r.status == 0);
    return workdir() / "model";
  }();
  return dir;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("train writes its artifacts") {
  const fs::path m = trained();
  for (const char* name : {"model.ckpt", "vocab.json", "report.jsonl", "config.txt", "timing.jsonl"})
    CHECK(fs::exists(m / name));
  CHECK(slurp(m / "config.txt").find("encoder-hidden = 8") != std::string::npos);
}

TEST_CASE("missing training file") {
  const Run r = cli("train --train /nonexistent/train.txt --dev /nonexistent/dev.txt --out " +
                    (workdir() / "never").string());
  CHECK(r.status != 0);
  CHECK(r.err.find("/nonexistent/train.txt") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("contradictory configuration names the keys") {
  const fs::path data = workdir() / "data";
  trained();
  const Run r = cli("train --train " + (data / "train.txt").string() + " --dev " +
                    (data / "dev.txt").string() + " --out " + (workdir() / "bad").string() +
                    " --dropout 1.5 --batch-size 0");
  CHECK(r.status != 0);
  CHECK(r.err.find("dropout") != std::string::npos);
  CHECK(r.err.find("batch-size") != std::string::npos);
}

TEST_CASE("config file with flag override") {
  const fs::path data = workdir() / "data";
  trained();
  {
    std::ofstream cfg(workdir() / "run.cfg");
    cfg << "# small run\nencoder-hidden = 6\nmax-epochs = 1\nlayers = 1\n";
  }
  const Run r = cli("train --config " + (workdir() / "run.cfg").string() + " --train " +
                    (data / "train.txt").string() + " --dev " + (data / "dev.txt").string() +
                    " --out " + (workdir() / "cfg").string() + " --encoder-hidden 5");
  REQUIRE(r.status == 0);
  const std::string resolved = slurp(workdir() / "cfg" / "config.txt");
  CHECK(resolved.find("encoder-hidden = 5") != std::string::npos);
  CHECK(resolved.find("max-epochs = 1") != std::string::npos);
}

TEST_CASE("same seed, byte-identical report") {
  const fs::path data = workdir() / "data";
  trained();
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = workdir() / ("seed7_" + std::to_string(k));
    REQUIRE(cli("train --train " + (data / "train.txt").string() + " --dev " +
                (data / "dev.txt").string() + " --out " + out.string() + kSmall + " --seed 7")
                .status == 0);
    reports[k] = slurp(out / "report.jsonl");
  }
  CHECK(!reports[0].empty());
  CHECK(reports[0] == reports[1]);
  CHECK(slurp(workdir() / "seed7_0" / "model.ckpt") == slurp(workdir() / "seed7_1" / "model.ckpt"));
}

TEST_CASE("predict keeps lines and defaults to greedy") {
  const fs::path m = trained();
  const fs::path test = workdir() / "data" / "test.txt";
  const fs::path a = workdir() / "pred_default.txt", b = workdir() / "pred_beam1.txt";
  REQUIRE(cli("predict --model " + m.string() + " --input " + test.string() + " --output " +
              a.string())
              .status == 0);
  REQUIRE(cli("predict --model " + m.string() + " --input " + test.string() + " --output " +
              b.string() + " --beam 1")
              .status == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(line_count(slurp(a)) == line_count(slurp(test)));
  std::istringstream first(slurp(a));
  std::string line;
  std::getline(first, line);
  CHECK(split_fields(line).size() == 3);
}

TEST_CASE("beam 5 never scores below greedy") {
  const fs::path m = trained();
  const fs::path test = workdir() / "data" / "test.txt";
  const fs::path g = workdir() / "greedy.txt", b = workdir() / "beam5.txt";
  REQUIRE(cli("predict --model " + m.string() + " --input " + test.string() + " --output " +
              g.string())
              .status == 0);
  REQUIRE(cli("predict --model " + m.string() + " --input " + test.string() + " --output " +
              b.string() + " --beam 5 --threads 2")
              .status == 0);
  const Model model = Model::load(m / "model.ckpt", m / "vocab.json");
  const Corpus greedy = parse_column_file(g), beam = parse_column_file(b);
  REQUIRE(greedy.size() == beam.size());
  for (std::size_t k = 0; k < greedy.size(); ++k) {
    const double sg = model_score(model, greedy[k].sentence, iob_to_segments(greedy[k].tags));
    const double sb = model_score(model, beam[k].sentence, iob_to_segments(beam[k].tags));
    CHECK(sb >= sg - 1e-12);
  }
}

TEST_CASE("segment records") {
  const fs::path m = trained();
  const fs::path seg = workdir() / "segments.jsonl";
  REQUIRE(cli("predict --model " + m.string() + " --input " +
              (workdir() / "data" / "test.txt").string() + " --segments-out " + seg.string())
              .status == 0);
  const std::string text = slurp(seg);
  CHECK(text.find("\"sentence\":1") != std::string::npos);
  CHECK(text.find("\"logprob\":") != std::string::npos);
}

TEST_CASE("eval output") {
  const fs::path perfect = workdir() / "perfect.txt";
  {
    std::ofstream out(perfect);
    out << "a B-NP B-NP\nb I-NP I-NP\nc O O\n\nd B-VP B-VP\n";
  }
  Run r = cli("eval " + perfect.string());
  CHECK(r.status == 0);
  CHECK(r.out.find("FB1: 100.00") != std::string::npos);

  r = cli("eval " + std::string(LMSEG_FIXTURES) + "/conlleval/half_right.txt");
  CHECK(r.out.find("FB1: 40.00") != std::string::npos);

  r = cli("eval " + perfect.string() + " --buckets 22,44,66,88");
  CHECK(r.status == 0);
  for (const char* row : {"1-22", "23-44", "45-66", "67-88"}) CHECK(r.out.find(row) != std::string::npos);
  CHECK(r.out.find("89+") == std::string::npos);

  r = cli("bucket-eval " + perfect.string() + " --json");
  CHECK(r.status == 0);
  CHECK(r.out.find("\"low\":23") != std::string::npos);
}

TEST_CASE("eval rejects malformed files with a line number") {
  const fs::path bad = workdir() / "bad.txt";
  {
    std::ofstream out(bad);
    out << "a B-NP B-NP\nb B-NP\n";
  }
  const Run r = cli("eval " + bad.string());
  CHECK(r.status != 0);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("inputs are not modified") {
  const fs::path m = trained();
  const fs::path test = workdir() / "data" / "test.txt";
  const std::string before = slurp(test), ckpt = slurp(m / "model.ckpt");
  cli("predict --model " + m.string() + " --input " + test.string() + " --output " +
      (workdir() / "p.txt").string());
  cli("time --model " + m.string() + " --data " + test.string());
  cli("inspect --model " + m.string());
  CHECK(slurp(test) == before);
  CHECK(slurp(m / "model.ckpt") == ckpt);
}

TEST_CASE("inspect and time") {
  const fs::path m = trained();
  Run r = cli("inspect --model " + m.string());
  CHECK(r.status == 0);
  CHECK(r.out.find("span.weight") != std::string::npos);
  CHECK(r.out.find("encoder-hidden = 8") != std::string::npos);
  r = cli("time --model " + m.string() + " --data " + (workdir() / "data" / "dev.txt").string() +
          " --json");
  CHECK(r.status == 0);
  CHECK(r.out.find("\"mean_iterations\"") != std::string::npos);
}

TEST_CASE("mismatched vocabulary is rejected") {
  const fs::path m = trained();
  {
    std::ofstream out(workdir() / "labels.txt");
    out << "x B-ZZ\n";
  }
  REQUIRE(cli("synth --rules basic --sentences 10 --out " + (workdir() / "basic").string())
              .status == 0);
  // A vocabulary built from differently labeled data has another label count.
  const Corpus c = parse_column_file(workdir() / "basic" / "train.txt");
  Vocab::build(c).save(workdir() / "other_vocab.json");
  const Run r = cli("predict --checkpoint " + (m / "model.ckpt").string() + " --vocab " +
                    (workdir() / "other_vocab.json").string() + " --input " +
                    (workdir() / "data" / "test.txt").string());
  CHECK(r.status != 0);
  CHECK(!r.err.empty());
}

TEST_CASE("usage errors") {
  CHECK(cli("").status != 0);
  CHECK(cli("predict --input x").status != 0);
  CHECK(cli("frobnicate").status != 0);
}
