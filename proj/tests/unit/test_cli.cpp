#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <sys/wait.h>

#include "pjfit/cli.hpp"

namespace fs = std::filesystem;
using namespace pjfit;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "pjfit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> tiny_dims() {
  std::vector<std::string> a;
  for (const char* f : {"--embed-dim", "--hidden", "--section-hidden", "--attn-alpha", "--attn-beta",
                        "--attn-gamma", "--attn-delta", "--comparison-dim"}) {
    a.push_back(f);
    a.push_back("6");
  }
  return a;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

double sum_of(const nlohmann::json& arr) {
  double s = 0;
  for (const auto& v : arr) s += v.get<double>();
  return s;
}

}  // namespace

class CliTest : public ::testing::Test {
 protected:
  static inline fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "pjfit_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    ASSERT_EQ(run({"synth", "--seed", "4", "--out", (root / "syn").string(), "--postings", "20",
                   "--apps-per-posting", "10"})
                  .code,
              0);
    auto args = std::vector<std::string>{"train", "--seed", "4", "--corpus", (root / "syn/corpus.jsonl").string(),
                                         "--out", (root / "run").string(), "--epochs", "1"};
    for (auto& a : tiny_dims()) args.push_back(a);
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static void TearDownTestSuite() { fs::remove_all(root); }

  static std::string corpus() { return (root / "syn/corpus.jsonl").string(); }
  static std::string checkpoint() { return (root / "run/checkpoint").string(); }
};

TEST_F(CliTest, TrainWritesCheckpointHistoryAndManifest) {
  for (const char* f : {"checkpoint/manifest.txt", "checkpoint/params.bin", "checkpoint/vocab.txt",
                        "history.jsonl", "metrics.json", "run_manifest.json"}) {
    EXPECT_TRUE(fs::exists(root / "run" / f)) << f;
  }
  EXPECT_EQ(line_count(root / "run/history.jsonl"), 1u);
  auto manifest = read_json(root / "run/run_manifest.json");
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["seed"], 4);
}

TEST_F(CliTest, MissingCorpusExitsTwoWithoutOutputs) {
  const auto out = root / "never";
  auto r = run({"train", "--seed", "1", "--corpus", (root / "absent.jsonl").string(), "--out", out.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("absent.jsonl"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, MissingSeedExitsTwo) {
  const auto out = root / "noseed";
  auto r = run({"train", "--corpus", corpus(), "--out", out.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run({"synth", "--out", out.string()}).code, 2);
}

TEST_F(CliTest, UnknownFlagExitsTwo) { EXPECT_EQ(run({"train", "--bogus"}).code, 2); }

TEST_F(CliTest, EvalReportsEveryMetric) {
  auto r = run({"eval", "--checkpoint", checkpoint(), "--corpus", corpus(), "--out", (root / "ev").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = read_json(root / "ev/metrics.json");
  for (const char* k : {"accuracy", "precision", "recall", "f1", "auc"}) {
    ASSERT_TRUE(m.contains(k)) << k;
    EXPECT_TRUE(m[k].is_number()) << k;
  }
  EXPECT_NE(r.out.find("auc"), std::string::npos);
}

TEST_F(CliTest, PredictPrintsOneProbabilityPerApplication) {
  auto r = run({"predict", "--checkpoint", checkpoint(), "--corpus", corpus()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::size_t n = 0;
  for (double p; in >> p; ++n) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_EQ(n, line_count(corpus()));
}

TEST_F(CliTest, ExplainWeightsAreDistributions) {
  // A one-requirement posting built from corpus vocabulary.
  auto records = load_corpus(corpus());
  auto rec = records.front();
  rec.requirements.resize(1);
  const auto single = root / "single.jsonl";
  save_corpus(single.string(), {rec});
  auto r = run({"explain", "--checkpoint", checkpoint(), "--corpus", single.string(), "--index", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["requirements"].size(), 1u);
  EXPECT_DOUBLE_EQ(j["requirements"][0]["beta"].get<double>(), 1.0);
  EXPECT_NEAR(sum_of(j["requirements"][0]["alpha"]), 1.0, 1e-5);
  double delta = 0;
  for (const auto& e : j["experiences"]) {
    delta += e["delta"].get<double>();
    ASSERT_EQ(e["gamma"].size(), 1u);
    EXPECT_NEAR(sum_of(e["gamma"][0]["weights"]), 1.0, 1e-5);
    EXPECT_EQ(e["gamma"][0]["weights"].size(), e["tokens"].size());
  }
  EXPECT_NEAR(delta, 1.0, 1e-5);

  auto pretty = run({"explain", "--checkpoint", checkpoint(), "--corpus", single.string(), "--pretty"});
  ASSERT_EQ(pretty.code, 0);
  EXPECT_NE(pretty.out.find("requirements"), std::string::npos);
  EXPECT_EQ(run({"explain", "--checkpoint", checkpoint(), "--corpus", single.string(), "--index", "5"}).code, 2);
}

TEST_F(CliTest, ExplainRejectsBaseline) {
  auto args = std::vector<std::string>{"train", "--seed", "4", "--corpus", corpus(), "--out",
                                       (root / "bp").string(), "--epochs", "1", "--model", "bpjfnn"};
  for (auto& a : tiny_dims()) args.push_back(a);
  ASSERT_EQ(run(args).code, 0);
  auto r = run({"explain", "--checkpoint", (root / "bp/checkpoint").string(), "--corpus", corpus()});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, BiasInjectFlipCounts) {
  auto r = run({"bias-inject", "--seed", "2", "--corpus", corpus(), "--out", (root / "bias").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto before = load_corpus(corpus());
  auto after = load_corpus((root / "bias/corpus.jsonl").string());
  auto flips = read_json(root / "bias/flips.json");
  ASSERT_EQ(before.size(), after.size());
  std::size_t female_pos = 0, male_neg = 0, female_flipped = 0, male_flipped = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    female_pos += before[i].side == kFemale && before[i].label == 1;
    male_neg += before[i].side == kMale && before[i].label == 0;
    if (before[i].label != after[i].label) {
      (before[i].side == kFemale ? female_flipped : male_flipped) += 1;
      EXPECT_EQ(before[i].label, before[i].side == kFemale ? 1 : 0);
    }
  }
  EXPECT_EQ(flips["female_positives"].get<std::size_t>(), female_pos);
  EXPECT_EQ(flips["male_negatives"].get<std::size_t>(), male_neg);
  EXPECT_EQ(flips["female_flipped"].get<std::size_t>(), female_flipped);
  EXPECT_EQ(flips["male_flipped"].get<std::size_t>(), male_flipped);
  EXPECT_EQ(flips["flips"].size(), female_flipped + male_flipped);
  EXPECT_EQ(female_flipped, female_pos / 2);
  EXPECT_EQ(male_flipped, male_neg / 2);
}

TEST_F(CliTest, VocabularyMismatchExitsTwo) {
  const auto alien = root / "alien.jsonl";
  std::ofstream(alien) << R"({"job_id":"a","resume_id":"b","requirements":["zz yy"],"experiences":["qq rr"],"label":1,"side":0})"
                       << '\n';
  auto r = run({"predict", "--checkpoint", checkpoint(), "--corpus", alien.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("vocabulary"), std::string::npos);
}

TEST_F(CliTest, PreprocessWritesSplits) {
  auto r = run({"preprocess", "--seed", "3", "--corpus", corpus(), "--out", (root / "prep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto n = line_count(root / "prep/train.jsonl") + line_count(root / "prep/val.jsonl") +
                 line_count(root / "prep/test.jsonl");
  EXPECT_GT(n, 0u);
  EXPECT_LE(n, line_count(corpus()));
  EXPECT_TRUE(fs::exists(root / "prep/vocab.txt"));
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = PJFIT_CLI_PATH;
  const auto quiet = " >/dev/null 2>&1";
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + quiet).c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("synth --out " + (root / "bin_noseed").string()), 2);
  EXPECT_EQ(status("predict --checkpoint " + checkpoint() + " --corpus " + corpus()), 0);
}
