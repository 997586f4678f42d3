#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pjfit/application.hpp"
#include "pjfit/checkpoint.hpp"
#include "pjfit/data.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/metrics.hpp"
#include "pjfit/model.hpp"
#include "pjfit/synth.hpp"
#include "pjfit/training.hpp"

// Command-line front end. run_cli returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or validation error.

namespace pjfit {

namespace cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Options {
  std::string corpus, train_file, val_file, test_file, checkpoint, embeddings, out;
  std::string model = "apjfnn";
  std::string head = "sigmoid";
  std::string split = "0.8,0.1,0.1";
  std::optional<std::uint64_t> seed;
  std::size_t batch_size = 64;
  double keep_prob = 0.8;
  double learning_rate = 1e-3;
  std::size_t epochs = 20, patience = 5, workers = 1, min_count = 1, index = 0;
  Caps caps;
  std::size_t embed_dim = 100, hidden = 200, section_hidden = 200;
  std::size_t attn_alpha = 200, attn_beta = 200, attn_gamma = 400, attn_delta = 400;
  std::size_t comparison_dim = 200;
  bool no_undersample = false, pretty = false;
  double rate = 0.5;
  GeneratorConfig gen;
};

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("--") + what + " is required");
  if (!fs::is_regular_file(path)) throw ValidationError(std::string(what) + " not found: " + path);
}

inline std::uint64_t require_seed(const Options& o) {
  if (!o.seed) throw ValidationError("--seed is required for this command");
  return *o.seed;
}

inline fs::path prepare_out(const Options& o) {
  if (o.out.empty()) throw ValidationError("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

inline void write_run_manifest(const fs::path& dir, const std::string& command,
                               const std::vector<std::string>& args, const Options& o) {
  Json j;
  j["command"] = command;
  j["args"] = args;
  j["seed"] = o.seed ? Json(*o.seed) : Json(nullptr);
  write_file(dir / "run_manifest.json", j.dump(2) + "\n");
}

inline std::vector<PaddedApplication> prepare(const std::vector<CorpusRecord>& records,
                                              const Vocabulary& vocab, const Caps& caps) {
  std::vector<PaddedApplication> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(truncate_pad(vocab.encode(r), caps));
  return out;
}

inline ModelConfig model_config(const Options& o, std::size_t vocab_size) {
  ModelConfig c;
  c.kind = parse_model_kind(o.model);
  if (o.head != "sigmoid" && o.head != "softmax2") throw ConfigError("--head must be sigmoid or softmax2");
  c.head = o.head == "sigmoid" ? OutputHead::kSigmoid : OutputHead::kSoftmax2;
  if (c.head == OutputHead::kSoftmax2 && c.kind != ModelKind::kBpjfnn) {
    throw ConfigError("--head softmax2 is only available for bpjfnn");
  }
  c.vocab_size = vocab_size;
  c.embed_dim = o.embed_dim;
  c.word_hidden = o.hidden;
  c.section_hidden = o.section_hidden;
  c.attn_alpha = o.attn_alpha;
  c.attn_beta = o.attn_beta;
  c.attn_gamma = o.attn_gamma;
  c.attn_delta = o.attn_delta;
  c.comparison_dim = o.comparison_dim;
  c.side_width = c.kind == ModelKind::kApjfnnSide ? 2 : 0;
  c.keep_prob = o.keep_prob;
  c.validate();
  return c;
}

// Share of input tokens the checkpoint vocabulary does not know; above half
// the input was almost certainly tokenized for a different model.
inline void check_vocab_overlap(const Vocabulary& vocab, const std::vector<CorpusRecord>& recs) {
  std::size_t total = 0, unknown = 0;
  for (const auto& r : recs) {
    for (const auto* docs : {&r.requirements, &r.experiences})
      for (const auto& d : *docs)
        for (const auto& w : d) {
          ++total;
          unknown += vocab.contains(w) ? 0 : 1;
        }
  }
  if (total > 0 && 2 * unknown > total) {
    throw ConfigError("vocabulary mismatch: " + std::to_string(unknown) + " of " +
                      std::to_string(total) + " input tokens are unknown to the checkpoint");
  }
}

inline int cmd_synth(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  GeneratorConfig g = o.gen;
  g.seed = require_seed(o);
  g.validate();
  auto corpus = generate(g);
  const auto dir = prepare_out(o);
  save_corpus((dir / "corpus.jsonl").string(), corpus.records);
  write_file(dir / "manifest.json", to_json(corpus.manifest).dump() + "\n");
  write_run_manifest(dir, "synth", args, o);
  out << "wrote " << corpus.records.size() << " applications to " << (dir / "corpus.jsonl").string()
      << '\n';
  return 0;
}

inline int cmd_preprocess(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  require_file(o.corpus, "corpus");
  const auto seed = require_seed(o);
  const auto spec = SplitSpec::parse(o.split, seed);
  auto records = load_corpus(o.corpus);
  if (!o.no_undersample) records = undersample(records, seed);
  auto parts = split(records, spec);
  const auto dir = prepare_out(o);
  save_corpus((dir / "train.jsonl").string(), parts.train);
  save_corpus((dir / "val.jsonl").string(), parts.validation);
  save_corpus((dir / "test.jsonl").string(), parts.test);
  std::ofstream voc(dir / "vocab.txt", std::ios::binary);
  build_vocab(parts.train, o.min_count).save(voc);
  write_run_manifest(dir, "preprocess", args, o);
  out << "train " << parts.train.size() << " val " << parts.validation.size() << " test "
      << parts.test.size() << '\n';
  return 0;
}

inline int cmd_train(const Options& o, const std::vector<std::string>& args, std::ostream& out,
                     std::ostream& err) {
  const auto seed = require_seed(o);
  Splits<CorpusRecord> parts;
  if (!o.train_file.empty() || !o.val_file.empty()) {
    require_file(o.train_file, "train-file");
    require_file(o.val_file, "val-file");
    if (!o.test_file.empty()) require_file(o.test_file, "test-file");
    if (!o.embeddings.empty()) require_file(o.embeddings, "embeddings");
    parts.train = load_corpus(o.train_file);
    parts.validation = load_corpus(o.val_file);
    if (!o.test_file.empty()) parts.test = load_corpus(o.test_file);
  } else {
    require_file(o.corpus, "corpus");
    if (!o.embeddings.empty()) require_file(o.embeddings, "embeddings");
    const auto spec = SplitSpec::parse(o.split, seed);
    auto records = load_corpus(o.corpus);
    if (!o.no_undersample) records = undersample(records, seed);
    parts = split(records, spec);
  }
  auto vocab = build_vocab(parts.train, o.min_count);
  const auto mc = model_config(o, vocab.size());
  TrainConfig tc;
  tc.batch_size = o.batch_size;
  tc.adam.learning_rate = o.learning_rate;
  tc.epochs = o.epochs;
  tc.keep_prob = o.keep_prob;
  tc.seed = seed;
  tc.patience = o.patience;
  tc.workers = o.workers;
  tc.validate();

  std::optional<EmbeddingTable<float>> pretrained;
  EmbeddingLoadReport report;
  if (!o.embeddings.empty()) {
    Rng rng(derive_seed(seed, {0x656d62ULL}));
    pretrained = load_embeddings<float>(o.embeddings, vocab, mc.embed_dim, rng, &report);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  }
  const auto train_set = prepare(parts.train, vocab, o.caps);
  const auto val_set = prepare(parts.validation, vocab, o.caps);
  const auto dir = prepare_out(o);
  auto result = train(mc, train_set, val_set, tc,
                      [&](const EpochRecord& r) {
                        err << "epoch " << r.epoch << " loss " << r.train_loss;
                        if (r.validation) err << " val_auc " << *r.validation->auc;
                        err << '\n';
                      },
                      pretrained ? &*pretrained : nullptr);
  save_checkpoint(dir / "checkpoint", result.best, vocab, o.caps);
  std::ofstream hist(dir / "history.jsonl", std::ios::binary);
  write_history(hist, result.history);
  Json metrics;
  metrics["best_epoch"] = result.best_epoch;
  metrics["validation"] = to_json(evaluate(result.best, val_set));
  if (!parts.test.empty()) metrics["test"] = to_json(evaluate(result.best, prepare(parts.test, vocab, o.caps)));
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  write_run_manifest(dir, "train", args, o);
  out << "best epoch " << result.best_epoch << " validation AUC " << result.best_val_auc << '\n';
  return 0;
}

inline int cmd_eval(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  require_file(o.corpus, "corpus");
  auto ck = load_checkpoint(o.checkpoint);
  const auto records = load_corpus(o.corpus);
  check_vocab_overlap(ck.vocab, records);
  const auto report = evaluate(ck.params, prepare(records, ck.vocab, ck.caps));
  out << format_table(report);
  if (!o.out.empty()) {
    const auto dir = prepare_out(o);
    write_file(dir / "metrics.json", to_json(report).dump(2) + "\n");
    write_run_manifest(dir, "eval", args, o);
  }
  return 0;
}

inline int cmd_predict(const Options& o, std::ostream& out) {
  require_file(o.corpus, "corpus");
  auto ck = load_checkpoint(o.checkpoint);
  const auto records = load_corpus(o.corpus);
  check_vocab_overlap(ck.vocab, records);
  for (double p : score(ck.params, prepare(records, ck.vocab, ck.caps))) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", p);
    out << buf << '\n';
  }
  return 0;
}

// Shades scale between the row minimum and maximum; a flat row is mid-grey.
inline std::string shade(double w, double lo, double hi) {
  static const char* levels[] = {" ", "░", "▒", "▓", "█"};
  if (hi - lo <= 1e-12) return levels[2];
  const int i = static_cast<int>(std::lround(4.0 * (w - lo) / (hi - lo)));
  return levels[std::clamp(i, 0, 4)];
}

inline std::string bar(double w, std::size_t width = 20) {
  return std::string(static_cast<std::size_t>(std::lround(w * static_cast<double>(width))), '#');
}

inline Json explain_json(const CorpusRecord& rec, const PaddedApplication& app, const Vocabulary& vocab,
                         const PredictionOutput<float>& pred) {
  const auto& tr = pred.trace;
  auto words = [&](const PaddedDocument& doc, std::size_t s) {
    std::vector<std::string> out;
    for (std::size_t t = 0; t < doc.ids[s].size(); ++t)
      if (doc.masks[s][t]) out.push_back(vocab.token(doc.ids[s][t]));
    return out;
  };
  auto real = [](const std::vector<double>& w, const Mask& m) {
    std::vector<double> out;
    for (std::size_t t = 0; t < w.size(); ++t)
      if (m[t]) out.push_back(w[t]);
    return out;
  };
  Json j;
  j["job_id"] = rec.job_id;
  j["resume_id"] = rec.resume_id;
  j["y_hat"] = pred.probability();
  auto& reqs = j["requirements"] = Json::array();
  for (std::size_t l = 0; l < app.job.sections(); ++l) {
    if (!tr.requirement_mask[l]) continue;
    reqs.push_back({{"index", l},
                    {"tokens", words(app.job, l)},
                    {"alpha", real(tr.alpha[l], app.job.masks[l])},
                    {"beta", tr.beta[l]}});
  }
  auto& exps = j["experiences"] = Json::array();
  for (std::size_t l = 0; l < app.resume.sections(); ++l) {
    if (!tr.experience_mask[l]) continue;
    Json gamma = Json::array();
    for (std::size_t k = 0; k < app.job.sections(); ++k) {
      if (!tr.requirement_mask[k]) continue;
      gamma.push_back({{"requirement", k}, {"weights", real(tr.gamma[l][k], app.resume.masks[l])}});
    }
    exps.push_back({{"index", l}, {"tokens", words(app.resume, l)}, {"delta", tr.delta[l]}, {"gamma", gamma}});
  }
  return j;
}

inline std::string explain_pretty(const Json& j) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "y_hat %.4f\n", j["y_hat"].get<double>());
  out << buf << "\nrequirements (beta; words shaded by alpha)\n";
  auto row = [&](const Json& tokens, const Json& weights) {
    double lo = 1.0, hi = 0.0;
    for (const auto& w : weights) {
      lo = std::min(lo, w.get<double>());
      hi = std::max(hi, w.get<double>());
    }
    std::string line;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const auto s = shade(weights[t].get<double>(), lo, hi);
      line += s + s + tokens[t].get<std::string>() + " ";
    }
    return line;
  };
  for (const auto& r : j["requirements"]) {
    std::snprintf(buf, sizeof buf, "  [%2zu] %.3f %-20s ", r["index"].get<std::size_t>(),
                  r["beta"].get<double>(), bar(r["beta"].get<double>()).c_str());
    out << buf << row(r["tokens"], r["alpha"]) << '\n';
  }
  out << "\nexperiences (delta; words shaded by gamma per requirement)\n";
  for (const auto& e : j["experiences"]) {
    std::snprintf(buf, sizeof buf, "  [%2zu] %.3f %s\n", e["index"].get<std::size_t>(),
                  e["delta"].get<double>(), bar(e["delta"].get<double>()).c_str());
    out << buf;
    for (const auto& g : e["gamma"]) {
      std::snprintf(buf, sizeof buf, "      req %2zu: ", g["requirement"].get<std::size_t>());
      out << buf << row(e["tokens"], g["weights"]) << '\n';
    }
  }
  return out.str();
}

inline int cmd_explain(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  require_file(o.corpus, "corpus");
  auto ck = load_checkpoint(o.checkpoint);
  if (ck.params.config.kind == ModelKind::kBpjfnn) {
    throw ConfigError("bpjfnn has no attention to explain");
  }
  const auto records = load_corpus(o.corpus);
  if (o.index >= records.size()) {
    throw ValidationError("--index " + std::to_string(o.index) + " but corpus has " +
                          std::to_string(records.size()) + " records");
  }
  const std::vector<CorpusRecord> one{records[o.index]};
  check_vocab_overlap(ck.vocab, one);
  const auto app = truncate_pad(ck.vocab.encode(one[0]), ck.caps);
  Graph<float> g(false);
  Rng unused(0);
  const auto pred = predict(g, ck.params, app, ForwardOptions{Mode::kEval, true}, unused);
  const auto report = explain_json(one[0], app, ck.vocab, pred);
  out << (o.pretty ? explain_pretty(report) : report.dump() + "\n");
  if (!o.out.empty()) {
    const auto dir = prepare_out(o);
    write_file(dir / "explain.json", report.dump(2) + "\n");
    write_run_manifest(dir, "explain", args, o);
  }
  return 0;
}

inline int cmd_bias_inject(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  require_file(o.corpus, "corpus");
  const auto seed = require_seed(o);
  auto injected = inject_bias(load_corpus(o.corpus), o.rate, seed);
  const auto dir = prepare_out(o);
  save_corpus((dir / "corpus.jsonl").string(), injected.records);
  write_file(dir / "flips.json", to_json(injected.manifest).dump(2) + "\n");
  write_run_manifest(dir, "bias-inject", args, o);
  const auto& m = injected.manifest;
  out << "flipped " << m.female_flipped << " of " << m.female_positives << " female positives and "
      << m.male_flipped << " of " << m.male_negatives << " male negatives\n";
  return 0;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using namespace cli;
  Options o;
  CLI::App app{"person-job fit models: train, evaluate and explain"};
  app.require_subcommand(1);

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "64-bit seed"); };
  auto add_caps = [&](CLI::App* c) {
    c->add_option("--max-reqs", o.caps.max_requirements)->capture_default_str();
    c->add_option("--max-exps", o.caps.max_experiences)->capture_default_str();
    c->add_option("--max-req-words", o.caps.max_requirement_words)->capture_default_str();
    c->add_option("--max-exp-words", o.caps.max_experience_words)->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted skills");
  add_seed(synth);
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--postings", o.gen.num_postings)->capture_default_str();
  synth->add_option("--apps-per-posting", o.gen.applications_per_posting)->capture_default_str();
  synth->add_option("--skills", o.gen.skill_universe)->capture_default_str();
  synth->add_option("--skills-per-posting", o.gen.skills_per_posting)->capture_default_str();
  synth->add_option("--tau", o.gen.tau)->capture_default_str();
  synth->add_option("--noise", o.gen.noise_rate)->capture_default_str();
  synth->add_option("--male-prob", o.gen.male_probability)->capture_default_str();
  synth->add_option("--distractors", o.gen.max_distractors, "most off-posting skills per resume")
      ->capture_default_str();
  synth->add_option("--filler-vocab", o.gen.filler_vocab)->capture_default_str();

  auto* pre = app.add_subcommand("preprocess", "under-sample and split a corpus");
  add_seed(pre);
  pre->add_option("--corpus", o.corpus)->required();
  pre->add_option("--split", o.split)->capture_default_str();
  pre->add_option("--min-count", o.min_count)->capture_default_str();
  pre->add_flag("--no-undersample", o.no_undersample);
  pre->add_option("--out", o.out)->required();

  auto* tr = app.add_subcommand("train", "train a model and write checkpoint + history");
  add_seed(tr);
  tr->add_option("--model", o.model, "apjfnn, bpjfnn or apjfnn-side")->capture_default_str();
  tr->add_option("--corpus", o.corpus, "corpus to under-sample and split");
  tr->add_option("--train-file", o.train_file, "pre-split training corpus");
  tr->add_option("--val-file", o.val_file, "pre-split validation corpus");
  tr->add_option("--test-file", o.test_file, "pre-split test corpus");
  tr->add_option("--embeddings", o.embeddings, "word2vec text file");
  tr->add_option("--split", o.split)->capture_default_str();
  tr->add_option("--batch-size", o.batch_size)->capture_default_str();
  tr->add_option("--keep-prob", o.keep_prob)->capture_default_str();
  tr->add_option("--lr", o.learning_rate)->capture_default_str();
  tr->add_option("--epochs", o.epochs)->capture_default_str();
  tr->add_option("--patience", o.patience)->capture_default_str();
  tr->add_option("--workers", o.workers)->capture_default_str();
  tr->add_option("--min-count", o.min_count)->capture_default_str();
  tr->add_option("--head", o.head, "sigmoid or softmax2 (bpjfnn only)")->capture_default_str();
  tr->add_option("--embed-dim", o.embed_dim)->capture_default_str();
  tr->add_option("--hidden", o.hidden)->capture_default_str();
  tr->add_option("--section-hidden", o.section_hidden)->capture_default_str();
  tr->add_option("--attn-alpha", o.attn_alpha)->capture_default_str();
  tr->add_option("--attn-beta", o.attn_beta)->capture_default_str();
  tr->add_option("--attn-gamma", o.attn_gamma)->capture_default_str();
  tr->add_option("--attn-delta", o.attn_delta)->capture_default_str();
  tr->add_option("--comparison-dim", o.comparison_dim)->capture_default_str();
  tr->add_flag("--no-undersample", o.no_undersample);
  tr->add_option("--out", o.out)->required();
  add_caps(tr);

  auto* ev = app.add_subcommand("eval", "score a labeled corpus with a checkpoint");
  ev->add_option("--checkpoint", o.checkpoint)->required();
  ev->add_option("--corpus", o.corpus)->required();
  ev->add_option("--out", o.out);

  auto* pr = app.add_subcommand("predict", "print one probability per application");
  pr->add_option("--checkpoint", o.checkpoint)->required();
  pr->add_option("--corpus", o.corpus)->required();

  auto* ex = app.add_subcommand("explain", "attention report for one application");
  ex->add_option("--checkpoint", o.checkpoint)->required();
  ex->add_option("--corpus", o.corpus)->required();
  ex->add_option("--index", o.index, "record to explain")->capture_default_str();
  ex->add_flag("--pretty", o.pretty, "render text heatmaps");
  ex->add_option("--out", o.out);

  auto* bi = app.add_subcommand("bias-inject", "flip gendered labels in a training corpus");
  add_seed(bi);
  bi->add_option("--corpus", o.corpus)->required();
  bi->add_option("--rate", o.rate)->capture_default_str();
  bi->add_option("--out", o.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (synth->parsed()) return cmd_synth(o, args, out);
    if (pre->parsed()) return cmd_preprocess(o, args, out);
    if (tr->parsed()) return cmd_train(o, args, out, err);
    if (ev->parsed()) return cmd_eval(o, args, out);
    if (pr->parsed()) return cmd_predict(o, out);
    if (ex->parsed()) return cmd_explain(o, args, out);
    if (bi->parsed()) return cmd_bias_inject(o, args, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace pjfit
