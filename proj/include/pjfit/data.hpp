#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pjfit/application.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/init.hpp"
#include "pjfit/layers.hpp"
#include "pjfit/rng.hpp"

namespace pjfit {

// ---- tokenization and corpus I/O -------------------------------------------

/// Input text is pre-segmented; tokens are separated by single spaces.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace detail {

inline std::string where(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

inline std::vector<std::vector<std::string>> parse_sections(const nlohmann::json& j,
                                                            const char* field,
                                                            const char* item,
                                                            std::size_t line) {
  if (!j.contains(field) || !j[field].is_array()) {
    throw ValidationError(std::string("missing ") + field + " list" + where(line));
  }
  const auto& arr = j[field];
  if (arr.empty()) throw ValidationError(std::string("empty ") + field + " list" + where(line));
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw ValidationError(std::string(item) + " " + std::to_string(i) +
                            " is not a string" + where(line));
    }
    auto tokens = tokenize(arr[i].get<std::string>());
    if (tokens.empty()) {
      throw ValidationError(std::string("empty ") + item + " at index " + std::to_string(i) +
                            where(line));
    }
    out.push_back(std::move(tokens));
  }
  return out;
}

}  // namespace detail

/// Parses one corpus line:
///   {"job_id": "...", "resume_id": "...", "requirements": ["tok tok", ...],
///    "experiences": ["tok tok tok", ...], "label": 0|1, "side": 0|1}
/// "side" is optional.
inline CorpusRecord parse_record(const std::string& text, std::size_t line = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed corpus record: ") + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("corpus record is not an object", line);
  CorpusRecord rec;
  auto id = [&](const char* key) {
    if (!j.contains(key)) return std::string();
    const auto& v = j[key];
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  rec.job_id = id("job_id");
  rec.resume_id = id("resume_id");
  if (!j.contains("label") || !j["label"].is_number_integer()) {
    throw ValidationError("missing or non-integer label" + detail::where(line));
  }
  rec.label = j["label"].get<int>();
  if (rec.label != 0 && rec.label != 1) {
    throw ValidationError("label must be 0 or 1, got " + std::to_string(rec.label) +
                          detail::where(line));
  }
  rec.requirements = detail::parse_sections(j, "requirements", "requirement", line);
  rec.experiences = detail::parse_sections(j, "experiences", "experience", line);
  if (j.contains("side") && !j["side"].is_null()) {
    if (!j["side"].is_number_integer()) {
      throw ValidationError("side must be an integer category" + detail::where(line));
    }
    rec.side = j["side"].get<int>();
  }
  return rec;
}

inline std::string format_record(const CorpusRecord& rec) {
  nlohmann::ordered_json j;
  j["job_id"] = rec.job_id;
  j["resume_id"] = rec.resume_id;
  auto sections = [](const std::vector<std::vector<std::string>>& docs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : docs) arr.push_back(join_tokens(d));
    return arr;
  };
  j["requirements"] = sections(rec.requirements);
  j["experiences"] = sections(rec.experiences);
  j["label"] = rec.label;
  if (rec.side) j["side"] = *rec.side;
  return j.dump();
}

inline std::vector<CorpusRecord> read_corpus(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(text, line));
  }
  return out;
}

inline std::vector<CorpusRecord> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path);
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records) {
  for (const auto& r : records) out << format_record(r) << '\n';
}

inline void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write corpus file " + path);
  write_corpus(out, records);
}

// ---- vocabulary ------------------------------------------------------------

/// Token <-> id map. Id 0 is padding and id 1 the unknown token; the rest are
/// ordered by descending frequency, ties broken by token.
class Vocabulary {
 public:
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() : tokens_{kPadToken, kUnkToken} { reindex(); }

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2 || tokens_[0] != kPadToken || tokens_[1] != kUnkToken) {
      throw ValidationError("vocabulary must start with <pad> and <unk>");
    }
    reindex();
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t min_count() const { return min_count_; }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  Sentence encode(const std::vector<std::string>& words) const {
    Sentence out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id(w));
    return out;
  }

  Application encode(const CorpusRecord& rec) const {
    Application app;
    app.job_id = rec.job_id;
    app.resume_id = rec.resume_id;
    for (const auto& r : rec.requirements) app.requirements.push_back(encode(r));
    for (const auto& e : rec.experiences) app.experiences.push_back(encode(e));
    app.label = rec.label;
    app.side = rec.side;
    return app;
  }

  std::vector<Application> encode(const std::vector<CorpusRecord>& records) const {
    std::vector<Application> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(encode(r));
    return out;
  }

  /// FNV-1a over the token list; stored in checkpoints to detect mismatches.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) {
      for (unsigned char c : t) h = (h ^ c) * 0x100000001b3ULL;
      h = (h ^ 0xffu) * 0x100000001b3ULL;
    }
    return h;
  }

  void save(std::ostream& out) const {
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(std::istream& in) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return Vocabulary(std::move(tokens));
  }

  friend Vocabulary build_vocab(const std::vector<CorpusRecord>&, std::size_t);

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t min_count_ = 1;
};

/// Tokens seen fewer than min_count times map to <unk>.
inline Vocabulary build_vocab(const std::vector<CorpusRecord>& corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& rec : corpus) {
    for (const auto& s : rec.requirements)
      for (const auto& w : s) ++counts[w];
    for (const auto& s : rec.experiences)
      for (const auto& w : s) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, n] : counts) {
    if (n >= min_count && token != Vocabulary::kPadToken && token != Vocabulary::kUnkToken) {
      kept.emplace_back(token, n);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens{Vocabulary::kPadToken, Vocabulary::kUnkToken};
  for (auto& [token, n] : kept) tokens.push_back(token);
  Vocabulary v(std::move(tokens));
  v.min_count_ = min_count;
  return v;
}

// ---- pretrained embeddings -------------------------------------------------

struct EmbeddingLoadReport {
  std::size_t rows_from_file = 0;
  std::size_t rows_random = 0;
  std::size_t file_entries = 0;
  std::vector<std::string> warnings;
};

/// Reads word2vec text format ("count dim" header, then "token v1 ... vdim").
/// Rows for vocabulary tokens found in the file are copied; the rest keep
/// their Glorot initialization. A token listed twice keeps its last vector.
template <typename T>
EmbeddingTable<T> load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                                  Rng& rng, EmbeddingLoadReport* report = nullptr) {
  EmbeddingLoadReport local;
  auto& rep = report ? *report : local;
  std::string text;
  std::size_t line = 1;
  if (!std::getline(in, text)) throw ParseError("embedding file is empty", line);
  std::istringstream header(text);
  long long count = -1, file_dim = -1;
  std::string extra;
  if (!(header >> count >> file_dim) || (header >> extra) || count < 0 || file_dim <= 0) {
    throw ParseError("embedding header must be '<count> <dim>'", line);
  }
  if (static_cast<std::size_t>(file_dim) != dim) {
    throw ConfigError("embedding file has dimension " + std::to_string(file_dim) +
                      ", model expects " + std::to_string(dim));
  }
  EmbeddingTable<T> table{glorot_init<T>({vocab.size(), dim}, rng)};
  std::vector<bool> filled(vocab.size(), false);
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(text);
    std::string token;
    fields >> token;
    std::vector<T> values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      double v;
      if (!(fields >> v)) {
        throw ParseError("embedding line for '" + token + "' has fewer than " +
                         std::to_string(dim) + " values", line);
      }
      values[i] = static_cast<T>(v);
    }
    if (fields >> extra) {
      throw ParseError("embedding line for '" + token + "' has more than " +
                       std::to_string(dim) + " values", line);
    }
    ++rep.file_entries;
    if (auto [it, fresh] = seen.emplace(token, line); !fresh) {
      rep.warnings.push_back("token '" + token + "' repeated on line " + std::to_string(line) +
                             " (first on line " + std::to_string(it->second) +
                             "); last occurrence wins");
      it->second = line;
    }
    if (!vocab.contains(token)) continue;
    const auto row = static_cast<std::size_t>(vocab.id(token));
    std::copy(values.begin(), values.end(), table.W_e.data().begin() + row * dim);
    filled[row] = true;
  }
  if (rep.file_entries != static_cast<std::size_t>(count)) {
    rep.warnings.push_back("header announces " + std::to_string(count) + " vectors, file has " +
                           std::to_string(rep.file_entries));
  }
  rep.rows_from_file = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), true));
  rep.rows_random = vocab.size() - rep.rows_from_file;
  return table;
}

template <typename T>
EmbeddingTable<T> load_embeddings(const std::string& path, const Vocabulary& vocab,
                                  std::size_t dim, Rng& rng,
                                  EmbeddingLoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file " + path);
  return load_embeddings<T>(in, vocab, dim, rng, report);
}

// ---- truncation and padding ------------------------------------------------

/// Keeps the leading sections and leading words within the caps.
inline Application truncate(const Application& app, const Caps& caps) {
  if (caps.max_requirements == 0 || caps.max_experiences == 0 ||
      caps.max_requirement_words == 0 || caps.max_experience_words == 0) {
    throw ConfigError("truncation caps must be positive");
  }
  auto cut = [](const std::vector<Sentence>& docs, std::size_t sections, std::size_t words) {
    std::vector<Sentence> out;
    for (std::size_t s = 0; s < std::min(sections, docs.size()); ++s) {
      const auto& d = docs[s];
      out.emplace_back(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(std::min(words, d.size())));
    }
    return out;
  };
  Application out = app;
  out.requirements = cut(app.requirements, caps.max_requirements, caps.max_requirement_words);
  out.experiences = cut(app.experiences, caps.max_experiences, caps.max_experience_words);
  return out;
}

inline PaddedDocument pad_document(const std::vector<Sentence>& docs, std::size_t sections,
                                   std::size_t width) {
  PaddedDocument out;
  out.ids.assign(sections, Sentence(width, kPadId));
  out.masks.assign(sections, Mask(width, false));
  for (std::size_t s = 0; s < docs.size(); ++s) {
    for (std::size_t t = 0; t < docs[s].size(); ++t) {
      out.ids[s][t] = docs[s][t];
      out.masks[s][t] = true;
    }
  }
  return out;
}

/// Pads an application to its own maximum section length.
inline PaddedApplication pad(const Application& app) {
  auto widest = [](const std::vector<Sentence>& docs) {
    std::size_t w = 0;
    for (const auto& d : docs) w = std::max(w, d.size());
    return w;
  };
  PaddedApplication out;
  out.job_id = app.job_id;
  out.resume_id = app.resume_id;
  out.job = pad_document(app.requirements, app.requirements.size(), widest(app.requirements));
  out.resume = pad_document(app.experiences, app.experiences.size(), widest(app.experiences));
  out.label = app.label;
  out.side = app.side;
  return out;
}

inline PaddedApplication truncate_pad(const Application& app, const Caps& caps) {
  return pad(truncate(app, caps));
}

namespace detail {

inline PaddedDocument widen(const PaddedDocument& doc, std::size_t sections, std::size_t width) {
  PaddedDocument out;
  out.ids.assign(sections, Sentence(width, kPadId));
  out.masks.assign(sections, Mask(width, false));
  for (std::size_t s = 0; s < doc.ids.size(); ++s) {
    std::copy(doc.ids[s].begin(), doc.ids[s].end(), out.ids[s].begin());
    std::copy(doc.masks[s].begin(), doc.masks[s].end(), out.masks[s].begin());
  }
  return out;
}

}  // namespace detail

/// Pads every application in a batch to the batch-wide maximum section count
/// and width, separately for postings and resumes.
inline std::vector<PaddedApplication> pad_batch(const std::vector<PaddedApplication>& batch) {
  std::size_t P = 0, M = 0, Q = 0, N = 0;
  for (const auto& a : batch) {
    P = std::max(P, a.job.sections());
    M = std::max(M, a.job.width());
    Q = std::max(Q, a.resume.sections());
    N = std::max(N, a.resume.width());
  }
  std::vector<PaddedApplication> out;
  out.reserve(batch.size());
  for (const auto& a : batch) {
    PaddedApplication p = a;
    p.job = detail::widen(a.job, P, M);
    p.resume = detail::widen(a.resume, Q, N);
    out.push_back(std::move(p));
  }
  return out;
}

// ---- sampling protocols ----------------------------------------------------
// The functions below work on any record type with job_id, label and side
// members (CorpusRecord, Application).

/// Per posting keeps every positive and min(n+, n-) negatives drawn uniformly
/// without replacement. Kept records retain their original order.
template <typename Record>
std::vector<Record> undersample(const std::vector<Record>& corpus, std::uint64_t seed) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
      groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(corpus[i].job_id);
    if (fresh) order.push_back(corpus[i].job_id);
    (corpus[i].label == 1 ? it->second.first : it->second.second).push_back(i);
  }
  Rng rng(derive_seed(seed, {0x756e646572ULL}));
  std::vector<bool> keep(corpus.size(), false);
  for (const auto& job : order) {
    auto& [pos, neg] = groups[job];
    for (auto i : pos) keep[i] = true;
    shuffle(neg.begin(), neg.end(), rng);
    const std::size_t take = std::min(pos.size(), neg.size());
    for (std::size_t k = 0; k < take; ++k) keep[neg[k]] = true;
  }
  std::vector<Record> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) out.push_back(corpus[i]);
  return out;
}

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train > 0 && validation > 0 && test > 0)) {
      throw ConfigError("split fractions must be positive");
    }
    if (std::abs(train + validation + test - 1.0) > 1e-6) {
      throw ConfigError("split fractions must sum to 1");
    }
  }

  /// Parses "a,b,c".
  static SplitSpec parse(const std::string& text, std::uint64_t seed) {
    SplitSpec s;
    s.seed = seed;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    std::string rest;
    if (!(in >> s.train >> c1 >> s.validation >> c2 >> s.test) || c1 != ',' || c2 != ',' ||
        (in >> rest)) {
      throw ConfigError("split must look like 0.8,0.1,0.1, got '" + text + "'");
    }
    s.validate();
    return s;
  }
};

template <typename Record>
struct Splits {
  std::vector<Record> train, validation, test;
};

/// Random disjoint partition. Sizes are rounded from the fractions with the
/// test part taking the remainder; each part keeps corpus order.
template <typename Record>
Splits<Record> split(const std::vector<Record>& corpus, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = corpus.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, {0x73706c6974ULL}));
  shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(spec.validation * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  auto part = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> sel(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                 idx.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(sel.begin(), sel.end());
    std::vector<Record> out;
    out.reserve(sel.size());
    for (auto i : sel) out.push_back(corpus[i]);
    return out;
  };
  Splits<Record> out;
  out.train = part(0, n_train);
  out.validation = part(n_train, n_train + n_val);
  out.test = part(n_train + n_val, n);
  return out;
}

struct FlipEntry {
  std::size_t index;
  std::string job_id;
  std::string resume_id;
  int side;
  int old_label;
  int new_label;
};

struct FlipManifest {
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t female_positives = 0;
  std::size_t male_negatives = 0;
  std::size_t female_flipped = 0;
  std::size_t male_flipped = 0;
  std::vector<FlipEntry> flips;  // ordered by index
};

template <typename Record>
struct BiasInjection {
  std::vector<Record> records;
  FlipManifest manifest;
};

/// Relabels floor(rate * #female positives) female positives as negative and
/// floor(rate * #male negatives) male negatives as positive, chosen uniformly.
/// Meant for training and validation data only.
template <typename Record>
BiasInjection<Record> inject_bias(const std::vector<Record>& corpus, double flip_rate,
                                  std::uint64_t seed) {
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
    throw ConfigError("flip rate must lie in [0, 1]");
  }
  std::vector<std::size_t> female_pos, male_neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].side) {
      throw ValidationError("record " + std::to_string(i) + " (" + corpus[i].job_id + "/" +
                            corpus[i].resume_id + ") has no side feature");
    }
    const int side = *corpus[i].side;
    if (side != kFemale && side != kMale) {
      throw ValidationError("record " + std::to_string(i) + " has non-binary side " +
                            std::to_string(side));
    }
    if (side == kFemale && corpus[i].label == 1) female_pos.push_back(i);
    if (side == kMale && corpus[i].label == 0) male_neg.push_back(i);
  }
  BiasInjection<Record> out;
  out.records = corpus;
  auto& m = out.manifest;
  m.flip_rate = flip_rate;
  m.seed = seed;
  m.female_positives = female_pos.size();
  m.male_negatives = male_neg.size();
  Rng rng(derive_seed(seed, {0x62696173ULL}));
  auto pick = [&](std::vector<std::size_t>& pool) {
    const auto n = static_cast<std::size_t>(
        std::floor(flip_rate * static_cast<double>(pool.size()) + 1e-9));
    shuffle(pool.begin(), pool.end(), rng);
    return std::vector<std::size_t>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  };
  auto female = pick(female_pos);
  auto male = pick(male_neg);
  m.female_flipped = female.size();
  m.male_flipped = male.size();
  std::vector<std::size_t> all(female);
  all.insert(all.end(), male.begin(), male.end());
  std::sort(all.begin(), all.end());
  for (auto i : all) {
    auto& r = out.records[i];
    const int old = r.label;
    r.label = 1 - old;
    m.flips.push_back({i, r.job_id, r.resume_id, *r.side, old, r.label});
  }
  return out;
}

/// Keeps the same number of records in each (side, label) cell, the size of
/// the smallest cell, sampled uniformly. Records without a side are dropped.
template <typename Record>
std::vector<Record> balance_by_side(const std::vector<Record>& corpus, std::uint64_t seed) {
  std::vector<std::size_t> cells[2][2];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& r = corpus[i];
    if (!r.side || (*r.side != kFemale && *r.side != kMale)) continue;
    cells[*r.side][r.label].push_back(i);
  }
  std::size_t n = corpus.size();
  for (auto& row : cells)
    for (auto& c : row) n = std::min(n, c.size());
  Rng rng(derive_seed(seed, {0x62616c616e6365ULL}));
  std::vector<bool> keep(corpus.size(), false);
  for (auto& row : cells)
    for (auto& c : row) {
      shuffle(c.begin(), c.end(), rng);
      for (std::size_t k = 0; k < n; ++k) keep[c[k]] = true;
    }
  std::vector<Record> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) out.push_back(corpus[i]);
  return out;
}

/// Success rate (fraction of label 1) among records with the given side.
template <typename Record>
double success_rate(const std::vector<Record>& corpus, int side) {
  std::size_t n = 0, pos = 0;
  for (const auto& r : corpus) {
    if (r.side && *r.side == side) {
      ++n;
      pos += r.label == 1;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(n);
}

inline nlohmann::ordered_json to_json(const FlipManifest& m) {
  nlohmann::ordered_json j;
  j["flip_rate"] = m.flip_rate;
  j["seed"] = m.seed;
  j["female_positives"] = m.female_positives;
  j["male_negatives"] = m.male_negatives;
  j["female_flipped"] = m.female_flipped;
  j["male_flipped"] = m.male_flipped;
  auto& arr = j["flips"] = nlohmann::ordered_json::array();
  for (const auto& f : m.flips) {
    arr.push_back({{"index", f.index}, {"job_id", f.job_id}, {"resume_id", f.resume_id},
                   {"side", f.side}, {"old_label", f.old_label}, {"new_label", f.new_label}});
  }
  return j;
}

}  // namespace pjfit
