#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pjfit/application.hpp"
#include "pjfit/data.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/model.hpp"

// A checkpoint is a directory:
//   manifest.txt  versioned text: config, caps, vocabulary fingerprint, and one
//                 "param <name> f32 <shape> <byte_offset> <count>" line per tensor
//   params.bin    the tensors back to back as little-endian float32
//   vocab.txt     one token per line in id order

namespace pjfit {

inline constexpr const char* kCheckpointMagic = "pjfit-checkpoint 1";

struct Checkpoint {
  ModelParams<float> params;
  Vocabulary vocab;
  Caps caps;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

inline void write_f32_le(std::ostream& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16),
                              static_cast<unsigned char>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline float read_f32_le(const unsigned char* b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                             (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline std::size_t parse_size(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("checkpoint: bad " + what + " '" + text + "'");
  }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, ModelParams<float>& params,
                            const Vocabulary& vocab, const Caps& caps) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& c = params.config;
  if (c.vocab_size != vocab.size()) {
    throw ConfigError("model vocab_size " + std::to_string(c.vocab_size) +
                      " does not match vocabulary of " + std::to_string(vocab.size()));
  }
  std::ostringstream m;
  m << kCheckpointMagic << '\n';
  m << "config kind " << to_string(c.kind) << '\n';
  m << "config head " << (c.head == OutputHead::kSigmoid ? "sigmoid" : "softmax2") << '\n';
  const std::pair<const char*, std::size_t> dims[] = {
      {"vocab_size", c.vocab_size},       {"embed_dim", c.embed_dim},
      {"word_hidden", c.word_hidden},     {"section_hidden", c.section_hidden},
      {"attn_alpha", c.attn_alpha},       {"attn_beta", c.attn_beta},
      {"attn_gamma", c.attn_gamma},       {"attn_delta", c.attn_delta},
      {"comparison_dim", c.comparison_dim}, {"side_width", c.side_width}};
  for (const auto& [name, v] : dims) m << "config " << name << ' ' << v << '\n';
  m << "config keep_prob " << detail::format_double(c.keep_prob) << '\n';
  m << "caps " << caps.max_requirements << ' ' << caps.max_experiences << ' '
    << caps.max_requirement_words << ' ' << caps.max_experience_words << '\n';
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(vocab.fingerprint()));
  m << "vocab " << vocab.size() << ' ' << hash << '\n';

  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw ValidationError("cannot write " + (dir / "params.bin").string());
  std::size_t offset = 0;
  params.visit([&](const std::string& name, Tensor<float>& t) {
    m << "param " << name << " f32 " << detail::shape_text(t.shape()) << ' ' << offset << ' '
      << t.size() << '\n';
    for (float v : t.data()) detail::write_f32_le(bin, v);
    offset += t.size() * 4;
  });
  m << "end " << offset << '\n';
  std::ofstream(dir / "manifest.txt", std::ios::binary) << m.str();
  std::ofstream voc(dir / "vocab.txt", std::ios::binary);
  vocab.save(voc);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.txt", std::ios::binary);
  if (!mf) throw ValidationError("no checkpoint manifest in " + dir.string());
  std::string line;
  if (!std::getline(mf, line) || line != kCheckpointMagic) {
    throw ParseError("checkpoint manifest has unknown header '" + line + "'", 1);
  }
  ModelConfig cfg;
  Caps caps;
  std::size_t vocab_size = 0;
  std::string vocab_hash;
  struct Entry {
    std::string name, shape;
    std::size_t offset, count;
  };
  std::vector<Entry> entries;
  std::size_t total = 0;
  bool ended = false;
  std::size_t lineno = 1;
  while (std::getline(mf, line)) {
    ++lineno;
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    if (kind == "config") {
      std::string key, value;
      in >> key >> value;
      if (key == "kind") cfg.kind = parse_model_kind(value);
      else if (key == "head") {
        if (value != "sigmoid" && value != "softmax2") throw ParseError("unknown head " + value, lineno);
        cfg.head = value == "sigmoid" ? OutputHead::kSigmoid : OutputHead::kSoftmax2;
      } else if (key == "keep_prob") cfg.keep_prob = std::stod(value);
      else {
        const std::size_t v = detail::parse_size(value, key);
        if (key == "vocab_size") cfg.vocab_size = v;
        else if (key == "embed_dim") cfg.embed_dim = v;
        else if (key == "word_hidden") cfg.word_hidden = v;
        else if (key == "section_hidden") cfg.section_hidden = v;
        else if (key == "attn_alpha") cfg.attn_alpha = v;
        else if (key == "attn_beta") cfg.attn_beta = v;
        else if (key == "attn_gamma") cfg.attn_gamma = v;
        else if (key == "attn_delta") cfg.attn_delta = v;
        else if (key == "comparison_dim") cfg.comparison_dim = v;
        else if (key == "side_width") cfg.side_width = v;
        else throw ParseError("unknown config key " + key, lineno);
      }
    } else if (kind == "caps") {
      if (!(in >> caps.max_requirements >> caps.max_experiences >> caps.max_requirement_words >>
            caps.max_experience_words)) {
        throw ParseError("bad caps line", lineno);
      }
    } else if (kind == "vocab") {
      in >> vocab_size >> vocab_hash;
    } else if (kind == "param") {
      Entry e;
      std::string dtype;
      if (!(in >> e.name >> dtype >> e.shape >> e.offset >> e.count) || dtype != "f32") {
        throw ParseError("bad param line", lineno);
      }
      entries.push_back(e);
    } else if (kind == "end") {
      in >> total;
      ended = true;
    } else if (!kind.empty()) {
      throw ParseError("unknown manifest entry '" + kind + "'", lineno);
    }
  }
  if (!ended) throw ParseError("checkpoint manifest is truncated");

  std::ifstream vf(dir / "vocab.txt", std::ios::binary);
  if (!vf) throw ValidationError("no vocabulary in checkpoint " + dir.string());
  Vocabulary vocab = Vocabulary::load(vf);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(vocab.fingerprint()));
  if (vocab.size() != vocab_size || vocab_hash != hash) {
    throw ConfigError("checkpoint vocabulary does not match its manifest fingerprint");
  }

  std::ifstream bf(dir / "params.bin", std::ios::binary);
  if (!bf) throw ValidationError("no params.bin in checkpoint " + dir.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
  if (blob.size() != total) {
    throw ParseError("params.bin holds " + std::to_string(blob.size()) + " bytes, manifest says " +
                     std::to_string(total));
  }

  Rng rng(0);
  Checkpoint ck{ModelParams<float>::create(cfg, rng), std::move(vocab), caps};
  std::size_t k = 0;
  ck.params.visit([&](const std::string& name, Tensor<float>& t) {
    if (k >= entries.size()) throw ParseError("checkpoint is missing parameter " + name);
    const auto& e = entries[k++];
    if (e.name != name || e.shape != detail::shape_text(t.shape()) || e.count != t.size()) {
      throw ParseError("checkpoint parameter " + e.name + " [" + e.shape + "] does not match " +
                       name + " [" + detail::shape_text(t.shape()) + "]");
    }
    if (e.offset + e.count * 4 > blob.size()) throw ParseError("parameter " + name + " overruns params.bin");
    auto out = t.data();
    for (std::size_t i = 0; i < e.count; ++i) out[i] = detail::read_f32_le(&blob[e.offset + 4 * i]);
  });
  if (k != entries.size()) throw ParseError("checkpoint has unexpected extra parameters");
  return ck;
}

}  // namespace pjfit
