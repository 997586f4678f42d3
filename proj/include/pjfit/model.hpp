#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pjfit/application.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/graph.hpp"
#include "pjfit/init.hpp"
#include "pjfit/layers.hpp"
#include "pjfit/rng.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit {

enum class ModelKind { kApjfnn, kBpjfnn, kApjfnnSide };

// BPJFNN output layer: a scalar sigmoid, or a 2-way softmax whose positive
// class probability is reported.
enum class OutputHead { kSigmoid, kSoftmax2 };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kApjfnn: return "apjfnn";
    case ModelKind::kBpjfnn: return "bpjfnn";
    case ModelKind::kApjfnnSide: return "apjfnn-side";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& name) {
  if (name == "apjfnn") return ModelKind::kApjfnn;
  if (name == "bpjfnn") return ModelKind::kBpjfnn;
  if (name == "apjfnn-side" || name == "apjfnn+side") return ModelKind::kApjfnnSide;
  throw ConfigError("unknown model kind '" + name + "' (apjfnn, bpjfnn, apjfnn-side)");
}

/// Every dimension of the network. BiLSTM hidden sizes are per direction, so
/// word-level states are 2*word_hidden wide and section-level states
/// 2*section_hidden wide.
struct ModelConfig {
  ModelKind kind = ModelKind::kApjfnn;
  std::size_t vocab_size = 2;
  std::size_t embed_dim = 100;
  std::size_t word_hidden = 200;
  std::size_t section_hidden = 200;
  std::size_t attn_alpha = 200;
  std::size_t attn_beta = 200;
  std::size_t attn_gamma = 400;
  std::size_t attn_delta = 400;
  std::size_t comparison_dim = 200;
  std::size_t side_width = 0;
  OutputHead head = OutputHead::kSigmoid;
  double keep_prob = 0.8;

  std::size_t word_dim() const { return 2 * word_hidden; }
  std::size_t section_dim() const { return 2 * section_hidden; }

  // Width of the vectors compared by the head: g^J/g^R, or s^J/s^R for BPJFNN.
  std::size_t summary_dim() const {
    return kind == ModelKind::kBpjfnn ? word_dim() : section_dim();
  }
  std::size_t head_input_dim() const { return side_width + 3 * summary_dim(); }

  void validate() const {
    const std::initializer_list<std::pair<const char*, std::size_t>> dims = {
        {"vocab_size", vocab_size},   {"embed_dim", embed_dim},
        {"word_hidden", word_hidden}, {"section_hidden", section_hidden},
        {"attn_alpha", attn_alpha},   {"attn_beta", attn_beta},
        {"attn_gamma", attn_gamma},   {"attn_delta", attn_delta},
        {"comparison_dim", comparison_dim}};
    for (auto [name, v] : dims) {
      if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    }
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
      throw ConfigError("keep_prob must lie in (0, 1]");
    }
    if (kind == ModelKind::kApjfnnSide && side_width == 0) {
      throw ConfigError("apjfnn-side needs a positive side_width");
    }
    if (kind != ModelKind::kApjfnnSide && side_width != 0) {
      throw ConfigError(to_string(kind) + " takes no side feature; side_width must be 0");
    }
  }
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  EmbeddingTable<T> embedding;  // shared by postings and resumes
  BiLstmParams<T> word_bilstm_J, word_bilstm_R;
  BiLstmParams<T> ability_bilstm, experience_bilstm;
  SelfAttentionParams<T> attn_alpha, attn_beta;
  ConditionedAttentionParams<T> attn_gamma, attn_delta;
  Tensor<T> head_W_d, head_b_d, head_W_y, head_b_y;

  static ModelParams create(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    p.embedding.W_e = glorot_init<T>({cfg.vocab_size, cfg.embed_dim}, rng);
    p.word_bilstm_J = BiLstmParams<T>::create(cfg.embed_dim, cfg.word_hidden, rng);
    p.word_bilstm_R = BiLstmParams<T>::create(cfg.embed_dim, cfg.word_hidden, rng);
    if (cfg.kind != ModelKind::kBpjfnn) {
      p.ability_bilstm = BiLstmParams<T>::create(cfg.word_dim(), cfg.section_hidden, rng);
      p.experience_bilstm = BiLstmParams<T>::create(cfg.word_dim(), cfg.section_hidden, rng);
      p.attn_alpha = SelfAttentionParams<T>::create(cfg.word_dim(), cfg.attn_alpha, rng);
      p.attn_beta = SelfAttentionParams<T>::create(cfg.section_dim(), cfg.attn_beta, rng);
      p.attn_gamma = ConditionedAttentionParams<T>::create(cfg.word_dim(), cfg.word_dim(),
                                                           cfg.attn_gamma, rng);
      p.attn_delta = ConditionedAttentionParams<T>::create(
          cfg.section_dim(), cfg.section_dim(), cfg.attn_delta, rng);
    }
    const std::size_t classes =
        cfg.kind == ModelKind::kBpjfnn && cfg.head == OutputHead::kSoftmax2 ? 2 : 1;
    p.head_W_d = glorot_init<T>({cfg.comparison_dim, cfg.head_input_dim()}, rng);
    p.head_b_d = glorot_init<T>({cfg.comparison_dim}, rng);
    p.head_W_y = glorot_init<T>({classes, cfg.comparison_dim}, rng);
    p.head_b_y = glorot_init<T>({classes}, rng);
    return p;
  }

  /// Visits every learnable tensor of the configured kind in a fixed order.
  template <typename F>
  void visit(F&& f) {
    embedding.visit("embedding", f);
    word_bilstm_J.visit("word_bilstm_J", f);
    word_bilstm_R.visit("word_bilstm_R", f);
    if (config.kind != ModelKind::kBpjfnn) {
      ability_bilstm.visit("ability_bilstm", f);
      experience_bilstm.visit("experience_bilstm", f);
      attn_alpha.visit("attn_alpha", f);
      attn_beta.visit("attn_beta", f);
      attn_gamma.visit("attn_gamma", f);
      attn_delta.visit("attn_delta", f);
    }
    f(std::string("head.W_d"), head_W_d);
    f(std::string("head.b_d"), head_b_d);
    f(std::string("head.W_y"), head_W_y);
    f(std::string("head.b_y"), head_b_y);
  }

  std::vector<std::pair<std::string, Tensor<T>>> named() {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    visit([&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, t); });
    return out;
  }

  /// Deep copy with independent values and gradient buffers.
  ModelParams clone() const {
    ModelParams copy = *this;
    copy.visit([](const std::string&, Tensor<T>& t) { t = t.clone(); });
    return copy;
  }

  void zero_grad() {
    visit([](const std::string&, Tensor<T>& t) { t.zero_grad(); });
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, Tensor<T>& t) { n += t.size(); });
    return n;
  }
};

/// Attention distributions from one forward pass, stored at padded width.
/// Rows for padded sections are all zero; every real row is a distribution
/// over the unmasked positions of its section.
struct AttentionTrace {
  std::vector<std::vector<double>> alpha;               // [requirement][word]
  std::vector<double> beta;                             // [requirement]
  std::vector<std::vector<std::vector<double>>> gamma;  // [experience][requirement][word]
  std::vector<double> delta;                            // [experience]
  Mask requirement_mask;
  Mask experience_mask;
  std::vector<Mask> requirement_words;
  std::vector<Mask> experience_words;

  bool empty() const { return beta.empty() && delta.empty(); }
};

template <typename T>
struct PredictionOutput {
  Tensor<T> y_hat;  // [1], probability of a successful application
  Tensor<T> D;
  Tensor<T> g_J;
  Tensor<T> g_R;
  AttentionTrace trace;

  double probability() const { return static_cast<double>(y_hat[0]); }
};

struct ForwardOptions {
  Mode mode = Mode::kEval;
  bool record_trace = true;
};

template <typename T>
struct JobEncoding {
  Tensor<T> g_J;
  std::vector<Tensor<T>> s_J;  // per requirement slot; zeros at padded slots
  Mask requirement_mask;
  std::vector<Tensor<T>> alpha;  // undefined at padded slots
  Tensor<T> beta;
};

template <typename T>
struct ResumeEncoding {
  Tensor<T> g_R;
  Mask experience_mask;
  std::vector<std::vector<Tensor<T>>> gamma;  // [experience][requirement]
  Tensor<T> delta;
};

namespace detail {

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

// Embeds the unmasked words of one section, applies dropout and the BiLSTM,
// and returns a [width x 2h] matrix with zero rows at masked positions.
template <typename T>
Tensor<T> encode_words(Graph<T>& g, const ModelParams<T>& params, const Sentence& ids,
                       const Mask& mask, const BiLstmParams<T>& bilstm, Mode mode, Rng& rng) {
  Sentence real;
  for (std::size_t t = 0; t < ids.size(); ++t)
    if (mask[t]) real.push_back(ids[t]);
  auto E = g.embed(params.embedding.W_e, real);
  E = dropout(g, E, params.config.keep_prob, mode, rng);
  auto H = bilstm_sequence(g, E, bilstm);
  if (real.size() == ids.size()) return H;
  std::vector<std::size_t> positions;
  for (std::size_t t = 0; t < ids.size(); ++t)
    if (mask[t]) positions.push_back(t);
  return g.scatter_rows(H, positions, ids.size());
}

template <typename T>
void check_document(const PaddedDocument& doc, const char* what) {
  if (doc.masks.size() != doc.ids.size()) {
    throw ValidationError(std::string(what) + ": mask/id section count mismatch");
  }
  for (std::size_t s = 0; s < doc.ids.size(); ++s) {
    if (doc.masks[s].size() != doc.ids[s].size()) {
      throw ValidationError(std::string(what) + ": mask/id width mismatch in section " +
                            std::to_string(s));
    }
  }
}

template <typename T>
Tensor<T> comparison_head(Graph<T>& g, const ModelParams<T>& params, const Tensor<T>& a,
                          const Tensor<T>& b, const std::optional<std::vector<T>>& side,
                          Mode mode, Rng& rng, Tensor<T>& D_out) {
  const auto& cfg = params.config;
  std::vector<Tensor<T>> parts;
  if (cfg.side_width > 0) {
    if (!side) throw ValidationError("model expects a side feature; none supplied");
    if (side->size() != cfg.side_width) {
      throw DimensionError("side feature of width " + std::to_string(side->size()) +
                           ", model expects " + std::to_string(cfg.side_width));
    }
    parts.push_back(Tensor<T>::vector(*side));
  } else if (side) {
    throw ConfigError("side feature supplied to a model configured without one");
  }
  parts.push_back(a);
  parts.push_back(b);
  parts.push_back(g.sub(a, b));
  auto joined = g.concat(std::span<const Tensor<T>>(parts));
  D_out = g.tanh(g.affine(params.head_W_d, joined, params.head_b_d));
  auto D = dropout(g, D_out, cfg.keep_prob, mode, rng);
  auto logits = g.affine(params.head_W_y, D, params.head_b_y);
  if (logits.size() == 1) return g.sigmoid(logits);
  auto probs = g.softmax_masked(logits, Mask(logits.size(), true));
  return g.slice(probs, 1, 2);
}

}  // namespace detail

/// Word BiLSTM and alpha attention per requirement, then the ability BiLSTM
/// over the requirement vectors and beta attention into g^J.
template <typename T>
JobEncoding<T> encode_job(Graph<T>& g, const ModelParams<T>& params, const PaddedDocument& job,
                          Mode mode, Rng& rng) {
  detail::check_document<T>(job, "posting");
  JobEncoding<T> out;
  out.requirement_mask = job.section_mask();
  bool any = false;
  for (bool m : out.requirement_mask) any = any || m;
  if (!any) throw ValidationError("posting has no non-empty requirement");

  const std::size_t P = job.sections();
  out.s_J.resize(P);
  out.alpha.resize(P);
  for (std::size_t l = 0; l < P; ++l) {
    if (!out.requirement_mask[l]) {
      out.s_J[l] = Tensor<T>::zeros({params.config.word_dim()});
      continue;
    }
    auto H = detail::encode_words(g, params, job.ids[l], job.masks[l], params.word_bilstm_J,
                                  mode, rng);
    auto att = self_attention(g, H, job.masks[l], params.attn_alpha);
    out.s_J[l] = att.context;
    out.alpha[l] = att.weights;
  }
  auto c_J = bilstm_encode_masked(g, out.s_J, out.requirement_mask, params.ability_bilstm);
  auto att = self_attention(g, c_J, out.requirement_mask, params.attn_beta);
  out.g_J = att.context;
  out.beta = att.weights;
  return out;
}

/// Per experience: word BiLSTM, gamma attention conditioned on each s^J_k,
/// mean over requirements into u^R_l; then the experience BiLSTM and delta
/// attention conditioned on g^J into g^R.
template <typename T>
ResumeEncoding<T> encode_resume(Graph<T>& g, const ModelParams<T>& params,
                                const PaddedDocument& resume, const JobEncoding<T>& job,
                                Mode mode, Rng& rng) {
  detail::check_document<T>(resume, "resume");
  ResumeEncoding<T> out;
  out.experience_mask = resume.section_mask();
  bool any = false;
  for (bool m : out.experience_mask) any = any || m;
  if (!any) throw ValidationError("resume has no non-empty experience");

  const std::size_t P = job.s_J.size();
  const std::size_t Q = resume.sections();
  std::vector<Tensor<T>> cond(P);
  for (std::size_t k = 0; k < P; ++k) {
    if (job.requirement_mask[k]) cond[k] = g.matmul(params.attn_gamma.W, job.s_J[k]);
  }
  auto U_t = g.transpose(params.attn_gamma.U);

  std::vector<Tensor<T>> u_R(Q);
  out.gamma.assign(Q, std::vector<Tensor<T>>(P));
  for (std::size_t l = 0; l < Q; ++l) {
    if (!out.experience_mask[l]) {
      u_R[l] = Tensor<T>::zeros({params.config.word_dim()});
      continue;
    }
    auto H = detail::encode_words(g, params, resume.ids[l], resume.masks[l],
                                  params.word_bilstm_R, mode, rng);
    auto UH = g.matmul(H, U_t);
    std::vector<Tensor<T>> s_R;
    for (std::size_t k = 0; k < P; ++k) {
      if (!job.requirement_mask[k]) continue;
      auto att = conditioned_attention_projected(g, H, UH, cond[k], resume.masks[l],
                                                 params.attn_gamma);
      s_R.push_back(att.context);
      out.gamma[l][k] = att.weights;
    }
    // Divides by the number of real requirements.
    u_R[l] = mean_pool(g, s_R);
  }
  auto c_R = bilstm_encode_masked(g, u_R, out.experience_mask, params.experience_bilstm);
  auto att = conditioned_attention(g, g.stack(c_R), job.g_J, out.experience_mask,
                                   params.attn_delta);
  out.g_R = att.context;
  out.delta = att.weights;
  return out;
}

/// One-hot side feature when the model uses one; nullopt otherwise.
template <typename T>
std::optional<std::vector<T>> side_feature(const ModelConfig& cfg,
                                           const std::optional<int>& side) {
  if (cfg.side_width == 0) return std::nullopt;
  if (!side) throw ValidationError("application lacks the side feature the model needs");
  if (*side < 0 || static_cast<std::size_t>(*side) >= cfg.side_width) {
    throw ValidationError("side category " + std::to_string(*side) + " outside width " +
                          std::to_string(cfg.side_width));
  }
  std::vector<T> out(cfg.side_width, T{0});
  out[static_cast<std::size_t>(*side)] = T{1};
  return out;
}

/// BPJFNN: each document is one flat word sequence, BiLSTM-encoded and
/// mean-pooled into s^J / s^R, followed by the same comparison head.
template <typename T>
PredictionOutput<T> predict_bpjfnn(Graph<T>& g, const ModelParams<T>& params,
                                   const PaddedApplication& app, ForwardOptions opts, Rng& rng,
                                   const std::optional<std::vector<T>>& side = std::nullopt) {
  auto flat = [](const PaddedDocument& doc) {
    Sentence ids;
    for (std::size_t s = 0; s < doc.ids.size(); ++s)
      for (std::size_t t = 0; t < doc.ids[s].size(); ++t)
        if (doc.masks[s][t]) ids.push_back(doc.ids[s][t]);
    return ids;
  };
  auto encode = [&](const Sentence& ids, const BiLstmParams<T>& bilstm, const char* what) {
    if (ids.empty()) throw ValidationError(std::string(what) + " has no words");
    auto H = detail::encode_words(g, params, ids, Mask(ids.size(), true), bilstm, opts.mode,
                                  rng);
    return g.mean(H, 0);
  };
  detail::check_document<T>(app.job, "posting");
  detail::check_document<T>(app.resume, "resume");
  PredictionOutput<T> out;
  out.g_J = encode(flat(app.job), params.word_bilstm_J, "posting");
  out.g_R = encode(flat(app.resume), params.word_bilstm_R, "resume");
  out.y_hat = detail::comparison_head(g, params, out.g_J, out.g_R, side, opts.mode, rng, out.D);
  return out;
}

/// Full forward pass. D = tanh(W_d [o; g^J; g^R; g^J - g^R] + b_d) with o
/// present only for the side-feature variant; y = sigmoid(W_y D + b_y).
template <typename T>
PredictionOutput<T> predict(Graph<T>& g, const ModelParams<T>& params,
                            const PaddedApplication& app, ForwardOptions opts, Rng& rng,
                            const std::optional<std::vector<T>>& side) {
  if (params.config.kind == ModelKind::kBpjfnn) {
    return predict_bpjfnn(g, params, app, opts, rng, side);
  }
  auto job = encode_job(g, params, app.job, opts.mode, rng);
  auto resume = encode_resume(g, params, app.resume, job, opts.mode, rng);

  PredictionOutput<T> out;
  out.g_J = job.g_J;
  out.g_R = resume.g_R;
  out.y_hat = detail::comparison_head(g, params, job.g_J, resume.g_R, side, opts.mode, rng,
                                      out.D);
  if (opts.record_trace) {
    auto& tr = out.trace;
    const std::size_t P = app.job.sections(), Q = app.resume.sections();
    tr.requirement_mask = job.requirement_mask;
    tr.experience_mask = resume.experience_mask;
    tr.requirement_words = app.job.masks;
    tr.experience_words = app.resume.masks;
    tr.alpha.assign(P, {});
    for (std::size_t l = 0; l < P; ++l) {
      tr.alpha[l] = job.alpha[l].defined() ? detail::to_doubles(job.alpha[l])
                                           : std::vector<double>(app.job.width(), 0.0);
    }
    tr.beta = detail::to_doubles(job.beta);
    tr.gamma.assign(Q, std::vector<std::vector<double>>(P));
    for (std::size_t l = 0; l < Q; ++l)
      for (std::size_t k = 0; k < P; ++k) {
        tr.gamma[l][k] = resume.gamma[l][k].defined()
                             ? detail::to_doubles(resume.gamma[l][k])
                             : std::vector<double>(app.resume.width(), 0.0);
      }
    tr.delta = detail::to_doubles(resume.delta);
  }
  return out;
}

/// Convenience overload deriving the side feature from the application.
template <typename T>
PredictionOutput<T> predict(Graph<T>& g, const ModelParams<T>& params,
                            const PaddedApplication& app, ForwardOptions opts, Rng& rng) {
  return predict(g, params, app, opts, rng, side_feature<T>(params.config, app.side));
}

}  // namespace pjfit
