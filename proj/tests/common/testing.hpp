#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pjfit/application.hpp"
#include "pjfit/data.hpp"
#include "pjfit/model.hpp"
#include "pjfit/rng.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit::testkit {

struct GradCheck {
  double worst = 0.0;
  std::string where;
};

// Central differences against the gradients already stored on the tensors.
// Error is |analytic - numeric| / max(1, |analytic|).
inline GradCheck check_gradients(std::vector<std::pair<std::string, Tensor<double>>>& params,
                                 const std::function<double()>& loss, double h = 1e-6) {
  GradCheck out;
  for (auto& [name, t] : params) {
    auto w = t.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      w[i] = keep + h;
      const double up = loss();
      w[i] = keep - h;
      const double down = loss();
      w[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = t.grad()[i];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      if (err > out.worst) {
        out.worst = err;
        out.where = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

inline Sentence random_sentence(Rng& rng, std::size_t len, std::size_t vocab) {
  Sentence s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<TokenId>(2 + uniform_index(rng, vocab - 2)));
  return s;
}

inline Application random_application(Rng& rng, std::size_t vocab, std::size_t reqs,
                                      std::size_t req_len, std::size_t exps, std::size_t exp_len,
                                      int label) {
  Application a;
  a.job_id = "j";
  a.resume_id = "r";
  for (std::size_t i = 0; i < reqs; ++i) a.requirements.push_back(random_sentence(rng, req_len, vocab));
  for (std::size_t i = 0; i < exps; ++i) a.experiences.push_back(random_sentence(rng, exp_len, vocab));
  a.label = label;
  a.side = label;
  return a;
}

// Varied section counts and lengths, padded to a common width.
inline PaddedApplication ragged_application(Rng& rng, std::size_t vocab, std::size_t max_sections,
                                            std::size_t max_len) {
  Application a;
  a.job_id = "j";
  a.resume_id = "r";
  const auto p = 1 + uniform_index(rng, max_sections), q = 1 + uniform_index(rng, max_sections);
  for (std::size_t i = 0; i < p; ++i) a.requirements.push_back(random_sentence(rng, 1 + uniform_index(rng, max_len), vocab));
  for (std::size_t i = 0; i < q; ++i) a.experiences.push_back(random_sentence(rng, 1 + uniform_index(rng, max_len), vocab));
  a.label = static_cast<int>(uniform_index(rng, 2));
  auto padded = pad(a);
  // Widen past the real lengths so every section carries padding.
  padded.job = detail::widen(padded.job, p + 1, padded.job.width() + 2);
  padded.resume = detail::widen(padded.resume, q + 1, padded.resume.width() + 2);
  return padded;
}

inline ModelConfig small_config(ModelKind kind, std::size_t vocab, std::size_t d = 4) {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = vocab;
  c.embed_dim = d;
  c.word_hidden = d;
  c.section_hidden = d;
  c.attn_alpha = d;
  c.attn_beta = d;
  c.attn_gamma = d;
  c.attn_delta = d;
  c.comparison_dim = d;
  c.side_width = kind == ModelKind::kApjfnnSide ? 2 : 0;
  c.keep_prob = 1.0;
  return c;
}

}  // namespace pjfit::testkit
