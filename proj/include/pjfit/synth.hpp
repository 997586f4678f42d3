#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "pjfit/application.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/rng.hpp"

// Seeded synthetic postings and resumes with planted skill tokens. Every
// posting names `skills_per_posting` skills, one per skill-bearing requirement,
// next to filler-only requirements. A resume covers c of them, c uniform in
// [0, k], plus distractor skills from outside the posting. The clean label is
// 1 iff c / k >= tau; it is then flipped with probability noise_rate.

namespace pjfit {

struct GeneratorConfig {
  std::size_t num_postings = 200;
  std::size_t applications_per_posting = 40;
  std::size_t skill_universe = 40;
  std::size_t skills_per_posting = 3;
  double tau = 0.6;
  std::size_t filler_vocab = 300;
  std::size_t min_filler_requirements = 2, max_filler_requirements = 4;
  std::size_t min_requirement_words = 7, max_requirement_words = 11;
  std::size_t min_experiences = 3, max_experiences = 5;
  std::size_t min_experience_words = 14, max_experience_words = 22;
  std::size_t max_distractors = 1;
  double noise_rate = 0.05;
  double male_probability = 0.5;
  std::uint64_t seed = 7;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(num_postings, "num_postings");
    positive(applications_per_posting, "applications_per_posting");
    positive(skill_universe, "skill_universe");
    positive(skills_per_posting, "skills_per_posting");
    positive(filler_vocab, "filler_vocab");
    positive(min_requirement_words, "min_requirement_words");
    positive(min_experiences, "min_experiences");
    positive(min_experience_words, "min_experience_words");
    if (skills_per_posting > skill_universe) {
      throw ConfigError("skills_per_posting (" + std::to_string(skills_per_posting) +
                        ") exceeds skill_universe (" + std::to_string(skill_universe) + ")");
    }
    if (skills_per_posting + max_distractors > skill_universe) {
      throw ConfigError("skill universe too small for skills plus distractors");
    }
    if (min_experience_words < skills_per_posting + max_distractors) {
      throw ConfigError("min_experience_words must hold every planted skill");
    }
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise_rate must lie in [0, 1]");
    if (!(male_probability >= 0.0 && male_probability <= 1.0)) {
      throw ConfigError("male_probability must lie in [0, 1]");
    }
    if (min_filler_requirements > max_filler_requirements ||
        min_requirement_words > max_requirement_words || min_experiences > max_experiences ||
        min_experience_words > max_experience_words) {
      throw ConfigError("generator ranges must have min <= max");
    }
  }

  /// Smallest coverage count that yields a clean positive label.
  std::size_t coverage_threshold() const {
    const double k = static_cast<double>(skills_per_posting);
    return static_cast<std::size_t>(std::ceil(tau * k - 1e-9));
  }
};

struct PlantedSkill {
  std::size_t experience;
  std::size_t position;
  std::string token;
  bool in_posting;

  bool operator==(const PlantedSkill&) const = default;
};

struct SynthPosting {
  std::string job_id;
  std::vector<std::string> skills;                // one per skill-bearing requirement
  std::vector<std::size_t> skill_requirement;     // requirement index holding skills[i]
  std::vector<std::size_t> skill_position;        // word position inside that requirement
};

struct SynthApplication {
  std::string job_id;
  std::string resume_id;
  std::vector<std::string> covered;
  std::vector<std::string> distractors;
  std::vector<PlantedSkill> planted;
  int clean_label = 0;
  int label = 0;
  int side = kFemale;
};

struct SynthManifest {
  GeneratorConfig config;
  std::vector<std::string> skill_tokens;
  std::vector<SynthPosting> postings;
  std::vector<SynthApplication> applications;  // aligned with the corpus

  const SynthPosting& posting(const std::string& job_id) const {
    for (const auto& p : postings)
      if (p.job_id == job_id) return p;
    throw ValidationError("unknown posting " + job_id);
  }
};

struct SynthCorpus {
  std::vector<CorpusRecord> records;
  SynthManifest manifest;
};

inline std::string skill_token(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "skill_%03zu", i);
  return buf;
}

inline std::string filler_token(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "w_%03zu", i);
  return buf;
}

/// Clean label from the manifest alone.
inline int clean_label(const GeneratorConfig& cfg, const SynthApplication& app) {
  return app.covered.size() >= cfg.coverage_threshold() ? 1 : 0;
}

inline SynthCorpus generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  auto between = [&](std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); };
  auto filler = [&] { return filler_token(uniform_index(rng, cfg.filler_vocab)); };
  auto insert_at = [&](std::vector<std::string>& words, const std::string& token) {
    const std::size_t pos = uniform_index(rng, words.size() + 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), token);
    return pos;
  };

  SynthCorpus out;
  auto& man = out.manifest;
  man.config = cfg;
  for (std::size_t i = 0; i < cfg.skill_universe; ++i) man.skill_tokens.push_back(skill_token(i));

  std::vector<std::size_t> universe(cfg.skill_universe);
  for (std::size_t p = 0; p < cfg.num_postings; ++p) {
    for (std::size_t i = 0; i < universe.size(); ++i) universe[i] = i;
    shuffle(universe.begin(), universe.end(), rng);
    const std::size_t k = cfg.skills_per_posting;
    std::vector<std::size_t> chosen(universe.begin(), universe.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> others(universe.begin() + static_cast<std::ptrdiff_t>(k), universe.end());

    SynthPosting post;
    post.job_id = "job_" + std::to_string(p);
    const std::size_t n_filler = between(cfg.min_filler_requirements, cfg.max_filler_requirements);
    // Slot kinds in order: values < k are skill requirements.
    std::vector<std::size_t> slots(k + n_filler);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    shuffle(slots.begin(), slots.end(), rng);
    std::vector<std::vector<std::string>> requirements;
    post.skills.resize(k);
    post.skill_requirement.resize(k);
    post.skill_position.resize(k);
    for (std::size_t r = 0; r < slots.size(); ++r) {
      const bool has_skill = slots[r] < k;
      const std::size_t len = between(cfg.min_requirement_words, cfg.max_requirement_words);
      std::vector<std::string> words;
      for (std::size_t w = 0; w + (has_skill ? 1 : 0) < len; ++w) words.push_back(filler());
      if (has_skill) {
        const std::size_t s = slots[r];
        post.skills[s] = skill_token(chosen[s]);
        post.skill_requirement[s] = r;
        post.skill_position[s] = insert_at(words, post.skills[s]);
      }
      requirements.push_back(std::move(words));
    }

    for (std::size_t a = 0; a < cfg.applications_per_posting; ++a) {
      SynthApplication app;
      app.job_id = post.job_id;
      app.resume_id = "res_" + std::to_string(p) + "_" + std::to_string(a);
      const std::size_t c = uniform_index(rng, k + 1);
      std::vector<std::size_t> pick(chosen);
      shuffle(pick.begin(), pick.end(), rng);
      for (std::size_t i = 0; i < c; ++i) app.covered.push_back(skill_token(pick[i]));
      const std::size_t n_distract = uniform_index(rng, cfg.max_distractors + 1);
      std::vector<std::size_t> pool(others);
      shuffle(pool.begin(), pool.end(), rng);
      for (std::size_t i = 0; i < n_distract; ++i) app.distractors.push_back(skill_token(pool[i]));

      const std::size_t n_exp = between(cfg.min_experiences, cfg.max_experiences);
      std::vector<std::vector<std::string>> experiences(n_exp);
      for (auto& e : experiences) {
        const std::size_t len = between(cfg.min_experience_words, cfg.max_experience_words);
        for (std::size_t w = 0; w < len; ++w) e.push_back(filler());
      }
      // Each planted skill replaces one filler word, so lengths stay in range.
      auto plant = [&](const std::string& token, bool in_posting) {
        const std::size_t l = uniform_index(rng, n_exp);
        auto& words = experiences[l];
        std::size_t pos = uniform_index(rng, words.size());
        while (words[pos].rfind("skill_", 0) == 0) pos = (pos + 1) % words.size();
        words[pos] = token;
        app.planted.push_back({l, pos, token, in_posting});
      };
      for (const auto& s : app.covered) plant(s, true);
      for (const auto& s : app.distractors) plant(s, false);

      app.clean_label = clean_label(cfg, app);
      app.label = uniform01(rng) < cfg.noise_rate ? 1 - app.clean_label : app.clean_label;
      app.side = uniform01(rng) < cfg.male_probability ? kMale : kFemale;

      CorpusRecord rec;
      rec.job_id = app.job_id;
      rec.resume_id = app.resume_id;
      rec.requirements = requirements;
      rec.experiences = std::move(experiences);
      rec.label = app.label;
      rec.side = app.side;
      out.records.push_back(std::move(rec));
      man.applications.push_back(std::move(app));
    }
    man.postings.push_back(std::move(post));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const GeneratorConfig& c) {
  nlohmann::ordered_json j;
  j["num_postings"] = c.num_postings;
  j["applications_per_posting"] = c.applications_per_posting;
  j["skill_universe"] = c.skill_universe;
  j["skills_per_posting"] = c.skills_per_posting;
  j["tau"] = c.tau;
  j["filler_vocab"] = c.filler_vocab;
  j["filler_requirements"] = {c.min_filler_requirements, c.max_filler_requirements};
  j["requirement_words"] = {c.min_requirement_words, c.max_requirement_words};
  j["experiences"] = {c.min_experiences, c.max_experiences};
  j["experience_words"] = {c.min_experience_words, c.max_experience_words};
  j["max_distractors"] = c.max_distractors;
  j["noise_rate"] = c.noise_rate;
  j["male_probability"] = c.male_probability;
  j["seed"] = c.seed;
  return j;
}

inline nlohmann::ordered_json to_json(const SynthManifest& m) {
  nlohmann::ordered_json j;
  j["config"] = to_json(m.config);
  j["skill_tokens"] = m.skill_tokens;
  auto& posts = j["postings"] = nlohmann::ordered_json::array();
  for (const auto& p : m.postings) {
    posts.push_back({{"job_id", p.job_id},
                     {"skills", p.skills},
                     {"skill_requirement", p.skill_requirement},
                     {"skill_position", p.skill_position}});
  }
  auto& apps = j["applications"] = nlohmann::ordered_json::array();
  for (const auto& a : m.applications) {
    nlohmann::ordered_json planted = nlohmann::ordered_json::array();
    for (const auto& s : a.planted) {
      planted.push_back({{"experience", s.experience},
                         {"position", s.position},
                         {"token", s.token},
                         {"in_posting", s.in_posting}});
    }
    apps.push_back({{"job_id", a.job_id},
                    {"resume_id", a.resume_id},
                    {"covered", a.covered},
                    {"distractors", a.distractors},
                    {"planted", planted},
                    {"clean_label", a.clean_label},
                    {"label", a.label},
                    {"side", a.side}});
  }
  return j;
}

}  // namespace pjfit
