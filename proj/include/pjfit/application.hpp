#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pjfit/graph.hpp"

namespace pjfit {

using TokenId = std::int32_t;
using Sentence = std::vector<TokenId>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;

// Side-feature categories used by the gender experiment.
inline constexpr int kFemale = 0;
inline constexpr int kMale = 1;

/// One labeled (posting, resume) pair as read from a corpus file: each
/// requirement/experience is a list of whitespace-separated tokens.
struct CorpusRecord {
  std::string job_id;
  std::string resume_id;
  std::vector<std::vector<std::string>> requirements;
  std::vector<std::vector<std::string>> experiences;
  int label = 0;
  std::optional<int> side;

  bool operator==(const CorpusRecord&) const = default;
};

/// A record after vocabulary lookup.
struct Application {
  std::string job_id;
  std::string resume_id;
  std::vector<Sentence> requirements;
  std::vector<Sentence> experiences;
  int label = 0;
  std::optional<int> side;

  bool operator==(const Application&) const = default;
};

/// Sections x words of token ids with a parallel mask; masked slots hold
/// kPadId. A section is real iff any of its words is unmasked.
struct PaddedDocument {
  std::vector<Sentence> ids;
  std::vector<Mask> masks;

  std::size_t sections() const { return ids.size(); }
  std::size_t width() const { return ids.empty() ? 0 : ids[0].size(); }

  Mask section_mask() const {
    Mask out(masks.size(), false);
    for (std::size_t s = 0; s < masks.size(); ++s)
      for (bool m : masks[s]) out[s] = out[s] || m;
    return out;
  }

  bool operator==(const PaddedDocument&) const = default;
};

struct PaddedApplication {
  std::string job_id;
  std::string resume_id;
  PaddedDocument job;
  PaddedDocument resume;
  int label = 0;
  std::optional<int> side;

  bool operator==(const PaddedApplication&) const = default;
};

/// Truncation limits. Defaults: 15 requirements of at most 30 words and 15
/// experiences of at most 300 words.
struct Caps {
  std::size_t max_requirements = 15;
  std::size_t max_experiences = 15;
  std::size_t max_requirement_words = 30;
  std::size_t max_experience_words = 300;
};

}  // namespace pjfit
