#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pjfit/errors.hpp"

namespace pjfit {

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  double threshold = 0.5;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // Set when the metric's denominator was zero and it was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;

  std::size_t total() const { return tp + fp + tn + fn; }
};

namespace detail {

inline void check_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores/labels length mismatch: " + std::to_string(scores.size()) +
                          " vs " + std::to_string(labels.size()));
  }
  if (scores.empty()) throw ValidationError("metrics over an empty set");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ValidationError("label at index " + std::to_string(i) + " is not binary");
    }
  }
}

}  // namespace detail

/// Predicts 1 iff score >= threshold.
inline MetricsReport threshold_metrics(std::span<const double> scores,
                                       std::span<const int> labels, double threshold = 0.5) {
  detail::check_scored(scores, labels);
  MetricsReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++r.tp;
    else if (pred) ++r.fp;
    else if (labels[i] == 1) ++r.fn;
    else ++r.tn;
  }
  const auto d = [](std::size_t n) { return static_cast<double>(n); };
  r.accuracy = d(r.tp + r.tn) / d(r.total());
  r.precision_undefined = r.tp + r.fp == 0;
  r.recall_undefined = r.tp + r.fn == 0;
  r.precision = r.precision_undefined ? 0.0 : d(r.tp) / d(r.tp + r.fp);
  r.recall = r.recall_undefined ? 0.0 : d(r.tp) / d(r.tp + r.fn);
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

/// Mann-Whitney AUC: P(score of random positive > score of random negative),
/// ties credited 0.5. Computed from tie-averaged ranks, so it equals the
/// pairwise count exactly up to floating-point division.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scored(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of positives keeps every quantity an integer.
  std::size_t twice_rank_sum = 0, pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j averaged: (i + 1 + j) / 2.
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        twice_rank_sum += i + 1 + j;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError("AUC needs at least one positive and one negative label");
  }
  // U = rank_sum - pos (pos + 1) / 2, so 2U = twice_rank_sum - pos (pos + 1).
  const std::size_t twice_u = twice_rank_sum - pos * (pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) *
                                         static_cast<double>(neg));
}

/// Threshold metrics plus AUC; AUC stays empty when only one class is present.
inline MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                                     double threshold = 0.5) {
  auto r = threshold_metrics(scores, labels, threshold);
  if (r.tp + r.fn > 0 && r.tn + r.fp > 0) r.auc = roc_auc(scores, labels);
  return r;
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["threshold"] = r.threshold;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["tn"] = r.tn;
  j["fn"] = r.fn;
  j["precision_undefined"] = r.precision_undefined;
  j["recall_undefined"] = r.recall_undefined;
  return j;
}

inline std::string format_table(const MetricsReport& r) {
  std::ostringstream out;
  char buf[64];
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-10s %10s\n", name, value.c_str());
    out << buf;
  };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", v);
    return std::string(b);
  };
  row("accuracy", num(r.accuracy));
  row("precision", num(r.precision) + (r.precision_undefined ? "*" : ""));
  row("recall", num(r.recall) + (r.recall_undefined ? "*" : ""));
  row("f1", num(r.f1));
  row("auc", r.auc ? num(*r.auc) : "n/a");
  row("threshold", num(r.threshold));
  row("tp/fp", std::to_string(r.tp) + "/" + std::to_string(r.fp));
  row("tn/fn", std::to_string(r.tn) + "/" + std::to_string(r.fn));
  if (r.precision_undefined || r.recall_undefined) out << "* zero denominator, reported as 0\n";
  return out.str();
}

}  // namespace pjfit
