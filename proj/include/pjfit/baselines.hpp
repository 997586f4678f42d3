#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "pjfit/application.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/layers.hpp"
#include "pjfit/metrics.hpp"
#include "pjfit/rng.hpp"
#include "pjfit/training.hpp"

namespace pjfit {

/// Features [mean(J); mean(R); mean(J) * mean(R)] where mean() averages the
/// embeddings of all real words of a document. The elementwise product lets a
/// linear model see word overlap between the two sides.
inline std::vector<double> mean_embedding_features(const EmbeddingTable<float>& table,
                                                   const PaddedApplication& app) {
  const std::size_t d = table.W_e.shape()[1];
  auto mean = [&](const PaddedDocument& doc) {
    std::vector<double> out(d, 0.0);
    std::size_t n = 0;
    for (std::size_t s = 0; s < doc.ids.size(); ++s)
      for (std::size_t t = 0; t < doc.ids[s].size(); ++t) {
        if (!doc.masks[s][t]) continue;
        const auto row = static_cast<std::size_t>(doc.ids[s][t]);
        if (row >= table.W_e.shape()[0]) throw DimensionError("token id outside embedding table");
        for (std::size_t j = 0; j < d; ++j) out[j] += table.W_e[row * d + j];
        ++n;
      }
    if (n == 0) throw ValidationError("document has no words");
    for (auto& v : out) v /= static_cast<double>(n);
    return out;
  };
  const auto J = mean(app.job), R = mean(app.resume);
  std::vector<double> f(J);
  f.insert(f.end(), R.begin(), R.end());
  for (std::size_t j = 0; j < d; ++j) f.push_back(J[j] * R[j]);
  return f;
}

struct LogisticModel {
  std::vector<double> w;
  double b = 0.0;

  double predict(std::span<const double> x) const {
    const double z = std::inner_product(w.begin(), w.end(), x.begin(), b);
    return Graph<double>::sigmoid_scalar(z);
  }
};

struct LogisticResult {
  LogisticModel best;
  double best_val_auc = -1.0;
  std::size_t best_epoch = 0;
};

/// Minibatch Adam on BCE with per-feature standardization folded into the
/// returned weights. Model selection by validation AUC.
inline LogisticResult train_logistic(const std::vector<std::vector<double>>& X,
                                     const std::vector<int>& y,
                                     const std::vector<std::vector<double>>& X_val,
                                     const std::vector<int>& y_val, const TrainConfig& cfg) {
  cfg.validate();
  if (X.empty() || X.size() != y.size()) throw ValidationError("logistic training data is empty or ragged");
  const std::size_t d = X[0].size();
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const auto& x : X)
    for (std::size_t j = 0; j < d; ++j) mu[j] += x[j];
  for (auto& m : mu) m /= static_cast<double>(X.size());
  for (const auto& x : X)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (x[j] - mu[j]) * (x[j] - mu[j]);
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(X.size())) + 1e-12;
  auto standardize = [&](const std::vector<double>& x) {
    std::vector<double> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = (x[j] - mu[j]) / sd[j];
    return z;
  };
  std::vector<std::vector<double>> Z;
  for (const auto& x : X) Z.push_back(standardize(x));

  Tensor<double> w = Tensor<double>::zeros({d}, true), b = Tensor<double>::zeros({1}, true);
  std::vector<std::pair<std::string, Tensor<double>>> params{{"w", w}, {"b", b}};
  AdamState<double> adam;
  auto unfold = [&]() {
    LogisticModel m;
    m.w.resize(d);
    m.b = b[0];
    for (std::size_t j = 0; j < d; ++j) {
      m.w[j] = w[j] / sd[j];
      m.b -= w[j] * mu[j] / sd[j];
    }
    return m;
  };
  LogisticResult result;
  std::vector<std::size_t> order(Z.size());
  Rng rng(derive_seed(cfg.seed, {0x6c6f6769ULL}));
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      w.zero_grad();
      b.zero_grad();
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& z = Z[order[k]];
        double logit = b[0];
        for (std::size_t j = 0; j < d; ++j) logit += w[j] * z[j];
        const double err = (Graph<double>::sigmoid_scalar(logit) - y[order[k]]) * inv;
        for (std::size_t j = 0; j < d; ++j) w.grad()[j] += err * z[j];
        b.grad()[0] += err;
      }
      adam_step(params, adam, cfg.adam);
    }
    const auto model = unfold();
    std::vector<double> scores;
    for (const auto& x : X_val) scores.push_back(model.predict(x));
    const double auc = roc_auc(scores, y_val);
    if (auc > result.best_val_auc) {
      result.best_val_auc = auc;
      result.best = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace pjfit
