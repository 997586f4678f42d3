#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pjfit/application.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/graph.hpp"
#include "pjfit/metrics.hpp"
#include "pjfit/model.hpp"
#include "pjfit/rng.hpp"

namespace pjfit {

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy of probabilities y_hat [B] against labels.
/// Probabilities are clamped into [1e-7, 1 - 1e-7]; the gradient is zero
/// where clamping is active.
template <typename T>
Tensor<T> bce_loss(Graph<T>& g, const Tensor<T>& y_hat, std::span<const int> labels) {
  if (y_hat.size() != labels.size()) {
    throw DimensionError("bce_loss over " + std::to_string(y_hat.size()) + " predictions and " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw EmptyInputError("bce_loss over an empty batch");
  const double lo = kBceClamp, hi = 1.0 - kBceClamp;
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  double total = 0.0;
  std::vector<int> held(labels.begin(), labels.end());
  for (std::size_t i = 0; i < held.size(); ++i) {
    if (held[i] != 0 && held[i] != 1) throw ValidationError("bce_loss label is not binary");
    const double p = std::clamp(static_cast<double>(y_hat[i]), lo, hi);
    total -= held[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  const Tensor<T>* inputs[] = {&y_hat};
  return g.custom(Shape{1}, {static_cast<T>(total * inv_n)},
                  std::span<const Tensor<T>* const>(inputs, 1),
                  [y_hat, held = std::move(held), lo, hi, inv_n](const Tensor<T>& y) {
                    const double g_out = static_cast<double>(y.grad()[0]);
                    auto gy = y_hat.grad();
                    for (std::size_t i = 0; i < held.size(); ++i) {
                      const double p = static_cast<double>(y_hat[i]);
                      if (p < lo || p > hi) continue;
                      const double d = held[i] == 1 ? -1.0 / p : 1.0 / (1.0 - p);
                      gy[i] += static_cast<T>(g_out * d * inv_n);
                    }
                  });
}

template <typename T>
Tensor<T> bce_loss(Graph<T>& g, const Tensor<T>& y_hat, std::initializer_list<int> labels) {
  return bce_loss(g, y_hat, std::span<const int>(labels.begin(), labels.size()));
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  }
};

/// First/second moment buffers, one per parameter in visit order.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  std::uint64_t t = 0;
};

using NamedParams = std::vector<std::pair<std::string, Tensor<float>>>;

/// One bias-corrected Adam update over (name, tensor) pairs using the
/// gradients stored on the tensors.
template <typename T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state,
               const AdamConfig& cfg) {
  cfg.validate();
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw StateError("parameter " + name + " has no gradient");
  }
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.size(), T{0});
      state.v.emplace_back(p.size(), T{0});
    }
  }
  if (state.m.size() != params.size()) {
    throw StateError("Adam state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& [name, p] = params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size()) throw StateError("Adam state shape mismatch for " + name);
    auto w = p.data();
    auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const double m_hat = static_cast<double>(m[i]) / bc1;
      const double v_hat = static_cast<double>(v[i]) / bc2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) -
                            cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

struct TrainConfig {
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::size_t epochs = 20;
  double keep_prob = 0.8;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;  // epochs between validation passes
  std::size_t patience = 5;    // validation passes without AUC improvement
  std::size_t workers = 1;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("keep_prob must lie in (0, 1]");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    adam.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t epoch_steps = 0;
  std::size_t total_steps = 0;
  double train_loss = 0.0;  // mean of batch losses
  std::vector<double> step_losses;
  std::optional<MetricsReport> validation;
  bool improved = false;
};

inline nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["epoch_steps"] = r.epoch_steps;
  j["total_steps"] = r.total_steps;
  j["train_loss"] = r.train_loss;
  j["step_losses"] = r.step_losses;
  j["validation"] = r.validation ? to_json(*r.validation) : nlohmann::ordered_json(nullptr);
  j["improved"] = r.improved;
  return j;
}

inline void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  for (const auto& r : history) out << to_json(r).dump() << '\n';
}

struct TrainResult {
  ModelParams<float> best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_auc = -1.0;
  bool stopped_early = false;
};

/// Scores applications in evaluation mode without recording a graph.
template <typename T>
std::vector<double> score(const ModelParams<T>& params, const std::vector<PaddedApplication>& apps) {
  std::vector<double> out;
  out.reserve(apps.size());
  Rng unused(0);
  for (const auto& app : apps) {
    Graph<T> g(false);
    out.push_back(predict(g, params, app, ForwardOptions{Mode::kEval, false}, unused).probability());
  }
  return out;
}

inline std::vector<int> labels_of(const std::vector<PaddedApplication>& apps) {
  std::vector<int> out;
  out.reserve(apps.size());
  for (const auto& a : apps) out.push_back(a.label);
  return out;
}

template <typename T>
MetricsReport evaluate(const ModelParams<T>& params, const std::vector<PaddedApplication>& apps) {
  if (apps.empty()) throw ValidationError("evaluation set is empty");
  const auto scores = score(params, apps);
  const auto labels = labels_of(apps);
  return evaluate_scores(scores, labels);
}

namespace detail {

// Forward/backward over samples [begin, end) of one batch into the gradient
// buffers of params. Returns the summed per-sample loss contribution.
inline double accumulate_gradients(ModelParams<float>& params,
                                   const std::vector<PaddedApplication>& data,
                                   std::span<const std::size_t> batch, std::size_t begin,
                                   std::size_t end, std::uint64_t seed, std::size_t epoch) {
  double loss = 0.0;
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  for (std::size_t k = begin; k < end; ++k) {
    const auto& app = data[batch[k]];
    Rng rng(derive_seed(seed, {0x64726f70ULL, epoch, batch[k]}));
    Graph<float> g;
    auto out = predict(g, params, app, ForwardOptions{Mode::kTrain, false}, rng);
    auto l = bce_loss(g, out.y_hat, {app.label});
    loss += static_cast<double>(l[0]);
    g.backward(g.scale(l, inv_b));
  }
  return loss;
}

}  // namespace detail

using ProgressFn = std::function<void(const EpochRecord&)>;

/// Minibatch Adam training with per-epoch seeded shuffling. Validation AUC is
/// checked every eval_every epochs; the best parameters are kept and training
/// stops after `patience` checks without improvement.
inline TrainResult train(const ModelConfig& model_cfg, const std::vector<PaddedApplication>& train_set,
                         const std::vector<PaddedApplication>& val_set, const TrainConfig& cfg,
                         const ProgressFn& progress = {},
                         const EmbeddingTable<float>* pretrained = nullptr) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (val_set.empty()) throw ValidationError("validation set is empty");
  const auto val_labels = labels_of(val_set);
  if (std::count(val_labels.begin(), val_labels.end(), 1) == 0 ||
      std::count(val_labels.begin(), val_labels.end(), 0) == 0) {
    throw ValidationError("validation set needs both labels for AUC model selection");
  }
  ModelConfig mc = model_cfg;
  mc.keep_prob = cfg.keep_prob;
  Rng init_rng(derive_seed(cfg.seed, {0x696e6974ULL}));
  auto params = ModelParams<float>::create(mc, init_rng);
  if (pretrained) {
    if (pretrained->W_e.shape() != params.embedding.W_e.shape()) {
      throw ConfigError("pretrained embedding " + shape_str(pretrained->W_e.shape()) +
                        " does not match model " + shape_str(params.embedding.W_e.shape()));
    }
    std::copy(pretrained->W_e.data().begin(), pretrained->W_e.data().end(),
              params.embedding.W_e.data().begin());
  }
  auto named = params.named();

  const std::size_t workers = std::min(cfg.workers, cfg.batch_size);
  std::vector<ModelParams<float>> replicas;
  std::vector<NamedParams> replica_named;
  for (std::size_t w = 1; w < workers; ++w) {
    replicas.push_back(params.clone());
    replica_named.push_back(replicas.back().named());
  }

  AdamState<float> adam;
  TrainResult result;
  result.best = params.clone();
  std::size_t total_steps = 0, stale = 0;
  std::vector<std::size_t> order(train_set.size());
  Rng shuffle_rng(derive_seed(cfg.seed, {0x73687566ULL}));

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      params.zero_grad();
      double batch_loss = 0.0;
      if (workers <= 1 || batch.size() < 2) {
        batch_loss = detail::accumulate_gradients(params, train_set, batch, 0, batch.size(),
                                                  cfg.seed, epoch);
      } else {
        // Contiguous shards; shard 0 runs on the master copy. Reduction adds
        // replica gradients in worker order so results depend only on the
        // worker count.
        const std::size_t n = std::min(workers, batch.size());
        std::vector<double> losses(n, 0.0);
        std::vector<std::thread> threads;
        auto bounds = [&](std::size_t w) { return batch.size() * w / n; };
        for (std::size_t w = 1; w < n; ++w) {
          replicas[w - 1].zero_grad();
          threads.emplace_back([&, w] {
            losses[w] = detail::accumulate_gradients(replicas[w - 1], train_set, batch,
                                                     bounds(w), bounds(w + 1), cfg.seed, epoch);
          });
        }
        losses[0] = detail::accumulate_gradients(params, train_set, batch, 0, bounds(1),
                                                 cfg.seed, epoch);
        for (auto& t : threads) t.join();
        for (std::size_t w = 1; w < n; ++w) {
          for (std::size_t k = 0; k < named.size(); ++k) {
            auto dst = named[k].second.grad();
            auto src = replica_named[w - 1][k].second.grad();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
          }
        }
        for (double l : losses) batch_loss += l;
      }
      batch_loss /= static_cast<double>(batch.size());
      if (!std::isfinite(batch_loss)) {
        nlohmann::ordered_json snap;
        snap["epoch"] = epoch;
        snap["step"] = total_steps + 1;
        snap["batch_loss"] = std::to_string(batch_loss);
        snap["last_finite_loss"] =
            rec.step_losses.empty() ? nlohmann::ordered_json(nullptr)
                                    : nlohmann::ordered_json(rec.step_losses.back());
        auto& ids = snap["batch"] = nlohmann::ordered_json::array();
        for (auto i : batch) ids.push_back(train_set[i].job_id + "/" + train_set[i].resume_id);
        throw DivergenceError("non-finite training loss; snapshot: " + snap.dump());
      }
      adam_step(named, adam, cfg.adam);
      for (std::size_t w = 0; w < replicas.size(); ++w) {
        for (std::size_t k = 0; k < named.size(); ++k) {
          auto src = named[k].second.data();
          std::copy(src.begin(), src.end(), replica_named[w][k].second.data().begin());
        }
      }
      ++total_steps;
      rec.step_losses.push_back(batch_loss);
      loss_sum += batch_loss;
    }
    rec.epoch_steps = rec.step_losses.size();
    rec.total_steps = total_steps;
    rec.train_loss = loss_sum / static_cast<double>(rec.epoch_steps);
    bool stop = false;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      rec.validation = evaluate(params, val_set);
      const double auc = *rec.validation->auc;
      if (auc > result.best_val_auc) {
        result.best_val_auc = auc;
        result.best_epoch = epoch;
        result.best = params.clone();
        rec.improved = true;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        stop = epoch < cfg.epochs;
      }
    }
    result.history.push_back(rec);
    if (progress) progress(rec);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace pjfit
