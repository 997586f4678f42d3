#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pjfit/errors.hpp"
#include "pjfit/graph.hpp"
#include "pjfit/init.hpp"
#include "pjfit/rng.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit {

enum class Mode { kTrain, kEval };

// Each parameter struct exposes visit(prefix, f) calling f(name, tensor&) in a
// fixed order; the order defines checkpoint layout and optimizer state order.

template <typename T>
struct LstmParams {
  Tensor<T> W_i, W_f, W_C, W_o;  // [hidden x (input + hidden)]
  Tensor<T> b_i, b_f, b_C, b_o;  // [hidden]

  static LstmParams create(std::size_t input, std::size_t hidden, Rng& rng) {
    const Shape w{hidden, input + hidden};
    const Shape b{hidden};
    return {glorot_init<T>(w, rng), glorot_init<T>(w, rng), glorot_init<T>(w, rng),
            glorot_init<T>(w, rng), glorot_init<T>(b, rng), glorot_init<T>(b, rng),
            glorot_init<T>(b, rng), glorot_init<T>(b, rng)};
  }

  std::size_t hidden() const { return b_i.size(); }
  std::size_t input() const { return W_i.shape()[1] - hidden(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".W_i", W_i);
    f(prefix + ".W_f", W_f);
    f(prefix + ".W_C", W_C);
    f(prefix + ".W_o", W_o);
    f(prefix + ".b_i", b_i);
    f(prefix + ".b_f", b_f);
    f(prefix + ".b_C", b_C);
    f(prefix + ".b_o", b_o);
  }
};

template <typename T>
struct BiLstmParams {
  LstmParams<T> fwd, bwd;

  static BiLstmParams create(std::size_t input, std::size_t hidden, Rng& rng) {
    auto f = LstmParams<T>::create(input, hidden, rng);
    auto b = LstmParams<T>::create(input, hidden, rng);
    return {std::move(f), std::move(b)};
  }

  std::size_t output_dim() const { return fwd.hidden() + bwd.hidden(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    fwd.visit(prefix + ".fwd", f);
    bwd.visit(prefix + ".bwd", f);
  }
};

/// Score e_t = v' tanh(W h_t + b).
template <typename T>
struct SelfAttentionParams {
  Tensor<T> v;  // [d_a]
  Tensor<T> W;  // [d_a x d_in]
  Tensor<T> b;  // [d_a]

  static SelfAttentionParams create(std::size_t d_in, std::size_t d_a, Rng& rng) {
    return {glorot_init<T>({d_a}, rng), glorot_init<T>({d_a, d_in}, rng),
            glorot_init<T>({d_a}, rng)};
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".v", v);
    f(prefix + ".W", W);
    f(prefix + ".b", b);
  }
};

/// Score e_t = v' tanh(W cond + U h_t).
template <typename T>
struct ConditionedAttentionParams {
  Tensor<T> v;  // [d_a]
  Tensor<T> W;  // [d_a x d_cond]
  Tensor<T> U;  // [d_a x d_in]

  static ConditionedAttentionParams create(std::size_t d_in, std::size_t d_cond,
                                           std::size_t d_a, Rng& rng) {
    return {glorot_init<T>({d_a}, rng), glorot_init<T>({d_a, d_cond}, rng),
            glorot_init<T>({d_a, d_in}, rng)};
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".v", v);
    f(prefix + ".W", W);
    f(prefix + ".U", U);
  }
};

template <typename T>
struct EmbeddingTable {
  Tensor<T> W_e;  // [vocab x d_0]

  std::size_t vocab_size() const { return W_e.shape()[0]; }
  std::size_t dim() const { return W_e.shape()[1]; }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".W_e", W_e);
  }
};

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

template <typename T>
struct AttentionResult {
  Tensor<T> context;
  Tensor<T> weights;
};

namespace detail {

template <typename T>
void check_gate(const Tensor<T>& W, const Tensor<T>& b, std::size_t in, std::size_t hidden,
                const char* gate) {
  if (W.rank() != 2 || W.shape()[0] != hidden || W.shape()[1] != in + hidden ||
      b.size() != hidden) {
    throw DimensionError(std::string("lstm gate ") + gate + ": W" + shape_str(W.shape()) +
                         " b" + shape_str(b.shape()) + " for input " + std::to_string(in) +
                         " and hidden " + std::to_string(hidden));
  }
}

}  // namespace detail

/// One LSTM cell update:
///   i = sig(W_i[x;h] + b_i), f = sig(W_f[x;h] + b_f), o = sig(W_o[x;h] + b_o)
///   C~ = tanh(W_C[x;h] + b_C), C = f*C_prev + i*C~, h = o*tanh(C)
template <typename T>
LstmState<T> lstm_step(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& h_prev,
                       const Tensor<T>& c_prev, const LstmParams<T>& p) {
  const std::size_t hidden = p.b_i.size();
  const std::size_t in = x.size();
  if (h_prev.size() != hidden || c_prev.size() != hidden) {
    throw DimensionError("lstm state of " + shape_str(h_prev.shape()) + "/" +
                         shape_str(c_prev.shape()) + " for hidden " + std::to_string(hidden));
  }
  detail::check_gate(p.W_i, p.b_i, in, hidden, "input");
  detail::check_gate(p.W_f, p.b_f, in, hidden, "forget");
  detail::check_gate(p.W_C, p.b_C, in, hidden, "candidate");
  detail::check_gate(p.W_o, p.b_o, in, hidden, "output");

  auto xh = g.concat({x, h_prev});
  auto i = g.sigmoid(g.affine(p.W_i, xh, p.b_i));
  auto f = g.sigmoid(g.affine(p.W_f, xh, p.b_f));
  auto cand = g.tanh(g.affine(p.W_C, xh, p.b_C));
  auto o = g.sigmoid(g.affine(p.W_o, xh, p.b_o));
  auto c = g.add(g.mul(f, c_prev), g.mul(i, cand));
  auto h = g.mul(o, g.tanh(c));
  return {std::move(h), std::move(c)};
}

/// Runs one LSTM direction over xs and returns the hidden state per step,
/// aligned with the input order.
template <typename T>
std::vector<Tensor<T>> lstm_run(Graph<T>& g, const std::vector<Tensor<T>>& xs,
                                const LstmParams<T>& p, bool reverse) {
  const std::size_t hidden = p.b_i.size();
  Tensor<T> h = Tensor<T>::zeros({hidden});
  Tensor<T> c = Tensor<T>::zeros({hidden});
  std::vector<Tensor<T>> out(xs.size());
  for (std::size_t step = 0; step < xs.size(); ++step) {
    const std::size_t t = reverse ? xs.size() - 1 - step : step;
    auto next = lstm_step(g, xs[t], h, c, p);
    h = next.h;
    c = next.c;
    out[t] = h;
  }
  return out;
}

namespace detail {

// Saved activations of one LSTM direction over a whole sequence.
template <typename T>
struct LstmTrace {
  std::vector<T> z;      // [T x (in + h)] step inputs [x_t ; h_prev]
  std::vector<T> gates;  // [T x 4h] i, f, o, candidate
  std::vector<T> c;      // [T x h]
  std::vector<T> tanh_c; // [T x h]
};

template <typename T>
void lstm_forward_pass(const std::vector<T>& X, std::size_t steps, std::size_t in,
                       const LstmParams<T>& p, bool reverse, std::vector<T>& out,
                       std::size_t out_stride, std::size_t out_offset, LstmTrace<T>& tr) {
  const std::size_t h = p.hidden(), zw = in + h;
  const T* W[4] = {p.W_i.data().data(), p.W_f.data().data(), p.W_o.data().data(),
                   p.W_C.data().data()};
  const T* B[4] = {p.b_i.data().data(), p.b_f.data().data(), p.b_o.data().data(),
                   p.b_C.data().data()};
  tr.z.assign(steps * zw, T{0});
  tr.gates.assign(steps * 4 * h, T{0});
  tr.c.assign(steps * h, T{0});
  tr.tanh_c.assign(steps * h, T{0});
  std::vector<T> h_prev(h, T{0}), c_prev(h, T{0});
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    T* z = &tr.z[s * zw];
    std::copy_n(&X[t * in], in, z);
    std::copy(h_prev.begin(), h_prev.end(), z + in);
    T* gate = &tr.gates[s * 4 * h];
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t r = 0; r < h; ++r) {
        const T* w = W[k] + r * zw;
        T acc = B[k][r];
        for (std::size_t j = 0; j < zw; ++j) acc += w[j] * z[j];
        gate[k * h + r] = k == 3 ? std::tanh(acc) : Graph<T>::sigmoid_scalar(acc);
      }
    }
    for (std::size_t r = 0; r < h; ++r) {
      const T c = gate[h + r] * c_prev[r] + gate[r] * gate[3 * h + r];
      const T tc = std::tanh(c);
      tr.c[s * h + r] = c;
      tr.tanh_c[s * h + r] = tc;
      c_prev[r] = c;
      h_prev[r] = gate[2 * h + r] * tc;
      out[t * out_stride + out_offset + r] = h_prev[r];
    }
  }
}

// Backpropagation through time for one direction. dY holds the output
// gradient with the same stride/offset layout used by the forward pass.
template <typename T>
void lstm_backward_pass(std::span<const T> dY, std::size_t steps, std::size_t in,
                        const LstmParams<T>& p, bool reverse, std::size_t out_stride,
                        std::size_t out_offset, const LstmTrace<T>& tr, std::span<T> dX) {
  const std::size_t h = p.hidden(), zw = in + h;
  const Tensor<T>* Ws[4] = {&p.W_i, &p.W_f, &p.W_o, &p.W_C};
  const Tensor<T>* Bs[4] = {&p.b_i, &p.b_f, &p.b_o, &p.b_C};
  std::vector<T> dh_next(h, T{0}), dc_next(h, T{0}), da(4 * h), dz(zw);
  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const T* gate = &tr.gates[s * 4 * h];
    const T* z = &tr.z[s * zw];
    for (std::size_t r = 0; r < h; ++r) {
      const T i = gate[r], f = gate[h + r], o = gate[2 * h + r], cand = gate[3 * h + r];
      const T tc = tr.tanh_c[s * h + r];
      const T c_prev = s > 0 ? tr.c[(s - 1) * h + r] : T{0};
      const T dh = dY[t * out_stride + out_offset + r] + dh_next[r];
      const T dc = dh * o * (T{1} - tc * tc) + dc_next[r];
      da[r] = dc * cand * i * (T{1} - i);
      da[h + r] = dc * c_prev * f * (T{1} - f);
      da[2 * h + r] = dh * tc * o * (T{1} - o);
      da[3 * h + r] = dc * i * (T{1} - cand * cand);
      dc_next[r] = dc * f;
    }
    std::fill(dz.begin(), dz.end(), T{0});
    for (std::size_t k = 0; k < 4; ++k) {
      const T* w = Ws[k]->data().data();
      const bool learn = Ws[k]->requires_grad();
      T* gw = learn ? Ws[k]->grad().data() : nullptr;
      for (std::size_t r = 0; r < h; ++r) {
        const T d = da[k * h + r];
        if (d == T{0}) continue;
        const T* wr = w + r * zw;
        for (std::size_t j = 0; j < zw; ++j) dz[j] += wr[j] * d;
        if (learn) {
          T* gr = gw + r * zw;
          for (std::size_t j = 0; j < zw; ++j) gr[j] += d * z[j];
        }
      }
      if (Bs[k]->requires_grad()) {
        auto gb = Bs[k]->grad();
        for (std::size_t r = 0; r < h; ++r) gb[r] += da[k * h + r];
      }
    }
    if (!dX.empty())
      for (std::size_t j = 0; j < in; ++j) dX[t * in + j] += dz[j];
    std::copy(dz.begin() + static_cast<std::ptrdiff_t>(in), dz.end(), dh_next.begin());
  }
}

}  // namespace detail

/// BiLSTM over the rows of X [steps x in] as a single graph node. Row t of the
/// result is [forward state at t ; backward state at t], zero initial states.
/// Numerically the same recurrence as chaining lstm_step.
template <typename T>
Tensor<T> bilstm_sequence(Graph<T>& g, const Tensor<T>& X, const BiLstmParams<T>& p) {
  if (X.rank() != 2) throw RankError("bilstm_sequence needs a matrix, got " + shape_str(X.shape()));
  const std::size_t steps = X.shape()[0], in = X.shape()[1];
  for (const auto* dir : {&p.fwd, &p.bwd}) {
    detail::check_gate(dir->W_i, dir->b_i, in, dir->hidden(), "input");
    detail::check_gate(dir->W_f, dir->b_f, in, dir->hidden(), "forget");
    detail::check_gate(dir->W_C, dir->b_C, in, dir->hidden(), "candidate");
    detail::check_gate(dir->W_o, dir->b_o, in, dir->hidden(), "output");
  }
  const std::size_t hf = p.fwd.hidden(), hb = p.bwd.hidden(), width = hf + hb;
  std::vector<T> out(steps * width);
  auto fwd = std::make_shared<detail::LstmTrace<T>>();
  auto bwd = std::make_shared<detail::LstmTrace<T>>();
  const std::vector<T> xs(X.data().begin(), X.data().end());
  detail::lstm_forward_pass(xs, steps, in, p.fwd, false, out, width, 0, *fwd);
  detail::lstm_forward_pass(xs, steps, in, p.bwd, true, out, width, hf, *bwd);
  std::vector<const Tensor<T>*> inputs{&X};
  for (const auto* dir : {&p.fwd, &p.bwd}) {
    for (const auto* t : {&dir->W_i, &dir->W_f, &dir->W_C, &dir->W_o, &dir->b_i, &dir->b_f,
                          &dir->b_C, &dir->b_o})
      inputs.push_back(t);
  }
  return g.custom(Shape{steps, width}, std::move(out),
                  std::span<const Tensor<T>* const>(inputs.data(), inputs.size()),
                  [X, p, fwd, bwd, steps, in, width, hf](const Tensor<T>& y) {
                    std::span<T> dX = X.requires_grad() ? X.grad() : std::span<T>{};
                    std::span<const T> dY = y.grad();
                    detail::lstm_backward_pass(dY, steps, in, p.fwd, false, width, 0, *fwd, dX);
                    detail::lstm_backward_pass(dY, steps, in, p.bwd, true, width, hf, *bwd, dX);
                  });
}

/// output[t] = [forward state at t ; backward state at t], zero initial states.
template <typename T>
std::vector<Tensor<T>> bilstm_encode(Graph<T>& g, const std::vector<Tensor<T>>& xs,
                                     const LstmParams<T>& fwd, const LstmParams<T>& bwd) {
  if (xs.empty()) throw EmptyInputError("bilstm_encode over an empty sequence");
  auto H = bilstm_sequence(g, g.stack(xs), BiLstmParams<T>{fwd, bwd});
  std::vector<Tensor<T>> out;
  out.reserve(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) out.push_back(g.row(H, t));
  return out;
}

template <typename T>
std::vector<Tensor<T>> bilstm_encode(Graph<T>& g, const std::vector<Tensor<T>>& xs,
                                     const BiLstmParams<T>& p) {
  return bilstm_encode(g, xs, p.fwd, p.bwd);
}

/// Runs the BiLSTM only over positions where mask is true (in order) and
/// places zero vectors at masked positions, so padded slots never feed the
/// recurrence.
template <typename T>
std::vector<Tensor<T>> bilstm_encode_masked(Graph<T>& g, const std::vector<Tensor<T>>& xs,
                                            const Mask& mask, const BiLstmParams<T>& p) {
  if (mask.size() != xs.size()) {
    throw DimensionError("bilstm mask of " + std::to_string(mask.size()) + " for " +
                         std::to_string(xs.size()) + " inputs");
  }
  std::vector<Tensor<T>> real;
  for (std::size_t t = 0; t < xs.size(); ++t)
    if (mask[t]) real.push_back(xs[t]);
  auto encoded = bilstm_encode(g, real, p);
  std::vector<Tensor<T>> out(xs.size());
  std::size_t next = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    out[t] = mask[t] ? encoded[next++] : Tensor<T>::zeros({p.output_dim()});
  }
  return out;
}

namespace detail {

template <typename T>
Tensor<T> attention_scores(Graph<T>& g, const Tensor<T>& pre, const Tensor<T>& v) {
  if (pre.shape()[1] != v.size()) {
    throw DimensionError("attention context vector " + shape_str(v.shape()) +
                         " vs projection " + shape_str(pre.shape()));
  }
  return g.matmul(g.tanh(pre), v);
}

}  // namespace detail

/// weights = softmax_masked(v' tanh(W h_t + b)), context = sum_t weights[t] h_t.
template <typename T>
AttentionResult<T> self_attention(Graph<T>& g, const Tensor<T>& H, const Mask& mask,
                                  const SelfAttentionParams<T>& p) {
  auto pre = g.add_rowwise(g.matmul(H, g.transpose(p.W)), p.b);
  auto weights = g.softmax_masked(detail::attention_scores(g, pre, p.v), mask);
  return {g.weighted_sum(weights, H), weights};
}

template <typename T>
AttentionResult<T> self_attention(Graph<T>& g, const std::vector<Tensor<T>>& hs,
                                  const Mask& mask, const SelfAttentionParams<T>& p) {
  return self_attention(g, g.stack(hs), mask, p);
}

/// Conditioned attention with the input projection U H already computed,
/// for callers that attend over the same sequence with many conditions.
template <typename T>
AttentionResult<T> conditioned_attention_projected(Graph<T>& g, const Tensor<T>& H,
                                                   const Tensor<T>& UH,
                                                   const Tensor<T>& cond_projection,
                                                   const Mask& mask,
                                                   const ConditionedAttentionParams<T>& p) {
  auto pre = g.add_rowwise(UH, cond_projection);
  auto weights = g.softmax_masked(detail::attention_scores(g, pre, p.v), mask);
  return {g.weighted_sum(weights, H), weights};
}

/// weights = softmax_masked(v' tanh(W cond + U h_t)), context = sum_t weights[t] h_t.
template <typename T>
AttentionResult<T> conditioned_attention(Graph<T>& g, const Tensor<T>& H, const Tensor<T>& cond,
                                         const Mask& mask,
                                         const ConditionedAttentionParams<T>& p) {
  auto UH = g.matmul(H, g.transpose(p.U));
  return conditioned_attention_projected(g, H, UH, g.matmul(p.W, cond), mask, p);
}

template <typename T>
AttentionResult<T> conditioned_attention(Graph<T>& g, const std::vector<Tensor<T>>& hs,
                                         const Tensor<T>& cond, const Mask& mask,
                                         const ConditionedAttentionParams<T>& p) {
  return conditioned_attention(g, g.stack(hs), cond, mask, p);
}

template <typename T>
Tensor<T> mean_pool(Graph<T>& g, const std::vector<Tensor<T>>& vs) {
  if (vs.empty()) throw EmptyInputError("mean_pool over an empty set");
  return g.mean(std::span<const Tensor<T>>(vs));
}

/// Mean over the unmasked entries only; padding does not dilute the result.
template <typename T>
Tensor<T> mean_pool(Graph<T>& g, const std::vector<Tensor<T>>& vs, const Mask& mask) {
  if (mask.size() != vs.size()) {
    throw DimensionError("mean_pool mask of " + std::to_string(mask.size()) + " for " +
                         std::to_string(vs.size()) + " vectors");
  }
  std::vector<Tensor<T>> real;
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (mask[i]) real.push_back(vs[i]);
  return mean_pool(g, real);
}

/// Inverted dropout: in training each entry survives with keep_prob and is
/// scaled by 1/keep_prob; evaluation is the identity.
template <typename T>
Tensor<T> dropout(Graph<T>& g, const Tensor<T>& x, double keep_prob, Mode mode, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw ConfigError("keep_prob must lie in (0, 1], got " + std::to_string(keep_prob));
  }
  if (mode == Mode::kEval || keep_prob == 1.0) return x;
  std::vector<T> factors(x.size());
  const T scale = static_cast<T>(1.0 / keep_prob);
  for (auto& f : factors) f = uniform01(rng) < keep_prob ? scale : T{0};
  return g.mul_const(x, std::move(factors));
}

}  // namespace pjfit
