#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pjfit/errors.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit {

using Mask = std::vector<bool>;

/// Reverse-mode tape. Every op appends its backward rule; backward() replays
/// the tape in reverse construction order, so each node's output gradient is
/// complete before its rule runs. Gradients accumulate with += into operands,
/// which is what makes shared parameters (the embedding table) sum their
/// contributions.
///
/// A Graph belongs to one thread. Build one per forward pass; after
/// backward() it must be reset() before it can be reused.
template <typename T>
class Graph {
 public:
  using TensorT = Tensor<T>;

  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return tape_.size(); }

  void reset() {
    tape_.clear();
    backward_done_ = false;
  }

  // ---- linear algebra -----------------------------------------------------

  /// [m x k] . [k x n] -> [m x n]; a rank-1 right operand is a column vector
  /// and yields a rank-1 result.
  TensorT matmul(const TensorT& a, const TensorT& b) {
    if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2)) {
      throw DimensionError("matmul expects a matrix left operand, got " +
                           shape_str(a.shape()) + " . " + shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t n = b.rank() == 2 ? b.shape()[1] : 1;
    if (b.shape()[0] != k) {
      throw DimensionError("matmul inner dimensions disagree: " +
                           shape_str(a.shape()) + " . " + shape_str(b.shape()));
    }
    std::vector<T> out(m * n, T{0});
    const T* A = a.data().data();
    const T* B = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
      T* row = out.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = A[i * k + p];
        const T* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
      }
    }
    Shape shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
    auto y = output(std::move(shape), std::move(out), {&a, &b});
    if (y.requires_grad()) {
      tape_.emplace_back([a, b, y, m, k, n]() mutable {
        const T* G = y.grad().data();
        if (a.requires_grad()) {
          T* gA = a.grad().data();
          const T* B = b.data().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              T acc{0};
              for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
              gA[i * k + p] += acc;
            }
        }
        if (b.requires_grad()) {
          T* gB = b.grad().data();
          const T* A = a.data().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const T aip = A[i * k + p];
              for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * G[i * n + j];
            }
        }
      });
    }
    return y;
  }

  /// W x + b for W [m x k], x [k], b [m].
  TensorT affine(const TensorT& W, const TensorT& x, const TensorT& b) {
    if (W.rank() != 2 || x.rank() != 1 || b.rank() != 1 ||
        W.shape()[1] != x.size() || W.shape()[0] != b.size()) {
      throw DimensionError("affine shape mismatch: W" + shape_str(W.shape()) +
                           " x" + shape_str(x.shape()) + " b" +
                           shape_str(b.shape()));
    }
    const std::size_t m = W.shape()[0], k = W.shape()[1];
    std::vector<T> out(b.values());
    const T* Wp = W.data().data();
    const T* xp = x.data().data();
    for (std::size_t i = 0; i < m; ++i) {
      T acc{0};
      const T* wr = Wp + i * k;
      for (std::size_t p = 0; p < k; ++p) acc += wr[p] * xp[p];
      out[i] += acc;
    }
    auto y = output(Shape{m}, std::move(out), {&W, &x, &b});
    if (y.requires_grad()) {
      tape_.emplace_back([W, x, b, y, m, k]() mutable {
        const T* g = y.grad().data();
        if (W.requires_grad()) {
          T* gW = W.grad().data();
          const T* xp = x.data().data();
          for (std::size_t i = 0; i < m; ++i) {
            const T gi = g[i];
            T* gr = gW + i * k;
            for (std::size_t p = 0; p < k; ++p) gr[p] += gi * xp[p];
          }
        }
        if (x.requires_grad()) {
          T* gx = x.grad().data();
          const T* Wp = W.data().data();
          for (std::size_t i = 0; i < m; ++i) {
            const T gi = g[i];
            const T* wr = Wp + i * k;
            for (std::size_t p = 0; p < k; ++p) gx[p] += gi * wr[p];
          }
        }
        if (b.requires_grad()) {
          T* gb = b.grad().data();
          for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
        }
      });
    }
    return y;
  }

  TensorT transpose(const TensorT& a) {
    if (a.rank() != 2) {
      throw DimensionError("transpose expects a matrix, got " + shape_str(a.shape()));
    }
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<T> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
    auto y = output(Shape{c, r}, std::move(out), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y, r, c]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
      });
    }
    return y;
  }

  // ---- elementwise --------------------------------------------------------

  TensorT add(const TensorT& a, const TensorT& b) { return binary(a, b, Op::kAdd); }
  TensorT sub(const TensorT& a, const TensorT& b) { return binary(a, b, Op::kSub); }
  TensorT mul(const TensorT& a, const TensorT& b) { return binary(a, b, Op::kMul); }

  TensorT tanh(const TensorT& a) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a[i]);
    auto y = output(a.shape(), std::move(out), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T{1} - y[i] * y[i]);
      });
    }
    return y;
  }

  TensorT sigmoid(const TensorT& a) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(a[i]);
    auto y = output(a.shape(), std::move(out), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T{1} - y[i]);
      });
    }
    return y;
  }

  TensorT scale(const TensorT& a, T factor) {
    std::vector<T> out(a.values());
    for (auto& v : out) v *= factor;
    auto y = output(a.shape(), std::move(out), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y, factor]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
      });
    }
    return y;
  }

  /// Elementwise product with a constant (non-differentiable) factor buffer.
  TensorT mul_const(const TensorT& a, std::vector<T> factors) {
    if (factors.size() != a.size()) {
      throw DimensionError("mul_const factor count " + std::to_string(factors.size()) +
                           " vs tensor " + shape_str(a.shape()));
    }
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factors[i];
    auto y = output(a.shape(), std::move(out), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y, f = std::move(factors)]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * f[i];
      });
    }
    return y;
  }

  /// M [n x d] + v [d] broadcast over rows.
  TensorT add_rowwise(const TensorT& M, const TensorT& v) {
    if (M.rank() != 2 || v.rank() != 1 || M.shape()[1] != v.size()) {
      throw DimensionError("add_rowwise shape mismatch: " + shape_str(M.shape()) +
                           " + " + shape_str(v.shape()));
    }
    const std::size_t n = M.shape()[0], d = M.shape()[1];
    std::vector<T> out(M.values());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += v[j];
    auto y = output(M.shape(), std::move(out), {&M, &v});
    if (y.requires_grad()) {
      tape_.emplace_back([M, v, y, n, d]() mutable {
        auto g = y.grad();
        if (M.requires_grad()) {
          auto gM = M.grad();
          for (std::size_t i = 0; i < g.size(); ++i) gM[i] += g[i];
        }
        if (v.requires_grad()) {
          auto gv = v.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gv[j] += g[i * d + j];
        }
      });
    }
    return y;
  }

  // ---- reductions and structure ------------------------------------------

  TensorT sum(const TensorT& a) {
    T total{0};
    for (auto v : a.data()) total += v;
    auto y = output(Shape{1}, {total}, {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y]() mutable {
        const T g = y.grad()[0];
        for (auto& ga : a.grad()) ga += g;
      });
    }
    return y;
  }

  TensorT dot(const TensorT& a, const TensorT& b) {
    if (a.rank() != 1 || a.shape() != b.shape()) {
      throw DimensionError("dot expects equal vectors, got " + shape_str(a.shape()) +
                           " and " + shape_str(b.shape()));
    }
    T total{0};
    for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
    auto y = output(Shape{1}, {total}, {&a, &b});
    if (y.requires_grad()) {
      tape_.emplace_back([a, b, y]() mutable {
        const T g = y.grad()[0];
        if (a.requires_grad()) {
          auto ga = a.grad();
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * b[i];
        }
        if (b.requires_grad()) {
          auto gb = b.grad();
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * a[i];
        }
      });
    }
    return y;
  }

  /// Concatenation of vectors, or of matrices along rows.
  TensorT concat(std::span<const TensorT> parts) {
    if (parts.empty()) throw EmptyInputError("concat of an empty list");
    const std::size_t rank = parts[0].rank();
    const std::size_t width = rank == 2 ? parts[0].shape()[1] : 1;
    std::size_t lead = 0;
    for (const auto& p : parts) {
      if (p.rank() != rank || (rank == 2 && p.shape()[1] != width) || rank > 2) {
        throw DimensionError("concat shape mismatch: " + shape_str(parts[0].shape()) +
                             " with " + shape_str(p.shape()));
      }
      lead += p.shape()[0];
    }
    std::vector<T> out;
    out.reserve(lead * width);
    std::vector<const TensorT*> refs;
    for (const auto& p : parts) {
      out.insert(out.end(), p.data().begin(), p.data().end());
      refs.push_back(&p);
    }
    Shape shape = rank == 2 ? Shape{lead, width} : Shape{lead};
    auto y = output(std::move(shape), std::move(out), refs);
    if (y.requires_grad()) {
      std::vector<TensorT> held(parts.begin(), parts.end());
      tape_.emplace_back([held = std::move(held), y]() mutable {
        auto g = y.grad();
        std::size_t offset = 0;
        for (auto& p : held) {
          if (p.requires_grad()) {
            auto gp = p.grad();
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
          }
          offset += p.size();
        }
      });
    }
    return y;
  }

  TensorT concat(std::initializer_list<TensorT> parts) {
    return concat(std::span<const TensorT>(parts.begin(), parts.size()));
  }

  /// Equal-length vectors -> matrix with one row each.
  TensorT stack(std::span<const TensorT> rows) {
    if (rows.empty()) throw EmptyInputError("stack of an empty list");
    const std::size_t d = rows[0].size();
    for (const auto& r : rows) {
      if (r.rank() != 1 || r.size() != d) {
        throw DimensionError("stack needs equal vectors: " + shape_str(rows[0].shape()) +
                             " with " + shape_str(r.shape()));
      }
    }
    auto flat = concat(rows);
    return reshape(flat, Shape{rows.size(), d});
  }

  TensorT reshape(const TensorT& a, Shape shape) {
    if (numel(shape) != a.size()) {
      throw DimensionError("cannot reshape " + shape_str(a.shape()) + " to " +
                           shape_str(shape));
    }
    auto y = output(std::move(shape), a.values(), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      });
    }
    return y;
  }

  TensorT row(const TensorT& M, std::size_t i) {
    if (M.rank() != 2 || i >= M.shape()[0]) {
      throw DimensionError("row " + std::to_string(i) + " out of range for " +
                           shape_str(M.shape()));
    }
    const std::size_t d = M.shape()[1];
    std::vector<T> out(M.data().begin() + i * d, M.data().begin() + (i + 1) * d);
    auto y = output(Shape{d}, std::move(out), {&M});
    if (y.requires_grad()) {
      tape_.emplace_back([M, y, i, d]() mutable {
        auto g = y.grad();
        auto gM = M.grad();
        for (std::size_t j = 0; j < d; ++j) gM[i * d + j] += g[j];
      });
    }
    return y;
  }

  /// Contiguous slice [begin, end) of a vector.
  TensorT slice(const TensorT& a, std::size_t begin, std::size_t end) {
    if (a.rank() != 1 || begin >= end || end > a.size()) {
      throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                           ") out of range for " + shape_str(a.shape()));
    }
    std::vector<T> out(a.data().begin() + begin, a.data().begin() + end);
    auto y = output(Shape{end - begin}, std::move(out), {&a});
    if (y.requires_grad()) {
      tape_.emplace_back([a, y, begin]() mutable {
        auto g = y.grad();
        auto ga = a.grad();
        for (std::size_t j = 0; j < g.size(); ++j) ga[begin + j] += g[j];
      });
    }
    return y;
  }

  /// Arithmetic mean of same-shape tensors.
  TensorT mean(std::span<const TensorT> parts) {
    if (parts.empty()) throw EmptyInputError("mean of an empty list");
    std::vector<T> out(parts[0].size(), T{0});
    std::vector<const TensorT*> refs;
    for (const auto& p : parts) {
      if (p.shape() != parts[0].shape()) {
        throw DimensionError("mean shape mismatch: " + shape_str(parts[0].shape()) +
                             " with " + shape_str(p.shape()));
      }
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
      refs.push_back(&p);
    }
    const T inv = T{1} / static_cast<T>(parts.size());
    for (auto& v : out) v *= inv;
    auto y = output(parts[0].shape(), std::move(out), refs);
    if (y.requires_grad()) {
      std::vector<TensorT> held(parts.begin(), parts.end());
      tape_.emplace_back([held = std::move(held), y, inv]() mutable {
        auto g = y.grad();
        for (auto& p : held) {
          if (!p.requires_grad()) continue;
          auto gp = p.grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[i] * inv;
        }
      });
    }
    return y;
  }

  /// Mean of a matrix along axis 0 (over rows) or 1 (over columns).
  TensorT mean(const TensorT& M, std::size_t axis) {
    if (M.rank() != 2 || axis > 1) {
      throw DimensionError("mean(axis) expects a matrix and axis 0/1, got " +
                           shape_str(M.shape()));
    }
    const std::size_t r = M.shape()[0], c = M.shape()[1];
    const std::size_t n = axis == 0 ? c : r;
    const T inv = T{1} / static_cast<T>(axis == 0 ? r : c);
    std::vector<T> out(n, T{0});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += M[i * c + j] * inv;
    auto y = output(Shape{n}, std::move(out), {&M});
    if (y.requires_grad()) {
      tape_.emplace_back([M, y, r, c, axis, inv]() mutable {
        auto g = y.grad();
        auto gM = M.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gM[i * c + j] += g[axis == 0 ? j : i] * inv;
      });
    }
    return y;
  }

  /// sum_i w[i] * vs[i].
  TensorT weighted_sum(const TensorT& w, std::span<const TensorT> vs) {
    if (w.rank() != 1 || w.size() != vs.size()) {
      throw DimensionError("weighted_sum: " + std::to_string(w.size()) + " weights for " +
                           std::to_string(vs.size()) + " vectors");
    }
    return weighted_sum(w, stack(vs));
  }

  /// sum_i w[i] * M[i, :] for M [n x d].
  TensorT weighted_sum(const TensorT& w, const TensorT& M) {
    if (w.rank() != 1 || M.rank() != 2 || M.shape()[0] != w.size()) {
      throw DimensionError("weighted_sum: weights " + shape_str(w.shape()) +
                           " vs rows " + shape_str(M.shape()));
    }
    const std::size_t n = M.shape()[0], d = M.shape()[1];
    std::vector<T> out(d, T{0});
    for (std::size_t i = 0; i < n; ++i) {
      const T wi = w[i];
      if (wi == T{0}) continue;
      for (std::size_t j = 0; j < d; ++j) out[j] += wi * M[i * d + j];
    }
    auto y = output(Shape{d}, std::move(out), {&w, &M});
    if (y.requires_grad()) {
      tape_.emplace_back([w, M, y, n, d]() mutable {
        auto g = y.grad();
        if (w.requires_grad()) {
          auto gw = w.grad();
          for (std::size_t i = 0; i < n; ++i) {
            T acc{0};
            for (std::size_t j = 0; j < d; ++j) acc += g[j] * M[i * d + j];
            gw[i] += acc;
          }
        }
        if (M.requires_grad()) {
          auto gM = M.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gM[i * d + j] += w[i] * g[j];
        }
      });
    }
    return y;
  }

  /// Softmax over the positions where mask is true; masked positions receive
  /// exactly zero weight. Shifted by the unmasked maximum before exp.
  TensorT softmax_masked(const TensorT& logits, const Mask& mask) {
    if (logits.rank() != 1 || mask.size() != logits.size()) {
      throw DimensionError("softmax_masked: logits " + shape_str(logits.shape()) +
                           " vs mask of " + std::to_string(mask.size()));
    }
    T hi = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        any = true;
        hi = std::max(hi, logits[i]);
      }
    }
    if (!any) throw EmptyInputError("attention over a fully masked sequence");
    std::vector<T> out(logits.size(), T{0});
    T total{0};
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        out[i] = std::exp(logits[i] - hi);
        total += out[i];
      }
    }
    for (auto& v : out) v /= total;
    auto y = output(logits.shape(), std::move(out), {&logits});
    if (y.requires_grad()) {
      tape_.emplace_back([logits, y]() mutable {
        auto g = y.grad();
        auto gl = logits.grad();
        T inner{0};
        for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
        // Masked entries have y == 0 and so receive no gradient.
        for (std::size_t i = 0; i < g.size(); ++i) gl[i] += y[i] * (g[i] - inner);
      });
    }
    return y;
  }

  /// Rows of table [V x d] selected by ids -> [n x d].
  TensorT embed(const TensorT& table, std::span<const std::int32_t> ids) {
    if (table.rank() != 2) {
      throw DimensionError("embedding table must be a matrix, got " +
                           shape_str(table.shape()));
    }
    if (ids.empty()) throw EmptyInputError("embedding lookup of an empty sequence");
    const std::size_t V = table.shape()[0], d = table.shape()[1];
    std::vector<T> out;
    out.reserve(ids.size() * d);
    for (auto id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= V) {
        throw DimensionError("token id " + std::to_string(id) +
                             " outside embedding table of " + std::to_string(V) + " rows");
      }
      auto begin = table.data().begin() + static_cast<std::size_t>(id) * d;
      out.insert(out.end(), begin, begin + d);
    }
    auto y = output(Shape{ids.size(), d}, std::move(out), {&table});
    if (y.requires_grad()) {
      std::vector<std::int32_t> held(ids.begin(), ids.end());
      tape_.emplace_back([table, y, held = std::move(held), d]() mutable {
        auto g = y.grad();
        auto gt = table.grad();
        for (std::size_t t = 0; t < held.size(); ++t) {
          const std::size_t base = static_cast<std::size_t>(held[t]) * d;
          for (std::size_t j = 0; j < d; ++j) gt[base + j] += g[t * d + j];
        }
      });
    }
    return y;
  }

  /// Hook for ops defined outside this class. `inputs` decide whether the
  /// output joins the graph; `rule` runs during backward with the output.
  template <typename Rule>
  TensorT custom(Shape shape, std::vector<T> values, std::span<const TensorT* const> inputs,
                 Rule rule) {
    auto y = output(std::move(shape), std::move(values), inputs);
    if (y.requires_grad()) {
      tape_.emplace_back([y, rule = std::move(rule)]() mutable { rule(y); });
    }
    return y;
  }

  /// Places the rows of M at the given row positions of a [rows x cols]
  /// matrix; all other rows are zero.
  TensorT scatter_rows(const TensorT& M, std::span<const std::size_t> positions,
                       std::size_t rows) {
    if (M.rank() != 2 || M.shape()[0] != positions.size()) {
      throw DimensionError("scatter_rows of " + shape_str(M.shape()) + " into " +
                           std::to_string(positions.size()) + " positions");
    }
    const std::size_t c = M.shape()[1];
    std::vector<T> out(rows * c, T{0});
    for (std::size_t r = 0; r < positions.size(); ++r) {
      if (positions[r] >= rows) throw DimensionError("scatter_rows position out of range");
      std::copy_n(M.data().begin() + r * c, c, out.begin() + positions[r] * c);
    }
    auto y = output(Shape{rows, c}, std::move(out), {&M});
    if (y.requires_grad()) {
      std::vector<std::size_t> held(positions.begin(), positions.end());
      tape_.emplace_back([M, y, held = std::move(held), c]() mutable {
        auto g = y.grad();
        auto gM = M.grad();
        for (std::size_t r = 0; r < held.size(); ++r)
          for (std::size_t j = 0; j < c; ++j) gM[r * c + j] += g[held[r] * c + j];
      });
    }
    return y;
  }

  /// Propagates d(loss)/d(node) to every reachable tensor that requires grad.
  void backward(TensorT loss) {
    if (loss.size() != 1) {
      throw RankError("backward needs a scalar loss, got " + shape_str(loss.shape()));
    }
    if (backward_done_) {
      throw StateError("backward already ran on this graph; reset() before reuse");
    }
    if (!loss.requires_grad()) {
      throw StateError("loss is not connected to any differentiable tensor");
    }
    backward_done_ = true;
    loss.grad()[0] += T{1};
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  static T sigmoid_scalar(T x) {
    if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
  }

 private:
  enum class Op { kAdd, kSub, kMul };

  TensorT output(Shape shape, std::vector<T> values,
                 std::initializer_list<const TensorT*> inputs) {
    return output(std::move(shape), std::move(values),
                  std::span<const TensorT* const>(inputs.begin(), inputs.size()));
  }

  TensorT output(Shape shape, std::vector<T> values,
                 std::span<const TensorT* const> inputs) {
    bool needs = false;
    if (record_) {
      for (const auto* in : inputs) needs = needs || in->requires_grad();
    }
    return TensorT(std::move(shape), std::move(values), needs);
  }

  TensorT output(Shape shape, std::vector<T> values, const std::vector<const TensorT*>& inputs) {
    return output(std::move(shape), std::move(values),
                  std::span<const TensorT* const>(inputs.data(), inputs.size()));
  }

  TensorT binary(const TensorT& a, const TensorT& b, Op op) {
    if (a.shape() != b.shape()) {
      throw DimensionError("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    }
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      switch (op) {
        case Op::kAdd: out[i] = a[i] + b[i]; break;
        case Op::kSub: out[i] = a[i] - b[i]; break;
        case Op::kMul: out[i] = a[i] * b[i]; break;
      }
    }
    auto y = output(a.shape(), std::move(out), {&a, &b});
    if (y.requires_grad()) {
      tape_.emplace_back([a, b, y, op]() mutable {
        auto g = y.grad();
        if (a.requires_grad()) {
          auto ga = a.grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += op == Op::kMul ? g[i] * b[i] : g[i];
        }
        if (b.requires_grad()) {
          auto gb = b.grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            gb[i] += op == Op::kMul ? g[i] * a[i] : (op == Op::kSub ? -g[i] : g[i]);
          }
        }
      });
    }
    return y;
  }

  bool record_;
  bool backward_done_ = false;
  std::vector<std::function<void()>> tape_;
};

}  // namespace pjfit
