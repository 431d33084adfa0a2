#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tkgt/rng.hpp"
#include "tkgt/tensor.hpp"

namespace tkgt {

// Per-parameter gradient accumulator. Slots are allocated on first touch;
// an untouched slot means the gradient is identically zero.
template <typename T>
struct GradStore {
  std::vector<Tensor<T>> g;

  explicit GradStore(std::size_t n_params = 0) : g(n_params) {}

  void resize(std::size_t n) { g.resize(n); }

  Tensor<T>& ensure(int pid, const std::vector<std::size_t>& shape) {
    if (g[pid].numel() == 0 && g[pid].shape != shape) g[pid] = Tensor<T>::zeros(shape);
    return g[pid];
  }
  bool touched(int pid) const { return !g[pid].shape.empty(); }

  // Accumulates another store into this one. Called in a fixed order by the
  // trainer so the reduction tree does not depend on worker count.
  void accumulate(const GradStore& other) {
    for (std::size_t i = 0; i < other.g.size(); ++i) {
      if (other.g[i].shape.empty()) continue;
      auto& dst = ensure(static_cast<int>(i), other.g[i].shape);
      for (std::size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += other.g[i].data[k];
    }
  }

  void clear() {
    for (auto& t : g) { t.shape.clear(); t.data.clear(); }
  }
};

// Reverse-mode tape over dense tensors. Operations are recorded in program
// order, which is already a topological order, so backward() is a single
// reverse sweep. Parameter leaves reference external storage and report
// their gradients into a GradStore keyed by parameter id.
template <typename T>
class Tape {
 public:
  using Id = std::int32_t;
  static constexpr int kNoParam = -1;

  // --- node creation ---------------------------------------------------

  // Leaf referencing external storage (a model parameter when pid >= 0).
  Id leaf(const Tensor<T>* storage, int pid = kNoParam) {
    Node n;
    n.external = storage;
    n.param = pid;
    return push(std::move(n));
  }

  // Owned constant; receives no gradient.
  Id constant(Tensor<T> v) {
    Node n;
    n.value = std::move(v);
    n.is_const = true;
    return push(std::move(n));
  }

  Id scalar_const(T v) { return constant(Tensor<T>::scalar(v)); }

  const Tensor<T>& val(Id id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  std::size_t size() const { return nodes_.size(); }

  void reset() {
    nodes_.clear();
    grads_.clear();
  }

  // --- primitives -------------------------------------------------------

  Id add(Id a, Id b) {
    check_same("add", a, b);
    Tensor<T> out = val(a);
    const auto& vb = val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    return record(std::move(out), [this, a, b](const Tensor<T>& g) {
      add_all(a, g);
      add_all(b, g);
    });
  }

  Id sub(Id a, Id b) {
    check_same("sub", a, b);
    Tensor<T> out = val(a);
    const auto& vb = val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
    return record(std::move(out), [this, a, b](const Tensor<T>& g) {
      add_all(a, g);
      auto& gb = grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
    });
  }

  Id mul(Id a, Id b) {
    check_same("mul", a, b);
    Tensor<T> out = val(a);
    const auto& vb = val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
    return record(std::move(out), [this, a, b](const Tensor<T>& g) {
      const auto& va = val(a);
      const auto& vb2 = val(b);
      auto& ga = grad_buf(a);
      auto& gb = grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * vb2.data[i];
        gb.data[i] += g.data[i] * va.data[i];
      }
    });
  }

  Id scale(Id a, T c) {
    Tensor<T> out = val(a);
    for (auto& x : out.data) x *= c;
    return record(std::move(out), [this, a, c](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
    });
  }

  Id add_const(Id a, T c) {
    Tensor<T> out = val(a);
    for (auto& x : out.data) x += c;
    return record(std::move(out), [this, a](const Tensor<T>& g) { add_all(a, g); });
  }

  Id sum(Id a) {
    T s = 0;
    for (auto x : val(a).data) s += x;
    return record(Tensor<T>::scalar(s), [this, a](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (auto& x : ga.data) x += g.data[0];
    });
  }

  Id sin(Id a) {
    Tensor<T> out = val(a);
    for (auto& x : out.data) x = std::sin(x);
    return record(std::move(out), [this, a](const Tensor<T>& g) {
      const auto& va = val(a);
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * std::cos(va.data[i]);
    });
  }

  Id sigmoid(Id a) {
    Tensor<T> out = val(a);
    for (auto& x : out.data) x = T(1) / (T(1) + std::exp(-x));
    Id id = record(std::move(out), nullptr);
    nodes_[id].pull = [this, a, id](const Tensor<T>& g) {
      const auto& y = nodes_[id].value;
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
    };
    return id;
  }

  Id gelu(Id a) {
    constexpr double kPi = 3.14159265358979323846;
    static const T inv_sqrt2 = T(1) / std::sqrt(T(2));
    static const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * T(kPi));
    Tensor<T> out = val(a);
    for (auto& x : out.data) x = T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
    return record(std::move(out), [this, a](const Tensor<T>& g) {
      const auto& va = val(a);
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        T x = va.data[i];
        T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
        ga.data[i] += g.data[i] * (cdf + x * pdf);
      }
    });
  }

  // log(max(x, floor)); the clamp keeps saturated sigmoids finite. The
  // gradient below the clamp is zero.
  Id log_clamped(Id a, T floor_v = T(1e-12)) {
    Tensor<T> out = val(a);
    for (auto& x : out.data) x = std::log(x < floor_v ? floor_v : x);
    return record(std::move(out), [this, a, floor_v](const Tensor<T>& g) {
      const auto& va = val(a);
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (va.data[i] >= floor_v) ga.data[i] += g.data[i] / va.data[i];
    });
  }

  Id matmul(Id a, Id b) {
    const auto& va = val(a);
    const auto& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows())
      fail("matmul", a, b);
    Tensor<T> out({va.rows(), vb.cols()});
    gemm_nn(va, vb, out);
    return record(std::move(out), [this, a, b](const Tensor<T>& g) {
      gemm_nt_acc(g, val(b), grad_buf(a));   // dA += G B^T
      gemm_tn_acc(val(a), g, grad_buf(b));   // dB += A^T G
    });
  }

  Id transpose(Id a) {
    const auto& va = val(a);
    if (va.rank() != 2) fail("transpose", a);
    Tensor<T> out({va.cols(), va.rows()});
    for (std::size_t r = 0; r < va.rows(); ++r)
      for (std::size_t c = 0; c < va.cols(); ++c) out.at(c, r) = va.at(r, c);
    return record(std::move(out), [this, a](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga.at(c, r) += g.at(r, c);
    });
  }

  // Single row of a matrix as a vector.
  Id row(Id a, std::size_t r) {
    const auto& va = val(a);
    if (va.rank() != 2 || r >= va.rows()) fail("row", a);
    std::size_t n = va.cols();
    Tensor<T> out({n});
    for (std::size_t c = 0; c < n; ++c) out[c] = va.at(r, c);
    return record(std::move(out), [this, a, r](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t c = 0; c < g.numel(); ++c) ga.at(r, c) += g[c];
    });
  }

  // Embedding lookup: selected rows of a table. The adjoint scatter-adds,
  // so a row referenced from several positions accumulates all of them.
  Id gather_rows(Id table, std::vector<std::size_t> idx) {
    const auto& vt = val(table);
    if (vt.rank() != 2) fail("gather_rows", table);
    std::size_t d = vt.cols();
    Tensor<T> out({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= vt.rows())
        throw std::runtime_error("gather_rows: index " + std::to_string(idx[i]) +
                                 " out of range for table " + vt.shape_str());
      for (std::size_t c = 0; c < d; ++c) out.at(i, c) = vt.at(idx[i], c);
    }
    return record(std::move(out), [this, table, idx = std::move(idx)](const Tensor<T>& g) {
      auto& gt = grad_buf(table);
      std::size_t d = g.cols();
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) gt.at(idx[i], c) += g.at(i, c);
    });
  }

  Id gather_row(Id table, std::size_t i) { return reshape(gather_rows(table, {i}), {val(table).cols()}); }

  // Stacks 1-D vectors of equal length into a matrix.
  Id stack_rows(std::vector<Id> parts) {
    if (parts.empty()) throw std::runtime_error("stack_rows: empty input");
    std::size_t d = val(parts[0]).numel();
    Tensor<T> out({parts.size(), d});
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& v = val(parts[i]);
      if (v.rank() != 1 || v.numel() != d)
        throw std::runtime_error("stack_rows: row " + std::to_string(i) + " has shape " +
                                 v.shape_str() + ", expected (" + std::to_string(d) + ")");
      for (std::size_t c = 0; c < d; ++c) out.at(i, c) = v[c];
    }
    return record(std::move(out), [this, parts = std::move(parts)](const Tensor<T>& g) {
      for (std::size_t i = 0; i < parts.size(); ++i) {
        auto& gp = grad_buf(parts[i]);
        for (std::size_t c = 0; c < g.cols(); ++c) gp[c] += g.at(i, c);
      }
    });
  }

  Id concat(Id a, Id b) {
    const auto& va = val(a);
    const auto& vb = val(b);
    if (va.rank() != 1 || vb.rank() != 1) fail("concat", a, b);
    Tensor<T> out({va.numel() + vb.numel()});
    for (std::size_t i = 0; i < va.numel(); ++i) out[i] = va[i];
    for (std::size_t i = 0; i < vb.numel(); ++i) out[va.numel() + i] = vb[i];
    return record(std::move(out), [this, a, b, na = va.numel()](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      auto& gb = grad_buf(b);
      for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[na + i];
    });
  }

  Id slice(Id a, std::size_t from, std::size_t to) {
    const auto& va = val(a);
    if (va.rank() != 1 || from > to || to > va.numel())
      throw std::runtime_error("slice: [" + std::to_string(from) + "," + std::to_string(to) +
                               ") invalid for " + va.shape_str());
    Tensor<T> out({to - from});
    for (std::size_t i = from; i < to; ++i) out[i - from] = va[i];
    return record(std::move(out), [this, a, from](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[from + i] += g[i];
    });
  }

  Id slice_cols(Id a, std::size_t c0, std::size_t c1) {
    const auto& va = val(a);
    if (va.rank() != 2 || c0 > c1 || c1 > va.cols())
      throw std::runtime_error("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                               ") invalid for " + va.shape_str());
    Tensor<T> out({va.rows(), c1 - c0});
    for (std::size_t r = 0; r < va.rows(); ++r)
      for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = va.at(r, c);
    return record(std::move(out), [this, a, c0](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga.at(r, c0 + c) += g.at(r, c);
    });
  }

  Id concat_cols(Id a, Id b) {
    const auto& va = val(a);
    const auto& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.rows() != vb.rows()) fail("concat_cols", a, b);
    Tensor<T> out({va.rows(), va.cols() + vb.cols()});
    for (std::size_t r = 0; r < va.rows(); ++r) {
      for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) = va.at(r, c);
      for (std::size_t c = 0; c < vb.cols(); ++c) out.at(r, va.cols() + c) = vb.at(r, c);
    }
    return record(std::move(out), [this, a, b, ca = va.cols()](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      auto& gb = grad_buf(b);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < ca; ++c) ga.at(r, c) += g.at(r, c);
        for (std::size_t c = 0; c < gb.cols(); ++c) gb.at(r, c) += g.at(r, ca + c);
      }
    });
  }

  // matrix + row vector, broadcast over the leading dimension.
  Id add_rowwise(Id a, Id v) {
    const auto& va = val(a);
    const auto& vv = val(v);
    if (va.rank() != 2 || vv.rank() != 1 || va.cols() != vv.numel()) fail("add_rowwise", a, v);
    Tensor<T> out = va;
    for (std::size_t r = 0; r < va.rows(); ++r)
      for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) += vv[c];
    return record(std::move(out), [this, a, v](const Tensor<T>& g) {
      add_all(a, g);
      auto& gv = grad_buf(v);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gv[c] += g.at(r, c);
    });
  }

  Id reshape(Id a, std::vector<std::size_t> s) {
    const auto& va = val(a);
    if (Tensor<T>::count(s) != va.numel())
      throw std::runtime_error("reshape: cannot view " + va.shape_str() + " as " +
                               Tensor<T>(std::move(s)).shape_str());
    Tensor<T> out = va;
    out.shape = s;
    return record(std::move(out), [this, a](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    });
  }

  // Row-wise layer normalization with learnable gain and bias.
  Id layer_norm(Id x, Id gain, Id bias, T eps = T(1e-5)) {
    const auto& vx = val(x);
    const auto& vg = val(gain);
    const auto& vb = val(bias);
    if (vx.rank() != 2 || vg.numel() != vx.cols() || vb.numel() != vx.cols())
      fail("layer_norm", x, gain);
    std::size_t m = vx.rows(), n = vx.cols();
    Tensor<T> out({m, n});
    Tensor<T> xhat({m, n});
    Tensor<T> inv_sd({m});
    for (std::size_t r = 0; r < m; ++r) {
      T mu = 0;
      for (std::size_t c = 0; c < n; ++c) mu += vx.at(r, c);
      mu /= T(n);
      T var = 0;
      for (std::size_t c = 0; c < n; ++c) {
        T dvc = vx.at(r, c) - mu;
        var += dvc * dvc;
      }
      var /= T(n);
      T is = T(1) / std::sqrt(var + eps);
      inv_sd[r] = is;
      for (std::size_t c = 0; c < n; ++c) {
        T xh = (vx.at(r, c) - mu) * is;
        xhat.at(r, c) = xh;
        out.at(r, c) = xh * vg.data[c] + vb.data[c];
      }
    }
    Id id = record(std::move(out), nullptr);
    nodes_[id].pull = [this, x, gain, bias, xhat = std::move(xhat),
                       inv_sd = std::move(inv_sd)](const Tensor<T>& g) {
      const auto& vg = val(gain);
      auto& gx = grad_buf(x);
      auto& gg = grad_buf(gain);
      auto& gb = grad_buf(bias);
      std::size_t m = g.rows(), n = g.cols();
      for (std::size_t r = 0; r < m; ++r) {
        T sum_h = 0, sum_hx = 0;
        for (std::size_t c = 0; c < n; ++c) {
          T h = g.at(r, c) * vg.data[c];
          sum_h += h;
          sum_hx += h * xhat.at(r, c);
          gg.data[c] += g.at(r, c) * xhat.at(r, c);
          gb.data[c] += g.at(r, c);
        }
        T mh = sum_h / T(n), mhx = sum_hx / T(n);
        for (std::size_t c = 0; c < n; ++c) {
          T h = g.at(r, c) * vg.data[c];
          gx.at(r, c) += (h - mh - xhat.at(r, c) * mhx) * inv_sd[r];
        }
      }
    };
    return id;
  }

  // Row-wise softmax; columns with valid[c] == 0 get exactly zero weight.
  // An empty mask means all columns are valid.
  Id softmax_rows(Id a, std::vector<std::uint8_t> valid = {}) {
    const auto& va = val(a);
    if (va.rank() != 2) fail("softmax_rows", a);
    std::size_t m = va.rows(), n = va.cols();
    if (!valid.empty() && valid.size() != n)
      throw std::runtime_error("softmax_rows: mask size " + std::to_string(valid.size()) +
                               " != cols " + std::to_string(n));
    Tensor<T> out({m, n});
    for (std::size_t r = 0; r < m; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < n; ++c)
        if (valid.empty() || valid[c]) mx = std::max(mx, va.at(r, c));
      if (mx == -std::numeric_limits<T>::infinity())
        throw std::runtime_error("softmax_rows: row " + std::to_string(r) + " fully masked");
      T z = 0;
      for (std::size_t c = 0; c < n; ++c) {
        T e = (valid.empty() || valid[c]) ? std::exp(va.at(r, c) - mx) : T(0);
        out.at(r, c) = e;
        z += e;
      }
      for (std::size_t c = 0; c < n; ++c) out.at(r, c) /= z;
    }
    Id id = record(std::move(out), nullptr);
    nodes_[id].pull = [this, a, id, valid = std::move(valid)](const Tensor<T>& g) {
      const auto& y = nodes_[id].value;
      auto& ga = grad_buf(a);
      std::size_t m = g.rows(), n = g.cols();
      for (std::size_t r = 0; r < m; ++r) {
        T dot = 0;
        for (std::size_t c = 0; c < n; ++c) dot += g.at(r, c) * y.at(r, c);
        for (std::size_t c = 0; c < n; ++c) {
          if (!valid.empty() && !valid[c]) continue;
          ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
      }
    };
    return id;
  }

  // Fused softmax + cross entropy against one target class, in the
  // log-sum-exp form: loss = logsumexp(logits) - logits[target].
  Id softmax_xent(Id logits, std::size_t target) {
    const auto& vl = val(logits);
    if (vl.rank() != 1 || target >= vl.numel())
      throw std::runtime_error("softmax_xent: target " + std::to_string(target) +
                               " invalid for logits " + vl.shape_str());
    std::size_t n = vl.numel();
    T mx = vl[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, vl[i]);
    T z = 0;
    Tensor<T> soft({n});
    for (std::size_t i = 0; i < n; ++i) {
      soft[i] = std::exp(vl[i] - mx);
      z += soft[i];
    }
    for (std::size_t i = 0; i < n; ++i) soft[i] /= z;
    T loss = std::log(z) + mx - vl[target];
    Id id = record(Tensor<T>::scalar(loss), nullptr);
    nodes_[id].pull = [this, logits, target, soft = std::move(soft)](const Tensor<T>& g) {
      auto& gl = grad_buf(logits);
      for (std::size_t i = 0; i < soft.numel(); ++i)
        gl[i] += g.data[0] * (soft[i] - (i == target ? T(1) : T(0)));
    };
    return id;
  }

  Id euclid_dist(Id a, Id b) {
    check_same("euclid_dist", a, b);
    const auto& va = val(a);
    const auto& vb = val(b);
    T s = 0;
    for (std::size_t i = 0; i < va.numel(); ++i) {
      T d = va.data[i] - vb.data[i];
      s += d * d;
    }
    T dist = std::sqrt(s);
    return record(Tensor<T>::scalar(dist), [this, a, b, dist](const Tensor<T>& g) {
      if (dist == T(0)) return;  // subgradient 0 at the apex
      const auto& va2 = val(a);
      const auto& vb2 = val(b);
      auto& ga = grad_buf(a);
      auto& gb = grad_buf(b);
      T w = g.data[0] / dist;
      for (std::size_t i = 0; i < va2.numel(); ++i) {
        T d = (va2.data[i] - vb2.data[i]) * w;
        ga.data[i] += d;
        gb.data[i] -= d;
      }
    });
  }

  // Inverted dropout recorded as a fixed mask; deterministic given the rng.
  Id dropout(Id a, double p, Rng& rng) {
    if (p <= 0) return a;
    const auto& va = val(a);
    Tensor<T> keep({va.numel()});
    T inv = T(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < keep.numel(); ++i) keep[i] = rng.bernoulli(p) ? T(0) : inv;
    Tensor<T> out = va;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= keep[i];
    return record(std::move(out), [this, a, keep = std::move(keep)](const Tensor<T>& g) {
      auto& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * keep[i];
    });
  }

  // --- backward ----------------------------------------------------------

  // Reverse sweep from `loss`, seeding d(loss)/d(loss) = seed. Parameter
  // gradients are accumulated into `store`.
  void backward(Id loss, GradStore<T>& store, T seed = T(1)) {
    if (!val(loss).is_scalar())
      throw std::runtime_error("backward: loss must be scalar, got " + val(loss).shape_str());
    grads_.assign(nodes_.size(), Tensor<T>());
    grad_buf(loss).data[0] = seed;
    for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[i];
      if (grads_[i].shape.empty()) continue;  // not reached from the loss
      if (n.param >= 0) {
        auto& slot = store.ensure(n.param, val(i).shape);
        for (std::size_t k = 0; k < slot.data.size(); ++k) slot.data[k] += grads_[i].data[k];
      } else if (n.pull) {
        n.pull(grads_[i]);
      }
    }
    grads_.clear();
  }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    int param = kNoParam;
    bool is_const = false;
    std::function<void(const Tensor<T>&)> pull;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id record(Tensor<T> out, std::function<void(const Tensor<T>&)> pull) {
    Node n;
    n.value = std::move(out);
    n.pull = std::move(pull);
    return push(std::move(n));
  }

  Tensor<T>& grad_buf(Id id) {
    if (grads_[id].shape.empty()) grads_[id] = Tensor<T>::zeros(val(id).shape);
    return grads_[id];
  }

  void add_all(Id id, const Tensor<T>& g) {
    auto& dst = grad_buf(id);
    for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
  }

  void check_same(const char* op, Id a, Id b) const {
    if (!same_shape(val(a), val(b)))
      throw std::runtime_error(std::string(op) + ": shape mismatch " + val(a).shape_str() +
                               " vs " + val(b).shape_str());
  }

  [[noreturn]] void fail(const char* op, Id a) const {
    throw std::runtime_error(std::string(op) + ": invalid shape " + val(a).shape_str());
  }
  [[noreturn]] void fail(const char* op, Id a, Id b) const {
    throw std::runtime_error(std::string(op) + ": invalid shapes " + val(a).shape_str() +
                             " vs " + val(b).shape_str());
  }

  // C += A B variants on raw tensors.
  static void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a.data.data() + i * k;
      T* ci = c.data.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        T av = ai[p];
        const T* bp = b.data.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }
  static void gemm_nt_acc(const Tensor<T>& g, const Tensor<T>& b, Tensor<T>& c) {
    // c(m,k) += g(m,n) b(k,n)^T
    std::size_t m = g.rows(), n = g.cols(), k = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
      const T* gi = g.data.data() + i * n;
      T* ci = c.data.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T* bp = b.data.data() + p * n;
        T acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
        ci[p] += acc;
      }
    }
  }
  static void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& g, Tensor<T>& c) {
    // c(k,n) += a(m,k)^T g(m,n)
    std::size_t m = a.rows(), k = a.cols(), n = g.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a.data.data() + i * k;
      const T* gi = g.data.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        T av = ai[p];
        T* cp = c.data.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
      }
    }
  }
};

}  // namespace tkgt
