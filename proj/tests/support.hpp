// SPDX-License-Identifier: Apache-2.0
// Test-side helpers and naive reference implementations. Nothing here calls
// into the library's kernels; each oracle is written from the defining
// formula with plain loops.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "genre/tensor.hpp"

namespace oracle {

using genre::real;
using Vec = std::vector<real>;

inline std::mt19937_64 make_gen(std::uint64_t seed) { return std::mt19937_64(seed * 0x9e3779b97f4a7c15ULL + 17); }

inline Vec random_vec(std::size_t n, std::mt19937_64& gen, real lo = -1.0, real hi = 1.0) {
  std::uniform_real_distribution<real> dist(lo, hi);
  Vec v(n);
  for (real& x : v) x = dist(gen);
  return v;
}

inline std::size_t random_size(std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
}

inline genre::Tensor random_param(genre::Shape shape, std::mt19937_64& gen, real lo = -1.0, real hi = 1.0) {
  const std::size_t n = genre::numel(shape);
  return genre::Tensor::parameter(std::move(shape), random_vec(n, gen, lo, hi));
}

inline genre::Tensor random_const(genre::Shape shape, std::mt19937_64& gen, real lo = -1.0, real hi = 1.0) {
  const std::size_t n = genre::numel(shape);
  return genre::Tensor::constant(std::move(shape), random_vec(n, gen, lo, hi));
}

inline Vec to_vec(const genre::Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

inline real max_abs_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return INFINITY;
  real m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline real sigmoid(real x) { return 1.0 / (1.0 + std::exp(-x)); }

// a [m x k] * b [k x n]
inline Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0.0L;
      for (std::size_t t = 0; t < k; ++t) s += static_cast<long double>(a[i * k + t]) * b[t * n + j];
      c[i * n + j] = static_cast<real>(s);
    }
  return c;
}

// x [cin x t], w [cout x cin x k] -> [cout x t_out]
inline Vec conv_time(const Vec& x, const Vec& w, std::size_t cin, std::size_t t, std::size_t cout, std::size_t k,
                     std::size_t stride) {
  const std::size_t t_out = (t - k) / stride + 1;
  Vec y(cout * t_out, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t p = 0; p < t_out; ++p) {
      long double s = 0.0L;
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t j = 0; j < k; ++j) s += static_cast<long double>(w[(o * cin + c) * k + j]) * x[c * t + p * stride + j];
      y[o * t_out + p] = static_cast<real>(s);
    }
  return y;
}

// x [c x t] -> [c x t_out]
inline Vec maxpool_time(const Vec& x, std::size_t c, std::size_t t, std::size_t window, std::size_t stride) {
  const std::size_t t_out = (t - window) / stride + 1;
  Vec y(c * t_out);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < t_out; ++p) {
      real m = -INFINITY;
      for (std::size_t j = 0; j < window; ++j) m = std::max(m, x[ch * t + p * stride + j]);
      y[ch * t_out + p] = m;
    }
  return y;
}

// Softmax in long double, masked entries 0.
inline Vec softmax(const Vec& x, const std::vector<std::uint8_t>& mask = {}) {
  long double total = 0.0L;
  std::vector<long double> e(x.size(), 0.0L);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    e[i] = std::exp(static_cast<long double>(x[i]));
    total += e[i];
  }
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<real>(e[i] / total);
  return out;
}

// Mean of -log softmax(logits_b)[label_b] over rows.
inline real cross_entropy(const Vec& logits, const std::vector<int>& labels, std::size_t classes) {
  long double loss = 0.0L;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    long double total = 0.0L;
    for (std::size_t g = 0; g < classes; ++g) total += std::exp(static_cast<long double>(logits[b * classes + g]));
    loss -= std::log(std::exp(static_cast<long double>(logits[b * classes + static_cast<std::size_t>(labels[b])])) / total);
  }
  return static_cast<real>(loss / static_cast<long double>(labels.size()));
}

// Gate-by-gate GRU step with explicit (1 - z) h + z n.
// w [3H x D], u [3H x H], b [3H]; gate order z, r, n.
inline Vec gru_cell(const Vec& x, const Vec& h, const Vec& w, const Vec& u, const Vec& b, std::size_t d, std::size_t hid) {
  auto wx = [&](std::size_t row) {
    real s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += w[row * d + j] * x[j];
    return s;
  };
  auto uv = [&](std::size_t row, const Vec& v) {
    real s = 0.0;
    for (std::size_t j = 0; j < hid; ++j) s += u[row * hid + j] * v[j];
    return s;
  };
  Vec z(hid), r(hid), rh(hid), out(hid);
  for (std::size_t i = 0; i < hid; ++i) {
    z[i] = sigmoid(wx(i) + uv(i, h) + b[i]);
    r[i] = sigmoid(wx(hid + i) + uv(hid + i, h) + b[hid + i]);
    rh[i] = r[i] * h[i];
  }
  for (std::size_t i = 0; i < hid; ++i) {
    const real n = std::tanh(wx(2 * hid + i) + uv(2 * hid + i, rh) + b[2 * hid + i]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * n;
  }
  return out;
}

// Unmasked bidirectional GRU over L steps of x [L x D] -> [L x 2H].
inline Vec bigru(const Vec& x, std::size_t steps, std::size_t d, std::size_t hid, const Vec& wf, const Vec& uf,
                 const Vec& bf, const Vec& wb, const Vec& ub, const Vec& bb) {
  Vec out(steps * 2 * hid);
  Vec h(hid, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    h = gru_cell(Vec(x.begin() + t * d, x.begin() + (t + 1) * d), h, wf, uf, bf, d, hid);
    for (std::size_t i = 0; i < hid; ++i) out[t * 2 * hid + i] = h[i];
  }
  h.assign(hid, 0.0);
  for (std::size_t i = steps; i-- > 0;) {
    h = gru_cell(Vec(x.begin() + i * d, x.begin() + (i + 1) * d), h, wb, ub, bb, d, hid);
    for (std::size_t j = 0; j < hid; ++j) out[i * 2 * hid + hid + j] = h[j];
  }
  return out;
}

// u_i = tanh(W h_i + b), alpha = softmax(u_i . c), s = sum alpha_i h_i.
// h [n x e], w [a x e]. Returns s; alpha through the out parameter.
inline Vec attention(const Vec& h, std::size_t n, std::size_t e, const Vec& w, const Vec& b, const Vec& c,
                     std::size_t a, Vec* alpha_out = nullptr) {
  Vec scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double s = 0.0L;
    for (std::size_t r = 0; r < a; ++r) {
      long double pre = b[r];
      for (std::size_t j = 0; j < e; ++j) pre += static_cast<long double>(w[r * e + j]) * h[i * e + j];
      s += std::tanh(pre) * static_cast<long double>(c[r]);
    }
    scores[i] = static_cast<real>(s);
  }
  const Vec alpha = softmax(scores);
  Vec out(e, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < e; ++j) out[j] += alpha[i] * h[i * e + j];
  if (alpha_out) *alpha_out = alpha;
  return out;
}

}  // namespace oracle
