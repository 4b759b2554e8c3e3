// SPDX-License-Identifier: Apache-2.0
#include "genre/gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <memory>
#include <set>
#include <unordered_set>

#include "genre/cnn.hpp"
#include "genre/embeddings.hpp"
#include "genre/han.hpp"
#include "genre/model.hpp"
#include "genre/ops.hpp"
#include "genre/synthetic.hpp"

namespace genre {

namespace {

// A check instance: a deterministic scalar loss over some trainable leaves.
struct Case {
  std::function<Tensor()> loss;
  std::vector<NamedTensor> params;
  std::shared_ptr<void> keep_alive;  // state captured by reference in `loss`
};

constexpr double kKinkMargin = 1e-3;
constexpr int kMaxRedraws = 100;

using CaseFactory = std::function<Case(Rng&)>;

struct Check {
  std::string name;
  CaseFactory make;
  enum Kind { primitive, encoder, model } kind;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); }

std::vector<real> values(Rng& rng, std::size_t n, real lo = -1.0, real hi = 1.0) {
  std::vector<real> v(n);
  for (real& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Values kept away from 0 so relu has no kink within eps.
std::vector<real> away_from_zero(Rng& rng, std::size_t n) {
  std::vector<real> v(n);
  for (real& x : v) {
    x = rng.uniform(0.05, 1.0);
    if (rng.bernoulli(0.5)) x = -x;
  }
  return v;
}

Tensor param(Rng& rng, Shape shape, real lo = -1.0, real hi = 1.0) {
  const std::size_t n = numel(shape);
  return Tensor::parameter(std::move(shape), values(rng, n, lo, hi));
}

Tensor constant(Rng& rng, Shape shape) {
  const std::size_t n = numel(shape);
  return Tensor::constant(std::move(shape), values(rng, n));
}

// Reduces any tensor to a scalar with random weights so no gradient is
// uniform across coordinates.
Tensor project(const Tensor& y, Rng& rng) { return sum(mul(y, constant(rng, y.shape()))); }

Case simple(std::function<Tensor()> loss, std::vector<NamedTensor> params) {
  return {std::move(loss), std::move(params), nullptr};
}

std::vector<Check> registry() {
  std::vector<Check> checks;
  auto add_primitive = [&](std::string name, CaseFactory f) {
    checks.push_back({std::move(name), std::move(f), Check::primitive});
  };

  add_primitive("matmul", [](Rng& r) {
    const std::size_t m = pick(r, 1, 4), k = pick(r, 1, 5), n = pick(r, 1, 4);
    Tensor a = param(r, {m, k}), b = param(r, {k, n});
    Tensor c = constant(r, {m, n});
    return simple([=] { return sum(mul(matmul(a, b), c)); }, {{"a", a}, {"b", b}});
  });
  add_primitive("linear", [](Rng& r) {
    const std::size_t m = pick(r, 1, 4), k = pick(r, 1, 5), n = pick(r, 1, 4);
    Tensor x = param(r, {m, k}), w = param(r, {n, k}), b = param(r, {n});
    Tensor c = constant(r, {m, n});
    return simple([=] { return sum(mul(linear(x, w, b), c)); }, {{"x", x}, {"w", w}, {"b", b}});
  });
  add_primitive("add", [](Rng& r) {
    const Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    Tensor a = param(r, s), b = param(r, s), c = constant(r, s);
    return simple([=] { return sum(mul(add(a, b), c)); }, {{"a", a}, {"b", b}});
  });
  add_primitive("sub", [](Rng& r) {
    const Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    Tensor a = param(r, s), b = param(r, s), c = constant(r, s);
    return simple([=] { return sum(mul(sub(a, b), c)); }, {{"a", a}, {"b", b}});
  });
  add_primitive("mul", [](Rng& r) {
    const Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    Tensor a = param(r, s), b = param(r, s), c = constant(r, s);
    return simple([=] { return sum(mul(mul(a, b), c)); }, {{"a", a}, {"b", b}});
  });
  add_primitive("scale", [](Rng& r) {
    const Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    const real f = r.uniform(-2.0, 2.0);
    Tensor x = param(r, s), c = constant(r, s);
    return simple([=] { return sum(mul(scale(x, f), c)); }, {{"x", x}});
  });
  add_primitive("sum", [](Rng& r) {
    Tensor x = param(r, {pick(r, 1, 6)});
    return simple([=] { return sum(mul(x, x)); }, {{"x", x}});
  });
  for (Activation kind : {Activation::relu, Activation::tanh, Activation::sigmoid}) {
    const char* name = kind == Activation::relu ? "relu" : kind == Activation::tanh ? "tanh" : "sigmoid";
    add_primitive(name, [kind](Rng& r) {
      const Shape s{pick(r, 1, 4), pick(r, 1, 5)};
      Tensor x = Tensor::parameter(s, kind == Activation::relu ? away_from_zero(r, numel(s)) : values(r, numel(s), -2, 2));
      Tensor c = constant(r, s);
      return simple([=] { return sum(mul(elementwise(kind, x), c)); }, {{"x", x}});
    });
  }
  add_primitive("softmax", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 3), cols = pick(r, 2, 6);
    auto mask = std::make_shared<Mask>(rows * cols, 1);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) (*mask)[i * cols + j] = r.bernoulli(0.75);
      (*mask)[i * cols + r.below(cols)] = 1;
    }
    Tensor x = param(r, {rows, cols}, -2, 2), c = constant(r, {rows, cols});
    Case k = simple([=] { return sum(mul(softmax(x, *mask), c)); }, {{"x", x}});
    k.keep_alive = mask;
    return k;
  });
  add_primitive("softmax_cross_entropy", [](Rng& r) {
    const std::size_t b = pick(r, 1, 4), g = pick(r, 2, 6);
    std::vector<int> labels(b);
    for (int& l : labels) l = static_cast<int>(r.below(g));
    const std::vector<real> w = values(r, b, 0.5, 2.0);
    const bool weighted = r.bernoulli(0.5);
    Tensor x = param(r, {b, g}, -2, 2);
    return simple(
        [=] { return softmax_cross_entropy(x, labels, weighted ? std::span<const real>(w) : std::span<const real>()); },
        {{"logits", x}});
  });
  add_primitive("conv_time", [](Rng& r) {
    const std::size_t b = pick(r, 1, 2), cin = pick(r, 1, 3), cout = pick(r, 1, 3), k = pick(r, 1, 4);
    const std::size_t stride = pick(r, 1, 2), t = k + pick(r, 0, 6);
    Tensor x = param(r, {b, cin, t}), w = param(r, {cout, cin, k});
    Tensor y0 = conv_time(x, w, stride);
    Tensor c = constant(r, y0.shape());
    return simple([=] { return sum(mul(conv_time(x, w, stride), c)); }, {{"x", x}, {"kernels", w}});
  });
  add_primitive("maxpool_time", [](Rng& r) {
    const std::size_t ch = pick(r, 1, 3), window = pick(r, 1, 4), stride = pick(r, 1, window);
    const std::size_t t = window + pick(r, 0, 6);
    // Distinct values on a grid with spacing 0.1 keep every window's maximum
    // unique under a perturbation of eps.
    std::vector<real> v(ch * t);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<real>(i) - 1.0;
    r.shuffle(std::span<real>(v));
    Tensor x = Tensor::parameter({ch, t}, v);
    Tensor c = constant(r, maxpool_time(x, window, stride).shape());
    return simple([=] { return sum(mul(maxpool_time(x, window, stride), c)); }, {{"x", x}});
  });
  add_primitive("batchnorm", [](Rng& r) {
    const std::size_t b = pick(r, 2, 3), ch = pick(r, 1, 3), t = pick(r, 1, 4);
    auto stats = std::make_shared<RunningStats>(ch);
    stats->mean = values(r, ch, -0.5, 0.5);
    stats->var = values(r, ch, 0.5, 2.0);
    Tensor x = param(r, {b, ch, t}, -2, 2), gamma = param(r, {ch}, 0.5, 1.5), beta = param(r, {ch});
    Tensor c1 = constant(r, {b, ch, t}), c2 = constant(r, {b, ch, t});
    Case k = simple(
        [=] {
          RunningStats saved = *stats;
          Tensor train = batchnorm(x, gamma, beta, *stats, Mode::train);
          *stats = saved;
          Tensor eval = batchnorm(x, gamma, beta, *stats, Mode::eval);
          return add(sum(mul(train, c1)), sum(mul(eval, c2)));
        },
        {{"x", x}, {"gamma", gamma}, {"beta", beta}});
    k.keep_alive = stats;
    return k;
  });
  add_primitive("dropout", [](Rng& r) {
    const Shape s{pick(r, 1, 4), pick(r, 1, 5)};
    const real p = r.uniform(0.1, 0.6);
    const std::uint64_t mask_seed = r.next_u64();
    Tensor x = param(r, s), c = constant(r, s);
    return simple(
        [=] {
          Rng drop(mask_seed);
          return sum(mul(dropout(x, p, drop, Mode::train), c));
        },
        {{"x", x}});
  });
  add_primitive("concat", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 3);
    Tensor a = param(r, {rows, pick(r, 1, 4)}), b = param(r, {rows, pick(r, 1, 4)});
    Tensor c = constant(r, {rows, a.dim(1) + b.dim(1)});
    return simple([=] { return sum(mul(concat(a, b), c)); }, {{"a", a}, {"b", b}});
  });
  add_primitive("reshape", [](Rng& r) {
    const std::size_t m = pick(r, 1, 4), n = pick(r, 1, 4);
    Tensor x = param(r, {m, n}), c = constant(r, {n, m});
    return simple([=] { return sum(mul(reshape(x, {n, m}), c)); }, {{"x", x}});
  });
  add_primitive("embedding", [](Rng& r) {
    const std::size_t v = pick(r, 2, 6), d = pick(r, 1, 4), n = pick(r, 1, 6);
    std::vector<int> ids(n);
    // Row 0 is the padding row, which is frozen by design; it is not looked up.
    for (int& id : ids) id = 1 + static_cast<int>(r.below(v - 1));
    Tensor table = param(r, {v, d}), c = constant(r, {n, d});
    return simple([=] { return sum(mul(embedding(table, ids, 0), c)); }, {{"table", table}});
  });
  add_primitive("slice_cols", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 3), cols = pick(r, 1, 6), start = pick(r, 0, cols - 1);
    const std::size_t len = pick(r, 1, cols - start);
    Tensor x = param(r, {rows, cols}), c = constant(r, {rows, len});
    return simple([=] { return sum(mul(slice_cols(x, start, len), c)); }, {{"x", x}});
  });
  add_primitive("gather_rows", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 4), cols = pick(r, 1, 3), n = pick(r, 1, 6);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = r.below(rows);
    Tensor x = param(r, {rows, cols}), c = constant(r, {n, cols});
    return simple([=] { return sum(mul(gather_rows(x, idx), c)); }, {{"x", x}});
  });
  add_primitive("scatter_rows", [](Rng& r) {
    const std::size_t total = pick(r, 1, 5), cols = pick(r, 1, 3), n = pick(r, 1, total);
    std::vector<std::size_t> targets(total);
    for (std::size_t i = 0; i < total; ++i) targets[i] = i;
    r.shuffle(std::span<std::size_t>(targets));
    targets.resize(n);
    Tensor x = param(r, {n, cols}), c = constant(r, {total, cols});
    return simple([=] { return sum(mul(scatter_rows(x, targets, total), c)); }, {{"x", x}});
  });
  add_primitive("stack_time", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 3), d = pick(r, 1, 3), len = pick(r, 1, 4);
    std::vector<NamedTensor> params;
    std::vector<Tensor> steps;
    for (std::size_t t = 0; t < len; ++t) {
      steps.push_back(param(r, {rows, d}));
      params.push_back({"step" + std::to_string(t), steps.back()});
    }
    Tensor c = constant(r, {rows, len, d});
    return simple([=] { return sum(mul(stack_time(steps), c)); }, params);
  });
  add_primitive("time_slice", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 3), len = pick(r, 1, 4), d = pick(r, 1, 3), t = pick(r, 0, len - 1);
    Tensor x = param(r, {rows, len, d}), c = constant(r, {rows, d});
    return simple([=] { return sum(mul(time_slice(x, t), c)); }, {{"x", x}});
  });
  add_primitive("where_rows", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 4), d = pick(r, 1, 3);
    Mask mask(rows);
    for (auto& m : mask) m = r.bernoulli(0.5);
    Tensor a = param(r, {rows, d}), b = param(r, {rows, d}), c = constant(r, {rows, d});
    return simple([=] { return sum(mul(where_rows(mask, a, b), c)); }, {{"a", a}, {"b", b}});
  });
  add_primitive("weighted_sum_time", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 3), len = pick(r, 1, 4), d = pick(r, 1, 3);
    Tensor alpha = param(r, {rows, len}), h = param(r, {rows, len, d}), c = constant(r, {rows, d});
    return simple([=] { return sum(mul(weighted_sum_time(alpha, h), c)); }, {{"alpha", alpha}, {"h", h}});
  });

  // Recurrent and attention pieces of the lyrics encoder.
  checks.push_back({"gru_cell",
                    [](Rng& r) {
                      const std::size_t rows = pick(r, 1, 3), d = pick(r, 1, 4), h = pick(r, 1, 4);
                      GruParams p = init_gru(d, h, r);
                      for (real& v : p.b.mutable_data()) v = r.uniform(-0.5, 0.5);
                      Tensor x = param(r, {rows, d}), h0 = param(r, {rows, h}), c = constant(r, {rows, h});
                      return simple([=] { return sum(mul(gru_cell(x, h0, p), c)); },
                                    {{"x", x}, {"h", h0}, {"w", p.w}, {"u", p.u}, {"b", p.b}});
                    },
                    Check::primitive});
  checks.push_back({"bigru",
                    [](Rng& r) {
                      const std::size_t rows = pick(r, 1, 3), len = pick(r, 1, 5), d = pick(r, 1, 3), h = pick(r, 1, 3);
                      GruParams f = init_gru(d, h, r), b = init_gru(d, h, r);
                      auto mask = std::make_shared<Mask>(rows * len, 0);
                      for (std::size_t i = 0; i < rows; ++i) {
                        const std::size_t live = pick(r, 1, len);
                        for (std::size_t t = 0; t < live; ++t) (*mask)[i * len + t] = 1;
                      }
                      Tensor seq = param(r, {rows, len, d}), c = constant(r, {rows, len, 2 * h});
                      Case k = simple([=] { return sum(mul(bigru(seq, *mask, f, b), c)); },
                                      {{"seq", seq}, {"fwd.w", f.w}, {"fwd.u", f.u}, {"fwd.b", f.b}, {"bwd.w", b.w},
                                       {"bwd.u", b.u}, {"bwd.b", b.b}});
                      k.keep_alive = mask;
                      return k;
                    },
                    Check::primitive});
  checks.push_back({"attention",
                    [](Rng& r) {
                      const std::size_t rows = pick(r, 1, 3), len = pick(r, 1, 5), d = pick(r, 1, 4), a = pick(r, 1, 4);
                      AttentionParams p = init_attention(d, a, r);
                      for (real& v : p.context.mutable_data()) v = r.uniform(-1.0, 1.0);
                      auto mask = std::make_shared<Mask>(rows * len, 0);
                      for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t t = 0; t < len; ++t) (*mask)[i * len + t] = r.bernoulli(0.7);
                        (*mask)[i * len + r.below(len)] = 1;
                      }
                      Tensor h = param(r, {rows, len, d}), c = constant(r, {rows, d});
                      Case k = simple([=] { return sum(mul(attention(h, p, *mask).summary, c)); },
                                      {{"h", h}, {"w", p.w}, {"b", p.b}, {"context", p.context}});
                      k.keep_alive = mask;
                      return k;
                    },
                    Check::primitive});

  checks.push_back({"cnn",
                    [](Rng& r) {
                      CnnConfig cfg = tiny_model_config({"a", "b"}).cnn;
                      cfg.blocks[0].dropout_p = 0.3;
                      auto p = std::make_shared<CnnParams>(init_cnn(cfg, r));
                      Tensor x = constant(r, {2, cfg.input_mels, cfg.input_frames});
                      Tensor c = constant(r, {2, cfg.feature_dim});
                      const std::uint64_t mask_seed = r.next_u64();
                      std::vector<NamedTensor> params;
                      for (std::size_t i = 0; i < p->blocks.size(); ++i) {
                        const std::string n = "block" + std::to_string(i);
                        params.push_back({n + ".kernel", p->blocks[i].kernel});
                        params.push_back({n + ".gamma", p->blocks[i].gamma});
                        params.push_back({n + ".beta", p->blocks[i].beta});
                      }
                      params.push_back({"proj.w", p->proj_weight});
                      params.push_back({"proj.b", p->proj_bias});
                      Case k = simple(
                          [=] {
                            std::vector<RunningStats> saved;
                            for (auto& b : p->blocks) saved.push_back(b.stats);
                            Rng drop(mask_seed);
                            Tensor y = cnn_forward(x, cfg, *p, Mode::train, drop);
                            for (std::size_t i = 0; i < saved.size(); ++i) p->blocks[i].stats = saved[i];
                            return sum(mul(y, c));
                          },
                          params);
                      k.keep_alive = p;
                      return k;
                    },
                    Check::encoder});
  checks.push_back({"han",
                    [](Rng& r) {
                      const ModelConfig cfg = tiny_model_config({"a", "b"});
                      const Vocab vocab = synthetic_vocab(2);
                      auto grids = std::make_shared<std::vector<TokenGrid>>();
                      for (std::size_t i = 0; i < 3; ++i) {
                        grids->push_back(encode_lyrics(synthetic_lyrics(i % 2, r), vocab, cfg.max_sentences, cfg.max_words));
                      }
                      Tensor table = random_embeddings(vocab, cfg.han.embed_dim, r).table;
                      const HanParams p = init_han(cfg.han, r);
                      Tensor c = constant(r, {grids->size(), cfg.han.output_dim()});
                      std::vector<NamedTensor> params{{"embeddings", table}};
                      for (auto [name, g] : {std::pair{"word_fwd", &p.word_fwd}, {"word_bwd", &p.word_bwd},
                                             {"sent_fwd", &p.sent_fwd}, {"sent_bwd", &p.sent_bwd}}) {
                        params.push_back({std::string(name) + ".w", g->w});
                        params.push_back({std::string(name) + ".u", g->u});
                        params.push_back({std::string(name) + ".b", g->b});
                      }
                      for (auto [name, a] : {std::pair{"word_att", &p.word_att}, {"sent_att", &p.sent_att}}) {
                        params.push_back({std::string(name) + ".w", a->w});
                        params.push_back({std::string(name) + ".b", a->b});
                        params.push_back({std::string(name) + ".context", a->context});
                      }
                      // Random point instead of the initialization; see the model check.
                      for (auto& [name, t] : params)
                        for (real& v : t.mutable_data()) v = r.uniform(-1.0, 1.0);
                      const HanConfig hcfg = cfg.han;
                      Case k = simple(
                          [=] {
                            std::vector<const TokenGrid*> ptrs;
                            for (const auto& g : *grids) ptrs.push_back(&g);
                            return sum(mul(han_forward_batch(ptrs, table, hcfg, p).songs, c));
                          },
                          params);
                      k.keep_alive = grids;
                      return k;
                    },
                    Check::encoder});
  checks.push_back({"model",
                    [](Rng& r) {
                      const ModelConfig cfg = tiny_model_config({"a", "b", "c"});
                      const Vocab vocab = synthetic_vocab(3);
                      auto samples = std::make_shared<std::vector<Sample>>(synthetic_samples(cfg, vocab, 2, r.next_u64()));
                      (*samples)[1].has_audio = false;  // lyrics only
                      (*samples)[4].lyrics = encode_lyrics("", vocab, cfg.max_sentences, cfg.max_words);  // audio only
                      auto model = std::make_shared<Model>(cfg, random_embeddings(vocab, cfg.han.embed_dim, r).table, r);
                      // The lyrics branch and the head are checked at a random point
                      // rather than at the initialization, whose small weights
                      // shrink some gradients into the roundoff floor of the central
                      // difference. The CNN keeps its initialization: random
                      // batchnorm shifts can leave a channel entirely above the
                      // relu, which makes its beta gradient structurally zero.
                      for (auto& [name, t] : model->parameters()) {
                        if (name.rfind("cnn.", 0) == 0) continue;
                        for (real& v : t.mutable_data()) v = r.uniform(-1.0, 1.0);
                      }
                      std::vector<int> labels;
                      for (const auto& s : *samples) labels.push_back(s.label);
                      Case k = simple(
                          [=] {
                            std::vector<RunningStats> saved;
                            for (RunningStats* s : model->running_stats()) saved.push_back(*s);
                            std::vector<const Sample*> ptrs;
                            for (const auto& s : *samples) ptrs.push_back(&s);
                            Rng drop(7);
                            Tensor logits = model->forward(ptrs, Mode::train, drop).logits;
                            auto stats = model->running_stats();
                            for (std::size_t i = 0; i < saved.size(); ++i) *stats[i] = saved[i];
                            return softmax_cross_entropy(logits, labels);
                          },
                          model->parameters());
                      k.keep_alive = std::make_shared<std::pair<decltype(model), decltype(samples)>>(model, samples);
                      return k;
                    },
                    Check::model});
  return checks;
}

void collect_ops(const Tensor& root, std::set<OpKind>& out) {
  std::vector<detail::Node*> stack{root.node()};
  std::unordered_set<detail::Node*> seen{root.node()};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (n->op != OpKind::leaf) out.insert(n->op);
    for (const auto& in : n->inputs) {
      if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
}

}  // namespace

std::vector<std::string> gradcheck_suite_names() {
  std::vector<std::string> names;
  for (const auto& c : registry()) names.push_back(c.name);
  return names;
}

SuiteReport run_gradcheck_suite(const SuiteOptions& opts) {
  SuiteReport report;
  std::set<OpKind> covered;
  for (const Check& check : registry()) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), check.name) == opts.only.end()) continue;
    SuiteEntry entry;
    entry.name = check.name;
    entry.seeds = check.kind == Check::primitive ? opts.primitive_seeds
                  : check.kind == Check::encoder ? opts.encoder_seeds
                                                 : opts.model_seeds;
    std::set<OpKind> ops;
    for (std::size_t i = 0; i < entry.seeds; ++i) {
      const std::uint64_t seed = opts.seed + i;
      // Distinct streams per check so adding a check does not shift others.
      Rng rng(fnv1a(check.name) ^ (seed * 0x9e3779b97f4a7c15ULL));
      // Fixtures drawn next to a relu or max-pool kink are redrawn: a central
      // difference across a kink measures neither one-sided derivative.
      Case c = check.make(rng);
      for (int attempt = 1; attempt < kMaxRedraws && kink_margin(c.loss()) < kKinkMargin; ++attempt) c = check.make(rng);
      collect_ops(c.loss(), ops);
      const GradCheckResult r = grad_check(c.loss, c.params, opts.eps, 1000, seed);
      if (i == 0 || r.max_rel_error > entry.worst.max_rel_error) {
        entry.worst = r;
        entry.worst_seed = seed;
      }
    }
    entry.ops.assign(ops.begin(), ops.end());
    entry.passed = entry.worst.max_rel_error < opts.tolerance;
    covered.insert(ops.begin(), ops.end());
    if (report.entries.empty() || entry.worst.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.worst.max_rel_error;
      report.worst_check = entry.name;
    }
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  report.covered.assign(covered.begin(), covered.end());

  if (!report.passed) {
    std::set<OpKind> common(covered);
    for (const auto& e : report.entries) {
      if (e.passed) continue;
      std::set<OpKind> keep;
      for (OpKind op : e.ops)
        if (common.count(op)) keep.insert(op);
      common = std::move(keep);
    }
    for (OpKind op : common) {
      const auto it = std::find_if(report.entries.begin(), report.entries.end(),
                                   [&](const SuiteEntry& e) { return e.name == op_name(op); });
      if (it != report.entries.end() && !it->passed) report.suspects.push_back(op);
    }
  }
  return report;
}

std::string format_suite_report(const SuiteReport& report, const SuiteOptions& opts) {
  std::string out;
  char buf[512];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%-4s %-22s seeds=%-4zu max_rel_err=%.3e worst=%s[%zu] (%.6g vs %.6g) seed=%llu\n",
                  e.passed ? "ok" : "FAIL", e.name.c_str(), e.seeds, e.worst.max_rel_error, e.worst.worst_param.c_str(),
                  e.worst.worst_index, e.worst.worst_analytic, e.worst.worst_numeric,
                  static_cast<unsigned long long>(e.worst_seed));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "coverage: %zu/%zu op kinds\n", report.covered.size(), kNumOps);
  out += buf;
  if (report.covered.size() != kNumOps) {
    out += "not covered:";
    for (int k = 1; k <= static_cast<int>(kNumOps); ++k) {
      const auto op = static_cast<OpKind>(k);
      if (std::find(report.covered.begin(), report.covered.end(), op) == report.covered.end()) {
        out += ' ';
        out += op_name(op);
      }
    }
    out += '\n';
  }
  std::snprintf(buf, sizeof buf, "max relative error %.3e in %s (tolerance %.0e)\n", report.max_rel_error,
                report.worst_check.c_str(), opts.tolerance);
  out += buf;
  if (!report.passed) {
    out += "worst offender op:";
    if (report.suspects.empty()) out += " " + report.worst_check;
    for (OpKind op : report.suspects) {
      out += ' ';
      out += op_name(op);
    }
    out += '\n';
  }
  out += report.passed ? "gradcheck passed\n" : "gradcheck FAILED\n";
  return out;
}

}  // namespace genre
