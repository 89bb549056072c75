#include "gradcheck.hpp"

#include "nae/dataset.hpp"
#include "nae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nae::testkit {

GradCheckResult check_gradients(const std::function<Tensor()> &loss,
                                const std::vector<NamedLeaf> &leaves,
                                const GradCheckOptions &options) {
  for (const NamedLeaf &leaf : leaves) {
    Tensor(leaf.tensor).zero_grad();
  }
  loss().backward();
  std::vector<Matrix> analytic;
  for (const NamedLeaf &leaf : leaves) {
    analytic.push_back(leaf.tensor.grad());
  }

  NoGradGuard no_grad;
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Tensor leaf = leaves[l].tensor;
    const Matrix &a = analytic[l];
    std::vector<Index> coords(static_cast<std::size_t>(a.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords > 0 && coords.size() > options.max_coords) {
      const std::size_t largest = options.max_coords / 2;
      std::stable_sort(coords.begin(), coords.end(), [&](Index x, Index y) {
        return std::abs(a.data()[x]) > std::abs(a.data()[y]);
      });
      std::shuffle(coords.begin() + static_cast<std::ptrdiff_t>(largest), coords.end(), rng);
      coords.resize(options.max_coords);
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (Index c : coords) {
      double &v = leaf.mutable_value().data()[c];
      const double saved = v;
      v = saved + options.step;
      const double up = loss().item();
      v = saved - options.step;
      const double down = loss().item();
      v = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double an = a.data()[c];
      diff2 += (an - numeric) * (an - numeric);
      a2 += an * an;
      n2 += numeric * numeric;
    }
    result.coordinates += coords.size();
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), options.floor});
    const double err = std::sqrt(diff2) / denom;
    if (result.worst.empty() || err > result.max_error) {
      result.max_error = err;
      result.worst = leaves[l].name;
    }
  }
  return result;
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = normal(rng);
  }
  return m;
}

namespace {

struct Draw {
  std::mt19937_64 rng;
  std::uint64_t next_seed() { return rng(); }
  Index extent(Index lo = 1, Index hi = 4) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  }
  Tensor leaf(Index r, Index c, double scale = 1.0) {
    return Tensor(random_matrix(r, c, next_seed(), scale), true);
  }
};

// Contracts an arbitrary output with fixed random weights so every output
// entry contributes to the scalar.
Tensor project(const Tensor &out, std::uint64_t seed) {
  return sum(mul(out, Tensor(random_matrix(out.rows(), out.cols(), seed))));
}

GradCheckResult run(const std::vector<NamedLeaf> &leaves, const std::function<Tensor()> &f,
                    std::uint64_t seed) {
  GradCheckOptions o;
  o.seed = seed;
  return check_gradients(f, leaves, o);
}

template <typename F> OpCase unary(std::string name, F op, double scale = 1.0) {
  return {name, [op, scale](std::uint64_t seed) {
            Draw d{std::mt19937_64(seed)};
            Tensor a = d.leaf(d.extent(), d.extent(), scale);
            const auto w = d.next_seed();
            return run({{"a", a}}, [=] { return project(op(a), w); }, seed);
          }};
}

template <typename F> OpCase binary_same(std::string name, F op) {
  return {name, [op](std::uint64_t seed) {
            Draw d{std::mt19937_64(seed)};
            const Index r = d.extent(), c = d.extent();
            Tensor a = d.leaf(r, c), b = d.leaf(r, c);
            const auto w = d.next_seed();
            return run({{"a", a}, {"b", b}}, [=] { return project(op(a, b), w); }, seed);
          }};
}

std::vector<OpCase> build_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"matmul", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), k = d.extent(), c = d.extent();
                     Tensor a = d.leaf(r, k), b = d.leaf(k, c);
                     const auto w = d.next_seed();
                     return run({{"a", a}, {"b", b}}, [=] { return project(matmul(a, b), w); },
                                seed);
                   }});
  cases.push_back(unary("transpose", [](const Tensor &a) { return transpose(a); }));
  cases.push_back(binary_same("add", [](const Tensor &a, const Tensor &b) { return add(a, b); }));
  cases.push_back(binary_same("sub", [](const Tensor &a, const Tensor &b) { return sub(a, b); }));
  cases.push_back(binary_same("mul", [](const Tensor &a, const Tensor &b) { return mul(a, b); }));
  cases.push_back({"add_row", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), c = d.extent();
                     Tensor a = d.leaf(r, c), row = d.leaf(1, c);
                     const auto w = d.next_seed();
                     return run({{"a", a}, {"row", row}},
                                [=] { return project(add_row(a, row), w); }, seed);
                   }});
  cases.push_back(unary("scale", [](const Tensor &a) { return scale(a, -1.7); }));
  cases.push_back({"scale_by", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     Tensor a = d.leaf(d.extent(), d.extent()), f = d.leaf(1, 1);
                     const auto w = d.next_seed();
                     return run({{"a", a}, {"factor", f}},
                                [=] { return project(scale_by(a, f), w); }, seed);
                   }});
  cases.push_back(unary("sum", [](const Tensor &a) { return sum(a); }));
  cases.push_back(unary("mean", [](const Tensor &a) { return mean(a); }));
  cases.push_back(unary("mean_rows", [](const Tensor &a) { return mean_rows(a); }));
  cases.push_back({"slice_rows", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(2, 5);
                     Tensor a = d.leaf(r, d.extent());
                     const Index start = d.extent(0, r - 1);
                     const Index count = d.extent(1, r - start);
                     const auto w = d.next_seed();
                     return run({{"a", a}}, [=] { return project(slice_rows(a, start, count), w); },
                                seed);
                   }});
  cases.push_back({"slice_cols", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index c = d.extent(2, 5);
                     Tensor a = d.leaf(d.extent(), c);
                     const Index start = d.extent(0, c - 1);
                     const Index count = d.extent(1, c - start);
                     const auto w = d.next_seed();
                     return run({{"a", a}}, [=] { return project(slice_cols(a, start, count), w); },
                                seed);
                   }});
  cases.push_back({"concat_rows", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index c = d.extent();
                     Tensor a = d.leaf(d.extent(), c), b = d.leaf(d.extent(), c);
                     const auto w = d.next_seed();
                     return run({{"a", a}, {"b", b}},
                                [=] {
                                  const Tensor parts[] = {a, b, a};
                                  return project(concat_rows(parts), w);
                                },
                                seed);
                   }});
  cases.push_back({"concat_cols", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent();
                     Tensor a = d.leaf(r, d.extent()), b = d.leaf(r, d.extent());
                     const auto w = d.next_seed();
                     return run({{"a", a}, {"b", b}},
                                [=] {
                                  const Tensor parts[] = {b, a};
                                  return project(concat_cols(parts), w);
                                },
                                seed);
                   }});
  cases.push_back({"gather_rows", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(2, 5);
                     Tensor table = d.leaf(r, d.extent());
                     std::vector<Index> idx;
                     for (Index i = 0, n = d.extent(1, 6); i < n; ++i) {
                       idx.push_back(d.extent(0, r - 1)); // repeats allowed
                     }
                     const auto w = d.next_seed();
                     return run({{"table", table}},
                                [=] { return project(gather_rows(table, idx), w); }, seed);
                   }});
  cases.push_back({"place_block", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), c = d.extent();
                     Tensor a = d.leaf(r, c);
                     const Index r0 = d.extent(0, 2), c0 = d.extent(0, 2);
                     const auto w = d.next_seed();
                     return run({{"a", a}},
                                [=] { return project(place_block(a, r + r0 + 1, c + c0, r0, c0, 0.5), w); },
                                seed);
                   }});
  cases.push_back(unary("gelu", [](const Tensor &a) { return gelu(a); }, 2.0));
  cases.push_back(unary("sigmoid", [](const Tensor &a) { return sigmoid(a); }, 2.0));
  cases.push_back({"layer_norm", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), c = d.extent(2, 6);
                     Tensor a = d.leaf(r, c), g = d.leaf(1, c), b = d.leaf(1, c);
                     const auto w = d.next_seed();
                     return run({{"a", a}, {"gain", g}, {"bias", b}},
                                [=] { return project(layer_norm(a, g, b), w); }, seed);
                   }});
  cases.push_back(unary("l2_normalize_rows", [](const Tensor &a) { return l2_normalize_rows(a); }));
  cases.push_back({"masked_softmax", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), c = d.extent(2, 5);
                     Tensor s = d.leaf(r, c), m = d.leaf(r, c);
                     BoolMatrix allowed(r, c);
                     std::bernoulli_distribution coin(0.7);
                     for (Index i = 0; i < r; ++i) {
                       for (Index j = 0; j < c; ++j) {
                         allowed(i, j) = coin(d.rng);
                       }
                       allowed(i, d.extent(0, c - 1)) = true;
                     }
                     const auto w = d.next_seed();
                     return run({{"scores", s}, {"raw_multiplier", m}},
                                [=] {
                                  const Tensor mult = sigmoid(m);
                                  return project(masked_softmax(s, &allowed, &mult), w);
                                },
                                seed);
                   }});
  cases.push_back({"cross_entropy", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), c = d.extent(2, 6);
                     Tensor logits = d.leaf(r, c, 2.0);
                     std::vector<Index> targets;
                     for (Index i = 0; i < r; ++i) {
                       targets.push_back(d.extent(0, c - 1));
                     }
                     return run({{"logits", logits}},
                                [=] { return cross_entropy(logits, targets); }, seed);
                   }});
  cases.push_back({"mse", [](std::uint64_t seed) {
                     Draw d{std::mt19937_64(seed)};
                     const Index r = d.extent(), c = d.extent();
                     Tensor p = d.leaf(r, c);
                     const Matrix target = random_matrix(r, c, d.next_seed());
                     return run({{"pred", p}}, [=] { return mse(p, target); }, seed);
                   }});
  return cases;
}

} // namespace

const std::vector<OpCase> &op_cases() {
  static const std::vector<OpCase> cases = build_cases();
  return cases;
}

RunConfig tiny_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.feature_dim = 4;
  c.width = 8;
  c.heads = 2;
  c.decoder_layers = 1;
  c.ffn_width = 8;
  c.head_hidden = 6;
  c.video_tokens = 3;
  c.intervals = 2;
  c.prompt_slots = 2;
  c.template_slots = 1;
  c.n_train = 4;
  c.n_test = 1;
  c.noise_sigma = 0.1;
  return c;
}

GradCheckResult check_model_gradients(std::uint64_t seed, std::size_t coords_per_leaf) {
  const RunConfig cfg = tiny_config(seed);
  const Dataset data = generate_dataset(cfg);
  std::vector<double> scores;
  for (const Sample &s : data.train) {
    scores.push_back(s.score);
  }
  NaeModel model(cfg, ScoreSpace::from_scores(scores, cfg.intervals));
  // Move gamma, the logit scale and the raw mask off their initial values so
  // the check is not taken at a special point.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (Parameter &p : model.store().parameters()) {
    Matrix &v = p.tensor.mutable_value();
    for (Index i = 0; i < v.size(); ++i) {
      v.data()[i] += 0.1 * jitter(rng);
    }
  }
  std::vector<NamedLeaf> leaves;
  for (const Parameter &p : model.store().parameters()) {
    leaves.push_back({p.name, p.tensor});
  }
  const Sample &sample = data.train[seed % data.train.size()];
  GradCheckOptions o;
  o.seed = seed;
  o.max_coords = coords_per_leaf;
  return check_gradients(
      [&] {
        const PromptEmbeddings prompts = model.encode_prompts();
        return add(model.losses(sample, prompts).total, model.sparse(cfg.lambda_sparse));
      },
      leaves, o);
}

} // namespace nae::testkit
