#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "proxyevent/diffcore/ops.hpp"

namespace testsupport {

using proxyevent::diffcore::Tensor;

/// One randomized gradient-check problem: leaves to perturb and a scalar
/// loss built from them.
struct OpProblem {
  std::vector<Tensor> leaves;
  std::function<Tensor()> loss;
};

struct OpCase {
  std::string name;
  std::function<OpProblem(std::mt19937_64&)> make;
};

inline Tensor uniform(proxyevent::diffcore::Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(proxyevent::diffcore::numel_of(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

inline std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Contracts an op output to a scalar with fixed random weights so every
/// output entry gets a distinct upstream gradient.
inline std::function<Tensor()> weighted(std::function<Tensor()> f, const Tensor& probe, std::mt19937_64& rng) {
  Tensor r = uniform(probe.shape(), rng);
  r.set_requires_grad(false);
  return [f = std::move(f), r] { return proxyevent::diffcore::sum(proxyevent::diffcore::mul(f(), r)); };
}

/// Every differentiable operation in diffcore, including broadcasting
/// variants, as a randomized gradient-check problem.
inline std::vector<OpCase> op_cases() {
  using namespace proxyevent::diffcore;
  std::vector<OpCase> cases;
  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> op) {
    cases.push_back({std::move(name), [op](std::mt19937_64& rng) {
                       Tensor x = uniform({dim(rng), dim(rng)}, rng);
                       auto f = [op, x] { return op(x); };
                       return OpProblem{{x}, weighted(f, f(), rng)};
                     }});
  };
  auto binary = [&](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, int broadcast) {
    cases.push_back({std::move(name), [op, broadcast](std::mt19937_64& rng) {
                       const std::size_t r = dim(rng), c = dim(rng);
                       Tensor a = uniform({r, c}, rng);
                       Tensor b = broadcast == 0 ? uniform({r, c}, rng) : broadcast == 1 ? uniform({1, c}, rng) : uniform({1, 1}, rng);
                       auto f = [op, a, b] { return op(a, b); };
                       return OpProblem{{a, b}, weighted(f, f(), rng)};
                     }});
  };

  cases.push_back({"matmul", [](std::mt19937_64& rng) {
                     Tensor a = uniform({dim(rng), dim(rng)}, rng);
                     Tensor b = uniform({a.cols(), dim(rng)}, rng);
                     auto f = [a, b] { return matmul(a, b); };
                     return OpProblem{{a, b}, weighted(f, f(), rng)};
                   }});
  for (int bc = 0; bc < 3; ++bc) {
    const std::string suffix = bc == 0 ? "" : bc == 1 ? "_row" : "_scalar";
    binary("add" + suffix, [](const Tensor& a, const Tensor& b) { return add(a, b); }, bc);
    binary("sub" + suffix, [](const Tensor& a, const Tensor& b) { return sub(a, b); }, bc);
    binary("mul" + suffix, [](const Tensor& a, const Tensor& b) { return mul(a, b); }, bc);
  }
  unary("scale", [](const Tensor& x) { return scale(x, -1.7); });
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  unary("gelu", [](const Tensor& x) { return gelu(x); });
  unary("softmax", [](const Tensor& x) { return softmax(x); });
  unary("transpose", [](const Tensor& x) { return transpose(x); });
  unary("mean_rows", [](const Tensor& x) { return mean_rows(x); });
  unary("sum", [](const Tensor& x) { return sum(x); });
  unary("mean", [](const Tensor& x) { return mean(x); });
  unary("slice_rows", [](const Tensor& x) { return slice_rows(x, x.rows() / 2, x.rows()); });
  unary("slice_cols", [](const Tensor& x) { return slice_cols(x, 0, (x.cols() + 1) / 2); });
  cases.push_back({"concat_cols", [](std::mt19937_64& rng) {
                     const std::size_t r = dim(rng);
                     Tensor a = uniform({r, dim(rng)}, rng), b = uniform({r, dim(rng)}, rng), c = uniform({r, dim(rng)}, rng);
                     auto f = [a, b, c] {
                       const std::vector<Tensor> parts{a, b, c};
                       return concat_cols(parts);
                     };
                     return OpProblem{{a, b, c}, weighted(f, f(), rng)};
                   }});
  cases.push_back({"concat_rows", [](std::mt19937_64& rng) {
                     const std::size_t c = dim(rng);
                     Tensor a = uniform({dim(rng), c}, rng), b = uniform({dim(rng), c}, rng);
                     auto f = [a, b] {
                       const std::vector<Tensor> parts{a, b};
                       return concat_rows(parts);
                     };
                     return OpProblem{{a, b}, weighted(f, f(), rng)};
                   }});
  cases.push_back({"gather_rows", [](std::mt19937_64& rng) {
                     Tensor x = uniform({dim(rng), dim(rng)}, rng);
                     std::vector<std::size_t> idx(dim(rng, 1, 6));
                     for (auto& i : idx) i = dim(rng, 0, x.rows() - 1);
                     auto f = [x, idx] { return gather_rows(x, idx); };
                     return OpProblem{{x}, weighted(f, f(), rng)};
                   }});
  cases.push_back({"scatter_add_rows", [](std::mt19937_64& rng) {
                     Tensor x = uniform({dim(rng, 1, 6), dim(rng)}, rng);
                     const std::size_t rows = dim(rng);
                     std::vector<std::size_t> idx(x.rows());
                     for (auto& i : idx) i = dim(rng, 0, rows - 1);
                     auto f = [x, idx, rows] { return scatter_add_rows(x, idx, rows); };
                     return OpProblem{{x}, weighted(f, f(), rng)};
                   }});
  cases.push_back({"nll_rows", [](std::mt19937_64& rng) {
                     Tensor logits = uniform({dim(rng), dim(rng, 2, 5)}, rng);
                     std::vector<std::size_t> t(logits.rows());
                     std::vector<double> w(logits.rows());
                     for (std::size_t i = 0; i < t.size(); ++i) {
                       t[i] = dim(rng, 0, logits.cols() - 1);
                       w[i] = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
                     }
                     return OpProblem{{logits}, [logits, t, w] { return nll_rows(softmax(logits), t, w); }};
                   }});
  cases.push_back({"cross_entropy", [](std::mt19937_64& rng) {
                     Tensor logits = uniform({1, dim(rng, 2, 6)}, rng);
                     const std::size_t gold = dim(rng, 0, logits.cols() - 1);
                     return OpProblem{{logits}, [logits, gold] { return cross_entropy(softmax(logits), gold); }};
                   }});
  cases.push_back({"binary_cross_entropy", [](std::mt19937_64& rng) {
                     Tensor logits = uniform({dim(rng, 1, 6), 1}, rng);
                     std::vector<double> y(logits.rows());
                     for (auto& v : y) v = static_cast<double>(dim(rng, 0, 1));
                     return OpProblem{{logits}, [logits, y] { return binary_cross_entropy(sigmoid(logits), y); }};
                   }});
  cases.push_back({"add_all", [](std::mt19937_64& rng) {
                     const std::size_t r = dim(rng), c = dim(rng);
                     Tensor a = uniform({r, c}, rng), b = uniform({r, c}, rng), d = uniform({r, c}, rng);
                     auto f = [a, b, d] {
                       const std::vector<Tensor> terms{a, b, d};
                       return add_all(terms);
                     };
                     return OpProblem{{a, b, d}, weighted(f, f(), rng)};
                   }});
  return cases;
}

}  // namespace testsupport
