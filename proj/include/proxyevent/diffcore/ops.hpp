#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "proxyevent/diffcore/tensor.hpp"

namespace proxyevent::diffcore {

/// Probabilities below this are clamped before taking logs.
inline constexpr double kLogFloor = 1e-12;

namespace detail {

inline bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

inline bool tracking(std::span<const Tensor> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

template <class Fn>
void record(Tensor& out, Fn&& fn) {
  out.set_requires_grad(true);
  active_tape()->record(out.shared(), std::forward<Fn>(fn));
}

inline std::vector<double>& grad_of(const std::shared_ptr<TensorImpl>& t) {
  t->ensure_grad();
  return t->grad;
}

[[noreturn]] inline void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

enum class Broadcast { Same, Row, Scalar };

inline Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (b.numel() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  shape_mismatch(op, a, b);
}

inline std::size_t bindex(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::Same: return i;
    case Broadcast::Row: return i % cols;
    case Broadcast::Scalar: return 0;
  }
  return 0;
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  Tensor out = Tensor::zeros(x.shape());
  auto& y = out.data();
  const auto& xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = fwd(xv[i]);
  if (tracking({&x})) {
    record(out, [xs = x.shared(), os = out.shared(), deriv] {
      auto& gx = grad_of(xs);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += os->grad[i] * deriv(xs->data[i], os->data[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) detail::shape_mismatch("matmul", a, b);
  Tensor out = Tensor::zeros({m, n});
  auto& y = out.data();
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* yrow = y.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) yrow[j] += aip * brow[j];
    }
  }
  if (detail::tracking({&a, &b})) {
    detail::record(out, [as = a.shared(), bs = b.shared(), os = out.shared(), m, k, n] {
      const auto& g = os->grad;
      if (as->requires_grad) {
        auto& ga = detail::grad_of(as);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bs->data[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (bs->requires_grad) {
        auto& gb = detail::grad_of(bs);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = as->data[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    });
  }
  return out;
}

// Elementwise binary ops. `b` may match `a` exactly, be a 1 x cols row
// broadcast over every row of `a`, or be a single value.

inline Tensor add(const Tensor& a, const Tensor& b) {
  const auto kind = detail::broadcast_kind("add", a, b);
  const std::size_t c = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[detail::bindex(kind, i, c)];
  if (detail::tracking({&a, &b})) {
    detail::record(out, [as = a.shared(), bs = b.shared(), os = out.shared(), kind, c] {
      const auto& g = os->grad;
      if (as->requires_grad) {
        auto& ga = detail::grad_of(as);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bs->requires_grad) {
        auto& gb = detail::grad_of(bs);
        for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex(kind, i, c)] += g[i];
      }
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  const auto kind = detail::broadcast_kind("sub", a, b);
  const std::size_t c = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[detail::bindex(kind, i, c)];
  if (detail::tracking({&a, &b})) {
    detail::record(out, [as = a.shared(), bs = b.shared(), os = out.shared(), kind, c] {
      const auto& g = os->grad;
      if (as->requires_grad) {
        auto& ga = detail::grad_of(as);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bs->requires_grad) {
        auto& gb = detail::grad_of(bs);
        for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex(kind, i, c)] -= g[i];
      }
    });
  }
  return out;
}

/// Hadamard product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  const auto kind = detail::broadcast_kind("mul", a, b);
  const std::size_t c = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[detail::bindex(kind, i, c)];
  if (detail::tracking({&a, &b})) {
    detail::record(out, [as = a.shared(), bs = b.shared(), os = out.shared(), kind, c] {
      const auto& g = os->grad;
      if (as->requires_grad) {
        auto& ga = detail::grad_of(as);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bs->data[detail::bindex(kind, i, c)];
      }
      if (bs->requires_grad) {
        auto& gb = detail::grad_of(bs);
        for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex(kind, i, c)] += g[i] * as->data[i];
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& x, double factor) {
  return detail::unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x,
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

/// Exact GELU, x * Phi(x).
inline Tensor gelu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v * detail::std_normal_cdf(v); },
      [](double v, double) { return detail::std_normal_cdf(v) + v * detail::std_normal_pdf(v); });
}

/// Softmax over the last axis (each row independently).
inline Tensor softmax(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  auto& y = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = x.data().data() + i * c;
    double* yr = y.data() + i * c;
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < c; ++j) yr[j] /= z;
  }
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), r, c] {
      auto& gx = detail::grad_of(xs);
      for (std::size_t i = 0; i < r; ++i) {
        const double* yr = os->data.data() + i * c;
        const double* gr = os->grad.data() + i * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data()[j * r + i] = x.data()[i * c + j];
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), r, c] {
      auto& gx = detail::grad_of(xs);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += os->grad[j * r + i];
    });
  }
  return out;
}

/// Horizontal concatenation [a ; b ; ...] of equal-row tensors.
inline Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) detail::shape_mismatch("concat_cols", parts[0], p);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out = Tensor::zeros({r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(parts[k].data().data() + i * widths[k], widths[k], out.data().data() + i * total + off);
    off += widths[k];
  }
  if (detail::tracking(parts)) {
    std::vector<std::shared_ptr<TensorImpl>> ins;
    for (const auto& p : parts) ins.push_back(p.shared());
    detail::record(out, [ins, widths, os = out.shared(), r, total] {
      std::size_t off = 0;
      for (std::size_t k = 0; k < ins.size(); ++k) {
        if (ins[k]->requires_grad) {
          auto& g = detail::grad_of(ins[k]);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += os->grad[i * total + off + j];
        }
        off += widths[k];
      }
    });
  }
  return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(parts);
}

/// Vertical stacking of equal-width tensors.
inline Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) detail::shape_mismatch("concat_rows", parts[0], p);
    total += p.rows();
  }
  Tensor out = Tensor::zeros({total, c});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.numel();
  }
  if (detail::tracking(parts)) {
    std::vector<std::shared_ptr<TensorImpl>> ins;
    for (const auto& p : parts) ins.push_back(p.shared());
    detail::record(out, [ins, os = out.shared()] {
      std::size_t off = 0;
      for (const auto& in : ins) {
        if (in->requires_grad) {
          auto& g = detail::grad_of(in);
          for (std::size_t i = 0; i < in->data.size(); ++i) g[i] += os->grad[off + i];
        }
        off += in->data.size();
      }
    });
  }
  return out;
}

inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.rows())
    throw DimensionError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         shape_str(x.shape()));
  const std::size_t c = x.cols();
  Tensor out = Tensor::from({end - begin, c}, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                                                                 x.data().begin() + static_cast<std::ptrdiff_t>(end * c)));
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), off = begin * c] {
      auto& g = detail::grad_of(xs);
      for (std::size_t i = 0; i < os->grad.size(); ++i) g[off + i] += os->grad[i];
    });
  }
  return out;
}

inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.cols())
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         shape_str(x.shape()));
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  Tensor out = Tensor::zeros({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out.data()[i * w + j] = x.data()[i * c + begin + j];
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), r, c, w, begin] {
      auto& g = detail::grad_of(xs);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += os->grad[i * w + j];
    });
  }
  return out;
}

/// out[i] = x[index[i]]
inline Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  const std::size_t c = x.cols(), r = x.rows();
  Tensor out = Tensor::zeros({index.size(), c});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= r) throw IndexError("gather_rows: row " + std::to_string(index[i]) + " out of range " + shape_str(x.shape()));
    std::copy_n(x.data().data() + index[i] * c, c, out.data().data() + i * c);
  }
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), idx = std::vector<std::size_t>(index.begin(), index.end()), c] {
      auto& g = detail::grad_of(xs);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += os->grad[i * c + j];
    });
  }
  return out;
}

/// out[index[i]] += x[i], with `rows` output rows.
inline Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t rows) {
  if (index.size() != x.rows())
    throw DimensionError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " + shape_str(x.shape()));
  const std::size_t c = x.cols();
  Tensor out = Tensor::zeros({rows, c});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw IndexError("scatter_add_rows: target row " + std::to_string(index[i]) + " >= " + std::to_string(rows));
    for (std::size_t j = 0; j < c; ++j) out.data()[index[i] * c + j] += x.data()[i * c + j];
  }
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), idx = std::vector<std::size_t>(index.begin(), index.end()), c] {
      auto& g = detail::grad_of(xs);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += os->grad[idx[i] * c + j];
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared()] {
      auto& g = detail::grad_of(xs);
      for (double& gi : g) gi += os->grad[0];
    });
  }
  return out;
}

inline Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

/// Column-wise mean over rows: (r x c) -> (1 x c).
inline Tensor mean_rows(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  if (r == 0) throw DimensionError("mean_rows of tensor with no rows");
  Tensor out = Tensor::zeros({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data()[j] += x.data()[i * c + j];
  for (double& v : out.data()) v /= static_cast<double>(r);
  if (detail::tracking({&x})) {
    detail::record(out, [xs = x.shared(), os = out.shared(), r, c] {
      auto& g = detail::grad_of(xs);
      const double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += os->grad[j] * inv;
    });
  }
  return out;
}

/// Weighted negative log-likelihood over probability rows:
/// sum_r weight[r] * -log(max(p[r, target[r]], floor)).
inline Tensor nll_rows(const Tensor& probs, std::span<const std::size_t> target, std::span<const double> weight) {
  const std::size_t r = probs.rows(), c = probs.cols();
  if (target.size() != r || weight.size() != r)
    throw DimensionError("nll_rows: " + std::to_string(target.size()) + " targets for " + shape_str(probs.shape()));
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (target[i] >= c) throw IndexError("class index " + std::to_string(target[i]) + " out of range [0," + std::to_string(c) + ")");
    total += -weight[i] * std::log(std::max(probs.data()[i * c + target[i]], kLogFloor));
  }
  Tensor out = Tensor::scalar(total);
  if (detail::tracking({&probs})) {
    detail::record(out, [ps = probs.shared(), os = out.shared(), t = std::vector<std::size_t>(target.begin(), target.end()),
                         w = std::vector<double>(weight.begin(), weight.end()), c] {
      auto& g = detail::grad_of(ps);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double p = ps->data[i * c + t[i]];
        if (p > kLogFloor) g[i * c + t[i]] -= os->grad[0] * w[i] / p;
      }
    });
  }
  return out;
}

/// -log p[gold] for a single probability row.
inline Tensor cross_entropy(const Tensor& probs, std::size_t gold) {
  if (probs.rows() != 1) throw DimensionError("cross_entropy expects one probability row, got " + shape_str(probs.shape()));
  const std::size_t t[] = {gold};
  const double w[] = {1.0};
  return nll_rows(probs, t, w);
}

/// Summed binary cross-entropy of probabilities against 0/1 labels.
inline Tensor binary_cross_entropy(const Tensor& probs, std::span<const double> labels) {
  if (labels.size() != probs.numel())
    throw DimensionError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for " + shape_str(probs.shape()));
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs.data()[i];
    total -= labels[i] * std::log(std::max(p, kLogFloor)) + (1.0 - labels[i]) * std::log(std::max(1.0 - p, kLogFloor));
  }
  Tensor out = Tensor::scalar(total);
  if (detail::tracking({&probs})) {
    detail::record(out, [ps = probs.shared(), os = out.shared(), y = std::vector<double>(labels.begin(), labels.end())] {
      auto& g = detail::grad_of(ps);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = ps->data[i];
        double d = 0.0;
        if (p > kLogFloor) d -= y[i] / p;
        if (1.0 - p > kLogFloor) d += (1.0 - y[i]) / (1.0 - p);
        g[i] += os->grad[0] * d;
      }
    });
  }
  return out;
}

inline Tensor add_all(std::span<const Tensor> terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  Tensor acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

}  // namespace proxyevent::diffcore
