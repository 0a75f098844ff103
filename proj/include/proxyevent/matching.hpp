#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "proxyevent/datakit/document.hpp"
#include "proxyevent/decoder.hpp"
#include "proxyevent/diffcore/ops.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent::matching {

using diffcore::Tensor;

/// Row-major matrix of pairwise distances; rows are predictions, columns
/// gold events.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  CostMatrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw DimensionError("cost matrix data length does not match " + std::to_string(r) + "x" + std::to_string(c));
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// column[r] is the gold column matched to prediction row r.
struct Assignment {
  std::vector<std::size_t> column;
  double cost = 0.0;
};

inline double assignment_cost(const CostMatrix& c, const std::vector<std::size_t>& column) {
  double total = 0.0;
  for (std::size_t r = 0; r < column.size(); ++r) total += c(r, column[r]);
  return total;
}

// ---------------------------------------------------------------------------
// Gold events

/// Gold events in label form, padded with null events up to the proxy count.
struct GoldEventSet {
  std::vector<std::size_t> types;               // per event; 0 for padded nulls
  std::vector<std::vector<std::size_t>> roles;  // per event, per unique entity; 0 = not an argument
  std::vector<bool> padded;
  std::size_t num_entities = 0;

  std::size_t size() const { return types.size(); }
  std::size_t num_real() const { return static_cast<std::size_t>(std::count(padded.begin(), padded.end(), false)); }
};

/// Label form of a document's gold events over its unique entities
/// (entities matched by surface string).
inline GoldEventSet gold_labels(const datakit::Document& doc, const Schema& schema,
                                const std::vector<std::string>& entity_surfaces) {
  GoldEventSet gold;
  gold.num_entities = entity_surfaces.size();
  for (const auto& ev : doc.events) {
    std::vector<std::size_t> roles(entity_surfaces.size(), kNullIndex);
    for (const auto& a : ev.arguments) {
      const std::string surface = doc.entity_surface(a.entity);
      auto it = std::find(entity_surfaces.begin(), entity_surfaces.end(), surface);
      if (it != entity_surfaces.end() && roles[static_cast<std::size_t>(it - entity_surfaces.begin())] == kNullIndex)
        roles[static_cast<std::size_t>(it - entity_surfaces.begin())] = schema.role_index(a.role);
    }
    gold.types.push_back(schema.type_index(ev.type));
    gold.roles.push_back(std::move(roles));
    gold.padded.push_back(false);
  }
  return gold;
}

/// Appends null events until the set has `n` members.
inline GoldEventSet pad_gold(GoldEventSet gold, std::size_t n) {
  if (gold.size() > n)
    throw ConfigError("document has " + std::to_string(gold.size()) + " gold events but only " + std::to_string(n) +
                      " proxies; increase the proxy count");
  while (gold.size() < n) {
    gold.types.push_back(kNullIndex);
    gold.roles.emplace_back(gold.num_entities, kNullIndex);
    gold.padded.push_back(true);
  }
  return gold;
}

// ---------------------------------------------------------------------------
// Distances

/// d(prediction i, gold j) = CE(type) + (1/|entities|) * sum_k CE(role of k),
/// taped so gradients reach both distributions.
inline Tensor pair_distance(const decoder::ProxyPredictions& pred, std::size_t proxy, const GoldEventSet& gold, std::size_t j) {
  using namespace diffcore;
  Tensor d = cross_entropy(slice_rows(pred.type_probs, proxy, proxy + 1), gold.types.at(j));
  if (pred.num_entities == 0) return d;
  std::vector<std::size_t> rows, targets;
  for (std::size_t k = 0; k < pred.num_entities; ++k) {
    rows.push_back(pred.arg_row(proxy, k));
    targets.push_back(gold.roles.at(j).at(k));
  }
  const std::vector<double> w(rows.size(), 1.0 / static_cast<double>(pred.num_entities));
  return add(d, nll_rows(gather_rows(pred.arg_probs, rows), targets, w));
}

/// Untaped full matrix of pair distances.
inline CostMatrix cost_matrix(const decoder::ProxyPredictions& pred, const GoldEventSet& gold) {
  if (gold.num_entities != pred.num_entities)
    throw DimensionError("gold labels cover " + std::to_string(gold.num_entities) + " entities, predictions " +
                         std::to_string(pred.num_entities));
  CostMatrix c(pred.num_proxies, gold.size());
  const double inv_e = pred.num_entities ? 1.0 / static_cast<double>(pred.num_entities) : 0.0;
  auto nll = [](double p) { return -std::log(std::max(p, diffcore::kLogFloor)); };
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      double arg = 0.0;
      for (std::size_t k = 0; k < pred.num_entities; ++k) arg += nll(pred.arg_probs.at(pred.arg_row(i, k), gold.roles[j][k]));
      c(i, j) = nll(pred.type_probs.at(i, gold.types[j])) + inv_e * arg;
    }
  return c;
}

/// Average Hausdorff distance: mean row-wise minimum plus mean column-wise minimum.
inline double avg_hausdorff(const CostMatrix& c) {
  if (c.rows == 0 || c.cols == 0) throw DimensionError("avg_hausdorff of an empty cost matrix");
  double rows = 0.0, cols = 0.0;
  for (std::size_t r = 0; r < c.rows; ++r) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.cols; ++j) m = std::min(m, c(r, j));
    rows += m;
  }
  for (std::size_t j = 0; j < c.cols; ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < c.rows; ++r) m = std::min(m, c(r, j));
    cols += m;
  }
  return rows / static_cast<double>(c.rows) + cols / static_cast<double>(c.cols);
}

// ---------------------------------------------------------------------------
// Assignment

namespace detail {

/// Shortest-augmenting-path Hungarian method with potentials, O(n^3).
inline std::vector<std::size_t> hungarian(const CostMatrix& c) {
  const std::size_t n = c.rows;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> column(n);
  for (std::size_t j = 1; j <= n; ++j) column[p[j] - 1] = j - 1;
  return column;
}

/// Optimal assignment of `rows` onto `cols` (sub-problem of the full matrix).
inline std::vector<std::size_t> solve_sub(const CostMatrix& c, const std::vector<std::size_t>& rows,
                                          const std::vector<std::size_t>& cols) {
  CostMatrix sub(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j) sub(r, j) = c(rows[r], cols[j]);
  const auto local = hungarian(sub);
  std::vector<std::size_t> out(local.size());
  for (std::size_t r = 0; r < local.size(); ++r) out[r] = cols[local[r]];
  return out;
}

}  // namespace detail

/// Exact minimum-cost perfect matching on a square, finite, nonnegative
/// matrix. Among optimal matchings (within 1e-12 relative) the
/// lexicographically smallest column sequence is returned.
inline Assignment solve_assignment(const CostMatrix& c) {
  if (c.rows != c.cols)
    throw DimensionError("solve_assignment needs a square matrix, got " + std::to_string(c.rows) + "x" + std::to_string(c.cols));
  for (double x : c.data)
    if (!std::isfinite(x) || x < 0.0) throw ValidationError("cost matrix entries must be finite and nonnegative");
  const std::size_t n = c.rows;
  Assignment best;
  if (n == 0) return best;
  best.column = detail::hungarian(c);
  best.cost = assignment_cost(c, best.column);
  const double tol = 1e-12 * (1.0 + std::abs(best.cost));

  // Fix rows one at a time, trying smaller columns first.
  std::vector<bool> taken(n, false);
  double prefix = 0.0;
  for (std::size_t r = 0; r + 1 < n; ++r) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t rr = r + 1; rr < n; ++rr) rest_rows.push_back(rr);
    for (std::size_t col = 0; col < best.column[r]; ++col) {
      if (taken[col]) continue;
      std::vector<std::size_t> rest_cols;
      for (std::size_t j = 0; j < n; ++j)
        if (!taken[j] && j != col) rest_cols.push_back(j);
      const auto tail = detail::solve_sub(c, rest_rows, rest_cols);
      double total = prefix + c(r, col);
      for (std::size_t k = 0; k < tail.size(); ++k) total += c(rest_rows[k], tail[k]);
      if (total <= best.cost + tol) {
        best.column[r] = col;
        for (std::size_t k = 0; k < tail.size(); ++k) best.column[rest_rows[k]] = tail[k];
        break;
      }
    }
    taken[best.column[r]] = true;
    prefix += c(r, best.column[r]);
  }
  best.cost = assignment_cost(c, best.column);
  return best;
}

// ---------------------------------------------------------------------------
// Loss

struct HausdorffResult {
  Tensor loss;  // sum of matched pair distances
  Assignment assignment;
  CostMatrix cost;
};

/// Constrained Hausdorff distance: every prediction is matched to exactly
/// one (padded) gold event by minimum-cost assignment and the matched
/// distances are summed. The matching is a constant for backward. Passing
/// `fixed` replaces the solver's choice.
inline HausdorffResult constrained_hausdorff(const decoder::ProxyPredictions& pred, const GoldEventSet& padded,
                                             const std::optional<Assignment>& fixed = std::nullopt) {
  using namespace diffcore;
  if (padded.size() != pred.num_proxies)
    throw DimensionError("padded gold set has " + std::to_string(padded.size()) + " events for " +
                         std::to_string(pred.num_proxies) + " proxies");
  HausdorffResult out;
  out.cost = cost_matrix(pred, padded);
  out.assignment = fixed ? *fixed : solve_assignment(out.cost);
  out.assignment.cost = assignment_cost(out.cost, out.assignment.column);
  const std::size_t n = pred.num_proxies;
  std::vector<std::size_t> type_target(n);
  for (std::size_t i = 0; i < n; ++i) type_target[i] = padded.types[out.assignment.column[i]];
  const std::vector<double> ones(n, 1.0);
  out.loss = nll_rows(pred.type_probs, type_target, ones);
  if (pred.num_entities > 0) {
    std::vector<std::size_t> arg_target(pred.arg_probs.rows());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < pred.num_entities; ++k)
        arg_target[pred.arg_row(i, k)] = padded.roles[out.assignment.column[i]][k];
    const std::vector<double> w(arg_target.size(), 1.0 / static_cast<double>(pred.num_entities));
    out.loss = add(out.loss, nll_rows(pred.arg_probs, arg_target, w));
  }
  return out;
}

/// L = D_hat + L_e.
inline Tensor total_loss(const Tensor& d_hat, const Tensor& entity_loss) { return diffcore::add(d_hat, entity_loss); }

}  // namespace proxyevent::matching
