#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "proxyevent/datakit/document.hpp"
#include "proxyevent/diffcore/ops.hpp"
#include "proxyevent/diffcore/params.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent::decoder {

using diffcore::Tensor;

struct DecoderDims {
  std::size_t d_h = 32;
  std::size_t heads = 4;
  std::size_t num_types = 4;  // including null
  std::size_t num_roles = 6;  // including null
};

inline void register_params(diffcore::ParamStore& ps, const DecoderDims& dims, std::mt19937_64& rng) {
  using diffcore::ParamGroup;
  using diffcore::glorot_init;
  if (dims.heads == 0 || dims.d_h % dims.heads != 0)
    throw ConfigError("d_h (" + std::to_string(dims.d_h) + ") must be divisible by the head count (" + std::to_string(dims.heads) + ")");
  const std::size_t d = dims.d_h;
  ps.add("decoder.type.w1", glorot_init(d, d, rng), ParamGroup::Rest);
  ps.add("decoder.type.b1", Tensor::zeros({1, d}), ParamGroup::Rest);
  ps.add("decoder.type.w2", glorot_init(d, dims.num_types, rng), ParamGroup::Rest);
  ps.add("decoder.type.b2", Tensor::zeros({1, dims.num_types}), ParamGroup::Rest);
  ps.add("decoder.mha.wq", glorot_init(d, d, rng), ParamGroup::Rest);
  ps.add("decoder.mha.wk", glorot_init(d, d, rng), ParamGroup::Rest);
  ps.add("decoder.mha.wv", glorot_init(d, d, rng), ParamGroup::Rest);
  ps.add("decoder.mha.wo", glorot_init(d, d, rng), ParamGroup::Rest);
  ps.add("decoder.arg.w1", glorot_init(2 * d, d, rng), ParamGroup::Rest);
  ps.add("decoder.arg.b1", Tensor::zeros({1, d}), ParamGroup::Rest);
  ps.add("decoder.arg.w2", glorot_init(d, dims.num_roles, rng), ParamGroup::Rest);
  ps.add("decoder.arg.b2", Tensor::zeros({1, dims.num_roles}), ParamGroup::Rest);
}

namespace detail {
inline Tensor mlp(const Tensor& x, const diffcore::ParamStore& ps, const std::string& base) {
  using namespace diffcore;
  const Tensor hidden = gelu(add(matmul(x, ps.get(base + ".w1")), ps.get(base + ".b1")));
  return add(matmul(hidden, ps.get(base + ".w2")), ps.get(base + ".b2"));
}
}  // namespace detail

/// Event-type distribution per proxy row, over |C| + 1 classes (null = 0).
inline Tensor classify_event_type(const Tensor& proxy_states, const diffcore::ParamStore& ps) {
  return diffcore::softmax(detail::mlp(proxy_states, ps, "decoder.type"));
}

/// Multi-head attention with each proxy row as the single query and the
/// entity's mention vectors as keys and values. Returns proxies x d_h.
inline Tensor aggregate_entity(const Tensor& proxy_states, const Tensor& mention_vectors, const diffcore::ParamStore& ps,
                               std::size_t heads) {
  using namespace diffcore;
  if (mention_vectors.rows() == 0) throw Error("aggregate_entity: entity has no mentions");
  const std::size_t d = proxy_states.cols();
  if (heads == 0 || d % heads != 0) throw ConfigError("aggregate_entity: width " + std::to_string(d) + " not divisible into heads");
  const std::size_t dk = d / heads;
  const Tensor q = matmul(proxy_states, ps.get("decoder.mha.wq"));
  const Tensor k = matmul(mention_vectors, ps.get("decoder.mha.wk"));
  const Tensor v = matmul(mention_vectors, ps.get("decoder.mha.wv"));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> per_head;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
    const Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
    const Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
    const Tensor attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
    per_head.push_back(matmul(attn, vh));
  }
  return matmul(concat_cols(per_head), ps.get("decoder.mha.wo"));
}

/// Argument-role distribution over |A| + 1 roles (null = 0) from
/// [proxy state ; proxy-conditioned entity representation].
inline Tensor classify_argument(const Tensor& proxy_states, const Tensor& entity_reps, const diffcore::ParamStore& ps) {
  return diffcore::softmax(detail::mlp(diffcore::concat_cols(proxy_states, entity_reps), ps, "decoder.arg"));
}

/// All n proxies' predictions for one document.
struct ProxyPredictions {
  Tensor type_probs;  // n x (|C|+1)
  Tensor arg_probs;   // (entities * n) x (|A|+1); row k*n + i is entity k under proxy i
  std::size_t num_proxies = 0;
  std::size_t num_entities = 0;

  std::size_t arg_row(std::size_t proxy, std::size_t entity) const { return entity * num_proxies + proxy; }
};

/// `entity_mentions[k]` lists the mention rows of unique entity k.
inline ProxyPredictions predict(const Tensor& proxy_states, const Tensor& mention_vectors,
                                const std::vector<std::vector<std::size_t>>& entity_mentions, const diffcore::ParamStore& ps,
                                std::size_t heads) {
  using namespace diffcore;
  ProxyPredictions out;
  out.num_proxies = proxy_states.rows();
  out.num_entities = entity_mentions.size();
  out.type_probs = classify_event_type(proxy_states, ps);
  if (entity_mentions.empty()) return out;
  std::vector<Tensor> rows;
  for (const auto& ms : entity_mentions) {
    const Tensor agg = aggregate_entity(proxy_states, gather_rows(mention_vectors, ms), ps, heads);
    rows.push_back(concat_cols(proxy_states, agg));
  }
  out.arg_probs = softmax(detail::mlp(concat_rows(rows), ps, "decoder.arg"));
  return out;
}

namespace detail {
inline std::size_t argmax_row(const Tensor& t, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < t.cols(); ++c)
    if (t.at(r, c) > t.at(r, best)) best = c;
  return best;
}
}  // namespace detail

/// Argmax decoding with schema filtering. Per proxy (in index order): skip
/// null types; drop null and schema-illegal roles; when several entities
/// claim one role keep the one with the most mass on that role (lowest
/// entity index on ties). Arguments come out ordered by role index.
/// `entity_ids[k]` is the id written for unique entity k.
inline std::vector<datakit::EventRecord> decode_events(const ProxyPredictions& pred, const Schema& schema,
                                                       std::span<const std::size_t> entity_ids) {
  if (entity_ids.size() != pred.num_entities)
    throw DimensionError("decode_events: " + std::to_string(entity_ids.size()) + " entity ids for " +
                         std::to_string(pred.num_entities) + " entities");
  std::vector<datakit::EventRecord> events;
  for (std::size_t i = 0; i < pred.num_proxies; ++i) {
    const std::size_t type = detail::argmax_row(pred.type_probs, i);
    if (type == kNullIndex) continue;
    std::vector<std::size_t> winner(schema.num_roles(), pred.num_entities);
    std::vector<double> winner_p(schema.num_roles(), -1.0);
    for (std::size_t k = 0; k < pred.num_entities; ++k) {
      const std::size_t row = pred.arg_row(i, k);
      const std::size_t role = detail::argmax_row(pred.arg_probs, row);
      if (role == kNullIndex || !schema.is_legal(type, role)) continue;
      const double p = pred.arg_probs.at(row, role);
      if (p > winner_p[role]) {
        winner_p[role] = p;
        winner[role] = k;
      }
    }
    datakit::EventRecord ev;
    ev.type = schema.type_name(type);
    ev.confidence = pred.type_probs.at(i, type);
    for (std::size_t role = 1; role < schema.num_roles(); ++role)
      if (winner[role] < pred.num_entities) ev.arguments.push_back({schema.role_name(role), entity_ids[winner[role]], winner_p[role]});
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace proxyevent::decoder
