#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "proxyevent/diffcore/ops.hpp"
#include "proxyevent/diffcore/params.hpp"

namespace proxyevent::proxygraph {

using diffcore::Tensor;

enum class EdgeType : std::size_t { ProxyProxy = 0, EntityProxy = 1, ContextProxy = 2 };
inline constexpr std::size_t kNumEdgeTypes = 3;

inline const char* edge_type_name(EdgeType e) {
  switch (e) {
    case EdgeType::ProxyProxy: return "proxy_proxy";
    case EdgeType::EntityProxy: return "entity_proxy";
    case EdgeType::ContextProxy: return "context_proxy";
  }
  return "?";
}

/// How incoming messages are modulated at each proxy.
enum class Modulation {
  Film,        // gamma and beta from per-edge-type hyper-functions of the target
  Relational,  // gamma = 1, beta = 0 plus an RGCN self-connection h_v W_self
};

struct Edge {
  std::size_t source = 0;  // node index
  std::size_t target = 0;  // node index; always a proxy
};

/// Node layout: proxies [0, n), entity mentions [n, n + e), contexts after.
struct HeteroGraph {
  Tensor nodes;  // (n + e + s) x d_h initial vectors
  std::size_t num_proxies = 0;
  std::size_t num_entities = 0;
  std::size_t num_contexts = 0;
  std::array<std::vector<Edge>, kNumEdgeTypes> edges;

  std::size_t entity_node(std::size_t i) const { return num_proxies + i; }
  std::size_t context_node(std::size_t i) const { return num_proxies + num_entities + i; }
  const std::vector<Edge>& edges_of(EdgeType e) const { return edges[static_cast<std::size_t>(e)]; }
};

struct GraphDims {
  std::size_t d_h = 32;
  std::size_t num_proxies = 16;
  bool shared_proxy = false;  // one embedding read by every proxy slot
  bool relational = false;    // registers the self-connection weight
  double proxy_init_std = 0.02;
};

inline void register_params(diffcore::ParamStore& ps, const GraphDims& dims, std::mt19937_64& rng) {
  using diffcore::ParamGroup;
  if (dims.num_proxies == 0) throw ConfigError("proxy count must be at least 1");
  const std::size_t rows = dims.shared_proxy ? 1 : dims.num_proxies;
  ps.add("graph.proxies", diffcore::normal_init({rows, dims.d_h}, dims.proxy_init_std, rng), ParamGroup::Rest);
  for (std::size_t e = 0; e < kNumEdgeTypes; ++e) {
    const std::string base = std::string("graph.") + edge_type_name(static_cast<EdgeType>(e));
    ps.add(base + ".w", diffcore::glorot_init(dims.d_h, dims.d_h, rng), ParamGroup::Rest);
    ps.add(base + ".w_gamma", diffcore::glorot_init(dims.d_h, dims.d_h, rng), ParamGroup::Rest);
    ps.add(base + ".w_beta", diffcore::glorot_init(dims.d_h, dims.d_h, rng), ParamGroup::Rest);
  }
  if (dims.relational) ps.add("graph.self.w", diffcore::glorot_init(dims.d_h, dims.d_h, rng), ParamGroup::Rest);
}

/// Proxy vectors h_z^(0) for `n` slots. A 1-row bank is broadcast to every slot.
inline Tensor proxy_vectors(const Tensor& bank, std::size_t n) {
  if (n == 0) throw ConfigError("proxy count must be at least 1");
  if (bank.rows() == n) return bank;
  if (bank.rows() != 1)
    throw DimensionError("proxy bank has " + std::to_string(bank.rows()) + " rows for " + std::to_string(n) + " proxies");
  const std::vector<std::size_t> zeros(n, 0);
  return diffcore::gather_rows(bank, zeros);
}

/// Proxy<->proxy edges form a complete digraph with self-loops; every
/// entity and every context node feeds every proxy.
inline HeteroGraph build_graph(const Tensor& proxies, const Tensor& entities, const Tensor& contexts) {
  using namespace diffcore;
  HeteroGraph g;
  g.num_proxies = proxies.rows();
  if (g.num_proxies == 0) throw ConfigError("graph needs at least one proxy node");
  g.num_entities = entities.defined() ? entities.rows() : 0;
  g.num_contexts = contexts.defined() ? contexts.rows() : 0;
  std::vector<Tensor> parts{proxies};
  if (g.num_entities) parts.push_back(entities);
  if (g.num_contexts) parts.push_back(contexts);
  g.nodes = concat_rows(parts);
  auto& pp = g.edges[static_cast<std::size_t>(EdgeType::ProxyProxy)];
  auto& ep = g.edges[static_cast<std::size_t>(EdgeType::EntityProxy)];
  auto& cp = g.edges[static_cast<std::size_t>(EdgeType::ContextProxy)];
  for (std::size_t v = 0; v < g.num_proxies; ++v) {
    for (std::size_t u = 0; u < g.num_proxies; ++u) pp.push_back({u, v});
    for (std::size_t u = 0; u < g.num_entities; ++u) ep.push_back({g.entity_node(u), v});
    for (std::size_t u = 0; u < g.num_contexts; ++u) cp.push_back({g.context_node(u), v});
  }
  return g;
}

/// One GNN-FiLM layer restricted to proxy targets:
///   h'_v = GELU( sum_{u -e-> v} gamma_{e,v} * (h_u W_e) + beta_{e,v} ),
///   gamma_{e,v} = h_v W_gamma_e,  beta_{e,v} = h_v W_beta_e.
/// Returns the updated proxy rows; entity and context nodes are untouched.
/// Relational modulation drops gamma/beta and adds h_v W_self instead.
inline Tensor film_layer(const HeteroGraph& g, const diffcore::ParamStore& ps, Modulation mod = Modulation::Film) {
  using namespace diffcore;
  const std::size_t n = g.num_proxies;
  const Tensor targets = slice_rows(g.nodes, 0, n);
  std::vector<Tensor> contributions;
  for (std::size_t e = 0; e < kNumEdgeTypes; ++e) {
    const auto& edges = g.edges[e];
    if (edges.empty()) continue;
    const std::string base = std::string("graph.") + edge_type_name(static_cast<EdgeType>(e));
    if (ps.get(base + ".w").rows() != g.nodes.cols())
      throw DimensionError("film_layer: node width " + std::to_string(g.nodes.cols()) + " vs message weight " +
                           shape_str(ps.get(base + ".w").shape()));
    std::vector<std::size_t> src, dst;
    for (const auto& edge : edges) {
      if (edge.target >= n) throw IndexError("edge terminates at non-proxy node " + std::to_string(edge.target));
      src.push_back(edge.source);
      dst.push_back(edge.target);
    }
    Tensor msg = matmul(gather_rows(g.nodes, src), ps.get(base + ".w"));
    if (mod == Modulation::Film) {
      const Tensor gamma = matmul(targets, ps.get(base + ".w_gamma"));
      const Tensor beta = matmul(targets, ps.get(base + ".w_beta"));
      msg = add(mul(gather_rows(gamma, dst), msg), gather_rows(beta, dst));
    }
    contributions.push_back(scatter_add_rows(msg, dst, n));
  }
  if (mod == Modulation::Relational) contributions.push_back(matmul(targets, ps.get("graph.self.w")));
  return gelu(add_all(contributions));
}

}  // namespace proxyevent::proxygraph
