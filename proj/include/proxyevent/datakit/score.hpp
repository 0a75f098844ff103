#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "proxyevent/datakit/document.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent::datakit {

inline constexpr int kScoreFormatVersion = 1;

/// An event reduced to what role-level scoring compares: its type and the
/// set of (role, entity key) pairs. Entity keys are surface strings so that
/// predicted and gold entities are comparable across span sources.
struct KeyedEvent {
  std::string type;
  std::set<std::pair<std::string, std::string>> pairs;
};

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  double precision() const { return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

struct ScoreReport {
  Counts overall;
  Counts single_event;  // documents with exactly one gold event
  Counts multi_event;   // documents with more than one gold event
  std::map<std::string, Counts> per_type;

  double precision() const { return overall.precision(); }
  double recall() const { return overall.recall(); }
  double f1() const { return overall.f1(); }
};

inline std::vector<KeyedEvent> keyed_events(const Document& doc) {
  std::vector<KeyedEvent> out;
  for (const auto& ev : doc.events) {
    KeyedEvent k{ev.type, {}};
    for (const auto& a : ev.arguments) k.pairs.emplace(a.role, doc.entity_surface(a.entity));
    out.push_back(std::move(k));
  }
  return out;
}

/// Scores one document. Each predicted event (in order) takes the unmatched
/// gold event of the same type sharing the most pairs, lowest gold index on
/// ties; matched pairs are true positives.
inline void score_document(const std::vector<KeyedEvent>& pred, const std::vector<KeyedEvent>& gold, const Schema& schema,
                           ScoreReport& report) {
  auto check = [&](const KeyedEvent& e) {
    schema.type_index(e.type);
    for (const auto& [role, _] : e.pairs) schema.role_index(role);
  };
  for (const auto& e : pred) check(e);
  for (const auto& e : gold) check(e);

  std::vector<bool> used(gold.size(), false);
  std::vector<long> gold_hit(gold.size(), 0);
  Counts doc;
  for (const auto& p : pred) {
    long best_shared = -1;
    std::size_t best = gold.size();
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used[g] || gold[g].type != p.type) continue;
      long shared = 0;
      for (const auto& pair : p.pairs) shared += static_cast<long>(gold[g].pairs.count(pair));
      if (shared > best_shared) {
        best_shared = shared;
        best = g;
      }
    }
    Counts c;
    if (best < gold.size()) {
      used[best] = true;
      gold_hit[best] = best_shared;
      c.tp = best_shared;
      c.fp = static_cast<long>(p.pairs.size()) - best_shared;
    } else {
      c.fp = static_cast<long>(p.pairs.size());
    }
    report.per_type[p.type] += c;
    doc += c;
  }
  for (std::size_t g = 0; g < gold.size(); ++g) {
    Counts c;
    c.fn = static_cast<long>(gold[g].pairs.size()) - gold_hit[g];
    report.per_type[gold[g].type] += c;
    doc += c;
  }
  report.overall += doc;
  if (gold.size() == 1) report.single_event += doc;
  if (gold.size() > 1) report.multi_event += doc;
}

inline ScoreReport score(const std::vector<std::vector<KeyedEvent>>& pred, const std::vector<std::vector<KeyedEvent>>& gold,
                         const Schema& schema) {
  if (pred.size() != gold.size())
    throw ValidationError("score: " + std::to_string(pred.size()) + " predicted documents vs " + std::to_string(gold.size()) +
                          " gold documents");
  ScoreReport report;
  for (std::size_t d = 0; d < pred.size(); ++d) score_document(pred[d], gold[d], schema, report);
  return report;
}

/// Documents are paired by position; ids must agree.
inline ScoreReport score(const std::vector<Document>& pred, const std::vector<Document>& gold, const Schema& schema) {
  if (pred.size() != gold.size())
    throw ValidationError("score: " + std::to_string(pred.size()) + " predicted documents vs " + std::to_string(gold.size()) +
                          " gold documents");
  ScoreReport report;
  for (std::size_t d = 0; d < pred.size(); ++d) {
    if (pred[d].id != gold[d].id) throw ValidationError("score: document id mismatch '" + pred[d].id + "' vs '" + gold[d].id + "'");
    score_document(keyed_events(pred[d]), keyed_events(gold[d]), schema, report);
  }
  return report;
}

inline nlohmann::json to_json(const Counts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
}

inline nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [t, c] : r.per_type) per_type[t] = to_json(c);
  return {{"format_version", kScoreFormatVersion},
          {"matching", "greedy per type in prediction order; max shared (role, entity) pairs; ties to lowest gold index"},
          {"precision", r.precision()},
          {"recall", r.recall()},
          {"f1", r.f1()},
          {"overall", to_json(r.overall)},
          {"single_event", to_json(r.single_event)},
          {"multi_event", to_json(r.multi_event)},
          {"per_type", per_type}};
}

}  // namespace proxyevent::datakit
