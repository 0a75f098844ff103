#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "proxyevent/errors.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent::datakit {

/// A tagged entity mention. `end` is exclusive. Mentions with the same
/// surface string share one entity id.
struct Mention {
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  std::size_t entity = 0;

  bool operator==(const Mention&) const = default;
};

struct Argument {
  std::string role;
  std::size_t entity = 0;
  std::optional<double> confidence;

  bool operator==(const Argument&) const = default;
};

struct EventRecord {
  std::string type;
  std::vector<Argument> arguments;
  std::optional<double> confidence;

  bool operator==(const EventRecord&) const = default;
};

struct Document {
  std::string id;
  std::vector<std::vector<std::string>> sentences;
  std::vector<Mention> mentions;
  std::vector<EventRecord> events;

  bool operator==(const Document&) const = default;

  /// Surface string of an entity id (first mention), or empty if unknown.
  std::string entity_surface(std::size_t entity) const {
    for (const auto& m : mentions)
      if (m.entity == entity) return m.surface;
    return {};
  }

  std::set<std::size_t> entity_ids() const {
    std::set<std::size_t> ids;
    for (const auto& m : mentions) ids.insert(m.entity);
    return ids;
  }
};

inline std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Checks internal consistency of a document against a schema.
inline void validate(const Document& doc, const Schema& schema) {
  const std::string where = "document '" + doc.id + "': ";
  for (std::size_t s = 0; s < doc.sentences.size(); ++s)
    if (doc.sentences[s].empty()) throw ValidationError(where + "sentence " + std::to_string(s) + " is empty");
  std::map<std::size_t, std::string> surfaces;
  for (const auto& m : doc.mentions) {
    if (m.sentence >= doc.sentences.size() || m.start >= m.end || m.end > doc.sentences[m.sentence].size())
      throw ValidationError(where + "mention '" + m.surface + "' has out-of-bounds span");
    if (join_tokens(doc.sentences[m.sentence], m.start, m.end) != m.surface)
      throw ValidationError(where + "mention surface '" + m.surface + "' does not match its tokens");
    auto [it, inserted] = surfaces.emplace(m.entity, m.surface);
    if (!inserted && it->second != m.surface)
      throw ValidationError(where + "entity " + std::to_string(m.entity) + " has mentions with different surfaces");
  }
  for (const auto& ev : doc.events) {
    const std::size_t t = schema.type_index(ev.type);
    if (t == kNullIndex) throw ValidationError(where + "gold event with null type");
    std::set<std::string> roles;
    std::set<std::size_t> ents;
    for (const auto& a : ev.arguments) {
      const std::size_t r = schema.role_index(a.role);
      if (!schema.is_legal(t, r)) throw ValidationError(where + "role '" + a.role + "' is not legal for type '" + ev.type + "'");
      if (!roles.insert(a.role).second) throw ValidationError(where + "role '" + a.role + "' repeated within one event");
      if (!surfaces.count(a.entity)) throw ValidationError(where + "argument references unknown entity " + std::to_string(a.entity));
      if (!ents.insert(a.entity).second)
        throw ValidationError(where + "entity " + std::to_string(a.entity) + " fills two roles in one event");
    }
  }
}

}  // namespace proxyevent::datakit
