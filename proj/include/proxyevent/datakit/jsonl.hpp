#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "proxyevent/datakit/document.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent::datakit {

// Canonical corpus format: UTF-8, one JSON object per line.
//
//   {"format_version": 1,
//    "id": "doc-0001",
//    "sentences": [["tok", ...], ...],
//    "mentions":  [{"sentence": 0, "start": 2, "end": 4, "surface": "a b", "entity": 0}, ...],
//    "events":    [{"type": "T", "arguments": [{"role": "R", "entity": 0}, ...]}, ...]}
//
// "confidence" may appear on events and arguments (predicted output only).

inline constexpr int kCorpusFormatVersion = 1;
inline constexpr int kSchemaFormatVersion = 1;

using json = nlohmann::json;

namespace detail {

class FieldReader {
 public:
  FieldReader(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ValidationError("line " + std::to_string(line_) + ": field '" + path + "' " + what);
  }

  const json& field(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object()) fail(path, "is not an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "is missing");
    return *it;
  }

  std::size_t index(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = field(obj, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(path + "." + key, "must be a nonnegative integer");
    return v.get<std::size_t>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = field(obj, key, path);
    if (!v.is_string()) fail(path.empty() ? key : path + "." + key, "must be a string");
    return v.get<std::string>();
  }

  const json& array(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = field(obj, key, path);
    if (!v.is_array()) fail(path.empty() ? key : path + "." + key, "must be an array");
    return v;
  }

  std::optional<double> confidence(const json& obj, const std::string& path) const {
    auto it = obj.find("confidence");
    if (it == obj.end()) return std::nullopt;
    if (!it->is_number()) fail(path + ".confidence", "must be a number");
    return it->get<double>();
  }

 private:
  std::size_t line_;
};

}  // namespace detail

inline json to_json(const Document& doc) {
  json j;
  j["format_version"] = kCorpusFormatVersion;
  j["id"] = doc.id;
  j["sentences"] = doc.sentences;
  j["mentions"] = json::array();
  for (const auto& m : doc.mentions)
    j["mentions"].push_back({{"sentence", m.sentence}, {"start", m.start}, {"end", m.end}, {"surface", m.surface}, {"entity", m.entity}});
  j["events"] = json::array();
  for (const auto& e : doc.events) {
    json ev{{"type", e.type}, {"arguments", json::array()}};
    if (e.confidence) ev["confidence"] = *e.confidence;
    for (const auto& a : e.arguments) {
      json arg{{"role", a.role}, {"entity", a.entity}};
      if (a.confidence) arg["confidence"] = *a.confidence;
      ev["arguments"].push_back(std::move(arg));
    }
    j["events"].push_back(std::move(ev));
  }
  return j;
}

inline Document document_from_json(const json& j, std::size_t line) {
  detail::FieldReader r(line);
  if (!j.is_object()) r.fail("<root>", "is not an object");
  const std::size_t version = r.index(j, "format_version", "");
  if (version != kCorpusFormatVersion) r.fail("format_version", "has unsupported value " + std::to_string(version));
  Document doc;
  doc.id = r.string(j, "id", "");
  const json& sents = r.array(j, "sentences", "");
  for (std::size_t s = 0; s < sents.size(); ++s) {
    const std::string path = "sentences[" + std::to_string(s) + "]";
    if (!sents[s].is_array()) r.fail(path, "must be an array of strings");
    std::vector<std::string> toks;
    for (std::size_t t = 0; t < sents[s].size(); ++t) {
      if (!sents[s][t].is_string()) r.fail(path + "[" + std::to_string(t) + "]", "must be a string");
      toks.push_back(sents[s][t].get<std::string>());
    }
    doc.sentences.push_back(std::move(toks));
  }
  const json& ments = r.array(j, "mentions", "");
  for (std::size_t i = 0; i < ments.size(); ++i) {
    const std::string path = "mentions[" + std::to_string(i) + "]";
    Mention m;
    m.sentence = r.index(ments[i], "sentence", path);
    m.start = r.index(ments[i], "start", path);
    m.end = r.index(ments[i], "end", path);
    m.surface = r.string(ments[i], "surface", path);
    m.entity = r.index(ments[i], "entity", path);
    doc.mentions.push_back(std::move(m));
  }
  const json& evs = r.array(j, "events", "");
  for (std::size_t i = 0; i < evs.size(); ++i) {
    const std::string path = "events[" + std::to_string(i) + "]";
    EventRecord ev;
    ev.type = r.string(evs[i], "type", path);
    ev.confidence = r.confidence(evs[i], path);
    const json& args = r.array(evs[i], "arguments", path);
    for (std::size_t a = 0; a < args.size(); ++a) {
      const std::string apath = path + ".arguments[" + std::to_string(a) + "]";
      Argument arg;
      arg.role = r.string(args[a], "role", apath);
      arg.entity = r.index(args[a], "entity", apath);
      arg.confidence = r.confidence(args[a], apath);
      ev.arguments.push_back(std::move(arg));
    }
    doc.events.push_back(std::move(ev));
  }
  return doc;
}

inline std::vector<Document> parse_jsonl(std::istream& is) {
  std::vector<Document> docs;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    docs.push_back(document_from_json(j, line));
  }
  return docs;
}

inline std::vector<Document> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open corpus '" + path.string() + "'");
  try {
    return parse_jsonl(is);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_jsonl(const std::vector<Document>& docs, std::ostream& os) {
  for (const auto& d : docs) os << to_json(d).dump() << '\n';
}

inline void write_jsonl(const std::vector<Document>& docs, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_jsonl(docs, os);
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

// Schema file:
//   {"format_version": 1, "event_types": [{"name": "T", "roles": ["R1", ...]}, ...]}

inline json to_json(const Schema& schema) {
  json types = json::array();
  for (std::size_t t = 1; t < schema.num_types(); ++t) {
    json roles = json::array();
    for (auto r : schema.legal_roles(t)) roles.push_back(schema.role_name(r));
    types.push_back({{"name", schema.type_name(t)}, {"roles", roles}});
  }
  return {{"format_version", kSchemaFormatVersion}, {"event_types", types}};
}

inline Schema schema_from_json(const json& j) {
  detail::FieldReader r(1);
  if (r.index(j, "format_version", "") != kSchemaFormatVersion) r.fail("format_version", "has unsupported value");
  Schema schema;
  const json& types = r.array(j, "event_types", "");
  for (std::size_t i = 0; i < types.size(); ++i) {
    const std::string path = "event_types[" + std::to_string(i) + "]";
    std::vector<std::string> roles;
    const json& rs = r.array(types[i], "roles", path);
    for (const auto& role : rs) {
      if (!role.is_string()) r.fail(path + ".roles", "must contain strings");
      roles.push_back(role.get<std::string>());
    }
    schema.add_type(r.string(types[i], "name", path), roles);
  }
  return schema;
}

inline Schema read_schema(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open schema '" + path.string() + "'");
  try {
    return schema_from_json(json::parse(is));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed schema JSON: " + e.what());
  }
}

inline void write_schema(const Schema& schema, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << to_json(schema).dump(2) << '\n';
}

}  // namespace proxyevent::datakit
