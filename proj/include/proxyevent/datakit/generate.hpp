#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "proxyevent/datakit/document.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent::datakit {

/// Settings for the synthetic multi-event corpus.
struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t vocab_size = 64;  // includes the two reserved pad/unk ids
  std::size_t num_docs = 300;
  std::size_t event_types = 3;
  std::size_t roles_min = 3;
  std::size_t roles_max = 5;
  std::size_t events_min = 1;
  std::size_t events_max = 3;
  double share_prob = 0.3;       // chance an event reuses an entity from an earlier event
  std::size_t sentences_per_doc = 8;  // minimum; padded with distractor sentences
  std::size_t tokens_per_sentence = 5;  // distractor sentence length
};

/// Word inventory the generator draws from. Every document sentence for an
/// argument reads `<ordinal> <type keyword> <role keyword> <entity tokens>`.
/// Entity strings are one head word followed by one or two tail words.
struct GenLexicon {
  std::vector<std::string> type_words;
  std::vector<std::string> role_words;
  std::vector<std::string> ordinal_words;
  std::vector<std::string> noise_words;
  std::vector<std::string> head_words;
  std::vector<std::string> tail_words;
};

inline constexpr std::size_t kReservedVocab = 2;
inline constexpr std::size_t kNoiseWords = 4;

inline std::size_t roles_for_type(const GenConfig& cfg, std::size_t t) {
  return cfg.roles_min + t % (cfg.roles_max - cfg.roles_min + 1);
}

inline void check_config(const GenConfig& cfg) {
  if (cfg.vocab_size < 1 || cfg.num_docs < 1 || cfg.event_types < 1 || cfg.roles_min < 1 || cfg.events_min < 1 ||
      cfg.sentences_per_doc < 1 || cfg.tokens_per_sentence < 1)
    throw ConfigError("generator counts must all be >= 1");
  if (cfg.roles_max < cfg.roles_min) throw ConfigError("roles_max must be >= roles_min");
  if (cfg.events_max < cfg.events_min) throw ConfigError("events_max must be >= events_min");
  if (!(cfg.share_prob >= 0.0 && cfg.share_prob <= 1.0)) throw ConfigError("share_prob must lie in [0, 1]");
}

inline Schema make_schema(const GenConfig& cfg) {
  check_config(cfg);
  Schema schema;
  std::size_t next_role = 0;
  for (std::size_t t = 0; t < cfg.event_types; ++t) {
    std::vector<std::string> roles;
    for (std::size_t r = 0; r < roles_for_type(cfg, t); ++r) roles.push_back("role_" + std::to_string(next_role++));
    schema.add_type("event_" + std::to_string(t), roles);
  }
  return schema;
}

inline GenLexicon make_lexicon(const GenConfig& cfg) {
  check_config(cfg);
  GenLexicon lex;
  std::size_t total_roles = 0;
  for (std::size_t t = 0; t < cfg.event_types; ++t) total_roles += roles_for_type(cfg, t);
  const std::size_t fixed = kReservedVocab + cfg.event_types + total_roles + cfg.events_max + kNoiseWords;
  if (cfg.vocab_size <= fixed)
    throw ConfigError("vocab_size " + std::to_string(cfg.vocab_size) + " leaves no room for entity words (needs > " +
                      std::to_string(fixed) + ")");
  const std::size_t free = cfg.vocab_size - fixed;
  const std::size_t heads = std::max<std::size_t>(2, free / 4);
  const std::size_t tails = free > heads ? free - heads : 0;
  const std::size_t max_entities = cfg.events_max * cfg.roles_max;
  if (tails < 2 || heads * tails < 2 * max_entities)
    throw ConfigError("vocab_size " + std::to_string(cfg.vocab_size) + " too small to produce " + std::to_string(max_entities) +
                      " distinct entity strings per document");
  for (std::size_t t = 0; t < cfg.event_types; ++t) lex.type_words.push_back("kw_event_" + std::to_string(t));
  for (std::size_t r = 0; r < total_roles; ++r) lex.role_words.push_back("kw_role_" + std::to_string(r));
  for (std::size_t o = 0; o < cfg.events_max; ++o) lex.ordinal_words.push_back("ord_" + std::to_string(o));
  for (std::size_t w = 0; w < kNoiseWords; ++w) lex.noise_words.push_back("noise_" + std::to_string(w));
  for (std::size_t w = 0; w < heads; ++w) lex.head_words.push_back("h" + std::to_string(w));
  for (std::size_t w = 0; w < tails; ++w) lex.tail_words.push_back("t" + std::to_string(w));
  return lex;
}

namespace detail {

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace detail

/// Deterministic synthetic corpus. Same config (seed included) gives a
/// bitwise-identical corpus.
inline std::vector<Document> generate(const GenConfig& cfg) {
  const Schema schema = make_schema(cfg);
  const GenLexicon lex = make_lexicon(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution share(cfg.share_prob);

  std::vector<Document> docs;
  docs.reserve(cfg.num_docs);
  for (std::size_t d = 0; d < cfg.num_docs; ++d) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof(id), "doc-%05zu", d);
    doc.id = id;

    std::vector<std::vector<std::string>> entity_tokens;  // by entity id
    std::set<std::vector<std::string>> used;
    auto fresh_entity = [&] {
      std::vector<std::string> toks;
      do {
        toks = {lex.head_words[detail::uniform_index(rng, lex.head_words.size())]};
        const std::size_t ntails = 1 + detail::uniform_index(rng, 2);
        for (std::size_t k = 0; k < ntails; ++k) toks.push_back(lex.tail_words[detail::uniform_index(rng, lex.tail_words.size())]);
      } while (used.count(toks));
      used.insert(toks);
      entity_tokens.push_back(toks);
      return entity_tokens.size() - 1;
    };

    struct Filled {
      std::size_t ordinal, type, role, entity;
    };
    std::vector<Filled> fills;
    const std::size_t num_events = cfg.events_min + detail::uniform_index(rng, cfg.events_max - cfg.events_min + 1);
    for (std::size_t j = 0; j < num_events; ++j) {
      const std::size_t type = 1 + detail::uniform_index(rng, cfg.event_types);
      const auto& roles = schema.legal_roles(type);
      std::size_t shared_slot = roles.size();
      std::size_t shared_entity = 0;
      if (j > 0 && share(rng)) {
        shared_slot = detail::uniform_index(rng, roles.size());
        shared_entity = detail::uniform_index(rng, entity_tokens.size());
      }
      EventRecord ev;
      ev.type = schema.type_name(type);
      for (std::size_t slot = 0; slot < roles.size(); ++slot) {
        const std::size_t ent = slot == shared_slot ? shared_entity : fresh_entity();
        ev.arguments.push_back({schema.role_name(roles[slot]), ent, std::nullopt});
        fills.push_back({j, type, roles[slot], ent});
      }
      doc.events.push_back(std::move(ev));
    }

    // One sentence per filled argument, then distractors, then shuffle.
    struct Pending {
      std::vector<std::string> tokens;
      std::size_t entity;
      std::size_t start;
      bool has_entity;
    };
    std::vector<Pending> pending;
    for (const auto& f : fills) {
      Pending p{{lex.ordinal_words[f.ordinal], lex.type_words[f.type - 1], lex.role_words[f.role - 1]}, f.entity, 3, true};
      for (const auto& t : entity_tokens[f.entity]) p.tokens.push_back(t);
      pending.push_back(std::move(p));
    }
    while (pending.size() < cfg.sentences_per_doc) {
      Pending p{{}, 0, 0, false};
      for (std::size_t k = 0; k < cfg.tokens_per_sentence; ++k)
        p.tokens.push_back(lex.noise_words[detail::uniform_index(rng, lex.noise_words.size())]);
      pending.push_back(std::move(p));
    }
    std::shuffle(pending.begin(), pending.end(), rng);
    for (std::size_t s = 0; s < pending.size(); ++s) {
      const auto& p = pending[s];
      if (p.has_entity) {
        const std::size_t end = p.start + entity_tokens[p.entity].size();
        doc.mentions.push_back({s, p.start, end, join_tokens(p.tokens, p.start, end), p.entity});
      }
      doc.sentences.push_back(p.tokens);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace proxyevent::datakit
