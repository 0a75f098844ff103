#pragma once

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "proxyevent/config.hpp"
#include "proxyevent/datakit/document.hpp"
#include "proxyevent/datakit/jsonl.hpp"
#include "proxyevent/decoder.hpp"
#include "proxyevent/diffcore/checkpoint.hpp"
#include "proxyevent/diffcore/params.hpp"
#include "proxyevent/encoder.hpp"
#include "proxyevent/matching.hpp"
#include "proxyevent/proxygraph.hpp"
#include "proxyevent/schema.hpp"

namespace proxyevent {

using diffcore::Tensor;

/// Where mention spans come from in a forward pass.
enum class SpanSource {
  Gold,       // gold mentions; also computes L_er and L_epc
  Predicted,  // greedy BIO decode of the tagger
};

struct ForwardResult {
  encoder::TokenStates tokens;
  encoder::MentionReps mentions;
  std::vector<std::vector<std::size_t>> entity_mentions;  // unique entity -> mention rows
  Tensor proxy_states;                                     // n x d_h after the graph layer
  decoder::ProxyPredictions predictions;
  Tensor l_er;   // gold spans only
  Tensor l_epc;  // gold spans only
};

/// Per-document training quantities.
struct DocLoss {
  Tensor loss;  // D_hat + L_er + L_epc
  double d_hat = 0.0;
  double avg_hausdorff = 0.0;
  double l_er = 0.0;
  double l_epc = 0.0;
  matching::Assignment assignment;
};

/// Encoder, proxy graph and decoder parameters plus the vocabulary and
/// schema they are tied to.
class Model {
 public:
  Model(TrainConfig config, Schema schema, encoder::Vocab vocab)
      : config_(std::move(config)), schema_(std::move(schema)), vocab_(std::move(vocab)) {
    config_.check();
    std::mt19937_64 rng(config_.seed);
    encoder::register_params(params_, {vocab_.size(), config_.d_emb, config_.d_h}, rng);
    proxygraph::register_params(
        params_, {config_.d_h, config_.num_proxies, config_.ablation == Ablation::NoProxy,
                  config_.ablation == Ablation::NoHypernetwork, config_.proxy_init_std}, rng);
    decoder::register_params(params_, {config_.d_h, config_.heads, schema_.num_types(), schema_.num_roles()}, rng);
  }

  const TrainConfig& config() const { return config_; }
  const Schema& schema() const { return schema_; }
  const encoder::Vocab& vocab() const { return vocab_; }
  diffcore::ParamStore& params() { return params_; }
  const diffcore::ParamStore& params() const { return params_; }

  proxygraph::Modulation modulation() const {
    return config_.ablation == Ablation::NoHypernetwork ? proxygraph::Modulation::Relational : proxygraph::Modulation::Film;
  }

  ForwardResult forward(const datakit::Document& doc, SpanSource source) const {
    ForwardResult out;
    out.tokens = encoder::encode(encoder::to_ids(doc.sentences, vocab_), params_);

    std::vector<encoder::MentionSpan> spans;
    if (source == SpanSource::Gold) {
      for (const auto& m : doc.mentions) spans.push_back({m.sentence, {m.start, m.end}});
      std::vector<encoder::BioSequence> gold_bio;
      for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
        std::vector<encoder::Span> in_sentence;
        for (const auto& m : doc.mentions)
          if (m.sentence == s) in_sentence.push_back({m.start, m.end});
        gold_bio.push_back(encoder::bio_from_spans(doc.sentences[s].size(), in_sentence));
      }
      out.l_er = encoder::tag_bio(out.tokens, params_, &gold_bio).loss;
    } else {
      const auto tagging = encoder::tag_bio(out.tokens, params_);
      const auto labels = encoder::greedy_labels(out.tokens, tagging.probs);
      for (std::size_t s = 0; s < labels.size(); ++s)
        for (const auto& sp : encoder::decode_spans(labels[s])) spans.push_back({s, sp});
    }
    out.mentions = encoder::mention_reps(out.tokens, doc.sentences, spans);
    out.entity_mentions.assign(out.mentions.num_entities(), {});
    for (std::size_t i = 0; i < out.mentions.mentions.size(); ++i) out.entity_mentions[out.mentions.mentions[i].entity].push_back(i);

    if (source == SpanSource::Gold) {
      // Gold entity ids of each mention, and the events each entity is in.
      std::map<std::size_t, std::set<std::size_t>> events_of;
      for (std::size_t e = 0; e < doc.events.size(); ++e)
        for (const auto& a : doc.events[e].arguments) events_of[a.entity].insert(e);
      auto together = [&](std::size_t i, std::size_t j) {
        const auto& a = events_of[doc.mentions[i].entity];
        const auto& b = events_of[doc.mentions[j].entity];
        for (auto e : a)
          if (b.count(e)) return true;
        return false;
      };
      out.l_epc = encoder::pair_coevent_loss(out.mentions, params_, together).loss;
    }

    const Tensor proxies = proxygraph::proxy_vectors(params_.get("graph.proxies"), config_.num_proxies);
    const auto graph = proxygraph::build_graph(proxies, out.mentions.vectors, out.tokens.contexts);
    out.proxy_states = proxygraph::film_layer(graph, params_, modulation());
    out.predictions = decoder::predict(out.proxy_states, out.mentions.vectors, out.entity_mentions, params_, config_.heads);
    return out;
  }

  /// Full training objective for one document. With `fixed`, that matching
  /// is used instead of the minimum-cost one.
  DocLoss document_loss(const datakit::Document& doc, const std::optional<matching::Assignment>& fixed = std::nullopt) const {
    const ForwardResult fwd = forward(doc, SpanSource::Gold);
    const auto gold = matching::pad_gold(matching::gold_labels(doc, schema_, fwd.mentions.entity_surfaces), config_.num_proxies);
    auto hd = matching::constrained_hausdorff(fwd.predictions, gold, fixed);
    DocLoss out;
    out.d_hat = hd.loss.item();
    out.avg_hausdorff = matching::avg_hausdorff(hd.cost);
    out.l_er = fwd.l_er.item();
    out.l_epc = fwd.l_epc.item();
    out.assignment = hd.assignment;
    out.loss = matching::total_loss(hd.loss, diffcore::add(fwd.l_er, fwd.l_epc));
    return out;
  }

  /// Predicted copy of `doc`: same id and sentences, predicted mentions
  /// (entity id = unique-entity index) and decoded events.
  datakit::Document predict(const datakit::Document& doc) const {
    diffcore::NoGradScope no_grad;
    const ForwardResult fwd = forward(doc, SpanSource::Predicted);
    datakit::Document out;
    out.id = doc.id;
    out.sentences = doc.sentences;
    for (const auto& m : fwd.mentions.mentions) out.mentions.push_back({m.sentence, m.span.start, m.span.end, m.surface, m.entity});
    std::vector<std::size_t> ids(fwd.mentions.num_entities());
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = k;
    out.events = decoder::decode_events(fwd.predictions, schema_, ids);
    return out;
  }

  // Checkpoint metadata carries everything needed to rebuild the model.

  diffcore::Checkpoint to_checkpoint() const {
    diffcore::Checkpoint ckpt;
    Config c;
    store(c, config_);
    ckpt.meta["config"] = c.str();
    ckpt.meta["schema"] = datakit::to_json(schema_).dump();
    std::ostringstream vocab_text;
    vocab_.save(vocab_text);
    ckpt.meta["vocab"] = vocab_text.str();
    diffcore::store_params(ckpt, params_);
    return ckpt;
  }

  static Model from_checkpoint(const diffcore::Checkpoint& ckpt) {
    for (const char* key : {"config", "schema", "vocab"})
      if (!ckpt.meta.count(key)) throw ValidationError(std::string("checkpoint lacks '") + key + "' metadata");
    TrainConfig cfg = train_config_from(Config::parse(ckpt.meta.at("config")));
    Schema schema = datakit::schema_from_json(nlohmann::json::parse(ckpt.meta.at("schema")));
    std::istringstream vocab_text(ckpt.meta.at("vocab"));
    Model model(cfg, std::move(schema), encoder::Vocab::load(vocab_text));
    diffcore::restore_params(ckpt, model.params_);
    return model;
  }

 private:
  TrainConfig config_;
  Schema schema_;
  encoder::Vocab vocab_;
  diffcore::ParamStore params_;
};

inline encoder::Vocab build_vocab(const std::vector<datakit::Document>& docs) {
  encoder::Vocab v;
  for (const auto& d : docs)
    for (const auto& s : d.sentences)
      for (const auto& t : s) v.add(t);
  return v;
}

}  // namespace proxyevent
