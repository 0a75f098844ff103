#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "proxyevent/datakit/generate.hpp"
#include "proxyevent/errors.hpp"

namespace proxyevent {

enum class Ablation { Full, NoHypernetwork, NoProxy, NoHdm };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoHypernetwork: return "no_hypernetwork";
    case Ablation::NoProxy: return "no_proxy";
    case Ablation::NoHdm: return "no_hdm";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "no_hypernetwork") return Ablation::NoHypernetwork;
  if (s == "no_proxy") return Ablation::NoProxy;
  if (s == "no_hdm") return Ablation::NoHdm;
  throw ConfigError("unknown ablation mode '" + s + "' (expected full, no_hypernetwork, no_proxy or no_hdm)");
}

/// Model and optimization settings. Defaults are sized for the synthetic
/// corpus; the reference setup used lr 1e-5 for pretrained encoder weights
/// and 1e-4 for the rest, batch 32, hidden size 512 and 100 epochs.
struct TrainConfig {
  std::size_t d_emb = 16;
  std::size_t d_h = 32;
  std::size_t num_proxies = 16;
  std::size_t heads = 4;
  double lr_encoder = 1e-3;
  double lr_rest = 1e-3;
  std::size_t batch_size = 4;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  std::uint64_t seed = 13;
  Ablation ablation = Ablation::Full;
  double proxy_init_std = 0.02;

  void check() const {
    if (d_emb == 0 || d_h == 0 || num_proxies == 0 || heads == 0 || batch_size == 0 || max_epochs == 0)
      throw ConfigError("model and training sizes must be positive");
    if (d_h % heads != 0) throw ConfigError("d_h must be divisible by heads");
    if (!(lr_encoder > 0.0) || !(lr_rest > 0.0)) throw ConfigError("learning rates must be positive");
  }
};

/// Flat key-value configuration with one section per concern
/// ([gen], [model], [train], [paths]); keys are addressed as "section.key".
class Config {
 public:
  Config() = default;
  explicit Config(boost::property_tree::ptree tree) : tree_(std::move(tree)) {}

  static Config load(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      if (!std::filesystem::exists(path)) throw IoError("cannot open config '" + path.string() + "'");
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return Config(std::move(tree));
  }

  static Config parse(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream is(text);
    try {
      boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return Config(std::move(tree));
  }

  /// Applies "section.key=value".
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like section.key=value");
    const std::string key = assignment.substr(0, eq);
    if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' must be a dotted section.key path");
    tree_.put(key, assignment.substr(eq + 1));
  }
  void set(const std::string& key, const std::string& value) { tree_.put(key, value); }

  template <class T>
  T get(const std::string& key, const T& fallback) const {
    const auto node = tree_.get_child_optional(key);
    if (!node) return fallback;
    const auto value = node->get_value_optional<T>();
    if (!value) throw ConfigError("config value for '" + key + "' has the wrong type: '" + node->data() + "'");
    return *value;
  }
  bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

  std::string str() const {
    std::ostringstream os;
    boost::property_tree::write_ini(os, tree_);
    return os.str();
  }

  const boost::property_tree::ptree& tree() const { return tree_; }

 private:
  boost::property_tree::ptree tree_;
};

inline TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  t.d_emb = c.get("model.d_emb", t.d_emb);
  t.d_h = c.get("model.d_h", t.d_h);
  t.num_proxies = c.get("model.num_proxies", t.num_proxies);
  t.heads = c.get("model.heads", t.heads);
  t.proxy_init_std = c.get("model.proxy_init_std", t.proxy_init_std);
  t.ablation = parse_ablation(c.get<std::string>("model.ablation", to_string(t.ablation)));
  t.lr_encoder = c.get("train.lr_encoder", t.lr_encoder);
  t.lr_rest = c.get("train.lr_rest", t.lr_rest);
  t.batch_size = c.get("train.batch_size", t.batch_size);
  t.max_epochs = c.get("train.max_epochs", t.max_epochs);
  t.patience = c.get("train.patience", t.patience);
  t.seed = c.get("train.seed", t.seed);
  t.check();
  return t;
}

inline void store(Config& c, const TrainConfig& t) {
  c.set("model.d_emb", std::to_string(t.d_emb));
  c.set("model.d_h", std::to_string(t.d_h));
  c.set("model.num_proxies", std::to_string(t.num_proxies));
  c.set("model.heads", std::to_string(t.heads));
  std::ostringstream std_str;
  std_str.precision(17);
  std_str << t.proxy_init_std;
  c.set("model.proxy_init_std", std_str.str());
  c.set("model.ablation", to_string(t.ablation));
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  c.set("train.lr_encoder", num(t.lr_encoder));
  c.set("train.lr_rest", num(t.lr_rest));
  c.set("train.batch_size", std::to_string(t.batch_size));
  c.set("train.max_epochs", std::to_string(t.max_epochs));
  c.set("train.patience", std::to_string(t.patience));
  c.set("train.seed", std::to_string(t.seed));
}

inline datakit::GenConfig gen_config_from(const Config& c) {
  datakit::GenConfig g;
  g.seed = c.get("gen.seed", g.seed);
  g.vocab_size = c.get("gen.vocab_size", g.vocab_size);
  g.num_docs = c.get("gen.docs", g.num_docs);
  g.event_types = c.get("gen.event_types", g.event_types);
  g.roles_min = c.get("gen.roles_min", g.roles_min);
  g.roles_max = c.get("gen.roles_max", g.roles_max);
  g.events_min = c.get("gen.events_min", g.events_min);
  g.events_max = c.get("gen.events_max", g.events_max);
  g.share_prob = c.get("gen.share_prob", g.share_prob);
  g.sentences_per_doc = c.get("gen.sentences_per_doc", g.sentences_per_doc);
  g.tokens_per_sentence = c.get("gen.tokens_per_sentence", g.tokens_per_sentence);
  datakit::check_config(g);
  return g;
}

inline void store(Config& c, const datakit::GenConfig& g) {
  c.set("gen.seed", std::to_string(g.seed));
  c.set("gen.vocab_size", std::to_string(g.vocab_size));
  c.set("gen.docs", std::to_string(g.num_docs));
  c.set("gen.event_types", std::to_string(g.event_types));
  c.set("gen.roles_min", std::to_string(g.roles_min));
  c.set("gen.roles_max", std::to_string(g.roles_max));
  c.set("gen.events_min", std::to_string(g.events_min));
  c.set("gen.events_max", std::to_string(g.events_max));
  std::ostringstream os;
  os.precision(17);
  os << g.share_prob;
  c.set("gen.share_prob", os.str());
  c.set("gen.sentences_per_doc", std::to_string(g.sentences_per_doc));
  c.set("gen.tokens_per_sentence", std::to_string(g.tokens_per_sentence));
}

}  // namespace proxyevent
