#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "proxyevent/datakit/score.hpp"
#include "proxyevent/diffcore/adam.hpp"
#include "proxyevent/diffcore/checkpoint.hpp"
#include "proxyevent/model.hpp"

namespace proxyevent {

namespace fs = std::filesystem;

inline constexpr const char* kMetricsHeader = "epoch,step,L_total,D_hat,avg_hausdorff_diag,L_er,L_epc,dev_P,dev_R,dev_F1";

struct RunArtifacts {
  fs::path run_dir;
  fs::path best_checkpoint;
  fs::path last_checkpoint;
  fs::path metrics_csv;
  fs::path report_json;
  fs::path config_snapshot;
  datakit::ScoreReport dev_report;
  std::size_t epochs_run = 0;
  std::size_t steps_run = 0;
};

struct TrainOptions {
  bool resume = false;          // continue from run_dir/last.ckpt when present
  std::ostream* log = nullptr;  // one progress line per epoch
  std::string config_text;      // extra config snapshot content (e.g. [gen], [paths])
};

struct Evaluation {
  std::vector<datakit::Document> predictions;
  datakit::ScoreReport report;
};

inline Evaluation evaluate(const Model& model, const std::vector<datakit::Document>& docs) {
  Evaluation ev;
  for (const auto& d : docs) ev.predictions.push_back(model.predict(d));
  ev.report = datakit::score(ev.predictions, docs, model.schema());
  return ev;
}

/// Uniformly random matching, seeded per training step.
inline matching::Assignment random_assignment(std::size_t n, std::uint64_t seed, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(counter),
                    static_cast<std::uint32_t>(counter >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  matching::Assignment a;
  a.column.resize(n);
  std::iota(a.column.begin(), a.column.end(), std::size_t{0});
  std::shuffle(a.column.begin(), a.column.end(), rng);
  return a;
}

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct TrainState {
  std::size_t epoch = 0;
  std::size_t global_step = 0;
  std::uint64_t doc_counter = 0;
  double best_f1 = -1.0;
  std::size_t since_best = 0;
};

inline diffcore::Checkpoint state_checkpoint(const Model& model, const diffcore::Adam& adam, const TrainState& st) {
  auto ckpt = model.to_checkpoint();
  diffcore::store_adam(ckpt, adam);
  ckpt.meta["state.epoch"] = std::to_string(st.epoch);
  ckpt.meta["state.global_step"] = std::to_string(st.global_step);
  ckpt.meta["state.doc_counter"] = std::to_string(st.doc_counter);
  ckpt.meta["state.best_f1"] = fmt_double(st.best_f1);
  ckpt.meta["state.since_best"] = std::to_string(st.since_best);
  return ckpt;
}

inline TrainState restore_state(const diffcore::Checkpoint& ckpt) {
  TrainState st;
  try {
    st.epoch = std::stoull(ckpt.meta.at("state.epoch"));
    st.global_step = std::stoull(ckpt.meta.at("state.global_step"));
    st.doc_counter = std::stoull(ckpt.meta.at("state.doc_counter"));
    st.best_f1 = std::stod(ckpt.meta.at("state.best_f1"));
    st.since_best = std::stoull(ckpt.meta.at("state.since_best"));
  } catch (const std::out_of_range&) {
    throw ValidationError("checkpoint lacks training state; cannot resume");
  }
  return st;
}

}  // namespace detail

/// Minimizes the mean per-document D_hat + L_er + L_epc with Adam, one
/// document at a time with gradients accumulated over `batch_size`
/// documents. Dev micro F1 after every epoch selects the best checkpoint;
/// training stops once `patience` epochs pass without improvement.
///
/// Run directory contents: config.ini, metrics.csv, best.ckpt, last.ckpt,
/// dev_report.json.
inline RunArtifacts train(const std::vector<datakit::Document>& train_docs, const std::vector<datakit::Document>& dev_docs,
                          const Schema& schema, const TrainConfig& cfg, const fs::path& run_dir, const TrainOptions& opts = {}) {
  if (train_docs.empty()) throw ValidationError("training corpus is empty");
  if (dev_docs.empty()) throw ValidationError("dev corpus is empty");
  for (const auto& d : train_docs) datakit::validate(d, schema);
  for (const auto& d : dev_docs) datakit::validate(d, schema);
  cfg.check();

  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory '" + run_dir.string() + "': " + ec.message());

  RunArtifacts art;
  art.run_dir = run_dir;
  art.best_checkpoint = run_dir / "best.ckpt";
  art.last_checkpoint = run_dir / "last.ckpt";
  art.metrics_csv = run_dir / "metrics.csv";
  art.report_json = run_dir / "dev_report.json";
  art.config_snapshot = run_dir / "config.ini";

  const bool resuming = opts.resume && fs::exists(art.last_checkpoint);
  std::optional<Model> model_slot;
  diffcore::Adam adam({cfg.lr_encoder, cfg.lr_rest});
  detail::TrainState st;
  if (resuming) {
    const auto ckpt = diffcore::load_checkpoint(art.last_checkpoint);
    const Model restored = Model::from_checkpoint(ckpt);
    if (!(restored.schema() == schema)) throw ValidationError("resumed checkpoint was trained with a different schema");
    const TrainConfig& old = restored.config();
    if (old.d_emb != cfg.d_emb || old.d_h != cfg.d_h || old.num_proxies != cfg.num_proxies || old.heads != cfg.heads ||
        old.ablation != cfg.ablation || old.seed != cfg.seed)
      throw ConfigError("resume changes the model architecture, ablation or seed of the checkpoint in '" + run_dir.string() + "'");
    // Rebuild under the new config (e.g. a raised max_epochs) with the restored weights.
    model_slot.emplace(cfg, schema, restored.vocab());
    for (auto& p : model_slot->params().all()) p.value.data() = restored.params().get(p.name).data();
    diffcore::restore_adam(ckpt, adam);
    st = detail::restore_state(ckpt);
  } else {
    model_slot.emplace(cfg, schema, build_vocab(train_docs));
  }
  Model& model = *model_slot;

  {
    Config snapshot = opts.config_text.empty() ? Config() : Config::parse(opts.config_text);
    store(snapshot, cfg);
    std::ofstream os(art.config_snapshot, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + art.config_snapshot.string() + "'");
    os << snapshot.str();
  }
  std::ofstream metrics(art.metrics_csv, resuming ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot write '" + art.metrics_csv.string() + "'");
  if (!resuming) metrics << kMetricsHeader << '\n';

  const std::size_t batch = cfg.batch_size;
  bool stop = resuming && st.since_best >= cfg.patience;
  while (!stop && st.epoch < cfg.max_epochs) {
    const std::size_t epoch = ++st.epoch;
    const auto order = epoch_order(train_docs.size(), cfg.seed, epoch);
    double acc_dhat = 0, acc_avg = 0, acc_er = 0, acc_epc = 0;
    std::size_t in_batch = 0;
    model.params().zero_grad();
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto& doc = train_docs[order[pos]];
      diffcore::Tape tape;
      diffcore::TapeScope scope(tape);
      std::optional<matching::Assignment> fixed;
      if (cfg.ablation == Ablation::NoHdm) fixed = random_assignment(cfg.num_proxies, cfg.seed, st.doc_counter);
      ++st.doc_counter;
      const DocLoss dl = model.document_loss(doc, fixed);
      const double total = dl.loss.item();
      if (!std::isfinite(total)) throw DivergenceError(doc.id, "non-finite loss " + detail::fmt_double(total));
      tape.backward(dl.loss);
      acc_dhat += dl.d_hat;
      acc_avg += dl.avg_hausdorff;
      acc_er += dl.l_er;
      acc_epc += dl.l_epc;
      ++in_batch;

      const bool epoch_end = pos + 1 == order.size();
      if (in_batch == batch || epoch_end) {
        const double inv = 1.0 / static_cast<double>(in_batch);
        for (auto& p : model.params().all())
          if (p.value.has_grad())
            for (double& g : p.value.grad()) g *= inv;
        adam.step(model.params());
        model.params().zero_grad();
        ++st.global_step;
        const double d = acc_dhat * inv, a = acc_avg * inv, er = acc_er * inv, epc = acc_epc * inv;
        metrics << epoch << ',' << st.global_step << ',' << detail::fmt_double(d + er + epc) << ',' << detail::fmt_double(d) << ','
                << detail::fmt_double(a) << ',' << detail::fmt_double(er) << ',' << detail::fmt_double(epc);
        if (epoch_end) {
          const auto report = evaluate(model, dev_docs).report;
          metrics << ',' << detail::fmt_double(report.precision()) << ',' << detail::fmt_double(report.recall()) << ','
                  << detail::fmt_double(report.f1()) << '\n';
          if (report.f1() > st.best_f1) {
            st.best_f1 = report.f1();
            st.since_best = 0;
            diffcore::save_checkpoint(model.to_checkpoint(), art.best_checkpoint);
          } else {
            ++st.since_best;
          }
          if (opts.log)
            *opts.log << "epoch " << epoch << " step " << st.global_step << " loss " << (d + er + epc) << " dev_F1 " << report.f1()
                      << " best " << st.best_f1 << std::endl;
        } else {
          metrics << ",,,\n";
        }
        acc_dhat = acc_avg = acc_er = acc_epc = 0;
        in_batch = 0;
      }
    }
    metrics.flush();
    diffcore::save_checkpoint(detail::state_checkpoint(model, adam, st), art.last_checkpoint);
    if (st.since_best >= cfg.patience) stop = true;
  }

  const Model best = Model::from_checkpoint(diffcore::load_checkpoint(art.best_checkpoint));
  art.dev_report = evaluate(best, dev_docs).report;
  art.epochs_run = st.epoch;
  art.steps_run = st.global_step;
  std::ofstream rj(art.report_json, std::ios::trunc);
  if (!rj) throw IoError("cannot write '" + art.report_json.string() + "'");
  rj << datakit::to_json(art.dev_report).dump(2) << '\n';
  return art;
}

/// Trains with one ablation switched on and scores the selected checkpoint
/// on `eval_docs`.
inline datakit::ScoreReport run_ablation(Ablation mode, const std::vector<datakit::Document>& train_docs,
                                         const std::vector<datakit::Document>& dev_docs,
                                         const std::vector<datakit::Document>& eval_docs, const Schema& schema, TrainConfig cfg,
                                         const fs::path& run_dir, const TrainOptions& opts = {}) {
  cfg.ablation = mode;
  const auto art = train(train_docs, dev_docs, schema, cfg, run_dir, opts);
  const Model best = Model::from_checkpoint(diffcore::load_checkpoint(art.best_checkpoint));
  return evaluate(best, eval_docs).report;
}

// ---------------------------------------------------------------------------
// Embedding export

/// One CSV row per gold entity mention (entity-level space) and one per
/// proxy after the graph layer (event-level space). `membership` has one
/// bit per gold event: for entities, whether the entity is an argument of
/// that event; for proxies, whether the proxy is matched to it.
inline void export_embeddings(const Model& model, const datakit::Document& doc, std::ostream& os) {
  diffcore::NoGradScope no_grad;
  datakit::validate(doc, model.schema());
  const ForwardResult fwd = model.forward(doc, SpanSource::Gold);
  const auto gold = matching::pad_gold(matching::gold_labels(doc, model.schema(), fwd.mentions.entity_surfaces),
                                       model.config().num_proxies);
  const auto assignment = matching::solve_assignment(matching::cost_matrix(fwd.predictions, gold));
  const std::size_t num_events = doc.events.size();
  const std::size_t d = model.config().d_h;

  os << "kind,id,membership";
  for (std::size_t j = 0; j < d; ++j) os << ",v" << j;
  os << '\n';
  auto write_row = [&](const char* kind, std::size_t id, const std::vector<bool>& bits, const Tensor& m, std::size_t r) {
    os << kind << ',' << id << ',';
    for (std::size_t j = 0; j < bits.size(); ++j) os << (j ? ";" : "") << (bits[j] ? 1 : 0);
    for (std::size_t j = 0; j < d; ++j) os << ',' << detail::fmt_double(m.at(r, j));
    os << '\n';
  };
  for (std::size_t i = 0; i < doc.mentions.size(); ++i) {
    std::vector<bool> bits(num_events, false);
    for (std::size_t e = 0; e < num_events; ++e)
      for (const auto& a : doc.events[e].arguments)
        if (a.entity == doc.mentions[i].entity) bits[e] = true;
    write_row("entity", doc.mentions[i].entity, bits, fwd.mentions.vectors, i);
  }
  for (std::size_t z = 0; z < model.config().num_proxies; ++z) {
    std::vector<bool> bits(num_events, false);
    const std::size_t col = assignment.column[z];
    if (col < num_events) bits[col] = true;
    write_row("proxy", z, bits, fwd.proxy_states, z);
  }
}

}  // namespace proxyevent
