#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "proxyevent/datakit/generate.hpp"
#include "proxyevent/trainer.hpp"
#include "support/gradcheck.hpp"

using namespace proxyevent;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
  TrainConfig t;
  t.d_emb = 8;
  t.d_h = 8;
  t.heads = 2;
  t.num_proxies = 4;
  t.max_epochs = 3;
  t.patience = 10;
  return t;
}

datakit::GenConfig corpus_config() {
  datakit::GenConfig g;
  g.seed = 21;
  g.num_docs = 8;
  return g;
}

struct Corpus {
  std::vector<datakit::Document> train, dev;
  Schema schema;
};

Corpus small_corpus() {
  const auto g = corpus_config();
  const auto docs = datakit::generate(g);
  return {{docs.begin(), docs.begin() + 6}, {docs.begin() + 6, docs.end()}, datakit::make_schema(g)};
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("proxyevent_trainer_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

// Two sentences, two entities, one of them mentioned twice.
datakit::Document two_sentence_doc() {
  datakit::Document d;
  d.id = "fd";
  d.sentences = {{"acme", "corp", "sold"}, {"beta", "bought", "acme", "corp"}};
  d.mentions = {{0, 0, 2, "acme corp", 0}, {1, 0, 1, "beta", 1}, {1, 2, 4, "acme corp", 0}};
  d.events = {{"T", {{"A", 0, std::nullopt}, {"B", 1, std::nullopt}}, std::nullopt}};
  return d;
}

Schema two_role_schema() {
  Schema s;
  s.add_type("T", {"A", "B"});
  s.add_type("U", {"B"});
  return s;
}

}  // namespace

TEST(Train, PatienceZeroStopsAfterOneEpoch) {
  auto c = small_corpus();
  auto cfg = tiny_config();
  cfg.patience = 0;
  cfg.max_epochs = 5;
  const auto dir = scratch_dir("patience");
  const auto art = train(c.train, c.dev, c.schema, cfg, dir);
  EXPECT_EQ(art.epochs_run, 1u);
  EXPECT_TRUE(fs::exists(art.best_checkpoint));
  EXPECT_TRUE(fs::exists(art.report_json));
  fs::remove_all(dir);
}

TEST(Train, MetricsCsvLayout) {
  auto c = small_corpus();
  auto cfg = tiny_config();
  cfg.max_epochs = 2;
  cfg.batch_size = 4;
  const auto dir = scratch_dir("metrics");
  const auto art = train(c.train, c.dev, c.schema, cfg, dir);
  const auto rows = lines_of(slurp(art.metrics_csv));
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], kMetricsHeader);
  // 6 documents with batch 4 gives 2 steps per epoch; dev scores only on the last.
  ASSERT_EQ(rows.size(), 1u + 4u);
  EXPECT_EQ(split(rows[1], ',').back(), "");
  EXPECT_NE(split(rows[2], ',').back(), "");
  EXPECT_EQ(split(rows[4], ',')[1], "4");
  EXPECT_EQ(art.steps_run, 4u);
  fs::remove_all(dir);
}

TEST(Train, SameSeedGivesIdenticalMetrics) {
  auto c = small_corpus();
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  const auto ra = train(c.train, c.dev, c.schema, tiny_config(), a);
  const auto rb = train(c.train, c.dev, c.schema, tiny_config(), b);
  EXPECT_EQ(slurp(ra.metrics_csv), slurp(rb.metrics_csv));
  EXPECT_TRUE(slurp(ra.best_checkpoint) == slurp(rb.best_checkpoint));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Train, ResumeContinuesBitwise) {
  auto c = small_corpus();
  auto cfg = tiny_config();
  cfg.max_epochs = 4;
  const auto straight = scratch_dir("resume_straight"), split_run = scratch_dir("resume_split");
  const auto full = train(c.train, c.dev, c.schema, cfg, straight);
  auto first = cfg;
  first.max_epochs = 2;
  train(c.train, c.dev, c.schema, first, split_run);
  TrainOptions opts;
  opts.resume = true;
  const auto resumed = train(c.train, c.dev, c.schema, cfg, split_run, opts);
  EXPECT_EQ(resumed.epochs_run, 4u);
  EXPECT_EQ(slurp(full.metrics_csv), slurp(resumed.metrics_csv));
  EXPECT_TRUE(slurp(full.last_checkpoint) == slurp(resumed.last_checkpoint));
  auto wider = cfg;
  wider.d_h = 16;
  EXPECT_THROW(train(c.train, c.dev, c.schema, wider, split_run, opts), ConfigError);
  fs::remove_all(straight);
  fs::remove_all(split_run);
}

TEST(Train, CheckpointRoundTripGivesIdenticalReport) {
  auto c = small_corpus();
  const auto dir = scratch_dir("ckpt");
  const auto art = train(c.train, c.dev, c.schema, tiny_config(), dir);
  const Model a = Model::from_checkpoint(diffcore::load_checkpoint(art.best_checkpoint));
  diffcore::save_checkpoint(a.to_checkpoint(), dir / "copy.ckpt");
  const Model b = Model::from_checkpoint(diffcore::load_checkpoint(dir / "copy.ckpt"));
  const auto ea = evaluate(a, c.dev), eb = evaluate(b, c.dev);
  EXPECT_EQ(datakit::to_json(ea.report).dump(), datakit::to_json(eb.report).dump());
  EXPECT_EQ(ea.predictions, eb.predictions);
  EXPECT_EQ(datakit::to_json(ea.report).dump(), datakit::to_json(art.dev_report).dump());
  fs::remove_all(dir);
}

TEST(Train, ConfigSnapshotRecordsSettings) {
  auto c = small_corpus();
  auto cfg = tiny_config();
  cfg.ablation = Ablation::NoHdm;
  cfg.max_epochs = 1;
  const auto dir = scratch_dir("snapshot");
  TrainOptions opts;
  opts.config_text = "[paths]\ndata_dir = somewhere\n";
  const auto art = train(c.train, c.dev, c.schema, cfg, dir, opts);
  const auto snap = Config::load(art.config_snapshot);
  EXPECT_EQ(train_config_from(snap).ablation, Ablation::NoHdm);
  EXPECT_EQ(snap.get<std::string>("paths.data_dir", ""), "somewhere");
  fs::remove_all(dir);
}

TEST(Train, InputErrors) {
  auto c = small_corpus();
  EXPECT_THROW(train({}, c.dev, c.schema, tiny_config(), scratch_dir("err")), ValidationError);
  EXPECT_THROW(train(c.train, {}, c.schema, tiny_config(), scratch_dir("err")), ValidationError);
  EXPECT_THROW(train(c.train, c.dev, c.schema, tiny_config(), "/proc/proxyevent_cannot_create"), IoError);
  auto bad = c.train;
  bad[0].events[0].type = "no_such_type";
  EXPECT_THROW(train(bad, c.dev, c.schema, tiny_config(), scratch_dir("err")), Error);
  fs::remove_all(scratch_dir("err"));
}

TEST(Train, SingleDocumentIsMemorized) {
  const auto c = small_corpus();
  const std::vector<datakit::Document> one{c.train[0]};
  auto cfg = tiny_config();
  cfg.d_h = 32;
  cfg.d_emb = 16;
  cfg.num_proxies = 8;
  cfg.batch_size = 1;
  cfg.lr_encoder = cfg.lr_rest = 1e-2;
  cfg.max_epochs = 500;
  cfg.patience = 100;
  const auto dir = scratch_dir("memorize");
  const auto art = train(one, one, c.schema, cfg, dir);
  EXPECT_EQ(art.dev_report.f1(), 1.0);
  std::size_t first_perfect = 0;
  for (const auto& row : lines_of(slurp(art.metrics_csv))) {
    const auto f = split(row, ',');
    if (f.size() == 10 && f[9] == "1") {
      first_perfect = std::stoul(f[1]);
      break;
    }
  }
  EXPECT_GT(first_perfect, 0u);
  EXPECT_LE(first_perfect, 500u);
  fs::remove_all(dir);
}

TEST(Model, UntrainedModelScoresNearZero) {
  const auto c = small_corpus();
  const Model m(tiny_config(), c.schema, build_vocab(c.train));
  EXPECT_LT(evaluate(m, c.dev).report.f1(), 0.2);
}

TEST(Model, FullPipelineMatchesFiniteDifferences) {
  auto cfg = tiny_config();
  cfg.d_emb = 4;
  cfg.d_h = 4;
  cfg.num_proxies = 3;
  const auto doc = two_sentence_doc();
  Model m(cfg, two_role_schema(), build_vocab({doc}));
  matching::Assignment fixed;
  {
    diffcore::NoGradScope off;
    fixed = m.document_loss(doc).assignment;
  }
  std::vector<diffcore::Tensor> leaves;
  for (auto& p : m.params().all()) leaves.push_back(p.value);
  const auto r = testsupport::grad_check(leaves, [&] { return m.document_loss(doc, fixed).loss; }, 1e-6, 1e-3, 1e-7);
  EXPECT_EQ(r.failures, 0u) << r.worst;
  EXPECT_GT(r.entries, 100u);
}

TEST(Model, NoProxyAndNoHypernetworkHaveExpectedParameters) {
  const auto doc = two_sentence_doc();
  auto cfg = tiny_config();
  cfg.ablation = Ablation::NoProxy;
  const Model shared(cfg, two_role_schema(), build_vocab({doc}));
  EXPECT_EQ(shared.params().get("graph.proxies").rows(), 1u);
  cfg.ablation = Ablation::NoHypernetwork;
  const Model rel(cfg, two_role_schema(), build_vocab({doc}));
  EXPECT_EQ(rel.modulation(), proxygraph::Modulation::Relational);
  EXPECT_NO_THROW(rel.params().get("graph.self.w"));
}

TEST(Helpers, RandomAssignmentAndEpochOrderAreDeterministicPermutations) {
  const auto a = random_assignment(6, 13, 4);
  EXPECT_EQ(a.column, random_assignment(6, 13, 4).column);
  auto sorted = a.column;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(epoch_order(10, 13, 2), epoch_order(10, 13, 2));
  EXPECT_NE(epoch_order(10, 13, 2), epoch_order(10, 13, 3));
}

TEST(ExportEmbeddings, RowsAndMembership) {
  const auto doc = two_sentence_doc();
  auto cfg = tiny_config();
  const Model m(cfg, two_role_schema(), build_vocab({doc}));
  std::ostringstream os;
  export_embeddings(m, doc, os);
  const auto rows = lines_of(os.str());
  ASSERT_EQ(rows.size(), 1u + doc.mentions.size() + cfg.num_proxies);
  EXPECT_EQ(split(rows[0], ',').size(), 3u + cfg.d_h);
  std::size_t proxies = 0, matched = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split(rows[i], ',');
    ASSERT_EQ(f.size(), 3u + cfg.d_h);
    EXPECT_EQ(split(f[2], ';').size(), doc.events.size());
    if (f[0] == "proxy") {
      ++proxies;
      matched += f[2] == "1";
    }
  }
  EXPECT_EQ(proxies, cfg.num_proxies);
  EXPECT_EQ(matched, 1u);
  // Both "acme corp" mentions carry the same entity id.
  EXPECT_EQ(split(rows[1], ',')[1], split(rows[3], ',')[1]);
  EXPECT_EQ(split(rows[1], ',')[2], "1");
}
