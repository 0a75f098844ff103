// Command-line front end: generate, train, eval, export-embeddings.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "proxyevent/config.hpp"
#include "proxyevent/datakit/generate.hpp"
#include "proxyevent/datakit/jsonl.hpp"
#include "proxyevent/datakit/score.hpp"
#include "proxyevent/errors.hpp"
#include "proxyevent/trainer.hpp"

namespace fs = std::filesystem;
using namespace proxyevent;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidation = 2,
  kIo = 3,
  kDivergence = 4,
  kLookup = 5,
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "INI config file ([gen], [model], [train], [paths])");
  cmd->add_option("--set", o.overrides, "Override as section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Random seed");
}

Config load_config(const CommonOptions& o, const fs::path& fallback = {}) {
  Config c;
  if (!o.config_path.empty())
    c = Config::load(o.config_path);
  else if (!fallback.empty() && fs::exists(fallback))
    c = Config::load(fallback);
  for (const auto& s : o.overrides) c.set(s);
  return c;
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + p.string() + "'");
    os << text;
    if (!os) throw IoError("write failed for '" + p.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw IoError("cannot write '" + p.string() + "': " + ec.message());
}

std::vector<std::size_t> parse_split(const std::string& text, std::size_t total) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 0) throw std::invalid_argument(part);
      sizes.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("split '" + text + "' must be three non-negative counts like 200,50,50");
    }
  }
  if (sizes.size() != 3) throw ConfigError("split '" + text + "' must have exactly three counts (train,dev,test)");
  if (sizes[0] + sizes[1] + sizes[2] != total)
    throw ConfigError("split sizes sum to " + std::to_string(sizes[0] + sizes[1] + sizes[2]) + " but " +
                      std::to_string(total) + " documents were requested");
  return sizes;
}

std::string stats_line(const std::string& name, const std::vector<datakit::Document>& docs) {
  std::size_t events = 0, single = 0, multi = 0;
  for (const auto& d : docs) {
    events += d.events.size();
    if (d.events.size() == 1) ++single;
    if (d.events.size() > 1) ++multi;
  }
  const double n = docs.empty() ? 1.0 : static_cast<double>(docs.size());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-6s docs=%zu events=%zu single=%zu (%.1f%%) multi=%zu (%.1f%%)", name.c_str(),
                docs.size(), events, single, 100.0 * single / n, multi, 100.0 * multi / n);
  return buf;
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  CommonOptions common;
  std::optional<std::size_t> docs;
  std::string split;
  std::string out;
};

int cmd_generate(const GenerateOptions& o) {
  Config c = load_config(o.common);
  if (o.common.seed) c.set("gen.seed", std::to_string(*o.common.seed));
  if (o.docs) c.set("gen.docs", std::to_string(*o.docs));
  const auto g = gen_config_from(c);
  const fs::path out = o.out.empty() ? c.get<std::string>("paths.data_dir", "data") : o.out;

  std::vector<std::size_t> sizes;
  if (!o.split.empty()) {
    sizes = parse_split(o.split, g.num_docs);
  } else {
    const std::size_t dev = g.num_docs / 6, test = g.num_docs / 6;
    sizes = {g.num_docs - dev - test, dev, test};
  }

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());

  const auto docs = datakit::generate(g);
  const auto schema = datakit::make_schema(g);
  const char* names[3] = {"train", "dev", "test"};
  std::size_t begin = 0;
  std::vector<std::vector<datakit::Document>> parts;
  for (std::size_t s = 0; s < 3; ++s) {
    parts.emplace_back(docs.begin() + static_cast<std::ptrdiff_t>(begin),
                       docs.begin() + static_cast<std::ptrdiff_t>(begin + sizes[s]));
    begin += sizes[s];
    datakit::write_jsonl(parts.back(), out / (std::string(names[s]) + ".jsonl"));
  }
  datakit::write_schema(schema, out / "schema.json");
  Config snapshot = c;
  store(snapshot, g);
  write_text(out / "gen_config.ini", snapshot.str());

  std::cout << "wrote " << docs.size() << " documents to " << out.string() << '\n';
  std::cout << stats_line("all", docs) << '\n';
  for (std::size_t s = 0; s < 3; ++s) std::cout << stats_line(names[s], parts[s]) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainCmdOptions {
  CommonOptions common;
  std::string data;
  std::string train_path, dev_path, schema_path;
  std::string ablation;
  std::string out;
  std::string run_name;
  std::string resume;
  bool quiet = false;
};

std::string timestamp_name() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

int cmd_train(const TrainCmdOptions& o) {
  const fs::path resume_dir = o.resume;
  if (!o.resume.empty() && !fs::exists(resume_dir / "last.ckpt"))
    throw IoError("no last.ckpt to resume from in '" + resume_dir.string() + "'");
  Config c = load_config(o.common, o.resume.empty() ? fs::path{} : resume_dir / "config.ini");
  if (o.common.seed) c.set("train.seed", std::to_string(*o.common.seed));
  if (!o.ablation.empty()) c.set("model.ablation", o.ablation);
  if (!o.data.empty()) c.set("paths.data_dir", o.data);
  if (!o.train_path.empty()) c.set("paths.train", o.train_path);
  if (!o.dev_path.empty()) c.set("paths.dev", o.dev_path);
  if (!o.schema_path.empty()) c.set("paths.schema", o.schema_path);
  const TrainConfig cfg = train_config_from(c);

  const fs::path data_dir = c.get<std::string>("paths.data_dir", "data");
  const fs::path train_file = c.get<std::string>("paths.train", (data_dir / "train.jsonl").string());
  const fs::path dev_file = c.get<std::string>("paths.dev", (data_dir / "dev.jsonl").string());
  const fs::path schema_file = c.get<std::string>("paths.schema", (data_dir / "schema.json").string());
  c.set("paths.train", train_file.string());
  c.set("paths.dev", dev_file.string());
  c.set("paths.schema", schema_file.string());

  const auto schema = datakit::read_schema(schema_file);
  const auto train_docs = datakit::read_jsonl(train_file);
  const auto dev_docs = datakit::read_jsonl(dev_file);

  fs::path run_dir;
  if (!o.resume.empty()) {
    run_dir = resume_dir;
  } else {
    const fs::path root = o.out.empty() ? c.get<std::string>("paths.runs_dir", "runs") : o.out;
    const std::string base = o.run_name.empty() ? timestamp_name() + "-" + to_string(cfg.ablation) : o.run_name;
    run_dir = root / base;
    for (int k = 1; o.run_name.empty() && fs::exists(run_dir); ++k) run_dir = root / (base + "-" + std::to_string(k));
  }
  c.set("paths.run_dir", run_dir.string());

  TrainOptions opts;
  opts.resume = !o.resume.empty();
  opts.log = o.quiet ? nullptr : &std::cerr;
  opts.config_text = c.str();
  const auto art = train(train_docs, dev_docs, schema, cfg, run_dir, opts);
  write_text(run_dir.parent_path() / "latest", fs::absolute(run_dir).string() + "\n");

  std::cout << "run directory: " << run_dir.string() << '\n';
  std::cout << "epochs: " << art.epochs_run << "  steps: " << art.steps_run << '\n';
  std::cout << datakit::to_json(art.dev_report).dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct CheckpointOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string run;
  std::string corpus;
  std::string schema_path;
  std::string out;
};

fs::path resolve_checkpoint(const CheckpointOptions& o) {
  if (!o.checkpoint.empty()) return o.checkpoint;
  fs::path run = o.run;
  if (run.empty()) {
    Config c = load_config(o.common);
    const fs::path latest = fs::path(c.get<std::string>("paths.runs_dir", "runs")) / "latest";
    if (!fs::exists(latest)) throw IoError("no --checkpoint or --run given and '" + latest.string() + "' does not exist");
    std::string text = read_text(latest);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    run = text;
  }
  return run / "best.ckpt";
}

Model load_model(const CheckpointOptions& o) {
  Model model = Model::from_checkpoint(diffcore::load_checkpoint(resolve_checkpoint(o)));
  if (!o.schema_path.empty() && !(datakit::read_schema(o.schema_path) == model.schema()))
    throw ValidationError("schema '" + o.schema_path + "' does not match the checkpoint's schema");
  return model;
}

int cmd_eval(const CheckpointOptions& o, const std::string& predictions_path) {
  const Model model = load_model(o);
  const auto docs = datakit::read_jsonl(o.corpus);
  for (const auto& d : docs) datakit::validate(d, model.schema());
  const auto ev = evaluate(model, docs);
  const std::string text = datakit::to_json(ev.report).dump(2) + "\n";
  std::cout << text;
  const fs::path out = o.out.empty() ? fs::path(o.corpus).replace_extension(".report.json") : fs::path(o.out);
  write_text(out, text);
  if (!predictions_path.empty()) datakit::write_jsonl(ev.predictions, predictions_path);

  const auto& r = ev.report;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "P=%.4f R=%.4f F1=%.4f F1(S.)=%.4f F1(M.)=%.4f", r.overall.precision(),
                r.overall.recall(), r.overall.f1(), r.single_event.f1(), r.multi_event.f1());
  std::cerr << buf << '\n';
  for (const auto& [type, counts] : r.per_type) {
    std::snprintf(buf, sizeof(buf), "  %-12s F1=%.4f", type.c_str(), counts.f1());
    std::cerr << buf << '\n';
  }
  return kOk;
}

int cmd_export(const CheckpointOptions& o, const std::string& doc_id) {
  const Model model = load_model(o);
  const auto docs = datakit::read_jsonl(o.corpus);
  const datakit::Document* found = nullptr;
  for (const auto& d : docs)
    if (d.id == doc_id) found = &d;
  if (!found) throw LookupError("document '" + doc_id + "' not found in '" + o.corpus + "'");
  std::ostringstream os;
  export_embeddings(model, *found, os);
  if (o.out.empty())
    std::cout << os.str();
  else
    write_text(o.out, os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document-level multi-event extraction with proxy nodes and Hausdorff matching"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic train/dev/test corpus and its schema");
  add_common(g, gen.common);
  g->add_option("--docs", gen.docs, "Total number of documents");
  g->add_option("--split", gen.split, "Split sizes train,dev,test (must sum to --docs)");
  g->add_option("-o,--out", gen.out, "Output directory (default paths.data_dir or ./data)");

  TrainCmdOptions tr;
  auto* t = app.add_subcommand("train", "Train a model; artifacts go to a fresh run directory");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "Directory with train.jsonl, dev.jsonl and schema.json");
  t->add_option("--train", tr.train_path, "Training corpus (overrides --data)");
  t->add_option("--dev", tr.dev_path, "Dev corpus (overrides --data)");
  t->add_option("--schema", tr.schema_path, "Schema file (overrides --data)");
  t->add_option("--ablation", tr.ablation, "full, no_hypernetwork, no_proxy or no_hdm");
  t->add_option("-o,--out", tr.out, "Root for run directories (default paths.runs_dir or ./runs)");
  t->add_option("--run-name", tr.run_name, "Run directory name instead of a timestamp");
  t->add_option("--resume", tr.resume, "Continue the run in this directory from last.ckpt");
  t->add_flag("-q,--quiet", tr.quiet, "No per-epoch progress on stderr");

  CheckpointOptions ev;
  std::string predictions;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a corpus; prints the report JSON");
  add_common(e, ev.common);
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  e->add_option("--run", ev.run, "Run directory (uses best.ckpt; default: the latest run)");
  e->add_option("--corpus", ev.corpus, "JSONL corpus")->required();
  e->add_option("--schema", ev.schema_path, "Schema to check against the checkpoint");
  e->add_option("-o,--out", ev.out, "Report path (default <corpus>.report.json)");
  e->add_option("--predictions", predictions, "Also write predicted documents as JSONL");

  CheckpointOptions ex;
  std::string doc_id;
  auto* x = app.add_subcommand("export-embeddings", "Write entity and proxy vectors of one document as CSV");
  add_common(x, ex.common);
  x->add_option("--checkpoint", ex.checkpoint, "Checkpoint file");
  x->add_option("--run", ex.run, "Run directory (uses best.ckpt; default: the latest run)");
  x->add_option("--corpus", ex.corpus, "JSONL corpus")->required();
  x->add_option("--doc", doc_id, "Document id")->required();
  x->add_option("--schema", ex.schema_path, "Schema to check against the checkpoint");
  x->add_option("-o,--out", ex.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev, predictions);
    if (x->parsed()) return cmd_export(ex, doc_id);
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDivergence;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kIo;
  } catch (const LookupError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kLookup;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
