#pragma once

// Command-line front end: synth, mirror, learn, crawl and eval.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "corpus.hpp"
#include "crawler.hpp"
#include "error.hpp"
#include "live_fetcher.hpp"
#include "metrics.hpp"
#include "synth.hpp"

namespace structcrawl::cli {

namespace fs = std::filesystem;

/// Thrown for invalid invocations detected after parsing; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  // shared
  std::string config_path;
  std::string corpus;
  bool live = false;
  std::uint64_t seed = 0;
  std::string scope = "domain";
  int delay_ms = 1000;
  // synth
  std::string spec;
  // mirror / learn
  std::string entry;
  std::size_t limit = 0;
  std::size_t samples = 0;
  std::string out;
  std::size_t min_pts = 0;
  double w_bins = 0.0;
  double eps = 0.0;
  std::string volume = "all";
  // crawl
  std::string model;
  std::string mode = "ucc";
  std::string example;
  std::size_t budget = 0;
  std::string report;
  std::size_t workers = 1;
  std::size_t refresh = 0;
  bool no_info = false, no_dsim = false, no_balance = false;
  std::string known_outside;
  // eval
  std::string labels;
  std::string task;
  std::string target;
  std::string phase = "harvest";
  std::size_t series = 0;
};

inline std::unique_ptr<Fetcher> make_fetcher(const Options& o, std::unique_ptr<CorpusStore>& store_holder) {
  if (o.live) {
    LiveFetcherConfig cfg;
    cfg.per_host_delay = std::chrono::milliseconds(o.delay_ms);
    return std::make_unique<LiveFetcher>(cfg);
  }
  store_holder = std::make_unique<CorpusStore>(CorpusStore::load(o.corpus));
  return std::make_unique<CorpusFetcher>(*store_holder);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

/// defaults < --config file < explicit flags.
inline CrawlConfig resolve_config(const CLI::App& cmd, const Options& o) {
  CrawlConfig c;
  if (!o.config_path.empty()) apply_json(c, read_json_file(o.config_path));
  auto given = [&](const char* flag) { return cmd.get_option_no_throw(flag) && cmd.count(flag) > 0; };
  if (given("--seed")) c.rng_seed = o.seed;
  if (given("--scope")) c.scope_mode = parse_scope_mode(o.scope);
  if (given("--samples")) c.sample_budget = o.samples;
  if (given("--min-pts")) c.clustering.min_pts = o.min_pts;
  if (given("--w-bins")) c.clustering.w_bins = o.w_bins;
  if (given("--eps")) c.clustering.eps_override = o.eps;
  if (given("--volume")) c.volume_mode = parse_volume_mode(o.volume);
  if (given("--budget")) c.budget = o.budget;
  if (given("--example")) c.target_example = o.example;
  if (given("--workers")) c.workers = o.workers;
  if (given("--refresh")) c.policy.refresh_every = o.refresh;
  if (given("--no-info")) c.policy.ablation.use_info = false;
  if (given("--no-dsim")) c.policy.ablation.use_dsim = false;
  if (given("--no-balance")) c.policy.ablation.use_balance = false;
  if (given("--known-outside")) {
    std::ifstream in(o.known_outside);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + o.known_outside);
    for (std::string line; std::getline(in, line);) {
      if (auto url = normalize_url(line)) c.known_outside.insert(*url);
    }
  }
  c.clustering.validate();
  if (c.sample_budget < 1) throw UsageError("--samples must be >= 1");
  return c;
}

inline void require_source(const Options& o) {
  if (o.live == !o.corpus.empty()) throw UsageError("exactly one of --corpus or --live is required");
}

inline int cmd_synth(const CLI::App& cmd, const Options& o, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "synth";
  auto spec = SyntheticSiteSpec::read(o.spec);
  if (cmd.count("--seed")) spec.rng_seed = o.seed;
  auto site = generate(spec);
  site.store.save(o.out);
  site.write_labels(fs::path(o.out) / "labels.tsv");
  manifest.config = nlohmann::ordered_json{{"spec", o.spec}};
  manifest.rng_seed = spec.rng_seed;
  manifest.artifacts = {{"corpus", o.out}, {"labels", (fs::path(o.out) / "labels.tsv").string()}};
  manifest.stats = {{"pages", site.store.size()}, {"entry", site.store.entry}};
  manifest.write(fs::path(o.out) / "run_manifest.json");
  out << nlohmann::ordered_json{{"pages", site.store.size()}, {"entry", site.store.entry}}.dump() << "\n";
  return 0;
}

inline int cmd_mirror(const CLI::App& cmd, const Options& o, std::ostream& out) {
  require_source(o);
  if (o.limit < 1) throw UsageError("--limit must be >= 1");
  RunManifest manifest;
  manifest.command = "mirror";
  std::unique_ptr<CorpusStore> source;
  auto fetcher = make_fetcher(o, source);
  auto scope = SiteScope::for_url(o.entry, cmd.count("--scope") ? parse_scope_mode(o.scope) : ScopeMode::RegistrableDomain);
  auto store = mirror(o.entry, o.limit, *fetcher, scope);
  store.save(o.out);
  manifest.config = {{"entry", o.entry}, {"limit", o.limit}, {"source", o.live ? "live" : o.corpus}};
  manifest.artifacts = {{"corpus", o.out}};
  manifest.stats = {{"pages", store.size()}};
  manifest.write(fs::path(o.out) / "run_manifest.json");
  out << nlohmann::ordered_json{{"pages", store.size()}}.dump() << "\n";
  return 0;
}

inline int cmd_learn(const CLI::App& cmd, const Options& o, std::ostream& out) {
  require_source(o);
  RunManifest manifest;
  manifest.command = "learn";
  CrawlConfig config = resolve_config(cmd, o);
  std::unique_ptr<CorpusStore> source;
  auto fetcher = make_fetcher(o, source);
  LearnedModel model = learn(o.entry, config, *fetcher);
  save_model(model, o.out);
  manifest.config = to_json(config);
  manifest.config["entry"] = o.entry;
  manifest.config["source"] = o.live ? "live" : fs::absolute(o.corpus).string();
  manifest.rng_seed = config.rng_seed;
  manifest.artifacts = {{"model", o.out}};
  nlohmann::ordered_json stats{{"pages", model.run.pages.size()},
                               {"features", model.vocab.size()},
                               {"clusters", model.sitemap.size()},
                               {"outliers", model.sitemap.outliers.size()},
                               {"eps", model.sitemap.eps},
                               {"navigation_entries", model.table.entries.size()}};
  manifest.stats = stats;
  manifest.write(fs::path(o.out) / "manifest.json");
  if (model.degenerate) {
    throw Error(ErrorKind::DegenerateModel, "no cluster formed from " + std::to_string(model.run.pages.size()) +
                                                " sampled pages; model written but cannot guide a crawl");
  }
  out << stats.dump() << "\n";
  return 0;
}

inline int cmd_crawl(const CLI::App& cmd, Options o, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "crawl";
  auto model_manifest = read_json_file((fs::path(o.model) / "manifest.json").string());
  // Fetch source defaults to the one the model was learned from.
  if (!o.live && o.corpus.empty()) {
    auto src = model_manifest.at("config").value("source", std::string("live"));
    if (src == "live") {
      o.live = true;
    } else {
      o.corpus = src;
    }
  }
  require_source(o);
  CrawlConfig config;
  apply_json(config, model_manifest.at("config"));
  CrawlConfig flags = resolve_config(cmd, o);
  if (!o.config_path.empty() || cmd.count("--budget")) config.budget = flags.budget;
  config.policy = flags.policy;
  config.workers = flags.workers;
  config.known_outside = flags.known_outside;
  config.target_example = flags.target_example;
  if (o.mode != "bfs") config.mode = parse_policy_mode(o.mode);
  if (o.mode == "target" && config.target_example.empty()) throw UsageError("--mode target needs --example URL");
  std::unique_ptr<CorpusStore> source;
  auto fetcher = make_fetcher(o, source);
  LearnedModel model = load_model(o.model);
  CrawlReport report;
  if (o.mode == "bfs") {
    report = bfs_crawl(model.run.entry, config.budget, *fetcher, model.scope);
  } else {
    report = concatenate(learning_records(model), harvest(model, config, *fetcher));
  }
  {
    std::ostringstream buf;
    report.write_jsonl(buf);
    write_file_atomic(o.report, buf.str());
  }
  manifest.config = to_json(config);
  manifest.config["mode"] = o.mode;
  manifest.config["model"] = o.model;
  manifest.rng_seed = config.rng_seed;
  manifest.artifacts = {{"report", o.report}};
  nlohmann::ordered_json stats;
  stats["records"] = report.records.size();
  stats["harvested"] = report.count_phase(o.mode == "bfs" ? "bfs" : "harvest");
  stats["cluster_counts"] = report.cluster_counts;
  stats["frontier"] = {{"pushed", report.frontier.pushed},
                       {"rescored", report.frontier.rescored},
                       {"max_size", report.frontier.max_size},
                       {"remaining", report.frontier.remaining}};
  manifest.stats = stats;
  manifest.write(o.report + ".manifest.json");
  out << stats.dump() << "\n";
  return 0;
}

inline int cmd_eval(const CLI::App& cmd, const Options& o, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "eval";
  GroundTruth truth = GroundTruth::read_labels(o.labels);
  if (cmd.count("--min-pts")) truth.annotation_outlier_min = o.min_pts;
  CrawlReport report;
  {
    std::ifstream in(o.report);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + o.report);
    report = CrawlReport::read_jsonl(in);
  }
  std::set<std::string> phases;
  if (o.phase == "all") {
    phases = {"learn", "harvest", "bfs"};
  } else {
    phases = {o.phase};
    if (o.phase == "harvest") phases.insert("bfs");
  }
  nlohmann::ordered_json result;
  result["task"] = o.task;
  if (o.task == "cluster") {
    std::map<std::string, ClusterId> partition;
    if (!o.model.empty()) {
      auto model = load_model(o.model);
      for (const auto& p : model.run.pages) partition[p.url] = *model.sitemap.label_of(p.url);
    } else {
      for (const auto& r : report.records) {
        if (r.cluster && phases.count(r.phase)) partition.emplace(r.url, *r.cluster);
      }
    }
    result["metrics"] = clustering_quality(partition, truth).to_json();
  } else {
    CrawlTask task = o.task == "ucc" ? CrawlTask::Ucc : CrawlTask::Target;
    if (task == CrawlTask::Target) {
      if (!o.target.empty()) {
        truth.target_type = o.target;
      } else if (!o.example.empty()) {
        truth.target_type = truth.type_of(normalize_url(o.example).value_or(o.example));
      } else {
        throw UsageError("--task target needs --target TYPE or --example URL");
      }
      result["target"] = *truth.target_type;
    }
    auto crawled = crawled_urls(report, phases);
    result["metrics"] = crawl_quality(crawled, truth, task).to_json();
    if (o.series > 0) {
      nlohmann::ordered_json series = nlohmann::ordered_json::array();
      for (std::size_t n = o.series; n <= crawled.size(); n += o.series) {
        std::vector<std::string> prefix(crawled.begin(), crawled.begin() + static_cast<std::ptrdiff_t>(n));
        auto m = crawl_quality(prefix, truth, task).to_json();
        series.push_back(m);
      }
      result["series"] = series;
    }
  }
  out << result.dump(2) << "\n";
  if (!o.out.empty()) {
    write_file_atomic(o.out, result.dump(2) + "\n");
    manifest.config = {{"report", o.report}, {"labels", o.labels}, {"task", o.task}, {"phase", o.phase}};
    manifest.artifacts = {{"metrics", o.out}};
    manifest.write(o.out + ".manifest.json");
  }
  return 0;
}

inline void emit_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << nlohmann::ordered_json{{"error", kind}, {"message", message}}.dump() << "\n";
}

/// Returns the process exit code: 0 success, 1 runtime failure, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Structure-driven site crawler: sample, cluster, navigate, harvest."};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic site corpus with ground-truth labels");
  synth->add_option("--spec", o.spec, "Site spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", o.out, "Output corpus directory")->required();
  synth->add_option("--seed", o.seed, "Override the spec seed");

  auto* mir = app.add_subcommand("mirror", "Breadth-first mirror of a site into a corpus directory");
  mir->add_option("--entry", o.entry, "Entry URL")->required();
  mir->add_option("--limit", o.limit, "Maximum pages to store")->required();
  mir->add_option("--out", o.out, "Output corpus directory")->required();
  mir->add_option("--corpus", o.corpus, "Read from a stored corpus")->check(CLI::ExistingDirectory);
  mir->add_flag("--live", o.live, "Fetch over the network");
  mir->add_option("--delay-ms", o.delay_ms, "Per-host delay for live fetching");
  mir->add_option("--scope", o.scope, "Site boundary: domain or host");

  auto* lrn = app.add_subcommand("learn", "Sample a site and build the site model");
  lrn->add_option("--entry", o.entry, "Entry URL")->required();
  lrn->add_option("--samples", o.samples, "Sample budget (pages)");
  lrn->add_option("--corpus", o.corpus, "Read from a stored corpus")->check(CLI::ExistingDirectory);
  lrn->add_flag("--live", o.live, "Fetch over the network");
  lrn->add_option("--delay-ms", o.delay_ms, "Per-host delay for live fetching");
  lrn->add_option("--seed", o.seed, "Sampler seed");
  lrn->add_option("--out", o.out, "Model directory")->required();
  lrn->add_option("--config", o.config_path, "Configuration JSON")->check(CLI::ExistingFile);
  lrn->add_option("--scope", o.scope, "Site boundary: domain or host");
  lrn->add_option("--min-pts", o.min_pts, "DBSCAN minPts");
  lrn->add_option("--w-bins", o.w_bins, "K-dist histogram width factor");
  lrn->add_option("--eps", o.eps, "Fixed eps instead of the estimate");
  lrn->add_option("--volume", o.volume, "Adjacency volume: all or labeled");

  auto* crw = app.add_subcommand("crawl", "Harvest a site with a learned model");
  crw->add_option("--model", o.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  crw->add_option("--mode", o.mode, "ucc, target or bfs")->check(CLI::IsMember({"ucc", "target", "bfs"}));
  crw->add_option("--example", o.example, "Example page of the target type");
  crw->add_option("--budget", o.budget, "Harvest budget (pages)");
  crw->add_option("--report", o.report, "Output JSONL report")->required();
  crw->add_option("--corpus", o.corpus, "Read from a stored corpus")->check(CLI::ExistingDirectory);
  crw->add_flag("--live", o.live, "Fetch over the network");
  crw->add_option("--delay-ms", o.delay_ms, "Per-host delay for live fetching");
  crw->add_option("--workers", o.workers, "Concurrent fetches (1 keeps the crawl deterministic)");
  crw->add_option("--config", o.config_path, "Configuration JSON")->check(CLI::ExistingFile);
  crw->add_option("--refresh", o.refresh, "Downloads between cluster-score refreshes");
  crw->add_flag("--no-info", o.no_info, "Drop the Info factor");
  crw->add_flag("--no-dsim", o.no_dsim, "Drop the DSim factor");
  crw->add_flag("--no-balance", o.no_balance, "Drop the Balance factor");
  crw->add_option("--known-outside", o.known_outside, "File of URLs known to lie outside the corpus")
      ->check(CLI::ExistingFile);

  auto* evl = app.add_subcommand("eval", "Score a crawl report or clustering against ground truth");
  evl->add_option("--report", o.report, "Crawl report JSONL")->required()->check(CLI::ExistingFile);
  evl->add_option("--labels", o.labels, "Ground-truth labels.tsv")->required()->check(CLI::ExistingFile);
  evl->add_option("--task", o.task, "ucc, target or cluster")->required()->check(CLI::IsMember({"ucc", "target", "cluster"}));
  evl->add_option("--target", o.target, "Target page type");
  evl->add_option("--example", o.example, "Example URL whose type is the target");
  evl->add_option("--model", o.model, "Model directory (cluster task: score the sitemap)")->check(CLI::ExistingDirectory);
  evl->add_option("--phase", o.phase, "harvest, learn or all")->check(CLI::IsMember({"harvest", "learn", "all"}));
  evl->add_option("--series", o.series, "Also emit metrics after every N pages");
  evl->add_option("--min-pts", o.min_pts, "Annotation-outlier threshold");
  evl->add_option("--out", o.out, "Also write metrics to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "Usage", e.what());
    err << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(*synth, o, out);
    if (mir->parsed()) return cmd_mirror(*mir, o, out);
    if (lrn->parsed()) return cmd_learn(*lrn, o, out);
    if (crw->parsed()) return cmd_crawl(*crw, o, out);
    if (evl->parsed()) return cmd_eval(*evl, o, out);
  } catch (const UsageError& e) {
    emit_error(err, "Usage", e.what());
    return 2;
  } catch (const Error& e) {
    emit_error(err, std::string(to_string(e.kind())), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error(err, "Internal", e.what());
    return 1;
  }
  return 2;
}

}  // namespace structcrawl::cli
