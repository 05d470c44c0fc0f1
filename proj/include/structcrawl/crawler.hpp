#pragma once

// Two-phase crawl: learn a site model from a structural sample, then harvest
// with a priority frontier ordered by the navigation model.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clustering.hpp"
#include "corpus.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "navigation.hpp"
#include "page_model.hpp"
#include "policy.hpp"
#include "sampler.hpp"

namespace structcrawl {

struct CrawlConfig {
  std::size_t budget = 5000;
  std::size_t sample_budget = 1000;
  PolicyMode mode = PolicyMode::Ucc;
  std::string target_example;
  ScopeMode scope_mode = ScopeMode::RegistrableDomain;
  std::uint64_t rng_seed = 0;
  PolicyConfig policy;
  ClusteringConfig clustering;
  VolumeMode volume_mode = VolumeMode::AllLinks;
  std::set<std::string> known_outside;  // URLs known to lie outside the corpus
  bool count_non_html = true;
  std::size_t workers = 1;
  int max_redirects = 5;
};

struct LearnedModel {
  SiteScope scope;
  SampleRun run;
  FeatureVocabulary vocab;
  std::vector<PageFeatures> training;
  Sitemap sitemap;
  NavigationTable table;
  ClusterGraph graph;
  bool degenerate = false;  // no cluster formed: nothing to navigate by
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string vocabulary_fingerprint(const FeatureVocabulary& vocab) {
  std::ostringstream out;
  vocab.write(out);
  return sha256_hex(out.str()).substr(0, 16);
}

}  // namespace detail

/// sample -> vocabulary/features -> DBSCAN sitemap -> navigation table.
/// The document-frequency floor is min_pts, capped at the sample size.
inline LearnedModel learn(const std::string& entry, const CrawlConfig& config, Fetcher& fetcher) {
  LearnedModel model;
  model.scope = SiteScope::for_url(entry, config.scope_mode);
  model.run = sample(entry, config.sample_budget, fetcher, model.scope, config.rng_seed);
  std::size_t min_df = std::min(config.clustering.min_pts, model.run.pages.size());
  model.vocab = build_vocabulary(model.run.pages, min_df);
  for (const auto& page : model.run.pages) model.training.push_back(featurize(page, model.vocab));
  model.sitemap = cluster(model.training, config.clustering, detail::vocabulary_fingerprint(model.vocab));
  model.table = build_table(model.run, model.sitemap);
  model.graph = build_adjacency(model.table, model.sitemap, config.volume_mode);
  model.degenerate = model.sitemap.clusters.empty();
  return model;
}

inline void save_model(const LearnedModel& model, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  model.run.save(dir / "sample");
  {
    std::ofstream out(dir / "vocab.tsv", std::ios::binary);
    model.vocab.write(out);
  }
  std::ofstream(dir / "sitemap.json", std::ios::binary) << model.sitemap.to_json().dump(2) << "\n";
  nlohmann::ordered_json nav;
  nav["entries"] = model.table.to_json();
  nav["adjacency"] = model.graph.to_json();
  std::ofstream(dir / "navigation.json", std::ios::binary) << nav.dump(2) << "\n";
  std::ofstream training(dir / "training.tsv", std::ios::binary);
  for (const auto& f : model.training) {
    training << f.url << '\t' << *model.sitemap.label_of(f.url);
    for (std::size_t i = 0; i < f.weights.size(); ++i) {
      if (f.weights[i] != 0.0) training << '\t' << i << ':' << detail::format_double(f.weights[i]);
    }
    training << '\n';
  }
  nlohmann::ordered_json meta;
  meta["scope_key"] = model.scope.key();
  meta["scope_mode"] = model.scope.mode() == ScopeMode::SameHost ? "host" : "domain";
  meta["degenerate"] = model.degenerate;
  std::ofstream(dir / "model.json", std::ios::binary) << meta.dump(2) << "\n";
}

inline LearnedModel load_model(const std::filesystem::path& dir) {
  LearnedModel model;
  std::ifstream meta_in(dir / "model.json");
  if (!meta_in) throw Error(ErrorKind::Io, "not a model directory: " + dir.string());
  auto meta = nlohmann::ordered_json::parse(meta_in);
  model.degenerate = meta.at("degenerate").get<bool>();
  auto mode = meta.at("scope_mode").get<std::string>() == "host" ? ScopeMode::SameHost : ScopeMode::RegistrableDomain;
  {
    std::ifstream in(dir / "vocab.tsv");
    model.vocab = FeatureVocabulary::read(in);
  }
  std::ifstream sitemap_in(dir / "sitemap.json");
  model.sitemap = Sitemap::from_json(nlohmann::ordered_json::parse(sitemap_in));
  std::ifstream nav_in(dir / "navigation.json");
  auto nav = nlohmann::ordered_json::parse(nav_in);
  model.table = NavigationTable::from_json(nav.at("entries"));
  model.graph = ClusterGraph::from_json(nav.at("adjacency"));
  std::ifstream training(dir / "training.tsv");
  std::string line;
  while (std::getline(training, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PageFeatures f;
    std::string label;
    std::getline(row, f.url, '\t');
    std::getline(row, label, '\t');
    f.weights.assign(model.vocab.size(), 0.0);
    for (std::string cell; std::getline(row, cell, '\t');) {
      auto colon = cell.find(':');
      std::size_t index = std::stoul(cell.substr(0, colon));
      double value = 0.0;
      std::from_chars(cell.data() + colon + 1, cell.data() + cell.size(), value);
      if (index >= f.weights.size()) throw Error(ErrorKind::Parse, "feature index out of range in training.tsv");
      f.weights[index] = value;
    }
    model.training.push_back(std::move(f));
  }
  auto entry = nlohmann::ordered_json::parse(std::ifstream(dir / "sample" / "sample.json")).at("entry").get<std::string>();
  model.scope = SiteScope::for_url(entry, mode);
  model.run = SampleRun::load(dir / "sample", model.scope);
  return model;
}

struct CrawlRecord {
  std::size_t seq = 0;
  std::string url;
  std::optional<ClusterId> cluster;  // nullopt when the page was not parsed
  std::optional<double> score;
  std::string phase;
  int status = 0;
};

struct FrontierStats {
  std::size_t pushed = 0;
  std::size_t rescored = 0;
  std::size_t max_size = 0;
  std::size_t remaining = 0;
};

struct CrawlReport {
  std::vector<CrawlRecord> records;
  std::vector<std::size_t> cluster_counts;
  FrontierStats frontier;

  std::size_t count_phase(std::string_view phase) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const CrawlRecord& r) { return r.phase == phase; }));
  }

  void write_jsonl(std::ostream& out) const {
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["seq"] = r.seq;
      j["url"] = r.url;
      j["cluster"] = r.cluster ? nlohmann::ordered_json(*r.cluster) : nlohmann::ordered_json(nullptr);
      j["score"] = r.score ? nlohmann::ordered_json(*r.score) : nlohmann::ordered_json(nullptr);
      j["phase"] = r.phase;
      j["status"] = r.status;
      out << j.dump() << "\n";
    }
  }

  static CrawlReport read_jsonl(std::istream& in) {
    CrawlReport report;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::ordered_json::parse(line);
      CrawlRecord r;
      r.seq = j.at("seq").get<std::size_t>();
      r.url = j.at("url").get<std::string>();
      if (!j.at("cluster").is_null()) r.cluster = j.at("cluster").get<ClusterId>();
      if (!j.at("score").is_null()) r.score = j.at("score").get<double>();
      r.phase = j.at("phase").get<std::string>();
      r.status = j.value("status", 0);
      report.records.push_back(std::move(r));
    }
    return report;
  }
};

/// Policy state plus the cached cluster scores it implies. Scores refresh
/// every R classified downloads; `version` changes on each refresh.
class ScoreBoard {
 public:
  ScoreBoard(PolicyState state, PolicyConfig config) : state_(std::move(state)), config_(std::move(config)) {
    refresh();
  }

  void record(ClusterId label) {
    state_.record_crawl(label);
    if (++since_refresh_ >= std::max<std::size_t>(config_.refresh_every, 1)) refresh();
  }

  void refresh() {
    scores_ = cluster_scores(state_);
    since_refresh_ = 0;
    ++version_;
  }

  const PolicyState& state() const { return state_; }
  const PolicyConfig& config() const { return config_; }
  const std::vector<double>& scores() const { return scores_; }
  std::uint64_t version() const { return version_; }

 private:
  PolicyState state_;
  PolicyConfig config_;
  std::vector<double> scores_;
  std::size_t since_refresh_ = 0;
  std::uint64_t version_ = 0;
};

/// featurize + kNN, then count the page toward its cluster.
inline ClusterId classify_and_update(const ParsedPage& page, const LearnedModel& model, ScoreBoard& board) {
  ClusterId label = classify(featurize(page, model.vocab), model.sitemap, model.training);
  board.record(label);
  return label;
}

struct FrontierEntry {
  std::string url;
  std::string source_url;
  ClusterId source_cluster = kOutlier;
  ApathKey apath;
  double score = 0.0;
  std::size_t seq = 0;
  std::uint64_t version = 0;
  bool pinned = false;  // score fixed (known-outside URLs)
};

/// Max-score first; equal scores pop in discovery order.
struct FrontierOrder {
  bool operator()(const FrontierEntry& a, const FrontierEntry& b) const {
    if (a.score != b.score) return a.score < b.score;
    return a.seq > b.seq;
  }
};

inline double score_url(const FrontierEntry& entry, const NavigationTable& table, const ScoreBoard& board) {
  return score_url(entry.source_cluster, entry.apath, table, board.scores(), board.config());
}

class Harvester {
 public:
  Harvester(const LearnedModel& model, const CrawlConfig& config, Fetcher& fetcher)
      : model_(model), config_(config), fetcher_(fetcher) {}

  CrawlReport run() {
    if (model_.degenerate) throw Error(ErrorKind::DegenerateModel, "model has no clusters to navigate by");
    for (const auto& url : model_.run.requested) fetched_.insert(url);
    std::optional<ClusterId> target;
    if (config_.mode == PolicyMode::Target) target = resolve_target();
    board_.emplace(make_policy_state(model_.sitemap, model_.graph, config_.mode, target, config_.policy),
                   config_.policy);
    for (const auto& page : model_.run.pages) {
      ClusterId source = *model_.sitemap.label_of(page.url);
      for (const auto& [apath, urls] : group_links_by_apath(page)) {
        for (const auto& url : urls) push(url, page.url, source, apath);
      }
    }
    for (const auto& [url, label] : pending_example_links_) push(url.first, url.second, label.first, label.second);
    while (harvested_ < config_.budget && !heap_.empty()) {
      std::vector<FrontierEntry> batch;
      while (batch.size() < std::max<std::size_t>(config_.workers, 1) && harvested_ + batch.size() < config_.budget) {
        auto next = pop_next();
        if (!next) break;
        batch.push_back(std::move(*next));
      }
      if (batch.empty()) break;
      process_batch(batch);
    }
    report_.cluster_counts = board_->state().crawled_counts;
    report_.frontier.remaining = heap_.size();
    return std::move(report_);
  }

 private:
  ClusterId resolve_target() {
    auto example = normalize_url(config_.target_example);
    if (!example) throw Error(ErrorKind::InvalidArgument, "target mode needs an absolute example URL");
    std::string url = model_.run.resolve_alias(*example);
    if (auto label = model_.sitemap.label_of(url)) {
      if (*label == kOutlier) throw Error(ErrorKind::TargetClassificationFailed, "example page is an outlier: " + url);
      return *label;
    }
    FetchOutcome outcome = fetch_following_redirects(fetcher_, url, config_.max_redirects);
    for (const auto& hop : outcome.chain) fetched_.insert(hop);
    ++harvested_;
    if (!outcome.response.ok() || !outcome.response.is_html()) {
      throw Error(ErrorKind::TargetClassificationFailed, "example page could not be fetched: " + url);
    }
    ParsedPage page = parse_page(outcome.response.body, outcome.final_url, model_.scope);
    ClusterId label = classify(featurize(page, model_.vocab), model_.sitemap, model_.training);
    add_record(outcome.final_url, label, std::nullopt, outcome.response.status);
    if (label == kOutlier) throw Error(ErrorKind::TargetClassificationFailed, "example page classified as outlier");
    for (const auto& link : page.anchor_links) {
      pending_example_links_.push_back({{link.url, outcome.final_url}, {label, link.apath}});
    }
    return label;
  }

  void push(const std::string& raw_url, const std::string& source_url, ClusterId source, const ApathKey& apath) {
    const std::string& url = model_.run.resolve_alias(raw_url);
    if (fetched_.count(url)) return;
    FrontierEntry entry{url, source_url, source, apath, 0.0, 0, board_->version(), false};
    if (config_.known_outside.count(url)) {
      entry.pinned = true;
    } else {
      entry.score = score_url(entry, model_.table, *board_);
    }
    auto [it, inserted] = best_.emplace(url, entry.score);
    if (!inserted) {
      if (entry.score <= it->second) return;
      it->second = entry.score;
    }
    entry.seq = next_seq_++;
    heap_.push(std::move(entry));
    ++report_.frontier.pushed;
    report_.frontier.max_size = std::max(report_.frontier.max_size, heap_.size());
  }

  std::optional<FrontierEntry> pop_next() {
    while (!heap_.empty()) {
      FrontierEntry entry = heap_.top();
      heap_.pop();
      if (fetched_.count(entry.url) || claimed_.count(entry.url)) continue;
      if (!entry.pinned && entry.version != board_->version()) {
        entry.score = score_url(entry, model_.table, *board_);
        entry.version = board_->version();
        ++report_.frontier.rescored;
        if (!heap_.empty() && FrontierOrder{}(entry, heap_.top())) {
          heap_.push(std::move(entry));
          continue;
        }
      }
      claimed_.insert(entry.url);
      return entry;
    }
    return std::nullopt;
  }

  void process_batch(std::vector<FrontierEntry>& batch) {
    std::vector<FetchOutcome> outcomes(batch.size());
    if (batch.size() == 1) {
      outcomes[0] = fetch_following_redirects(fetcher_, batch[0].url, config_.max_redirects);
    } else {
      std::vector<std::future<FetchOutcome>> futures;
      for (const auto& entry : batch) {
        futures.push_back(std::async(std::launch::async, [this, url = entry.url] {
          return fetch_following_redirects(fetcher_, url, config_.max_redirects);
        }));
      }
      for (std::size_t i = 0; i < batch.size(); ++i) outcomes[i] = futures[i].get();
    }
    for (std::size_t i = 0; i < batch.size(); ++i) apply(batch[i], outcomes[i]);
  }

  void apply(const FrontierEntry& entry, const FetchOutcome& outcome) {
    claimed_.erase(entry.url);
    bool duplicate = fetched_.count(outcome.final_url) != 0;
    for (const auto& hop : outcome.chain) fetched_.insert(hop);
    const auto& resp = outcome.response;
    bool html = resp.ok() && resp.is_html();
    if (html || config_.count_non_html || !resp.ok()) ++harvested_;
    if (!html || duplicate) {
      add_record(outcome.final_url, std::nullopt, entry.score, resp.status);
      return;
    }
    ParsedPage page;
    try {
      page = parse_page(resp.body, outcome.final_url, model_.scope);
    } catch (const Error&) {
      add_record(outcome.final_url, std::nullopt, entry.score, resp.status);
      return;
    }
    ClusterId label = classify_and_update(page, model_, *board_);
    add_record(outcome.final_url, label, entry.score, resp.status);
    for (const auto& link : page.anchor_links) push(link.url, page.url, label, link.apath);
  }

  void add_record(const std::string& url, std::optional<ClusterId> cluster, std::optional<double> score, int status) {
    report_.records.push_back(CrawlRecord{report_.records.size() + 1, url, cluster, score, "harvest", status});
  }

  const LearnedModel& model_;
  const CrawlConfig& config_;
  Fetcher& fetcher_;
  std::optional<ScoreBoard> board_;
  std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, FrontierOrder> heap_;
  std::map<std::string, double> best_;
  std::set<std::string> fetched_;
  std::set<std::string> claimed_;
  std::vector<std::pair<std::pair<std::string, std::string>, std::pair<ClusterId, ApathKey>>> pending_example_links_;
  std::size_t next_seq_ = 0;
  std::size_t harvested_ = 0;
  CrawlReport report_;
};

/// Harvest phase only; records carry phase "harvest".
inline CrawlReport harvest(const LearnedModel& model, const CrawlConfig& config, Fetcher& fetcher) {
  return Harvester(model, config, fetcher).run();
}

/// Records for the learning-phase downloads, in fetch order.
inline CrawlReport learning_records(const LearnedModel& model) {
  CrawlReport report;
  for (const auto& page : model.run.pages) {
    report.records.push_back(CrawlRecord{report.records.size() + 1, page.url, model.sitemap.label_of(page.url),
                                         std::nullopt, "learn", 200});
  }
  return report;
}

/// Learning records followed by harvest records, renumbered.
inline CrawlReport concatenate(const CrawlReport& first, const CrawlReport& second) {
  CrawlReport out = second;
  out.records = first.records;
  for (auto r : second.records) {
    r.seq = out.records.size() + 1;
    out.records.push_back(std::move(r));
  }
  return out;
}

/// Breadth-first traversal of in-site links. `visit` sees every fetch result
/// (after redirects) and the parsed page when the response was HTML.
/// Stops after `limit` fetches that satisfy `counts`. A redirect landing on
/// an already known URL is not visited; `on_alias` still sees it.
inline void bfs_traverse(const std::string& entry, std::size_t limit, Fetcher& fetcher, const SiteScope& scope,
                         const std::function<void(const FetchOutcome&, const ParsedPage*)>& visit,
                         const std::function<bool(const FetchOutcome&)>& counts,
                         const std::function<void(const FetchOutcome&)>& on_alias = {}, int max_redirects = 5) {
  auto start = normalize_url(entry);
  if (!start) throw Error(ErrorKind::InvalidArgument, "entry is not an absolute http(s) URL: " + entry);
  std::deque<std::string> queue{*start};
  std::set<std::string> seen{*start};
  std::size_t done = 0;
  while (!queue.empty() && done < limit) {
    std::string url = std::move(queue.front());
    queue.pop_front();
    FetchOutcome outcome = fetch_following_redirects(fetcher, url, max_redirects);
    bool duplicate = false;
    for (const auto& hop : outcome.chain) {
      if (hop != url && !seen.insert(hop).second && hop == outcome.final_url) duplicate = true;
    }
    if (duplicate) {
      if (on_alias) on_alias(outcome);
      continue;
    }
    if (counts(outcome)) ++done;
    std::optional<ParsedPage> page;
    if (outcome.response.ok() && outcome.response.is_html()) {
      try {
        page = parse_page(outcome.response.body, outcome.final_url, scope);
      } catch (const Error&) {
      }
    }
    visit(outcome, page ? &*page : nullptr);
    if (page) {
      for (const auto& link : page->anchor_links) {
        if (seen.insert(link.url).second) queue.push_back(link.url);
      }
    }
  }
}

/// Baseline breadth-first crawl of `budget` pages; records carry phase "bfs".
inline CrawlReport bfs_crawl(const std::string& entry, std::size_t budget, Fetcher& fetcher, const SiteScope& scope) {
  CrawlReport report;
  bfs_traverse(
      entry, budget, fetcher, scope,
      [&](const FetchOutcome& outcome, const ParsedPage*) {
        report.records.push_back(
            CrawlRecord{report.records.size() + 1, outcome.final_url, std::nullopt, std::nullopt, "bfs",
                        outcome.response.status});
      },
      [](const FetchOutcome&) { return true; });
  return report;
}

/// BFS mirror into a page store; only successful responses are stored, and
/// `limit` bounds the number of stored pages.
inline CorpusStore mirror(const std::string& entry, std::size_t limit, Fetcher& fetcher, const SiteScope& scope) {
  if (limit < 1) throw Error(ErrorKind::InvalidArgument, "mirror limit must be >= 1");
  CorpusStore store;
  store.site = scope.key();
  store.entry = normalize_url(entry).value_or(entry);
  auto add_hops = [&](const FetchOutcome& outcome) {
    for (std::size_t i = 0; i + 1 < outcome.chain.size(); ++i) {
      store.add(outcome.chain[i], StoredRecord{301, "text/plain", "", outcome.chain[i + 1]});
    }
  };
  bfs_traverse(
      entry, limit, fetcher, scope,
      [&](const FetchOutcome& outcome, const ParsedPage*) {
        if (!outcome.response.ok()) return;
        add_hops(outcome);
        store.add(outcome.final_url, StoredRecord{outcome.response.status, outcome.response.content_type,
                                                  outcome.response.body, ""});
      },
      [](const FetchOutcome& outcome) { return outcome.response.ok(); },
      [&](const FetchOutcome& outcome) {
        if (outcome.response.ok()) add_hops(outcome);
      });
  return store;
}

}  // namespace structcrawl
