#pragma once

// Training-set sampler: a FIFO crawl that downloads one random unseen link per
// distinct anchor path on each page and keeps the full link lists for later.

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "page_model.hpp"
#include "random.hpp"
#include "url.hpp"

namespace structcrawl {

using PageApath = std::pair<std::string, ApathKey>;

struct SampleRun {
  std::string entry;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<ParsedPage> pages;                            // the training set D, fetch order
  std::map<PageApath, std::vector<std::string>> url_lists;  // U_{p,x}
  std::map<std::string, std::string> aliases;               // redirected URL -> final URL
  std::vector<std::string> requested;                       // every URL requested, in order
  std::vector<std::string> failures;
  CorpusStore documents;                                    // raw responses of the pages in D

  /// Final identity of a discovered URL after redirects seen while sampling.
  const std::string& resolve_alias(const std::string& url) const {
    auto it = aliases.find(url);
    return it == aliases.end() ? url : it->second;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    documents.save(dir / "pages");
    std::ofstream lists(dir / "url_lists.tsv", std::ios::binary);
    for (const auto& [key, urls] : url_lists) {
      lists << key.first << '\t' << key.second.str() << '\t';
      for (std::size_t i = 0; i < urls.size(); ++i) lists << (i ? " " : "") << urls[i];
      lists << '\n';
    }
    nlohmann::ordered_json meta;
    meta["entry"] = entry;
    meta["budget"] = budget;
    meta["seed"] = seed;
    nlohmann::ordered_json page_urls = nlohmann::ordered_json::array();
    for (const auto& p : pages) page_urls.push_back(p.url);
    meta["pages"] = page_urls;
    meta["aliases"] = aliases;
    meta["requested"] = requested;
    meta["failures"] = failures;
    std::ofstream(dir / "sample.json", std::ios::binary) << meta.dump(2) << "\n";
  }

  /// Reloads a saved run; pages are re-parsed from the stored bodies.
  static SampleRun load(const std::filesystem::path& dir, const SiteScope& scope) {
    SampleRun run;
    std::ifstream meta_in(dir / "sample.json");
    if (!meta_in) throw Error(ErrorKind::Io, "cannot read " + (dir / "sample.json").string());
    auto meta = nlohmann::ordered_json::parse(meta_in);
    run.entry = meta.at("entry").get<std::string>();
    run.budget = meta.at("budget").get<std::size_t>();
    run.seed = meta.at("seed").get<std::uint64_t>();
    run.aliases = meta.at("aliases").get<std::map<std::string, std::string>>();
    run.requested = meta.at("requested").get<std::vector<std::string>>();
    run.failures = meta.at("failures").get<std::vector<std::string>>();
    run.documents = CorpusStore::load(dir / "pages");
    for (const auto& url : meta.at("pages")) {
      const auto* rec = run.documents.find(url.get<std::string>());
      if (!rec) throw Error(ErrorKind::Parse, "sample page missing from store: " + url.get<std::string>());
      run.pages.push_back(parse_page(rec->body, url.get<std::string>(), scope));
    }
    std::ifstream lists(dir / "url_lists.tsv", std::ios::binary);
    std::string line;
    while (std::getline(lists, line)) {
      if (line.empty()) continue;
      auto t1 = line.find('\t');
      auto t2 = line.find('\t', t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos) throw Error(ErrorKind::Parse, "bad url_lists row");
      std::vector<std::string> urls;
      std::istringstream in(line.substr(t2 + 1));
      for (std::string u; in >> u;) urls.push_back(u);
      run.url_lists[{line.substr(0, t1), ApathKey::parse(line.substr(t1 + 1, t2 - t1 - 1))}] = std::move(urls);
    }
    return run;
  }
};

/// Groups a page's links by anchor path, preserving first-appearance order.
inline std::vector<std::pair<ApathKey, std::vector<std::string>>> group_links_by_apath(const ParsedPage& page) {
  std::vector<std::pair<ApathKey, std::vector<std::string>>> groups;
  std::map<ApathKey, std::size_t> index;
  for (const auto& link : page.anchor_links) {
    auto [it, inserted] = index.emplace(link.apath, groups.size());
    if (inserted) groups.emplace_back(link.apath, std::vector<std::string>{});
    groups[it->second].second.push_back(link.url);
  }
  return groups;
}

inline SampleRun sample(const std::string& entry, std::size_t budget, Fetcher& fetcher, const SiteScope& scope,
                        std::uint64_t rng_seed) {
  if (budget < 1) throw Error(ErrorKind::InvalidArgument, "sample budget must be >= 1");
  auto entry_url = normalize_url(entry);
  if (!entry_url || !scope.contains(*entry_url)) {
    throw Error(ErrorKind::InvalidArgument, "entry URL outside site scope: " + entry);
  }
  SampleRun run;
  run.entry = *entry_url;
  run.budget = budget;
  run.seed = rng_seed;
  run.documents.site = scope.key();
  run.documents.entry = *entry_url;
  std::mt19937_64 rng(rng_seed);
  std::set<std::string> seen{*entry_url};
  std::set<std::string> downloaded;
  std::deque<std::string> frontier{*entry_url};

  while (!frontier.empty() && run.pages.size() < budget) {
    std::string url = std::move(frontier.front());
    frontier.pop_front();
    FetchOutcome outcome = fetch_following_redirects(fetcher, url);
    for (const auto& hop : outcome.chain) run.requested.push_back(hop);
    for (const auto& hop : outcome.chain) {
      seen.insert(hop);
      if (hop != outcome.final_url) run.aliases[hop] = outcome.final_url;
    }
    const auto& resp = outcome.response;
    if (!resp.ok() || !resp.is_html() || !downloaded.insert(outcome.final_url).second) {
      run.failures.push_back(url);
      continue;
    }
    ParsedPage page;
    try {
      page = parse_page(resp.body, outcome.final_url, scope);
    } catch (const Error&) {
      run.failures.push_back(url);
      continue;
    }
    run.documents.add(outcome.final_url, StoredRecord{resp.status, resp.content_type, resp.body, ""});
    for (auto& [apath, urls] : group_links_by_apath(page)) {
      std::vector<std::string> unseen;
      for (const auto& u : urls) {
        if (!seen.count(u) && std::find(unseen.begin(), unseen.end(), u) == unseen.end()) unseen.push_back(u);
      }
      if (!unseen.empty()) {
        const std::string& pick = unseen[uniform_index(rng, unseen.size())];
        seen.insert(pick);
        frontier.push_back(pick);
      }
      auto& list = run.url_lists[{page.url, apath}];
      list.insert(list.end(), urls.begin(), urls.end());
    }
    run.pages.push_back(std::move(page));
  }
  if (run.pages.empty()) throw Error(ErrorKind::EmptySample, "entry page could not be fetched: " + *entry_url);
  return run;
}

}  // namespace structcrawl
