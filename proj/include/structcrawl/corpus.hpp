#pragma once

// Fetch abstraction and the on-disk page store that backs offline crawls.
//
// Store layout (one directory per site):
//   index.tsv      url \t status \t content-type \t sha256 \t body-path [\t location]
//   manifest.json  {"site", "entry", "page_count"}
//   pages/NNNNNN   raw response bodies

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "digest.hpp"
#include "error.hpp"
#include "url.hpp"

namespace structcrawl {

struct FetchResponse {
  int status = 0;  // 0 = transport failure
  std::string content_type;
  std::string body;
  std::string location;  // redirect target, when status is 3xx

  bool ok() const { return status >= 200 && status < 300; }
  bool is_redirect() const { return status >= 300 && status < 400 && !location.empty(); }
  bool is_html() const {
    return content_type.empty() || content_type.find("html") != std::string::npos;
  }
};

class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual FetchResponse get(const std::string& url) = 0;
};

/// Result of fetching a URL and following redirects.
struct FetchOutcome {
  std::string final_url;
  std::vector<std::string> chain;  // every URL requested, first to last
  FetchResponse response;
};

inline FetchOutcome fetch_following_redirects(Fetcher& fetcher, const std::string& url, int max_redirects = 5) {
  FetchOutcome outcome;
  std::string current = url;
  for (int hop = 0;; ++hop) {
    outcome.chain.push_back(current);
    outcome.response = fetcher.get(current);
    outcome.final_url = current;
    if (!outcome.response.is_redirect() || hop >= max_redirects) break;
    auto base = Url::parse(current);
    auto next = base ? base->resolve(outcome.response.location) : std::nullopt;
    if (!next) break;
    current = next->str();
  }
  return outcome;
}

struct StoredRecord {
  int status = 200;
  std::string content_type = "text/html";
  std::string body;
  std::string location;
};

/// Append-only map from normalized URL to a stored response. Lives in memory;
/// save()/load() move it to and from a directory.
class CorpusStore {
 public:
  std::string site;
  std::string entry;

  void add(const std::string& url, StoredRecord record) {
    auto normalized = normalize_url(url);
    if (!normalized) throw Error(ErrorKind::InvalidArgument, "not an absolute http(s) URL: " + url);
    if (records_.count(*normalized)) return;
    order_.push_back(*normalized);
    records_.emplace(*normalized, std::move(record));
  }

  const StoredRecord* find(const std::string& url) const {
    auto it = records_.find(url);
    return it == records_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& url) const { return records_.count(url) != 0; }
  std::size_t size() const { return order_.size(); }
  const std::vector<std::string>& urls() const { return order_; }

  void save(const std::filesystem::path& root) const {
    namespace fs = std::filesystem;
    fs::create_directories(root / "pages");
    std::ofstream index(root / "index.tsv", std::ios::binary);
    if (!index) throw Error(ErrorKind::Io, "cannot write " + (root / "index.tsv").string());
    for (std::size_t i = 0; i < order_.size(); ++i) {
      const auto& url = order_[i];
      const auto& rec = records_.at(url);
      std::ostringstream name;
      name << "pages/" << std::setw(6) << std::setfill('0') << i;
      std::ofstream body(root / name.str(), std::ios::binary);
      body.write(rec.body.data(), static_cast<std::streamsize>(rec.body.size()));
      if (!body) throw Error(ErrorKind::Io, "cannot write body for " + url);
      index << url << '\t' << rec.status << '\t' << rec.content_type << '\t' << sha256_hex(rec.body) << '\t'
            << name.str();
      if (!rec.location.empty()) index << '\t' << rec.location;
      index << '\n';
    }
    nlohmann::ordered_json manifest;
    manifest["site"] = site;
    manifest["entry"] = entry;
    manifest["page_count"] = order_.size();
    std::ofstream(root / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
  }

  static CorpusStore load(const std::filesystem::path& root) {
    CorpusStore store;
    std::ifstream index(root / "index.tsv", std::ios::binary);
    if (!index) throw Error(ErrorKind::Io, "cannot read " + (root / "index.tsv").string());
    std::string line;
    while (std::getline(index, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::size_t start = 0;
      while (true) {
        auto tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (cols.size() < 5) throw Error(ErrorKind::Parse, "index.tsv row has " + std::to_string(cols.size()) + " columns");
      StoredRecord rec;
      rec.status = std::stoi(cols[1]);
      rec.content_type = cols[2];
      std::ifstream body(root / cols[4], std::ios::binary);
      if (!body) throw Error(ErrorKind::Io, "missing body file " + cols[4]);
      rec.body.assign(std::istreambuf_iterator<char>(body), std::istreambuf_iterator<char>());
      if (sha256_hex(rec.body) != cols[3]) throw Error(ErrorKind::Parse, "checksum mismatch for " + cols[0]);
      if (cols.size() > 5) rec.location = cols[5];
      store.order_.push_back(cols[0]);
      store.records_.emplace(cols[0], std::move(rec));
    }
    std::ifstream manifest_in(root / "manifest.json");
    if (manifest_in) {
      auto manifest = nlohmann::ordered_json::parse(manifest_in);
      store.site = manifest.value("site", "");
      store.entry = manifest.value("entry", "");
    }
    return store;
  }

  friend bool operator==(const CorpusStore& a, const CorpusStore& b) {
    if (a.order_ != b.order_) return false;
    for (const auto& url : a.order_) {
      const auto& x = a.records_.at(url);
      const auto& y = b.records_.at(url);
      if (x.status != y.status || x.content_type != y.content_type || x.body != y.body || x.location != y.location) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, StoredRecord> records_;
};

/// Deterministic Fetcher over a CorpusStore. Unknown URLs answer 404.
class CorpusFetcher : public Fetcher {
 public:
  explicit CorpusFetcher(const CorpusStore& store) : store_(&store) {}

  FetchResponse get(const std::string& url) override {
    ++requests_;
    auto normalized = normalize_url(url);
    const StoredRecord* rec = normalized ? store_->find(*normalized) : nullptr;
    if (!rec) return FetchResponse{404, "text/plain", "", ""};
    return FetchResponse{rec->status, rec->content_type, rec->body, rec->location};
  }

  std::size_t requests() const { return requests_; }

 private:
  const CorpusStore* store_;
  std::atomic<std::size_t> requests_ = 0;
};

}  // namespace structcrawl
