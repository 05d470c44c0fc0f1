#pragma once

// Evaluation against ground-truth page types: clustering quality, kNN
// classification precision, crawl quality and type entropy.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clustering.hpp"
#include "crawler.hpp"
#include "error.hpp"
#include "page_model.hpp"
#include "random.hpp"

namespace structcrawl {

struct GroundTruth {
  std::map<std::string, std::string> labels;  // url -> page type
  std::map<std::string, bool> ucc;            // page type -> flag
  std::optional<std::string> target_type;
  std::size_t annotation_outlier_min = 4;

  const std::string& type_of(const std::string& url) const {
    auto it = labels.find(url);
    if (it == labels.end()) throw Error(ErrorKind::UnlabeledPage, "no ground-truth label for " + url);
    return it->second;
  }

  std::size_t type_size(const std::string& type) const {
    if (sizes_.empty()) {
      for (const auto& [url, t] : labels) ++sizes_[t];
    }
    auto it = sizes_.find(type);
    return it == sizes_.end() ? 0 : it->second;
  }

  /// Types with fewer than annotation_outlier_min pages are left out of
  /// clustering metrics.
  bool is_annotation_outlier(const std::string& type) const { return type_size(type) < annotation_outlier_min; }

  bool is_ucc(const std::string& url) const {
    auto it = labels.find(url);
    return it != labels.end() && ucc.at(it->second);
  }

  /// labels.tsv rows: url, type, is_ucc (0/1).
  static GroundTruth read_labels(std::istream& in) {
    GroundTruth truth;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      std::istringstream cells(line);
      std::string url, type, flag;
      if (!std::getline(cells, url, '\t') || !std::getline(cells, type, '\t') || !std::getline(cells, flag, '\t')) {
        throw Error(ErrorKind::Parse, "labels row " + std::to_string(row) + " needs url, type and is_ucc");
      }
      truth.labels[url] = type;
      bool is_ucc = flag == "1" || flag == "true";
      auto [it, inserted] = truth.ucc.emplace(type, is_ucc);
      if (!inserted && it->second != is_ucc) throw Error(ErrorKind::Parse, "inconsistent UCC flag for type " + type);
    }
    return truth;
  }

  static GroundTruth read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    return read_labels(in);
  }

 private:
  mutable std::map<std::string, std::size_t> sizes_;
};

struct MetricsReport {
  std::optional<double> purity, macro_f, micro_f, macro_prec, micro_prec, valid_ratio, recall, f_measure,
      harvest_rate, entropy;
  std::optional<std::size_t> pages;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    auto put = [&](const char* name, const auto& v) {
      if (v) j[name] = *v;
    };
    put("pages", pages);
    put("purity", purity);
    put("macro_f", macro_f);
    put("micro_f", micro_f);
    put("macro_prec", macro_prec);
    put("micro_prec", micro_prec);
    put("valid_ratio", valid_ratio);
    put("harvest_rate", harvest_rate);
    put("recall", recall);
    put("f_measure", f_measure);
    put("entropy", entropy);
    return j;
  }
};

inline double f1(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

/// Shannon entropy in bits of the type distribution of `types`.
inline double type_entropy(const std::vector<std::string>& types) {
  if (types.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : types) ++counts[t];
  double h = 0.0;
  for (const auto& [t, c] : counts) {
    double p = static_cast<double>(c) / static_cast<double>(types.size());
    h -= p * std::log2(p);
  }
  return h;
}

/// Purity and best-type F over a URL -> cluster partition. Pages of
/// annotation-outlier types are dropped; algorithm outliers (kOutlier) are
/// singleton clusters. Micro-F weights clusters by size, macro-F does not.
inline MetricsReport clustering_quality(const std::map<std::string, ClusterId>& partition, const GroundTruth& truth) {
  std::vector<std::vector<std::string>> clusters;  // member types
  std::map<ClusterId, std::size_t> slot;
  std::map<std::string, std::size_t> type_totals;
  for (const auto& [url, label] : partition) {
    const auto& type = truth.type_of(url);
    if (truth.is_annotation_outlier(type)) continue;
    ++type_totals[type];
    if (label == kOutlier) {
      clusters.push_back({type});
      continue;
    }
    auto [it, inserted] = slot.emplace(label, clusters.size());
    if (inserted) clusters.emplace_back();
    clusters[it->second].push_back(type);
  }
  MetricsReport report;
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  report.pages = n;
  if (n == 0) return report;
  double purity = 0.0, micro = 0.0, macro = 0.0;
  for (const auto& members : clusters) {
    std::map<std::string, std::size_t> overlap;
    for (const auto& t : members) ++overlap[t];
    std::size_t best_overlap = 0;
    double best_f = 0.0;
    for (const auto& [t, c] : overlap) {
      best_overlap = std::max(best_overlap, c);
      double p = static_cast<double>(c) / static_cast<double>(members.size());
      double r = static_cast<double>(c) / static_cast<double>(type_totals.at(t));
      best_f = std::max(best_f, f1(p, r));
    }
    purity += static_cast<double>(best_overlap);
    micro += static_cast<double>(members.size()) * best_f;
    macro += best_f;
  }
  report.purity = purity / static_cast<double>(n);
  report.micro_f = micro / static_cast<double>(n);
  report.macro_f = macro / static_cast<double>(clusters.size());
  return report;
}

/// Test pages are correct when their cluster's majority training type
/// (ties: larger type, then lower type id) equals their own type. Clusters
/// without training members, and test pages classified as outliers, score 0.
inline MetricsReport classification_precision(const std::map<std::string, ClusterId>& train,
                                              const std::map<std::string, ClusterId>& test,
                                              const GroundTruth& truth) {
  std::map<ClusterId, std::map<std::string, std::size_t>> train_counts;
  for (const auto& [url, label] : train) {
    const auto& type = truth.type_of(url);
    if (label == kOutlier || truth.is_annotation_outlier(type)) continue;
    ++train_counts[label][type];
  }
  std::map<ClusterId, std::string> mapping;
  for (const auto& [label, counts] : train_counts) {
    const std::string* best = nullptr;
    for (const auto& [type, c] : counts) {
      if (!best) {
        best = &type;
        continue;
      }
      std::size_t bc = counts.at(*best);
      if (c > bc || (c == bc && truth.type_size(type) > truth.type_size(*best))) best = &type;
    }
    mapping[label] = *best;
  }
  std::map<ClusterId, std::pair<std::size_t, std::size_t>> tally;  // correct, total
  for (const auto& [url, label] : test) {
    const auto& type = truth.type_of(url);
    if (truth.is_annotation_outlier(type)) continue;
    auto& t = tally[label];
    ++t.second;
    auto it = mapping.find(label);
    if (label != kOutlier && it != mapping.end() && it->second == type) ++t.first;
  }
  MetricsReport report;
  std::size_t correct = 0, total = 0;
  double macro = 0.0;
  for (const auto& [label, t] : tally) {
    correct += t.first;
    total += t.second;
    macro += static_cast<double>(t.first) / static_cast<double>(t.second);
  }
  report.pages = total;
  if (total == 0) return report;
  report.micro_prec = static_cast<double>(correct) / static_cast<double>(total);
  report.macro_prec = macro / static_cast<double>(tally.size());
  return report;
}

/// Stratified k-fold split: each type's pages are shuffled with `seed` and
/// dealt round-robin into folds. Returns the fold index per page.
inline std::vector<std::size_t> stratified_folds(const std::vector<std::string>& urls, const GroundTruth& truth,
                                                 std::size_t folds, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < urls.size(); ++i) by_type[truth.type_of(urls[i])].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold(urls.size(), 0);
  std::size_t offset = 0;
  for (auto& [type, idx] : by_type) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    // Continue dealing where the last type stopped so small types spread out.
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = (offset + i) % folds;
    offset = (offset + idx.size()) % folds;
  }
  return fold;
}

struct CrossValidation {
  std::vector<MetricsReport> folds;
  double mean_micro_prec = 0.0;
  double mean_macro_prec = 0.0;
};

/// k-fold protocol: per fold, vocabulary and clusters come from the training
/// folds only, then held-out pages are classified by kNN.
inline CrossValidation cross_validated_precision(const std::vector<ParsedPage>& pages, const GroundTruth& truth,
                                                 const ClusteringConfig& config, std::size_t folds = 4,
                                                 std::uint64_t seed = 0) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
  std::vector<std::string> urls;
  for (const auto& p : pages) urls.push_back(p.url);
  auto fold = stratified_folds(urls, truth, folds, seed);
  CrossValidation cv;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<ParsedPage> train_pages;
    std::vector<const ParsedPage*> test_pages;
    for (std::size_t i = 0; i < pages.size(); ++i) {
      if (fold[i] == f) {
        test_pages.push_back(&pages[i]);
      } else {
        train_pages.push_back(pages[i]);
      }
    }
    auto vocab = build_vocabulary(train_pages, std::min(config.min_pts, train_pages.size()));
    std::vector<PageFeatures> train_features;
    for (const auto& p : train_pages) train_features.push_back(featurize(p, vocab));
    Sitemap sitemap = cluster(train_features, config, "");
    std::map<std::string, ClusterId> train, test;
    for (const auto& p : train_pages) train[p.url] = *sitemap.label_of(p.url);
    for (const auto* p : test_pages) test[p->url] = classify(featurize(*p, vocab), sitemap, train_features);
    cv.folds.push_back(classification_precision(train, test, truth));
    cv.mean_micro_prec += cv.folds.back().micro_prec.value_or(0.0);
    cv.mean_macro_prec += cv.folds.back().macro_prec.value_or(0.0);
  }
  cv.mean_micro_prec /= static_cast<double>(folds);
  cv.mean_macro_prec /= static_cast<double>(folds);
  return cv;
}

enum class CrawlTask { Ucc, Target };

/// Distinct successfully fetched URLs of the given phases, in report order.
inline std::vector<std::string> crawled_urls(const CrawlReport& report, const std::set<std::string>& phases) {
  std::vector<std::string> urls;
  std::set<std::string> seen;
  for (const auto& r : report.records) {
    if (!phases.count(r.phase) || r.status < 200 || r.status >= 300) continue;
    if (seen.insert(r.url).second) urls.push_back(r.url);
  }
  return urls;
}

/// UCC: valid ratio, recall over all UCC pages, F with the valid ratio as
/// precision. Target: harvest rate, recall over all target pages, F with the
/// harvest rate as precision. Entropy is over the crawled page types;
/// unlabelled pages count as a type of their own.
inline MetricsReport crawl_quality(const std::vector<std::string>& crawled, const GroundTruth& truth, CrawlTask task) {
  MetricsReport report;
  report.pages = crawled.size();
  std::vector<std::string> types;
  std::size_t hits = 0;
  for (const auto& url : crawled) {
    auto it = truth.labels.find(url);
    types.push_back(it == truth.labels.end() ? std::string("(unlabelled)") : it->second);
    if (it == truth.labels.end()) continue;
    if (task == CrawlTask::Ucc ? truth.ucc.at(it->second) : it->second == truth.target_type) ++hits;
  }
  std::size_t relevant = 0;
  if (task == CrawlTask::Target && !truth.target_type) {
    throw Error(ErrorKind::InvalidArgument, "target task needs a target type");
  }
  for (const auto& [url, type] : truth.labels) {
    if (task == CrawlTask::Ucc ? truth.ucc.at(type) : type == *truth.target_type) ++relevant;
  }
  double precision = crawled.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(crawled.size());
  double recall = relevant == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(relevant);
  if (task == CrawlTask::Ucc) {
    report.valid_ratio = precision;
  } else {
    report.harvest_rate = precision;
  }
  report.recall = recall;
  report.f_measure = f1(precision, recall);
  report.entropy = type_entropy(types);
  return report;
}

inline MetricsReport crawl_quality(const CrawlReport& report, const GroundTruth& truth, CrawlTask task,
                                   const std::set<std::string>& phases = {"harvest"}) {
  return crawl_quality(crawled_urls(report, phases), truth, task);
}

/// Cumulative number of relevant pages after each crawled page.
inline std::vector<std::size_t> relevant_curve(const std::vector<std::string>& crawled, const GroundTruth& truth,
                                               CrawlTask task) {
  std::vector<std::size_t> curve;
  std::size_t hits = 0;
  for (const auto& url : crawled) {
    auto it = truth.labels.find(url);
    if (it != truth.labels.end() && (task == CrawlTask::Ucc ? truth.ucc.at(it->second) : it->second == truth.target_type)) {
      ++hits;
    }
    curve.push_back(hits);
  }
  return curve;
}

}  // namespace structcrawl
