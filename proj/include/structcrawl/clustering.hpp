#pragma once

// Sitemap construction: DBSCAN over bag-of-Xpaths vectors with the K-dist
// histogram eps estimator, plus kNN assignment of newly crawled pages.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "page_model.hpp"

namespace structcrawl {

using ClusterId = std::int32_t;
inline constexpr ClusterId kOutlier = -1;

struct ClusteringConfig {
  std::size_t min_pts = 4;
  std::optional<double> w_bins;        // histogram width factor; see resolved_w_bins
  std::optional<std::size_t> knn_k;    // defaults to min_pts - 1
  std::optional<double> eps_override;

  /// 4.8 at 1,000 training pages, scaled linearly with the training size.
  double resolved_w_bins(std::size_t corpus_size) const {
    return w_bins ? *w_bins : 4.8 * static_cast<double>(corpus_size) / 1000.0;
  }

  std::size_t resolved_knn_k() const { return knn_k ? *knn_k : min_pts - 1; }

  void validate() const {
    if (min_pts < 2) throw Error(ErrorKind::InvalidArgument, "min_pts must be >= 2");
    if (resolved_knn_k() < 1) throw Error(ErrorKind::InvalidArgument, "knn_k must be >= 1");
    if (w_bins && !(*w_bins > 0.0)) throw Error(ErrorKind::InvalidArgument, "w_bins must be > 0");
    if (eps_override && !(*eps_override >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be >= 0");
  }
};

/// Symmetric pairwise Euclidean distances, stored densely.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  explicit DistanceMatrix(std::span<const PageFeatures> points) : n_(points.size()), data_(n_ * n_, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        double d = distance(points[i], points[j]);
        data_[i * n_ + j] = d;
        data_[j * n_ + i] = d;
      }
    }
  }

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  bool all_zero() const {
    return std::all_of(data_.begin(), data_.end(), [](double d) { return d == 0.0; });
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Distance from each point to its k-th nearest point, where the point itself
/// is the first. With k = min_pts, K-dist <= eps is exactly the DBSCAN core test.
inline std::vector<double> k_distances(const DistanceMatrix& dm, std::size_t k) {
  std::vector<double> out(dm.size(), 0.0);
  std::vector<double> row(dm.size());
  for (std::size_t i = 0; i < dm.size(); ++i) {
    for (std::size_t j = 0; j < dm.size(); ++j) row[j] = dm(i, j);
    std::size_t nth = std::min(k, dm.size()) - 1;
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(nth), row.end());
    out[i] = row[nth];
  }
  return out;
}

struct EpsEstimate {
  double eps = 0.0;
  std::vector<double> k_dist;
  std::vector<std::size_t> histogram;
  double bin_width = 0.0;
};

/// Valley-point search on the K-dist histogram: the left edge of the first
/// bin holding fewer than min_pts pages once more than half of the pages lie
/// to its left. Falls back to the largest K-dist.
inline EpsEstimate estimate_eps_from_kdist(std::vector<double> k_dist, std::size_t num_feats,
                                           const ClusteringConfig& config) {
  EpsEstimate est;
  est.k_dist = std::move(k_dist);
  const std::size_t n = est.k_dist.size();
  double max_kdist = *std::max_element(est.k_dist.begin(), est.k_dist.end());
  est.eps = max_kdist;
  if (max_kdist <= 0.0) return est;
  double w = config.resolved_w_bins(n);
  auto num_bins = static_cast<std::size_t>(std::max(1.0, std::round(w * static_cast<double>(num_feats))));
  est.bin_width = max_kdist / static_cast<double>(num_bins);
  est.histogram.assign(num_bins, 0);
  for (double d : est.k_dist) {
    auto bin = std::min(num_bins - 1, static_cast<std::size_t>(d / est.bin_width));
    ++est.histogram[bin];
  }
  std::size_t cumulative = 0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    if (est.histogram[b] < config.min_pts && 2 * cumulative > n) {
      est.eps = static_cast<double>(b) * est.bin_width;
      return est;
    }
    cumulative += est.histogram[b];
  }
  return est;
}

inline EpsEstimate estimate_eps_detailed(const DistanceMatrix& dm, std::size_t num_feats,
                                         const ClusteringConfig& config) {
  config.validate();
  if (dm.size() <= config.min_pts) {
    throw Error(ErrorKind::InvalidArgument, "eps estimation needs more than min_pts pages");
  }
  if (num_feats == 0) throw Error(ErrorKind::EmptyVocabulary, "eps estimation needs a non-empty vocabulary");
  if (dm.all_zero()) throw Error(ErrorKind::DegenerateDistances, "all pairwise distances are zero");
  return estimate_eps_from_kdist(k_distances(dm, config.min_pts), num_feats, config);
}

inline double estimate_eps(std::span<const PageFeatures> features, const ClusteringConfig& config) {
  std::size_t dims = features.empty() ? 0 : features.front().weights.size();
  return estimate_eps_detailed(DistanceMatrix(features), dims, config).eps;
}

/// Classic DBSCAN. Points are visited in index order; a border point joins
/// the first cluster that reaches it. Neighborhoods include the point itself.
template <class DistanceFn>
std::vector<ClusterId> dbscan(std::size_t n, double eps, std::size_t min_pts, DistanceFn&& dist) {
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (dist(i, j) <= eps) neighbors[i].push_back(j);
    }
  }
  constexpr ClusterId kUnvisited = -2;
  std::vector<ClusterId> label(n, kUnvisited);
  ClusterId next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    if (neighbors[i].size() < min_pts) {
      label[i] = kOutlier;
      continue;
    }
    ClusterId id = next++;
    label[i] = id;
    std::deque<std::size_t> queue(neighbors[i].begin(), neighbors[i].end());
    while (!queue.empty()) {
      std::size_t q = queue.front();
      queue.pop_front();
      if (label[q] == kOutlier) label[q] = id;
      if (label[q] != kUnvisited) continue;
      label[q] = id;
      if (neighbors[q].size() >= min_pts) queue.insert(queue.end(), neighbors[q].begin(), neighbors[q].end());
    }
  }
  return label;
}

struct Cluster {
  ClusterId id = 0;
  std::vector<std::string> members;
  std::vector<double> centroid;
  double dsim = 0.0;
};

/// Mean member-to-centroid distance.
inline double mean_centroid_distance(std::span<const PageFeatures> members, std::span<const double> centroid) {
  if (members.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& m : members) sum += distance(m.weights, centroid);
  return sum / static_cast<double>(members.size());
}

class Sitemap {
 public:
  std::vector<Cluster> clusters;
  std::vector<std::string> outliers;
  ClusteringConfig config;
  double eps = 0.0;
  std::string vocab_ref;
  bool degenerate_distances = false;

  std::size_t size() const { return clusters.size(); }

  /// Cluster of a training page, kOutlier for outliers, nullopt if unknown.
  std::optional<ClusterId> label_of(const std::string& url) const {
    auto it = labels_.find(url);
    if (it == labels_.end()) return std::nullopt;
    return it->second;
  }

  void reindex() {
    labels_.clear();
    for (const auto& c : clusters) {
      for (const auto& m : c.members) labels_[m] = c.id;
    }
    for (const auto& o : outliers) labels_[o] = kOutlier;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["vocab_ref"] = vocab_ref;
    j["eps"] = eps;
    j["degenerate_distances"] = degenerate_distances;
    nlohmann::ordered_json cfg;
    cfg["min_pts"] = config.min_pts;
    cfg["w_bins"] = config.w_bins ? nlohmann::ordered_json(*config.w_bins) : nlohmann::ordered_json(nullptr);
    cfg["knn_k"] = config.resolved_knn_k();
    cfg["eps_override"] =
        config.eps_override ? nlohmann::ordered_json(*config.eps_override) : nlohmann::ordered_json(nullptr);
    j["config"] = cfg;
    j["clusters"] = nlohmann::ordered_json::array();
    for (const auto& c : clusters) {
      nlohmann::ordered_json cj;
      cj["id"] = c.id;
      cj["dsim"] = c.dsim;
      cj["members"] = c.members;
      cj["centroid"] = c.centroid;
      j["clusters"].push_back(std::move(cj));
    }
    j["outliers"] = outliers;
    return j;
  }

  static Sitemap from_json(const nlohmann::ordered_json& j) {
    Sitemap s;
    s.vocab_ref = j.at("vocab_ref").get<std::string>();
    s.eps = j.at("eps").get<double>();
    s.degenerate_distances = j.value("degenerate_distances", false);
    const auto& cfg = j.at("config");
    s.config.min_pts = cfg.at("min_pts").get<std::size_t>();
    if (!cfg.at("w_bins").is_null()) s.config.w_bins = cfg.at("w_bins").get<double>();
    s.config.knn_k = cfg.at("knn_k").get<std::size_t>();
    if (!cfg.at("eps_override").is_null()) s.config.eps_override = cfg.at("eps_override").get<double>();
    for (const auto& cj : j.at("clusters")) {
      Cluster c;
      c.id = cj.at("id").get<ClusterId>();
      c.dsim = cj.at("dsim").get<double>();
      c.members = cj.at("members").get<std::vector<std::string>>();
      c.centroid = cj.at("centroid").get<std::vector<double>>();
      s.clusters.push_back(std::move(c));
    }
    s.outliers = j.at("outliers").get<std::vector<std::string>>();
    s.reindex();
    return s;
  }

 private:
  std::map<std::string, ClusterId> labels_;
};

/// Builds a sitemap from per-point labels (kOutlier for noise). Cluster ids
/// must be 0..k-1 in discovery order.
inline Sitemap sitemap_from_labels(std::span<const PageFeatures> features, std::span<const ClusterId> labels,
                                   const ClusteringConfig& config, double eps, std::string vocab_ref) {
  Sitemap sitemap;
  sitemap.config = config;
  sitemap.eps = eps;
  sitemap.vocab_ref = std::move(vocab_ref);
  ClusterId max_id = -1;
  for (ClusterId l : labels) max_id = std::max(max_id, l);
  std::vector<std::vector<PageFeatures>> groups(static_cast<std::size_t>(max_id + 1));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] == kOutlier) {
      sitemap.outliers.push_back(features[i].url);
    } else {
      groups[static_cast<std::size_t>(labels[i])].push_back(features[i]);
    }
  }
  for (std::size_t c = 0; c < groups.size(); ++c) {
    Cluster cluster;
    cluster.id = static_cast<ClusterId>(c);
    const auto& members = groups[c];
    std::size_t dims = members.empty() ? 0 : members.front().weights.size();
    cluster.centroid.assign(dims, 0.0);
    for (const auto& m : members) {
      cluster.members.push_back(m.url);
      for (std::size_t d = 0; d < dims; ++d) cluster.centroid[d] += m.weights[d];
    }
    for (double& v : cluster.centroid) v /= static_cast<double>(std::max<std::size_t>(members.size(), 1));
    cluster.dsim = mean_centroid_distance(members, cluster.centroid);
    sitemap.clusters.push_back(std::move(cluster));
  }
  sitemap.reindex();
  return sitemap;
}

/// DBSCAN with the estimated (or overridden) eps. Corpora too small for the
/// estimator become all-outlier sitemaps; corpora with identical vectors
/// become a single cluster.
inline Sitemap cluster(std::span<const PageFeatures> features, const ClusteringConfig& config,
                       std::string vocab_ref = {}) {
  config.validate();
  if (features.empty()) throw Error(ErrorKind::InvalidArgument, "cannot cluster an empty training set");
  const std::size_t n = features.size();
  DistanceMatrix dm(features);
  double eps = 0.0;
  bool degenerate = false;
  if (config.eps_override) {
    eps = *config.eps_override;
  } else if (n <= config.min_pts) {
    std::vector<ClusterId> labels(n, kOutlier);
    return sitemap_from_labels(features, labels, config, 0.0, std::move(vocab_ref));
  } else {
    try {
      eps = estimate_eps_detailed(dm, features.front().weights.size(), config).eps;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDistances) throw;
      degenerate = true;
      eps = 0.0;
    }
  }
  auto labels = dbscan(n, eps, config.min_pts, [&](std::size_t i, std::size_t j) { return dm(i, j); });
  Sitemap sitemap = sitemap_from_labels(features, labels, config, eps, std::move(vocab_ref));
  sitemap.degenerate_distances = degenerate;
  return sitemap;
}

/// Majority vote over the knn_k nearest training pages; outlier-labelled
/// neighbours vote too. Ties go to the tied label seen first in nearest-first
/// order, which is the nearest neighbour's label whenever it is tied.
inline ClusterId classify(const PageFeatures& page, const Sitemap& sitemap, std::span<const PageFeatures> training) {
  if (training.empty()) throw Error(ErrorKind::EmptyTrainingSet, "kNN needs training pages");
  if (page.is_zero()) return kOutlier;
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(training.size());
  for (std::size_t i = 0; i < training.size(); ++i) order.emplace_back(distance(page, training[i]), i);
  std::size_t k = std::min(sitemap.config.resolved_knn_k(), training.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::vector<std::pair<ClusterId, std::size_t>> votes;  // first-seen order
  for (std::size_t r = 0; r < k; ++r) {
    auto label = sitemap.label_of(training[order[r].second].url);
    if (!label) throw Error(ErrorKind::LabelMismatch, "training page not in sitemap: " + training[order[r].second].url);
    auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == *label; });
    if (it == votes.end()) {
      votes.emplace_back(*label, 1);
    } else {
      ++it->second;
    }
  }
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

}  // namespace structcrawl
