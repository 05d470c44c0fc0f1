#pragma once

// Cluster-level navigation model: destination distributions per
// (source cluster, anchor path) and the weighted cluster adjacency matrix.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clustering.hpp"
#include "error.hpp"
#include "page_model.hpp"
#include "sampler.hpp"

namespace structcrawl {

/// Destination label -> probability. May contain kOutlier when labelled
/// destinations were DBSCAN outliers.
using Distribution = std::map<ClusterId, double>;

struct NavigationEntry {
  Distribution distribution;
  std::size_t support = 0;  // destinations with a training label
  std::size_t volume = 0;   // |U_{C_i,x}|, labelled or not
};

using NavigationKey = std::pair<ClusterId, ApathKey>;

struct NavigationTable {
  std::map<NavigationKey, NavigationEntry> entries;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& [key, entry] : entries) {
      nlohmann::ordered_json e;
      e["cluster"] = key.first;
      e["apath"] = key.second.str();
      nlohmann::ordered_json dist = nlohmann::ordered_json::array();
      for (const auto& [dest, p] : entry.distribution) dist.push_back({dest, p});
      e["distribution"] = dist;
      e["support"] = entry.support;
      e["volume"] = entry.volume;
      j.push_back(std::move(e));
    }
    return j;
  }

  static NavigationTable from_json(const nlohmann::ordered_json& j) {
    NavigationTable table;
    for (const auto& e : j) {
      NavigationEntry entry;
      for (const auto& pair : e.at("distribution")) entry.distribution[pair.at(0).get<ClusterId>()] = pair.at(1).get<double>();
      entry.support = e.at("support").get<std::size_t>();
      entry.volume = e.at("volume").get<std::size_t>();
      table.entries[{e.at("cluster").get<ClusterId>(), ApathKey::parse(e.at("apath").get<std::string>())}] =
          std::move(entry);
    }
    return table;
  }
};

/// Builds the table from the sample's link lists. Source pages labelled as
/// outliers feed a pseudo-cluster row keyed by kOutlier.
inline NavigationTable build_table(const SampleRun& run, const Sitemap& sitemap) {
  for (const auto& page : run.pages) {
    if (!sitemap.label_of(page.url)) throw Error(ErrorKind::LabelMismatch, "sample page not in sitemap: " + page.url);
  }
  struct Tally {
    std::map<ClusterId, std::size_t> counts;
    std::size_t volume = 0;
  };
  std::map<NavigationKey, Tally> tallies;
  for (const auto& [key, urls] : run.url_lists) {
    auto source = sitemap.label_of(key.first);
    if (!source) throw Error(ErrorKind::LabelMismatch, "url list for unknown page: " + key.first);
    auto& tally = tallies[{*source, key.second}];
    tally.volume += urls.size();
    for (const auto& url : urls) {
      if (auto dest = sitemap.label_of(run.resolve_alias(url))) ++tally.counts[*dest];
    }
  }
  NavigationTable table;
  for (auto& [key, tally] : tallies) {
    std::size_t support = 0;
    for (const auto& [dest, count] : tally.counts) support += count;
    if (support == 0) continue;
    NavigationEntry entry;
    entry.support = support;
    entry.volume = tally.volume;
    for (const auto& [dest, count] : tally.counts) {
      entry.distribution[dest] = static_cast<double>(count) / static_cast<double>(support);
    }
    table.entries.emplace(key, std::move(entry));
  }
  return table;
}

inline const Distribution* lookup(const NavigationTable& table, ClusterId source, const ApathKey& apath) {
  auto it = table.entries.find({source, apath});
  return it == table.entries.end() ? nullptr : &it->second.distribution;
}

/// Dense |C| x |C| matrix over real clusters (outlier rows/columns excluded).
struct ClusterGraph {
  std::size_t n = 0;
  std::vector<double> weights;  // row-major

  ClusterGraph() = default;
  explicit ClusterGraph(std::size_t size) : n(size), weights(size * size, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return weights[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return weights[i * n + j]; }

  bool all_zero() const {
    for (double w : weights) {
      if (w != 0.0) return false;
    }
    return true;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    std::vector<ClusterId> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<ClusterId>(i));
    j["clusters"] = ids;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(std::vector<double>(weights.begin() + static_cast<std::ptrdiff_t>(i * n),
                                         weights.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
    }
    j["rows"] = rows;
    return j;
  }

  static ClusterGraph from_json(const nlohmann::ordered_json& j) {
    const auto& rows = j.at("rows");
    ClusterGraph g(rows.size());
    for (std::size_t i = 0; i < g.n; ++i) {
      for (std::size_t k = 0; k < g.n; ++k) g(i, k) = rows.at(i).at(k).get<double>();
    }
    return g;
  }
};

enum class VolumeMode {
  AllLinks,       // |U_{C_i,x}| counts every discovered link
  LabeledOnly,    // only links whose destination page was sampled
};

/// A_ij = sum over anchor paths x of P(C_j | C_i, x) * volume(C_i, x).
inline ClusterGraph build_adjacency(const NavigationTable& table, const Sitemap& sitemap,
                                    VolumeMode mode = VolumeMode::AllLinks) {
  ClusterGraph graph(sitemap.size());
  for (const auto& [key, entry] : table.entries) {
    if (key.first == kOutlier) continue;
    auto i = static_cast<std::size_t>(key.first);
    double volume = static_cast<double>(mode == VolumeMode::AllLinks ? entry.volume : entry.support);
    for (const auto& [dest, p] : entry.distribution) {
      if (dest == kOutlier) continue;
      graph(i, static_cast<std::size_t>(dest)) += p * volume;
    }
  }
  return graph;
}

}  // namespace structcrawl
