#pragma once

// Crawl policies: cluster importance from HITS over the cluster graph,
// structural diversity (DSim), crawl balance, and URL priorities.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "clustering.hpp"
#include "error.hpp"
#include "navigation.hpp"

namespace structcrawl {

enum class PolicyMode { Ucc, Target };

struct Ablation {
  bool use_info = true;
  bool use_dsim = true;
  bool use_balance = true;

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct PolicyConfig {
  double alpha_ucc = 0.5;
  double alpha_target = 0.8;
  Ablation ablation;
  std::size_t refresh_every = 10;     // R: downloads between cluster-score refreshes
  double unknown_factor = 0.5;        // default_unknown_score = mean(Score(C)) * factor
  double outlier_source_discount = 1.0;
  double outlier_destination_score = 0.0;
  double hits_tol = 1e-8;
  std::size_t hits_max_iter = 100;

  double alpha(PolicyMode mode) const { return mode == PolicyMode::Target ? alpha_target : alpha_ucc; }
};

struct HitsResult {
  std::vector<double> hub;
  std::vector<double> authority;
  std::size_t iterations = 0;
  bool degenerate = false;  // zero graph: uniform vectors returned
};

namespace detail {

inline bool normalize_l2(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return false;
  for (double& x : v) x /= norm;
  return true;
}

inline std::vector<double> uniform_unit(std::size_t n) {
  return std::vector<double>(n, n == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(n)));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// Alternating hub/authority updates with L2 normalization per half-step.
/// In Target mode the authority vector is clamped to the target's indicator
/// after every update.
inline HitsResult run_hits(const ClusterGraph& graph, PolicyMode mode, std::optional<ClusterId> target = std::nullopt,
                           double tol = 1e-8, std::size_t max_iter = 100) {
  const std::size_t n = graph.n;
  if (mode == PolicyMode::Target && (!target || *target < 0 || static_cast<std::size_t>(*target) >= n)) {
    throw Error(ErrorKind::InvalidArgument, "target mode needs a valid target cluster");
  }
  HitsResult result;
  result.hub = detail::uniform_unit(n);
  result.authority = detail::uniform_unit(n);
  if (n == 0) return result;
  if (graph.all_zero()) {
    result.degenerate = true;
    return result;
  }
  auto clamp = [&](std::vector<double>& a) {
    std::fill(a.begin(), a.end(), 0.0);
    a[static_cast<std::size_t>(*target)] = 1.0;
  };
  if (mode == PolicyMode::Target) clamp(result.authority);
  std::vector<double> h(n), a(n);
  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += graph(i, j) * result.authority[j];
      h[i] = s;
    }
    // Nobody links to the clamped target: hubs carry no signal.
    if (!detail::normalize_l2(h)) h = detail::uniform_unit(n);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += graph(i, j) * h[i];
      a[j] = s;
    }
    if (mode == PolicyMode::Target) {
      clamp(a);
    } else if (!detail::normalize_l2(a)) {
      a = detail::uniform_unit(n);
    }
    double change = std::max(detail::max_abs_diff(h, result.hub), detail::max_abs_diff(a, result.authority));
    result.hub = h;
    result.authority = a;
    result.iterations = iter;
    if (change < tol) break;
  }
  return result;
}

/// Per-cluster policy inputs plus crawl counters; owned by the crawl
/// coordinator, copied into snapshots for scoring.
struct PolicyState {
  PolicyMode mode = PolicyMode::Ucc;
  std::optional<ClusterId> target;
  double alpha = 0.5;
  Ablation ablation;
  std::vector<double> hub;
  std::vector<double> authority;
  std::vector<double> info;
  std::vector<double> dsim;
  std::vector<std::size_t> crawled_counts;
  std::size_t total_crawled = 0;
  bool degenerate = false;

  void record_crawl(ClusterId label) {
    if (label == kOutlier) return;
    ++crawled_counts.at(static_cast<std::size_t>(label));
    ++total_crawled;
  }
};

inline PolicyState make_policy_state(const Sitemap& sitemap, const ClusterGraph& graph, PolicyMode mode,
                                     std::optional<ClusterId> target, const PolicyConfig& config) {
  PolicyState state;
  state.mode = mode;
  state.target = target;
  state.alpha = config.alpha(mode);
  state.ablation = config.ablation;
  auto hits = run_hits(graph, mode, target, config.hits_tol, config.hits_max_iter);
  state.hub = std::move(hits.hub);
  state.authority = std::move(hits.authority);
  state.degenerate = hits.degenerate;
  state.info.resize(sitemap.size());
  for (std::size_t i = 0; i < sitemap.size(); ++i) {
    state.info[i] = state.alpha * state.authority[i] + (1.0 - state.alpha) * state.hub[i];
  }
  for (const auto& c : sitemap.clusters) state.dsim.push_back(c.dsim);
  state.crawled_counts.assign(sitemap.size(), 0);
  return state;
}

inline double balance(const PolicyState& state, std::size_t cluster) {
  return 1.0 - static_cast<double>(state.crawled_counts[cluster]) /
                   static_cast<double>(std::max<std::size_t>(state.total_crawled, 1));
}

/// Score(C_i) = Info * DSim * Balance in UCC mode (omitted factors count as 1);
/// Score(C_i) = Info in Target mode.
inline std::vector<double> cluster_scores(const PolicyState& state) {
  std::vector<double> scores(state.info.size(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (state.mode == PolicyMode::Target) {
      scores[i] = state.info[i];
      continue;
    }
    double s = 1.0;
    if (state.ablation.use_info) s *= state.info[i];
    if (state.ablation.use_dsim) s *= state.dsim[i];
    if (state.ablation.use_balance) s *= balance(state, i);
    scores[i] = s;
  }
  return scores;
}

inline double default_unknown_score(std::span<const double> scores, const PolicyConfig& config) {
  if (scores.empty()) return 0.0;
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size()) *
         config.unknown_factor;
}

/// Expected destination score: sum_i P(C_i | C(p), x_u) * Score(C_i).
inline double expected_score(const Distribution& dist, std::span<const double> scores, const PolicyConfig& config) {
  double total = 0.0;
  for (const auto& [dest, p] : dist) {
    double s = dest == kOutlier ? config.outlier_destination_score : scores[static_cast<std::size_t>(dest)];
    total += p * s;
  }
  return total;
}

inline double score_url(ClusterId source, const ApathKey& apath, const NavigationTable& table,
                        std::span<const double> scores, const PolicyConfig& config) {
  const Distribution* dist = lookup(table, source, apath);
  if (!dist) return default_unknown_score(scores, config);
  double s = expected_score(*dist, scores, config);
  return source == kOutlier ? s * config.outlier_source_discount : s;
}

}  // namespace structcrawl
