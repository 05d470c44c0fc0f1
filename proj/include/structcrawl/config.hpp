#pragma once

// JSON form of the crawl configuration and the per-run manifest.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "crawler.hpp"
#include "error.hpp"

#ifndef STRUCTCRAWL_VERSION
#define STRUCTCRAWL_VERSION "unknown"
#endif

namespace structcrawl {

inline std::string to_string(PolicyMode mode) { return mode == PolicyMode::Target ? "target" : "ucc"; }
inline std::string to_string(ScopeMode mode) { return mode == ScopeMode::SameHost ? "host" : "domain"; }
inline std::string to_string(VolumeMode mode) { return mode == VolumeMode::LabeledOnly ? "labeled" : "all"; }

inline PolicyMode parse_policy_mode(const std::string& s) {
  if (s == "ucc") return PolicyMode::Ucc;
  if (s == "target") return PolicyMode::Target;
  throw Error(ErrorKind::InvalidArgument, "mode must be ucc or target: " + s);
}

inline ScopeMode parse_scope_mode(const std::string& s) {
  if (s == "domain") return ScopeMode::RegistrableDomain;
  if (s == "host") return ScopeMode::SameHost;
  throw Error(ErrorKind::InvalidArgument, "scope must be domain or host: " + s);
}

inline VolumeMode parse_volume_mode(const std::string& s) {
  if (s == "all") return VolumeMode::AllLinks;
  if (s == "labeled") return VolumeMode::LabeledOnly;
  throw Error(ErrorKind::InvalidArgument, "volume must be all or labeled: " + s);
}

inline nlohmann::ordered_json to_json(const CrawlConfig& c) {
  nlohmann::ordered_json j;
  j["budget"] = c.budget;
  j["sample_budget"] = c.sample_budget;
  j["mode"] = to_string(c.mode);
  j["target_example"] = c.target_example;
  j["scope"] = to_string(c.scope_mode);
  j["seed"] = c.rng_seed;
  j["volume"] = to_string(c.volume_mode);
  j["known_outside"] = c.known_outside;
  j["count_non_html"] = c.count_non_html;
  j["workers"] = c.workers;
  j["max_redirects"] = c.max_redirects;
  auto& cl = j["clustering"];
  cl["min_pts"] = c.clustering.min_pts;
  cl["w_bins"] = c.clustering.w_bins ? nlohmann::ordered_json(*c.clustering.w_bins) : nlohmann::ordered_json(nullptr);
  cl["knn_k"] = c.clustering.knn_k ? nlohmann::ordered_json(*c.clustering.knn_k) : nlohmann::ordered_json(nullptr);
  cl["eps"] =
      c.clustering.eps_override ? nlohmann::ordered_json(*c.clustering.eps_override) : nlohmann::ordered_json(nullptr);
  auto& p = j["policy"];
  p["alpha_ucc"] = c.policy.alpha_ucc;
  p["alpha_target"] = c.policy.alpha_target;
  p["use_info"] = c.policy.ablation.use_info;
  p["use_dsim"] = c.policy.ablation.use_dsim;
  p["use_balance"] = c.policy.ablation.use_balance;
  p["refresh_every"] = c.policy.refresh_every;
  p["unknown_factor"] = c.policy.unknown_factor;
  p["outlier_source_discount"] = c.policy.outlier_source_discount;
  p["outlier_destination_score"] = c.policy.outlier_destination_score;
  p["hits_tol"] = c.policy.hits_tol;
  p["hits_max_iter"] = c.policy.hits_max_iter;
  return j;
}

/// Overlays the keys present in `j` onto `c`; absent keys keep their value.
inline void apply_json(CrawlConfig& c, const nlohmann::json& j) {
  try {
    if (j.contains("budget")) c.budget = j.at("budget").get<std::size_t>();
    if (j.contains("sample_budget")) c.sample_budget = j.at("sample_budget").get<std::size_t>();
    if (j.contains("mode")) c.mode = parse_policy_mode(j.at("mode").get<std::string>());
    if (j.contains("target_example")) c.target_example = j.at("target_example").get<std::string>();
    if (j.contains("scope")) c.scope_mode = parse_scope_mode(j.at("scope").get<std::string>());
    if (j.contains("seed")) c.rng_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("volume")) c.volume_mode = parse_volume_mode(j.at("volume").get<std::string>());
    if (j.contains("known_outside")) c.known_outside = j.at("known_outside").get<std::set<std::string>>();
    if (j.contains("count_non_html")) c.count_non_html = j.at("count_non_html").get<bool>();
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
    if (j.contains("max_redirects")) c.max_redirects = j.at("max_redirects").get<int>();
    if (j.contains("clustering")) {
      const auto& cl = j.at("clustering");
      if (cl.contains("min_pts")) c.clustering.min_pts = cl.at("min_pts").get<std::size_t>();
      if (cl.contains("w_bins") && !cl.at("w_bins").is_null()) c.clustering.w_bins = cl.at("w_bins").get<double>();
      if (cl.contains("knn_k") && !cl.at("knn_k").is_null()) c.clustering.knn_k = cl.at("knn_k").get<std::size_t>();
      if (cl.contains("eps") && !cl.at("eps").is_null()) c.clustering.eps_override = cl.at("eps").get<double>();
    }
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      auto get = [&](const char* key, auto& field) {
        if (p.contains(key)) field = p.at(key).get<std::decay_t<decltype(field)>>();
      };
      get("alpha_ucc", c.policy.alpha_ucc);
      get("alpha_target", c.policy.alpha_target);
      get("use_info", c.policy.ablation.use_info);
      get("use_dsim", c.policy.ablation.use_dsim);
      get("use_balance", c.policy.ablation.use_balance);
      get("refresh_every", c.policy.refresh_every);
      get("unknown_factor", c.policy.unknown_factor);
      get("outlier_source_discount", c.policy.outlier_source_discount);
      get("outlier_destination_score", c.policy.outlier_destination_score);
      get("hits_tol", c.policy.hits_tol);
      get("hits_max_iter", c.policy.hits_max_iter);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad configuration: ") + e.what());
  }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

/// Audit record of one CLI invocation. The only nondeterministic fields are
/// the wall-clock ones.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config;
  std::uint64_t rng_seed = 0;
  nlohmann::ordered_json artifacts = nlohmann::ordered_json::object();
  nlohmann::ordered_json stats = nlohmann::ordered_json::object();
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();

  void write(const std::filesystem::path& path) const {
    auto finished = std::chrono::system_clock::now();
    auto stamp = [](std::chrono::system_clock::time_point t) {
      std::time_t tt = std::chrono::system_clock::to_time_t(t);
      std::tm tm{};
      gmtime_r(&tt, &tm);
      std::ostringstream s;
      s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
      return s.str();
    };
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = rng_seed;
    j["artifacts"] = artifacts;
    if (!stats.empty()) j["stats"] = stats;
    j["started"] = stamp(started);
    j["finished"] = stamp(finished);
    j["seconds"] = std::chrono::duration<double>(finished - started).count();
    j["version"] = STRUCTCRAWL_VERSION;
    write_file_atomic(path, j.dump(2) + "\n");
  }
};

}  // namespace structcrawl
