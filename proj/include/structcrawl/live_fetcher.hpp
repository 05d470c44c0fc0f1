#pragma once

// Network Fetcher over cpp-httplib with a fixed per-host delay.

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "corpus.hpp"
#include "url.hpp"

namespace structcrawl {

struct LiveFetcherConfig {
  std::chrono::milliseconds per_host_delay{1000};
  std::chrono::seconds timeout{20};
  std::string user_agent = "structcrawl/1.0";
};

class LiveFetcher : public Fetcher {
 public:
  explicit LiveFetcher(LiveFetcherConfig config = {}) : config_(std::move(config)) {}

  FetchResponse get(const std::string& url) override {
    auto parsed = Url::parse(url);
    if (!parsed) return FetchResponse{0, "", "", ""};
    wait_turn(parsed->host);
    std::string origin = parsed->scheme + "://" + parsed->authority();
    httplib::Client client(origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_follow_location(false);
    std::string target = parsed->path + (parsed->query ? "?" + *parsed->query : "");
    auto res = client.Get(target, httplib::Headers{{"User-Agent", config_.user_agent}});
    if (!res) return FetchResponse{0, "", "", ""};
    return FetchResponse{res->status, res->get_header_value("Content-Type"), res->body,
                         res->get_header_value("Location")};
  }

 private:
  void wait_turn(const std::string& host) {
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mutex_);
      auto now = std::chrono::steady_clock::now();
      auto& next = next_slot_[host];
      slot = std::max(now, next);
      next = slot + config_.per_host_delay;
    }
    std::this_thread::sleep_until(slot);
  }

  LiveFetcherConfig config_;
  std::mutex mutex_;
  std::map<std::string, std::chrono::steady_clock::time_point> next_slot_;
};

}  // namespace structcrawl
