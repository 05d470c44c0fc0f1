#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace structcrawl {

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

// Uppercases escape hex digits and escapes bytes that may not appear raw.
inline std::string normalize_escapes(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c == '%' && i + 2 < s.size() && is_hex(s[i + 1]) && is_hex(s[i + 2])) {
      out.push_back('%');
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(s[i + 1]))));
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(s[i + 2]))));
      i += 2;
    } else if (c <= 0x20 || c >= 0x7f || c == '"' || c == '<' || c == '>' || c == '\\' || c == '^' ||
               c == '`' || c == '{' || c == '|' || c == '}') {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

// RFC 3986 section 5.2.4.
inline std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string_view> out;
  bool absolute = !path.empty() && path.front() == '/';
  bool trailing = false;
  std::size_t pos = absolute ? 1 : 0;
  while (pos <= path.size()) {
    std::size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    std::string_view seg = path.substr(pos, next - pos);
    bool last = next == path.size();
    if (seg == ".") {
      trailing = true;
    } else if (seg == "..") {
      if (!out.empty()) out.pop_back();
      trailing = true;
    } else {
      out.push_back(seg);
      trailing = false;
    }
    if (last) break;
    pos = next + 1;
  }
  std::string result = absolute ? "/" : "";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i > 0) result.push_back('/');
    result.append(out[i]);
  }
  if (trailing && !result.empty() && result.back() != '/') result.push_back('/');
  return result;
}

}  // namespace detail

/// An absolute hierarchical URL split into the parts the crawler cares about.
/// Only http and https are accepted; everything else is not a crawlable link.
struct Url {
  std::string scheme;
  std::string host;
  std::string port;  // empty when default for the scheme
  std::string path = "/";
  std::optional<std::string> query;

  static std::optional<Url> parse(std::string_view text) {
    text = detail::trim(text);
    auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    Url url;
    url.scheme = detail::ascii_lower(text.substr(0, colon));
    if (url.scheme != "http" && url.scheme != "https") return std::nullopt;
    std::string_view rest = text.substr(colon + 1);
    if (rest.substr(0, 2) != "//") return std::nullopt;
    rest.remove_prefix(2);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    std::size_t auth_end = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, auth_end);
    std::string_view tail = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
    std::string_view host = authority;
    std::string_view port;
    if (auto pc = authority.rfind(':'); pc != std::string_view::npos && authority.find(']') == std::string_view::npos) {
      host = authority.substr(0, pc);
      port = authority.substr(pc + 1);
      if (!std::all_of(port.begin(), port.end(), [](unsigned char c) { return std::isdigit(c); })) {
        return std::nullopt;
      }
    }
    if (host.empty()) return std::nullopt;
    url.host = detail::ascii_lower(host);
    while (!url.host.empty() && url.host.back() == '.') url.host.pop_back();
    if (url.host.empty()) return std::nullopt;
    std::string port_str(port);
    while (port_str.size() > 1 && port_str.front() == '0') port_str.erase(0, 1);
    if ((url.scheme == "http" && port_str == "80") || (url.scheme == "https" && port_str == "443")) port_str.clear();
    url.port = port_str;
    std::string_view path = tail;
    if (auto q = tail.find('?'); q != std::string_view::npos) {
      path = tail.substr(0, q);
      url.query = detail::normalize_escapes(tail.substr(q + 1));
    }
    url.path = path.empty() ? "/" : detail::remove_dot_segments(detail::normalize_escapes(path));
    if (url.path.empty()) url.path = "/";
    return url;
  }

  std::string authority() const { return port.empty() ? host : host + ":" + port; }

  std::string str() const {
    std::string out = scheme + "://" + authority() + path;
    if (query) {
      out.push_back('?');
      out += *query;
    }
    return out;
  }

  /// Resolves a reference (absolute, scheme-relative, absolute-path, or
  /// relative) against this URL. Returns nullopt for non-http(s) targets.
  std::optional<Url> resolve(std::string_view ref) const {
    ref = detail::trim(ref);
    if (auto hash = ref.find('#'); hash != std::string_view::npos) ref = ref.substr(0, hash);
    // A scheme is letters/digits/+-. before the first ':' and before any '/?'.
    auto colon = ref.find(':');
    auto delim = ref.find_first_of("/?");
    if (colon != std::string_view::npos && colon > 0 && (delim == std::string_view::npos || colon < delim)) {
      bool scheme_chars = std::all_of(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(colon), [](unsigned char c) {
        return std::isalnum(c) || c == '+' || c == '-' || c == '.';
      });
      if (scheme_chars) return parse(ref);
    }
    if (ref.substr(0, 2) == "//") return parse(scheme + ":" + std::string(ref));
    Url out = *this;
    if (ref.empty()) return out;
    std::string_view ref_path = ref;
    std::optional<std::string> ref_query;
    if (auto q = ref.find('?'); q != std::string_view::npos) {
      ref_path = ref.substr(0, q);
      ref_query = detail::normalize_escapes(ref.substr(q + 1));
    }
    if (ref_path.empty()) {
      out.query = ref_query;
      return out;
    }
    std::string merged;
    if (ref_path.front() == '/') {
      merged = std::string(ref_path);
    } else {
      auto slash = path.rfind('/');
      merged = (slash == std::string::npos ? std::string("/") : path.substr(0, slash + 1)) + std::string(ref_path);
    }
    out.path = detail::remove_dot_segments(detail::normalize_escapes(merged));
    if (out.path.empty()) out.path = "/";
    out.query = ref_query;
    return out;
  }

  friend bool operator==(const Url&, const Url&) = default;
};

/// Canonical string form used as page identity everywhere in the crawler.
inline std::optional<std::string> normalize_url(std::string_view text) {
  auto url = Url::parse(text);
  if (!url) return std::nullopt;
  return url->str();
}

/// Approximate registrable domain: the last two labels, or three when the
/// second-level label is a common generic one under a two-letter ccTLD
/// (example.co.uk). IP literals and single-label hosts are returned as-is.
inline std::string registrable_domain(std::string_view host) {
  std::vector<std::string_view> labels;
  std::size_t pos = 0;
  while (pos <= host.size()) {
    auto dot = host.find('.', pos);
    if (dot == std::string_view::npos) dot = host.size();
    labels.push_back(host.substr(pos, dot - pos));
    pos = dot + 1;
  }
  bool numeric = std::all_of(host.begin(), host.end(), [](unsigned char c) { return std::isdigit(c) || c == '.'; });
  if (numeric || labels.size() <= 2 || host.find(':') != std::string_view::npos) return std::string(host);
  static constexpr std::array<std::string_view, 10> kGenericSld = {"co", "com", "net", "org", "gov",
                                                                   "edu", "ac",  "or",  "ne",  "go"};
  std::size_t keep = 2;
  const auto& tld = labels.back();
  const auto& sld = labels[labels.size() - 2];
  if (tld.size() == 2 && std::find(kGenericSld.begin(), kGenericSld.end(), sld) != kGenericSld.end()) keep = 3;
  keep = std::min(keep, labels.size());
  std::string out;
  for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
    if (!out.empty()) out.push_back('.');
    out.append(labels[i]);
  }
  return out;
}

enum class ScopeMode { RegistrableDomain, SameHost };

/// Decides which URLs belong to "the same website".
class SiteScope {
 public:
  SiteScope() = default;
  SiteScope(const Url& anchor, ScopeMode mode = ScopeMode::RegistrableDomain)
      : mode_(mode), key_(mode == ScopeMode::SameHost ? anchor.authority() : registrable_domain(anchor.host)) {}

  static SiteScope for_url(std::string_view url, ScopeMode mode = ScopeMode::RegistrableDomain) {
    auto parsed = Url::parse(url);
    return parsed ? SiteScope(*parsed, mode) : SiteScope();
  }

  bool contains(const Url& url) const {
    if (key_.empty()) return false;
    return mode_ == ScopeMode::SameHost ? url.authority() == key_ : registrable_domain(url.host) == key_;
  }

  bool contains(std::string_view url) const {
    auto parsed = Url::parse(url);
    return parsed && contains(*parsed);
  }

  ScopeMode mode() const { return mode_; }
  const std::string& key() const { return key_; }

 private:
  ScopeMode mode_ = ScopeMode::RegistrableDomain;
  std::string key_;
};

}  // namespace structcrawl
