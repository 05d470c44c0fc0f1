#pragma once

// Bag-of-Xpaths page representation: leaf-ending tag paths, anchor paths
// disambiguated by CSS class, and TF-IDF weighted, L1-normalized vectors.

#include <algorithm>
#include <cmath>
#include <compare>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "html.hpp"
#include "url.hpp"

namespace structcrawl {

inline constexpr std::string_view kTextLeaf = "text";
inline constexpr std::string_view kAnchorLeaf = "a";
inline constexpr std::string_view kImageLeaf = "img";

/// Root-to-leaf tag path rendered as "/html/body/div/p/text".
struct XpathKey {
  std::string path;

  std::string_view leaf() const {
    auto slash = path.rfind('/');
    return slash == std::string::npos ? std::string_view(path) : std::string_view(path).substr(slash + 1);
  }

  friend auto operator<=>(const XpathKey&, const XpathKey&) = default;
};

/// An Xpath ending at an anchor plus the anchor's sorted, deduplicated class
/// tokens. Rendered as "/html/body/a[c1 c2]" (no brackets when classless).
struct ApathKey {
  XpathKey path;
  std::vector<std::string> leaf_classes;

  ApathKey() = default;
  ApathKey(XpathKey p, std::vector<std::string> classes) : path(std::move(p)), leaf_classes(std::move(classes)) {
    std::sort(leaf_classes.begin(), leaf_classes.end());
    leaf_classes.erase(std::unique(leaf_classes.begin(), leaf_classes.end()), leaf_classes.end());
  }

  std::string str() const {
    if (leaf_classes.empty()) return path.path;
    std::string out = path.path + "[";
    for (std::size_t i = 0; i < leaf_classes.size(); ++i) {
      if (i > 0) out.push_back(' ');
      out += leaf_classes[i];
    }
    out.push_back(']');
    return out;
  }

  static ApathKey parse(std::string_view rendered) {
    auto open = rendered.find('[');
    if (open == std::string_view::npos || rendered.back() != ']') return ApathKey(XpathKey{std::string(rendered)}, {});
    std::vector<std::string> classes;
    std::istringstream in(std::string(rendered.substr(open + 1, rendered.size() - open - 2)));
    for (std::string token; in >> token;) classes.push_back(token);
    return ApathKey(XpathKey{std::string(rendered.substr(0, open))}, std::move(classes));
  }

  friend auto operator<=>(const ApathKey&, const ApathKey&) = default;
};

struct AnchorLink {
  ApathKey apath;
  std::string url;

  friend bool operator==(const AnchorLink&, const AnchorLink&) = default;
};

struct ParsedPage {
  std::string url;
  std::map<XpathKey, std::size_t> xpath_counts;
  std::vector<AnchorLink> anchor_links;  // document order, in-site only
};

namespace detail {

inline bool excluded_subtree(std::string_view tag) {
  return tag == "head" || tag == "script" || tag == "style" || tag == "template" || tag == "title";
}

inline bool has_visible_text(std::string_view text) {
  return std::any_of(text.begin(), text.end(), [](char c) { return !html::detail::is_space(c); });
}

inline std::vector<std::string> split_classes(std::string_view value) {
  std::vector<std::string> out;
  std::istringstream in{std::string(value)};
  for (std::string token; in >> token;) out.push_back(token);
  return out;
}

}  // namespace detail

/// Extracts the bag of leaf-ending Xpaths and the in-site anchor links of one
/// page. Relative links resolve against <base href> when present, else
/// against base_url.
inline ParsedPage parse_page(std::string_view markup, std::string_view base_url, const SiteScope& scope) {
  auto base = Url::parse(base_url);
  if (!base) throw Error(ErrorKind::InvalidArgument, "base URL is not absolute: " + std::string(base_url));
  if (markup.empty()) throw Error(ErrorKind::MalformedDocument, "empty document");
  html::Document doc = html::parse(markup);
  ParsedPage page;
  page.url = base->str();

  for (const auto& node : doc.nodes) {
    if (node.kind == html::NodeKind::Element && node.tag == "base") {
      if (auto href = node.attribute("href")) {
        if (auto resolved = base->resolve(*href)) base = resolved;
      }
      break;
    }
  }

  struct Frame {
    std::size_t node;
    std::string path;
  };
  std::vector<Frame> stack{{0, "/" + doc.root().tag}};
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    const html::Node& node = doc.nodes[frame.node];
    if (node.kind == html::NodeKind::Text) {
      if (detail::has_visible_text(node.text)) ++page.xpath_counts[XpathKey{frame.path}];
      continue;
    }
    if (frame.node != 0 && detail::excluded_subtree(node.tag)) continue;
    if (node.tag == kAnchorLeaf || node.tag == kImageLeaf) ++page.xpath_counts[XpathKey{frame.path}];
    if (node.tag == kAnchorLeaf) {
      if (auto href = node.attribute("href")) {
        auto target = base->resolve(*href);
        if (target && scope.contains(*target)) {
          auto classes = node.attribute("class");
          page.anchor_links.push_back(
              {ApathKey(XpathKey{frame.path}, classes ? detail::split_classes(*classes) : std::vector<std::string>{}),
               target->str()});
        }
      }
    }
    // Push children in reverse so links come out in document order.
    for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) {
      const html::Node& child = doc.nodes[*it];
      std::string child_path = frame.path + "/";
      child_path += child.kind == html::NodeKind::Text ? std::string(kTextLeaf) : child.tag;
      stack.push_back({*it, std::move(child_path)});
    }
  }
  return page;
}

/// Retained Xpaths (df >= min_df) in lexicographic order; the position in
/// `xpaths` is the feature index.
struct FeatureVocabulary {
  std::vector<XpathKey> xpaths;
  std::map<XpathKey, std::size_t> df;
  std::size_t corpus_size = 0;
  std::size_t min_df = 1;

  std::size_t size() const { return xpaths.size(); }
  bool empty() const { return xpaths.empty(); }

  std::optional<std::size_t> index_of(const XpathKey& key) const {
    auto it = std::lower_bound(xpaths.begin(), xpaths.end(), key);
    if (it == xpaths.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - xpaths.begin());
  }

  /// Line format: "<rendered-xpath>\t<df>", preceded by '#' metadata lines.
  void write(std::ostream& out) const {
    out << "# corpus_size\t" << corpus_size << "\n";
    out << "# min_df\t" << min_df << "\n";
    for (const auto& key : xpaths) out << key.path << "\t" << df.at(key) << "\n";
  }

  static FeatureVocabulary read(std::istream& in) {
    FeatureVocabulary vocab;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw Error(ErrorKind::Parse, "vocabulary line without tab: " + line);
      std::string key = line.substr(0, tab);
      std::size_t value = std::stoul(line.substr(tab + 1));
      if (key == "# corpus_size") {
        vocab.corpus_size = value;
      } else if (key == "# min_df") {
        vocab.min_df = value;
      } else if (!key.empty() && key.front() != '#') {
        vocab.xpaths.push_back(XpathKey{key});
        vocab.df[XpathKey{key}] = value;
      }
    }
    std::sort(vocab.xpaths.begin(), vocab.xpaths.end());
    return vocab;
  }
};

inline FeatureVocabulary build_vocabulary(std::span<const ParsedPage> pages, std::size_t min_df) {
  if (pages.empty()) throw Error(ErrorKind::InvalidArgument, "vocabulary needs at least one page");
  if (min_df < 1) throw Error(ErrorKind::InvalidArgument, "min_df must be >= 1");
  std::map<XpathKey, std::size_t> df;
  for (const auto& page : pages) {
    for (const auto& [key, count] : page.xpath_counts) {
      if (count > 0) ++df[key];
    }
  }
  FeatureVocabulary vocab;
  vocab.corpus_size = pages.size();
  vocab.min_df = min_df;
  for (const auto& [key, count] : df) {
    if (count >= min_df) {
      vocab.xpaths.push_back(key);
      vocab.df.emplace(key, count);
    }
  }
  if (vocab.empty()) throw Error(ErrorKind::EmptyVocabulary, "no Xpath reaches document frequency " + std::to_string(min_df));
  return vocab;
}

/// Dense weight vector over a vocabulary. Either all zero or summing to 1.
struct PageFeatures {
  std::string url;
  std::vector<double> weights;

  bool is_zero() const {
    return std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; });
  }
};

/// log(tf + 1) * log(|D| / df + 1), natural log.
inline double tfidf_weight(std::size_t tf, std::size_t df, std::size_t corpus_size) {
  if (tf == 0 || df == 0) return 0.0;
  return std::log(static_cast<double>(tf) + 1.0) *
         std::log(static_cast<double>(corpus_size) / static_cast<double>(df) + 1.0);
}

inline PageFeatures featurize(const ParsedPage& page, const FeatureVocabulary& vocab) {
  if (vocab.empty()) throw Error(ErrorKind::EmptyVocabulary, "cannot featurize against an empty vocabulary");
  PageFeatures out{page.url, std::vector<double>(vocab.size(), 0.0)};
  double total = 0.0;
  for (const auto& [key, tf] : page.xpath_counts) {
    auto index = vocab.index_of(key);
    if (!index) continue;
    double w = tfidf_weight(tf, vocab.df.at(key), vocab.corpus_size);
    out.weights[*index] = w;
    total += w;
  }
  if (total > 0.0) {
    for (double& w : out.weights) w /= total;
  }
  return out;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "vectors of size " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline double distance(const PageFeatures& a, const PageFeatures& b) { return distance(a.weights, b.weights); }

}  // namespace structcrawl
