#pragma once

// A small, lenient HTML tree builder. It recovers a DOM from real-world markup
// (unclosed tags, stray end tags, unquoted attributes) without attempting the
// full HTML5 insertion-mode machinery.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "url.hpp"

namespace structcrawl::html {

enum class NodeKind { Element, Text };

struct Node {
  NodeKind kind = NodeKind::Element;
  std::string tag;  // lowercase; empty for text
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;  // entity-decoded, text nodes only
  std::size_t parent = 0;
  std::vector<std::size_t> children;

  std::optional<std::string_view> attribute(std::string_view name) const {
    for (const auto& [key, value] : attributes) {
      if (key == name) return value;
    }
    return std::nullopt;
  }
};

/// Node 0 is the root element. The parent of the root is itself.
struct Document {
  std::vector<Node> nodes;

  const Node& root() const { return nodes.front(); }
};

namespace detail {

inline bool is_void_element(std::string_view tag) {
  static constexpr std::string_view kVoid[] = {"area", "base",  "br",   "col",   "embed", "hr",    "img",
                                               "input", "keygen", "link", "meta", "param", "source", "track",
                                               "wbr"};
  return std::find(std::begin(kVoid), std::end(kVoid), tag) != std::end(kVoid);
}

inline bool is_raw_text_element(std::string_view tag) {
  return tag == "script" || tag == "style" || tag == "textarea" || tag == "title" || tag == "xmp";
}

inline bool closes_paragraph(std::string_view tag) {
  static constexpr std::string_view kBlock[] = {
      "address", "article", "aside", "blockquote", "div", "dl", "fieldset", "footer", "form", "h1", "h2", "h3",
      "h4",      "h5",      "h6",    "header",     "hr",  "main", "nav",    "ol",     "p",    "pre", "section",
      "table",   "ul"};
  return std::find(std::begin(kBlock), std::end(kBlock), tag) != std::end(kBlock);
}

inline bool is_name_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '-' || c == '_' || c == ':' || c == '.' || u >= 0x80;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace detail

/// Decodes numeric character references and the handful of named entities
/// that matter for attribute values and whitespace detection.
inline std::string decode_entities(std::string_view in) {
  static constexpr std::pair<std::string_view, std::string_view> kNamed[] = {
      {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", "\xC2\xA0"}};
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] != '&') {
      out.push_back(in[i]);
      continue;
    }
    std::size_t semi = in.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back('&');
      continue;
    }
    std::string_view name = in.substr(i + 1, semi - i - 1);
    bool done = false;
    if (!name.empty() && name.front() == '#') {
      std::string_view digits = name.substr(1);
      int base = 10;
      if (!digits.empty() && (digits.front() == 'x' || digits.front() == 'X')) {
        base = 16;
        digits.remove_prefix(1);
      }
      if (!digits.empty()) {
        std::uint32_t cp = 0;
        bool ok = true;
        for (char c : digits) {
          int v = base == 16 && std::isxdigit(static_cast<unsigned char>(c))
                      ? (std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : (std::tolower(c) - 'a' + 10))
                      : (std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : -1);
          if (v < 0 || v >= base) {
            ok = false;
            break;
          }
          cp = std::min<std::uint32_t>(cp * static_cast<std::uint32_t>(base) + static_cast<std::uint32_t>(v), 0x110000);
        }
        if (ok) {
          detail::append_utf8(out, cp);
          done = true;
        }
      }
    } else {
      for (const auto& [key, value] : kNamed) {
        if (name == key) {
          out.append(value);
          done = true;
          break;
        }
      }
    }
    if (done) {
      i = semi;
    } else {
      out.push_back('&');
    }
  }
  return out;
}

class TreeBuilder {
 public:
  explicit TreeBuilder(std::string_view input) : in_(input) {}

  Document build() {
    doc_.nodes.clear();
    stack_.clear();
    pos_ = 0;
    while (pos_ < in_.size()) {
      if (in_[pos_] == '<') {
        lex_markup();
      } else {
        std::size_t next = in_.find('<', pos_);
        if (next == std::string_view::npos) next = in_.size();
        add_text(in_.substr(pos_, next - pos_));
        pos_ = next;
      }
    }
    if (doc_.nodes.empty()) throw Error(ErrorKind::MalformedDocument, "no root element could be recovered");
    return std::move(doc_);
  }

 private:
  void lex_markup() {
    std::string_view rest = in_.substr(pos_);
    if (rest.substr(0, 4) == "<!--") {
      auto end = in_.find("-->", pos_ + 4);
      pos_ = end == std::string_view::npos ? in_.size() : end + 3;
      return;
    }
    if (rest.size() >= 2 && (rest[1] == '!' || rest[1] == '?')) {
      auto end = in_.find('>', pos_);
      pos_ = end == std::string_view::npos ? in_.size() : end + 1;
      return;
    }
    if (rest.size() >= 2 && rest[1] == '/') {
      std::size_t p = pos_ + 2;
      std::size_t start = p;
      while (p < in_.size() && detail::is_name_char(in_[p])) ++p;
      std::string tag = ascii_lower_copy(in_.substr(start, p - start));
      auto end = in_.find('>', p);
      pos_ = end == std::string_view::npos ? in_.size() : end + 1;
      if (!tag.empty()) close_element(tag);
      return;
    }
    if (rest.size() < 2 || !std::isalpha(static_cast<unsigned char>(rest[1]))) {
      add_text(in_.substr(pos_, 1));
      ++pos_;
      return;
    }
    std::size_t p = pos_ + 1;
    std::size_t start = p;
    while (p < in_.size() && detail::is_name_char(in_[p])) ++p;
    Node node;
    node.tag = ascii_lower_copy(in_.substr(start, p - start));
    bool self_closing = false;
    while (p < in_.size()) {
      while (p < in_.size() && detail::is_space(in_[p])) ++p;
      if (p >= in_.size()) break;
      if (in_[p] == '>') {
        ++p;
        break;
      }
      if (in_[p] == '/') {
        ++p;
        if (p < in_.size() && in_[p] == '>') {
          self_closing = true;
          ++p;
          break;
        }
        continue;
      }
      std::size_t name_start = p;
      while (p < in_.size() && !detail::is_space(in_[p]) && in_[p] != '=' && in_[p] != '>' &&
             !(in_[p] == '/' && p + 1 < in_.size() && in_[p + 1] == '>')) {
        ++p;
      }
      std::string name = ascii_lower_copy(in_.substr(name_start, p - name_start));
      while (p < in_.size() && detail::is_space(in_[p])) ++p;
      std::string value;
      if (p < in_.size() && in_[p] == '=') {
        ++p;
        while (p < in_.size() && detail::is_space(in_[p])) ++p;
        if (p < in_.size() && (in_[p] == '"' || in_[p] == '\'')) {
          char quote = in_[p++];
          std::size_t close = in_.find(quote, p);
          if (close == std::string_view::npos) close = in_.size();
          value = decode_entities(in_.substr(p, close - p));
          p = std::min(close + 1, in_.size());
        } else {
          std::size_t vstart = p;
          while (p < in_.size() && !detail::is_space(in_[p]) && in_[p] != '>') ++p;
          value = decode_entities(in_.substr(vstart, p - vstart));
        }
      }
      if (!name.empty() && !node.attribute(name)) node.attributes.emplace_back(std::move(name), std::move(value));
    }
    pos_ = p;
    std::string tag = node.tag;
    open_element(std::move(node), self_closing || detail::is_void_element(tag));
    if (!self_closing && detail::is_raw_text_element(tag)) {
      std::string closing = "</" + tag;
      std::size_t end = find_ci(closing, pos_);
      std::string_view body = in_.substr(pos_, (end == std::string_view::npos ? in_.size() : end) - pos_);
      if (tag == "title" || tag == "textarea") add_text(body);
      if (end == std::string_view::npos) {
        pos_ = in_.size();
      } else {
        auto gt = in_.find('>', end);
        pos_ = gt == std::string_view::npos ? in_.size() : gt + 1;
      }
      close_element(tag);
    }
  }

  std::size_t find_ci(std::string_view needle, std::size_t from) const {
    for (std::size_t i = from; i + needle.size() <= in_.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < needle.size(); ++k) {
        if (std::tolower(static_cast<unsigned char>(in_[i + k])) != needle[k]) {
          match = false;
          break;
        }
      }
      if (match) return i;
    }
    return std::string_view::npos;
  }

  static std::string ascii_lower_copy(std::string_view s) { return structcrawl::detail::ascii_lower(s); }

  void create_root() {
    Node root;
    root.tag = "html";
    root.parent = 0;
    doc_.nodes.push_back(std::move(root));
    stack_.push_back(0);
  }

  void apply_implied_end_tags(std::string_view tag) {
    auto close_if_open = [&](std::string_view target, std::initializer_list<std::string_view> boundaries) {
      for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
        const auto& open_tag = doc_.nodes[*it].tag;
        if (open_tag == target) {
          close_element(std::string(target));
          return;
        }
        if (std::find(boundaries.begin(), boundaries.end(), open_tag) != boundaries.end()) return;
      }
    };
    if (detail::closes_paragraph(tag)) close_if_open("p", {"div", "td", "th", "li", "body", "table", "button"});
    if (tag == "li") close_if_open("li", {"ul", "ol"});
    if (tag == "dt" || tag == "dd") {
      close_if_open("dt", {"dl"});
      close_if_open("dd", {"dl"});
    }
    if (tag == "tr") close_if_open("tr", {"table", "tbody", "thead", "tfoot"});
    if (tag == "td" || tag == "th") {
      close_if_open("td", {"tr", "table"});
      close_if_open("th", {"tr", "table"});
    }
    if (tag == "option") close_if_open("option", {"select", "datalist"});
  }

  void open_element(Node node, bool closed) {
    if (doc_.nodes.empty()) {
      create_root();
      if (node.tag == "html") {
        doc_.nodes[0].attributes = std::move(node.attributes);
        return;
      }
    } else if (node.tag == "html") {
      // Repeated or late <html> tags are ignored.
      return;
    }
    apply_implied_end_tags(node.tag);
    std::size_t parent = stack_.empty() ? 0 : stack_.back();
    std::size_t index = doc_.nodes.size();
    node.parent = parent;
    doc_.nodes.push_back(std::move(node));
    doc_.nodes[parent].children.push_back(index);
    if (!closed) stack_.push_back(index);
  }

  void close_element(const std::string& tag) {
    for (std::size_t i = stack_.size(); i-- > 1;) {
      if (doc_.nodes[stack_[i]].tag == tag) {
        stack_.resize(i);
        return;
      }
    }
  }

  void add_text(std::string_view raw) {
    if (raw.empty()) return;
    // Text before the first element has nowhere to attach.
    if (doc_.nodes.empty()) return;
    std::size_t parent = stack_.back();
    auto& siblings = doc_.nodes[parent].children;
    if (!siblings.empty() && doc_.nodes[siblings.back()].kind == NodeKind::Text) {
      doc_.nodes[siblings.back()].text += decode_entities(raw);
      return;
    }
    Node text;
    text.kind = NodeKind::Text;
    text.text = decode_entities(raw);
    text.parent = parent;
    std::size_t index = doc_.nodes.size();
    doc_.nodes.push_back(std::move(text));
    doc_.nodes[parent].children.push_back(index);
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  Document doc_;
  std::vector<std::size_t> stack_;
};

/// Parses markup into a Document rooted at <html>. Documents whose first
/// element is not <html> get a synthetic <html> root. Throws
/// MalformedDocument when no element is present at all.
inline Document parse(std::string_view markup) { return TreeBuilder(markup).build(); }

}  // namespace structcrawl::html
