#pragma once

// Synthetic site generator: pages realize per-template Xpath skeletons, links
// follow per-slot destination distributions, and every page carries a
// ground-truth template label.

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "page_model.hpp"
#include "random.hpp"
#include "url.hpp"

namespace structcrawl {

struct SkeletonEntry {
  std::string xpath;  // ends in text, img or a (an off-site link)
  std::size_t min_count = 1;
  std::size_t max_count = 1;
  bool droppable = false;  // removed with probability sigma
  bool per_repeat = false;  // count is multiplied by the page's repeat draw
};

struct LinkSlot {
  ApathKey apath;
  std::map<std::string, double> destinations;  // template id -> probability
  std::size_t min_fanout = 1;
  std::size_t max_fanout = 1;
  bool per_repeat = false;
};

struct TemplateSpec {
  std::string id;
  bool is_ucc = true;
  std::size_t pages = 1;
  std::string url_pattern;  // "{n}" is replaced by the 1-based page number
  // Per-page repetition count (posts on a thread, topics on a board); entries
  // flagged per_repeat scale with it, so they vary together.
  std::size_t min_repeat = 1;
  std::size_t max_repeat = 1;
  std::vector<SkeletonEntry> skeleton;
  std::vector<LinkSlot> slots;
};

struct SyntheticSiteSpec {
  std::string site = "http://synthetic.example";
  std::string entry_template;
  double noise = 0.0;               // sigma
  std::vector<std::string> decoys;  // non-skeleton Xpaths added with probability sigma
  std::uint64_t rng_seed = 0;
  std::vector<TemplateSpec> templates;

  const TemplateSpec& find(const std::string& id) const {
    for (const auto& t : templates) {
      if (t.id == id) return t;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown template: " + id);
  }

  std::size_t total_pages() const {
    std::size_t n = 0;
    for (const auto& t : templates) n += t.pages;
    return n;
  }

  void validate() const {
    if (templates.empty()) throw Error(ErrorKind::InvalidArgument, "spec has no templates");
    if (!Url::parse(site)) throw Error(ErrorKind::InvalidArgument, "site is not an absolute URL: " + site);
    if (noise < 0.0 || noise > 1.0) throw Error(ErrorKind::InvalidArgument, "noise must be in [0, 1]");
    std::set<std::string> ids;
    for (const auto& t : templates) {
      if (!ids.insert(t.id).second) throw Error(ErrorKind::InvalidArgument, "duplicate template id: " + t.id);
      if (t.pages == 0) throw Error(ErrorKind::InvalidArgument, "template without pages: " + t.id);
      if (t.min_repeat > t.max_repeat) throw Error(ErrorKind::InvalidArgument, "bad repeat range in " + t.id);
      if (t.url_pattern.find("{n}") == std::string::npos) {
        throw Error(ErrorKind::InvalidArgument, "url pattern lacks {n}: " + t.id);
      }
    }
    find(entry_template);
    for (const auto& t : templates) {
      for (const auto& e : t.skeleton) {
        if (e.min_count > e.max_count) throw Error(ErrorKind::InvalidArgument, "bad count range in " + t.id);
        if (XpathKey{e.xpath}.leaf().empty() || e.xpath.rfind("/html/body", 0) != 0) {
          throw Error(ErrorKind::InvalidArgument, "skeleton Xpath must start at /html/body: " + e.xpath);
        }
      }
      for (const auto& s : t.slots) {
        if (s.min_fanout > s.max_fanout) throw Error(ErrorKind::InvalidArgument, "bad fanout range in " + t.id);
        if (s.apath.path.leaf() != kAnchorLeaf) throw Error(ErrorKind::InvalidArgument, "slot path must end in a");
        double sum = 0.0;
        for (const auto& [dest, p] : s.destinations) {
          find(dest);
          if (p < 0.0) throw Error(ErrorKind::InvalidArgument, "negative probability in " + t.id);
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw Error(ErrorKind::InvalidArgument, "destination distribution of " + t.id + " sums to " + std::to_string(sum));
        }
      }
    }
    // Template-level connectivity.
    std::set<std::string> reached{entry_template};
    std::deque<std::string> queue{entry_template};
    while (!queue.empty()) {
      const auto& t = find(queue.front());
      queue.pop_front();
      for (const auto& s : t.slots) {
        if (s.max_fanout == 0) continue;
        for (const auto& [dest, p] : s.destinations) {
          if (p > 0.0 && reached.insert(dest).second) queue.push_back(dest);
        }
      }
    }
    for (const auto& t : templates) {
      if (!reached.count(t.id)) throw Error(ErrorKind::UnreachableTemplate, "template unreachable from entry: " + t.id);
    }
  }

  static SyntheticSiteSpec from_json(const nlohmann::json& j) {
    SyntheticSiteSpec spec;
    spec.site = j.value("site", spec.site);
    spec.entry_template = j.at("entry").get<std::string>();
    spec.noise = j.value("noise", 0.0);
    spec.decoys = j.value("decoys", std::vector<std::string>{});
    spec.rng_seed = j.value("seed", std::uint64_t{0});
    for (const auto& tj : j.at("templates")) {
      TemplateSpec t;
      t.id = tj.at("id").get<std::string>();
      t.is_ucc = tj.value("ucc", true);
      t.pages = tj.at("pages").get<std::size_t>();
      t.url_pattern = tj.value("url", "/" + t.id + "/{n}");
      auto repeat = tj.value("repeat", std::vector<std::size_t>{1, 1});
      t.min_repeat = repeat.at(0);
      t.max_repeat = repeat.at(repeat.size() > 1 ? 1 : 0);
      for (const auto& ej : tj.value("skeleton", nlohmann::json::array())) {
        SkeletonEntry e;
        e.xpath = ej.at("xpath").get<std::string>();
        auto count = ej.value("count", std::vector<std::size_t>{1, 1});
        e.min_count = count.at(0);
        e.max_count = count.at(count.size() > 1 ? 1 : 0);
        e.droppable = ej.value("droppable", false);
        e.per_repeat = ej.value("per_repeat", false);
        t.skeleton.push_back(std::move(e));
      }
      for (const auto& sj : tj.value("slots", nlohmann::json::array())) {
        LinkSlot s;
        s.apath = ApathKey::parse(sj.at("apath").get<std::string>());
        auto fanout = sj.value("fanout", std::vector<std::size_t>{1, 1});
        s.min_fanout = fanout.at(0);
        s.max_fanout = fanout.at(fanout.size() > 1 ? 1 : 0);
        s.destinations = sj.at("to").get<std::map<std::string, double>>();
        s.per_repeat = sj.value("per_repeat", false);
        t.slots.push_back(std::move(s));
      }
      spec.templates.push_back(std::move(t));
    }
    return spec;
  }

  static SyntheticSiteSpec read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read spec " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, std::string("bad site spec: ") + e.what());
    }
  }
};

struct GeneratedSite {
  CorpusStore store;
  std::map<std::string, std::string> labels;  // url -> template id, every page
  std::map<std::string, bool> ucc;            // template id -> flag

  void write_labels(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& url : store.urls()) {
      const auto& t = labels.at(url);
      out << url << '\t' << t << '\t' << (ucc.at(t) ? 1 : 0) << '\n';
    }
  }
};

namespace detail {

struct Chain {
  std::vector<std::string> tags;  // elements below body
  std::string leaf;               // text, img or a
  std::vector<std::string> classes;
};

inline Chain chain_of(std::string_view xpath) {
  Chain c;
  std::string_view rest = xpath.substr(std::string_view("/html/body").size());
  std::size_t pos = 0;
  while (pos < rest.size()) {
    auto next = rest.find('/', pos + 1);
    std::string tag(rest.substr(pos + 1, next == std::string_view::npos ? std::string_view::npos : next - pos - 1));
    if (!tag.empty()) c.tags.push_back(std::move(tag));
    if (next == std::string_view::npos) break;
    pos = next;
  }
  if (c.tags.empty()) throw Error(ErrorKind::InvalidArgument, "Xpath has no leaf: " + std::string(xpath));
  c.leaf = c.tags.back();
  c.tags.pop_back();
  return c;
}

/// One nested element chain per leaf occurrence; tag paths are all that the
/// feature extractor sees, so siblings need not be merged.
inline void render_leaf(std::string& out, const Chain& chain, const std::string& href, const std::string& text) {
  for (const auto& tag : chain.tags) out += "<" + tag + ">";
  if (chain.leaf == "text") {
    out += text;
  } else if (chain.leaf == "img") {
    out += "<img src=\"/static/" + text + ".png\">";
  } else if (chain.leaf == "a") {
    out += "<a";
    if (!chain.classes.empty()) {
      out += " class=\"";
      for (std::size_t i = 0; i < chain.classes.size(); ++i) out += (i ? " " : "") + chain.classes[i];
      out += "\"";
    }
    out += " href=\"" + href + "\">" + text + "</a>";
  } else {
    out += "<" + chain.leaf + ">" + text + "</" + chain.leaf + ">";
  }
  for (auto it = chain.tags.rbegin(); it != chain.tags.rend(); ++it) out += "</" + *it + ">";
  out += "\n";
}

inline std::string page_path(const TemplateSpec& t, std::size_t n) {
  std::string path = t.url_pattern;
  path.replace(path.find("{n}"), 3, std::to_string(n));
  return path;
}

}  // namespace detail

/// Realizes the spec. Link targets within a template are handed out by a
/// rotating cursor and pages are generated in breadth-first order from the
/// entry page, so every page that receives a link is reachable.
inline GeneratedSite generate(const SyntheticSiteSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  auto base = Url::parse(spec.site);

  std::map<std::string, std::size_t> template_index;
  for (std::size_t i = 0; i < spec.templates.size(); ++i) template_index[spec.templates[i].id] = i;
  // Page ids are (template index, 0-based page number).
  using PageId = std::pair<std::size_t, std::size_t>;
  auto url_of = [&](PageId id) {
    return base->resolve(detail::page_path(spec.templates[id.first], id.second + 1))->str();
  };
  std::vector<std::size_t> cursor(spec.templates.size(), 0);
  auto draw_template = [&](const std::map<std::string, double>& dist) {
    double r = uniform_real(rng);
    double acc = 0.0;
    const std::string* last = nullptr;
    for (const auto& [id, p] : dist) {
      if (p <= 0.0) continue;
      last = &id;
      acc += p;
      if (r < acc) return template_index.at(id);
    }
    return template_index.at(*last);
  };

  GeneratedSite site;
  site.store.site = SiteScope::for_url(spec.site).key();
  for (const auto& t : spec.templates) site.ucc[t.id] = t.is_ucc;
  PageId entry{template_index.at(spec.entry_template), 0};
  site.store.entry = url_of(entry);

  std::set<PageId> seen{entry};
  std::deque<PageId> queue{entry};
  auto next_unvisited = [&]() -> std::optional<PageId> {
    for (std::size_t t = 0; t < spec.templates.size(); ++t) {
      for (std::size_t n = 0; n < spec.templates[t].pages; ++n) {
        if (!seen.count({t, n})) return PageId{t, n};
      }
    }
    return std::nullopt;
  };
  std::vector<std::string> unreachable;

  while (true) {
    if (queue.empty()) {
      auto orphan = next_unvisited();
      if (!orphan) break;
      unreachable.push_back(url_of(*orphan));
      seen.insert(*orphan);
      queue.push_back(*orphan);
    }
    PageId id = queue.front();
    queue.pop_front();
    const TemplateSpec& t = spec.templates[id.first];
    std::string url = url_of(id);
    std::string body;
    body += "<!DOCTYPE html>\n<html><head><title>" + t.id + " " + std::to_string(id.second + 1) +
            "</title></head>\n<body>\n";
    std::size_t line = 0;
    auto filler = [&] { return t.id + " item " + std::to_string(++line); };
    std::size_t repeat = uniform_between(rng, t.min_repeat, t.max_repeat);
    for (const auto& e : t.skeleton) {
      if (e.droppable && uniform_real(rng) < spec.noise) continue;
      auto chain = detail::chain_of(e.xpath);
      std::size_t count = uniform_between(rng, e.min_count, e.max_count) * (e.per_repeat ? repeat : 1);
      for (std::size_t k = 0; k < count; ++k) {
        detail::render_leaf(body, chain, "http://elsewhere.invalid/" + std::to_string(line), filler());
      }
    }
    for (const auto& s : t.slots) {
      auto chain = detail::chain_of(s.apath.path.path);
      chain.classes = s.apath.leaf_classes;
      std::size_t fanout = uniform_between(rng, s.min_fanout, s.max_fanout) * (s.per_repeat ? repeat : 1);
      for (std::size_t k = 0; k < fanout; ++k) {
        std::size_t dest_t = draw_template(s.destinations);
        PageId dest{dest_t, cursor[dest_t]++ % spec.templates[dest_t].pages};
        if (seen.insert(dest).second) queue.push_back(dest);
        detail::render_leaf(body, chain, detail::page_path(spec.templates[dest_t], dest.second + 1), filler());
      }
    }
    for (const auto& decoy : spec.decoys) {
      if (uniform_real(rng) < spec.noise) detail::render_leaf(body, detail::chain_of(decoy), "http://elsewhere.invalid/", filler());
    }
    body += "</body></html>\n";
    site.store.add(url, StoredRecord{200, "text/html; charset=utf-8", std::move(body), ""});
    site.labels[url] = t.id;
  }
  if (!unreachable.empty()) {
    throw Error(ErrorKind::UnreachableTemplate, std::to_string(unreachable.size()) +
                                                    " pages unreachable from the entry, first: " + unreachable.front());
  }
  return site;
}

}  // namespace structcrawl
