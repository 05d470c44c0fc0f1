// URL handling, page model, clustering, navigation, policy and metrics.

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <structcrawl/clustering.hpp>
#include <structcrawl/metrics.hpp>
#include <structcrawl/navigation.hpp>
#include <structcrawl/page_model.hpp>
#include <structcrawl/policy.hpp>

#include "oracles.hpp"

using namespace structcrawl;

namespace {

const SiteScope kScope = SiteScope::for_url("http://s.com/");

ParsedPage page_of(const std::string& html, const std::string& url = "http://s.com/") {
  return parse_page(html, url, kScope);
}

PageFeatures point(const std::string& url, std::vector<double> w) { return {url, std::move(w)}; }

}  // namespace

TEST(Url, NormalizesCaseFragmentsAndDotSegments) {
  EXPECT_EQ(normalize_url("HTTP://S.Com/a/./b/../c?q=1#top"), "http://s.com/a/c?q=1");
  EXPECT_EQ(normalize_url("http://s.com"), "http://s.com/");
  EXPECT_FALSE(normalize_url("not a url"));
}

TEST(Url, ResolvesRelativeReferences) {
  auto base = Url::parse("http://s.com/a/b/c");
  ASSERT_TRUE(base);
  EXPECT_EQ(base->resolve("../d")->str(), "http://s.com/a/d");
  EXPECT_EQ(base->resolve("/x?y")->str(), "http://s.com/x?y");
  EXPECT_EQ(base->resolve("//t.com/z")->str(), "http://t.com/z");
}

TEST(Url, ScopeByRegistrableDomainOrHost) {
  auto domain = SiteScope::for_url("http://www.forum.example/");
  EXPECT_TRUE(domain.contains("http://img.forum.example/x"));
  EXPECT_FALSE(domain.contains("http://other.example/"));
  auto host = SiteScope::for_url("http://www.forum.example/", ScopeMode::SameHost);
  EXPECT_FALSE(host.contains("http://img.forum.example/x"));
  EXPECT_EQ(registrable_domain("a.b.example.co.uk"), "example.co.uk");
}

TEST(PageModel, LeafWalkOfSingleAnchor) {
  auto page = page_of("<html><body><a class='b a' href='/x'>t</a></body></html>");
  std::map<XpathKey, std::size_t> want{{XpathKey{"/html/body/a"}, 1}, {XpathKey{"/html/body/a/text"}, 1}};
  EXPECT_EQ(page.xpath_counts, want);
  ASSERT_EQ(page.anchor_links.size(), 1u);
  EXPECT_EQ(page.anchor_links[0].apath.str(), "/html/body/a[a b]");
  EXPECT_EQ(page.anchor_links[0].url, "http://s.com/x");
}

TEST(PageModel, OffSiteLinkCountsAsXpathOnly) {
  auto page = page_of("<html><body><a href='http://elsewhere.org/'>x</a></body></html>");
  EXPECT_TRUE(page.anchor_links.empty());
  EXPECT_EQ(page.xpath_counts.at(XpathKey{"/html/body/a"}), 1u);
}

TEST(PageModel, EmptyDocumentHasNoFeatures) {
  auto page = page_of("<html></html>");
  EXPECT_TRUE(page.xpath_counts.empty());
  EXPECT_TRUE(page.anchor_links.empty());
  EXPECT_THROW(page_of(""), Error);
}

TEST(PageModel, SkipsScriptsStylesAndWhitespace) {
  auto page = page_of(
      "<html><head><title>t</title><style>p{}</style></head><body>\n  <script>var a;</script>"
      "<p>one</p><p> </p><img src=x></body></html>");
  std::map<XpathKey, std::size_t> want{{XpathKey{"/html/body/p/text"}, 1}, {XpathKey{"/html/body/img"}, 1}};
  EXPECT_EQ(page.xpath_counts, want);
}

TEST(PageModel, BaseHrefRedirectsResolution) {
  auto page = page_of("<html><head><base href='http://s.com/root/'></head><body><a href='x'>y</a></body></html>",
                      "http://s.com/other/page");
  ASSERT_EQ(page.anchor_links.size(), 1u);
  EXPECT_EQ(page.anchor_links[0].url, "http://s.com/root/x");
}

TEST(PageModel, ApathRoundTripsThroughText) {
  ApathKey key{XpathKey{"/html/body/div/a"}, {"z", "a"}};
  EXPECT_EQ(key.str(), "/html/body/div/a[a z]");
  EXPECT_EQ(ApathKey::parse(key.str()), key);
  EXPECT_EQ(ApathKey::parse("/html/body/a"), (ApathKey{XpathKey{"/html/body/a"}, {}}));
}

TEST(Features, HandComputedTfIdf) {
  ParsedPage a{"http://s.com/a", {{XpathKey{"/x1"}, 1}, {XpathKey{"/x2"}, 1}}, {}};
  ParsedPage b{"http://s.com/b", {{XpathKey{"/x2"}, 3}}, {}};
  std::vector<ParsedPage> pages{a, b};
  auto vocab = build_vocabulary(pages, 1);
  auto f = featurize(a, vocab);
  double w1 = std::log(2.0) * std::log(3.0), w2 = std::log(2.0) * std::log(2.0);
  EXPECT_NEAR(f.weights[0], w1 / (w1 + w2), 1e-15);
  EXPECT_NEAR(f.weights[1], w2 / (w1 + w2), 1e-15);
  EXPECT_NEAR(f.weights[0], 0.6131, 5e-5);
}

TEST(Features, SingleXpathNormalizesToOne) {
  ParsedPage a{"u", {{XpathKey{"/x"}, 5}}, {}};
  std::vector<ParsedPage> pages{a};
  EXPECT_EQ(featurize(a, build_vocabulary(pages, 1)).weights, std::vector<double>{1.0});
}

TEST(Features, MinDfDropsRareXpathsAndEmptyVocabularyThrows) {
  ParsedPage a{"a", {{XpathKey{"/common"}, 1}, {XpathKey{"/rare"}, 1}}, {}};
  ParsedPage b{"b", {{XpathKey{"/common"}, 2}}, {}};
  std::vector<ParsedPage> pages{a, b};
  auto vocab = build_vocabulary(pages, 2);
  EXPECT_EQ(vocab.size(), 1u);
  EXPECT_THROW(build_vocabulary(pages, 3), Error);
}

TEST(Features, IdfNeverGrowsWithDf) {
  for (std::size_t df = 1; df < 50; ++df) EXPECT_GE(tfidf_weight(3, df, 50), tfidf_weight(3, df + 1, 50));
}

TEST(Features, WeightsAreAProbabilityVector) {
  std::mt19937_64 rng(1);
  std::vector<ParsedPage> pages;
  for (int i = 0; i < 30; ++i) {
    ParsedPage p{"p" + std::to_string(i), {}, {}};
    for (int x = 0; x < 8; ++x) {
      auto tf = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
      if (tf) p.xpath_counts[XpathKey{"/x" + std::to_string(x)}] = tf;
    }
    pages.push_back(p);
  }
  auto vocab = build_vocabulary(pages, 1);
  for (const auto& p : pages) {
    auto f = featurize(p, vocab);
    double sum = std::accumulate(f.weights.begin(), f.weights.end(), 0.0);
    if (!f.is_zero()) EXPECT_NEAR(sum, 1.0, 1e-12);
    for (double w : f.weights) EXPECT_GE(w, 0.0);
  }
}

TEST(Clustering, MatchesBruteForceDbscanOnRandomInstances) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 40; ++t) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 120)(rng);
    oracle::Points pts(n, std::vector<double>(3));
    for (auto& p : pts) {
      for (double& x : p) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    double eps = std::uniform_real_distribution<double>(0.05, 0.4)(rng);
    std::size_t min_pts = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    auto got = dbscan(n, eps, min_pts, [&](std::size_t i, std::size_t j) { return oracle::euclid(pts[i], pts[j]); });
    EXPECT_EQ(oracle::canonical(got), oracle::canonical(oracle::dbscan(pts, eps, min_pts))) << "instance " << t;
  }
}

TEST(Clustering, SmallGroupBelowMinPtsIsNoise) {
  std::vector<PageFeatures> f;
  for (int i = 0; i < 3; ++i) f.push_back(point("odd" + std::to_string(i), {5.0, 5.0}));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    f.push_back(point("b" + std::to_string(i), {std::uniform_real_distribution<double>(0, 0.05)(rng), 0.0}));
  }
  ClusteringConfig config;
  config.eps_override = 0.1;
  auto sitemap = cluster(f, config);
  EXPECT_EQ(sitemap.size(), 1u);
  EXPECT_EQ(sitemap.outliers, (std::vector<std::string>{"odd0", "odd1", "odd2"}));
}

TEST(Clustering, ClusterInvariants) {
  std::mt19937_64 rng(4);
  std::vector<PageFeatures> f;
  for (int i = 0; i < 90; ++i) {
    double c = static_cast<double>(i % 3);
    f.push_back(point("p" + std::to_string(i), {c + std::uniform_real_distribution<double>(0, 0.1)(rng), c}));
  }
  f.push_back(point("far", {10.0, 10.0}));
  ClusteringConfig config;
  config.eps_override = 0.3;
  auto sitemap = cluster(f, config);
  EXPECT_EQ(sitemap.size(), 3u);
  for (const auto& c : sitemap.clusters) {
    EXPECT_GE(c.members.size(), config.min_pts);
    EXPECT_EQ(c.centroid.size(), 2u);
    EXPECT_GT(c.dsim, 0.0);
  }
  EXPECT_EQ(sitemap.label_of("far"), kOutlier);
  EXPECT_EQ(sitemap.label_of("p0"), 0);
  EXPECT_EQ(sitemap.label_of("p1"), 1);
  auto again = cluster(f, config);
  EXPECT_EQ(again.to_json(), sitemap.to_json());
}

TEST(Clustering, DsimZeroIffMembersIdentical) {
  std::vector<PageFeatures> same(5, point("", {0.5, 0.5}));
  for (std::size_t i = 0; i < same.size(); ++i) same[i].url = "s" + std::to_string(i);
  std::vector<ClusterId> labels(5, 0);
  EXPECT_EQ(sitemap_from_labels(same, labels, {}, 0.0, "").clusters[0].dsim, 0.0);
  same[0].weights = {1.0, 0.0};
  EXPECT_GT(sitemap_from_labels(same, labels, {}, 0.0, "").clusters[0].dsim, 0.0);
}

TEST(Eps, TwoBlobsSeparate) {
  std::mt19937_64 rng(8);
  std::vector<PageFeatures> f;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 50; ++i) {
      f.push_back(point("p" + std::to_string(b * 50 + i),
                        {b + std::uniform_real_distribution<double>(-0.007, 0.007)(rng),
                         std::uniform_real_distribution<double>(-0.007, 0.007)(rng)}));
    }
  }
  double eps = estimate_eps(f, {});
  EXPECT_GT(eps, 0.0);
  EXPECT_LT(eps, 1.0);
  auto sitemap = cluster(f, {});
  EXPECT_EQ(sitemap.size(), 2u);
  EXPECT_TRUE(sitemap.outliers.empty());
}

TEST(Eps, ValleyRuleOnRecordedKdist) {
  // Five bins of width 0.1 hold (0, 6, 1, 1, 2) pages. Bin 2 is the first
  // sparse bin with more than half of the pages to its left, so eps is its
  // left edge.
  std::vector<double> kdist{0.15, 0.15, 0.15, 0.15, 0.15, 0.15, 0.25, 0.35, 0.45, 0.5};
  ClusteringConfig config;
  config.w_bins = 1.0;
  auto est = estimate_eps_from_kdist(kdist, 5, config);
  EXPECT_EQ(est.histogram, (std::vector<std::size_t>{0, 6, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(est.eps, 0.2);
}

TEST(Eps, FallsBackToLargestKdist) {
  std::vector<double> kdist(10, 0.3);
  ClusteringConfig config;
  config.w_bins = 1.0;
  EXPECT_DOUBLE_EQ(estimate_eps_from_kdist(kdist, 3, config).eps, 0.3);
}

TEST(Eps, IdenticalPagesSignalDegenerate) {
  std::vector<PageFeatures> f(8, point("", {1.0}));
  for (std::size_t i = 0; i < f.size(); ++i) f[i].url = "p" + std::to_string(i);
  try {
    estimate_eps(f, {});
    FAIL() << "expected DegenerateDistances";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateDistances);
  }
  auto sitemap = cluster(f, {});
  EXPECT_TRUE(sitemap.degenerate_distances);
  EXPECT_EQ(sitemap.size(), 1u);
}

TEST(Classify, UnanimousMajorityAndZero) {
  // The constant third coordinate keeps the query points non-zero.
  std::vector<PageFeatures> training{point("a0", {1.0, 0.0, 1.0}),   point("b0", {-1.0, 0.0, 1.0}),
                                     point("a1", {0.0, 1.1, 1.0}),   point("b1", {-5.0, -5.0, 1.0}),
                                     point("a2", {5.0, 5.0, 1.0}),   point("b2", {-5.0, 5.0, 1.0})};
  std::vector<ClusterId> labels{0, 1, 0, 1, 0, 1};
  auto sitemap = sitemap_from_labels(training, labels, {}, 0.3, "");
  auto q = point("q", {0.0, 0.0, 1.0});
  EXPECT_EQ(classify(point("near_a2", {5.0, 5.1, 1.0}), sitemap, training), 0);
  // a0 and b0 are both at distance 1; a1 at 1.1 makes the split 2-1.
  EXPECT_EQ(classify(q, sitemap, training), 0);
  training[2] = point("a1", {-0.2, -1.1, 1.0});
  labels[2] = 1;
  EXPECT_EQ(classify(q, sitemap_from_labels(training, labels, {}, 0.3, ""), training), 1);
  EXPECT_EQ(classify(point("zero", {0.0, 0.0, 0.0}), sitemap, training), kOutlier);
  EXPECT_THROW(classify(q, sitemap, {}), Error);
}

TEST(Classify, TieGoesToNearestLabel) {
  std::vector<PageFeatures> training{point("a", {0.0, 0.1}), point("b", {0.0, 0.2}), point("o", {0.0, 0.3}),
                                     point("c", {5.0, 5.0})};
  std::vector<ClusterId> labels{0, 1, kOutlier, 0};
  auto sitemap = sitemap_from_labels(training, labels, {}, 0.3, "");
  // Neighbours a, b, o: one vote each; a is nearest.
  EXPECT_EQ(classify(point("q", {1.0, 0.0}), sitemap, training), 0);
  EXPECT_EQ(classify(point("q", {1.0, 0.35}), sitemap, training), kOutlier);
}

namespace {

struct NavFixture {
  SampleRun run;
  Sitemap sitemap;
  std::map<std::string, int> labels;
};

// Two pages in cluster 0 link under one Apath to pages of clusters 1 and 2
// (3/1), plus an unsampled URL; one outlier page links to cluster 1.
NavFixture nav_fixture() {
  NavFixture f;
  std::vector<std::pair<std::string, ClusterId>> pages{{"s0", 0}, {"s1", 0}, {"d0", 1}, {"d1", 1},
                                                       {"d2", 1}, {"e0", 2}, {"o0", kOutlier}};
  std::vector<PageFeatures> features;
  std::vector<ClusterId> ids;
  for (const auto& [url, id] : pages) {
    f.run.pages.push_back({url, {}, {}});
    features.push_back({url, {0.0}});
    ids.push_back(id);
    f.labels[url] = id;
  }
  f.sitemap = sitemap_from_labels(features, ids, {}, 0.0, "");
  ApathKey x{XpathKey{"/html/body/a"}, {}}, y{XpathKey{"/html/body/div/a"}, {"more"}};
  f.run.url_lists[{"s0", x}] = {"d0", "d1", "unseen"};
  f.run.url_lists[{"s1", x}] = {"d2", "e0"};
  f.run.url_lists[{"s1", y}] = {"unseen2"};
  f.run.url_lists[{"o0", x}] = {"d0"};
  return f;
}

}  // namespace

TEST(Navigation, CountsLabelledDestinations) {
  auto f = nav_fixture();
  auto table = build_table(f.run, f.sitemap);
  ApathKey x{XpathKey{"/html/body/a"}, {}}, y{XpathKey{"/html/body/div/a"}, {"more"}};
  const auto* d = lookup(table, 0, x);
  ASSERT_NE(d, nullptr);
  EXPECT_EQ(*d, (Distribution{{1, 0.75}, {2, 0.25}}));
  EXPECT_EQ(table.entries.at({0, x}).volume, 5u);
  EXPECT_EQ(table.entries.at({0, x}).support, 4u);
  EXPECT_EQ(lookup(table, 0, y), nullptr);
  ASSERT_NE(lookup(table, kOutlier, x), nullptr);
  EXPECT_EQ(*lookup(table, kOutlier, x), (Distribution{{1, 1.0}}));
}

TEST(Navigation, MatchesTripleEnumeration) {
  auto f = nav_fixture();
  auto table = build_table(f.run, f.sitemap);
  auto graph = build_adjacency(table, f.sitemap);
  auto want = oracle::navigation(f.run, f.labels, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(graph(i, j), want.adjacency[i][j]);
  }
  EXPECT_DOUBLE_EQ(graph(0, 1), 3.75);
}

TEST(Navigation, AdjacencyHandExpansion) {
  Sitemap sitemap;
  sitemap.clusters.resize(3);
  NavigationTable table;
  table.entries[{0, ApathKey{XpathKey{"/a"}, {}}}] = {{{1, 1.0}}, 10, 10};
  table.entries[{0, ApathKey{XpathKey{"/b"}, {}}}] = {{{1, 0.5}, {2, 0.5}}, 6, 6};
  auto graph = build_adjacency(table, sitemap);
  EXPECT_EQ(graph(0, 1), 13.0);
  EXPECT_EQ(graph(0, 2), 3.0);
  EXPECT_EQ(graph(1, 0), 0.0);
  EXPECT_TRUE(build_adjacency(NavigationTable{}, sitemap).all_zero());
}

TEST(Navigation, LabeledOnlyVolume) {
  auto f = nav_fixture();
  auto table = build_table(f.run, f.sitemap);
  auto graph = build_adjacency(table, f.sitemap, VolumeMode::LabeledOnly);
  EXPECT_DOUBLE_EQ(graph(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(graph(0, 2), 1.0);
}

TEST(Navigation, InvariantToPageOrderWithinCluster) {
  auto f = nav_fixture();
  auto table = build_table(f.run, f.sitemap);
  std::swap(f.run.pages[0], f.run.pages[1]);
  EXPECT_EQ(build_table(f.run, f.sitemap).to_json(), table.to_json());
}

TEST(Navigation, UnknownSourcePageThrows) {
  auto f = nav_fixture();
  f.run.pages.push_back({"stranger", {}, {}});
  EXPECT_THROW(build_table(f.run, f.sitemap), Error);
}

TEST(Navigation, JsonRoundTrip) {
  auto f = nav_fixture();
  auto table = build_table(f.run, f.sitemap);
  EXPECT_EQ(NavigationTable::from_json(table.to_json()).to_json(), table.to_json());
}

TEST(Hits, SymmetricPair) {
  ClusterGraph g(2);
  g(0, 1) = g(1, 0) = 1.0;
  auto r = run_hits(g, PolicyMode::Ucc);
  EXPECT_NEAR(r.hub[0], 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.authority[1], 1 / std::sqrt(2.0), 1e-12);
}

TEST(Hits, AgreesWithPowerIterationOracle) {
  std::mt19937_64 rng(3);
  for (int m = 0; m < 10; ++m) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    ClusterGraph g(n);
    std::vector<std::vector<double>> dense(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) g(i, j) = dense[i][j] = std::uniform_real_distribution<double>(0.1, 1)(rng);
    }
    auto r = run_hits(g, PolicyMode::Ucc);
    auto [hub, auth] = oracle::hits(dense);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(r.hub[i], hub[i], 1e-6);
      EXPECT_NEAR(r.authority[i], auth[i], 1e-6);
    }
  }
}

TEST(Hits, UnitNormAndScaleInvariance) {
  std::mt19937_64 rng(6);
  ClusterGraph g(6), scaled(6);
  for (std::size_t i = 0; i < 36; ++i) {
    g.weights[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    scaled.weights[i] = 7.5 * g.weights[i];
  }
  auto a = run_hits(g, PolicyMode::Ucc), b = run_hits(scaled, PolicyMode::Ucc);
  auto norm = [](const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); };
  EXPECT_NEAR(norm(a.hub), 1.0, 1e-12);
  EXPECT_NEAR(norm(a.authority), 1.0, 1e-12);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a.authority[i], b.authority[i], 1e-9);
}

TEST(Hits, TargetClampFixture) {
  ClusterGraph g(2);
  g(0, 1) = 5.0;
  auto r = run_hits(g, PolicyMode::Target, 1);
  EXPECT_EQ(r.authority, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(r.hub, (std::vector<double>{1.0, 0.0}));
  EXPECT_THROW(run_hits(g, PolicyMode::Target, 2), Error);
}

TEST(Hits, ZeroGraphIsDegenerateUniform) {
  auto r = run_hits(ClusterGraph(4), PolicyMode::Ucc);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.hub, std::vector<double>(4, 0.5));
}

namespace {

PolicyState state_with(std::vector<double> hub, std::vector<double> auth, std::vector<double> dsim) {
  PolicyState s;
  s.hub = std::move(hub);
  s.authority = std::move(auth);
  s.dsim = std::move(dsim);
  for (std::size_t i = 0; i < s.hub.size(); ++i) s.info.push_back(s.alpha * s.authority[i] + (1 - s.alpha) * s.hub[i]);
  s.crawled_counts.assign(s.hub.size(), 0);
  return s;
}

}  // namespace

TEST(Scores, HandArithmetic) {
  auto s = state_with({0.2, 0.5}, {0.6, 0.5}, {0.1, 0.2});
  s.record_crawl(0);
  s.record_crawl(1);
  auto scores = cluster_scores(s);
  EXPECT_NEAR(scores[0], 0.02, 1e-15);
  s.record_crawl(kOutlier);
  EXPECT_EQ(s.total_crawled, 2u);
}

TEST(Scores, NothingCrawledMeansFullBalance) {
  auto s = state_with({0.2, 0.5}, {0.6, 0.5}, {0.1, 0.2});
  EXPECT_EQ(balance(s, 0), 1.0);
  EXPECT_EQ(balance(s, 1), 1.0);
}

TEST(Scores, BalanceFallsAsClusterDominates) {
  auto s = state_with({0.5, 0.5}, {0.5, 0.5}, {1, 1});
  s.crawled_counts = {1, 9};
  s.total_crawled = 10;
  double before = balance(s, 0);
  s.crawled_counts = {2, 8};
  EXPECT_LT(balance(s, 0), before);
}

TEST(Scores, AblationReplacesFactorsWithOne) {
  auto s = state_with({0.2}, {0.6}, {0.1});
  s.ablation.use_dsim = false;
  EXPECT_NEAR(cluster_scores(s)[0], 0.4, 1e-15);
  s.mode = PolicyMode::Target;
  s.ablation = {};
  EXPECT_NEAR(cluster_scores(s)[0], 0.4, 1e-15);
}

TEST(Scores, UrlExpectation) {
  NavigationTable table;
  ApathKey x{XpathKey{"/a"}, {}}, y{XpathKey{"/b"}, {}};
  table.entries[{0, x}] = {{{1, 0.75}, {2, 0.25}}, 4, 4};
  table.entries[{0, y}] = {{{2, 1.0}}, 1, 1};
  table.entries[{kOutlier, y}] = {{{kOutlier, 1.0}}, 1, 1};
  std::vector<double> scores{0.0, 0.4, 0.0};
  PolicyConfig config;
  EXPECT_NEAR(score_url(0, x, table, scores, config), 0.3, 1e-15);
  scores[2] = 0.3;
  EXPECT_NEAR(score_url(0, y, table, scores, config), 0.3, 1e-15);
  EXPECT_NEAR(score_url(1, x, table, scores, config), (0.4 + 0.3) / 3 * 0.5, 1e-15);
  EXPECT_EQ(score_url(kOutlier, y, table, scores, config), 0.0);
}

TEST(Scores, InfoOnlyOrderingFollowsHitsMix) {
  auto s = state_with({0.1, 0.7, 0.4}, {0.9, 0.1, 0.4}, {0.3, 0.2, 0.1});
  s.ablation = {true, false, false};
  auto scores = cluster_scores(s);
  std::vector<std::size_t> by_score{0, 1, 2}, by_info{0, 1, 2};
  std::sort(by_score.begin(), by_score.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::sort(by_info.begin(), by_info.end(), [&](auto a, auto b) {
    return 0.5 * s.authority[a] + 0.5 * s.hub[a] > 0.5 * s.authority[b] + 0.5 * s.hub[b];
  });
  EXPECT_EQ(by_score, by_info);
}

namespace {

GroundTruth truth_of(const std::vector<std::pair<std::string, std::string>>& rows) {
  GroundTruth t;
  for (const auto& [url, type] : rows) {
    t.labels[url] = type;
    t.ucc[type] = type != "junk";
  }
  return t;
}

}  // namespace

TEST(Metrics, PerfectAndConfusedPartitions) {
  auto truth = truth_of({{"a1", "a"}, {"a2", "a"}, {"a3", "a"}, {"a4", "a"}, {"b1", "b"}, {"b2", "b"}, {"b3", "b"}, {"b4", "b"}});
  std::map<std::string, ClusterId> perfect{{"a1", 0}, {"a2", 0}, {"a3", 0}, {"a4", 0},
                                           {"b1", 1}, {"b2", 1}, {"b3", 1}, {"b4", 1}};
  auto q = clustering_quality(perfect, truth);
  EXPECT_EQ(*q.purity, 1.0);
  EXPECT_EQ(*q.macro_f, 1.0);
  EXPECT_EQ(*q.micro_f, 1.0);
  std::map<std::string, ClusterId> one;
  for (const auto& [u, c] : perfect) one[u] = 0;
  EXPECT_EQ(*clustering_quality(one, truth).purity, 0.5);
}

TEST(Metrics, OutliersAreSingletonsAndSmallTypesDropped) {
  auto truth = truth_of({{"a1", "a"}, {"a2", "a"}, {"a3", "a"}, {"a4", "a"}, {"x", "tiny"}});
  std::map<std::string, ClusterId> p{{"a1", 0}, {"a2", 0}, {"a3", 0}, {"a4", kOutlier}, {"x", 0}};
  auto q = clustering_quality(p, truth);
  EXPECT_EQ(*q.pages, 4u);
  // Cluster {a1,a2,a3}: F = 2*1*0.75/1.75; singleton {a4}: F = 2*1*0.25/1.25.
  double f0 = 1.5 / 1.75, f1v = 0.5 / 1.25;
  EXPECT_NEAR(*q.macro_f, (f0 + f1v) / 2, 1e-15);
  EXPECT_NEAR(*q.micro_f, (3 * f0 + f1v) / 4, 1e-15);
  EXPECT_THROW(clustering_quality({{"nobody", 0}}, truth), Error);
}

TEST(Metrics, MatchesContingencyOracle) {
  std::mt19937_64 rng(12);
  for (int f = 0; f < 20; ++f) {
    GroundTruth truth;
    truth.annotation_outlier_min = 0;
    std::vector<int> cl, ty;
    std::map<std::string, ClusterId> part;
    for (int i = 0; i < 50; ++i) {
      std::string url = "u" + std::to_string(100 + i);
      int t = std::uniform_int_distribution<int>(0, 3)(rng);
      int c = std::uniform_int_distribution<int>(-1, 4)(rng);
      truth.labels[url] = "t" + std::to_string(t);
      truth.ucc["t" + std::to_string(t)] = true;
      part[url] = c;
      cl.push_back(c);
      ty.push_back(t);
    }
    std::vector<int> dense;
    std::set<int> present(ty.begin(), ty.end());
    for (int t : ty) dense.push_back(static_cast<int>(std::distance(present.begin(), present.find(t))));
    auto q = clustering_quality(part, truth);
    auto o = oracle::cluster_scores(cl, dense);
    EXPECT_NEAR(*q.purity, o.purity, 1e-12);
    EXPECT_NEAR(*q.micro_f, o.micro_f, 1e-12);
    EXPECT_NEAR(*q.macro_f, o.macro_f, 1e-12);
  }
}

TEST(Metrics, RelabelingInvariance) {
  auto truth = truth_of({{"a1", "a"}, {"a2", "a"}, {"a3", "a"}, {"a4", "a"}, {"b1", "b"}, {"b2", "b"}, {"b3", "b"}, {"b4", "b"}});
  std::map<std::string, ClusterId> p{{"a1", 0}, {"a2", 0}, {"a3", 1}, {"a4", 0}, {"b1", 1}, {"b2", 1}, {"b3", 2}, {"b4", 1}};
  auto q = clustering_quality(p, truth);
  for (auto& [u, c] : p) c = 2 - c;
  auto r = clustering_quality(p, truth);
  EXPECT_EQ(*q.purity, *r.purity);
  EXPECT_EQ(*q.micro_f, *r.micro_f);
}

TEST(Metrics, PrecisionMicroAndMacro) {
  // Clusters of 90 and 10 test pages; the first fully right, the second wrong.
  GroundTruth truth;
  std::map<std::string, ClusterId> train, test;
  for (int i = 0; i < 100; ++i) {
    std::string type = i < 90 ? "a" : "b";
    truth.labels["tr" + std::to_string(i)] = type;
    truth.labels["te" + std::to_string(i)] = type;
    truth.ucc[type] = true;
    train["tr" + std::to_string(i)] = i < 90 ? 0 : 1;
    test["te" + std::to_string(i)] = i < 90 ? 0 : 1;
  }
  // Training maps cluster 0 to type a (86 a, 10 b) and cluster 1 to type a
  // (4 a), so every type-b test page in cluster 1 is wrong.
  for (int i = 90; i < 100; ++i) train["tr" + std::to_string(i)] = 0;
  for (int i = 0; i < 4; ++i) train["tr" + std::to_string(i)] = 1;
  auto p = classification_precision(train, test, truth);
  EXPECT_NEAR(*p.micro_prec, 0.9, 1e-15);
  EXPECT_NEAR(*p.macro_prec, 0.5, 1e-15);
}

TEST(Metrics, MappingTieGoesToLargerType) {
  auto truth = truth_of({{"a1", "a"}, {"a2", "a"}, {"a3", "a"}, {"a4", "a"}, {"a5", "a"},
                         {"b1", "b"}, {"b2", "b"}, {"b3", "b"}, {"b4", "b"}});
  std::map<std::string, ClusterId> train{{"a1", 0}, {"b1", 0}}, test{{"a2", 0}, {"b2", 0}};
  EXPECT_EQ(*classification_precision(train, test, truth).micro_prec, 0.5);
  std::map<std::string, ClusterId> test_a{{"a2", 0}};
  EXPECT_EQ(*classification_precision(train, test_a, truth).micro_prec, 1.0);
}

TEST(Metrics, CrawlQuality) {
  auto truth = truth_of({{"a", "post"}, {"b", "post"}, {"c", "user"}, {"d", "junk"}});
  auto q = crawl_quality(std::vector<std::string>{"a", "b", "c"}, truth, CrawlTask::Ucc);
  EXPECT_EQ(*q.valid_ratio, 1.0);
  EXPECT_EQ(*q.recall, 1.0);
  EXPECT_EQ(*q.f_measure, 1.0);
  auto half = crawl_quality(std::vector<std::string>{"a", "d"}, truth, CrawlTask::Ucc);
  EXPECT_EQ(*half.entropy, 1.0);
  EXPECT_EQ(*half.valid_ratio * 2, 1.0);
  truth.target_type = "post";
  auto t = crawl_quality(std::vector<std::string>{"a", "c"}, truth, CrawlTask::Target);
  EXPECT_EQ(*t.harvest_rate, 0.5);
  EXPECT_EQ(*t.recall, 0.5);
  EXPECT_EQ(*crawl_quality(std::vector<std::string>{"a", "b"}, truth, CrawlTask::Ucc).entropy, 0.0);
}

TEST(Metrics, EntropyPeaksAtUniform) {
  EXPECT_NEAR(type_entropy({"a", "b", "c", "d"}), 2.0, 1e-15);
  EXPECT_LT(type_entropy({"a", "a", "c", "d"}), 2.0);
  EXPECT_EQ(type_entropy({"a", "a"}), 0.0);
}

TEST(Metrics, StratifiedFoldsBalanceTypes) {
  GroundTruth truth;
  std::vector<std::string> urls;
  for (int i = 0; i < 40; ++i) {
    urls.push_back("u" + std::to_string(i));
    truth.labels[urls.back()] = i < 30 ? "big" : "small";
  }
  auto folds = stratified_folds(urls, truth, 4, 1);
  std::map<std::pair<std::string, std::size_t>, int> per;
  for (std::size_t i = 0; i < urls.size(); ++i) ++per[{truth.labels[urls[i]], folds[i]}];
  for (std::size_t f = 0; f < 4; ++f) {
    EXPECT_GE((per[{"big", f}]), 7);
    EXPECT_LE((per[{"big", f}]), 8);
    EXPECT_GE((per[{"small", f}]), 2);
    EXPECT_LE((per[{"small", f}]), 3);
  }
  EXPECT_EQ(folds, stratified_folds(urls, truth, 4, 1));
}

TEST(Metrics, LabelsFileParsing) {
  std::istringstream in("http://x/1\tpost\t1\nhttp://x/2\tlogin\t0\n");
  auto truth = GroundTruth::read_labels(in);
  EXPECT_TRUE(truth.is_ucc("http://x/1"));
  EXPECT_FALSE(truth.is_ucc("http://x/2"));
  std::istringstream bad("http://x/1\tpost\n");
  EXPECT_THROW(GroundTruth::read_labels(bad), Error);
  std::istringstream clash("a\tpost\t1\nb\tpost\t0\n");
  EXPECT_THROW(GroundTruth::read_labels(clash), Error);
}
