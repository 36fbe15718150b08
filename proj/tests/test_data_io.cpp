#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "smoothsense/data_io.hpp"

using namespace smoothsense;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("smoothsense_io_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string file(const std::string& name, const std::string& text) const {
    const auto p = (path_ / name).string();
    std::ofstream(p) << text;
    return p;
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string load_error(const std::string& content, const std::string& cites) {
  try {
    load_citation_dataset(content, cites);
  } catch (const invalid_input& e) {
    return e.what();
  }
  return "";
}

const char* kContent =
    "p7\t1\t0\t0\tzeta\n"
    "p3\t0\t2\t0\talpha\n"
    "p9\t0\t0\t3\tzeta\n";

}  // namespace

TEST(LoadCitation, IndexesLabelsAndDanglingCitation) {
  TempDir dir;
  const auto content = dir.file("t.content", kContent);
  const auto cites = dir.file("t.cites", "p3\tp7\np9\tp3\np9\tghost\n");
  LoadStats stats;
  const auto g = load_citation_dataset(content, cites, {}, &stats);
  EXPECT_EQ(g.n, 3);
  EXPECT_EQ(g.m, 3);
  EXPECT_EQ(g.node_names, (std::vector<std::string>{"p7", "p3", "p9"}));
  EXPECT_EQ(g.class_names, (std::vector<std::string>{"alpha", "zeta"}));
  EXPECT_EQ(*g.labels, (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(g.expected_clusters(), 2);
  EXPECT_EQ(stats.citation_lines, 3u);
  EXPECT_EQ(stats.dangling_citations, 1u);
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0].u, 0);
  EXPECT_EQ(g.edges[0].v, 1);
  EXPECT_EQ(g.edges[1].u, 1);
  EXPECT_EQ(g.edges[1].v, 2);
  EXPECT_EQ(g.features(2, 2), 3.0);
}

TEST(LoadCitation, DirectionAndDuplicatesCollapse) {
  TempDir dir;
  const auto content = dir.file("t.content", kContent);
  const auto cites = dir.file("t.cites", "p3\tp7\np7\tp3\np3\tp7\np9\tp9\n");
  LoadStats stats;
  const auto g = load_citation_dataset(content, cites, {}, &stats);
  EXPECT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(stats.duplicate_citations, 2u);
  EXPECT_EQ(stats.self_citations, 1u);
}

TEST(LoadCitation, MalformedLinesNameTheLine) {
  TempDir dir;
  const auto cites = dir.file("t.cites", "");
  const auto arity = dir.file("a.content", "a\t1\t2\tx\nb\t1\ty\n");
  EXPECT_NE(load_error(arity, cites).find("a.content:2"), std::string::npos) << load_error(arity, cites);
  const auto bad = dir.file("b.content", "a\t1\tx\nb\t1\ty\nc\tnope\tz\n");
  EXPECT_NE(load_error(bad, cites).find("b.content:3"), std::string::npos) << load_error(bad, cites);
  const auto short_line = dir.file("c.content", "a\tx\n");
  EXPECT_NE(load_error(short_line, cites).find("c.content:1"), std::string::npos);
  const auto dup = dir.file("d.content", "a\t1\tx\na\t2\ty\n");
  EXPECT_NE(load_error(dup, cites).find("duplicate"), std::string::npos);
  const auto content = dir.file("t.content", kContent);
  const auto triple = dir.file("e.cites", "p3\tp7\np3\tp7\tp9\n");
  EXPECT_NE(load_error(content, triple).find("e.cites:2"), std::string::npos);
  EXPECT_THROW(load_citation_dataset(dir.path("missing"), cites), invalid_input);
}

TEST(LoadCitation, Deterministic) {
  TempDir dir;
  const auto content = dir.file("t.content", kContent);
  const auto cites = dir.file("t.cites", "p3\tp7\r\np9\tp3\r\n");
  const auto a = load_citation_dataset(content, cites);
  const auto b = load_citation_dataset(content, cites);
  EXPECT_EQ(a.node_names, b.node_names);
  EXPECT_EQ(*a.labels, *b.labels);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(fingerprint(a, "t").hash, fingerprint(b, "t").hash);
  EXPECT_EQ(a.edges.size(), 2u);
}

TEST(LoadCitation, RowL1Normalization) {
  TempDir dir;
  const auto content = dir.file("t.content", "a\t1\t3\tx\nb\t0\t0\ty\nc\t-2\t2\tx\n");
  const auto cites = dir.file("t.cites", "a\tb\n");
  LoadOptions o;
  o.row_l1_normalize = true;
  const auto g = load_citation_dataset(content, cites, o);
  EXPECT_DOUBLE_EQ(g.features(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(g.features(0, 1), 0.75);
  EXPECT_EQ(g.features(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.features(2, 0), -0.5);
}

TEST(LoadCitation, WriterRoundTrip) {
  TempDir dir;
  SbmSpec s;
  s.block_sizes = {4, 5};
  s.feature_dim = 3;
  s.seed = 7;
  const auto g = generate_sbm(s);
  write_citation_dataset(g, dir.path("g.content"), dir.path("g.cites"));
  const auto back = load_citation_dataset(dir.path("g.content"), dir.path("g.cites"));
  EXPECT_EQ(back.n, g.n);
  EXPECT_EQ(back.features, g.features);
  EXPECT_EQ(*back.labels, *g.labels);
  ASSERT_EQ(back.edges.size(), g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    EXPECT_EQ(back.edges[i].u, g.edges[i].u);
    EXPECT_EQ(back.edges[i].v, g.edges[i].v);
  }
  EXPECT_EQ(fingerprint(back, "g").hash, fingerprint(g, "g").hash);
}

TEST(LoadCitation, CoraShapeWhenAvailable) {
  const char* dir = std::getenv("SMOOTHSENSE_CORA_DIR");
  if (!dir) GTEST_SKIP() << "SMOOTHSENSE_CORA_DIR not set";
  LoadStats stats;
  const std::string base = std::string(dir) + "/cora";
  const auto g = load_citation_dataset(base + ".content", base + ".cites", {}, &stats);
  EXPECT_EQ(g.n, 2708);
  EXPECT_EQ(g.m, 1433);
  EXPECT_EQ(g.class_names.size(), 7u);
  EXPECT_EQ(stats.citation_lines, 5429u);
}

TEST(LoadCitation, CiteseerShapeWhenAvailable) {
  const char* dir = std::getenv("SMOOTHSENSE_CITESEER_DIR");
  if (!dir) GTEST_SKIP() << "SMOOTHSENSE_CITESEER_DIR not set";
  const std::string base = std::string(dir) + "/citeseer";
  const auto g = load_citation_dataset(base + ".content", base + ".cites");
  EXPECT_EQ(g.n, 3327);
  EXPECT_EQ(g.m, 3703);
  EXPECT_EQ(g.class_names.size(), 6u);
}

TEST(GenerateSbm, TwoDisjointCliques) {
  SbmSpec s;
  s.block_sizes = {6, 4};
  s.p_in = 1.0;
  s.p_out = 0.0;
  const auto g = generate_sbm(s);
  EXPECT_EQ(g.edges.size(), 15u + 6u);
  for (const auto& e : g.edges) EXPECT_EQ((*g.labels)[e.u], (*g.labels)[e.v]);
  EXPECT_EQ(g.expected_clusters(), 2);
}

TEST(GenerateSbm, ZeroSignalIsPureNoise) {
  SbmSpec s;
  s.block_sizes = {200, 200};
  s.feature_signal = 0.0;
  s.feature_noise = 1.0;
  s.feature_dim = 4;
  s.seed = 3;
  const auto g = generate_sbm(s);
  for (Index j = 0; j < 4; ++j) {
    const double top = g.features.topRows(200).col(j).mean();
    const double bottom = g.features.bottomRows(200).col(j).mean();
    EXPECT_LT(std::abs(top - bottom), 0.35);
  }
  s.feature_noise = 0.0;
  EXPECT_EQ(generate_sbm(s).features.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GenerateSbm, FrozenFixture) {
  SbmSpec s;
  s.block_sizes = {10, 10};
  s.p_in = 0.9;
  s.p_out = 0.05;
  s.seed = 20240101;
  const auto g = generate_sbm(s);
  EXPECT_EQ(g.edges.size(), 86u);
  EXPECT_EQ(fingerprint(g, "fixture").hash, "54ae8e6e0a44ce82");
}

TEST(GenerateSbm, DeterministicAndValidated) {
  SbmSpec s;
  s.block_sizes = {5, 7, 3};
  s.seed = 11;
  EXPECT_EQ(fingerprint(generate_sbm(s), "").hash, fingerprint(generate_sbm(s), "").hash);
  s.seed = 12;
  SbmSpec t = s;
  t.seed = 11;
  EXPECT_NE(fingerprint(generate_sbm(s), "").hash, fingerprint(generate_sbm(t), "").hash);
  s.p_out = 0.95;
  EXPECT_THROW(generate_sbm(s), invalid_input);
  s.p_out = 0.0;
  s.block_sizes = {};
  EXPECT_THROW(generate_sbm(s), invalid_input);
}

TEST(Fingerprint, SensitiveToEveryPart) {
  SbmSpec s;
  s.block_sizes = {4, 4};
  s.seed = 5;
  const auto g = generate_sbm(s);
  const auto base = fingerprint(g, "x");
  EXPECT_EQ(base.nodes, 8);
  EXPECT_EQ(base.features, 16);
  EXPECT_EQ(base.clusters, 2);
  EXPECT_EQ(base.hash.size(), 16u);
  auto f = g;
  f.features(3, 2) += 1e-12;
  EXPECT_NE(fingerprint(f, "x").hash, base.hash);
  auto l = g;
  (*l.labels)[0] = 1;
  EXPECT_NE(fingerprint(l, "x").hash, base.hash);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a("", 0), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a", 1), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar", 6), 0x85944171f73967e8ULL);
}
