#ifndef SMOOTHSENSE_DATA_IO_HPP
#define SMOOTHSENSE_DATA_IO_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "smoothsense/errors.hpp"
#include "smoothsense/graph.hpp"
#include "smoothsense/report.hpp"

namespace smoothsense {

/// Counters from a citation-format load.
struct LoadStats {
  std::size_t citation_lines = 0;
  std::size_t dangling_citations = 0;  // an endpoint missing from the content file
  std::size_t self_citations = 0;
  std::size_t duplicate_citations = 0;  // repeated or reversed pairs
};

struct LoadOptions {
  /// Scale each feature row to unit L1 norm (rows of zeros are left alone).
  bool row_l1_normalize = false;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  const std::size_t len = line.size();
  while (start <= len) {
    // Tabs separate fields; runs of spaces are tolerated for hand-written files.
    while (start < len && line[start] == ' ') ++start;
    std::size_t end = start;
    while (end < len && line[end] != '\t' && line[end] != ' ') ++end;
    if (end > start) out.emplace_back(line.substr(start, end - start));
    if (end >= len) break;
    start = end + 1;
  }
  return out;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

/// Reads `id<TAB>f_1 .. f_m<TAB>label` rows and `cited<TAB>citing` rows.
///
/// Node ids are indexed in order of first appearance in the content file.
/// Citation direction is discarded; citations naming unknown ids are dropped
/// and counted. Labels are numbered in sorted order of their strings.
inline AttributedGraph load_citation_dataset(const std::string& content_path,
                                             const std::string& cites_path,
                                             const LoadOptions& options = {},
                                             LoadStats* stats_out = nullptr) {
  std::ifstream content(content_path);
  if (!content) throw invalid_input("cannot open content file '" + content_path + "'");

  std::unordered_map<std::string, Index> index;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> label_text;
  std::string line;
  std::size_t line_no = 0;
  std::size_t arity = 0;
  while (std::getline(content, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() < 3) {
      throw invalid_input(content_path + ":" + std::to_string(line_no) +
                          ": expected id, at least one feature, and a label");
    }
    const std::size_t m = fields.size() - 2;
    if (arity == 0) arity = m;
    if (m != arity) {
      throw invalid_input(content_path + ":" + std::to_string(line_no) + ": " +
                          std::to_string(m) + " features, previous rows had " +
                          std::to_string(arity));
    }
    if (index.count(fields.front())) {
      throw invalid_input(content_path + ":" + std::to_string(line_no) + ": duplicate node id '" +
                          fields.front() + "'");
    }
    std::vector<double> row(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::string& f = fields[j + 1];
      char* end = nullptr;
      row[j] = std::strtod(f.c_str(), &end);
      if (end != f.c_str() + f.size() || !std::isfinite(row[j])) {
        throw invalid_input(content_path + ":" + std::to_string(line_no) + ": feature " +
                            std::to_string(j + 1) + " is not a finite number ('" + f + "')");
      }
    }
    index.emplace(fields.front(), static_cast<Index>(names.size()));
    names.push_back(fields.front());
    rows.push_back(std::move(row));
    label_text.push_back(fields.back());
  }
  if (names.empty()) throw invalid_input("content file '" + content_path + "' has no rows");

  std::vector<std::string> classes = label_text;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<int> labels(label_text.size());
  for (std::size_t i = 0; i < label_text.size(); ++i) {
    labels[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), label_text[i]) -
                                 classes.begin());
  }

  const Index n = static_cast<Index>(names.size());
  Matrix features(n, static_cast<Index>(arity));
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < arity; ++j) features(i, static_cast<Index>(j)) = row[j];
    if (options.row_l1_normalize) {
      const double l1 = features.row(i).cwiseAbs().sum();
      if (l1 > 0.0) features.row(i) /= l1;
    }
  }

  std::ifstream cites(cites_path);
  if (!cites) throw invalid_input("cannot open cites file '" + cites_path + "'");
  LoadStats stats;
  std::vector<std::pair<Index, Index>> edges;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2) {
      throw invalid_input(cites_path + ":" + std::to_string(line_no) +
                          ": expected two node ids, got " + std::to_string(fields.size()) +
                          " fields");
    }
    ++stats.citation_lines;
    const auto a = index.find(fields[0]);
    const auto b = index.find(fields[1]);
    if (a == index.end() || b == index.end()) {
      ++stats.dangling_citations;
      continue;
    }
    edges.emplace_back(a->second, b->second);
  }

  AttributedGraph g = build_graph(edges, std::move(features), std::move(labels));
  stats.self_citations = g.dropped_self_loops;
  stats.duplicate_citations = g.duplicate_edges;
  g.node_names = std::move(names);
  g.class_names = std::move(classes);
  g.cluster_count = static_cast<int>(g.class_names.size());
  if (stats_out) *stats_out = stats;
  return g;
}

struct SbmSpec {
  std::vector<Index> block_sizes;
  double p_in = 0.9;
  double p_out = 0.05;
  Index feature_dim = 16;
  /// Magnitude of the block-indicator signal; 0 gives pure-noise features.
  double feature_signal = 1.0;
  /// Standard deviation of the additive Gaussian feature noise.
  double feature_noise = 0.1;
  std::uint64_t seed = 0;
};

/// Stochastic block model with block-indicator features.
///
/// Block b lights up feature columns {j : j mod B == b} (B = number of
/// blocks) with `feature_signal`; Gaussian noise is added on top.
inline AttributedGraph generate_sbm(const SbmSpec& spec) {
  if (spec.block_sizes.empty()) throw invalid_input("SBM needs at least one block");
  if (!(0.0 <= spec.p_out && spec.p_out <= spec.p_in && spec.p_in <= 1.0)) {
    throw invalid_input("SBM probabilities must satisfy 0 <= p_out <= p_in <= 1");
  }
  if (spec.feature_dim < 1) throw invalid_input("SBM feature dimension must be positive");
  const Index blocks = static_cast<Index>(spec.block_sizes.size());
  std::vector<int> labels;
  for (Index b = 0; b < blocks; ++b) {
    if (spec.block_sizes[static_cast<std::size_t>(b)] < 1) {
      throw invalid_input("SBM block sizes must be positive");
    }
    labels.insert(labels.end(), static_cast<std::size_t>(spec.block_sizes[static_cast<std::size_t>(b)]),
                  static_cast<int>(b));
  }
  const Index n = static_cast<Index>(labels.size());
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                           ? spec.p_in
                           : spec.p_out;
      if (coin(rng) < p) edges.emplace_back(i, j);
    }
  }
  Matrix features(n, spec.feature_dim);
  for (Index i = 0; i < n; ++i) {
    const int b = labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < spec.feature_dim; ++j) {
      const double signal = (j % blocks == b) ? spec.feature_signal : 0.0;
      features(i, j) = signal + spec.feature_noise * noise(rng);
    }
  }
  AttributedGraph g = build_graph(edges, std::move(features), std::move(labels));
  g.cluster_count = static_cast<int>(blocks);
  return g;
}

/// Writes a graph in the citation format.
inline void write_citation_dataset(const AttributedGraph& g, const std::string& content_path,
                                   const std::string& cites_path) {
  std::ostringstream content;
  content.precision(17);
  for (Index i = 0; i < g.n; ++i) {
    content << (g.node_names.empty() ? "n" + std::to_string(i)
                                     : g.node_names[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < g.m; ++j) content << '\t' << g.features(i, j);
    const int label = g.labels ? (*g.labels)[static_cast<std::size_t>(i)] : 0;
    content << '\t'
            << (g.class_names.empty() ? "class" + std::to_string(label)
                                      : g.class_names[static_cast<std::size_t>(label)])
            << '\n';
  }
  std::ostringstream cites;
  auto name = [&g](Index i) {
    return g.node_names.empty() ? "n" + std::to_string(i) : g.node_names[static_cast<std::size_t>(i)];
  };
  for (const auto& e : g.edges) cites << name(e.u) << '\t' << name(e.v) << '\n';
  detail::write_atomically(content_path, content.str());
  detail::write_atomically(cites_path, cites.str());
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t hash = 0xcbf29ce484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Provenance hash over a canonical byte stream: counts, sorted edges,
/// features row-major as IEEE doubles, labels.
inline DatasetFingerprint fingerprint(const AttributedGraph& g, std::string name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const auto& value) { h = fnv1a(&value, sizeof value, h); };
  mix(static_cast<std::int64_t>(g.n));
  mix(static_cast<std::int64_t>(g.m));
  mix(static_cast<std::int64_t>(g.edges.size()));
  for (const auto& e : g.edges) {
    mix(static_cast<std::int64_t>(e.u));
    mix(static_cast<std::int64_t>(e.v));
  }
  for (Index i = 0; i < g.n; ++i) {
    for (Index j = 0; j < g.m; ++j) mix(g.features(i, j));
  }
  if (g.labels) {
    for (int c : *g.labels) mix(static_cast<std::int32_t>(c));
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  DatasetFingerprint fp;
  fp.name = std::move(name);
  fp.nodes = g.n;
  fp.edges = static_cast<std::int64_t>(g.edges.size());
  fp.features = g.m;
  fp.clusters = g.expected_clusters().value_or(0);
  fp.hash = hex;
  return fp;
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_DATA_IO_HPP
