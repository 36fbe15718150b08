// Command line front end: cluster, train, eval, sweep, inspect, convolve, generate.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "smoothsense/smoothsense.hpp"

namespace fs = std::filesystem;
using namespace smoothsense;

namespace {

/// Files written by the current command; removed if the command fails.
class OutputGuard {
 public:
  void track(const std::string& path) { paths_.push_back(path); }
  void commit() { paths_.clear(); }
  ~OutputGuard() {
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
      fs::remove(p + ".timings.json", ec);
      fs::remove(p + ".partial", ec);
    }
  }

 private:
  std::vector<std::string> paths_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct DatasetArgs {
  std::string prefix;
  std::string content;
  std::string cites;
  int clusters = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--dataset", prefix, "Path prefix; reads <prefix>.content and <prefix>.cites");
    cmd->add_option("--content", content, "Content file (id, features, label)");
    cmd->add_option("--cites", cites, "Citation file (pairs of ids)");
    cmd->add_option("--clusters", clusters, "Number of clusters (default: number of classes)")
        ->check(CLI::PositiveNumber);
  }

  std::string name() const {
    if (!prefix.empty()) return fs::path(prefix).filename().string();
    return fs::path(content).stem().string();
  }

  AttributedGraph load() const {
    std::string c = content, e = cites;
    if (!prefix.empty()) {
      if (c.empty()) c = prefix + ".content";
      if (e.empty()) e = prefix + ".cites";
    }
    if (c.empty() || e.empty()) throw invalid_input("dataset needs --dataset or --content and --cites");
    LoadStats stats;
    AttributedGraph g = load_citation_dataset(c, e, {}, &stats);
    std::cerr << "loaded " << g.n << " nodes, " << g.edges.size() << " edges, " << g.m
              << " features, " << g.class_names.size() << " classes";
    if (stats.dangling_citations) std::cerr << "; dropped " << stats.dangling_citations << " dangling citations";
    if (stats.duplicate_citations) std::cerr << "; merged " << stats.duplicate_citations << " duplicate citations";
    if (stats.self_citations) std::cerr << "; dropped " << stats.self_citations << " self citations";
    std::cerr << "\n";
    if (clusters > 0) g.cluster_count = clusters;
    return g;
  }
};

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", path, "Flat key = value config file");
    cmd->add_option("--set", sets, "Override one config key (key=value), repeatable");
  }

  /// Config file, then named flags, then --set overrides. Every override is recorded.
  TrainConfig build(const std::vector<std::pair<std::string, std::string>>& flags,
                    std::vector<std::pair<std::string, std::string>>& overrides) const {
    TrainConfig c = path.empty() ? TrainConfig{} : read_config(path);
    for (const auto& [k, v] : flags) {
      set_config_value(c, k, v);
      overrides.emplace_back(k, v);
    }
    for (const auto& s : sets) {
      apply_override(c, s);
      const auto eq = s.find('=');
      overrides.emplace_back(detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
    c.validate();
    return c;
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t fallback) {
  if (text.empty()) return {fallback};
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = detail::parse_number<std::uint64_t>("seeds", item.substr(0, dash));
      const auto hi = detail::parse_number<std::uint64_t>("seeds", item.substr(dash + 1));
      if (hi < lo) throw invalid_input("seed range '" + item + "' is decreasing");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(detail::parse_number<std::uint64_t>("seeds", item));
    }
  }
  if (out.empty()) throw invalid_input("seed list is empty");
  return out;
}

EpochCallback progress(std::uint64_t seed) {
  return [seed](const EpochRecord& e) {
    std::cerr << "seed " << seed << " epoch " << e.epoch << " loss " << e.loss << " mean order "
              << e.mean_order;
    if (e.scores) std::cerr << " acc " << e.scores->accuracy;
    std::cerr << "\n";
  };
}

std::string scores_csv(const std::optional<ClusteringScores>& s) {
  if (!s) return ",,";
  return fmt(s->accuracy) + "," + fmt(s->nmi) + "," + fmt(s->f1);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw invalid_input("cannot create output directory '" + dir + "': " + ec.message());
}

std::vector<int> read_assignments(const std::string& path) {
  if (fs::path(path).extension() == ".json") return read_report(path).assignments;
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open assignment file '" + path + "'");
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    // Accept either one id per line or `node,cluster` rows, with an optional header.
    const auto comma = line.rfind(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      out.push_back(detail::parse_number<int>("assignment", detail::trim(field)));
    } catch (const invalid_input&) {
      if (line_no == 1) continue;
      throw invalid_input(path + ":" + std::to_string(line_no) + ": not a cluster id");
    }
  }
  return out;
}

void write_matrix_csv(const Matrix& m, const std::string& path, const std::string& prefix) {
  std::ostringstream out;
  for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << j;
  out << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
    out << "\n";
  }
  detail::write_atomically(path, out.str());
}

int cmd_cluster(const DatasetArgs& data, const ConfigArgs& cfg,
                const std::vector<std::pair<std::string, std::string>>& flags,
                const std::string& seeds_text, const std::string& out_dir) {
  std::vector<std::pair<std::string, std::string>> overrides;
  TrainConfig config = cfg.build(flags, overrides);
  const AttributedGraph graph = data.load();
  const auto seeds = parse_seeds(seeds_text, config.seed);
  ensure_dir(out_dir);
  OutputGuard guard;
  std::vector<RunReport> reports;
  nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
  for (std::uint64_t seed : seeds) {
    config.seed = seed;
    RunRequest req{data.name(), overrides, progress(seed)};
    RunReport report = run_pipeline(graph, config, req);
    const std::string path = (fs::path(out_dir) / ("seed_" + std::to_string(seed) + ".json")).string();
    guard.track(path);
    write_report(report, path);
    std::cerr << "seed " << seed << " status " << report.status;
    if (report.final_scores) std::cerr << " acc " << report.final_scores->accuracy;
    std::cerr << "\n";
    per_seed.push_back({{"seed", seed}, {"report", fs::path(path).filename().string()},
                        {"status", report.status},
                        {"metrics", detail::scores_json(report.final_scores)}});
    reports.push_back(std::move(report));
  }
  const auto mean = mean_scores(reports);
  nlohmann::ordered_json agg;
  agg["report_version"] = kReportVersion;
  agg["mode"] = to_string(config.mode);
  agg["seeds"] = seeds;
  agg["runs"] = per_seed;
  agg["mean_metrics"] = detail::scores_json(mean);
  const std::string agg_path = (fs::path(out_dir) / "aggregate.json").string();
  guard.track(agg_path);
  detail::write_atomically(agg_path, agg.dump(2) + "\n");
  std::cout << "seeds,acc,nmi,f1\n" << seeds.size() << "," << scores_csv(mean) << "\n";
  guard.commit();
  return 0;
}

int cmd_train(const DatasetArgs& data, const ConfigArgs& cfg,
              const std::vector<std::pair<std::string, std::string>>& flags,
              const std::string& out_dir) {
  std::vector<std::pair<std::string, std::string>> overrides;
  const TrainConfig config = cfg.build(flags, overrides);
  if (config.mode == Mode::fixed_k) throw invalid_input("train needs mode as-gc or nas-gc");
  const AttributedGraph raw = data.load();
  const AttributedGraph graph = prepare_graph(raw, config);
  ensure_dir(out_dir);
  OutputGuard guard;
  TrainResult result = train(graph, config, progress(config.seed));
  result.report.config = config_entries(config);
  result.report.overrides = overrides;
  result.report.dataset = fingerprint(raw, data.name());
  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  guard.track(report_path);
  write_report(result.report, report_path);

  nlohmann::ordered_json params;
  params["cell"] = to_string(result.params.cell);
  params["input_dim"] = result.params.input_dim;
  params["hidden_dim"] = result.params.hidden_dim;
  params["lambda_sep"] = result.lambda_sep;
  result.params.for_each_tensor([&](const char* name, const double* values, Index size) {
    params["tensors"][name] = std::vector<double>(values, values + size);
  });
  const std::string params_path = (fs::path(out_dir) / "params.json").string();
  guard.track(params_path);
  detail::write_atomically(params_path, params.dump() + "\n");
  std::cout << "status,epochs,final_loss,acc,nmi,f1\n"
            << result.report.status << "," << result.report.epochs.size() << ","
            << fmt(result.report.final_loss) << "," << scores_csv(result.report.final_scores) << "\n";
  guard.commit();
  return result.report.status == "ok" ? 0 : 1;
}

int cmd_eval(const DatasetArgs& data, const std::string& assignments_path,
             const std::string& normalization) {
  const AttributedGraph graph = data.load();
  if (!graph.labels) throw invalid_input("dataset has no labels");
  const auto pred = read_assignments(assignments_path);
  const auto norm = normalization == "arithmetic" ? NmiNormalization::arithmetic
                                                  : NmiNormalization::geometric;
  const auto s = score_partition(pred, *graph.labels, norm);
  std::cout << "acc,nmi,f1\n" << scores_csv(s) << "\n";
  return 0;
}

int cmd_sweep(const DatasetArgs& data, const ConfigArgs& cfg,
              const std::vector<std::pair<std::string, std::string>>& flags,
              const std::string& out_dir) {
  std::vector<std::pair<std::string, std::string>> overrides;
  const TrainConfig config = cfg.build(flags, overrides);
  if (config.mode == Mode::fixed_k) throw invalid_input("sweep needs mode as-gc or nas-gc");
  const AttributedGraph raw = data.load();
  const AttributedGraph graph = prepare_graph(raw, config);
  ensure_dir(out_dir);
  OutputGuard guard;
  const SweepResult sweep = auto_select_proportion(graph, config, progress(config.seed));
  std::ostringstream csv;
  csv << "proportion,lambda_sep,epoch1_loss,final_loss,normalized_loss,epochs,status,acc,nmi,f1,"
         "selection\n";
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const auto& row = sweep.rows[i];
    std::string sel;
    if (i == sweep.unsupervised_pick) sel = "unsupervised";
    if (sweep.oracle_pick && *sweep.oracle_pick == i) sel += sel.empty() ? "oracle" : "+oracle";
    csv << "1:" << row.proportion << "," << fmt(row.lambda_sep) << "," << fmt(row.epoch1_loss) << ","
        << fmt(row.final_loss) << "," << fmt(row.normalized_loss) << "," << row.epochs << ","
        << row.status << "," << scores_csv(row.scores) << "," << sel << "\n";
    RunReport report = sweep.runs[i].report;
    report.config = config_entries(config);
    report.overrides = overrides;
    report.dataset = fingerprint(raw, data.name());
    const std::string path =
        (fs::path(out_dir) / ("proportion_1_" + std::to_string(static_cast<int>(row.proportion)) + ".json"))
            .string();
    guard.track(path);
    write_report(report, path);
  }
  const std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
  guard.track(csv_path);
  detail::write_atomically(csv_path, csv.str());
  std::cout << csv.str();
  guard.commit();
  return 0;
}

int cmd_inspect(const std::string& report_path, int threshold, const std::string& out_path) {
  const RunReport report = read_report(report_path);
  if (report.selected_orders.empty() || report.order_histogram.empty()) {
    throw invalid_input("report '" + report_path + "' has no selected orders");
  }
  std::ostringstream csv;
  csv << "order,nodes\n";
  for (const auto& [order, count] : report.order_histogram) csv << order << "," << count << "\n";
  const double frac = fraction_at_most(report.order_histogram, threshold);
  if (out_path.empty()) {
    std::cout << csv.str();
    std::cerr << "fraction of nodes with order <= " << threshold << ": " << fmt(frac) << "\n";
  } else {
    OutputGuard guard;
    guard.track(out_path);
    detail::write_atomically(out_path, csv.str());
    std::cout << "threshold,fraction_at_most\n" << threshold << "," << fmt(frac) << "\n";
    guard.commit();
  }
  return 0;
}

int cmd_convolve(const DatasetArgs& data, const ConfigArgs& cfg, int k, const std::string& out_path,
                 const std::string& kernel_path) {
  std::vector<std::pair<std::string, std::string>> overrides;
  const TrainConfig config = cfg.build({}, overrides);
  const AttributedGraph graph = prepare_graph(data.load(), config);
  Matrix y = graph.features;
  if (k > 0) {
    y = FilteredSignalStack(LowPassFilter(graph, stack_options(config).filter), graph.features, k, false)
            .layer_copy(k);
  }
  OutputGuard guard;
  guard.track(out_path);
  write_matrix_csv(y, out_path, "f");
  if (!kernel_path.empty()) {
    guard.track(kernel_path);
    write_matrix_csv(symmetrize(linear_kernel(y)), kernel_path, "n");
  }
  std::cerr << "wrote " << y.rows() << " x " << y.cols() << " filtered features\n";
  guard.commit();
  return 0;
}

int cmd_generate(const std::vector<Index>& sizes, double p_in, double p_out, Index dim, double signal,
                 double noise, std::uint64_t seed, const std::string& prefix) {
  SbmSpec spec;
  spec.block_sizes = sizes;
  spec.p_in = p_in;
  spec.p_out = p_out;
  spec.feature_dim = dim;
  spec.feature_signal = signal;
  spec.feature_noise = noise;
  spec.seed = seed;
  const AttributedGraph g = generate_sbm(spec);
  OutputGuard guard;
  guard.track(prefix + ".content");
  guard.track(prefix + ".cites");
  write_citation_dataset(g, prefix + ".content", prefix + ".cites");
  std::cerr << "generated " << g.n << " nodes, " << g.edges.size() << " edges\n";
  guard.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive smoothness-transition graph convolution for attributed graph clustering"};
  app.require_subcommand(1, 1);

  DatasetArgs data;
  ConfigArgs cfg;
  std::string mode, seeds_text, out_dir = "out", assignments_path, nmi_norm = "geometric";
  std::string report_path, out_file, kernel_path;
  std::optional<int> fixed_k;
  int threshold = 12, conv_k = 1;

  auto* cluster = app.add_subcommand("cluster", "Run a pipeline once per seed and aggregate metrics");
  data.add(cluster);
  cfg.add(cluster);
  cluster->add_option("--mode", mode, "fixed-k, as-gc or nas-gc");
  cluster->add_option("--k", fixed_k, "Filter order for fixed-k")->check(CLI::NonNegativeNumber);
  cluster->add_option("--seeds", seeds_text, "Comma list or ranges, e.g. 0-9");
  cluster->add_option("--out", out_dir, "Output directory");

  auto* trainc = app.add_subcommand("train", "Train the sensor once and write report and parameters");
  data.add(trainc);
  cfg.add(trainc);
  trainc->add_option("--mode", mode, "as-gc or nas-gc");
  trainc->add_option("--out", out_dir, "Output directory");

  auto* eval = app.add_subcommand("eval", "Score stored assignments against dataset labels");
  data.add(eval);
  eval->add_option("--assignments", assignments_path, "Report JSON or one cluster id per line")
      ->required();
  eval->add_option("--nmi", nmi_norm, "geometric or arithmetic")
      ->check(CLI::IsMember({"geometric", "arithmetic"}));

  auto* sweep = app.add_subcommand("sweep", "Train at every tightness:separation proportion");
  data.add(sweep);
  cfg.add(sweep);
  sweep->add_option("--mode", mode, "as-gc or nas-gc");
  sweep->add_option("--out", out_dir, "Output directory");

  auto* inspect = app.add_subcommand("inspect", "Histogram of selected orders from a report");
  inspect->add_option("report", report_path, "Report JSON")->required();
  inspect->add_option("--threshold", threshold, "Order threshold for the reported fraction");
  inspect->add_option("--out", out_file, "CSV path (default: standard output)");

  auto* convolve = app.add_subcommand("convolve", "Export G^k X (and optionally the kernel) as CSV");
  data.add(convolve);
  cfg.add(convolve);
  convolve->add_option("--k", conv_k, "Filter order")->check(CLI::NonNegativeNumber);
  convolve->add_option("--out", out_file, "CSV path")->required();
  convolve->add_option("--kernel", kernel_path, "Also write the symmetrized linear kernel here");

  std::vector<Index> sizes;
  double p_in = 0.9, p_out = 0.05, signal = 1.0, noise = 0.1;
  Index dim = 16;
  std::uint64_t gen_seed = 0;
  std::string gen_prefix;
  auto* generate = app.add_subcommand("generate", "Write a stochastic block model in citation format");
  generate->add_option("--sizes", sizes, "Block sizes")->required()->delimiter(',');
  generate->add_option("--p-in", p_in, "Within-block edge probability");
  generate->add_option("--p-out", p_out, "Between-block edge probability");
  generate->add_option("--features", dim, "Feature dimension");
  generate->add_option("--signal", signal, "Block-indicator magnitude");
  generate->add_option("--noise", noise, "Gaussian noise standard deviation");
  generate->add_option("--seed", gen_seed, "Generator seed");
  generate->add_option("--prefix", gen_prefix, "Output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::vector<std::pair<std::string, std::string>> flags;
  if (!mode.empty()) flags.emplace_back("mode", mode);
  if (fixed_k) flags.emplace_back("fixed_k", std::to_string(*fixed_k));

  try {
    if (cluster->parsed()) return cmd_cluster(data, cfg, flags, seeds_text, out_dir);
    if (trainc->parsed()) return cmd_train(data, cfg, flags, out_dir);
    if (eval->parsed()) return cmd_eval(data, assignments_path, nmi_norm);
    if (sweep->parsed()) return cmd_sweep(data, cfg, flags, out_dir);
    if (inspect->parsed()) return cmd_inspect(report_path, threshold, out_file);
    if (convolve->parsed()) return cmd_convolve(data, cfg, conv_k, out_file, kernel_path);
    if (generate->parsed()) {
      return cmd_generate(sizes, p_in, p_out, dim, signal, noise, gen_seed, gen_prefix);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
