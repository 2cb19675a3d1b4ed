#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cusp/config.hpp"
#include "cusp/curvature_encoding.hpp"
#include "cusp/cusp_laplacian.hpp"
#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/orc.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/spectral_filter.hpp"
#include "cusp/spectrum.hpp"
#include "cusp/train.hpp"

// Command implementations behind the `cusp` executable. Each command reads
// its inputs, writes CSV/text outputs and returns a process exit code.

namespace cusp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;

  Config config() const {
    Config c;
    if (!config_path.empty()) c.load(config_path);
    for (const auto& kv : overrides) c.set_assignment(kv);
    return c;
  }
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw InputError("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

inline std::vector<CurvatureBin> to_bins(const Histogram& h) {
  std::vector<CurvatureBin> bins;
  for (int i = 0; i < static_cast<int>(h.counts.size()); ++i)
    bins.push_back({h.bin_center(i), static_cast<double>(h.counts[i])});
  return bins;
}

// Two numeric columns `curvature,frequency`, or the three-column histogram
// written by `curvature` (bin_left,bin_right,count). A header line is skipped.
inline std::vector<CurvatureBin> load_histogram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open histogram " + path);
  std::vector<CurvatureBin> bins;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (lineno == 1) continue;
      throw InputError(path + ":" + std::to_string(lineno) + ": bad number");
    }
    if (cells.size() == 2)
      bins.push_back({cells[0], cells[1]});
    else if (cells.size() == 3)
      bins.push_back({0.5 * (cells[0] + cells[1]), cells[2]});
    else
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 2 or 3 columns");
  }
  if (bins.empty()) throw InputError("histogram " + path + " is empty");
  return bins;
}

inline std::optional<int> node_count_hint(const std::string& features, const std::string& labels) {
  if (!features.empty()) return static_cast<int>(load_features_csv(features).rows());
  if (!labels.empty()) return static_cast<int>(load_labels_csv(labels).size());
  return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// curvature

inline int cmd_curvature(const std::string& graph_path, const std::string& out_dir, const Config& cfg,
                         std::ostream& log) {
  EdgeListFile f = read_edge_list(graph_path);
  OrcResult r = compute_all(f.graph, cfg.orc());
  namespace fs = std::filesystem;
  auto edges = detail::open_out(fs::path(out_dir) / "edges.csv");
  edges << "u,v,orc\n";
  for (int i = 0; i < f.graph.num_edges(); ++i) {
    const Edge& e = f.graph.edges()[i];
    edges << f.original_ids[e.u] << ',' << f.original_ids[e.v] << ',' << r.edge_orc[i] << '\n';
  }
  auto nodes = detail::open_out(fs::path(out_dir) / "nodes.csv");
  nodes << "node,orc\n";
  for (int x = 0; x < f.graph.num_nodes(); ++x) nodes << f.original_ids[x] << ',' << r.node_orc[x] << '\n';
  Histogram h = histogram(r.edge_orc, static_cast<int>(cfg.integer("histogram.bins")));
  auto hist = detail::open_out(fs::path(out_dir) / "histogram.csv");
  hist << "bin_left,bin_right,count\n";
  for (int i = 0; i < static_cast<int>(h.counts.size()); ++i)
    hist << h.bin_left(i) << ',' << h.bin_right(i) << ',' << h.counts[i] << '\n';
  log << "edges=" << f.graph.num_edges() << " nodes=" << f.graph.num_nodes() << " method=" << to_string(r.method);
  if (r.unconverged_edges) log << " unconverged=" << r.unconverged_edges;
  log << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// laplacian

inline int cmd_laplacian(const std::string& graph_path, const std::string& out_path, const Config& cfg,
                         std::ostream& log) {
  Graph g = load_edge_list(graph_path);
  CuspLaplacian cl = build_cusp_laplacian(g, compute_all(g, cfg.orc()));
  SpectrumReport rep = verify_spectrum(cl);
  if (!out_path.empty()) {
    auto out = detail::open_out(out_path);
    out << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i) out << i << ',' << rep.eigenvalues[i] << '\n';
  }
  print_report(log, rep);
  return rep.pass() ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// signature

inline int cmd_signature(const std::string& graph_path, const std::string& hist_path, const Config& cfg,
                         std::ostream& out) {
  if (graph_path.empty() == hist_path.empty()) throw InputError("signature: give exactly one of --graph or --histogram");
  std::vector<CurvatureBin> bins;
  if (!hist_path.empty()) {
    bins = detail::load_histogram_csv(hist_path);
  } else {
    Graph g = load_edge_list(graph_path);
    OrcResult r = compute_all(g, cfg.orc());
    bins = detail::to_bins(histogram(r.edge_orc, static_cast<int>(cfg.integer("histogram.bins"))));
  }
  SignatureEstimate est = estimate_signature(bins, cfg.signature_options());
  out << est.signature.to_string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// spectral-energy

// Signal spec: `labels:<class>` (indicator of one class, needs --labels),
// `eigvec:<k>` (k-th eigenvector), or `file:<csv>` (one value per node).
inline int cmd_spectral_energy(const std::string& graph_path, const std::string& signal, const std::string& labels_path,
                               const std::string& out_path, const Config& cfg, std::ostream& log) {
  std::optional<int> hint;
  if (!labels_path.empty()) hint = static_cast<int>(load_labels_csv(labels_path).size());
  Graph g = load_edge_list(graph_path, hint);
  CuspLaplacian cl = build_cusp_laplacian(g, compute_all(g, cfg.orc()));
  Spectrum s = spectrum(Eigen::MatrixXd(cl.norm_laplacian), true);
  const int n = g.num_nodes();
  Eigen::VectorXd f(n);
  auto colon = signal.find(':');
  if (colon == std::string::npos) throw InputError("spectral-energy: signal must be labels:<c>, eigvec:<k> or file:<csv>");
  const std::string kind = signal.substr(0, colon), arg = signal.substr(colon + 1);
  if (kind == "labels") {
    if (labels_path.empty()) throw InputError("spectral-energy: labels signal needs --labels");
    auto y = load_labels_csv(labels_path);
    const int c = std::stoi(arg);
    for (int x = 0; x < n; ++x) f[x] = y[x] == c ? 1.0 : 0.0;
  } else if (kind == "eigvec") {
    const int k = std::stoi(arg);
    if (k < 0 || k >= n) throw InputError("spectral-energy: eigenvector index out of range");
    f = s.eigenvectors->col(k);
  } else if (kind == "file") {
    Eigen::MatrixXd m = load_features_csv(arg);
    if (m.rows() != n || m.cols() != 1) throw InputError("spectral-energy: signal file needs one value per node");
    f = m.col(0);
  } else {
    throw InputError("spectral-energy: unknown signal kind '" + kind + "'");
  }
  Eigen::VectorXd e = spectral_energy(s, f);
  auto out = detail::open_out(out_path);
  out << "index,eigenvalue,energy\n";
  for (int i = 0; i < n; ++i) out << i << ',' << s.eigenvalues[i] << ',' << e[i] << '\n';
  log << "nodes=" << n << " energy_sum=" << e.sum() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// filter-response

// One column per bank filter. Filter 0 sees identity propagation, so its
// response is the constant sum of its weights; filter l uses its first l+1 weights.
inline int cmd_filter_response(const std::string& checkpoint_path, const std::string& out_path, const Config& cfg,
                               std::ostream& log) {
  std::vector<GprWeights> filters;
  if (!checkpoint_path.empty()) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    const Eigen::MatrixXd& g = ck.params.at("gpr.gamma");
    for (Eigen::Index l = 0; l < g.rows(); ++l) filters.push_back(gpr_weights_custom(g.row(l).transpose()));
  } else {
    ModelConfig m = cfg.train().model;
    filters.assign(m.L + 1, initial_gamma(m));
  }
  const int L = static_cast<int>(filters.size()) - 1;
  auto out = detail::open_out(out_path);
  out << "lambda";
  for (int l = 0; l <= L; ++l) out << ",g_filter_" << l;
  out << '\n';
  for (int i = 0; i <= 200; ++i) {
    const double lam = -1.0 + 2.0 * i / 200.0;
    out << lam;
    for (int l = 0; l <= L; ++l)
      out << ',' << (l == 0 ? filter_response(filters[0], 1.0) : filter_response(truncate(filters[l], l), lam));
    out << '\n';
  }
  log << "rows=201 filters=" << L + 1 << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / eval

struct DataArgs {
  std::string graph, features, labels;
};

inline Dataset load_dataset(const DataArgs& a, Task task) {
  auto hint = detail::node_count_hint(a.features, a.labels);
  Dataset d;
  d.graph = load_edge_list(a.graph, hint);
  const int n = d.graph.num_nodes();
  d.features = a.features.empty() ? Eigen::MatrixXd::Identity(n, n) : load_features_csv(a.features);
  if (d.features.rows() != n) throw InputError("features " + a.features + " have " + std::to_string(d.features.rows()) +
                                               " rows for " + std::to_string(n) + " nodes");
  if (!a.labels.empty()) {
    d.labels = load_labels_csv(a.labels);
    if (static_cast<int>(d.labels.size()) != n) throw InputError("labels " + a.labels + " do not cover every node");
  }
  if (task == Task::NodeClassification && d.labels.empty()) throw InputError("node classification needs --labels");
  return d;
}

// Given signature, or one estimated from the training graph's curvature histogram.
inline Signature resolve_signature(const Config& cfg, const Prepared& prep) {
  const int d_m = static_cast<int>(cfg.integer("model.d_m"));
  if (!cfg.str("signature.spec").empty()) {
    Signature s = Signature::parse(cfg.str("signature.spec"));
    if (s.total_dim() != d_m)
      throw InputError("signature.spec has total dimension " + std::to_string(s.total_dim()) + " but model.d_m is " +
                       std::to_string(d_m));
    return s;
  }
  auto bins = detail::to_bins(histogram(prep.orc.edge_orc, static_cast<int>(cfg.integer("histogram.bins"))));
  return estimate_signature(bins, cfg.signature_options()).signature;
}

inline void write_report(std::ostream& out, const TrainConfig& cfg, const TrainResult& r) {
  out << std::setprecision(17);
  out << "task=" << to_string(cfg.model.task) << '\n';
  out << "metric=" << (cfg.model.task == Task::NodeClassification ? "micro_f1" : "auc") << '\n';
  out << "best_epoch=" << r.best_epoch << '\n';
  out << "val_metric=" << r.best_val << '\n';
  out << "test_metric=" << r.test_metric << '\n';
  out << "signature=" << cfg.model.signature.to_string() << '\n';
  for (std::size_t q = 0; q < r.curvatures.size(); ++q) out << "curvature." << q << '=' << r.curvatures[q] << '\n';
  for (Eigen::Index q = 0; q < r.beta.size(); ++q) out << "beta." << q << '=' << r.beta[q] << '\n';
  for (Eigen::Index l = 0; l < r.epsilon.size(); ++l) out << "epsilon." << l << '=' << r.epsilon[l] << '\n';
  const Eigen::MatrixXd& g = r.params.at("gpr.gamma");
  for (Eigen::Index f = 0; f < g.rows(); ++f) {
    out << "gamma." << f << '=';
    for (Eigen::Index l = 0; l < g.cols(); ++l) out << (l ? "," : "") << g(f, l);
    out << '\n';
  }
}

inline int cmd_train(const DataArgs& data_args, const std::string& out_dir, const Config& cfg, std::ostream& log) {
  TrainConfig tc = cfg.train();
  Dataset data = load_dataset(data_args, tc.model.task);
  if (tc.model.task == Task::NodeClassification)
    tc.model.num_classes = 1 + *std::max_element(data.labels.begin(), data.labels.end());
  // The split and curvature do not depend on the signature, so prepare first
  // and estimate the signature from the message-passing graph.
  Prepared prep = prepare(data, tc);
  tc.model.signature = resolve_signature(cfg, prep);
  TrainResult r = train(data, tc, prep);

  namespace fs = std::filesystem;
  auto hist = detail::open_out(fs::path(out_dir) / "history.csv");
  hist << "epoch,train_loss,val_metric\n";
  for (const auto& e : r.history) hist << e.epoch << ',' << e.train_loss << ',' << e.val_metric << '\n';
  auto rep = detail::open_out(fs::path(out_dir) / "report.txt");
  write_report(rep, tc, r);
  save_checkpoint((fs::path(out_dir) / "checkpoint.json").string(), {tc, r.params, r.best_val, r.best_epoch});
  log << "best_epoch=" << r.best_epoch << " val_metric=" << r.best_val << " test_metric=" << r.test_metric << '\n';
  return kExitOk;
}

inline int cmd_eval(const DataArgs& data_args, const std::string& checkpoint_path, std::ostream& out) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Dataset data = load_dataset(data_args, ck.config.model.task);
  Prepared prep = prepare(data, ck.config);
  const double val = metric(ck.params, prep, data, ck.config, true);
  const double test = metric(ck.params, prep, data, ck.config, false);
  out << std::setprecision(17);
  out << "task=" << to_string(ck.config.model.task) << '\n';
  out << "val_metric=" << val << '\n';
  out << "test_metric=" << test << '\n';
  out << "checkpoint_val_metric=" << ck.best_val << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// encode (debug dump)

inline int cmd_encode(const std::string& graph_path, const Config& cfg, std::ostream& out) {
  EdgeListFile f = read_edge_list(graph_path);
  OrcResult r = compute_all(f.graph, cfg.orc());
  TrainConfig tc = cfg.train();
  Signature sig = cfg.str("signature.spec").empty() ? Signature::parse("E:" + cfg.str("model.d_m") + ":0")
                                                    : Signature::parse(cfg.str("signature.spec"));
  CurvatureEncoder enc = make_curvature_encoder(tc.model.d_c, sig, static_cast<std::uint64_t>(cfg.integer("train.seed")),
                                                tc.model.encoder_sigma);
  out << std::setprecision(10) << "node,orc";
  const int shown = std::min(8, 2 * enc.dim());
  for (int i = 0; i < shown; ++i) out << ",phi_" << i;
  out << '\n';
  for (int x = 0; x < f.graph.num_nodes(); ++x) {
    const double k = clamp_curvature(r.node_orc[x]);
    Eigen::VectorXd phi = phi_euclidean(enc, k);
    out << f.original_ids[x] << ',' << k;
    for (int i = 0; i < shown; ++i) out << ',' << phi[i];
    out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// generate

inline int cmd_generate(const std::string& kind, const gen::GeneratorParams& params, const std::string& out_path,
                        const std::string& labels_path, std::ostream& log) {
  Graph g = gen::generate(kind, params);
  save_edge_list(out_path, g);
  if (!labels_path.empty()) {
    if (!g.labels()) throw InputError("generator '" + kind + "' produces no labels");
    auto out = detail::open_out(labels_path);
    for (int y : *g.labels()) out << y << '\n';
  }
  log << "nodes=" << g.num_nodes() << " edges=" << g.num_edges();
  if (g.labels()) log << " homophily=" << homophily_ratio(g);
  log << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Curvature-aware spectral graph learning on product manifolds"};
  app.require_subcommand(1);
  CommonArgs common;
  auto add_common = [&](CLI::App* c) {
    c->add_option("-c,--config", common.config_path, "flat key=value config file");
    c->add_option("-s,--set", common.overrides, "override a config key (key=value), repeatable");
  };
  std::string graph, out_dir = ".", out_file, hist_path, signal, checkpoint;
  DataArgs data;

  auto* curv = app.add_subcommand("curvature", "edge/node Ollivier-Ricci curvature and histogram");
  curv->add_option("graph", graph, "edge list")->required();
  curv->add_option("-o,--out-dir", out_dir, "directory for edges.csv, nodes.csv, histogram.csv");
  add_common(curv);

  auto* lap = app.add_subcommand("laplacian", "curvature-weighted Laplacian spectrum and theorem check");
  lap->add_option("graph", graph, "edge list")->required();
  lap->add_option("-o,--out", out_file, "spectrum CSV");
  add_common(lap);

  auto* sig = app.add_subcommand("signature", "estimate a product-manifold signature");
  sig->add_option("-g,--graph", graph, "edge list");
  sig->add_option("-H,--histogram", hist_path, "curvature histogram CSV");
  add_common(sig);

  auto* energy = app.add_subcommand("spectral-energy", "signal energy per Laplacian eigenvector");
  energy->add_option("graph", graph, "edge list")->required();
  energy->add_option("--signal", signal, "labels:<class> | eigvec:<k> | file:<csv>")->required();
  energy->add_option("--labels", data.labels, "labels CSV");
  energy->add_option("-o,--out", out_file, "output CSV")->required();
  add_common(energy);

  auto* resp = app.add_subcommand("filter-response", "polynomial filter responses on a 201-point grid");
  resp->add_option("--checkpoint", checkpoint, "take filters from a trained checkpoint");
  resp->add_option("-o,--out", out_file, "output CSV")->required();
  add_common(resp);

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("graph", data.graph, "edge list")->required();
  tr->add_option("--features", data.features, "feature CSV (default: identity)");
  tr->add_option("--labels", data.labels, "labels CSV (node classification)");
  tr->add_option("-o,--out-dir", out_dir, "directory for history.csv, report.txt, checkpoint.json");
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("graph", data.graph, "edge list")->required();
  ev->add_option("--features", data.features, "feature CSV");
  ev->add_option("--labels", data.labels, "labels CSV");
  ev->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();

  auto* enc = app.add_subcommand("encode", "dump curvature encodings (first 8 features)");
  enc->add_option("graph", graph, "edge list")->required();
  add_common(enc);

  std::string gen_kind, labels_out;
  gen::GeneratorParams gp;
  std::vector<int> blocks;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic graph");
  gen_cmd->add_option("kind", gen_kind, "path|cycle|star|complete|tree|sbm|random")->required();
  gen_cmd->add_option("-o,--out", out_file, "edge list to write")->required();
  gen_cmd->add_option("--labels-out", labels_out, "write block labels (sbm)");
  gen_cmd->add_option("-n", gp.n, "node count");
  gen_cmd->add_option("--branching", gp.branching, "tree branching");
  gen_cmd->add_option("--depth", gp.depth, "tree depth");
  gen_cmd->add_option("--p", gp.p, "extra-edge probability (random)");
  gen_cmd->add_option("--blocks", blocks, "SBM block sizes");
  gen_cmd->add_option("--p-in", gp.sbm.p_in, "SBM within-block probability");
  gen_cmd->add_option("--p-out", gp.sbm.p_out, "SBM between-block probability");
  gen_cmd->add_option("--seed", gp.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*curv) return cmd_curvature(graph, out_dir, common.config(), out);
    if (*lap) return cmd_laplacian(graph, out_file, common.config(), out);
    if (*sig) return cmd_signature(graph, hist_path, common.config(), out);
    if (*energy) return cmd_spectral_energy(graph, signal, data.labels, out_file, common.config(), out);
    if (*resp) return cmd_filter_response(checkpoint, out_file, common.config(), out);
    if (*tr) return cmd_train(data, out_dir, common.config(), out);
    if (*ev) return cmd_eval(data, checkpoint, out);
    if (*enc) return cmd_encode(graph, common.config(), out);
    if (*gen_cmd) {
      gp.sbm.block_sizes = blocks;
      gp.sbm.seed = gp.seed;
      return cmd_generate(gen_kind, gp, out_file, labels_out, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace cusp::cli
