#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/model.hpp"
#include "cusp/orc.hpp"

namespace cusp {

struct TrainConfig {
  ModelConfig model;
  OrcConfig orc;
  double lr = 4e-3;
  int epochs = 100;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  std::optional<std::array<double, 3>> split;  // train/val/test; unset: task default
  int max_split_attempts = 10;

  std::array<double, 3> fractions() const {
    if (split) return *split;
    return model.task == Task::NodeClassification ? std::array<double, 3>{0.6, 0.2, 0.2}
                                                  : std::array<double, 3>{0.85, 0.05, 0.10};
  }

  void validate() const {
    model.validate();
    orc.validate();
    detail::require(lr > 0.0, "train: learning rate must be positive");
    detail::require(epochs >= 1, "train: epochs must be positive");
    detail::require(weight_decay >= 0.0, "train: negative weight decay");
    detail::require(max_split_attempts >= 1, "train: max split attempts must be positive");
    auto f = fractions();
    for (double x : f) detail::require(x >= 0.0, "train: negative split fraction");
    detail::require(std::abs(f[0] + f[1] + f[2] - 1.0) < 1e-9, "train: split fractions must sum to 1");
    detail::require(f[0] > 0.0 && f[1] > 0.0 && f[2] > 0.0, "train: every split needs a positive fraction");
  }
};

// ---------------------------------------------------------------------------
// Metrics

// Micro-averaged F1 over single-label predictions, i.e. accuracy.
inline double micro_f1(const Eigen::MatrixXd& logits, const std::vector<int>& rows, const std::vector<int>& labels) {
  detail::require(!rows.empty(), "micro_f1: empty node set");
  int hit = 0;
  for (int r : rows) {
    Eigen::Index arg;
    logits.row(r).maxCoeff(&arg);
    hit += static_cast<int>(arg) == labels[r];
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

// Probability that a random positive outscores a random negative (ties count half).
inline double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  detail::require(!pos.empty() && !neg.empty(), "roc_auc: need positive and negative scores");
  std::vector<std::pair<double, int>> all;
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += avg;
    i = j;
  }
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// ---------------------------------------------------------------------------
// Splits

struct NodeSplit {
  std::vector<int> train, val, test;
  int attempts = 1;
};

// Random node split; redrawn (seed + attempt) while some class is absent from train.
inline NodeSplit split_nodes(const std::vector<int>& labels, int num_classes, std::array<double, 3> frac,
                             std::uint64_t seed, int max_attempts = 10) {
  const int n = static_cast<int>(labels.size());
  detail::require(n >= 3, "split_nodes: need at least three labeled nodes");
  for (int y : labels) detail::require(y >= 0 && y < num_classes, "split_nodes: label out of range");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    std::shuffle(perm.begin(), perm.end(), rng);
    const int n_train = std::max(1, static_cast<int>(std::lround(frac[0] * n)));
    const int n_val = std::max(1, static_cast<int>(std::lround(frac[1] * n)));
    detail::require(n_train + n_val < n, "split_nodes: split leaves no test nodes");
    NodeSplit s;
    s.train.assign(perm.begin(), perm.begin() + n_train);
    s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    s.test.assign(perm.begin() + n_train + n_val, perm.end());
    for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
    std::vector<bool> seen(num_classes, false);
    for (int x : s.train) seen[labels[x]] = true;
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      s.attempts = attempt + 1;
      return s;
    }
  }
  throw InputError("split_nodes: some class is missing from the training split after " + std::to_string(max_attempts) +
                   " attempts");
}

using NodePair = std::pair<int, int>;

struct EdgeSplit {
  std::vector<int> train_edges;  // indices into Graph::edges(), used for message passing
  std::vector<NodePair> train_pos, val_pos, test_pos;
  std::vector<NodePair> val_neg, test_neg;
};

namespace detail {

inline std::uint64_t pair_key(int u, int v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v);
}

// `count` distinct non-adjacent pairs avoiding every key in `exclude`.
inline std::vector<NodePair> sample_non_edges(int n, int count, std::unordered_set<std::uint64_t>& exclude,
                                              std::mt19937_64& rng) {
  const double possible = 0.5 * n * (n - 1.0) - static_cast<double>(exclude.size());
  if (possible < count) throw InputError("negative sampling: not enough non-edges");
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<NodePair> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    int u = pick(rng), v = pick(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (!exclude.insert(pair_key(u, v)).second) continue;
    out.emplace_back(u, v);
  }
  return out;
}

}  // namespace detail

// Edges go to val/test only while both endpoints keep a training edge, so no
// node becomes isolated in the message-passing graph. Val/test negatives are
// drawn once from non-edges of the full graph.
inline EdgeSplit split_edges(const Graph& g, std::array<double, 3> frac, std::uint64_t seed) {
  const int m = g.num_edges();
  detail::require(m >= 3, "split_edges: need at least three edges");
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const int n_val = std::max(1, static_cast<int>(std::lround(frac[1] * m)));
  const int n_test = std::max(1, static_cast<int>(std::lround(frac[2] * m)));
  std::vector<int> deg(g.num_nodes());
  for (int x = 0; x < g.num_nodes(); ++x) deg[x] = g.degree(x);
  EdgeSplit s;
  for (int e : perm) {
    const Edge& ed = g.edges()[e];
    const bool removable = deg[ed.u] > 1 && deg[ed.v] > 1;
    if (removable && static_cast<int>(s.val_pos.size()) < n_val) {
      s.val_pos.emplace_back(ed.u, ed.v);
    } else if (removable && static_cast<int>(s.test_pos.size()) < n_test) {
      s.test_pos.emplace_back(ed.u, ed.v);
    } else {
      s.train_edges.push_back(e);
      s.train_pos.emplace_back(ed.u, ed.v);
      continue;
    }
    --deg[ed.u];
    --deg[ed.v];
  }
  if (s.val_pos.empty() || s.test_pos.empty()) throw InputError("split_edges: graph too sparse to hold out edges");
  std::sort(s.train_edges.begin(), s.train_edges.end());
  std::unordered_set<std::uint64_t> taken;
  for (const Edge& e : g.edges()) taken.insert(detail::pair_key(e.u, e.v));
  s.val_neg = detail::sample_non_edges(g.num_nodes(), static_cast<int>(s.val_pos.size()), taken, rng);
  s.test_neg = detail::sample_non_edges(g.num_nodes(), static_cast<int>(s.test_pos.size()), taken, rng);
  return s;
}

// ---------------------------------------------------------------------------
// Optimizer

struct Adam {
  double lr = 4e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int step_count = 0;
  std::map<std::string, Eigen::MatrixXd> m, v;

  void step(ModelParams& p, const std::map<std::string, Eigen::MatrixXd>& grads) {
    ++step_count;
    const double c1 = 1.0 - std::pow(beta1, step_count), c2 = 1.0 - std::pow(beta2, step_count);
    for (const auto& [name, g] : grads) {
      if (p.frozen.count(name)) continue;
      auto& mm = m[name];
      auto& vv = v[name];
      if (mm.size() == 0) {
        mm = Eigen::MatrixXd::Zero(g.rows(), g.cols());
        vv = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      }
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
      p.values[name].array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
    }
  }
};

// ---------------------------------------------------------------------------
// Training

struct Dataset {
  Graph graph;
  Eigen::MatrixXd features;
  std::vector<int> labels;  // NC only
};

// Everything derived deterministically from (dataset, config).
struct Prepared {
  Graph message_graph;
  OrcResult orc;
  ModelInputs inputs;
  NodeSplit nodes;
  EdgeSplit edges;
};

inline Prepared prepare(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.features.rows() != data.graph.num_nodes()) throw InputError("train: feature rows do not match node count");
  Prepared p;
  if (cfg.model.task == Task::NodeClassification) {
    if (static_cast<int>(data.labels.size()) != data.graph.num_nodes())
      throw InputError("train: node classification needs one label per node");
    p.nodes = split_nodes(data.labels, cfg.model.num_classes, cfg.fractions(), cfg.seed, cfg.max_split_attempts);
    p.message_graph = data.graph;
  } else {
    p.edges = split_edges(data.graph, cfg.fractions(), cfg.seed);
    p.message_graph = data.graph.edge_subgraph(p.edges.train_edges);
  }
  p.orc = compute_all(p.message_graph, cfg.orc);
  p.inputs = make_inputs(p.message_graph, p.orc, data.features);
  return p;
}

inline double metric(const ModelParams& params, const Prepared& prep, const Dataset& data, const TrainConfig& cfg,
                      bool validation) {
  ad::Tape t;
  ParamVars pv = bind_params(t, params, false);
  ForwardResult fr = forward(t, pv, prep.inputs, cfg.model);
  if (cfg.model.task == Task::NodeClassification)
    return micro_f1(fr.logits.value(), validation ? prep.nodes.val : prep.nodes.test, data.labels);
  const auto& pos = validation ? prep.edges.val_pos : prep.edges.test_pos;
  const auto& neg = validation ? prep.edges.val_neg : prep.edges.test_neg;
  std::vector<NodePair> pairs = pos;
  pairs.insert(pairs.end(), neg.begin(), neg.end());
  Eigen::MatrixXd z = lp_logits(fr, pairs, cfg.model).value();
  std::vector<double> ps(z.data(), z.data() + pos.size()), ns(z.data() + pos.size(), z.data() + pairs.size());
  return roc_auc(ps, ns);
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val = -1.0;
  double test_metric = 0.0;
  Eigen::VectorXd beta, epsilon;
  std::vector<double> curvatures;
};

inline TrainResult train(const Dataset& data, const TrainConfig& cfg, const Prepared& prep) {
  TrainResult res;
  ModelParams params = init_params(cfg.model, static_cast<int>(data.features.cols()), cfg.seed);
  Adam opt;
  opt.lr = cfg.lr;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  Objective obj;
  obj.weight_decay = cfg.weight_decay;
  std::unordered_set<std::uint64_t> train_keys;
  if (cfg.model.task == Task::NodeClassification) {
    obj.rows = prep.nodes.train;
    obj.labels = data.labels;
  } else {
    for (auto [u, v] : prep.edges.train_pos) train_keys.insert(detail::pair_key(u, v));
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.model.task == Task::LinkPrediction) {
      std::unordered_set<std::uint64_t> exclude = train_keys;
      auto neg = detail::sample_non_edges(data.graph.num_nodes(), static_cast<int>(prep.edges.train_pos.size()), exclude, rng);
      obj.pairs = prep.edges.train_pos;
      obj.pairs.insert(obj.pairs.end(), neg.begin(), neg.end());
      obj.targets.assign(prep.edges.train_pos.size(), 1.0);
      obj.targets.resize(obj.pairs.size(), 0.0);
    }
    LossEval le = evaluate_loss(params, prep.inputs, cfg.model, obj, true, &rng);
    opt.step(params, le.grads);
    const double val = metric(params, prep, data, cfg, true);
    res.history.push_back({epoch, le.value, val});
    if (val > res.best_val) {
      res.best_val = val;
      res.best_epoch = epoch;
      res.params = params;
    }
  }
  res.test_metric = metric(res.params, prep, data, cfg, false);
  ad::Tape t;
  ForwardResult fr = forward(t, bind_params(t, res.params, false), prep.inputs, cfg.model);
  res.beta = fr.beta;
  res.epsilon = fr.epsilon;
  res.curvatures = current_curvatures(res.params, cfg.model);
  return res;
}

inline TrainResult train(const Dataset& data, const TrainConfig& cfg) { return train(data, cfg, prepare(data, cfg)); }

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json config_to_json(const TrainConfig& c) {
  const ModelConfig& m = c.model;
  nlohmann::json j;
  j["model"] = {{"signature", m.signature.to_string()}, {"d_c", m.d_c}, {"d_pool", m.d_pool}, {"L", m.L},
                {"alpha", m.alpha}, {"gamma_init", to_string(m.gamma_init)}, {"train_gamma", m.train_gamma},
                {"train_curvature", m.train_curvature}, {"use_encoding", m.use_encoding},
                {"use_pooling", m.use_pooling}, {"dropout", m.dropout}, {"encoder_sigma", m.encoder_sigma},
                {"task", to_string(m.task)}, {"num_classes", m.num_classes}, {"lp_radius", m.lp_radius},
                {"lp_temperature", m.lp_temperature}};
  j["orc"] = {{"delta", c.orc.delta}, {"method", to_string(c.orc.method)}, {"sinkhorn_max_iters", c.orc.sinkhorn_max_iters},
              {"sinkhorn_tol", c.orc.sinkhorn_tol}, {"normalize", c.orc.normalize}};
  if (c.orc.sinkhorn_eps) j["orc"]["sinkhorn_eps"] = *c.orc.sinkhorn_eps;
  j["train"] = {{"lr", c.lr}, {"epochs", c.epochs}, {"weight_decay", c.weight_decay}, {"seed", c.seed},
                {"max_split_attempts", c.max_split_attempts}};
  if (c.split) j["train"]["split"] = *c.split;
  return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  const auto& m = j.at("model");
  c.model.signature = Signature::parse(m.at("signature").get<std::string>());
  c.model.d_c = m.at("d_c");
  c.model.d_pool = m.at("d_pool");
  c.model.L = m.at("L");
  c.model.alpha = m.at("alpha");
  c.model.gamma_init = parse_gpr_init(m.at("gamma_init").get<std::string>());
  c.model.train_gamma = m.at("train_gamma");
  c.model.train_curvature = m.at("train_curvature");
  c.model.use_encoding = m.at("use_encoding");
  c.model.use_pooling = m.at("use_pooling");
  c.model.dropout = m.at("dropout");
  c.model.encoder_sigma = m.at("encoder_sigma");
  c.model.task = parse_task(m.at("task").get<std::string>());
  c.model.num_classes = m.at("num_classes");
  c.model.lp_radius = m.at("lp_radius");
  c.model.lp_temperature = m.at("lp_temperature");
  const auto& o = j.at("orc");
  c.orc.delta = o.at("delta");
  c.orc.method = parse_orc_method(o.at("method").get<std::string>());
  c.orc.sinkhorn_max_iters = o.at("sinkhorn_max_iters");
  c.orc.sinkhorn_tol = o.at("sinkhorn_tol");
  c.orc.normalize = o.at("normalize");
  if (o.contains("sinkhorn_eps")) c.orc.sinkhorn_eps = o.at("sinkhorn_eps").get<double>();
  const auto& t = j.at("train");
  c.lr = t.at("lr");
  c.epochs = t.at("epochs");
  c.weight_decay = t.at("weight_decay");
  c.seed = t.at("seed");
  c.max_split_attempts = t.at("max_split_attempts");
  if (t.contains("split")) c.split = t.at("split").get<std::array<double, 3>>();
  return c;
}

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  double best_val = 0.0;
  int best_epoch = 0;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = "cusp-checkpoint-1";
  j["config"] = config_to_json(ck.config);
  j["best_val"] = ck.best_val;
  j["best_epoch"] = ck.best_epoch;
  for (const auto& [name, m] : ck.params.values) {
    std::vector<double> data(m.data(), m.data() + m.size());
    j["params"][name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  }
  j["frozen"] = std::vector<std::string>(ck.params.frozen.begin(), ck.params.frozen.end());
  j["no_decay"] = std::vector<std::string>(ck.params.no_decay.begin(), ck.params.no_decay.end());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out << j.dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path);
  Checkpoint ck;
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "cusp-checkpoint-1") throw InputError("not a checkpoint file: " + path);
    ck.config = config_from_json(j.at("config"));
    ck.best_val = j.at("best_val");
    ck.best_epoch = j.at("best_epoch");
    for (const auto& [name, t] : j.at("params").items()) {
      auto data = t.at("data").get<std::vector<double>>();
      const Eigen::Index r = t.at("rows"), c = t.at("cols");
      if (static_cast<Eigen::Index>(data.size()) != r * c) throw InputError("checkpoint: tensor '" + name + "' size mismatch");
      ck.params.values[name] = Eigen::Map<Eigen::MatrixXd>(data.data(), r, c);
    }
    for (const auto& s : j.at("frozen")) ck.params.frozen.insert(s.get<std::string>());
    for (const auto& s : j.at("no_decay")) ck.params.no_decay.insert(s.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed checkpoint " + path + ": " + e.what());
  }
  return ck;
}

}  // namespace cusp
