#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cusp/autodiff.hpp"
#include "cusp/curvature_encoding.hpp"
#include "cusp/cusp_laplacian.hpp"
#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/orc.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/spectral_filter.hpp"
#include "cusp/tape_stereo.hpp"

namespace cusp {

enum class Task { NodeClassification, LinkPrediction };

inline const char* to_string(Task t) { return t == Task::NodeClassification ? "nc" : "lp"; }

inline Task parse_task(const std::string& s) {
  if (s == "nc") return Task::NodeClassification;
  if (s == "lp") return Task::LinkPrediction;
  throw InputError("unknown task '" + s + "' (expected nc|lp)");
}

inline const char* to_string(GprInit g) {
  switch (g) {
    case GprInit::Ppr: return "ppr";
    case GprInit::HighPass: return "highpass";
    case GprInit::Custom: return "custom";
  }
  return "?";
}

inline GprInit parse_gpr_init(const std::string& s) {
  if (s == "ppr") return GprInit::Ppr;
  if (s == "highpass") return GprInit::HighPass;
  throw InputError("unknown gamma init '" + s + "' (expected ppr|highpass)");
}

struct ModelConfig {
  Signature signature = Signature::parse("H:16:-1,S:16:1,E:16:0");  // curvatures are initial values
  int d_c = 16;
  int d_pool = 16;
  int L = 10;
  double alpha = 0.3;
  GprInit gamma_init = GprInit::Ppr;
  bool train_gamma = true;
  bool train_curvature = true;
  bool use_encoding = true;  // false: the curvature encoding ablation
  bool use_pooling = true;   // false: beta frozen uniform
  double dropout = 0.3;
  double encoder_sigma = 1.0;
  Task task = Task::NodeClassification;
  int num_classes = 2;
  double lp_radius = 2.0;
  double lp_temperature = 1.0;

  int d_m() const { return signature.total_dim(); }
  int encoding_dim() const { return use_encoding ? d_c : 0; }

  void validate() const {
    detail::require(signature.size() >= 1, "model: empty signature");
    detail::require(L >= 1, "model: L >= 1 required");
    detail::require(d_pool >= 1, "model: d_pool must be positive");
    detail::require(!use_encoding || d_c >= signature.size(), "model: d_C smaller than the number of components");
    detail::require(alpha > 0.0 && alpha < 1.0, "model: alpha must lie in (0, 1)");
    detail::require(dropout >= 0.0 && dropout < 1.0, "model: dropout must lie in [0, 1)");
    detail::require(task == Task::LinkPrediction || num_classes >= 2, "model: need at least two classes");
    detail::require(lp_temperature > 0.0, "model: LP temperature must be positive");
  }
};

// Named parameter tensors. Names are stable and used by checkpoints.
struct ModelParams {
  std::map<std::string, Eigen::MatrixXd> values;
  std::set<std::string> frozen;    // never updated by the optimizer
  std::set<std::string> no_decay;  // excluded from the L2 penalty

  const Eigen::MatrixXd& at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw InputError("model: missing parameter '" + name + "'");
    return it->second;
  }
  bool trainable(const std::string& name) const { return values.count(name) && !frozen.count(name); }
};

namespace detail {

inline Eigen::MatrixXd glorot(int rows, int cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

inline std::string indexed(const char* base, int q) { return std::string(base) + std::to_string(q); }

}  // namespace detail

inline GprWeights initial_gamma(const ModelConfig& cfg) {
  return cfg.gamma_init == GprInit::HighPass ? gpr_weights_highpass(cfg.alpha, cfg.L)
                                             : gpr_weights_ppr(cfg.alpha, cfg.L);
}

inline ModelParams init_params(const ModelConfig& cfg, int d_f, std::uint64_t seed) {
  cfg.validate();
  detail::require(d_f >= 1, "model: features need at least one column");
  std::mt19937_64 rng(seed);
  ModelParams p;
  const int d_m = cfg.d_m(), Q = cfg.signature.size();
  p.values["encoder.weight"] = detail::glorot(d_f, d_m, rng);
  p.values["encoder.bias"] = Eigen::MatrixXd::Zero(1, d_m);

  Eigen::RowVectorXd g0 = initial_gamma(cfg).gamma.transpose();
  p.values["gpr.gamma"] = g0.replicate(cfg.L + 1, 1);
  p.values["bank.epsilon"] = Eigen::MatrixXd::Zero(1, cfg.L + 1);
  p.no_decay.insert({"gpr.gamma", "bank.epsilon", "curvature.raw"});
  if (!cfg.train_gamma) p.frozen.insert("gpr.gamma");

  for (int q = 0; q < Q; ++q) p.values[detail::indexed("pool.W", q)] = detail::glorot(cfg.signature[q].dim, cfg.d_pool, rng);
  p.values["pool.theta"] = detail::glorot(cfg.d_pool, 1, rng);

  Eigen::MatrixXd raw(1, Q);
  for (int q = 0; q < Q; ++q) raw(0, q) = curvature_to_raw(cfg.signature[q].curvature, cfg.signature[q].kind);
  p.values["curvature.raw"] = raw;
  if (!cfg.train_curvature) p.frozen.insert("curvature.raw");

  if (cfg.use_encoding) {
    CurvatureEncoder enc = make_curvature_encoder(cfg.d_c, cfg.signature, rng(), cfg.encoder_sigma);
    p.values["encoding.freq"] = enc.frequencies.transpose();
    p.frozen.insert("encoding.freq");
    for (int q = 0; q < Q; ++q) p.values[detail::indexed("encoding.P", q)] = enc.projectors[q];
  }
  if (cfg.task == Task::NodeClassification) {
    p.values["head.weight"] = detail::glorot(d_m + cfg.encoding_dim(), cfg.num_classes, rng);
    p.values["head.bias"] = Eigen::MatrixXd::Zero(1, cfg.num_classes);
  }
  return p;
}

// Current component curvatures implied by the raw parameters.
inline std::vector<double> current_curvatures(const ModelParams& p, const ModelConfig& cfg) {
  const Eigen::MatrixXd& raw = p.at("curvature.raw");
  std::vector<double> k(cfg.signature.size());
  for (int q = 0; q < cfg.signature.size(); ++q) k[q] = clamp_trainable_curvature(raw(0, q), cfg.signature[q].kind);
  return k;
}

// Graph-side inputs that stay fixed during training.
struct ModelInputs {
  std::shared_ptr<const ad::SparseMat> a_norm;
  Eigen::MatrixXd a_rowsum;  // n x 1
  Eigen::MatrixXd features;  // n x d_f
  std::vector<double> node_orc;

  int num_nodes() const { return static_cast<int>(features.rows()); }
};

inline ModelInputs make_inputs(const Graph& g, const OrcResult& orc, Eigen::MatrixXd features) {
  if (features.rows() != g.num_nodes()) throw InputError("model: feature rows do not match node count");
  CuspLaplacian cl = build_cusp_laplacian(g, orc);
  ModelInputs in;
  in.a_norm = std::make_shared<const ad::SparseMat>(cl.norm_adjacency);
  in.a_rowsum = cl.norm_adjacency * Eigen::VectorXd::Ones(g.num_nodes());
  in.features = std::move(features);
  in.node_orc.resize(g.num_nodes());
  for (int x = 0; x < g.num_nodes(); ++x) in.node_orc[x] = clamp_curvature(orc.node_orc[x]);
  return in;
}

// ---------------------------------------------------------------------------
// Forward pass

struct ParamVars {
  std::map<std::string, ad::Var> vars;

  ad::Var operator[](const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw InputError("model: missing parameter '" + name + "'");
    return it->second;
  }
};

inline ParamVars bind_params(ad::Tape& t, const ModelParams& p, bool with_grad) {
  ParamVars pv;
  for (const auto& [name, m] : p.values) pv.vars[name] = t.leaf(m, with_grad && !p.frozen.count(name));
  return pv;
}

struct ForwardResult {
  std::vector<ad::Var> zeta;            // final embedding, one block per component
  std::vector<ad::Curvature> curvature;  // matching curvature per block
  ad::Var logits;                       // NC only
  Eigen::VectorXd beta;                 // component weights of the deepest filter
  Eigen::VectorXd epsilon;
};

inline Eigen::MatrixXd phi_euclidean_matrix(const Eigen::RowVectorXd& freq, const std::vector<double>& orc) {
  const Eigen::Index d = freq.size();
  const double s = std::sqrt(1.0 / static_cast<double>(d));
  Eigen::MatrixXd out(orc.size(), 2 * d);
  for (std::size_t x = 0; x < orc.size(); ++x)
    for (Eigen::Index i = 0; i < d; ++i) {
      out(x, 2 * i) = s * std::cos(freq[i] * orc[x]);
      out(x, 2 * i + 1) = s * std::sin(freq[i] * orc[x]);
    }
  return out;
}

inline Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return m;
}

// `dropout_rng` null means evaluation mode.
inline ForwardResult forward(ad::Tape& t, const ParamVars& pv, const ModelInputs& in, const ModelConfig& cfg,
                             std::mt19937_64* dropout_rng = nullptr) {
  using namespace ad;
  const Signature& sig = cfg.signature;
  const int Q = sig.size(), L = cfg.L;
  if (pv["encoder.weight"].rows() != in.features.cols()) throw InputError("model: feature width does not match encoder");

  std::vector<Curvature> curv(Q);
  Var raw = pv["curvature.raw"];
  for (int q = 0; q < Q; ++q) curv[q] = curvature_from_raw(pick(raw, 0, q), sig[q].kind);

  Mat f = in.features;
  if (dropout_rng && cfg.dropout > 0.0) f = f.cwiseProduct(dropout_mask(f.rows(), f.cols(), cfg.dropout, *dropout_rng));
  Var hidden = tanh(matmul(t.constant(f), pv["encoder.weight"]) + pv["encoder.bias"]);

  // hops[l][q] and their origin-tangent images
  std::vector<std::vector<Var>> hops(L + 1, std::vector<Var>(Q)), tangent(L + 1, std::vector<Var>(Q));
  Var rowsum_a = t.constant(in.a_rowsum);
  for (int q = 0; q < Q; ++q) {
    hops[0][q] = exp0(slice_cols(hidden, sig.offset(q), sig[q].dim), curv[q]);
    for (int l = 1; l <= L; ++l) hops[l][q] = kappa_left_matmul(in.a_norm, rowsum_a, hops[l - 1][q], curv[q]);
    for (int l = 0; l <= L; ++l) tangent[l][q] = log0(hops[l][q], curv[q]);
  }

  // Encoding blocks share the component curvatures.
  std::vector<Var> enc_blocks;
  std::vector<Curvature> enc_curv;
  if (cfg.use_encoding) {
    Eigen::RowVectorXd freq = pv["encoding.freq"].value().row(0);
    Var phi = t.constant(phi_euclidean_matrix(freq, in.node_orc));
    for (int q = 0; q < Q; ++q) {
      enc_blocks.push_back(exp0(matmul(phi, pv[cusp::detail::indexed("encoding.P", q)]), curv[q]));
      enc_curv.push_back(curv[q]);
    }
  }

  Var gamma = pv["gpr.gamma"];
  Var eps = softmax(pv["bank.epsilon"]);
  ForwardResult out;
  std::vector<Var> mixed;  // tangent-space sum over filters, per zeta block
  for (int fidx = 0; fidx <= L; ++fidx) {
    const int terms = fidx == 0 ? L + 1 : fidx + 1;
    std::vector<Var> entry(Q);
    for (int q = 0; q < Q; ++q) {
      auto hop_at = [&](int l) { return fidx == 0 ? 0 : l; };
      if (curv[q].flat()) {
        Var acc = hops[hop_at(0)][q] * pick(gamma, fidx, 0);
        for (int l = 1; l < terms; ++l) acc = acc + hops[hop_at(l)][q] * pick(gamma, fidx, l);
        entry[q] = acc;
      } else {
        Var acc = kappa_scale_tangent(pick(gamma, fidx, 0), tangent[hop_at(0)][q], curv[q]);
        for (int l = 1; l < terms; ++l)
          acc = mobius_add(acc, kappa_scale_tangent(pick(gamma, fidx, l), tangent[hop_at(l)][q], curv[q]), curv[q]);
        entry[q] = acc;
      }
    }

    // Component attention.
    Var beta;
    if (cfg.use_pooling && Q > 1) {
      std::vector<Var> proj(Q);
      for (int q = 0; q < Q; ++q)
        proj[q] = log0(kappa_right_matmul(entry[q], pv[cusp::detail::indexed("pool.W", q)], curv[q]), curv[q]);
      Var mu = proj[0];
      for (int q = 1; q < Q; ++q) mu = mu + proj[q];
      mu = mu * (1.0 / Q);
      std::vector<Var> tau(Q);
      for (int q = 0; q < Q; ++q) tau[q] = mean(sigmoid(matmul(proj[q] - mu, pv["pool.theta"])));
      beta = softmax(concat_cols(tau));
    } else {
      beta = t.constant(Mat::Constant(1, Q, 1.0 / Q));
    }
    if (fidx == L) out.beta = beta.value().row(0).transpose();

    std::vector<Var> zeta_l;
    for (int q = 0; q < Q; ++q) zeta_l.push_back(kappa_scale(pick(beta, 0, q), entry[q], curv[q]));
    for (Var e : enc_blocks) zeta_l.push_back(e);

    Var w = pick(eps, 0, fidx);
    for (std::size_t b = 0; b < zeta_l.size(); ++b) {
      const Curvature& c = b < static_cast<std::size_t>(Q) ? curv[b] : enc_curv[b - Q];
      Var term = log0(zeta_l[b], c) * w;
      if (fidx == 0)
        mixed.push_back(term);
      else
        mixed[b] = mixed[b] + term;
    }
  }

  out.curvature = curv;
  out.curvature.insert(out.curvature.end(), enc_curv.begin(), enc_curv.end());
  for (std::size_t b = 0; b < mixed.size(); ++b) out.zeta.push_back(exp0(mixed[b], out.curvature[b]));
  out.epsilon = eps.value().row(0).transpose();

  if (cfg.task == Task::NodeClassification) {
    std::vector<Var> flat;
    for (std::size_t b = 0; b < out.zeta.size(); ++b) flat.push_back(log0(out.zeta[b], out.curvature[b]));
    out.logits = matmul(concat_cols(flat), pv["head.weight"]) + pv["head.bias"];
  }
  return out;
}

// Fermi-Dirac logits (r - d^2)/t for node pairs; sigmoid gives the edge probability.
inline ad::Var lp_logits(const ForwardResult& fr, const std::vector<std::pair<int, int>>& pairs,
                         const ModelConfig& cfg) {
  if (pairs.empty()) throw InputError("link prediction: no pairs to score");
  std::vector<int> us, vs;
  for (auto [u, v] : pairs) {
    us.push_back(u);
    vs.push_back(v);
  }
  ad::Var d2;
  for (std::size_t b = 0; b < fr.zeta.size(); ++b) {
    ad::Var term = ad::squared_distance(ad::gather_rows(fr.zeta[b], us), ad::gather_rows(fr.zeta[b], vs), fr.curvature[b]);
    d2 = b == 0 ? term : d2 + term;
  }
  return (cfg.lp_radius - d2) * (1.0 / cfg.lp_temperature);
}

inline ad::Var weight_penalty(const ParamVars& pv, const ModelParams& p, double weight_decay) {
  ad::Var acc;
  bool any = false;
  for (const auto& [name, v] : pv.vars) {
    if (p.frozen.count(name) || p.no_decay.count(name)) continue;
    ad::Var s = ad::sum(ad::square(v));
    acc = any ? acc + s : s;
    any = true;
  }
  if (!any) return pv.vars.begin()->second.tape->constant(0.0);
  return acc * (0.5 * weight_decay);
}

// Supervision for one loss evaluation.
struct Objective {
  // NC
  std::vector<int> rows;
  std::vector<int> labels;  // indexed by node
  // LP
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> targets;
  double weight_decay = 0.0;
};

inline ad::Var loss(const ForwardResult& fr, const ParamVars& pv, const ModelParams& p, const ModelConfig& cfg,
                    const Objective& obj) {
  ad::Var data = cfg.task == Task::NodeClassification
                     ? ad::cross_entropy(fr.logits, obj.rows, obj.labels)
                     : ad::bce_with_logits(lp_logits(fr, obj.pairs, cfg), obj.targets);
  if (obj.weight_decay == 0.0) return data;
  return data + weight_penalty(pv, p, obj.weight_decay);
}

// Loss value and, if requested, the gradient of every trainable tensor.
struct LossEval {
  double value = 0.0;
  std::map<std::string, Eigen::MatrixXd> grads;
  std::uint64_t branch = 0;
};

inline LossEval evaluate_loss(const ModelParams& p, const ModelInputs& in, const ModelConfig& cfg, const Objective& obj,
                              bool with_grad, std::mt19937_64* dropout_rng = nullptr) {
  ad::Tape t;
  ParamVars pv = bind_params(t, p, with_grad);
  ForwardResult fr = forward(t, pv, in, cfg, dropout_rng);
  ad::Var l = loss(fr, pv, p, cfg, obj);
  LossEval r;
  r.value = l.scalar();
  r.branch = t.branch_hash();
  if (!std::isfinite(r.value)) throw NumericalError("model: non-finite loss");
  if (with_grad) {
    t.backward(l);
    for (const auto& [name, v] : pv.vars)
      if (!p.frozen.count(name)) r.grads[name] = t.grad(v);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradientProbe {
  std::string tensor;
  Eigen::Index row = 0, col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool excluded = false;  // central difference crossed a non-smooth branch
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradientProbe> probes;
  int excluded = 0;
};

// Central differences with step h at randomly chosen scalar parameters,
// evaluated without dropout. Probes whose perturbation flips a projection or
// other branch are excluded and counted.
inline GradientCheckReport gradient_check(const ModelParams& params, const ModelInputs& in, const ModelConfig& cfg,
                                          const Objective& obj, int n_probes, std::uint64_t seed, double h = 1e-5) {
  detail::require(n_probes >= 1, "gradient_check: need at least one probe");
  LossEval base = evaluate_loss(params, in, cfg, obj, true);

  std::vector<std::pair<std::string, Eigen::Index>> slots;
  for (const auto& [name, m] : params.values)
    if (!params.frozen.count(name))
      for (Eigen::Index k = 0; k < m.size(); ++k) slots.emplace_back(name, k);
  detail::require(!slots.empty(), "gradient_check: no trainable parameters");
  std::mt19937_64 rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(std::min<std::size_t>(slots.size(), static_cast<std::size_t>(n_probes)));

  GradientCheckReport rep;
  for (const auto& [name, k] : slots) {
    ModelParams plus = params, minus = params;
    plus.values[name].data()[k] += h;
    minus.values[name].data()[k] -= h;
    LossEval lp = evaluate_loss(plus, in, cfg, obj, false);
    LossEval lm = evaluate_loss(minus, in, cfg, obj, false);
    GradientProbe pr;
    pr.tensor = name;
    const Eigen::Index rows = params.values.at(name).rows();
    pr.row = k % rows;
    pr.col = k / rows;
    pr.analytic = base.grads.at(name).data()[k];
    pr.numeric = (lp.value - lm.value) / (2.0 * h);
    if (!std::isfinite(pr.analytic) || !std::isfinite(pr.numeric)) throw NumericalError("gradient_check: NaN gradient");
    pr.rel_error = std::abs(pr.analytic - pr.numeric) / std::max(1e-8, std::abs(pr.numeric));
    pr.excluded = lp.branch != base.branch || lm.branch != base.branch;
    if (pr.excluded)
      ++rep.excluded;
    else
      rep.max_rel_error = std::max(rep.max_rel_error, pr.rel_error);
    rep.probes.push_back(pr);
  }
  return rep;
}

}  // namespace cusp
