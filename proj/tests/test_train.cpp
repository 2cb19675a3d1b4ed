#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "cusp/config.hpp"
#include "cusp/train.hpp"

using namespace cusp;

namespace {

Dataset sbm_data(std::vector<int> blocks, double p_in, double p_out, std::uint64_t seed) {
  gen::SbmParams sp;
  sp.block_sizes = std::move(blocks);
  sp.p_in = p_in;
  sp.p_out = p_out;
  sp.seed = seed;
  Graph g = gen::sbm(sp);
  const auto& y = *g.labels();
  const int k = static_cast<int>(sp.block_sizes.size());
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> nd(0.0, 0.6);
  Eigen::MatrixXd f(g.num_nodes(), k);
  for (int x = 0; x < g.num_nodes(); ++x)
    for (int j = 0; j < k; ++j) f(x, j) = nd(rng) + (y[x] == j ? 1.0 : 0.0);
  return {g, f, y};
}

TrainConfig small_config() {
  TrainConfig c;
  c.model.signature = Signature::parse("H:4:-0.5,S:4:0.5,E:4:0");
  c.model.d_c = 4;
  c.model.d_pool = 4;
  c.model.L = 3;
  c.epochs = 15;
  c.lr = 0.02;
  return c;
}

}  // namespace

TEST(Metrics, MicroF1IsAccuracy) {
  Eigen::MatrixXd logits(4, 2);
  logits << 1, 0, 0, 1, 2, 1, 0, 3;
  std::vector<int> labels{0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(micro_f1(logits, {0, 1, 2, 3}, labels), 0.75);
  EXPECT_DOUBLE_EQ(micro_f1(logits, {2}, labels), 0.0);
  EXPECT_THROW(micro_f1(logits, {}, labels), InputError);
}

TEST(Metrics, AucRanksAndTies) {
  EXPECT_DOUBLE_EQ(roc_auc({3, 4}, {1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({1, 2}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc({1, 1, 1}, {1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(roc_auc({2, 0}, {1}), 0.5);
  EXPECT_DOUBLE_EQ(roc_auc({1, 3}, {1, 2}), 0.625);  // pairs: tie, lose, win, win
  EXPECT_THROW(roc_auc({}, {1}), InputError);
}

TEST(Metrics, AucMatchesPairCount) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 5);
  std::vector<double> pos(30), neg(25);
  for (auto& s : pos) s = u(rng);
  for (auto& s : neg) s = u(rng) - 1;
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  EXPECT_NEAR(roc_auc(pos, neg), wins / (30.0 * 25.0), 1e-14);
}

TEST(Splits, NodeFractionsAndDeterminism) {
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 4;
  NodeSplit a = split_nodes(labels, 4, {0.6, 0.2, 0.2}, 5);
  NodeSplit b = split_nodes(labels, 4, {0.6, 0.2, 0.2}, 5);
  EXPECT_EQ(a.train.size(), 60u);
  EXPECT_EQ(a.val.size(), 20u);
  EXPECT_EQ(a.test.size(), 20u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<int> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all.size(), 100u);
  NodeSplit c = split_nodes(labels, 4, {0.6, 0.2, 0.2}, 6);
  EXPECT_NE(a.train, c.train);
}

TEST(Splits, RedrawsUntilEveryClassIsInTrain) {
  std::vector<int> labels(40, 0);
  labels[7] = 1;
  labels[30] = 1;
  NodeSplit s = split_nodes(labels, 2, {0.2, 0.4, 0.4}, 0, 200);
  bool has1 = false;
  for (int x : s.train) has1 |= labels[x] == 1;
  EXPECT_TRUE(has1);
  EXPECT_GE(s.attempts, 1);
  std::vector<int> one_rare(40, 0);
  one_rare[3] = 1;
  EXPECT_THROW(split_nodes(one_rare, 2, {0.05, 0.05, 0.9}, 0, 2), InputError);
  EXPECT_THROW(split_nodes({0, 5, 1}, 2, {0.4, 0.3, 0.3}, 0), InputError);
}

TEST(Splits, EdgesAreDisjointAndKeepNodesConnected) {
  Dataset d = sbm_data({25, 25}, 0.3, 0.03, 4);
  const Graph& g = d.graph;
  EdgeSplit s = split_edges(g, {0.85, 0.05, 0.10}, 9);
  const int m = g.num_edges();
  EXPECT_EQ(static_cast<int>(s.train_pos.size() + s.val_pos.size() + s.test_pos.size()), m);
  EXPECT_EQ(s.val_pos.size(), static_cast<std::size_t>(std::lround(0.05 * m)));
  EXPECT_EQ(s.test_pos.size(), static_cast<std::size_t>(std::lround(0.10 * m)));
  std::set<std::uint64_t> keys;
  for (const auto* v : {&s.train_pos, &s.val_pos, &s.test_pos})
    for (auto [u, w] : *v) EXPECT_TRUE(keys.insert(detail::pair_key(u, w)).second);
  Graph train = g.edge_subgraph(s.train_edges);
  EXPECT_TRUE(train.isolated_nodes().empty());
  EXPECT_EQ(s.val_neg.size(), s.val_pos.size());
  EXPECT_EQ(s.test_neg.size(), s.test_pos.size());
  std::set<std::uint64_t> neg;
  for (const auto* v : {&s.val_neg, &s.test_neg})
    for (auto [u, w] : *v) {
      EXPECT_NE(u, w);
      EXPECT_FALSE(g.has_edge(u, w));
      EXPECT_TRUE(neg.insert(detail::pair_key(u, w)).second);
    }
  EdgeSplit again = split_edges(g, {0.85, 0.05, 0.10}, 9);
  EXPECT_EQ(again.test_pos, s.test_pos);
  EXPECT_EQ(again.val_neg, s.val_neg);
}

TEST(Splits, StarCannotHoldOutEdges) { EXPECT_THROW(split_edges(gen::star(6), {0.8, 0.1, 0.1}, 0), InputError); }

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParams p;
  p.values["w"] = Eigen::MatrixXd::Constant(1, 2, 1.0);
  p.values["f"] = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.frozen.insert("f");
  Adam opt;
  opt.lr = 0.1;
  Eigen::MatrixXd g(1, 2);
  g << 3.0, -0.5;
  opt.step(p, {{"w", g}, {"f", Eigen::MatrixXd::Ones(1, 1)}});
  EXPECT_NEAR(p.values["w"](0, 0), 0.9, 1e-8);
  EXPECT_NEAR(p.values["w"](0, 1), 1.1, 1e-8);
  EXPECT_EQ(p.values["f"](0, 0), 1.0);
}

TEST(Adam, MinimizesQuadratic) {
  ModelParams p;
  p.values["x"] = Eigen::MatrixXd::Constant(3, 1, 5.0);
  Adam opt;
  opt.lr = 0.05;
  for (int i = 0; i < 2000; ++i) opt.step(p, {{"x", 2.0 * (p.values["x"].array() - 1.0).matrix()}});
  EXPECT_LT((p.values["x"].array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(TrainConfig, Validation) {
  TrainConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.fractions()[0], 0.6);
  c.model.task = Task::LinkPrediction;
  EXPECT_EQ(c.fractions()[0], 0.85);
  c.split = std::array<double, 3>{0.5, 0.5, 0.0};
  EXPECT_THROW(c.validate(), InputError);
  c.split = std::array<double, 3>{0.5, 0.3, 0.3};
  EXPECT_THROW(c.validate(), InputError);
  c.split.reset();
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Train, NodeClassificationIsDeterministicAndLearns) {
  Dataset d = sbm_data({20, 20}, 0.3, 0.02, 11);
  TrainConfig c = small_config();
  c.seed = 3;
  TrainResult a = train(d, c), b = train(d, c);
  ASSERT_EQ(a.history.size(), 15u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_metric, b.history[i].val_metric);
  }
  EXPECT_EQ(a.test_metric, b.test_metric);
  EXPECT_LT(a.history.back().train_loss, a.history.front().train_loss);
  EXPECT_GE(a.best_val, 0.75);
  EXPECT_EQ(a.history[a.best_epoch - 1].val_metric, a.best_val);
  EXPECT_NEAR(a.beta.sum(), 1.0, 1e-12);
  EXPECT_NEAR(a.epsilon.sum(), 1.0, 1e-12);
  ASSERT_EQ(a.curvatures.size(), 3u);
  EXPECT_LT(a.curvatures[0], 0.0);
  EXPECT_GT(a.curvatures[1], 0.0);

  // The stored parameters reproduce the best validation score.
  Prepared prep = prepare(d, c);
  EXPECT_NEAR(metric(a.params, prep, d, c, true), a.best_val, 1e-12);
}

TEST(Train, LinkPredictionRuns) {
  Dataset d = sbm_data({20, 20}, 0.35, 0.02, 12);
  TrainConfig c = small_config();
  c.model.task = Task::LinkPrediction;
  c.epochs = 10;
  TrainResult r = train(d, c);
  EXPECT_GE(r.best_val, 0.0);
  EXPECT_LE(r.best_val, 1.0);
  EXPECT_GE(r.test_metric, 0.0);
  EXPECT_FALSE(r.params.values.count("head.weight"));
}

TEST(Train, RejectsMismatchedData) {
  Dataset d = sbm_data({10, 10}, 0.4, 0.05, 13);
  TrainConfig c = small_config();
  d.labels.pop_back();
  EXPECT_THROW(prepare(d, c), InputError);
}

TEST(Checkpoint, RoundTrip) {
  Dataset d = sbm_data({12, 12}, 0.4, 0.05, 14);
  TrainConfig c = small_config();
  c.epochs = 3;
  c.split = std::array<double, 3>{0.5, 0.25, 0.25};
  c.orc.method = OrcMethod::Sinkhorn;
  c.orc.sinkhorn_eps = 0.05;
  TrainResult r = train(d, c);
  auto path = (std::filesystem::temp_directory_path() / "cusp_test_ckpt.json").string();
  save_checkpoint(path, {c, r.params, r.best_val, r.best_epoch});
  Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.best_epoch, r.best_epoch);
  EXPECT_EQ(ck.best_val, r.best_val);
  EXPECT_EQ(ck.params.frozen, r.params.frozen);
  EXPECT_EQ(ck.params.no_decay, r.params.no_decay);
  ASSERT_EQ(ck.params.values.size(), r.params.values.size());
  for (const auto& [name, v] : r.params.values) EXPECT_EQ(ck.params.at(name), v) << name;
  EXPECT_EQ(config_to_json(ck.config), config_to_json(c));
  EXPECT_EQ(ck.config.model.signature.to_string(), c.model.signature.to_string());
  EXPECT_EQ(*ck.config.orc.sinkhorn_eps, 0.05);

  EXPECT_THROW(load_checkpoint("/nonexistent/ck.json"), InputError);
  {
    std::ofstream bad(path);
    bad << "{\"format\": \"cusp-checkpoint-1\"}";
  }
  EXPECT_THROW(load_checkpoint(path), InputError);
}

TEST(Config, DefaultsOverridesAndErrors) {
  Config cfg;
  EXPECT_EQ(cfg.str("model.L"), "10");
  std::istringstream in("# comment\nmodel.L = 4\n\ntrain.lr=0.01\ntrain.split = 0.5,0.25,0.25\n");
  cfg.read(in, "run.cfg");
  TrainConfig t = cfg.train();
  EXPECT_EQ(t.model.L, 4);
  EXPECT_DOUBLE_EQ(t.lr, 0.01);
  ASSERT_TRUE(t.split.has_value());
  EXPECT_DOUBLE_EQ((*t.split)[1], 0.25);

  std::istringstream bad("model.L = 4\nmodel.bogus = 1\n");
  try {
    Config c2;
    c2.read(bad, "run.cfg");
    FAIL();
  } catch (const InputError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("run.cfg:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model.bogus"), std::string::npos) << msg;
  }
  Config c3;
  c3.set("model.L", "four");
  EXPECT_THROW(c3.train(), InputError);
  EXPECT_THROW(c3.set_assignment("no equals sign"), InputError);
  EXPECT_THROW(Config().load("/nonexistent/run.cfg"), InputError);
}
