// Trains a small model on a two-block SBM and prints the curvature summary,
// the estimated signature and the learned weights.

#include <iomanip>
#include <iostream>
#include <random>

#include "cusp/cusp.hpp"

int main() {
  using namespace cusp;

  gen::SbmParams sp;
  sp.block_sizes = {100, 100};
  sp.p_in = 0.1;
  sp.p_out = 0.01;
  sp.seed = 7;
  Graph g = gen::sbm(sp);
  const auto& y = *g.labels();

  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd f(g.num_nodes(), 8);
  for (int x = 0; x < g.num_nodes(); ++x)
    for (int j = 0; j < 8; ++j) f(x, j) = noise(rng) + (y[x] == j % 2 ? 1.0 : 0.0);

  OrcResult orc = compute_all(g, OrcConfig{});
  Histogram h = histogram(orc.edge_orc);
  std::vector<CurvatureBin> bins;
  for (int i = 0; i < static_cast<int>(h.counts.size()); ++i) bins.push_back({h.bin_center(i), double(h.counts[i])});
  SignatureEstimate est = estimate_signature(bins, SignatureOptions{});
  std::cout << "nodes " << g.num_nodes() << ", edges " << g.num_edges() << ", homophily " << homophily_ratio(g) << '\n';
  std::cout << "signature " << est.signature.to_string() << '\n';

  TrainConfig cfg;
  cfg.model.signature = est.signature;
  cfg.epochs = 60;
  Dataset data{g, f, y};
  TrainResult r = train(data, cfg);
  std::cout << std::setprecision(4) << "best epoch " << r.best_epoch << ", val F1 " << r.best_val << ", test F1 "
            << r.test_metric << '\n';
  std::cout << "beta";
  for (Eigen::Index q = 0; q < r.beta.size(); ++q) std::cout << ' ' << r.beta[q];
  std::cout << "\nlearned curvatures";
  for (double k : r.curvatures) std::cout << ' ' << k;
  std::cout << '\n';
}
