#pragma once

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/orc.hpp"
#include "cusp/spectrum.hpp"

namespace cusp {

// exp(-1 / (1 - k)). Zero at k = 1 by continuity; decreasing in k.
inline double curvature_weight(double orc) {
  if (std::isnan(orc) || orc > 1.0) throw InputError("curvature_weight: curvature " + std::to_string(orc) + " exceeds 1");
  if (orc == 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - orc));
}

// Curvature-weighted Laplacian and its normalized variants. Edges whose
// curvature weight vanishes are absent from the adjacency.
struct CuspLaplacian {
  std::vector<double> weights;  // per graph edge: wbar * native weight
  SparseMatrix adjacency;       // A~
  Eigen::VectorXd degrees;      // diag of D~
  SparseMatrix laplacian;       // L~ = D~ - A~
  SparseMatrix norm_adjacency;  // D~^{-1/2} A~ D~^{-1/2}
  SparseMatrix norm_laplacian;  // I - norm_adjacency
};

inline CuspLaplacian build_cusp_laplacian(const Graph& g, const OrcResult& orc) {
  if (static_cast<int>(orc.edge_orc.size()) != g.num_edges())
    throw InputError("cusp laplacian: curvature does not cover every edge");
  CuspLaplacian cl;
  cl.weights.resize(g.num_edges());
  for (int i = 0; i < g.num_edges(); ++i)
    cl.weights[i] = curvature_weight(clamp_curvature(orc.edge_orc[i])) * g.edges()[i].weight;
  cl.adjacency = adjacency(g, cl.weights);
  cl.degrees = cl.adjacency * Eigen::VectorXd::Ones(g.num_nodes());
  for (NodeId x = 0; x < g.num_nodes(); ++x) {
    if (cl.degrees[x] > 0.0) continue;
    if (g.degree(x) > 0)
      throw InputError("cusp laplacian: node " + std::to_string(x) +
                       " has zero weighted degree (all incident curvatures equal 1)");
    throw InputError("cusp laplacian: node " + std::to_string(x) + " is isolated");
  }
  SparseMatrix d(g.num_nodes(), g.num_nodes());
  d.reserve(Eigen::VectorXi::Constant(g.num_nodes(), 1));
  for (NodeId x = 0; x < g.num_nodes(); ++x) d.insert(x, x) = cl.degrees[x];
  cl.laplacian = d - cl.adjacency;
  cl.norm_adjacency = normalize_symmetric(cl.adjacency);
  SparseMatrix eye(g.num_nodes(), g.num_nodes());
  eye.setIdentity();
  cl.norm_laplacian = eye - cl.norm_adjacency;
  return cl;
}

struct SpectrumReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
  bool psd = false;
  bool in_range = false;
  double kernel_vector_residual = 0.0;
  Eigen::VectorXd eigenvalues;

  bool pass() const { return psd && in_range && kernel_vector_residual <= 1e-8; }
};

// Checks the normalized CUSP Laplacian: positive semidefinite, spectrum
// inside [0, 2], and sqrt(D~) (normalized) in its kernel.
inline SpectrumReport verify_spectrum(const CuspLaplacian& cl) {
  SpectrumReport r;
  Spectrum s = spectrum(Eigen::MatrixXd(cl.norm_laplacian), false);
  r.eigenvalues = s.eigenvalues;
  r.min_eig = s.eigenvalues.size() ? s.eigenvalues.minCoeff() : 0.0;
  r.max_eig = s.eigenvalues.size() ? s.eigenvalues.maxCoeff() : 0.0;
  r.psd = r.min_eig >= -1e-9;
  r.in_range = r.max_eig <= 2.0 + 1e-9;
  Eigen::VectorXd tau = cl.degrees.cwiseSqrt();
  tau /= tau.norm();
  r.kernel_vector_residual = (cl.norm_laplacian * tau).norm();
  return r;
}

inline void print_report(std::ostream& out, const SpectrumReport& r) {
  out << (r.pass() ? "PASS" : "FAIL") << " min_eig=" << r.min_eig << " max_eig=" << r.max_eig
      << " psd=" << (r.psd ? "true" : "false") << " in_range=" << (r.in_range ? "true" : "false")
      << " kernel_vector_residual=" << r.kernel_vector_residual << '\n';
}

}  // namespace cusp
