#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "cusp/error.hpp"

namespace cusp {

struct Spectrum {
  Eigen::VectorXd eigenvalues;                 // ascending
  std::optional<Eigen::MatrixXd> eigenvectors;  // column i pairs with eigenvalue i
};

// Dense symmetric eigendecomposition (Householder tridiagonalization + implicit QL/QR).
inline Spectrum spectrum(const Eigen::MatrixXd& m, bool with_vectors = true) {
  if (m.rows() != m.cols()) throw InputError("spectrum: matrix is not square");
  if (m.size() == 0) return {Eigen::VectorXd(0), with_vectors ? std::optional(Eigen::MatrixXd(0, 0)) : std::nullopt};
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw InputError("spectrum: matrix is not symmetric (max |M - M^T| = " + std::to_string(asym) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      m, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigensolver did not converge");
  Spectrum s;
  s.eigenvalues = es.eigenvalues();
  if (with_vectors) s.eigenvectors = es.eigenvectors();
  return s;
}

// Fraction of the signal's energy carried by each eigenvector: fhat_i^2 / sum_j fhat_j^2.
inline Eigen::VectorXd spectral_energy(const Spectrum& s, const Eigen::VectorXd& f) {
  if (!s.eigenvectors) throw InputError("spectral_energy: spectrum has no eigenvectors");
  if (f.size() != s.eigenvectors->rows()) throw InputError("spectral_energy: signal length mismatch");
  const double total = f.squaredNorm();
  if (!(total > 0.0)) throw InputError("spectral_energy: zero signal");
  Eigen::VectorXd fhat = s.eigenvectors->transpose() * f;
  Eigen::VectorXd e = fhat.array().square();
  return e / e.sum();
}

}  // namespace cusp
