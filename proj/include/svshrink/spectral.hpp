#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "svshrink/errors.hpp"

namespace svshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thin SVD of a data matrix: x = u * diag(lambdas) * v^T with
/// orthonormal-column u (N x m), v (P x m) and weakly decreasing
/// lambdas >= 0, m = min(N, P).
struct SpectralDecomposition {
  Matrix u;
  Matrix v;
  Vector lambdas;
  Index n_rows = 0;
  Index n_cols = 0;

  Index spectrum_size() const { return lambdas.size(); }
};

inline void require_finite(const Matrix& x, const char* who) {
  if (!x.allFinite()) {
    throw ValidationError(std::string(who) + ": input has non-finite entries");
  }
}

/// Thin SVD with two normalizations applied on top of the backend result:
/// singular values below 1e-12 * lambda_1 are clamped to exactly zero (so
/// strict-positivity rank counts are stable), and each left singular vector
/// is sign-flipped so its largest-magnitude entry is nonnegative (so repeated
/// decompositions of the same matrix are identical).
inline SpectralDecomposition decompose(const Matrix& x) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw ValidationError("decompose: matrix must be non-empty");
  }
  require_finite(x, "decompose");

  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw ComputationError("decompose: SVD backend did not converge");
  }

  SpectralDecomposition dec;
  dec.u = svd.matrixU();
  dec.v = svd.matrixV();
  dec.lambdas = svd.singularValues();
  dec.n_rows = x.rows();
  dec.n_cols = x.cols();

  const Index m = dec.lambdas.size();
  const double clamp = 1e-12 * (m > 0 ? dec.lambdas(0) : 0.0);
  for (Index i = 0; i < m; ++i) {
    if (dec.lambdas(i) < clamp) dec.lambdas(i) = 0.0;
  }
  for (Index j = 0; j < m; ++j) {
    Index imax = 0;
    dec.u.col(j).cwiseAbs().maxCoeff(&imax);
    if (dec.u(imax, j) < 0.0) {
      dec.u.col(j) = -dec.u.col(j);
      dec.v.col(j) = -dec.v.col(j);
    }
  }
  return dec;
}

/// Rebuilds sum_i u_i * d_hat_i * v_i^T from shrunk singular values.
inline Matrix reconstruct(const SpectralDecomposition& dec, const Vector& d_hat) {
  if (d_hat.size() != dec.spectrum_size()) {
    throw ValidationError("reconstruct: d_hat length " +
                          std::to_string(d_hat.size()) + " != spectrum size " +
                          std::to_string(dec.spectrum_size()));
  }
  return dec.u * d_hat.asDiagonal() * dec.v.transpose();
}

/// ||w_hat - w||_F^2 / ||w||_F^2. Equals 1 for the zero estimate.
inline double relative_mse(const Matrix& w_hat, const Matrix& w) {
  if (w_hat.rows() != w.rows() || w_hat.cols() != w.cols()) {
    throw ValidationError("relative_mse: shape mismatch");
  }
  const double denom = w.squaredNorm();
  if (denom <= 0.0) {
    throw ValidationError("relative_mse: reference matrix has zero norm");
  }
  return (w_hat - w).squaredNorm() / denom;
}

/// Number of strictly positive entries; the rank implied by a shrunk spectrum.
inline Index estimated_rank(const Vector& d_hat) {
  Index r = 0;
  for (Index i = 0; i < d_hat.size(); ++i) {
    if (d_hat(i) > 0.0) ++r;
  }
  return r;
}

}  // namespace svshrink
