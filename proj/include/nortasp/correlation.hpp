#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "nortasp/errors.hpp"

namespace nortasp {

// Symmetric matrix with unit diagonal and entries in [-1, 1]. Positive
// semidefiniteness is not part of the type; it holds for matrices produced by
// nearest_correlation().
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;

  explicit CorrelationMatrix(Eigen::MatrixXd entries, double tol = 1e-12)
      : m_(std::move(entries)) {
    if (m_.rows() != m_.cols()) throw ContractError("CorrelationMatrix: not square");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      if (std::abs(m_(i, i) - 1.0) > tol) {
        throw ContractError("CorrelationMatrix: diagonal entry " + std::to_string(i) +
                            " is not 1");
      }
      m_(i, i) = 1.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        if (!std::isfinite(m_(i, j)) || std::abs(m_(i, j) - m_(j, i)) > tol) {
          throw ContractError("CorrelationMatrix: not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
        }
        if (std::abs(m_(i, j)) > 1.0 + tol) {
          throw ContractError("CorrelationMatrix: entry outside [-1, 1]");
        }
        const double v = std::clamp(0.5 * (m_(i, j) + m_(j, i)), -1.0, 1.0);
        m_(i, j) = m_(j, i) = v;
      }
    }
  }

  static CorrelationMatrix identity(Eigen::Index n) {
    return CorrelationMatrix(Eigen::MatrixXd::Identity(n, n));
  }

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }

  double min_eigenvalue() const {
    if (m_.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  Eigen::MatrixXd m_;
};

struct NearestCorrelationOptions {
  double tolerance = 1e-9;  // Frobenius distance between successive iterates
  int max_iterations = 1000;
};

namespace detail {

inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd p = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (p + p.transpose());
}

}  // namespace detail

// Frobenius-nearest correlation matrix by alternating projections between the
// PSD cone and the unit-diagonal affine set, with Dykstra's correction on the
// (non-affine) cone projection.
inline CorrelationMatrix nearest_correlation(const Eigen::MatrixXd& a,
                                             const NearestCorrelationOptions& opt = {}) {
  // Validates symmetry, unit diagonal and range.
  const CorrelationMatrix input(a, 1e-10);
  const Eigen::Index n = input.dim();
  if (n == 0) return input;

  Eigen::MatrixXd y = input.matrix();
  Eigen::MatrixXd correction = Eigen::MatrixXd::Zero(n, n);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::MatrixXd r = y - correction;
    const Eigen::MatrixXd x = detail::project_psd(r);
    correction = x - r;
    Eigen::MatrixXd next = x;
    next.diagonal().setOnes();
    const double step = (next - y).norm();
    y = std::move(next);
    if (step <= opt.tolerance) break;
  }

  y = 0.5 * (y + y.transpose());
  y.diagonal().setOnes();

  // The unit-diagonal iterate can sit a hair outside the cone; pull it back
  // with a clipped spectrum and a diagonal rescale.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(1e-12);
    Eigen::MatrixXd p = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = p.diagonal().cwiseSqrt().cwiseInverse();
    y = d.asDiagonal() * p * d.asDiagonal();
    y = 0.5 * (y + y.transpose());
    y.diagonal().setOnes();
  }
  y = y.cwiseMax(-1.0).cwiseMin(1.0);
  return CorrelationMatrix(std::move(y), 1e-9);
}

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;  // diagonal shift that was needed for the factorization
};

// Y = L L^T, escalating a diagonal shift from 1e-10 when Y is numerically
// singular.
inline CholeskyFactor cholesky_with_jitter(const CorrelationMatrix& y) {
  const Eigen::Index n = y.dim();
  const Eigen::MatrixXd& a = y.matrix();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const Eigen::MatrixXd shifted = a + jitter * Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      const double err = (l * l.transpose() - shifted).cwiseAbs().maxCoeff();
      if (l.allFinite() && err <= 1e-10) return {std::move(l), jitter};
    }
    jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
  }
  throw NumericalError("cholesky: matrix is not positive semidefinite (jitter exhausted at " +
                       std::to_string(jitter) + ")");
}

}  // namespace nortasp
