#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nortasp/errors.hpp"

namespace nortasp {

// Gauss-Hermite rule for expectations under the standard normal density:
// E[f(Z)] ~= sum_i weights[i] * f(nodes[i]).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// probabilists' Hermite recurrence, weights the squared first components of
// the normalized eigenvectors.
inline GaussHermiteRule make_gauss_hermite(std::size_t degree) {
  if (degree == 0) throw ContractError("gauss_hermite: degree must be positive");
  const auto n = static_cast<Eigen::Index>(degree);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
  for (Eigen::Index k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("gauss_hermite: eigensolver failed");

  GaussHermiteRule rule;
  rule.nodes.resize(degree);
  rule.weights.resize(degree);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    rule.weights[static_cast<std::size_t>(i)] = v0 * v0;
    total += v0 * v0;
  }
  // Symmetrize so that odd moments vanish exactly.
  for (std::size_t i = 0; i < degree / 2; ++i) {
    const std::size_t j = degree - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]) / total;
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (degree % 2 == 1) {
    rule.nodes[degree / 2] = 0.0;
    rule.weights[degree / 2] /= total;
  }
  return rule;
}

// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

inline GaussLegendreRule make_gauss_legendre(std::size_t degree) {
  if (degree == 0) throw ContractError("gauss_legendre: degree must be positive");
  const auto n = static_cast<Eigen::Index>(degree);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
  for (Eigen::Index k = 1; k < n; ++k) {
    const auto kk = static_cast<double>(k);
    sub(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("gauss_legendre: eigensolver failed");

  GaussLegendreRule rule;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.nodes.push_back(es.eigenvalues()(i));
    rule.weights.push_back(2.0 * v0 * v0);
  }
  return rule;
}

inline constexpr std::size_t kDefaultHermiteDegree = 96;

inline const GaussHermiteRule& default_gauss_hermite() {
  static const GaussHermiteRule rule = make_gauss_hermite(kDefaultHermiteDegree);
  return rule;
}

inline const GaussLegendreRule& default_gauss_legendre() {
  static const GaussLegendreRule rule = make_gauss_legendre(16);
  return rule;
}

}  // namespace nortasp
