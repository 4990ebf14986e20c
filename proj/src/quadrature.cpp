#include "metabandit/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "metabandit/errors.hpp"

namespace metabandit {
namespace {

// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix of
// the Hermite recurrence (zero diagonal, off-diagonal sqrt(k/2)); weights are
// sqrt(pi) times the squared first eigenvector components. Nodes are then
// polished by Newton steps on the orthonormal recurrence while it stays finite.
GaussHermiteRule build_rule(int n) {
  constexpr double kSqrtPi = 1.77245385090551602730;
  constexpr double kPiM4 = 0.75112554446494248286;  // pi^(-1/4)

  GaussHermiteRule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {kSqrtPi};
    return rule;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw DomainError("Gauss-Hermite eigenproblem failed");

  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = solver.eigenvalues()[i];
    double w = kSqrtPi * solver.eigenvectors()(0, i) * solver.eigenvectors()(0, i);
    for (int it = 0; it < 3; ++it) {
      double p1 = kPiM4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      const double pp = std::sqrt(2.0 * n) * p2;
      if (!std::isfinite(p1) || !std::isfinite(pp) || pp == 0.0) break;
      const double step = p1 / pp;
      if (std::abs(step) > 1e-6 * std::max(1.0, std::abs(z))) break;
      z -= step;
      w = 2.0 / (pp * pp);
    }
    rule.nodes[i] = z;
    rule.weights[i] = w;
  }
  // Exact symmetry.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int size) {
  if (size < 1) throw DomainError("Gauss-Hermite rule needs at least one node");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[size];
  if (!slot) slot = std::make_unique<GaussHermiteRule>(build_rule(size));
  return *slot;
}

}  // namespace metabandit
