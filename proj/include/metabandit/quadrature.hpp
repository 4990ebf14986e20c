#pragma once

#include <vector>

namespace metabandit {

/// Nodes and weights for integrals of the form  ∫ f(x) exp(-x^2) dx.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch eigenvalue construction with Newton polishing. Rules are cached per
/// size; the returned reference stays valid for the life of the process.
const GaussHermiteRule& gauss_hermite(int size);

/// E[f(X)] for X ~ N(mean, stddev^2) via an n-node Gauss-Hermite rule.
template <class F>
double gaussian_expectation(F&& f, double mean, double stddev, int nodes) {
  const auto& rule = gauss_hermite(nodes);
  constexpr double kInvSqrtPi = 0.56418958354775628695;
  constexpr double kSqrt2 = 1.41421356237309504880;
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(mean + kSqrt2 * stddev * rule.nodes[i]);
  return acc * kInvSqrtPi;
}

}  // namespace metabandit
