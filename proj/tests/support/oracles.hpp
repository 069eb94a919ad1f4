#pragma once
// Test-only reference computations. Nothing here calls into the code path it
// is used to check.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "sketchsearch/autolabel.hpp"
#include "sketchsearch/geometry.hpp"
#include "sketchsearch/random.hpp"
#include "sketchsearch/semantics.hpp"

namespace oracle {

using namespace sketchsearch;

// Dense Monte Carlo estimate of p(c, l) from `n` states at uniformly random
// angles on the auto-labeling circle.
inline Eigen::MatrixXd random_ring_joint(const SoftmaxModel& model, Point2 centroid, double radius,
                                         int n, Rng& rng) {
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.size()), 8);
  for (int i = 0; i < n; ++i) {
    const double t = 2 * std::numbers::pi * uniform01(rng);
    const Point2 s = centroid + radius * Point2{std::cos(t), std::sin(t)};
    const auto p = model.probabilities(s);
    const auto labels = canonical_labels(t);
    for (int l = 0; l < 8; ++l) {
      if (!labels.test(static_cast<std::size_t>(l))) continue;
      for (std::size_t c = 0; c < p.size(); ++c) joint(static_cast<Eigen::Index>(c), l) += p[c];
    }
  }
  return joint / n;
}

// Uniform states in the disc of `radius`, optionally rejecting states inside
// `exclude`.
inline Eigen::MatrixXd random_disc_joint(const SoftmaxModel& model, Point2 centroid, double radius, int n,
                                         Rng& rng, const ConvexPolygon* exclude) {
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.size()), 8);
  int kept = 0;
  while (kept < n) {
    const double r = radius * std::sqrt(uniform01(rng));
    const double t = 2 * std::numbers::pi * uniform01(rng);
    const Point2 s = centroid + r * Point2{std::cos(t), std::sin(t)};
    if (exclude != nullptr && contains(*exclude, s)) continue;
    ++kept;
    const auto p = model.probabilities(s);
    const auto labels = canonical_labels(t);
    for (int l = 0; l < 8; ++l) {
      if (!labels.test(static_cast<std::size_t>(l))) continue;
      for (std::size_t c = 0; c < p.size(); ++c) joint(static_cast<Eigen::Index>(c), l) += p[c];
    }
  }
  return joint / n;
}

// Irregular pentagon in the style of the auto-labeling figure.
inline ConvexPolygon irregular_pentagon(Point2 offset = {500, 500}) {
  std::vector<Point2> v{{0, 0}, {60, -10}, {90, 40}, {40, 85}, {-20, 50}};
  for (auto& p : v) p = p + offset;
  return ConvexPolygon(v);
}

// log C(n, k)
inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// One-sided Fisher exact p-value P(X >= k1) by direct enumeration of the
// hypergeometric tail, for H1: p1 > p2.
inline double fisher_upper_tail(int k1, int n1, int k2, int n2) {
  const int total = k1 + k2;
  const int n = n1 + n2;
  double p = 0.0;
  for (int x = k1; x <= std::min(total, n1); ++x) {
    if (total - x > n2) continue;
    p += std::exp(log_choose(n1, x) + log_choose(n2, total - x) - log_choose(n, total));
  }
  return p;
}

// Exact forward filter on a discrete state space: prior, row-stochastic
// transition matrix and per-step likelihood vectors.
inline std::vector<std::vector<double>> grid_bayes(const std::vector<double>& prior,
                                                   const std::vector<std::vector<double>>& transition,
                                                   const std::vector<std::vector<double>>& likelihoods) {
  std::vector<std::vector<double>> out;
  std::vector<double> b = prior;
  for (const auto& lik : likelihoods) {
    std::vector<double> next(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) next[j] += b[i] * transition[i][j];
    }
    double z = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) z += (next[j] *= lik[j]);
    for (auto& v : next) v /= z;
    b = next;
    out.push_back(b);
  }
  return out;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return 0.5 * d;
}

}  // namespace oracle
