#pragma once

#include "polyperturb/common.hpp"

#include <tuple>
#include <vector>

namespace polyperturb {

/// Finite signed measure given by weighted atoms. Construction deduplicates
/// points within eps (weights summed) and drops zero-weight atoms.
struct SignedAtomicMeasure {
  std::vector<Vec> points;
  std::vector<double> weights;

  double total_mass() const;      // sum of weights
  double positive_mass() const;   // sum of positive weights
  bool empty() const { return points.empty(); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
};

SignedAtomicMeasure make_measure(std::vector<Vec> points, std::vector<double> weights,
                                 double eps = kGeomEps, int atom_cap = kAtomCap);

SignedAtomicMeasure measure_sum(const SignedAtomicMeasure& a, const SignedAtomicMeasure& b,
                                double eps = kGeomEps);
SignedAtomicMeasure measure_scaled(const SignedAtomicMeasure& a, double s);

/// (mu+, mu-): positive part and negated negative part; supports disjoint.
std::pair<SignedAtomicMeasure, SignedAtomicMeasure> jordan_decompose(
    const SignedAtomicMeasure& mu);

double tv_norm(const SignedAtomicMeasure& mu);

struct TransferencePlan {
  std::vector<Vec> source;
  std::vector<Vec> target;
  std::vector<std::tuple<int, int, double>> flows;  // (source idx, target idx, mass)
};

/// Balanced optimal transport with Euclidean cost between two positive
/// measures of equal total mass. Exact transportation-simplex solve.
std::pair<double, TransferencePlan> wasserstein(const SignedAtomicMeasure& mu,
                                                const SignedAtomicMeasure& nu,
                                                double mass_tol = 1e-9);

/// Partial transport with unit-cost mass creation/destruction (flat metric):
/// min sum tau_ij |x_i-y_j| + (mu(X)-sum tau) + (nu(X)-sum tau), tau >= 0,
/// row sums <= mu_i, column sums <= nu_j.
double generalized_wasserstein(const SignedAtomicMeasure& mu, const SignedAtomicMeasure& nu);

/// |mu|_W = generalized Wasserstein distance between the Jordan parts.
double wasserstein_norm(const SignedAtomicMeasure& mu);

}  // namespace polyperturb
