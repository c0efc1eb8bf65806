#pragma once

#include "polyperturb/common.hpp"
#include "polyperturb/geometry.hpp"
#include "polyperturb/quadrature.hpp"

#include <vector>

namespace polyperturb {

struct BodyMoments {
  double volume = 0.0;
  Vec centroid;
  Mat covariance;  // M_ij = (1/vol) int_{K-c} x_i x_j dx, symmetric positive definite
};

BodyMoments moments(const Polytope& P);

/// Map P to isotropic position: Q = T(P - c) with centroid 0 and normalized
/// covariance I. T is the symmetric inverse square root of the covariance
/// (unique choice; the isotropic position itself is defined up to rotations).
std::pair<Polytope, AffineMap> to_isotropic(const Polytope& P, double cond_cap = 1e8);

/// L_K = (det[int_{K-c} x x^T] / vol^{n+2})^(1/2n).
double isotropic_constant(const Polytope& P);

enum class MomentKind { Volume, MomentOfInertia, IsotropicConstant2n };

/// Moment functional phi(K) = g(int_K f_1, ..., int_K f_m) from a fixed
/// registry of kinds with hand-coded combiner gradients. The gradient rule is
/// validated by finite differences at construction.
class CompositeMomentFunctional {
public:
  CompositeMomentFunctional(MomentKind kind, int dim);

  MomentKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const std::vector<Polynomial>& integrands() const { return integrands_; }

  Vec integral_vector(const Polytope& P) const;
  double combiner(const Vec& y) const;
  Vec combiner_gradient(const Vec& y) const;
  double value(const Polytope& P) const { return combiner(integral_vector(P)); }

private:
  void validate_gradient() const;

  MomentKind kind_;
  int dim_;
  std::vector<Polynomial> integrands_;
};

/// h_{phi,P} = sum_i dg/dy_i (int_P f_1, ...) * f_i. For IsotropicConstant2n
/// the polytope must be isotropic within iso_tol and the exact closed form
/// (|x|^2 - n - 2)/vol^3 is returned.
Polynomial h_function(const CompositeMomentFunctional& phi, const Polytope& P,
                      double iso_tol = kIsotropyTol);

/// Max deviation from isotropic position: max(|centroid|_inf, |M - I|_inf).
double isotropy_defect(const Polytope& P);

}  // namespace polyperturb
