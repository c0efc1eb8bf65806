#pragma once

#include "polyperturb/common.hpp"
#include "polyperturb/geometry.hpp"
#include "polyperturb/isotropy.hpp"
#include "polyperturb/perturbation.hpp"
#include "polyperturb/quadrature.hpp"

#include <map>
#include <optional>
#include <variant>
#include <vector>

namespace polyperturb {

/// Refinement triangulation of one face, in chart coordinates.
struct FaceTriangulation {
  int face_dim = 0;
  std::vector<Vec> nodes;                // chart coordinates
  std::vector<std::vector<int>> cells;   // face_dim+1 node indices each

  Simplex cell_simplex(int c) const;
  /// Affine (a,b) with a.y+b interpolating the given node values on cell c.
  std::pair<Vec, double> cell_affine(int c, const std::vector<double>& values) const;
  bool matches(const FaceTriangulation& o, double tol = 1e-9) const;
};

/// Uniform refinement of the face's fan triangulation: r segments per edge in
/// dimension 1, the standard r^2 split per triangle in dimension 2, and
/// longest-edge bisection to diameter/r otherwise.
FaceTriangulation refine_face_triangulation(const Polytope& P, const Face& F, int refinement);

struct FaceKey {
  int dim = 0;
  int index = 0;
  auto operator<=>(const FaceKey&) const = default;
};

/// Function on the boundary of P: per proper face either a polynomial in
/// ambient coordinates or a piecewise-linear interpolant of node values on a
/// face triangulation. Faces without an entry carry the zero function.
class BoundaryFunction {
public:
  struct PLData {
    FaceTriangulation tri;
    std::vector<double> values;
  };

  static BoundaryFunction zero() { return BoundaryFunction(); }
  /// p on every proper face of P.
  static BoundaryFunction ambient(const Polytope& P, const Polynomial& p);
  static BoundaryFunction ambient_on(const std::vector<FaceKey>& faces, const Polynomial& p);

  void set_polynomial(FaceKey f, Polynomial p);
  void set_pl(FaceKey f, FaceTriangulation tri, std::vector<double> values);
  bool has(FaceKey f) const { return entries_.count(f) > 0; }
  const std::map<FaceKey, std::variant<Polynomial, PLData>>& entries() const { return entries_; }

private:
  std::map<FaceKey, std::variant<Polynomial, PLData>> entries_;
};

/// sum over proper faces of int_F f*g dvol_dimF (vol_0 = counting measure).
double boundary_inner_product(const BoundaryFunction& f, const BoundaryFunction& g,
                              const Polytope& P);

/// Element of the discretized perturbation cone: PL concave densities on facet
/// refinement triangulations plus lower-face densities -((a.y+b)_+)^(n-dim).
struct ConeFacetPart {
  int facet = 0;
  FaceTriangulation tri;
  std::vector<double> values;
};

struct ConeLowerPart {
  FaceKey face;
  Vec a;          // chart coefficients; density is -((a.y+b)_+)^(n-dim)
  double b = 0.0;
  double vertex_mass = 0.0;  // for dim-0 faces the element is -c*delta_v
};

struct ConeElement {
  std::vector<ConeFacetPart> facets;
  std::vector<ConeLowerPart> lower;
};

/// Per-facet residuals (int_F h, int_F h x_1, ..., int_F h x_n), projected
/// onto the facet's n-dimensional affine test space. All must vanish for weak
/// perturbation stability.
std::map<int, Vec> reversible_check(const Polytope& P, const CompositeMomentFunctional& phi,
                                    double iso_tol = kIsotropyTol);

struct FacetProjectionResult {
  double objective = 0.0;   // sum over facets of |h - g*|^2_{L2}
  double g_norm_sq = 0.0;   // |g*|^2 = <h, g*>
  double kkt_residual = 0.0;
  std::vector<ConeFacetPart> parts;
};

/// Metric projection of h onto the cone of PL concave facet densities,
/// independently per facet (the cone is a direct sum). Dykstra alternating
/// projections onto the hinge halfspaces in the mass-matrix metric.
FacetProjectionResult facet_cone_projection(const Polytope& P, const BoundaryFunction& h,
                                            int refinement, double kkt_tol = 1e-7,
                                            int max_cycles = 20000);

struct LowerFaceCertificate {
  FaceKey face;
  ConeLowerPart part;
  double normalized_pairing = 0.0;  // <h,g>/|g|
};

/// Best lower-face direction found by multistart derivative-free search over
/// the one-parameter-per-face family; vertices are handled exactly.
std::optional<LowerFaceCertificate> lower_face_search(const Polytope& P,
                                                      const Polynomial& h_poly, int restarts);

enum class Verdict { WeaklyStableWithinTol, UnstableWithCertificate, Inconclusive };

struct StabilityReport {
  std::map<int, Vec> reversible_residuals;
  double max_reversible_residual = 0.0;
  double projection_objective = 0.0;
  ConeElement best_direction;
  double inner_product = 0.0;  // <h, g> for the certificate direction
  double h_norm = 0.0;
  double g_norm = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  int refinement = 0;
  int restarts = 0;
  bool crosscheck_ran = false;
  double crosscheck_t = 0.0;
  double phi_base = 0.0;
  double phi_perturbed = 0.0;
};

StabilityReport stability_report(const Polytope& P, const CompositeMomentFunctional& phi,
                                 int refinement, int restarts,
                                 double stability_tol = kStabilityTol);

/// Realize the facet part of a cone element as a discrete perturbation.
DiscretePerturbation realize_cone_direction(const Polytope& P,
                                            const std::vector<ConeFacetPart>& parts);

struct CrosscheckRow {
  double t = 0.0;
  double slope = 0.0;  // (phi(P_t) - phi(P))/t
};

struct CrosscheckResult {
  double reference = 0.0;  // <h, g> = int h dmu_g
  std::vector<CrosscheckRow> rows;
};

/// First-order check: slopes of phi along the realized family against <h,g>.
CrosscheckResult first_order_crosscheck(const Polytope& P, const CompositeMomentFunctional& phi,
                                        const std::vector<ConeFacetPart>& g,
                                        const std::vector<double>& t_grid, int seed = 0);

}  // namespace polyperturb
