#pragma once

#include "polyperturb/common.hpp"
#include "polyperturb/geometry.hpp"
#include "polyperturb/quadrature.hpp"
#include "polyperturb/transport.hpp"

#include <map>
#include <optional>
#include <vector>

namespace polyperturb {

/// Affine functional a.y + b on a facet chart.
struct AffinePiece {
  Vec a;
  double b = 0.0;
  double value(const Vec& y) const { return a.dot(y) + b; }
};

/// Piecewise affine concave density on one facet: value = min over pieces,
/// in the facet's chart coordinates. Pieces are pruned to an irredundant set
/// on construction. Values may be negative.
class PiecewiseAffineDensity {
public:
  PiecewiseAffineDensity(const Polytope& P, int facet, std::vector<AffinePiece> pieces);

  int facet() const { return facet_; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  double value(const Vec& chart_y) const;
  PiecewiseAffineDensity scaled(const Polytope& P, double s) const;

private:
  int facet_;
  std::vector<AffinePiece> pieces_;
};

enum class CanonicalKind { Shift, Hinge, Pyramid };

/// Densities of the basic perturbation examples: Shift = 1 on F,
/// Hinge = dist(., aff E) on F, Pyramid = dist(., relbd F) on F.
PiecewiseAffineDensity canonical_density(const Polytope& P, CanonicalKind kind, int facet,
                                         int edge = -1);

/// Signed measure on the boundary given per facet by a piecewise affine
/// concave density (facets without an entry carry the zero density).
struct DiscretePerturbation {
  std::map<int, PiecewiseAffineDensity> densities;  // keyed by facet index

  static DiscretePerturbation single(PiecewiseAffineDensity d);
  DiscretePerturbation scaled(const Polytope& P, double s) const;
};

/// Subdivision of the facet chart into simplices on which the density is
/// attained by a single affine piece (the lower-envelope cells).
std::vector<WeightedChartCell> envelope_cells(const Polytope& P,
                                              const PiecewiseAffineDensity& d);

/// int_{bd P} p dmu = sum over facets of the exact facet integral.
double pair(const Polytope& P, const DiscretePerturbation& mu, const Polynomial& p);

/// One-parameter polytope family realizing a discrete perturbation: min/max
/// envelopes of the shifted facet functionals over a generic direction v.
class PerturbedFamily {
public:
  PerturbedFamily(Polytope base, const DiscretePerturbation& mu, Vec v,
                  double delta_gen = kGenericMin);

  const Polytope& base() const { return base_; }
  const Vec& direction() const { return v_; }
  double t_max() const { return t_max_; }
  const std::vector<int>& positive_facets() const { return i_pos_; }
  const std::vector<int>& negative_facets() const { return i_neg_; }
  /// Shadow polytope pi_{v^perp}(P) as halfspaces in the v^perp chart.
  const std::vector<Halfspace>& shadow_halfspaces() const { return shadow_; }

  /// Evaluate the family at admissible t in [0, t_max].
  Polytope at(double t) const;

private:
  Polytope eval(double t) const;

  struct Channel {
    int facet;
    bool positive;                   // <u_i, v> > 0
    Vec h_lin;                       // h_i(y) = h_lin.y + h_const on v^perp coords
    double h_const;
    std::vector<AffinePiece> f_pieces;  // scaled canonical extension; min over pieces
  };

  Polytope base_;
  Vec v_;
  Mat W_;  // n x (n-1) orthonormal basis of v^perp
  std::vector<Channel> channels_;
  std::vector<int> i_pos_, i_neg_;
  std::vector<Halfspace> shadow_;
  double t_max_ = 0.0;
};

PerturbedFamily build_family(const Polytope& P, const DiscretePerturbation& mu, const Vec& v,
                             double delta_gen = kGenericMin);

/// Finite-difference quotients (int_{P_t} p - int_P p)/t along the family.
std::vector<std::pair<double, double>> weak_derivative_fd(const PerturbedFamily& fam,
                                                          const Polynomial& p,
                                                          const std::vector<double>& t_grid);

/// Rigid realization of the hinge example: the facet rotates around the edge
/// so that the dihedral angle at time t is exactly arcsin(t). Realizes the
/// same perturbation measure as the hinge density.
class HingeFamily {
public:
  HingeFamily(Polytope base, int facet, int edge);
  const Polytope& base() const { return base_; }
  int facet() const { return facet_; }
  Polytope at(double t) const;
  /// Outer normal of the hinged facet plane at time t.
  Vec hinged_normal(double t) const;

private:
  Polytope base_;
  int facet_;
  Vec u_;        // base facet normal
  Vec w_;        // unit vector in the facet plane, away from the edge
  Vec edge_pt_;  // point on aff E
};

/// Signed atoms for the measure with density (1_Q - 1_P) on a uniform grid
/// over the joint bounding box; weights from fixed midpoint sub-sampling.
SignedAtomicMeasure difference_measure_atoms(const Polytope& P, const Polytope& Q,
                                             int resolution, int cap = kResolutionCap);

/// Atom discretization of a discrete perturbation: refine each envelope cell
/// until its diameter is below bbox_diag/resolution and place the exact cell
/// mass at the cell centroid.
SignedAtomicMeasure discretize_perturbation(const Polytope& P, const DiscretePerturbation& mu,
                                            int resolution);

}  // namespace polyperturb
