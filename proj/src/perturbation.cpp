#include "polyperturb/perturbation.hpp"

#include <algorithm>
#include <cmath>

namespace polyperturb {

namespace {

// Chart polytope of a facet: the facet's vertices in its own chart coordinates.
std::vector<Vec> facet_chart_vertices(const Polytope& P, const Face& F) {
  std::vector<Vec> out;
  out.reserve(F.vertices.size());
  for (int v : F.vertices) out.push_back(F.chart_coords(P.vertices()[v]));
  return out;
}

}  // namespace

PiecewiseAffineDensity::PiecewiseAffineDensity(const Polytope& P, int facet,
                                               std::vector<AffinePiece> pieces)
    : facet_(facet) {
  if (facet < 0 || facet >= static_cast<int>(P.facets().size()))
    throw DimensionMismatch("facet index out of range");
  if (pieces.empty()) throw DegenerateInput("density needs at least one piece");
  const Face& F = P.facets()[facet];
  for (const auto& p : pieces)
    if (p.a.size() != F.dim) throw DimensionMismatch("piece dimension vs facet chart");

  const auto verts = facet_chart_vertices(P, F);
  // Pairwise domination is exact: g - h is affine, so g <= h on the facet iff
  // g <= h at every facet vertex. Ties keep the earlier piece.
  std::vector<AffinePiece> kept;
  for (size_t i = 0; i < pieces.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < pieces.size() && !dominated; ++j) {
      if (j == i) continue;
      bool below = true;
      bool strictly = false;
      for (const auto& y : verts) {
        const double diff = pieces[j].value(y) - pieces[i].value(y);
        if (diff > 1e-12) below = false;
        if (diff < -1e-12) strictly = true;
      }
      if (below && (strictly || j < i)) dominated = true;
    }
    if (!dominated) kept.push_back(pieces[i]);
  }
  pieces_ = std::move(kept);
}

double PiecewiseAffineDensity::value(const Vec& y) const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& p : pieces_) v = std::min(v, p.value(y));
  return v;
}

PiecewiseAffineDensity PiecewiseAffineDensity::scaled(const Polytope& P, double s) const {
  // negating flips the min envelope to a max, which stays piecewise affine
  // concave only in the single-piece (affine) case
  if (s < 0 && pieces_.size() > 1)
    throw DegenerateInput("cannot negate a multi-piece concave density");
  std::vector<AffinePiece> pieces;
  for (const auto& p : pieces_) pieces.push_back({p.a * s, p.b * s});
  return PiecewiseAffineDensity(P, facet_, std::move(pieces));
}

PiecewiseAffineDensity canonical_density(const Polytope& P, CanonicalKind kind, int facet,
                                         int edge) {
  const int n = P.dim();
  const Face& F = P.facets().at(facet);
  const int d = F.dim;

  auto ridge_piece = [&](const Face& R) {
    // affine functional on the facet chart measuring the distance to aff R,
    // positive towards the facet's interior
    std::vector<Vec> rverts;
    for (int v : R.vertices) rverts.push_back(F.chart_coords(P.vertices()[v]));
    const Vec r0 = rverts[0];
    Vec w;
    if (d == 1) {
      w = Vec::Ones(1);
    } else {
      const Mat RB = affine_basis(rverts, P.eps());  // (d x (d-1)) in chart coords
      // normal within the chart = orthogonal complement of the ridge directions
      Eigen::FullPivHouseholderQR<Mat> qr(RB);
      w = qr.matrixQ().col(d - 1);
    }
    // chart origin is the facet's relative-interior point; orient towards it
    if (w.dot(r0) > 0) w = -w;
    return AffinePiece{w, -w.dot(r0)};
  };

  switch (kind) {
    case CanonicalKind::Shift:
      return PiecewiseAffineDensity(P, facet, {AffinePiece{Vec::Zero(d), 1.0}});
    case CanonicalKind::Hinge: {
      if (n - 2 < 0) throw EdgeNotInFacet("no edges in this dimension");
      const auto& edges = P.faces(n - 2);
      if (edge < 0 || edge >= static_cast<int>(edges.size()))
        throw EdgeNotInFacet("edge index out of range");
      const Face& E = edges[edge];
      if (!std::includes(F.vertices.begin(), F.vertices.end(), E.vertices.begin(),
                         E.vertices.end()))
        throw EdgeNotInFacet("edge is not contained in the facet");
      return PiecewiseAffineDensity(P, facet, {ridge_piece(E)});
    }
    case CanonicalKind::Pyramid: {
      std::vector<AffinePiece> pieces;
      for (const auto& R : P.faces(n - 2)) {
        if (std::includes(F.vertices.begin(), F.vertices.end(), R.vertices.begin(),
                          R.vertices.end()))
          pieces.push_back(ridge_piece(R));
      }
      if (pieces.empty()) throw DegenerateInput("facet without ridges");
      return PiecewiseAffineDensity(P, facet, std::move(pieces));
    }
  }
  throw DegenerateInput("unknown canonical kind");
}

DiscretePerturbation DiscretePerturbation::single(PiecewiseAffineDensity d) {
  DiscretePerturbation mu;
  const int facet = d.facet();
  mu.densities.emplace(facet, std::move(d));
  return mu;
}

DiscretePerturbation DiscretePerturbation::scaled(const Polytope& P, double s) const {
  DiscretePerturbation out;
  for (const auto& [f, d] : densities) out.densities.emplace(f, d.scaled(P, s));
  return out;
}

std::vector<WeightedChartCell> envelope_cells(const Polytope& P,
                                              const PiecewiseAffineDensity& dens) {
  const Face& F = P.facets()[dens.facet()];
  const int d = F.dim;
  const auto& pieces = dens.pieces();
  std::vector<WeightedChartCell> cells;

  auto base_chart_simplices = [&]() {
    std::vector<Simplex> out;
    for (const auto& S : triangulate_face(P, F)) {
      Simplex c;
      for (const auto& p : S.points) c.points.push_back(F.chart_coords(p));
      out.push_back(std::move(c));
    }
    return out;
  };

  if (pieces.size() == 1) {
    for (auto& S : base_chart_simplices()) cells.push_back({std::move(S), pieces[0].a, pieces[0].b});
    return cells;
  }

  if (d == 1) {
    const auto verts = facet_chart_vertices(P, F);
    double lo = verts[0][0], hi = verts[0][0];
    for (const auto& v : verts) {
      lo = std::min(lo, v[0]);
      hi = std::max(hi, v[0]);
    }
    for (size_t i = 0; i < pieces.size(); ++i) {
      double clo = lo, chi = hi;
      for (size_t j = 0; j < pieces.size(); ++j) {
        if (j == i) continue;
        const double da = pieces[i].a[0] - pieces[j].a[0];
        const double db = pieces[j].b - pieces[i].b;
        if (std::abs(da) < 1e-14) {
          if (db < 0) clo = chi + 1;  // piece i never minimal against j
        } else if (da > 0) {
          chi = std::min(chi, db / da);
        } else {
          clo = std::max(clo, db / da);
        }
      }
      if (chi - clo > 1e-12) {
        Simplex seg;
        seg.points = {Vec::Constant(1, clo), Vec::Constant(1, chi)};
        cells.push_back({std::move(seg), pieces[i].a, pieces[i].b});
      }
    }
    return cells;
  }

  // d >= 2: each piece's cell is the chart polytope cut by domination halfspaces
  const auto cverts = facet_chart_vertices(P, F);
  const Polytope chart_poly = Polytope::from_vertices(cverts, P.eps());
  for (size_t i = 0; i < pieces.size(); ++i) {
    std::vector<Halfspace> hs = chart_poly.halfspaces();
    bool degenerate = false;
    for (size_t j = 0; j < pieces.size(); ++j) {
      if (j == i) continue;
      Vec a = pieces[i].a - pieces[j].a;
      double b = pieces[j].b - pieces[i].b;
      const double norm = a.norm();
      if (norm < 1e-14) {
        if (b < 0) degenerate = true;  // dominated everywhere
        continue;
      }
      hs.push_back({a / norm, b / norm});
    }
    if (degenerate) continue;
    try {
      const Polytope cell = Polytope::from_halfspaces(hs, P.eps());
      for (auto& S : triangulate(cell)) cells.push_back({std::move(S), pieces[i].a, pieces[i].b});
    } catch (const Empty&) {
    } catch (const DegenerateInput&) {
    }
  }
  return cells;
}

double pair(const Polytope& P, const DiscretePerturbation& mu, const Polynomial& p) {
  if (p.dim() != P.dim()) throw DimensionMismatch("polynomial dimension");
  double s = 0.0;
  for (const auto& [facet, dens] : mu.densities) {
    const Face& F = P.facets().at(facet);
    s += integrate_face_weighted(p, P, F, envelope_cells(P, dens));
  }
  return s;
}

PerturbedFamily::PerturbedFamily(Polytope base, const DiscretePerturbation& mu, Vec v,
                                 double delta_gen)
    : base_(std::move(base)), v_(std::move(v)) {
  const int n = base_.dim();
  if (v_.size() != n) throw DimensionMismatch("direction dimension");
  v_.normalize();
  for (const auto& h : base_.halfspaces())
    if (std::abs(h.u.dot(v_)) < delta_gen)
      throw NotGeneric("direction not generic for some facet normal");
  for (const auto& [facet, dens] : mu.densities)
    if (facet < 0 || facet >= static_cast<int>(base_.halfspaces().size()))
      throw DimensionMismatch("perturbation facet index out of range");

  // orthonormal basis of v^perp
  Eigen::FullPivHouseholderQR<Mat> qr(v_);
  W_ = Mat(n, n - 1);
  const Mat Q = qr.matrixQ();
  for (int c = 1; c < n; ++c) W_.col(c - 1) = Q.col(c);

  const auto& hs = base_.halfspaces();
  for (int i = 0; i < static_cast<int>(hs.size()); ++i) {
    Channel ch;
    ch.facet = i;
    const double ai = hs[i].u.dot(v_);
    ch.positive = ai > 0;
    (ch.positive ? i_pos_ : i_neg_).push_back(i);
    ch.h_lin = -(W_.transpose() * hs[i].u) / ai;
    ch.h_const = hs[i].b / ai;

    auto it = mu.densities.find(i);
    if (it == mu.densities.end()) {
      ch.f_pieces.push_back({Vec::Zero(n - 1), 0.0});
    } else {
      // canonical extension of the facet density composed with
      // pi_i^{-1}(y) = W y + h_i(y) v, rescaled by 1/|<u_i,v>|
      const Face& F = base_.facets()[i];
      for (const auto& piece : it->second.pieces()) {
        const Vec g = F.basis * piece.a;  // ambient gradient of the piece
        const double gv = g.dot(v_);
        Vec a = W_.transpose() * g + gv * ch.h_lin;
        double b = gv * ch.h_const - g.dot(F.origin) + piece.b;
        const double scale = 1.0 / std::abs(ai);
        ch.f_pieces.push_back({a * scale, b * scale});
      }
    }
    channels_.push_back(std::move(ch));
  }

  {  // shadow polytope pi_{v^perp}(P) = hull of projected vertices
    std::vector<Vec> proj;
    for (const auto& p : base_.vertices()) proj.push_back(W_.transpose() * p);
    if (n - 1 == 1) {
      double lo = proj[0][0], hi = proj[0][0];
      for (const auto& y : proj) {
        lo = std::min(lo, y[0]);
        hi = std::max(hi, y[0]);
      }
      shadow_.push_back({Vec::Ones(1), hi});
      shadow_.push_back({-Vec::Ones(1), -lo});
    } else {
      const Polytope sh = Polytope::from_vertices(proj, base_.eps());
      shadow_ = sh.halfspaces();
    }
  }

  {  // sanity: the envelope halfspaces at t = 0 reproduce the base polytope
    const Polytope p0 = eval(0.0);
    if (p0.vertices().size() != base_.vertices().size())
      throw DegenerateResult("family does not reproduce the base polytope at t=0");
    for (const auto& v : p0.vertices()) {
      bool matched = false;
      for (const auto& w : base_.vertices())
        if ((v - w).lpNorm<Eigen::Infinity>() <= 1e-6) {
          matched = true;
          break;
        }
      if (!matched)
        throw DegenerateResult("family does not reproduce the base polytope at t=0");
    }
  }

  // largest admissible grid value on the fixed geometric grid {1, 1/2, ...}
  t_max_ = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double t = std::ldexp(1.0, -k);
    try {
      (void)eval(t);
      t_max_ = t;
      break;
    } catch (const Error&) {
    }
  }
}

Polytope PerturbedFamily::eval(double t) const {
  std::vector<Halfspace> hs;
  for (const auto& ch : channels_) {
    for (const auto& piece : ch.f_pieces) {
      // positive: <v,x> <= h_i(Wx) + t*piece(Wx); negative mirrored
      const Vec lin = ch.h_lin + t * piece.a;
      const double cst = ch.h_const + t * piece.b;
      if (ch.positive)
        hs.push_back({v_ - W_ * lin, cst});
      else
        hs.push_back({-(v_ - W_ * (ch.h_lin - t * piece.a)), -(ch.h_const - t * piece.b)});
    }
  }
  try {
    return Polytope::from_halfspaces(hs, base_.eps());
  } catch (const Unbounded&) {
    // fall back to the cylinder over the shadow polytope; only needed when
    // the envelope intersection itself is unbounded
    for (const auto& sh : shadow_) hs.push_back({W_ * sh.u, sh.b});
    try {
      return Polytope::from_halfspaces(hs, base_.eps());
    } catch (const Error& e) {
      throw DegenerateResult(std::string("family evaluation degenerate: ") + e.what());
    }
  } catch (const Empty& e) {
    throw DegenerateResult(std::string("family evaluation empty: ") + e.what());
  } catch (const DegenerateInput& e) {
    throw DegenerateResult(std::string("family evaluation degenerate: ") + e.what());
  }
}

Polytope PerturbedFamily::at(double t) const {
  if (t < -1e-15 || t > t_max_ * (1 + 1e-12))
    throw RangeExceeded("t outside [0, t_max]");
  return eval(t);
}

PerturbedFamily build_family(const Polytope& P, const DiscretePerturbation& mu, const Vec& v,
                             double delta_gen) {
  return PerturbedFamily(P, mu, v, delta_gen);
}

std::vector<std::pair<double, double>> weak_derivative_fd(const PerturbedFamily& fam,
                                                          const Polynomial& p,
                                                          const std::vector<double>& t_grid) {
  const double base_integral = integrate_polytope(p, fam.base());
  std::vector<std::pair<double, double>> out;
  for (double t : t_grid) {
    if (t <= 0) throw RangeExceeded("t grid must be strictly positive");
    const Polytope Pt = fam.at(t);
    out.emplace_back(t, (integrate_polytope(p, Pt) - base_integral) / t);
  }
  return out;
}

HingeFamily::HingeFamily(Polytope base, int facet, int edge) : base_(std::move(base)), facet_(facet) {
  const int n = base_.dim();
  const Face& F = base_.facets().at(facet);
  const auto& edges = base_.faces(n - 2);
  if (edge < 0 || edge >= static_cast<int>(edges.size()))
    throw EdgeNotInFacet("edge index out of range");
  const Face& E = edges[edge];
  if (!std::includes(F.vertices.begin(), F.vertices.end(), E.vertices.begin(), E.vertices.end()))
    throw EdgeNotInFacet("edge is not contained in the facet");

  u_ = base_.halfspaces()[facet].u;
  edge_pt_ = base_.vertices()[E.vertices[0]];
  // unit vector in the facet plane, orthogonal to the edge, towards the facet
  Vec dir = F.origin - edge_pt_;
  dir -= u_ * u_.dot(dir);
  if (E.dim >= 1) {
    for (int c = 0; c < E.basis.cols(); ++c) dir -= E.basis.col(c) * E.basis.col(c).dot(dir);
  }
  const double norm = dir.norm();
  if (norm < 1e-12) throw DegenerateInput("facet centroid lies on the hinge edge");
  w_ = dir / norm;
}

Vec HingeFamily::hinged_normal(double t) const {
  if (t < 0 || t >= 1) throw RangeExceeded("hinge parameter must lie in [0,1)");
  const double theta = std::asin(t);
  return std::cos(theta) * u_ - std::sin(theta) * w_;
}

Polytope HingeFamily::at(double t) const {
  const Vec n_t = hinged_normal(t);
  std::vector<Halfspace> hs = base_.halfspaces();
  hs[facet_] = {n_t, n_t.dot(edge_pt_)};
  try {
    return Polytope::from_halfspaces(hs, base_.eps());
  } catch (const Error& e) {
    throw DegenerateResult(std::string("hinge evaluation failed: ") + e.what());
  }
}

SignedAtomicMeasure difference_measure_atoms(const Polytope& P, const Polytope& Q,
                                             int resolution, int cap) {
  const int n = P.dim();
  if (Q.dim() != n) throw DimensionMismatch("polytope dims");
  if (resolution < 1 || resolution > cap)
    throw ResolutionTooHigh("resolution outside [1, cap]");

  Vec lo = P.vertices()[0], hi = P.vertices()[0];
  for (const auto* poly : {&P, &Q})
    for (const auto& v : poly->vertices()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }

  const Vec cell = (hi - lo) / resolution;
  double cellvol = 1.0;
  for (int i = 0; i < n; ++i) cellvol *= cell[i];

  // fixed two-level sub-sampling: corners classify the cell (for convex sets
  // "all corners inside" is exact containment), 8 midpoints per axis estimate
  // the fraction on cells straddling a boundary
  auto midpoint_fraction = [&](const std::vector<int>& idx, int subs) {
    double frac = 0.0;
    std::vector<int> sub(n, 0);
    while (true) {
      Vec x(n);
      for (int i = 0; i < n; ++i)
        x[i] = lo[i] + (idx[i] + (sub[i] + 0.5) / subs) * cell[i];
      frac += (Q.contains(x, 0.0) ? 1.0 : 0.0) - (P.contains(x, 0.0) ? 1.0 : 0.0);
      int a = 0;
      while (a < n && ++sub[a] == subs) sub[a++] = 0;
      if (a == n) break;
    }
    return frac / std::pow(subs, n);
  };
  auto corner_class = [&](const std::vector<int>& idx, bool& uniform) {
    double first = 0.0;
    uniform = true;
    for (int mask = 0; mask < (1 << n); ++mask) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x[i] = lo[i] + (idx[i] + ((mask >> i) & 1)) * cell[i];
      const double inq = Q.contains(x, 1e-12) ? 1.0 : 0.0;
      const double inp = P.contains(x, 1e-12) ? 1.0 : 0.0;
      const double v = 2.0 * inq + inp;  // joint membership pattern
      if (mask == 0)
        first = v;
      else if (v != first)
        uniform = false;
    }
    return first;
  };

  std::vector<Vec> pts;
  std::vector<double> wts;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec center(n);
    for (int i = 0; i < n; ++i) center[i] = lo[i] + (idx[i] + 0.5) * cell[i];
    bool uniform = false;
    const double pattern = corner_class(idx, uniform);
    double frac;
    if (uniform) {
      const double inq = pattern >= 2.0 ? 1.0 : 0.0;
      const double inp = (pattern == 1.0 || pattern == 3.0) ? 1.0 : 0.0;
      frac = inq - inp;
    } else {
      frac = midpoint_fraction(idx, 8);
    }
    if (frac != 0.0) {
      pts.push_back(center);
      wts.push_back(cellvol * frac);
    }
    int a = 0;
    while (a < n && ++idx[a] == resolution) idx[a++] = 0;
    if (a == n) break;
  }
  return make_measure(std::move(pts), std::move(wts), kGeomEps,
                      std::max(kAtomCap, resolution * resolution * resolution));
}

namespace {

void bisect_to_diameter(std::vector<std::pair<Simplex, AffinePiece>>& cells, double target) {
  for (size_t i = 0; i < cells.size(); ++i) {
    while (cells[i].first.diameter() > target) {
      Simplex& S = cells[i].first;
      int bi = 0, bj = 1;
      double best = -1;
      const int k = static_cast<int>(S.points.size());
      for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
          const double d = (S.points[a] - S.points[b]).norm();
          if (d > best) {
            best = d;
            bi = a;
            bj = b;
          }
        }
      const Vec mid = 0.5 * (S.points[bi] + S.points[bj]);
      Simplex other = S;
      S.points[bj] = mid;
      other.points[bi] = mid;
      cells.push_back({std::move(other), cells[i].second});
    }
  }
}

}  // namespace

SignedAtomicMeasure discretize_perturbation(const Polytope& P, const DiscretePerturbation& mu,
                                            int resolution) {
  if (resolution < 1 || resolution > kResolutionCap)
    throw ResolutionTooHigh("resolution outside [1, cap]");
  const int n = P.dim();
  Vec lo = P.vertices()[0], hi = P.vertices()[0];
  for (const auto& v : P.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec cell = (hi - lo) / resolution;
  const double target = cell.minCoeff() / 4.0;

  // Bin exact per-simplex masses into the uniform grid cells, one atom per
  // cell at the mass-weighted centroid of its contributions. This aligns the
  // discretization with difference_measure_atoms on the shared bounding box.
  std::map<std::vector<int>, std::pair<double, Vec>> bins;  // mass, mass*position
  for (const auto& [facet, dens] : mu.densities) {
    const Face& F = P.facets().at(facet);
    std::vector<std::pair<Simplex, AffinePiece>> cells;
    for (auto& c : envelope_cells(P, dens)) cells.push_back({c.cell, {c.a, c.b}});
    bisect_to_diameter(cells, target);
    for (const auto& [S, piece] : cells) {
      const Vec yc = S.centroid();
      const double mass = S.volume() * piece.value(yc);  // exact for affine densities
      if (mass == 0.0) continue;
      const Vec x = F.chart_point(yc);
      std::vector<int> key(n);
      for (int i = 0; i < n; ++i) {
        const int k = cell[i] > 0 ? static_cast<int>((x[i] - lo[i]) / cell[i]) : 0;
        key[i] = std::clamp(k, 0, resolution - 1);
      }
      auto it = bins.find(key);
      if (it == bins.end())
        bins.emplace(std::move(key), std::make_pair(mass, Vec(mass * x)));
      else {
        it->second.first += mass;
        it->second.second += mass * x;
      }
    }
  }
  std::vector<Vec> pts;
  std::vector<double> wts;
  for (const auto& [key, acc] : bins) {
    if (std::abs(acc.first) < 1e-14) continue;
    pts.push_back(acc.second / acc.first);
    wts.push_back(acc.first);
  }
  return make_measure(std::move(pts), std::move(wts));
}

}  // namespace polyperturb
