#include "polyperturb/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace polyperturb {

Simplex FaceTriangulation::cell_simplex(int c) const {
  Simplex s;
  for (int id : cells[c]) s.points.push_back(nodes[id]);
  return s;
}

std::pair<Vec, double> FaceTriangulation::cell_affine(int c,
                                                      const std::vector<double>& values) const {
  const int d = face_dim;
  Mat A(d + 1, d + 1);
  Vec rhs(d + 1);
  for (int i = 0; i <= d; ++i) {
    A.block(i, 0, 1, d) = nodes[cells[c][i]].transpose();
    A(i, d) = 1.0;
    rhs[i] = values[cells[c][i]];
  }
  const Vec sol = A.fullPivLu().solve(rhs);
  return {sol.head(d), sol[d]};
}

bool FaceTriangulation::matches(const FaceTriangulation& o, double tol) const {
  if (face_dim != o.face_dim || nodes.size() != o.nodes.size() || cells != o.cells) return false;
  for (size_t i = 0; i < nodes.size(); ++i)
    if ((nodes[i] - o.nodes[i]).lpNorm<Eigen::Infinity>() > tol) return false;
  return true;
}

namespace {

struct NodePool {
  std::vector<Vec> nodes;
  int intern(const Vec& p, double tol = 1e-10) {
    for (size_t i = 0; i < nodes.size(); ++i)
      if ((nodes[i] - p).lpNorm<Eigen::Infinity>() <= tol) return static_cast<int>(i);
    nodes.push_back(p);
    return static_cast<int>(nodes.size()) - 1;
  }
};

}  // namespace

FaceTriangulation refine_face_triangulation(const Polytope& P, const Face& F, int refinement) {
  if (refinement < 1) throw DegenerateInput("refinement must be >= 1");
  const int d = F.dim;
  FaceTriangulation out;
  out.face_dim = d;
  if (d == 0) {
    out.nodes.push_back(Vec(0));
    out.cells.push_back({0});
    return out;
  }

  std::vector<Simplex> base;
  for (const auto& S : triangulate_face(P, F)) {
    Simplex c;
    for (const auto& p : S.points) c.points.push_back(F.chart_coords(p));
    base.push_back(std::move(c));
  }

  NodePool pool;
  if (d == 1) {
    for (const auto& S : base) {
      for (int k = 0; k < refinement; ++k) {
        const Vec a = S.points[0] + (S.points[1] - S.points[0]) * (double(k) / refinement);
        const Vec b = S.points[0] + (S.points[1] - S.points[0]) * (double(k + 1) / refinement);
        out.cells.push_back({pool.intern(a), pool.intern(b)});
      }
    }
  } else if (d == 2) {
    const int r = refinement;
    for (const auto& S : base) {
      auto lattice = [&](int i, int j) {
        return S.points[0] + (S.points[1] - S.points[0]) * (double(i) / r) +
               (S.points[2] - S.points[0]) * (double(j) / r);
      };
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r - i; ++j) {
          out.cells.push_back({pool.intern(lattice(i, j)), pool.intern(lattice(i + 1, j)),
                               pool.intern(lattice(i, j + 1))});
          if (i + j < r - 1)
            out.cells.push_back({pool.intern(lattice(i + 1, j)), pool.intern(lattice(i + 1, j + 1)),
                                 pool.intern(lattice(i, j + 1))});
        }
      }
    }
  } else {
    // longest-edge bisection until every cell is below diameter/refinement
    double diam = 0.0;
    for (const auto& S : base) diam = std::max(diam, S.diameter());
    const double target = diam / refinement;
    std::vector<Simplex> work = base;
    for (size_t i = 0; i < work.size(); ++i) {
      while (work[i].diameter() > target) {
        Simplex& S = work[i];
        int bi = 0, bj = 1;
        double best = -1;
        for (size_t a = 0; a < S.points.size(); ++a)
          for (size_t b = a + 1; b < S.points.size(); ++b)
            if ((S.points[a] - S.points[b]).norm() > best) {
              best = (S.points[a] - S.points[b]).norm();
              bi = static_cast<int>(a);
              bj = static_cast<int>(b);
            }
        const Vec mid = 0.5 * (S.points[bi] + S.points[bj]);
        Simplex other = S;
        S.points[bj] = mid;
        other.points[bi] = mid;
        work.push_back(std::move(other));
      }
    }
    for (const auto& S : work) {
      std::vector<int> cell;
      for (const auto& p : S.points) cell.push_back(pool.intern(p));
      out.cells.push_back(std::move(cell));
    }
  }
  out.nodes = std::move(pool.nodes);
  return out;
}

BoundaryFunction BoundaryFunction::ambient(const Polytope& P, const Polynomial& p) {
  BoundaryFunction f;
  for (int d = 0; d < P.dim(); ++d)
    for (int i = 0; i < static_cast<int>(P.faces(d).size()); ++i)
      f.entries_.emplace(FaceKey{d, i}, p);
  return f;
}

BoundaryFunction BoundaryFunction::ambient_on(const std::vector<FaceKey>& faces,
                                              const Polynomial& p) {
  BoundaryFunction f;
  for (const auto& k : faces) f.entries_.emplace(k, p);
  return f;
}

void BoundaryFunction::set_polynomial(FaceKey f, Polynomial p) {
  entries_.insert_or_assign(f, std::move(p));
}

void BoundaryFunction::set_pl(FaceKey f, FaceTriangulation tri, std::vector<double> values) {
  if (values.size() != tri.nodes.size())
    throw TriangulationMismatch("node value count does not match triangulation");
  entries_.insert_or_assign(f, PLData{std::move(tri), std::move(values)});
}

namespace {

double face_entry_product_integral(const Polytope& P, const Face& F,
                                   const std::variant<Polynomial, BoundaryFunction::PLData>& fe,
                                   const std::variant<Polynomial, BoundaryFunction::PLData>& ge) {
  const bool f_poly = std::holds_alternative<Polynomial>(fe);
  const bool g_poly = std::holds_alternative<Polynomial>(ge);

  if (F.dim == 0) {
    const Vec& v = P.vertices()[F.vertices[0]];
    const double fv = f_poly ? std::get<Polynomial>(fe).eval(v)
                             : std::get<BoundaryFunction::PLData>(fe).values.at(0);
    const double gv = g_poly ? std::get<Polynomial>(ge).eval(v)
                             : std::get<BoundaryFunction::PLData>(ge).values.at(0);
    return fv * gv;  // vol_0 = counting measure
  }

  if (f_poly && g_poly)
    return integrate_face(std::get<Polynomial>(fe) * std::get<Polynomial>(ge), P, F);

  if (!f_poly && !g_poly) {
    const auto& fd = std::get<BoundaryFunction::PLData>(fe);
    const auto& gd = std::get<BoundaryFunction::PLData>(ge);
    if (!fd.tri.matches(gd.tri))
      throw TriangulationMismatch("PL factors on different triangulations");
    double s = 0.0;
    for (int c = 0; c < static_cast<int>(fd.tri.cells.size()); ++c) {
      const auto [fa, fb] = fd.tri.cell_affine(c, fd.values);
      const auto [ga, gb] = gd.tri.cell_affine(c, gd.values);
      const Polynomial prod = Polynomial::affine(fa, fb) * Polynomial::affine(ga, gb);
      s += integrate_simplex(prod, fd.tri.cell_simplex(c));
    }
    return s;
  }

  const auto& poly = std::get<Polynomial>(f_poly ? fe : ge);
  const auto& pl = std::get<BoundaryFunction::PLData>(f_poly ? ge : fe);
  const Polynomial q = poly.compose_affine(F.basis, F.origin);
  double s = 0.0;
  for (int c = 0; c < static_cast<int>(pl.tri.cells.size()); ++c) {
    const auto [a, b] = pl.tri.cell_affine(c, pl.values);
    s += integrate_simplex(q * Polynomial::affine(a, b), pl.tri.cell_simplex(c));
  }
  return s;
}

}  // namespace

double boundary_inner_product(const BoundaryFunction& f, const BoundaryFunction& g,
                              const Polytope& P) {
  double s = 0.0;
  for (const auto& [key, fe] : f.entries()) {
    auto it = g.entries().find(key);
    if (it == g.entries().end()) continue;
    const Face& F = P.faces(key.dim).at(key.index);
    s += face_entry_product_integral(P, F, fe, it->second);
  }
  return s;
}

std::map<int, Vec> reversible_check(const Polytope& P, const CompositeMomentFunctional& phi,
                                    double iso_tol) {
  const int n = P.dim();
  const Polynomial h = h_function(phi, P, iso_tol);
  std::map<int, Vec> out;
  for (int i = 0; i < static_cast<int>(P.facets().size()); ++i) {
    const Face& F = P.facets()[i];
    Vec r(n + 1);
    r[0] = integrate_face(h, P, F);
    for (int k = 0; k < n; ++k) {
      std::vector<int> e(n, 0);
      e[k] = 1;
      r[k + 1] = integrate_face(h * Polynomial::monomial(n, e), P, F);
    }
    // the affine test space on aff F is n-dimensional: the combination
    // <u,x> - b vanishes identically, so project that direction out
    Vec kappa(n + 1);
    kappa[0] = -P.halfspaces()[i].b;
    kappa.tail(n) = P.halfspaces()[i].u;
    r -= kappa * (kappa.dot(r) / kappa.squaredNorm());
    out.emplace(i, std::move(r));
  }
  return out;
}

namespace {

// Hinge (second-difference) rows certifying concavity of a PL interpolant:
// one row per interior ridge shared by two cells.
std::vector<std::map<int, double>> concavity_rows(const FaceTriangulation& tri) {
  const int d = tri.face_dim;
  std::vector<std::map<int, double>> rows;
  if (d == 0) return rows;

  std::map<std::vector<int>, std::vector<std::pair<int, int>>> ridges;  // ridge -> (cell, opposite)
  for (int c = 0; c < static_cast<int>(tri.cells.size()); ++c) {
    const auto& cell = tri.cells[c];
    for (int skip = 0; skip <= d; ++skip) {
      std::vector<int> ridge;
      for (int i = 0; i <= d; ++i)
        if (i != skip) ridge.push_back(cell[i]);
      std::sort(ridge.begin(), ridge.end());
      ridges[ridge].push_back({c, cell[skip]});
    }
  }

  for (const auto& [ridge, owners] : ridges) {
    if (owners.size() != 2) continue;
    const int p = owners[0].second, q = owners[1].second;
    // express q as an affine combination of {ridge nodes, p}
    Mat A(d + 1, d + 1);
    Vec rhs(d + 1);
    for (int i = 0; i < d; ++i) A.block(0, i, d, 1) = tri.nodes[ridge[i]];
    A.block(0, d, d, 1) = tri.nodes[p];
    A.row(d).setOnes();
    rhs.head(d) = tri.nodes[q];
    rhs[d] = 1.0;
    const Vec beta = A.fullPivLu().solve(rhs);
    std::map<int, double> row;
    row[q] += 1.0;
    for (int i = 0; i < d; ++i) row[ridge[i]] -= beta[i];
    row[p] -= beta[d];
    rows.push_back(std::move(row));
  }
  return rows;
}

// PL mass matrix and load vector b_i = int_F h*hat_i for one facet.
void assemble_facet_system(const Face& F, const FaceTriangulation& tri,
                           const std::variant<Polynomial, BoundaryFunction::PLData>* h_entry,
                           Mat& M, Vec& b, double& h_sq) {
  const int d = F.dim;
  const int N = static_cast<int>(tri.nodes.size());
  M = Mat::Zero(N, N);
  b = Vec::Zero(N);
  h_sq = 0.0;

  const Polynomial* h_poly = nullptr;
  const BoundaryFunction::PLData* h_pl = nullptr;
  Polynomial q(d);
  if (h_entry) {
    if (std::holds_alternative<Polynomial>(*h_entry)) {
      h_poly = &std::get<Polynomial>(*h_entry);
      q = h_poly->compose_affine(F.basis, F.origin);
    } else {
      h_pl = &std::get<BoundaryFunction::PLData>(*h_entry);
      if (!h_pl->tri.matches(tri))
        throw TriangulationMismatch("h given on a different facet triangulation");
    }
  }

  for (int c = 0; c < static_cast<int>(tri.cells.size()); ++c) {
    const Simplex S = tri.cell_simplex(c);
    const double vol = S.volume();
    const auto& cell = tri.cells[c];
    for (int a = 0; a <= d; ++a)
      for (int e = 0; e <= d; ++e)
        M(cell[a], cell[e]) += vol * (a == e ? 2.0 : 1.0) / ((d + 1.0) * (d + 2.0));

    if (!h_entry) continue;
    Polynomial hc(d);
    if (h_poly) {
      hc = q;
    } else {
      const auto [a, bb] = h_pl->tri.cell_affine(c, h_pl->values);
      hc = Polynomial::affine(a, bb);
    }
    h_sq += integrate_simplex(hc * hc, S);
    // hat functions = barycentric coordinates on the cell
    for (int a = 0; a <= d; ++a) {
      Mat A(d + 1, d + 1);
      Vec rhs(d + 1);
      for (int i = 0; i <= d; ++i) {
        A.block(i, 0, 1, d) = tri.nodes[cell[i]].transpose();
        A(i, d) = 1.0;
        rhs[i] = (i == a) ? 1.0 : 0.0;
      }
      const Vec sol = A.fullPivLu().solve(rhs);
      b[cell[a]] += integrate_simplex(hc * Polynomial::affine(sol.head(d), sol[d]), S);
    }
  }
}

struct DykstraResult {
  Vec z;
  double kkt = 0.0;
  int cycles = 0;
};

// Projection of z0 onto {a_r.z <= 0} in the M-metric. Dykstra alternating
// projections onto the hinge halfspaces identify the active set; once it
// settles, an equality-constrained KKT solve on that set gives the exact
// minimizer (accepted only if primal feasible with nonnegative multipliers).
DykstraResult dykstra_project(const Mat& M, const Vec& z0,
                              const std::vector<std::map<int, double>>& rows, double kkt_tol,
                              int max_cycles) {
  const int N = static_cast<int>(z0.size());
  const int R = static_cast<int>(rows.size());
  DykstraResult res;
  res.z = z0;
  if (R == 0) return res;

  Eigen::LLT<Mat> llt(M);
  std::vector<Vec> a_dense(R), s(R);
  std::vector<double> d(R);
  for (int r = 0; r < R; ++r) {
    Vec a = Vec::Zero(N);
    for (const auto& [i, c] : rows[r]) a[i] = c;
    a_dense[r] = a;
    s[r] = llt.solve(a);
    d[r] = a.dot(s[r]);
  }

  const double scale = std::max(1.0, std::sqrt(z0.dot(M * z0)));

  auto kkt_residual = [&](const Vec& z, const Vec* lambda,
                          const std::vector<int>* active) {
    double feas = 0.0;
    for (int r = 0; r < R; ++r) feas = std::max(feas, a_dense[r].dot(z));
    double stat = std::abs((z0 - z).dot(M * z)) / (scale * scale);
    if (lambda && active) {
      Vec grad = M * (z - z0);
      for (size_t i = 0; i < active->size(); ++i) grad += (*lambda)[i] * a_dense[(*active)[i]];
      stat = std::max(stat, grad.lpNorm<Eigen::Infinity>() / scale);
    }
    return std::max(feas / scale, stat);
  };

  auto try_polish = [&](const Vec& z) -> bool {
    std::vector<int> active;
    for (int r = 0; r < R; ++r)
      if (a_dense[r].dot(z) > -1e-8 * scale) active.push_back(r);
    const int k = static_cast<int>(active.size());
    Mat K = Mat::Zero(N + k, N + k);
    K.topLeftCorner(N, N) = M;
    for (int i = 0; i < k; ++i) {
      K.block(0, N + i, N, 1) = a_dense[active[i]];
      K.block(N + i, 0, 1, N) = a_dense[active[i]].transpose();
    }
    Vec rhs(N + k);
    rhs.head(N) = M * z0;
    rhs.tail(k).setZero();
    const Vec sol = K.fullPivLu().solve(rhs);
    const Vec zs = sol.head(N);
    const Vec lambda = sol.tail(k);
    if (lambda.size() > 0 && lambda.minCoeff() < -1e-9) return false;
    const double r = kkt_residual(zs, &lambda, &active);
    if (r < kkt_tol) {
      res.z = zs;
      res.kkt = r;
      return true;
    }
    return false;
  };

  std::vector<Vec> corr(R, Vec::Zero(N));
  Vec z = z0;
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    for (int r = 0; r < R; ++r) {
      const Vec w = z + corr[r];
      const double viol = a_dense[r].dot(w);
      Vec proj = w;
      if (viol > 0) proj -= (viol / d[r]) * s[r];
      corr[r] = w - proj;
      z = proj;
    }
    res.cycles = cycle + 1;
    if ((cycle + 1) % 25 == 0 || cycle + 1 == max_cycles) {
      if (try_polish(z)) return res;
    }
  }
  res.z = z;
  res.kkt = kkt_residual(z, nullptr, nullptr);
  if (res.kkt >= kkt_tol)
    throw SolverStalled("Dykstra projection did not reach the KKT tolerance");
  return res;
}

}  // namespace

FacetProjectionResult facet_cone_projection(const Polytope& P, const BoundaryFunction& h,
                                            int refinement, double kkt_tol, int max_cycles) {
  FacetProjectionResult out;
  const int n = P.dim();
  for (int i = 0; i < static_cast<int>(P.facets().size()); ++i) {
    const Face& F = P.facets()[i];
    const FaceTriangulation tri = refine_face_triangulation(P, F, refinement);

    const FaceKey key{n - 1, i};
    const auto it = h.entries().find(key);
    const auto* entry = (it == h.entries().end()) ? nullptr : &it->second;

    Mat M;
    Vec b;
    double h_sq = 0.0;
    assemble_facet_system(F, tri, entry, M, b, h_sq);
    const Vec z0 = Eigen::LLT<Mat>(M).solve(b);

    const auto rows = concavity_rows(tri);
    const DykstraResult proj = dykstra_project(M, z0, rows, kkt_tol, max_cycles);

    const double zMz = proj.z.dot(M * proj.z);
    out.objective += h_sq - 2.0 * b.dot(proj.z) + zMz;
    out.g_norm_sq += zMz;
    out.kkt_residual = std::max(out.kkt_residual, proj.kkt);
    out.parts.push_back({i, tri, std::vector<double>(proj.z.data(), proj.z.data() + proj.z.size())});
  }
  out.objective = std::max(0.0, out.objective);
  return out;
}

namespace {

// Exact integral over the part of the face where a.y+b >= 0 of
// q(y) * (a.y+b)^k, with q given in chart coordinates.
double clipped_power_integral(const Polytope& P, const Face& F, const Polynomial& q, const Vec& a,
                              double b, int k) {
  std::vector<Simplex> cells;
  for (const auto& S : triangulate_face(P, F)) {
    Simplex c;
    for (const auto& p : S.points) c.points.push_back(F.chart_coords(p));
    cells.push_back(std::move(c));
  }
  const int d = F.dim;
  double total = 0.0;
  const Polynomial factor = Polynomial::affine(a, b).pow(k);
  const Polynomial integrand = q * factor;

  for (const auto& S : cells) {
    std::vector<double> vals;
    for (const auto& p : S.points) vals.push_back(a.dot(p) + b);
    const double vmin = *std::min_element(vals.begin(), vals.end());
    const double vmax = *std::max_element(vals.begin(), vals.end());
    if (vmax <= 0) continue;
    if (vmin >= 0) {
      total += integrate_simplex(integrand, S);
      continue;
    }
    // clip the simplex by the halfspace a.y+b >= 0
    std::vector<Vec> kept;
    for (size_t i = 0; i < S.points.size(); ++i) {
      if (vals[i] >= 0) kept.push_back(S.points[i]);
      for (size_t j = i + 1; j < S.points.size(); ++j) {
        if ((vals[i] < 0) != (vals[j] < 0)) {
          const double lam = vals[i] / (vals[i] - vals[j]);
          kept.push_back(S.points[i] + lam * (S.points[j] - S.points[i]));
        }
      }
    }
    if (static_cast<int>(kept.size()) < d + 1) continue;
    if (d == 1) {
      std::sort(kept.begin(), kept.end(), [](const Vec& x, const Vec& y) { return x[0] < y[0]; });
      Simplex seg;
      seg.points = {kept.front(), kept.back()};
      if (seg.volume() > 1e-14) total += integrate_simplex(integrand, seg);
    } else {  // d == 2: fan around the centroid, ordered by angle
      Vec c = Vec::Zero(d);
      for (const auto& p : kept) c += p;
      c /= static_cast<double>(kept.size());
      std::sort(kept.begin(), kept.end(), [&](const Vec& x, const Vec& y) {
        return std::atan2(x[1] - c[1], x[0] - c[0]) < std::atan2(y[1] - c[1], y[0] - c[0]);
      });
      for (size_t i = 0; i < kept.size(); ++i) {
        Simplex tri;
        tri.points = {c, kept[i], kept[(i + 1) % kept.size()]};
        if (tri.volume() > 1e-14) total += integrate_simplex(integrand, tri);
      }
    }
  }
  return total;
}

// Nelder-Mead on R^p, deterministic, derivative-free.
Vec nelder_mead(const std::function<double(const Vec&)>& f, Vec x0, double scale, int iters) {
  const int p = static_cast<int>(x0.size());
  std::vector<std::pair<double, Vec>> simplex;
  simplex.push_back({f(x0), x0});
  for (int i = 0; i < p; ++i) {
    Vec x = x0;
    x[i] += scale;
    simplex.push_back({f(x), x});
  }
  for (int it = 0; it < iters; ++it) {
    std::sort(simplex.begin(), simplex.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Vec centroid = Vec::Zero(p);
    for (int i = 0; i < p; ++i) centroid += simplex[i].second;
    centroid /= p;
    const Vec& worst = simplex[p].second;
    const Vec refl = centroid + (centroid - worst);
    const double fr = f(refl);
    if (fr < simplex[0].first) {
      const Vec expand = centroid + 2.0 * (centroid - worst);
      const double fe = f(expand);
      simplex[p] = fe < fr ? std::make_pair(fe, expand) : std::make_pair(fr, refl);
    } else if (fr < simplex[p - 1].first) {
      simplex[p] = {fr, refl};
    } else {
      const Vec contr = centroid + 0.5 * (worst - centroid);
      const double fc = f(contr);
      if (fc < simplex[p].first) {
        simplex[p] = {fc, contr};
      } else {
        for (int i = 1; i <= p; ++i) {
          simplex[i].second = simplex[0].second + 0.5 * (simplex[i].second - simplex[0].second);
          simplex[i].first = f(simplex[i].second);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return simplex[0].second;
}

}  // namespace

std::optional<LowerFaceCertificate> lower_face_search(const Polytope& P,
                                                      const Polynomial& h_poly, int restarts) {
  const int n = P.dim();
  std::optional<LowerFaceCertificate> best;

  auto consider = [&](LowerFaceCertificate cand) {
    if (cand.normalized_pairing <= 0) return;
    if (!best || cand.normalized_pairing > best->normalized_pairing) best = std::move(cand);
  };

  // vertices: g = -c*delta_v, <h,g> = -c h(v), |g| = c
  for (int i = 0; i < static_cast<int>(P.faces(0).size()); ++i) {
    const Vec& v = P.vertices()[P.faces(0)[i].vertices[0]];
    const double hv = h_poly.eval(v);
    if (hv < 0) {
      LowerFaceCertificate c;
      c.face = {0, i};
      c.part.face = c.face;
      c.part.vertex_mass = 1.0;
      c.normalized_pairing = -hv;
      consider(std::move(c));
    }
  }

  // faces of dimension 1..n-2: densities -((a.y+b)_+)^k with k = n - dim
  for (int d = 1; d <= n - 2; ++d) {
    const int k = n - d;
    for (int idx = 0; idx < static_cast<int>(P.faces(d).size()); ++idx) {
      const Face& F = P.faces(d)[idx];
      const Polynomial q = h_poly.compose_affine(F.basis, F.origin);
      const Polynomial one = Polynomial::constant(d, 1.0);

      auto score = [&](const Vec& params) {
        const Vec a = params.head(d);
        const double b = params[d];
        const double norm_sq = clipped_power_integral(P, F, one, a, b, 2 * k);
        if (norm_sq < 1e-14) return 0.0;
        const double pairing = -clipped_power_integral(P, F, q, a, b, k);
        return pairing / std::sqrt(norm_sq);
      };
      auto neg_score = [&](const Vec& p) { return -score(p); };

      double face_scale = 0.0;
      for (int v : F.vertices)
        face_scale = std::max(face_scale, F.chart_coords(P.vertices()[v]).norm());

      for (int r = 0; r < std::max(1, restarts); ++r) {
        Vec x0(d + 1);
        for (int i = 0; i <= d; ++i) {
          // deterministic low-discrepancy starts
          const double t = std::fmod(0.5 + 0.618033988749895 * (r * (d + 1) + i + 1), 1.0);
          x0[i] = (2.0 * t - 1.0) * std::max(1.0, face_scale);
        }
        const Vec opt = nelder_mead(neg_score, x0, 0.5 * std::max(1.0, face_scale), 200);
        const double s = score(opt);
        if (s > 0) {
          LowerFaceCertificate c;
          c.face = {d, idx};
          c.part.face = c.face;
          c.part.a = opt.head(d);
          c.part.b = opt[d];
          c.normalized_pairing = s;
          consider(std::move(c));
        }
      }
    }
  }
  return best;
}

DiscretePerturbation realize_cone_direction(const Polytope& P,
                                            const std::vector<ConeFacetPart>& parts) {
  DiscretePerturbation mu;
  for (const auto& part : parts) {
    // a concave PL function equals the min of its per-cell affine extensions
    std::vector<AffinePiece> pieces;
    for (int c = 0; c < static_cast<int>(part.tri.cells.size()); ++c) {
      const auto [a, b] = part.tri.cell_affine(c, part.values);
      pieces.push_back({a, b});
    }
    PiecewiseAffineDensity dens(P, part.facet, std::move(pieces));
    bool nonzero = false;
    for (const auto& piece : dens.pieces())
      if (piece.a.lpNorm<Eigen::Infinity>() > 1e-12 || std::abs(piece.b) > 1e-12) nonzero = true;
    if (nonzero) mu.densities.emplace(part.facet, std::move(dens));
  }
  return mu;
}

CrosscheckResult first_order_crosscheck(const Polytope& P, const CompositeMomentFunctional& phi,
                                        const std::vector<ConeFacetPart>& g,
                                        const std::vector<double>& t_grid, int seed) {
  const Polynomial h = h_function(phi, P);
  BoundaryFunction hb = BoundaryFunction::ambient(P, h);
  BoundaryFunction gb;
  for (const auto& part : g)
    gb.set_pl({P.dim() - 1, part.facet}, part.tri, part.values);

  CrosscheckResult out;
  out.reference = boundary_inner_product(hb, gb, P);

  const DiscretePerturbation mu = realize_cone_direction(P, g);
  if (mu.densities.empty()) {
    for (double t : t_grid) out.rows.push_back({t, 0.0});
    return out;
  }
  const Vec v = generic_direction(P, seed);
  const PerturbedFamily fam = build_family(P, mu, v);
  const double phi0 = phi.value(P);
  for (double t : t_grid) {
    const Polytope Pt = fam.at(t);
    out.rows.push_back({t, (phi.value(Pt) - phi0) / t});
  }
  return out;
}

StabilityReport stability_report(const Polytope& P, const CompositeMomentFunctional& phi,
                                 int refinement, int restarts, double stability_tol) {
  StabilityReport rep;
  rep.refinement = refinement;
  rep.restarts = restarts;

  rep.reversible_residuals = reversible_check(P, phi);
  for (const auto& [f, r] : rep.reversible_residuals)
    rep.max_reversible_residual = std::max(rep.max_reversible_residual, r.lpNorm<Eigen::Infinity>());

  const Polynomial h = h_function(phi, P);
  const BoundaryFunction hb = BoundaryFunction::ambient(P, h);
  rep.h_norm = std::sqrt(std::max(0.0, boundary_inner_product(hb, hb, P)));

  bool inconclusive = false;
  double best_pairing_over_gnorm = 0.0;

  try {
    const FacetProjectionResult proj = facet_cone_projection(P, hb, refinement);
    rep.projection_objective = proj.objective;
    const double g_norm = std::sqrt(std::max(0.0, proj.g_norm_sq));
    if (g_norm > 0) {
      // cone projection: <h, g*> = |g*|^2
      best_pairing_over_gnorm = g_norm;
      rep.best_direction.facets = proj.parts;
      rep.inner_product = proj.g_norm_sq;
      rep.g_norm = g_norm;
    }
  } catch (const SolverStalled&) {
    inconclusive = true;
  }

  const auto lower = lower_face_search(P, h, restarts);
  if (lower && lower->normalized_pairing > best_pairing_over_gnorm) {
    best_pairing_over_gnorm = lower->normalized_pairing;
    rep.best_direction = ConeElement{};
    rep.best_direction.lower.push_back(lower->part);
    rep.inner_product = lower->normalized_pairing;  // with |g| = 1 normalization
    rep.g_norm = 1.0;
  }

  const bool certificate = best_pairing_over_gnorm > stability_tol * std::max(rep.h_norm, 1e-30);

  if (certificate) {
    rep.verdict = Verdict::UnstableWithCertificate;
    if (!rep.best_direction.facets.empty()) {
      // self-validation: the realized family must strictly increase phi
      const DiscretePerturbation mu = realize_cone_direction(P, rep.best_direction.facets);
      if (!mu.densities.empty()) {
        const Vec v = generic_direction(P, 0);
        const PerturbedFamily fam = build_family(P, mu, v);
        const double t = std::min(0.01, fam.t_max() / 4.0);
        rep.crosscheck_ran = true;
        rep.crosscheck_t = t;
        rep.phi_base = phi.value(P);
        rep.phi_perturbed = phi.value(fam.at(t));
        if (rep.phi_perturbed <= rep.phi_base) rep.verdict = Verdict::Inconclusive;
      }
    }
  } else if (!inconclusive && rep.max_reversible_residual < 1e-7) {
    rep.verdict = Verdict::WeaklyStableWithinTol;
  } else {
    rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

}  // namespace polyperturb
