#include "polyperturb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace polyperturb {

namespace {

bool lex_less(const Vec& a, const Vec& b, double tol) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - tol) return true;
    if (a[i] > b[i] + tol) return false;
  }
  return false;
}

std::vector<Vec> dedup_points(std::vector<Vec> pts, double tol) {
  std::sort(pts.begin(), pts.end(),
            [&](const Vec& a, const Vec& b) { return lex_less(a, b, 0.0); });
  std::vector<Vec> out;
  for (const auto& p : pts) {
    bool dup = false;
    // sorted by first coordinate, so only a suffix of out can collide
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (p[0] - (*it)[0] > tol) break;
      if ((p - *it).lpNorm<Eigen::Infinity>() <= tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(p);
  }
  return out;
}

// Enumerate k-subsets of {0..m-1}, calling f on each.
template <typename F>
void for_each_subset(int m, int k, F&& f) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  if (k > m) return;
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

void canonical_sign(Mat& B) {
  for (int c = 0; c < B.cols(); ++c) {
    int imax = 0;
    B.col(c).cwiseAbs().maxCoeff(&imax);
    if (B(imax, c) < 0) B.col(c) = -B.col(c);
  }
}

double radical_inverse(long long index, int base) {
  double result = 0.0, f = 1.0 / base;
  long long i = index;
  while (i > 0) {
    result += f * (i % base);
    i /= base;
    f /= base;
  }
  return result;
}

}  // namespace

Vec Simplex::centroid() const {
  Vec c = Vec::Zero(ambient_dim());
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

double Simplex::volume() const {
  const int d = dim();
  if (d == 0) return 1.0;
  Mat G(ambient_dim(), d);
  for (int i = 0; i < d; ++i) G.col(i) = points[i + 1] - points[0];
  if (d == ambient_dim()) return std::abs(G.determinant()) / std::tgamma(d + 1.0);
  const double gram = (G.transpose() * G).determinant();
  return std::sqrt(std::max(0.0, gram)) / std::tgamma(d + 1.0);
}

double Simplex::diameter() const {
  double m = 0.0;
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t j = i + 1; j < points.size(); ++j)
      m = std::max(m, (points[i] - points[j]).norm());
  return m;
}

int affine_rank(const std::vector<Vec>& points, double tol) {
  if (points.empty()) return -1;
  if (points.size() == 1) return 0;
  Mat D(points[0].size(), points.size() - 1);
  for (size_t i = 1; i < points.size(); ++i) D.col(i - 1) = points[i] - points[0];
  Eigen::JacobiSVD<Mat> svd(D);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++r;
  return r;
}

Mat affine_basis(const std::vector<Vec>& points, double tol) {
  const int n = static_cast<int>(points[0].size());
  if (points.size() == 1) return Mat(n, 0);
  Mat D(n, points.size() - 1);
  for (size_t i = 1; i < points.size(); ++i) D.col(i - 1) = points[i] - points[0];
  Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeThinU);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++r;
  Mat B = svd.matrixU().leftCols(r);
  canonical_sign(B);
  return B;
}

bool Polytope::contains(const Vec& x, double tol) const {
  for (const auto& h : halfspaces_)
    if (h.u.dot(x) > h.b + tol) return false;
  return true;
}

Vec Polytope::vertex_centroid() const {
  Vec c = Vec::Zero(dim_);
  for (const auto& v : vertices_) c += v;
  return c / static_cast<double>(vertices_.size());
}

Polytope Polytope::from_vertices(std::vector<Vec> points, double eps, int vertex_cap) {
  if (points.empty()) throw DegenerateInput("no input points");
  const int n = static_cast<int>(points[0].size());
  if (n < 2 || n > 4) throw DegenerateInput("ambient dimension must be in [2,4]");
  for (const auto& p : points)
    if (p.size() != n) throw DimensionMismatch("inconsistent point dimensions");

  points = dedup_points(std::move(points), eps);
  if (static_cast<int>(points.size()) > vertex_cap)
    throw TooManyVertices("point count " + std::to_string(points.size()) + " exceeds cap " +
                          std::to_string(vertex_cap));
  if (affine_rank(points, eps) < n)
    throw DegenerateInput("points do not affinely span the ambient space");

  const int m = static_cast<int>(points.size());

  // Every facet hyperplane is spanned by some n input points; enumerate them.
  std::vector<Halfspace> hs;
  for_each_subset(m, n, [&](const std::vector<int>& idx) {
    Mat D(n - 1, n);
    for (int i = 1; i < n; ++i) D.row(i - 1) = (points[idx[i]] - points[idx[0]]).transpose();
    Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeFullV);
    if (n >= 2 && svd.singularValues()[n - 2] <= eps) return;  // degenerate subset
    Vec u = svd.matrixV().col(n - 1);
    double b = u.dot(points[idx[0]]);
    bool all_below = true, all_above = true;
    for (const auto& p : points) {
      const double s = u.dot(p) - b;
      if (s > eps) all_below = false;
      if (s < -eps) all_above = false;
      if (!all_below && !all_above) return;
    }
    if (all_above) {
      u = -u;
      b = -b;
    }
    for (const auto& h : hs)
      if ((h.u - u).lpNorm<Eigen::Infinity>() <= 1e-7 && std::abs(h.b - b) <= 1e-7) return;
    hs.push_back({u, b});
  });
  if (hs.empty()) throw DegenerateInput("no supporting hyperplanes found");

  // A point is a vertex iff its tight normals span R^n.
  std::vector<Vec> verts;
  for (const auto& p : points) {
    Mat N(n, 0);
    for (const auto& h : hs) {
      if (std::abs(h.u.dot(p) - h.b) <= eps) {
        N.conservativeResize(n, N.cols() + 1);
        N.col(N.cols() - 1) = h.u;
      }
    }
    if (N.cols() < n) continue;
    Eigen::JacobiSVD<Mat> svd(N);
    if (svd.singularValues()[n - 1] > eps) verts.push_back(p);
  }
  if (affine_rank(verts, eps) < n) throw DegenerateInput("extreme points do not span");

  Polytope P;
  P.dim_ = n;
  P.eps_ = eps;
  P.vertices_ = std::move(verts);
  P.halfspaces_ = std::move(hs);
  std::sort(P.vertices_.begin(), P.vertices_.end(),
            [](const Vec& a, const Vec& b) { return lex_less(a, b, 0.0); });
  std::sort(P.halfspaces_.begin(), P.halfspaces_.end(), [](const Halfspace& a, const Halfspace& b) {
    if (lex_less(a.u, b.u, 0.0)) return true;
    if (lex_less(b.u, a.u, 0.0)) return false;
    return a.b < b.b;
  });
  P.build_lattice();
  return P;
}

Polytope Polytope::from_halfspaces(std::vector<Halfspace> halfspaces, double eps, int vertex_cap) {
  if (halfspaces.empty()) throw DegenerateInput("no halfspaces");
  const int n = static_cast<int>(halfspaces[0].u.size());
  if (n < 2 || n > 4) throw DegenerateInput("ambient dimension must be in [2,4]");

  std::vector<Halfspace> hs;
  for (auto& h : halfspaces) {
    if (h.u.size() != n) throw DimensionMismatch("inconsistent normals");
    const double norm = h.u.norm();
    if (norm <= eps) throw DegenerateInput("zero normal");
    Halfspace cand{h.u / norm, h.b / norm};
    bool dup = false;
    for (auto& g : hs) {
      if ((g.u - cand.u).lpNorm<Eigen::Infinity>() <= 1e-9) {
        dup = true;
        g.b = std::min(g.b, cand.b);  // keep the tighter one
        break;
      }
    }
    if (!dup) hs.push_back(cand);
  }
  const int m = static_cast<int>(hs.size());

  {  // bounded iff the recession cone is trivial
    Mat N(n, m);
    for (int i = 0; i < m; ++i) N.col(i) = hs[i].u;
    Eigen::JacobiSVD<Mat> svd(N);
    if (svd.singularValues()[n - 1] <= eps)
      throw Unbounded("halfspace normals do not span the ambient space");
  }
  for_each_subset(m, n - 1, [&](const std::vector<int>& idx) {
    Mat N(n - 1, n);
    for (int i = 0; i < n - 1; ++i) N.row(i) = hs[idx[i]].u.transpose();
    Eigen::JacobiSVD<Mat> svd(N, Eigen::ComputeFullV);
    if (n >= 2 && svd.singularValues()[n - 2] <= eps) return;
    const Vec d = svd.matrixV().col(n - 1);
    for (int sign = -1; sign <= 1; sign += 2) {
      bool recession = true;
      for (const auto& h : hs)
        if (sign * h.u.dot(d) > 1e-10) {
          recession = false;
          break;
        }
      if (recession) throw Unbounded("recession ray detected");
    }
  });

  // Vertex candidates: well-conditioned n-subsets of tight constraints.
  // Rank-deficient subsets (several facet planes through a common edge) would
  // otherwise produce spurious points in the relative interior of faces.
  std::vector<Vec> cands;
  for_each_subset(m, n, [&](const std::vector<int>& idx) {
    Mat A(n, n);
    Vec rhs(n);
    for (int i = 0; i < n; ++i) {
      A.row(i) = hs[idx[i]].u.transpose();
      rhs[i] = hs[idx[i]].b;
    }
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()[n - 1] <= 1e-7) return;
    const Vec x = svd.solve(rhs);
    for (const auto& h : hs)
      if (h.u.dot(x) > h.b + eps * 10) return;
    cands.push_back(x);
  });
  cands = dedup_points(std::move(cands), 1e-7);
  {  // a vertex needs tight normals of full rank
    std::vector<Vec> filtered;
    for (const auto& x : cands) {
      Mat N(n, 0);
      for (const auto& h : hs) {
        if (std::abs(h.u.dot(x) - h.b) <= eps * 100) {
          N.conservativeResize(n, N.cols() + 1);
          N.col(N.cols() - 1) = h.u;
        }
      }
      if (N.cols() < n) continue;
      Eigen::JacobiSVD<Mat> svd(N);
      if (svd.singularValues()[n - 1] > 1e-7) filtered.push_back(x);
    }
    cands = std::move(filtered);
  }
  if (cands.empty()) throw Empty("halfspace intersection has no vertices");
  if (static_cast<int>(cands.size()) > vertex_cap)
    throw TooManyVertices("vertex count exceeds cap");
  if (affine_rank(cands, eps) < n) throw DegenerateInput("intersection is not full-dimensional");

  // Drop redundant halfspaces: a facet needs a tight vertex set of affine rank n-1.
  std::vector<Halfspace> kept;
  for (const auto& h : hs) {
    std::vector<Vec> tight;
    for (const auto& x : cands)
      if (std::abs(h.u.dot(x) - h.b) <= eps * 10) tight.push_back(x);
    if (static_cast<int>(tight.size()) >= n && affine_rank(tight, eps) == n - 1)
      kept.push_back(h);
  }

  Polytope P;
  P.dim_ = n;
  P.eps_ = eps;
  P.vertices_ = std::move(cands);
  P.halfspaces_ = std::move(kept);
  std::sort(P.vertices_.begin(), P.vertices_.end(),
            [](const Vec& a, const Vec& b) { return lex_less(a, b, 0.0); });
  std::sort(P.halfspaces_.begin(), P.halfspaces_.end(), [](const Halfspace& a, const Halfspace& b) {
    if (lex_less(a.u, b.u, 0.0)) return true;
    if (lex_less(b.u, a.u, 0.0)) return false;
    return a.b < b.b;
  });
  P.build_lattice();
  return P;
}

void Polytope::build_lattice() {
  const int n = dim_;
  const int nv = static_cast<int>(vertices_.size());
  const int m = static_cast<int>(halfspaces_.size());
  const double tol = eps_ * 100;

  std::vector<std::vector<int>> tight_sets(m);
  for (int h = 0; h < m; ++h)
    for (int v = 0; v < nv; ++v)
      if (std::abs(halfspaces_[h].u.dot(vertices_[v]) - halfspaces_[h].b) <= tol)
        tight_sets[h].push_back(v);

  // Faces are exactly the intersections of facet vertex sets (closure under
  // pairwise intersection, seeded with the facets themselves).
  std::set<std::vector<int>> sets(tight_sets.begin(), tight_sets.end());
  std::vector<std::vector<int>> queue(sets.begin(), sets.end());
  while (!queue.empty()) {
    const std::vector<int> a = std::move(queue.back());
    queue.pop_back();
    for (int h = 0; h < m; ++h) {
      std::vector<int> inter;
      std::set_intersection(a.begin(), a.end(), tight_sets[h].begin(), tight_sets[h].end(),
                            std::back_inserter(inter));
      if (inter.empty()) continue;
      if (sets.insert(inter).second) queue.push_back(inter);
    }
  }

  std::vector<std::vector<Face>> by_dim(n);
  for (const auto& vs : sets) {
    std::vector<Vec> pts;
    for (int v : vs) pts.push_back(vertices_[v]);
    const int d = affine_rank(pts, eps_);
    if (d < 0 || d > n - 1) continue;
    Face f;
    f.dim = d;
    f.vertices = vs;
    for (int h = 0; h < m; ++h)
      if (std::includes(tight_sets[h].begin(), tight_sets[h].end(), vs.begin(), vs.end()))
        f.tight_halfspaces.push_back(h);
    f.basis = affine_basis(pts, eps_);
    Vec c = Vec::Zero(n);
    for (const auto& p : pts) c += p;
    f.origin = c / static_cast<double>(pts.size());
    by_dim[d].push_back(std::move(f));
  }
  for (auto& faces : by_dim)
    std::sort(faces.begin(), faces.end(),
              [](const Face& a, const Face& b) { return a.vertices < b.vertices; });

  // Facets must be in bijection with halfspaces; reorder to match.
  if (static_cast<int>(by_dim[n - 1].size()) != m)
    throw DegenerateInput("facet/halfspace bijection failed");
  std::vector<Face> facets(m);
  for (auto& f : by_dim[n - 1]) {
    if (f.tight_halfspaces.size() != 1)
      throw DegenerateInput("facet tight on multiple halfspaces");
    facets[f.tight_halfspaces[0]] = f;
  }
  by_dim[n - 1] = std::move(facets);
  lattice_ = FaceLattice(std::move(by_dim));
}

namespace {

void triangulate_face_rec(const Polytope& P, const Face& F, std::vector<Simplex>& out) {
  const int d = F.dim;
  if (static_cast<int>(F.vertices.size()) == d + 1) {
    Simplex s;
    for (int v : F.vertices) s.points.push_back(P.vertices()[v]);
    out.push_back(std::move(s));
    return;
  }
  Vec c = Vec::Zero(P.dim());
  for (int v : F.vertices) c += P.vertices()[v];
  c /= static_cast<double>(F.vertices.size());
  for (const auto& G : P.faces(d - 1)) {
    if (!std::includes(F.vertices.begin(), F.vertices.end(), G.vertices.begin(),
                       G.vertices.end()))
      continue;
    std::vector<Simplex> sub;
    triangulate_face_rec(P, G, sub);
    for (auto& s : sub) {
      s.points.push_back(c);
      out.push_back(std::move(s));
    }
  }
}

}  // namespace

std::vector<Simplex> triangulate_face(const Polytope& P, const Face& F) {
  std::vector<Simplex> out;
  triangulate_face_rec(P, F, out);
  return out;
}

std::vector<Simplex> triangulate(const Polytope& P) {
  const int n = P.dim();
  std::vector<Simplex> out;
  if (static_cast<int>(P.vertices().size()) == n + 1) {
    Simplex s;
    s.points = P.vertices();
    out.push_back(std::move(s));
    return out;
  }
  const Vec c = P.vertex_centroid();
  for (const auto& F : P.facets()) {
    for (auto& s : triangulate_face(P, F)) {
      s.points.push_back(c);
      out.push_back(std::move(s));
    }
  }
  return out;
}

Vec generic_direction(const Polytope& P, int seed, double delta, int max_attempts) {
  const int n = P.dim();
  static const int bases[4] = {2, 3, 5, 7};
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const long long idx = static_cast<long long>(seed) * max_attempts + attempt + 1;
    double u[4];
    for (int k = 0; k < 4; ++k) u[k] = radical_inverse(idx, bases[k]);
    double z[4];
    const double r0 = std::sqrt(-2.0 * std::log(std::max(u[0], 1e-16)));
    const double r1 = std::sqrt(-2.0 * std::log(std::max(u[2], 1e-16)));
    z[0] = r0 * std::cos(2 * M_PI * u[1]);
    z[1] = r0 * std::sin(2 * M_PI * u[1]);
    z[2] = r1 * std::cos(2 * M_PI * u[3]);
    z[3] = r1 * std::sin(2 * M_PI * u[3]);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = z[i];
    const double norm = v.norm();
    if (norm < 1e-8) continue;
    v /= norm;
    bool ok = true;
    for (const auto& h : P.halfspaces())
      if (std::abs(h.u.dot(v)) < delta) {
        ok = false;
        break;
      }
    if (ok) return v;
  }
  throw GenericityFailure("no direction with margin " + std::to_string(delta) + " after " +
                          std::to_string(max_attempts) + " attempts");
}

}  // namespace polyperturb
