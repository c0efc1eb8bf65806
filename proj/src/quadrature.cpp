#include "polyperturb/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polyperturb {

namespace {

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

}  // namespace

Polynomial Polynomial::constant(int dim, double c) {
  Polynomial p(dim);
  p.add_term(std::vector<int>(dim, 0), c);
  return p;
}

Polynomial Polynomial::monomial(int dim, std::vector<int> exps, double coef) {
  if (static_cast<int>(exps.size()) != dim) throw DimensionMismatch("exponent vector size");
  Polynomial p(dim);
  p.add_term(std::move(exps), coef);
  return p;
}

Polynomial Polynomial::affine(const Vec& a, double b) {
  const int d = static_cast<int>(a.size());
  Polynomial p(d);
  p.add_term(std::vector<int>(d, 0), b);
  for (int i = 0; i < d; ++i) {
    std::vector<int> e(d, 0);
    e[i] = 1;
    p.add_term(std::move(e), a[i]);
  }
  return p;
}

Polynomial Polynomial::squared_norm(int dim) {
  Polynomial p(dim);
  for (int i = 0; i < dim; ++i) {
    std::vector<int> e(dim, 0);
    e[i] = 2;
    p.add_term(std::move(e), 1.0);
  }
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, std::accumulate(e.begin(), e.end(), 0));
  return d;
}

void Polynomial::add_term(std::vector<int> exps, double coef) {
  if (static_cast<int>(exps.size()) != dim_) throw DimensionMismatch("exponent vector size");
  for (int e : exps)
    if (e < 0) throw DegenerateInput("negative exponent");
  if (std::accumulate(exps.begin(), exps.end(), 0) > kDegreeCap)
    throw DegreeCapExceeded("term degree exceeds cap " + std::to_string(kDegreeCap));
  auto it = terms_.find(exps);
  if (it == terms_.end()) {
    if (coef != 0.0) terms_.emplace(std::move(exps), coef);
  } else {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::eval(const Vec& x) const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (int i = 0; i < dim_; ++i)
      for (int k = 0; k < e[i]; ++k) t *= x[i];
    s += t;
  }
  return s;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  if (o.dim_ != dim_) throw DimensionMismatch("polynomial dims");
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o.scaled(-1.0); }

Polynomial Polynomial::scaled(double s) const {
  Polynomial r(dim_);
  if (s == 0.0) return r;
  for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (o.dim_ != dim_) throw DimensionMismatch("polynomial dims");
  Polynomial r(dim_);
  for (const auto& [e1, c1] : terms_) {
    for (const auto& [e2, c2] : o.terms_) {
      std::vector<int> e(dim_);
      for (int i = 0; i < dim_; ++i) e[i] = e1[i] + e2[i];
      r.add_term(std::move(e), c1 * c2);
    }
  }
  return r;
}

Polynomial Polynomial::pow(int k) const {
  Polynomial r = Polynomial::constant(dim_, 1.0);
  for (int i = 0; i < k; ++i) r = r * (*this);
  return r;
}

Polynomial Polynomial::compose_affine(const Mat& A, const Vec& c) const {
  if (A.rows() != dim_ || c.size() != dim_) throw DimensionMismatch("affine map shape");
  const int d = static_cast<int>(A.cols());
  // substituted coordinate functions and their cached powers
  std::vector<std::vector<Polynomial>> powers(dim_);
  for (int j = 0; j < dim_; ++j) powers[j].push_back(Polynomial::constant(d, 1.0));
  Polynomial r(d);
  for (const auto& [e, coef] : terms_) {
    Polynomial term = Polynomial::constant(d, coef);
    for (int j = 0; j < dim_; ++j) {
      while (static_cast<int>(powers[j].size()) <= e[j]) {
        if (powers[j].size() == 1) {
          Vec a = A.row(j).transpose();
          powers[j].push_back(Polynomial::affine(a, c[j]));
        } else {
          powers[j].push_back(powers[j].back() * powers[j][1]);
        }
      }
      if (e[j] > 0) term = term * powers[j][e[j]];
    }
    r = r + term;
  }
  return r;
}

double integrate_simplex(const Polynomial& p, const Simplex& S) {
  const int d = S.dim();
  if (d == 0) return p.eval(S.points[0]);
  if (S.ambient_dim() != d || p.dim() != d)
    throw DimensionMismatch("integrate_simplex expects a full-dimensional simplex");
  Mat A(d, d);
  for (int i = 0; i < d; ++i) A.col(i) = S.points[i + 1] - S.points[0];
  const double jac = std::abs(A.determinant());
  if (jac <= 1e-300) throw DegenerateSimplex("zero-volume simplex");
  const Polynomial q = p.compose_affine(A, S.points[0]);
  // int_{standard simplex} y^beta dy = prod(beta_i!) / (|beta| + d)!
  double s = 0.0;
  for (const auto& [e, c] : q.terms()) {
    double num = 1.0;
    int total = 0;
    for (int i = 0; i < d; ++i) {
      num *= factorial(e[i]);
      total += e[i];
    }
    s += c * num / factorial(total + d);
  }
  return jac * s;
}

double integrate_simplex_embedded(const Polynomial& p, const Simplex& S) {
  const int d = S.dim();
  if (d == 0) return p.eval(S.points[0]);
  if (S.ambient_dim() == d) return integrate_simplex(p, S);
  const Mat B = affine_basis(S.points, 1e-12);
  if (B.cols() != d) throw DegenerateSimplex("simplex points not affinely independent");
  const Vec o = S.points[0];
  const Polynomial q = p.compose_affine(B, o);
  Simplex chart;
  for (const auto& pt : S.points) chart.points.push_back(B.transpose() * (pt - o));
  return integrate_simplex(q, chart);  // orthonormal chart: unit Jacobian
}

double integrate_monomial_simplex(const std::vector<int>& exps, const Simplex& S) {
  const Polynomial p = Polynomial::monomial(static_cast<int>(exps.size()),
                                            std::vector<int>(exps));
  return integrate_simplex_embedded(p, S);
}

double integrate_polytope(const Polynomial& p, const Polytope& P) {
  if (p.dim() != P.dim()) throw DimensionMismatch("polynomial/polytope dims");
  double s = 0.0;
  for (const auto& S : triangulate(P)) s += integrate_simplex(p, S);
  return s;
}

double integrate_face(const Polynomial& p, const Polytope& P, const Face& F) {
  if (p.dim() != P.dim()) throw DimensionMismatch("polynomial/polytope dims");
  if (F.dim == 0) return p.eval(P.vertices()[F.vertices[0]]);
  const Polynomial q = p.compose_affine(F.basis, F.origin);
  double s = 0.0;
  for (const auto& S : triangulate_face(P, F)) {
    Simplex chart;
    for (const auto& pt : S.points) chart.points.push_back(F.chart_coords(pt));
    s += integrate_simplex(q, chart);
  }
  return s;
}

double integrate_face_weighted(const Polynomial& p, const Polytope& P, const Face& F,
                               const std::vector<WeightedChartCell>& cells) {
  if (p.dim() != P.dim()) throw DimensionMismatch("polynomial/polytope dims");
  if (F.dim == 0) {
    if (cells.size() != 1) throw ChartMismatch("vertex face expects a single cell");
    return p.eval(P.vertices()[F.vertices[0]]) * cells[0].b;
  }
  double face_vol = 0.0;
  for (const auto& S : triangulate_face(P, F)) face_vol += S.volume();
  double cell_vol = 0.0;
  for (const auto& c : cells) cell_vol += c.cell.volume();
  if (std::abs(cell_vol - face_vol) > 1e-7 * std::max(1.0, face_vol))
    throw ChartMismatch("weight cells do not cover the face");

  const Polynomial q = p.compose_affine(F.basis, F.origin);
  double s = 0.0;
  for (const auto& c : cells) {
    const Polynomial w = Polynomial::affine(c.a, c.b);
    s += integrate_simplex(q * w, c.cell);
  }
  return s;
}

}  // namespace polyperturb
