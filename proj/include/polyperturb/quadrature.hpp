#pragma once

#include "polyperturb/common.hpp"
#include "polyperturb/geometry.hpp"

#include <map>
#include <vector>

namespace polyperturb {

/// Sparse multivariate polynomial; terms map exponent vectors to coefficients.
class Polynomial {
public:
  using Terms = std::map<std::vector<int>, double>;

  explicit Polynomial(int dim) : dim_(dim) {}
  static Polynomial constant(int dim, double c);
  static Polynomial monomial(int dim, std::vector<int> exps, double coef = 1.0);
  /// a.y + b as a polynomial in dim = a.size() variables.
  static Polynomial affine(const Vec& a, double b);
  /// |x|^2 in dim variables.
  static Polynomial squared_norm(int dim);

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }

  double eval(const Vec& x) const;
  void add_term(std::vector<int> exps, double coef);

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial scaled(double s) const;
  Polynomial pow(int k) const;

  /// Substitute x = A y + c (A is dim x d); exact multinomial expansion.
  Polynomial compose_affine(const Mat& A, const Vec& c) const;

private:
  int dim_;
  Terms terms_;
};

/// y -> A y + c. Also carries the isotropy transform of the isotropy module.
struct AffineMap {
  Mat A;
  Vec c;
  Vec apply(const Vec& y) const { return A * y + c; }
};

/// Exact integral of x^alpha over a simplex (full-dimensional or embedded).
double integrate_monomial_simplex(const std::vector<int>& exps, const Simplex& S);

/// Exact integral of p over a full-dimensional simplex in R^(p.dim()).
double integrate_simplex(const Polynomial& p, const Simplex& S);

/// Exact integral of an ambient polynomial over a d-simplex embedded in R^n,
/// with respect to d-dimensional Lebesgue measure.
double integrate_simplex_embedded(const Polynomial& p, const Simplex& S);

/// Exact integral of p over the polytope.
double integrate_polytope(const Polynomial& p, const Polytope& P);

/// Cell of a weight function on a face chart: the weight is affine on the cell.
struct WeightedChartCell {
  Simplex cell;  // simplex in chart coordinates (dim d, points in R^d)
  Vec a;         // weight(y) = a.y + b on the cell
  double b = 0.0;
};

/// Exact integral of p over face F (weight one). For a vertex this is p(v).
double integrate_face(const Polynomial& p, const Polytope& P, const Face& F);

/// Exact integral of p * weight over F where the weight is piecewise affine on
/// the given chart cells. The cells must cover F up to measure zero.
double integrate_face_weighted(const Polynomial& p, const Polytope& P, const Face& F,
                               const std::vector<WeightedChartCell>& cells);

}  // namespace polyperturb
