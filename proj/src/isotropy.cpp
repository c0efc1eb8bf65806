#include "polyperturb/isotropy.hpp"

#include <cmath>

namespace polyperturb {

BodyMoments moments(const Polytope& P) {
  const int n = P.dim();
  const auto tris = triangulate(P);
  auto integral = [&](const Polynomial& p) {
    double s = 0.0;
    for (const auto& S : tris) s += integrate_simplex(p, S);
    return s;
  };

  BodyMoments m;
  m.volume = integral(Polynomial::constant(n, 1.0));
  m.centroid = Vec(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> e(n, 0);
    e[i] = 1;
    m.centroid[i] = integral(Polynomial::monomial(n, e)) / m.volume;
  }
  m.covariance = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      std::vector<int> e(n, 0);
      e[i] += 1;
      e[j] += 1;
      const double raw = integral(Polynomial::monomial(n, e));
      m.covariance(i, j) = m.covariance(j, i) =
          raw / m.volume - m.centroid[i] * m.centroid[j];
    }
  }
  return m;
}

std::pair<Polytope, AffineMap> to_isotropic(const Polytope& P, double cond_cap) {
  const BodyMoments m = moments(P);
  Eigen::SelfAdjointEigenSolver<Mat> eig(m.covariance);
  const Vec& lam = eig.eigenvalues();
  if (lam[0] <= 0 || lam[lam.size() - 1] / lam[0] > cond_cap)
    throw IllConditioned("covariance condition number exceeds cap");
  const Mat T = eig.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
                eig.eigenvectors().transpose();

  std::vector<Vec> mapped;
  mapped.reserve(P.vertices().size());
  for (const auto& v : P.vertices()) mapped.push_back(T * (v - m.centroid));
  Polytope Q = Polytope::from_vertices(std::move(mapped), P.eps());
  return {std::move(Q), AffineMap{T, -T * m.centroid}};
}

double isotropic_constant(const Polytope& P) {
  const int n = P.dim();
  const BodyMoments m = moments(P);
  // det[int_{K-c} x x^T] = det(vol * covariance) = vol^n det(cov)
  const double l2n = m.covariance.determinant() / (m.volume * m.volume);
  return std::pow(l2n, 1.0 / (2.0 * n));
}

double isotropy_defect(const Polytope& P) {
  const BodyMoments m = moments(P);
  const Mat dev = m.covariance - Mat::Identity(P.dim(), P.dim());
  return std::max(m.centroid.lpNorm<Eigen::Infinity>(),
                  dev.cwiseAbs().maxCoeff());
}

CompositeMomentFunctional::CompositeMomentFunctional(MomentKind kind, int dim)
    : kind_(kind), dim_(dim) {
  switch (kind_) {
    case MomentKind::Volume:
      integrands_.push_back(Polynomial::constant(dim, 1.0));
      break;
    case MomentKind::MomentOfInertia:
      integrands_.push_back(Polynomial::squared_norm(dim));
      break;
    case MomentKind::IsotropicConstant2n:
      // y = (vol, upper-triangular second moments row-major)
      integrands_.push_back(Polynomial::constant(dim, 1.0));
      for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
          std::vector<int> e(dim, 0);
          e[i] += 1;
          e[j] += 1;
          integrands_.push_back(Polynomial::monomial(dim, e));
        }
      }
      break;
  }
  validate_gradient();
}

Vec CompositeMomentFunctional::integral_vector(const Polytope& P) const {
  if (P.dim() != dim_) throw DimensionMismatch("functional/polytope dims");
  const auto tris = triangulate(P);
  Vec y(integrands_.size());
  for (size_t k = 0; k < integrands_.size(); ++k) {
    double s = 0.0;
    for (const auto& S : tris) s += integrate_simplex(integrands_[k], S);
    y[k] = s;
  }
  return y;
}

namespace {

Mat second_moment_matrix(const Vec& y, int n) {
  Mat A(n, n);
  int k = 1;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) A(i, j) = A(j, i) = y[k++];
  return A;
}

}  // namespace

double CompositeMomentFunctional::combiner(const Vec& y) const {
  switch (kind_) {
    case MomentKind::Volume:
    case MomentKind::MomentOfInertia:
      return y[0];
    case MomentKind::IsotropicConstant2n: {
      const Mat A = second_moment_matrix(y, dim_);
      return A.determinant() / std::pow(y[0], dim_ + 2);
    }
  }
  return 0.0;
}

Vec CompositeMomentFunctional::combiner_gradient(const Vec& y) const {
  switch (kind_) {
    case MomentKind::Volume:
    case MomentKind::MomentOfInertia: {
      Vec g(1);
      g[0] = 1.0;
      return g;
    }
    case MomentKind::IsotropicConstant2n: {
      const int n = dim_;
      const Mat A = second_moment_matrix(y, n);
      const double det = A.determinant();
      const Mat Ainv = A.inverse();
      Vec g(y.size());
      g[0] = -(n + 2) * det / std::pow(y[0], n + 3);
      int k = 1;
      const double voln = std::pow(y[0], n + 2);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          g[k++] = det * Ainv(i, j) * (i == j ? 1.0 : 2.0) / voln;
      return g;
    }
  }
  return Vec();
}

void CompositeMomentFunctional::validate_gradient() const {
  // probe moments: an off-center box keeps the matrix well away from singular
  std::vector<Vec> pts;
  const int n = dim_;
  for (int mask = 0; mask < (1 << n); ++mask) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = (mask >> i & 1) ? 1.3 + 0.1 * i : 0.2;
    pts.push_back(p);
  }
  const Vec y = integral_vector(Polytope::from_vertices(pts));
  const Vec g = combiner_gradient(y);
  for (int k = 0; k < y.size(); ++k) {
    const double step = 1e-6 * std::max(1.0, std::abs(y[k]));
    Vec yp = y, ym = y;
    yp[k] += step;
    ym[k] -= step;
    const double fd = (combiner(yp) - combiner(ym)) / (2 * step);
    const double scale = std::max({1.0, std::abs(fd), std::abs(g[k])});
    if (std::abs(fd - g[k]) > 1e-4 * scale)
      throw DegenerateInput("combiner gradient rule inconsistent with finite differences");
  }
}

Polynomial h_function(const CompositeMomentFunctional& phi, const Polytope& P, double iso_tol) {
  const int n = P.dim();
  if (phi.dim() != n) throw DimensionMismatch("functional/polytope dims");
  if (phi.kind() == MomentKind::IsotropicConstant2n) {
    if (isotropy_defect(P) > iso_tol)
      throw NotIsotropic("polytope is not isotropic within tolerance");
    const double vol = moments(P).volume;
    Polynomial h = Polynomial::squared_norm(n);
    h.add_term(std::vector<int>(n, 0), -(n + 2.0));
    return h.scaled(1.0 / (vol * vol * vol));
  }
  const Vec y = phi.integral_vector(P);
  const Vec g = phi.combiner_gradient(y);
  Polynomial h(n);
  for (size_t k = 0; k < phi.integrands().size(); ++k)
    h = h + phi.integrands()[k].scaled(g[k]);
  return h;
}

}  // namespace polyperturb
