#include "polyperturb/stability.hpp"

#include "support/fixtures.hpp"
#include "support/qp_oracle.hpp"

#include <doctest.h>

#include <random>

using namespace polyperturb;
using namespace polyperturb::testing;

namespace {

Polynomial iso_h(const Polytope& Q) {
  const CompositeMomentFunctional phi(MomentKind::IsotropicConstant2n, Q.dim());
  return h_function(phi, Q);
}

// Mass matrix and load vector for one facet, via the library assembly path
// exercised through facet_cone_projection on single-facet boundary functions.
struct FacetSystem {
  Mat M;
  Vec b;
  Mat A;  // hinge rows
};

FacetSystem facet_system(const Polytope& P, int facet, const FaceTriangulation& tri,
                         const std::vector<double>& h_values) {
  const int d = tri.face_dim;
  const int N = static_cast<int>(tri.nodes.size());
  FacetSystem sys;
  sys.M = Mat::Zero(N, N);
  for (int c = 0; c < static_cast<int>(tri.cells.size()); ++c) {
    const double vol = tri.cell_simplex(c).volume();
    for (int a = 0; a <= d; ++a)
      for (int e = 0; e <= d; ++e)
        sys.M(tri.cells[c][a], tri.cells[c][e]) += vol * (a == e ? 2.0 : 1.0) / ((d + 1.0) * (d + 2.0));
  }
  Eigen::Map<const Vec> hv(h_values.data(), N);
  sys.b = sys.M * hv;

  // second differences: 1-d chain nodes sorted by coordinate
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b2) { return tri.nodes[a][0] < tri.nodes[b2][0]; });
  sys.A = Mat::Zero(N - 2, N);
  for (int i = 0; i + 2 < N + 0; ++i) {
    const double x0 = tri.nodes[order[i]][0], x1 = tri.nodes[order[i + 1]][0],
                 x2 = tri.nodes[order[i + 2]][0];
    // f(x2) <= affine through (x0,f0),(x1,f1) evaluated at x2
    const double w0 = (x2 - x1) / (x1 - x0);
    sys.A(i, order[i + 2]) = 1.0;
    sys.A(i, order[i + 1]) = -(1.0 + w0);
    sys.A(i, order[i]) = w0;
  }
  return sys;
}

}  // namespace

TEST_CASE("boundary inner product basics") {
  const Polytope C3 = cube(3);
  SUBCASE("facet areas sum to 24") {
    std::vector<FaceKey> facets;
    for (int i = 0; i < 6; ++i) facets.push_back({2, i});
    const auto one = BoundaryFunction::ambient_on(facets, Polynomial::constant(3, 1.0));
    CHECK(boundary_inner_product(one, one, C3) == doctest::Approx(24.0).epsilon(1e-12));
  }
  SUBCASE("odd moment vanishes on a facet") {
    const auto f = BoundaryFunction::ambient_on({{2, 0}}, Polynomial::constant(3, 1.0));
    const auto g = BoundaryFunction::ambient_on({{2, 0}}, Polynomial::monomial(3, {0, 1, 0}));
    CHECK(boundary_inner_product(f, g, C3) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("critical identity on the isotropic cube facet") {
    const auto [Q, T] = to_isotropic(cube(3));
    Polynomial hm = Polynomial::squared_norm(3);
    hm.add_term({0, 0, 0}, -5.0);
    const auto f = BoundaryFunction::ambient_on({{2, 0}}, hm);
    const auto g = BoundaryFunction::ambient_on({{2, 0}}, Polynomial::constant(3, 1.0));
    CHECK(std::abs(boundary_inner_product(f, g, Q)) <= 1e-9);
  }
  SUBCASE("vertices carry counting measure") {
    const auto f = BoundaryFunction::ambient_on({{0, 0}}, Polynomial::squared_norm(3));
    const auto g = BoundaryFunction::ambient_on({{0, 0}}, Polynomial::constant(3, 1.0));
    CHECK(boundary_inner_product(f, g, C3) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("PL x PL on mismatched triangulations rejected") {
    const Face& F = C3.facets()[0];
    const auto t1 = refine_face_triangulation(C3, F, 1);
    const auto t2 = refine_face_triangulation(C3, F, 2);
    BoundaryFunction f, g;
    f.set_pl({2, 0}, t1, std::vector<double>(t1.nodes.size(), 1.0));
    g.set_pl({2, 0}, t2, std::vector<double>(t2.nodes.size(), 1.0));
    CHECK_THROWS_AS(boundary_inner_product(f, g, C3), TriangulationMismatch);
  }
  SUBCASE("PL x polynomial cross integral") {
    const Face& F = C3.facets()[0];
    const auto tri = refine_face_triangulation(C3, F, 2);
    BoundaryFunction f, g;
    f.set_pl({2, 0}, tri, std::vector<double>(tri.nodes.size(), 2.0));
    g.set_polynomial({2, 0}, Polynomial::constant(3, 1.5));
    CHECK(boundary_inner_product(f, g, C3) == doctest::Approx(2.0 * 1.5 * 4.0).epsilon(1e-12));
  }
}

TEST_CASE("reversible check") {
  SUBCASE("isotropic cube: all residuals vanish") {
    for (int n = 2; n <= 3; ++n) {
      const auto [Q, T] = to_isotropic(cube(n));
      const CompositeMomentFunctional phi(MomentKind::IsotropicConstant2n, n);
      for (const auto& [facet, r] : reversible_check(Q, phi))
        CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }
  SUBCASE("isotropic triangle: all residuals vanish") {
    const auto [Q, T] = to_isotropic(standard_triangle());
    const CompositeMomentFunctional phi(MomentKind::IsotropicConstant2n, 2);
    for (const auto& [facet, r] : reversible_check(Q, phi))
      CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  SUBCASE("irregular isotropized quadrilateral has a nonzero residual") {
    const auto [Q, T] = to_isotropic(irregular_quad());
    const CompositeMomentFunctional phi(MomentKind::IsotropicConstant2n, 2);
    double max_res = 0;
    for (const auto& [facet, r] : reversible_check(Q, phi))
      max_res = std::max(max_res, r.lpNorm<Eigen::Infinity>());
    CHECK(max_res > 1e-4);
  }
  SUBCASE("non-isotropic input rejected") {
    const CompositeMomentFunctional phi(MomentKind::IsotropicConstant2n, 2);
    CHECK_THROWS_AS(reversible_check(irregular_quad(), phi), NotIsotropic);
  }
}

TEST_CASE("facet cone projection") {
  SUBCASE("zero input projects to zero") {
    const auto [Q, T] = to_isotropic(cube(2));
    const auto res = facet_cone_projection(Q, BoundaryFunction::zero(), 4);
    CHECK(res.objective == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.g_norm_sq == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("concave PL input is a fixed point") {
    const Polytope Q = cube(2);
    BoundaryFunction h;
    FacetProjectionResult res;
    // tent function on each facet: concave, in the cone
    for (int i = 0; i < 4; ++i) {
      const auto tri = refine_face_triangulation(Q, Q.facets()[i], 4);
      std::vector<double> vals;
      for (const auto& y : tri.nodes) vals.push_back(1.0 - std::abs(y[0]) / 2.0);
      h.set_pl({1, i}, tri, vals);
    }
    res = facet_cone_projection(Q, h, 4);
    CHECK(res.objective <= 1e-7);
  }
  SUBCASE("matches the dense QP oracle on 1-d facets") {
    const Polytope Q = cube(2);
    std::mt19937 rng(71);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const int refinement = 19;  // 20 nodes per facet
      BoundaryFunction h;
      std::vector<std::vector<double>> values(4);
      for (int i = 0; i < 4; ++i) {
        const auto tri = refine_face_triangulation(Q, Q.facets()[i], refinement);
        for (size_t k = 0; k < tri.nodes.size(); ++k) values[i].push_back(dist(rng));
        h.set_pl({1, i}, tri, values[i]);
      }
      const auto res = facet_cone_projection(Q, h, refinement);

      double oracle_obj = 0;
      for (int i = 0; i < 4; ++i) {
        const auto tri = refine_face_triangulation(Q, Q.facets()[i], refinement);
        const auto sys = facet_system(Q, i, tri, values[i]);
        const Vec z = qp_oracle(sys.M, sys.b, sys.A);
        Eigen::Map<const Vec> hv(values[i].data(), values[i].size());
        oracle_obj += (hv - z).dot(sys.M * (hv - z));
      }
      CHECK(std::abs(res.objective - oracle_obj) <= 1e-6 * std::max(1.0, oracle_obj));
      CHECK(res.kkt_residual <= 1e-6);
    }
  }
  SUBCASE("variational inequality against cone elements") {
    const auto [Q, T] = to_isotropic(irregular_quad());
    const Polynomial h = iso_h(Q);
    const auto hb = BoundaryFunction::ambient(Q, h);
    const int refinement = 8;
    const auto res = facet_cone_projection(Q, hb, refinement);

    // <h - g*, g*> = 0 and <h - g*, g> <= 0 for cone elements g
    BoundaryFunction gstar;
    for (const auto& part : res.parts) gstar.set_pl({1, part.facet}, part.tri, part.values);
    const double hg = boundary_inner_product(hb, gstar, Q);
    const double gg = boundary_inner_product(gstar, gstar, Q);
    CHECK(std::abs(hg - gg) <= 1e-6 * std::max(1.0, gg));

    std::mt19937 rng(73);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      BoundaryFunction g;
      for (const auto& part : res.parts) {
        // random concave node vectors: c0 + c1*x - c2*x^2 sampled at nodes
        const double c0 = dist(rng), c1 = dist(rng), c2 = 0.5 * (dist(rng) + 1.0);
        std::vector<double> vals;
        for (const auto& y : part.tri.nodes) vals.push_back(c0 + c1 * y[0] - c2 * y[0] * y[0]);
        g.set_pl({1, part.facet}, part.tri, vals);
      }
      const double lhs = boundary_inner_product(hb, g, Q) - boundary_inner_product(gstar, g, Q);
      CHECK(lhs <= 1e-6);
    }
  }
}

TEST_CASE("lower face search on the isotropic cube") {
  const auto [Q, T] = to_isotropic(cube(3));
  const Polynomial h = iso_h(Q);
  // h(v) = (9-5)/vol^3 > 0 at every vertex and h > 0 along edges: no certificate
  const auto best = lower_face_search(Q, h, 3);
  if (best) CHECK(best->normalized_pairing <= 1e-9);
}

TEST_CASE("lower face search covers 2-faces and edges in dimension 4") {
  // h = -1: a d-face with measure m offers score sqrt(m); the 2-faces of the
  // 4-cube have area 4, beating edges (sqrt 2) and vertices (1)
  const Polytope C4 = cube(4);
  const auto best = lower_face_search(C4, Polynomial::constant(4, -1.0), 2);
  REQUIRE(best.has_value());
  CHECK(best->normalized_pairing >= 1.9);
}

TEST_CASE("lower face search vertex certificate sign logic") {
  // n = 2: vertices are the only lower faces; h = -1 gives score -h(v) = 1
  const Polytope Q = irregular_quad();
  const auto best = lower_face_search(Q, Polynomial::constant(2, -1.0), 2);
  REQUIRE(best.has_value());
  CHECK(best->face.dim == 0);
  CHECK(best->normalized_pairing == doctest::Approx(1.0));

  // in n = 3 an edge-supported density can beat the vertex offer
  const auto best3 = lower_face_search(cube(3), Polynomial::constant(3, -1.0), 2);
  REQUIRE(best3.has_value());
  CHECK(best3->normalized_pairing >= 1.0);
}

TEST_CASE("stability reports") {
  const CompositeMomentFunctional phi2(MomentKind::IsotropicConstant2n, 2);

  SUBCASE("isotropic square is weakly stable at refinement 4") {
    const auto [Q, T] = to_isotropic(cube(2));
    const auto rep = stability_report(Q, phi2, 4, 2);
    CHECK(rep.verdict == Verdict::WeaklyStableWithinTol);
    CHECK(rep.max_reversible_residual <= 1e-9);
  }
  SUBCASE("isotropic triangle: residuals vanish") {
    const auto [Q, T] = to_isotropic(standard_triangle());
    const auto rep = stability_report(Q, phi2, 4, 2);
    CHECK(rep.max_reversible_residual <= 1e-9);
  }
  SUBCASE("isotropic 3-cube: 2-d facet projection of h is zero") {
    const auto [Q, T] = to_isotropic(cube(3));
    const CompositeMomentFunctional phi3(MomentKind::IsotropicConstant2n, 3);
    const auto rep = stability_report(Q, phi3, 3, 2);
    CHECK(rep.verdict == Verdict::WeaklyStableWithinTol);
    CHECK(rep.max_reversible_residual <= 1e-9);
    CHECK(rep.g_norm <= 1e-9);  // projected direction is zero; the objective
                                // is then |h|^2 restricted to the facets
    CHECK(rep.projection_objective <= boundary_inner_product(
              BoundaryFunction::ambient(Q, iso_h(Q)), BoundaryFunction::ambient(Q, iso_h(Q)), Q));
  }
  SUBCASE("irregular quadrilateral is unstable with a self-validating certificate") {
    const auto [Q, T] = to_isotropic(irregular_quad());
    const auto rep = stability_report(Q, phi2, 4, 2);
    CHECK(rep.verdict == Verdict::UnstableWithCertificate);
    REQUIRE(rep.crosscheck_ran);
    CHECK(rep.phi_perturbed > rep.phi_base);
  }
  SUBCASE("scaling h leaves the verdict unchanged") {
    // volume functional scaled: shift directions always improve volume
    const auto [Q, T] = to_isotropic(irregular_quad());
    const auto rep1 = stability_report(Q, phi2, 3, 1);
    const auto rep2 = stability_report(Q, phi2, 3, 1, kStabilityTol * 0.5);
    CHECK(rep1.verdict == rep2.verdict);
  }
}

TEST_CASE("positive scaling of h scales the projection linearly") {
  const auto [Q, T] = to_isotropic(irregular_quad());
  const Polynomial h = iso_h(Q);
  const auto res1 = facet_cone_projection(Q, BoundaryFunction::ambient(Q, h), 5);
  const auto res2 = facet_cone_projection(Q, BoundaryFunction::ambient(Q, h.scaled(3.0)), 5);
  CHECK(res2.g_norm_sq == doctest::Approx(9.0 * res1.g_norm_sq).epsilon(1e-8));
  CHECK(res2.objective == doctest::Approx(9.0 * res1.objective).epsilon(1e-8));
  for (size_t p = 0; p < res1.parts.size(); ++p)
    for (size_t k = 0; k < res1.parts[p].values.size(); ++k)
      CHECK(res2.parts[p].values[k] == doctest::Approx(3.0 * res1.parts[p].values[k]).epsilon(1e-7));
}

TEST_CASE("direct sum separability of the projection") {
  const auto [Q, T] = to_isotropic(irregular_quad());
  const Polynomial h = iso_h(Q);
  const auto hb = BoundaryFunction::ambient(Q, h);
  const auto full = facet_cone_projection(Q, hb, 5);

  double sum_obj = 0;
  for (int i = 0; i < 4; ++i) {
    const auto single = BoundaryFunction::ambient_on({{1, i}}, h);
    sum_obj += facet_cone_projection(Q, single, 5).objective;
  }
  CHECK(full.objective == doctest::Approx(sum_obj).epsilon(1e-10));
}

TEST_CASE("first order crosscheck") {
  const auto [Q, T] = to_isotropic(irregular_quad());
  const CompositeMomentFunctional phi(MomentKind::IsotropicConstant2n, 2);

  SUBCASE("zero direction gives zero slope") {
    const auto res = first_order_crosscheck(Q, phi, {}, {0.01});
    CHECK(res.reference == 0.0);
    CHECK(res.rows[0].slope == 0.0);
  }
  SUBCASE("affine density slope converges to the pairing") {
    // reversible affine density on facet 0 with nonzero residual r
    const Face& F = Q.facets()[0];
    const auto tri = refine_face_triangulation(Q, F, 2);
    std::vector<double> vals;
    for (const auto& y : tri.nodes) vals.push_back(0.5 + 0.25 * y[0]);  // affine, reversible
    std::vector<ConeFacetPart> g = {{0, tri, vals}};

    const auto res = first_order_crosscheck(Q, phi, g, {0.02, 0.01, 0.005});
    REQUIRE(res.rows.size() == 3);
    std::vector<double> errs;
    for (const auto& row : res.rows) errs.push_back(std::abs(row.slope - res.reference));
    CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.35));
    CHECK(errs[1] / errs[2] == doctest::Approx(2.0).epsilon(0.35));
  }
  SUBCASE("critical shift direction on the isotropic square") {
    const auto [Qs, Ts] = to_isotropic(cube(2));
    const Face& F = Qs.facets()[0];
    const auto tri = refine_face_triangulation(Qs, F, 2);
    std::vector<double> vals(tri.nodes.size(), 1.0);  // shift density
    std::vector<ConeFacetPart> g = {{0, tri, vals}};
    const auto res = first_order_crosscheck(Qs, phi, g, {0.01, 0.005});
    CHECK(std::abs(res.reference) <= 1e-9);
    for (const auto& row : res.rows) CHECK(std::abs(row.slope) <= 0.05);
  }
}
