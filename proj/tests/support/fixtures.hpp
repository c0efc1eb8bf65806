#pragma once

#include "polyperturb/geometry.hpp"

#include <random>

namespace polyperturb::testing {

inline Polytope unit_square() {
  std::vector<Vec> pts;
  for (double x : {0.0, 1.0})
    for (double y : {0.0, 1.0}) {
      Vec p(2);
      p << x, y;
      pts.push_back(p);
    }
  return Polytope::from_vertices(pts);
}

inline Polytope cube(int n, double half = 1.0) {
  std::vector<Vec> pts;
  for (int mask = 0; mask < (1 << n); ++mask) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = (mask >> i & 1) ? half : -half;
    pts.push_back(p);
  }
  return Polytope::from_vertices(pts);
}

inline Polytope standard_triangle() {
  std::vector<Vec> pts(3, Vec(2));
  pts[0] << 0, 0;
  pts[1] << 1, 0;
  pts[2] << 0, 1;
  return Polytope::from_vertices(pts);
}

inline Polytope simplex3() {
  std::vector<Vec> pts(4, Vec(3));
  pts[0] << 0, 0, 0;
  pts[1] << 1, 0, 0;
  pts[2] << 0, 1, 0;
  pts[3] << 0, 0, 1;
  return Polytope::from_vertices(pts);
}

/// Irregular quadrilateral used by the stability fixtures.
inline Polytope irregular_quad() {
  std::vector<Vec> pts(4, Vec(2));
  pts[0] << 0, 0;
  pts[1] << 2, 0;
  pts[2] << 2.5, 1;
  pts[3] << 0, 1.5;
  return Polytope::from_vertices(pts);
}

inline Vec random_point(std::mt19937& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = dist(rng);
  return p;
}

inline Mat random_invertible(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  while (true) {
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = dist(rng);
    if (std::abs(A.determinant()) > 0.1) return A;
  }
}

}  // namespace polyperturb::testing
