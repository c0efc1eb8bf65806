#include "polyperturb/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace polyperturb {

double SignedAtomicMeasure::total_mass() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double SignedAtomicMeasure::positive_mass() const {
  double s = 0.0;
  for (double w : weights)
    if (w > 0) s += w;
  return s;
}

SignedAtomicMeasure make_measure(std::vector<Vec> points, std::vector<double> weights,
                                 double eps, int atom_cap) {
  if (points.size() != weights.size()) throw DimensionMismatch("points/weights size");
  if (static_cast<int>(points.size()) > atom_cap)
    throw TooManyVertices("atom count exceeds cap");
  const size_t k = points.size();
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int i = 0; i < points[a].size(); ++i) {
      if (points[a][i] != points[b][i]) return points[a][i] < points[b][i];
    }
    return false;
  });

  SignedAtomicMeasure out;
  for (int idx : order) {
    const Vec& p = points[idx];
    bool merged = false;
    for (int j = static_cast<int>(out.points.size()) - 1; j >= 0; --j) {
      if (p[0] - out.points[j][0] > eps) break;
      if ((p - out.points[j]).lpNorm<Eigen::Infinity>() <= eps) {
        out.weights[j] += weights[idx];
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.points.push_back(p);
      out.weights.push_back(weights[idx]);
    }
  }
  // drop zero atoms after merging
  SignedAtomicMeasure clean;
  for (size_t i = 0; i < out.points.size(); ++i) {
    if (out.weights[i] != 0.0) {
      clean.points.push_back(out.points[i]);
      clean.weights.push_back(out.weights[i]);
    }
  }
  return clean;
}

SignedAtomicMeasure measure_sum(const SignedAtomicMeasure& a, const SignedAtomicMeasure& b,
                                double eps) {
  std::vector<Vec> pts = a.points;
  std::vector<double> w = a.weights;
  pts.insert(pts.end(), b.points.begin(), b.points.end());
  w.insert(w.end(), b.weights.begin(), b.weights.end());
  return make_measure(std::move(pts), std::move(w), eps);
}

SignedAtomicMeasure measure_scaled(const SignedAtomicMeasure& a, double s) {
  SignedAtomicMeasure out;
  if (s == 0.0) return out;
  out.points = a.points;
  out.weights = a.weights;
  for (double& w : out.weights) w *= s;
  return out;
}

std::pair<SignedAtomicMeasure, SignedAtomicMeasure> jordan_decompose(
    const SignedAtomicMeasure& mu) {
  SignedAtomicMeasure pos, neg;
  for (size_t i = 0; i < mu.points.size(); ++i) {
    if (mu.weights[i] > 0) {
      pos.points.push_back(mu.points[i]);
      pos.weights.push_back(mu.weights[i]);
    } else if (mu.weights[i] < 0) {
      neg.points.push_back(mu.points[i]);
      neg.weights.push_back(-mu.weights[i]);
    }
  }
  return {std::move(pos), std::move(neg)};
}

double tv_norm(const SignedAtomicMeasure& mu) {
  double s = 0.0;
  for (double w : mu.weights) s += std::abs(w);
  return s;
}

namespace {

// Balanced transportation problem solved with the MODI method on a spanning
// tree basis; block pricing for the entering arc, Bland fallback on stalls.
struct TransportSolver {
  int m, k;
  const std::vector<double>& cost;  // row-major m*k
  std::vector<double> supply, demand;

  struct Arc {
    int i, j;
    double flow;
  };
  std::vector<Arc> basis;        // m+k-1 arcs forming a spanning tree
  std::vector<double> u, v;      // duals
  std::vector<int> parent;       // node indices: rows 0..m-1, cols m..m+k-1
  std::vector<int> parent_arc;
  std::vector<std::vector<int>> adj;  // node -> basis arc indices

  TransportSolver(std::vector<double> a, std::vector<double> b, const std::vector<double>& c)
      : m(static_cast<int>(a.size())),
        k(static_cast<int>(b.size())),
        cost(c),
        supply(std::move(a)),
        demand(std::move(b)),
        u(m),
        v(k) {}

  double c(int i, int j) const { return cost[static_cast<size_t>(i) * k + j]; }

  void northwest_corner() {
    std::vector<double> a = supply, b = demand;
    int i = 0, j = 0;
    while (static_cast<int>(basis.size()) < m + k - 1) {
      const double f = std::min(a[i], b[j]);
      basis.push_back({i, j, f});
      a[i] -= f;
      b[j] -= f;
      if (i == m - 1 && j == k - 1) break;
      // move to the next row or column; ties keep the degenerate zero arc
      if (a[i] <= b[j] && i < m - 1)
        ++i;
      else if (j < k - 1)
        ++j;
      else
        ++i;
    }
  }

  void rebuild_tree() {
    adj.assign(m + k, {});
    for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
      adj[basis[e].i].push_back(e);
      adj[m + basis[e].j].push_back(e);
    }
    parent.assign(m + k, -1);
    parent_arc.assign(m + k, -1);
    std::vector<int> stack = {0};
    std::vector<char> seen(m + k, 0);
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int e : adj[node]) {
        const int other = (node == basis[e].i) ? m + basis[e].j : basis[e].i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent[other] = node;
        parent_arc[other] = e;
        if (other >= m)
          v[other - m] = c(basis[e].i, basis[e].j) - u[basis[e].i];
        else
          u[other] = c(basis[e].i, basis[e].j) - v[node - m];
        stack.push_back(other);
      }
    }
  }

  // Cycle through tree between row node i and col node m+j; returns node path.
  std::vector<int> tree_path(int from, int to) const {
    std::vector<int> pa, pb;
    std::vector<char> on_a(m + k, 0);
    for (int x = from; x != -1; x = parent[x]) {
      pa.push_back(x);
      on_a[x] = 1;
    }
    int meet = to;
    while (!on_a[meet]) {
      pb.push_back(meet);
      meet = parent[meet];
    }
    std::vector<int> path;
    for (int x : pa) {
      path.push_back(x);
      if (x == meet) break;
    }
    for (auto it = pb.rbegin(); it != pb.rend(); ++it) path.push_back(*it);
    return path;
  }

  double solve(double opt_tol = 1e-9) {
    northwest_corner();
    rebuild_tree();

    const long long narcs = static_cast<long long>(m) * k;
    const long long block = std::max<long long>(1024, narcs / 64);
    long long cursor = 0;
    const long long max_iter = 400LL * (m + k) + 10000;
    long long stall = 0;
    double last_obj = objective();
    bool bland = false;

    for (long long iter = 0; iter < max_iter; ++iter) {
      // entering arc
      int bi = -1, bj = -1;
      double best = -opt_tol;
      long long scanned = 0;
      while (scanned < narcs) {
        const long long stop = std::min(narcs, scanned + block);
        for (; scanned < stop; ++scanned) {
          const long long a = (cursor + scanned) % narcs;
          const int i = static_cast<int>(a / k), j = static_cast<int>(a % k);
          const double r = c(i, j) - u[i] - v[j];
          if (r < best) {
            best = r;
            bi = i;
            bj = j;
            if (bland) break;
          }
        }
        if (bi >= 0) break;
      }
      cursor = (cursor + scanned + 1) % narcs;
      if (bi < 0) return objective();  // optimal

      // pivot: alternate signs along the unique tree cycle
      // The path from row bi to column m+bj alternates row/col nodes, so the
      // cycle signs alternate starting with -theta on the arc leaving bi.
      const std::vector<int> path = tree_path(bi, m + bj);
      double theta = std::numeric_limits<double>::infinity();
      int leave = -1;
      for (size_t s = 0; s + 1 < path.size(); ++s) {
        const int child = (parent[path[s]] == path[s + 1]) ? path[s] : path[s + 1];
        const int e = parent_arc[child];
        if (s % 2 == 0 && basis[e].flow < theta) {
          theta = basis[e].flow;
          leave = e;
        }
      }
      if (leave < 0) throw SolverStalled("transport cycle without reverse arc");
      for (size_t s = 0; s + 1 < path.size(); ++s) {
        const int child = (parent[path[s]] == path[s + 1]) ? path[s] : path[s + 1];
        const int e = parent_arc[child];
        basis[e].flow += (s % 2 == 1) ? theta : -theta;
      }
      basis[leave] = {bi, bj, theta};
      rebuild_tree();

      const double obj = objective();
      if (obj >= last_obj - 1e-13 * std::max(1.0, std::abs(last_obj))) {
        if (++stall > 2 * (m + k)) bland = true;
      } else {
        stall = 0;
        bland = false;
      }
      last_obj = obj;
    }
    throw SolverStalled("transportation simplex iteration cap reached");
  }

  double objective() const {
    double s = 0.0;
    for (const auto& a : basis) s += a.flow * c(a.i, a.j);
    return s;
  }
};

}  // namespace

std::pair<double, TransferencePlan> wasserstein(const SignedAtomicMeasure& mu,
                                                const SignedAtomicMeasure& nu,
                                                double mass_tol) {
  for (double w : mu.weights)
    if (w < 0) throw NegativeWeight("wasserstein expects positive measures");
  for (double w : nu.weights)
    if (w < 0) throw NegativeWeight("wasserstein expects positive measures");
  const double ma = mu.total_mass(), mb = nu.total_mass();
  if (std::abs(ma - mb) > mass_tol * std::max(1.0, std::max(ma, mb)))
    throw MassMismatch("total masses differ");

  TransferencePlan plan;
  plan.source = mu.points;
  plan.target = nu.points;
  if (mu.empty() || nu.empty()) return {0.0, plan};

  const int m = static_cast<int>(mu.points.size());
  const int k = static_cast<int>(nu.points.size());
  std::vector<double> cost(static_cast<size_t>(m) * k);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j)
      cost[static_cast<size_t>(i) * k + j] = (mu.points[i] - nu.points[j]).norm();

  // rescale demands so the balanced solver sees exactly equal masses
  std::vector<double> b = nu.weights;
  const double scale = ma / mb;
  for (double& x : b) x *= scale;

  TransportSolver solver(mu.weights, std::move(b), cost);
  const double val = solver.solve();
  for (const auto& a : solver.basis)
    if (a.flow > 1e-14) plan.flows.emplace_back(a.i, a.j, a.flow);
  return {val, plan};
}

double generalized_wasserstein(const SignedAtomicMeasure& mu, const SignedAtomicMeasure& nu) {
  for (double w : mu.weights)
    if (w < 0) throw NegativeWeight("generalized_wasserstein expects positive measures");
  for (double w : nu.weights)
    if (w < 0) throw NegativeWeight("generalized_wasserstein expects positive measures");
  const double ma = mu.total_mass(), mb = nu.total_mass();
  if (mu.empty() && nu.empty()) return 0.0;
  if (mu.empty()) return mb;
  if (nu.empty()) return ma;

  // Balanced reduction: extra source with supply nu(X) creates mass at cost 1,
  // extra sink with demand mu(X) destroys mass at cost 1; the extra-extra arc
  // is free. Any feasible partial plan extends to a balanced flow of the same
  // objective and vice versa.
  const int m = static_cast<int>(mu.points.size());
  const int k = static_cast<int>(nu.points.size());
  std::vector<double> a = mu.weights;
  a.push_back(mb);
  std::vector<double> b = nu.weights;
  b.push_back(ma);
  std::vector<double> cost(static_cast<size_t>(m + 1) * (k + 1));
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= k; ++j) {
      double cij;
      if (i == m && j == k)
        cij = 0.0;
      else if (i == m || j == k)
        cij = 1.0;
      else
        cij = (mu.points[i] - nu.points[j]).norm();
      cost[static_cast<size_t>(i) * (k + 1) + j] = cij;
    }
  }
  TransportSolver solver(std::move(a), std::move(b), cost);
  return solver.solve();
}

double wasserstein_norm(const SignedAtomicMeasure& mu) {
  const auto [pos, neg] = jordan_decompose(mu);
  return generalized_wasserstein(pos, neg);
}

}  // namespace polyperturb
