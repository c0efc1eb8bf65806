#include "polyperturb/json_io.hpp"

#include <fstream>
#include <sstream>

namespace polyperturb {

namespace {

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("expected a numeric array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Json vec_to_json(const Vec& v) {
  Json j = Json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

}  // namespace

Polytope polytope_from_json(const Json& j, double eps) {
  if (!j.contains("dim")) throw ParseError("polytope JSON missing 'dim'");
  const int n = j.at("dim").get<int>();
  if (j.contains("vertices")) {
    std::vector<Vec> pts;
    for (const auto& row : j.at("vertices")) {
      Vec p = vec_from_json(row);
      if (p.size() != n) throw ParseError("vertex dimension mismatch");
      pts.push_back(std::move(p));
    }
    return Polytope::from_vertices(std::move(pts), eps);
  }
  if (j.contains("halfspaces")) {
    std::vector<Halfspace> hs;
    for (const auto& row : j.at("halfspaces")) {
      Vec u = vec_from_json(row.at("u"));
      if (u.size() != n) throw ParseError("normal dimension mismatch");
      hs.push_back({std::move(u), row.at("b").get<double>()});
    }
    return Polytope::from_halfspaces(std::move(hs), eps);
  }
  throw ParseError("polytope JSON needs 'vertices' or 'halfspaces'");
}

Json polytope_to_json(const Polytope& P) {
  Json j;
  j["dim"] = P.dim();
  Json verts = Json::array();
  for (const auto& v : P.vertices()) verts.push_back(vec_to_json(v));
  j["vertices"] = verts;
  Json hs = Json::array();
  for (const auto& h : P.halfspaces()) hs.push_back({{"u", vec_to_json(h.u)}, {"b", h.b}});
  j["halfspaces"] = hs;
  return j;
}

Polytope polytope_from_off(const std::string& text, double eps) {
  std::istringstream in(text);
  std::string line;
  auto next_content = [&]() -> std::string {
    while (std::getline(in, line)) {
      const auto pos = line.find('#');
      if (pos != std::string::npos) line = line.substr(0, pos);
      std::istringstream probe(line);
      std::string tok;
      if (probe >> tok) return line;
    }
    throw ParseError("unexpected end of OFF data");
  };

  std::string header = next_content();
  {
    std::istringstream h(header);
    std::string magic;
    h >> magic;
    if (magic != "OFF") throw ParseError("not an OFF file");
  }
  std::istringstream counts(next_content());
  long nv = 0, nf = 0, ne = 0;
  counts >> nv >> nf >> ne;
  if (nv <= 0) throw ParseError("OFF file without vertices");
  std::vector<Vec> pts;
  for (long i = 0; i < nv; ++i) {
    std::istringstream row(next_content());
    Vec p(3);
    if (!(row >> p[0] >> p[1] >> p[2])) throw ParseError("bad OFF vertex line");
    pts.push_back(std::move(p));
  }
  return Polytope::from_vertices(std::move(pts), eps);
}

Polynomial polynomial_from_json(const Json& j) {
  if (!j.contains("dim")) throw ParseError("polynomial JSON missing 'dim'");
  const int n = j.at("dim").get<int>();
  Polynomial p(n);
  for (const auto& t : j.at("terms")) {
    std::vector<int> e = t.at("exp").get<std::vector<int>>();
    if (static_cast<int>(e.size()) != n) throw ParseError("exponent dimension mismatch");
    p.add_term(std::move(e), t.at("coef").get<double>());
  }
  return p;
}

Json polynomial_to_json(const Polynomial& p) {
  Json j;
  j["dim"] = p.dim();
  Json terms = Json::array();
  for (const auto& [e, c] : p.terms()) terms.push_back({{"exp", e}, {"coef", c}});
  j["terms"] = terms;
  return j;
}

SignedAtomicMeasure measure_from_json(const Json& j, double eps) {
  std::vector<Vec> pts;
  std::vector<double> w;
  for (const auto& a : j.at("atoms")) {
    pts.push_back(vec_from_json(a.at("x")));
    w.push_back(a.at("w").get<double>());
  }
  return make_measure(std::move(pts), std::move(w), eps);
}

Json measure_to_json(const SignedAtomicMeasure& mu) {
  Json atoms = Json::array();
  for (size_t i = 0; i < mu.points.size(); ++i)
    atoms.push_back({{"x", vec_to_json(mu.points[i])}, {"w", mu.weights[i]}});
  return Json{{"atoms", atoms}};
}

DiscretePerturbation perturbation_from_json(const Json& j, const Polytope& P) {
  DiscretePerturbation mu;
  for (const auto& entry : j) {
    const int facet = entry.at("facet").get<int>();
    std::vector<AffinePiece> pieces;
    for (const auto& piece : entry.at("pieces"))
      pieces.push_back({vec_from_json(piece.at("a")), piece.at("b").get<double>()});
    mu.densities.emplace(facet, PiecewiseAffineDensity(P, facet, std::move(pieces)));
  }
  return mu;
}

Json perturbation_to_json(const DiscretePerturbation& mu) {
  Json j = Json::array();
  for (const auto& [facet, dens] : mu.densities) {
    Json pieces = Json::array();
    for (const auto& p : dens.pieces()) pieces.push_back({{"a", vec_to_json(p.a)}, {"b", p.b}});
    j.push_back({{"facet", facet}, {"pieces", pieces}});
  }
  return j;
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
}

Polytope load_polytope(const std::string& path, double eps) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".off") {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return polytope_from_off(ss.str(), eps);
  }
  return polytope_from_json(load_json(path), eps);
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  unsigned long long hash = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", hash);
  return buf;
}

}  // namespace polyperturb
