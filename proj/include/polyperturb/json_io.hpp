#pragma once

#include "polyperturb/geometry.hpp"
#include "polyperturb/perturbation.hpp"
#include "polyperturb/quadrature.hpp"
#include "polyperturb/transport.hpp"

#include <json.hpp>

#include <string>

namespace polyperturb {

using Json = nlohmann::json;

/// {"dim": n, "vertices": [[...],...]} or {"dim": n, "halfspaces": [{"u": [...], "b": x},...]}
Polytope polytope_from_json(const Json& j, double eps = kGeomEps);
Json polytope_to_json(const Polytope& P);

/// OFF vertex list for n = 3; faces are ignored and the hull is recomputed.
Polytope polytope_from_off(const std::string& text, double eps = kGeomEps);

/// {"dim": n, "terms": [{"exp": [...], "coef": x},...]}
Polynomial polynomial_from_json(const Json& j);
Json polynomial_to_json(const Polynomial& p);

/// {"atoms": [{"x": [...], "w": s},...]}
SignedAtomicMeasure measure_from_json(const Json& j, double eps = kGeomEps);
Json measure_to_json(const SignedAtomicMeasure& mu);

/// [{"facet": i, "pieces": [{"a": [...], "b": x},...]},...]
DiscretePerturbation perturbation_from_json(const Json& j, const Polytope& P);
Json perturbation_to_json(const DiscretePerturbation& mu);

/// Load a polytope from a .json or .off file path.
Polytope load_polytope(const std::string& path, double eps = kGeomEps);

Json load_json(const std::string& path);

/// FNV-1a 64-bit digest of a file's bytes, as "fnv1a64:<hex>".
std::string file_digest(const std::string& path);

}  // namespace polyperturb
