#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace polyperturb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Default tolerances. Entry points that depend on them accept overrides.
inline constexpr double kGeomEps = 1e-9;      // geometric coincidence tolerance
inline constexpr double kGenericMin = 1e-3;   // minimum |<u_i,v>| for a generic direction
inline constexpr double kIsotropyTol = 1e-7;  // max deviation from isotropic position
inline constexpr double kStabilityTol = 1e-6; // normalized pairing threshold for certificates
inline constexpr int kVertexCap = 64;
inline constexpr int kAtomCap = 10000;
inline constexpr int kResolutionCap = 256;
inline constexpr int kDegreeCap = 8;

/// Base class for all library errors; kind() carries the machine-readable tag.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

#define POLYPERTURB_ERROR(NAME)                                    \
  class NAME : public Error {                                      \
  public:                                                          \
    explicit NAME(const std::string& msg) : Error(#NAME, msg) {}   \
  }

POLYPERTURB_ERROR(DegenerateInput);
POLYPERTURB_ERROR(TooManyVertices);
POLYPERTURB_ERROR(Unbounded);
POLYPERTURB_ERROR(Empty);
POLYPERTURB_ERROR(GenericityFailure);
POLYPERTURB_ERROR(DegenerateSimplex);
POLYPERTURB_ERROR(DimensionMismatch);
POLYPERTURB_ERROR(DegreeCapExceeded);
POLYPERTURB_ERROR(ChartMismatch);
POLYPERTURB_ERROR(IllConditioned);
POLYPERTURB_ERROR(NotIsotropic);
POLYPERTURB_ERROR(EdgeNotInFacet);
POLYPERTURB_ERROR(NotGeneric);
POLYPERTURB_ERROR(RangeExceeded);
POLYPERTURB_ERROR(DegenerateResult);
POLYPERTURB_ERROR(ResolutionTooHigh);
POLYPERTURB_ERROR(MassMismatch);
POLYPERTURB_ERROR(NegativeWeight);
POLYPERTURB_ERROR(TriangulationMismatch);
POLYPERTURB_ERROR(SolverStalled);
POLYPERTURB_ERROR(ParseError);

#undef POLYPERTURB_ERROR

}  // namespace polyperturb
