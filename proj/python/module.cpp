#include "polyperturb/isotropy.hpp"
#include "polyperturb/json_io.hpp"
#include "polyperturb/perturbation.hpp"
#include "polyperturb/stability.hpp"
#include "polyperturb/transport.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace polyperturb;

namespace {

Polytope polytope_from_vertex_matrix(const Mat& verts) {
  std::vector<Vec> pts;
  for (int i = 0; i < verts.rows(); ++i) pts.push_back(verts.row(i).transpose());
  return Polytope::from_vertices(std::move(pts));
}

Mat vertex_matrix(const Polytope& P) {
  Mat m(P.vertices().size(), P.dim());
  for (size_t i = 0; i < P.vertices().size(); ++i) m.row(i) = P.vertices()[i].transpose();
  return m;
}

SignedAtomicMeasure measure_from_arrays(const Mat& pts, const Vec& w) {
  std::vector<Vec> points;
  std::vector<double> weights;
  for (int i = 0; i < pts.rows(); ++i) {
    points.push_back(pts.row(i).transpose());
    weights.push_back(w[i]);
  }
  return make_measure(std::move(points), std::move(weights));
}

MomentKind kind_from_name(const std::string& name) {
  if (name == "lk") return MomentKind::IsotropicConstant2n;
  if (name == "volume") return MomentKind::Volume;
  if (name == "inertia") return MomentKind::MomentOfInertia;
  throw ParseError("unknown functional: " + name);
}

CanonicalKind canonical_from_name(const std::string& name) {
  if (name == "shift") return CanonicalKind::Shift;
  if (name == "hinge") return CanonicalKind::Hinge;
  if (name == "pyramid") return CanonicalKind::Pyramid;
  throw ParseError("unknown canonical kind: " + name);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::WeaklyStableWithinTol:
      return "WeaklyStableWithinTol";
    case Verdict::UnstableWithCertificate:
      return "UnstableWithCertificate";
    case Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "first-order perturbation theory of polytopes";

  py::register_exception<Error>(m, "PolyperturbError");

  py::class_<Polytope>(m, "Polytope")
      .def_static("from_vertices", &polytope_from_vertex_matrix, py::arg("vertices"))
      .def_static("from_json",
                  [](const std::string& text) { return polytope_from_json(Json::parse(text)); })
      .def_property_readonly("dim", &Polytope::dim)
      .def_property_readonly("vertices", &vertex_matrix)
      .def("num_faces", [](const Polytope& P, int d) { return P.faces(d).size(); })
      .def("to_json", [](const Polytope& P) { return polytope_to_json(P).dump(); });

  py::class_<BodyMoments>(m, "BodyMoments")
      .def_readonly("volume", &BodyMoments::volume)
      .def_readonly("centroid", &BodyMoments::centroid)
      .def_readonly("covariance", &BodyMoments::covariance);

  m.def("moments", &moments);
  m.def("isotropic_constant", &isotropic_constant);
  m.def("to_isotropic", [](const Polytope& P) {
    auto [Q, T] = to_isotropic(P);
    return py::make_tuple(Q, T.A, T.c);
  });
  m.def("isotropy_defect", &isotropy_defect);

  py::class_<PiecewiseAffineDensity>(m, "PiecewiseAffineDensity")
      .def_property_readonly("facet", &PiecewiseAffineDensity::facet)
      .def("num_pieces", [](const PiecewiseAffineDensity& d) { return d.pieces().size(); });

  m.def(
      "canonical_density",
      [](const Polytope& P, const std::string& kind, int facet, int edge) {
        return canonical_density(P, canonical_from_name(kind), facet, edge);
      },
      py::arg("polytope"), py::arg("kind"), py::arg("facet"), py::arg("edge") = -1);

  py::class_<DiscretePerturbation>(m, "DiscretePerturbation")
      .def_static("single", &DiscretePerturbation::single);

  m.def("pair",
        [](const Polytope& P, const DiscretePerturbation& mu, const std::string& poly_json) {
          return pair(P, mu, polynomial_from_json(Json::parse(poly_json)));
        });

  m.def("generic_direction", &generic_direction, py::arg("polytope"), py::arg("seed"),
        py::arg("delta") = kGenericMin, py::arg("max_attempts") = 512);

  py::class_<PerturbedFamily>(m, "PerturbedFamily")
      .def_property_readonly("t_max", &PerturbedFamily::t_max)
      .def_property_readonly("direction", &PerturbedFamily::direction)
      .def("at", &PerturbedFamily::at);

  m.def("build_family", &build_family, py::arg("polytope"), py::arg("perturbation"),
        py::arg("direction"), py::arg("delta_gen") = kGenericMin);

  py::class_<SignedAtomicMeasure>(m, "SignedAtomicMeasure")
      .def_static("from_arrays", &measure_from_arrays, py::arg("points"), py::arg("weights"))
      .def_property_readonly("total_mass", &SignedAtomicMeasure::total_mass)
      .def("__len__", [](const SignedAtomicMeasure& mu) { return mu.points.size(); });

  m.def("tv_norm", &tv_norm);
  m.def("wasserstein",
        [](const SignedAtomicMeasure& mu, const SignedAtomicMeasure& nu) {
          return wasserstein(mu, nu).first;
        });
  m.def("generalized_wasserstein", &generalized_wasserstein);
  m.def("wasserstein_norm", &wasserstein_norm);

  m.def(
      "stability_report",
      [](const Polytope& P, const std::string& functional, int refine, int restarts) {
        const CompositeMomentFunctional phi(kind_from_name(functional), P.dim());
        const StabilityReport rep = stability_report(P, phi, refine, restarts);
        py::dict out;
        out["verdict"] = verdict_name(rep.verdict);
        out["max_reversible_residual"] = rep.max_reversible_residual;
        out["projection_objective"] = rep.projection_objective;
        out["h_norm"] = rep.h_norm;
        out["g_norm"] = rep.g_norm;
        out["refinement"] = rep.refinement;
        return out;
      },
      py::arg("polytope"), py::arg("functional") = "lk", py::arg("refine") = 4,
      py::arg("restarts") = 3);
}
