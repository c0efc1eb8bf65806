#include "polyperturb/isotropy.hpp"
#include "polyperturb/json_io.hpp"
#include "polyperturb/perturbation.hpp"
#include "polyperturb/stability.hpp"
#include "polyperturb/transport.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace pp = polyperturb;
using pp::Json;

namespace {

constexpr const char* kSchema = "polyperturb/report/v1";

struct GlobalOpts {
  double eps_geo = pp::kGeomEps;
  double stability_tol = pp::kStabilityTol;
  int seed = 0;
  std::string out;
};

Json config_echo(const GlobalOpts& g) {
  Json cfg;
  cfg["eps_geo"] = g.eps_geo;
  cfg["stability_tol"] = g.stability_tol;
  cfg["seed"] = g.seed;
  const char* threads = std::getenv("POLYPERTURB_THREADS");
  cfg["threads"] = threads ? std::atoi(threads) : 1;
  return cfg;
}

Json input_entry(const std::string& path) {
  return Json{{"path", path}, {"digest", pp::file_digest(path)}};
}

void emit(const GlobalOpts& g, Json report) {
  const std::string text = report.dump(2) + "\n";
  if (g.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(g.out);
    if (!f) throw pp::ParseError("cannot write output file: " + g.out);
    f << text;
  }
}

Json vec_json(const pp::Vec& v) {
  Json j = Json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json mat_json(const pp::Mat& m) {
  Json j = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    j.push_back(row);
  }
  return j;
}

std::vector<double> parse_grid(const std::string& arg) {
  std::vector<double> grid;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) grid.push_back(std::stod(tok));
  }
  if (grid.empty()) throw pp::ParseError("empty t grid");
  return grid;
}

pp::DiscretePerturbation resolve_perturbation(const pp::Polytope& P, const std::string& kind,
                                              int facet, int edge,
                                              const std::string& density_path) {
  if (!density_path.empty())
    return pp::perturbation_from_json(pp::load_json(density_path), P);
  if (kind == "shift")
    return pp::DiscretePerturbation::single(
        pp::canonical_density(P, pp::CanonicalKind::Shift, facet));
  if (kind == "hinge")
    return pp::DiscretePerturbation::single(
        pp::canonical_density(P, pp::CanonicalKind::Hinge, facet, edge));
  if (kind == "pyramid")
    return pp::DiscretePerturbation::single(
        pp::canonical_density(P, pp::CanonicalKind::Pyramid, facet));
  throw pp::ParseError("unknown perturbation kind: " + kind);
}

pp::MomentKind resolve_functional(const std::string& name) {
  if (name == "lk") return pp::MomentKind::IsotropicConstant2n;
  if (name == "volume") return pp::MomentKind::Volume;
  if (name == "inertia") return pp::MomentKind::MomentOfInertia;
  throw pp::ParseError("unknown functional: " + name);
}

const char* verdict_name(pp::Verdict v) {
  switch (v) {
    case pp::Verdict::WeaklyStableWithinTol:
      return "WeaklyStableWithinTol";
    case pp::Verdict::UnstableWithCertificate:
      return "UnstableWithCertificate";
    case pp::Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"first-order perturbation theory of polytopes"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--eps-geo", g.eps_geo, "geometric tolerance");
  app.add_option("--stability-tol", g.stability_tol, "certificate threshold");
  app.add_option("--seed", g.seed, "seed for the generic-direction sequence");
  app.add_option("--out", g.out, "write the JSON report to this file");

  std::string polytope_path, poly_path, mu_path, nu_path, density_path, csv_path, out_polytope;
  std::string kind = "shift", functional = "lk", tgrid = "0.2,0.1,0.05,0.025";
  int facet = 0, edge = -1, refine = 4, restarts = 3;

  auto* cmd_moments = app.add_subcommand("moments", "volume, centroid, covariance");
  cmd_moments->add_option("--polytope", polytope_path)->required();

  auto* cmd_iso = app.add_subcommand("isotropize", "map to isotropic position");
  cmd_iso->add_option("--polytope", polytope_path)->required();
  cmd_iso->add_option("--out-polytope", out_polytope, "write the isotropized polytope JSON");

  auto* cmd_lk = app.add_subcommand("lk", "isotropic constant");
  cmd_lk->add_option("--polytope", polytope_path)->required();

  auto* cmd_perturb = app.add_subcommand("perturb", "perturbation families");
  cmd_perturb->require_subcommand(1);
  auto* cmd_build = cmd_perturb->add_subcommand("build", "build a family and report its data");
  auto* cmd_check = cmd_perturb->add_subcommand("check", "finite-difference derivative check");
  for (auto* c : {cmd_build, cmd_check}) {
    c->add_option("--polytope", polytope_path)->required();
    c->add_option("--kind", kind, "shift|hinge|pyramid");
    c->add_option("--facet", facet);
    c->add_option("--edge", edge, "edge index for hinge");
    c->add_option("--density", density_path, "perturbation JSON instead of a canonical kind");
  }
  cmd_check->add_option("--poly", poly_path, "integrand polynomial JSON")->required();
  cmd_check->add_option("--tgrid", tgrid, "comma-separated descending t values");

  auto* cmd_wass = app.add_subcommand("wass", "balanced Wasserstein distance");
  cmd_wass->add_option("--mu", mu_path)->required();
  cmd_wass->add_option("--nu", nu_path)->required();

  auto* cmd_wassnorm = app.add_subcommand("wassnorm", "Wasserstein norm of a signed measure");
  cmd_wassnorm->add_option("--mu", mu_path)->required();

  auto* cmd_tv = app.add_subcommand("tv", "total variation norm");
  cmd_tv->add_option("--mu", mu_path)->required();

  auto* cmd_stab = app.add_subcommand("stability", "perturbation stability report");
  cmd_stab->add_option("--polytope", polytope_path)->required();
  cmd_stab->add_option("--functional", functional, "lk|volume|inertia");
  cmd_stab->add_option("--refine", refine);
  cmd_stab->add_option("--restarts", restarts);
  cmd_stab->add_option("--csv", csv_path, "write per-facet residuals as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    Json report;
    report["schema"] = kSchema;
    report["config"] = config_echo(g);

    if (*cmd_moments) {
      report["command"] = "moments";
      report["inputs"] = {{"polytope", input_entry(polytope_path)}};
      const pp::Polytope P = pp::load_polytope(polytope_path, g.eps_geo);
      const pp::BodyMoments m = pp::moments(P);
      report["result"] = {{"volume", m.volume},
                          {"centroid", vec_json(m.centroid)},
                          {"covariance", mat_json(m.covariance)}};
      emit(g, report);
    } else if (*cmd_iso) {
      report["command"] = "isotropize";
      report["inputs"] = {{"polytope", input_entry(polytope_path)}};
      const pp::Polytope P = pp::load_polytope(polytope_path, g.eps_geo);
      const auto [Q, T] = pp::to_isotropic(P);
      report["result"] = {{"transform", mat_json(T.A)},
                          {"offset", vec_json(T.c)},
                          {"isotropy_defect", pp::isotropy_defect(Q)},
                          {"polytope", pp::polytope_to_json(Q)}};
      if (!out_polytope.empty()) {
        std::ofstream f(out_polytope);
        if (!f) throw pp::ParseError("cannot write: " + out_polytope);
        f << pp::polytope_to_json(Q).dump(2) << "\n";
      }
      emit(g, report);
    } else if (*cmd_lk) {
      report["command"] = "lk";
      report["inputs"] = {{"polytope", input_entry(polytope_path)}};
      const pp::Polytope P = pp::load_polytope(polytope_path, g.eps_geo);
      report["result"] = {{"L", pp::isotropic_constant(P)}};
      emit(g, report);
    } else if (*cmd_build) {
      report["command"] = "perturb build";
      report["inputs"] = {{"polytope", input_entry(polytope_path)}};
      if (!density_path.empty()) report["inputs"]["density"] = input_entry(density_path);
      const pp::Polytope P = pp::load_polytope(polytope_path, g.eps_geo);
      const auto mu = resolve_perturbation(P, kind, facet, edge, density_path);
      const pp::Vec v = pp::generic_direction(P, g.seed);
      const pp::PerturbedFamily fam = pp::build_family(P, mu, v);
      report["result"] = {{"direction", vec_json(fam.direction())},
                          {"t_max", fam.t_max()},
                          {"positive_facets", fam.positive_facets()},
                          {"negative_facets", fam.negative_facets()},
                          {"perturbation", pp::perturbation_to_json(mu)}};
      emit(g, report);
    } else if (*cmd_check) {
      report["command"] = "perturb check";
      report["inputs"] = {{"polytope", input_entry(polytope_path)}, {"poly", input_entry(poly_path)}};
      if (!density_path.empty()) report["inputs"]["density"] = input_entry(density_path);
      const pp::Polytope P = pp::load_polytope(polytope_path, g.eps_geo);
      const auto mu = resolve_perturbation(P, kind, facet, edge, density_path);
      const pp::Polynomial p = pp::polynomial_from_json(pp::load_json(poly_path));
      const pp::Vec v = pp::generic_direction(P, g.seed);
      const pp::PerturbedFamily fam = pp::build_family(P, mu, v);
      const double target = pp::pair(P, mu, p);
      const auto rows = pp::weak_derivative_fd(fam, p, parse_grid(tgrid));
      Json jrows = Json::array();
      std::vector<double> errs;
      for (const auto& [t, q] : rows) {
        errs.push_back(std::abs(q - target));
        jrows.push_back({{"t", t}, {"quotient", q}, {"error", errs.back()}});
      }
      Json ratios = Json::array();
      for (size_t i = 0; i + 1 < errs.size(); ++i)
        ratios.push_back(errs[i + 1] > 0 ? errs[i] / errs[i + 1] : 0.0);
      report["result"] = {{"pairing", target}, {"rows", jrows}, {"richardson_ratios", ratios}};
      emit(g, report);
    } else if (*cmd_wass) {
      report["command"] = "wass";
      report["inputs"] = {{"mu", input_entry(mu_path)}, {"nu", input_entry(nu_path)}};
      const auto mu = pp::measure_from_json(pp::load_json(mu_path), g.eps_geo);
      const auto nu = pp::measure_from_json(pp::load_json(nu_path), g.eps_geo);
      const auto [dist, plan] = pp::wasserstein(mu, nu);
      Json flows = Json::array();
      for (const auto& [i, j, f] : plan.flows)
        flows.push_back({{"from", i}, {"to", j}, {"mass", f}});
      report["result"] = {{"distance", dist}, {"plan", flows}};
      emit(g, report);
    } else if (*cmd_wassnorm) {
      report["command"] = "wassnorm";
      report["inputs"] = {{"mu", input_entry(mu_path)}};
      const auto mu = pp::measure_from_json(pp::load_json(mu_path), g.eps_geo);
      report["result"] = {{"norm", pp::wasserstein_norm(mu)}};
      emit(g, report);
    } else if (*cmd_tv) {
      report["command"] = "tv";
      report["inputs"] = {{"mu", input_entry(mu_path)}};
      const auto mu = pp::measure_from_json(pp::load_json(mu_path), g.eps_geo);
      report["result"] = {{"tv", pp::tv_norm(mu)}};
      emit(g, report);
    } else if (*cmd_stab) {
      report["command"] = "stability";
      report["inputs"] = {{"polytope", input_entry(polytope_path)}};
      const pp::Polytope P = pp::load_polytope(polytope_path, g.eps_geo);
      const pp::CompositeMomentFunctional phi(resolve_functional(functional), P.dim());
      const auto rep = pp::stability_report(P, phi, refine, restarts, g.stability_tol);
      Json residuals = Json::array();
      for (const auto& [f, r] : rep.reversible_residuals)
        residuals.push_back({{"facet", f}, {"residual", vec_json(r)}});
      report["result"] = {{"verdict", verdict_name(rep.verdict)},
                          {"reversible_residuals", residuals},
                          {"max_reversible_residual", rep.max_reversible_residual},
                          {"projection_objective", rep.projection_objective},
                          {"inner_product", rep.inner_product},
                          {"h_norm", rep.h_norm},
                          {"g_norm", rep.g_norm},
                          {"refinement", rep.refinement},
                          {"restarts", rep.restarts}};
      if (rep.crosscheck_ran) {
        report["result"]["crosscheck"] = {{"t", rep.crosscheck_t},
                                          {"phi_base", rep.phi_base},
                                          {"phi_perturbed", rep.phi_perturbed}};
      }
      if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw pp::ParseError("cannot write: " + csv_path);
        csv << "facet,component,residual\n";
        for (const auto& [f, r] : rep.reversible_residuals)
          for (int i = 0; i < r.size(); ++i)
            csv << f << "," << i << "," << Json(r[i]).dump() << "\n";
      }
      emit(g, report);
      if (rep.verdict == pp::Verdict::Inconclusive) return 3;
    }
    return 0;
  } catch (const pp::SolverStalled& e) {
    std::cerr << Json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
    return 3;
  } catch (const pp::Error& e) {
    std::cerr << Json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", {{"kind", "Unhandled"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }
}
