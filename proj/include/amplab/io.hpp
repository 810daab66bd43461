#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amplab/amp_analysis.hpp"
#include "amplab/error.hpp"
#include "amplab/lambda_star.hpp"
#include "amplab/mesh.hpp"
#include "amplab/solver.hpp"
#include "amplab/spectrum.hpp"

namespace amplab {

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

/// Two-column (x, u) table, boundary rows included.
inline void write_gridfunction_table(std::ostream& os, const GridFunction& u) {
  for (int i = 0; i <= u.mesh.n + 1; ++i)
    os << format_double(u.mesh.node(i)) << ' ' << format_double(u.at_node(i)) << '\n';
}

inline GridFunction read_gridfunction_table(std::istream& is) {
  std::vector<double> xs, vs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    double x = 0.0, v = 0.0;
    if (!(row >> x >> v)) fail(errc::bad_config, "malformed table row: '" + line + "'");
    xs.push_back(x);
    vs.push_back(v);
  }
  if (xs.size() < 4) fail(errc::too_coarse, "table needs at least 4 rows (2 interior nodes)");
  const int n = static_cast<int>(xs.size()) - 2;
  const Mesh1D mesh = Mesh1D::make(xs.front(), xs.back(), n);
  GridFunction u(mesh);
  for (int i = 1; i <= n; ++i) u.values[static_cast<std::size_t>(i - 1)] = vs[static_cast<std::size_t>(i)];
  return u;
}

inline nlohmann::json gridfunction_to_json(const GridFunction& u) {
  return nlohmann::json{{"a", u.mesh.a}, {"b", u.mesh.b}, {"n", u.mesh.n}, {"values", u.values}};
}

inline GridFunction gridfunction_from_json(const nlohmann::json& j) {
  const Mesh1D mesh = Mesh1D::make(j.at("a").get<double>(), j.at("b").get<double>(), j.at("n").get<int>());
  return GridFunction(mesh, j.at("values").get<std::vector<double>>());
}

inline nlohmann::json eigenpair_to_json(const EigenPair& e, double p) {
  return nlohmann::json{{"p", p},
                        {"index", e.index},
                        {"value", e.value},
                        {"residual", e.residual},
                        {"iterations", e.iterations}};
}

inline nlohmann::json lambda_star_to_json(const LambdaStarResult& r, double p, double lambda1, double lambda2) {
  return nlohmann::json{{"p", p},
                        {"value", r.value},
                        {"lambda1", lambda1},
                        {"lambda2", lambda2},
                        {"constraint_residual", r.constraint_residual},
                        {"rayleigh_residual", r.rayleigh_residual},
                        {"iterations", r.iterations}};
}

inline nlohmann::json solution_to_json(const Solution& s) {
  return nlohmann::json{{"p", s.p},
                        {"lambda", s.lambda},
                        {"energy", s.energy},
                        {"pde_residual", s.pde_residual},
                        {"nehari_residual", s.nehari_residual},
                        {"sign_class", sign_class_name(s.sign_class)},
                        {"method", solve_method_name(s.method)},
                        {"iterations", s.iterations}};
}

inline nlohmann::json amp_estimate_to_json(const AmpEstimate& e) {
  nlohmann::json probes = nlohmann::json::array();
  for (const AmpProbe& pr : e.certificate)
    probes.push_back({{"lambda", pr.lambda}, {"sign_class", sign_class_name(pr.sign_class)}});
  return nlohmann::json{{"lambda_f", e.lambda_f},
                        {"lambda_star", e.lambda_star},
                        {"lambda1", e.lambda1},
                        {"lambda2", e.lambda2},
                        {"bisection_width", e.bisection_width},
                        {"certifies", e.certifies},
                        {"certificate", probes}};
}

inline nlohmann::json verification_report_to_json(const VerificationReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const CheckEntry& e : r.entries)
    entries.push_back({{"check_id", e.check_id},
                       {"passed", e.passed},
                       {"applicable", e.applicable},
                       {"measured", e.measured},
                       {"expected", e.expected},
                       {"tolerance", e.tolerance},
                       {"note", e.note}});
  return nlohmann::json{{"p", r.p},
                        {"lambda1", r.lambda1},
                        {"lambda2", r.lambda2},
                        {"lambda_star", r.lambda_star},
                        {"lambda_f", r.lambda_f},
                        {"certifies", r.certifies},
                        {"all_passed", r.all_passed},
                        {"checks", entries}};
}

/// Branch CSV: one row per grid point, full double precision.
inline void write_branch_csv(std::ostream& os, const std::vector<BranchPoint>& branch) {
  os << "lambda,energy,sign_class,min_u,max_u,pairing,method,converged\n";
  for (const BranchPoint& b : branch) {
    os << format_double(b.lambda) << ',' << format_double(b.energy) << ',' << sign_class_name(b.sign_class)
       << ',' << format_double(b.min_u) << ',' << format_double(b.max_u) << ',' << format_double(b.pairing)
       << ',' << solve_method_name(b.method) << ',' << (b.converged ? "true" : "false") << '\n';
  }
}

}  // namespace amplab
