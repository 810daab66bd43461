// amplab: numerical laboratory for the Dirichlet p-Laplacian problem
// -(|u'|^{p-2}u')' = lambda |u|^{p-2} u + f(x) on an interval, with tools for
// the critical value lambda_star, the anti-maximum threshold lambda_f, and
// the ground-state branch.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amplab/amp_analysis.hpp"
#include "amplab/config.hpp"
#include "amplab/io.hpp"
#include "amplab/lambda_star.hpp"
#include "amplab/solver.hpp"
#include "amplab/spectrum.hpp"

namespace {

using namespace amplab;

std::vector<double> parse_grid_spec(const std::string& spec) {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(spec);
  if (!(is >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 || !(hi > lo))
    fail(errc::bad_config, "grid spec must be lo:hi:count with hi > lo, got '" + spec + "'");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] =
        count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return g;
}

WeightFunction build_weight(const RunConfig& cfg, const Mesh1D& mesh) {
  const double L = mesh.length();
  switch (cfg.f_spec.kind) {
    case FSpec::Kind::Constant: {
      const double c = cfg.f_spec.param;
      return WeightFunction::sample(mesh, [c](double) { return c; });
    }
    case FSpec::Kind::OneMinusSin:
      return WeightFunction::sample(mesh, [&](double x) { return 1.0 - std::sin(M_PI * (x - mesh.a) / L); });
    case FSpec::Kind::OneMinusSinPlus: {
      const double c = cfg.f_spec.param;
      return WeightFunction::sample(mesh,
                                    [&, c](double x) { return 1.0 + c - std::sin(M_PI * (x - mesh.a) / L); });
    }
    case FSpec::Kind::Phi1: {
      EigenPair e1 = first_eigenpair(cfg.p, mesh, EigenOptions{cfg.eigen_tol, 200000});
      return WeightFunction(std::move(e1.fn), true);
    }
    case FSpec::Kind::NodalFile: {
      std::ifstream in(cfg.f_spec.path);
      if (!in) fail(errc::bad_config, "cannot open weight file '" + cfg.f_spec.path + "'");
      GridFunction g = read_gridfunction_table(in);
      if (g.mesh.n != mesh.n || std::abs(g.mesh.a - mesh.a) > 1e-9 || std::abs(g.mesh.b - mesh.b) > 1e-9)
        fail(errc::mesh_mismatch, "weight file mesh does not match the run mesh");
      return WeightFunction(GridFunction(mesh, std::move(g.values)), true);
    }
    case FSpec::Kind::VanishingSequence: {
      EigenPair e1 = first_eigenpair(cfg.p, mesh, EigenOptions{cfg.eigen_tol, 200000});
      return vanishing_sequence_weight(cfg.f_spec.index, mesh, e1.fn);
    }
    case FSpec::Kind::Random: {
      std::mt19937_64 rng(cfg.f_spec.seed);
      std::uniform_real_distribution<double> coef(-1.0, 1.0);
      std::vector<double> a(6);
      for (double& v : a) v = coef(rng);
      return WeightFunction::sample(mesh, [&](double x) {
        double v = 0.3;
        for (std::size_t k = 0; k < a.size(); ++k)
          v += a[k] / static_cast<double>(k + 1) * std::sin(static_cast<double>(k + 1) * M_PI * (x - mesh.a) / L);
        return std::max(v, 0.0) + 0.05;
      });
    }
  }
  fail(errc::bad_config, "unhandled f spec");
}

AmpOptions amp_options_from(const RunConfig& cfg) {
  AmpOptions o;
  o.bisect_tol_rel = cfg.bisect_tol_rel;
  o.margin_rel = cfg.margin_rel;
  o.eigen = EigenOptions{cfg.eigen_tol, 200000};
  o.lambda_star = LambdaStarOptions{};
  o.lambda_star.seed = cfg.seed;
  o.solve = SolveOptions{};
  o.solve.solve_tol = cfg.solve_tol;
  o.solve.margin_rel = cfg.margin_rel;
  o.solve.delta_rel = cfg.delta_rel;
  return o;
}

struct OutputSink {
  std::filesystem::path dir;

  explicit OutputSink(const std::string& d) : dir(d) { std::filesystem::create_directories(dir); }

  std::ofstream open(const std::string& name) const {
    std::ofstream out(dir / name);
    if (!out) fail(errc::bad_config, "cannot write to " + (dir / name).string());
    return out;
  }

  void write_json(const std::string& name, const nlohmann::json& j) const {
    auto out = open(name);
    out << j.dump(2) << '\n';
  }

  void write_summary(const std::string& name, const std::string& text) const {
    auto out = open(name);
    out << text;
    std::cout << text;
  }

  void write_gridfunction(const std::string& stem, const GridFunction& u) const {
    auto dat = open(stem + ".dat");
    write_gridfunction_table(dat, u);
    write_json(stem + ".json", gridfunction_to_json(u));
  }
};

int run_eigen(const RunConfig& cfg, int index) {
  const Mesh1D mesh = Mesh1D::make(cfg.a, cfg.b, cfg.n);
  const EigenOptions eo{cfg.eigen_tol, 200000};
  const EigenPair e = index == 1 ? first_eigenpair(cfg.p, mesh, eo) : second_eigenpair(cfg.p, mesh, eo);
  OutputSink sink(cfg.output_dir);
  sink.write_json("eigenpair.json", eigenpair_to_json(e, cfg.p));
  sink.write_gridfunction("eigenfunction", e.fn);
  std::ostringstream s;
  s << "eigenpair index " << e.index << " on (" << format_double(mesh.a) << ", " << format_double(mesh.b)
    << "), n = " << mesh.n << ", p = " << format_double(cfg.p) << "\n"
    << "  value      = " << format_double(e.value) << "\n"
    << "  residual   = " << format_double(e.residual) << "\n"
    << "  iterations = " << e.iterations << "\n";
  sink.write_summary("eigen_summary.txt", s.str());
  return 0;
}

int run_lambda_star(const RunConfig& cfg) {
  const Mesh1D mesh = Mesh1D::make(cfg.a, cfg.b, cfg.n);
  const WeightFunction f = build_weight(cfg, mesh);
  LambdaStarOptions opts;
  opts.seed = cfg.seed;
  const LambdaStarResult r = lambda_star(cfg.p, f, opts);
  const EigenOptions eo{cfg.eigen_tol, 200000};
  const double lambda1 = first_eigenpair(cfg.p, mesh, eo).value;
  const double lambda2 =
      mesh.n % 2 == 1 ? second_eigenpair(cfg.p, mesh, eo).value
                      : (cfg.p == 2.0 ? discrete_p2_eigenvalue(mesh, 2) : std::numeric_limits<double>::quiet_NaN());
  OutputSink sink(cfg.output_dir);
  sink.write_json("lambda_star.json", lambda_star_to_json(r, cfg.p, lambda1, lambda2));
  sink.write_gridfunction("lambda_star_minimizer", r.minimizer);
  std::ostringstream s;
  s << "critical value for f = " << cfg.f_spec.describe() << ", p = " << format_double(cfg.p) << "\n"
    << "  lambda_star = " << format_double(r.value) << "\n"
    << "  lambda1     = " << format_double(lambda1) << "\n"
    << "  lambda2     = " << format_double(lambda2) << "\n"
    << "  constraint residual = " << format_double(r.constraint_residual) << "\n";
  sink.write_summary("lambda_star_summary.txt", s.str());
  return 0;
}

int run_solve(const RunConfig& cfg) {
  if (!cfg.lambda) fail(errc::bad_config, "solve needs --lambda");
  const Mesh1D mesh = Mesh1D::make(cfg.a, cfg.b, cfg.n);
  const WeightFunction f = build_weight(cfg, mesh);
  const AmpOptions opts = amp_options_from(cfg);
  Solution s;
  if (cfg.p == 2.0 || *cfg.lambda < 0.0) {
    SolveOptions so = opts.solve;
    if (cfg.p == 2.0) {
      s = *cfg.lambda < first_eigenpair(cfg.p, mesh, opts.eigen).value
              ? solve_subcritical(cfg.p, *cfg.lambda, f, so)
              : linear_solve_p2(*cfg.lambda, f, so);
    } else {
      s = solve_subcritical(cfg.p, *cfg.lambda, f, so);
    }
  } else {
    const detail::Landscape L = detail::make_landscape(cfg.p, f, mesh, opts);
    s = detail::ground_state_at(cfg.p, *cfg.lambda, f, L, detail::hinted_solve_options(L, opts));
  }
  OutputSink sink(cfg.output_dir);
  sink.write_json("solution.json", solution_to_json(s));
  sink.write_gridfunction("solution", s.u);
  std::ostringstream os;
  os << "solution at lambda = " << format_double(s.lambda) << ", p = " << format_double(s.p)
     << ", f = " << cfg.f_spec.describe() << "\n"
     << "  method          = " << solve_method_name(s.method) << "\n"
     << "  energy          = " << format_double(s.energy) << "\n"
     << "  sign class      = " << sign_class_name(s.sign_class) << "\n"
     << "  pde residual    = " << format_double(s.pde_residual) << "\n"
     << "  nehari residual = " << format_double(s.nehari_residual) << "\n";
  sink.write_summary("solve_summary.txt", os.str());
  return 0;
}

int run_lambda_f(const RunConfig& cfg) {
  const Mesh1D mesh = Mesh1D::make(cfg.a, cfg.b, cfg.n);
  const WeightFunction f = build_weight(cfg, mesh);
  const AmpEstimate est = lambda_f_estimate(cfg.p, f, mesh, amp_options_from(cfg));
  OutputSink sink(cfg.output_dir);
  sink.write_json("amp_estimate.json", amp_estimate_to_json(est));
  std::ostringstream s;
  s << "anti-maximum threshold for f = " << cfg.f_spec.describe() << ", p = " << format_double(cfg.p) << "\n"
    << "  lambda1     = " << format_double(est.lambda1) << "\n"
    << "  lambda_f    = " << format_double(est.lambda_f) << "  (+/- " << format_double(est.bisection_width)
    << ")\n"
    << "  lambda_star = " << format_double(est.lambda_star) << "\n"
    << "  lambda2     = " << format_double(est.lambda2) << "\n"
    << "  certifies   = " << est.certifies << "\n";
  sink.write_summary("lambda_f_summary.txt", s.str());
  return 0;
}

int run_branch(const RunConfig& cfg, const std::string& grid_spec) {
  const Mesh1D mesh = Mesh1D::make(cfg.a, cfg.b, cfg.n);
  const WeightFunction f = build_weight(cfg, mesh);
  const AmpOptions opts = amp_options_from(cfg);
  const detail::Landscape L = detail::make_landscape(cfg.p, f, mesh, opts);

  std::vector<double> grid;
  if (!grid_spec.empty()) {
    grid = parse_grid_spec(grid_spec);
  } else if (!cfg.lambda_grid.empty()) {
    grid = cfg.lambda_grid;
  } else {
    // Default: 50 points spread over the three windows, margins excluded.
    const double m4 = 4.0 * opts.margin_rel;
    auto fill = [&grid](double lo, double hi, int count) {
      if (!(hi > lo)) return;
      for (int i = 0; i < count; ++i)
        grid.push_back(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(count));
    };
    fill(0.25 * L.e1.value, L.e1.value * (1.0 - m4), 8);
    fill(L.e1.value * (1.0 + m4), L.star.value * (1.0 - m4), 21);
    fill(L.star.value * (1.0 + m4), L.lambda2 * (1.0 - m4), 21);
  }

  const BranchMode mode = cfg.cold_start ? BranchMode::ParallelCold : BranchMode::SequentialWarm;
  const std::vector<BranchPoint> branch = detail::branch_trace_impl(cfg.p, f, L, grid, opts, mode, cfg.jobs);

  OutputSink sink(cfg.output_dir);
  {
    auto csv = sink.open("branch.csv");
    write_branch_csv(csv, branch);
  }
  int failures = 0;
  for (const BranchPoint& b : branch)
    if (!b.converged) ++failures;
  sink.write_json("branch_summary.json",
                  nlohmann::json{{"p", cfg.p},
                                 {"points", branch.size()},
                                 {"failures", failures},
                                 {"lambda1", L.e1.value},
                                 {"lambda_star", L.star.value},
                                 {"lambda2", L.lambda2},
                                 {"mode", cfg.cold_start ? "parallel-cold" : "sequential-warm"}});
  std::ostringstream s;
  s << "branch sweep: " << branch.size() << " points, " << failures << " failures, f = " << cfg.f_spec.describe()
    << ", p = " << format_double(cfg.p) << "\n"
    << "  lambda1 = " << format_double(L.e1.value) << ", lambda_star = " << format_double(L.star.value)
    << ", lambda2 = " << format_double(L.lambda2) << "\n"
    << "  wrote branch.csv\n";
  sink.write_summary("branch_summary.txt", s.str());
  return failures == 0 ? 0 : 1;
}

int run_example(const RunConfig& cfg) {
  const Mesh1D mesh = Mesh1D::make(0.0, M_PI, cfg.n);
  const double lambda0 = paper_example_lambda0(mesh, amp_options_from(cfg));
  const bool in_bracket = lambda0 > 3.0 && lambda0 < 3.5;
  OutputSink sink(cfg.output_dir);
  sink.write_json("example.json",
                  nlohmann::json{{"lambda0", lambda0}, {"bracket_low", 3.0}, {"bracket_high", 3.5},
                                 {"in_bracket", in_bracket}, {"n", cfg.n}});
  std::ostringstream s;
  s << "zero of the pairing for -u'' = lambda u + (1 - sin x) on (0, pi), n = " << cfg.n << "\n"
    << "  lambda0 = " << format_double(lambda0) << "\n"
    << "  inside (3, 3.5): " << (in_bracket ? "yes" : "NO") << "\n";
  sink.write_summary("example_summary.txt", s.str());
  return in_bracket ? 0 : 1;
}

int run_verify(const RunConfig& cfg) {
  const Mesh1D mesh = Mesh1D::make(cfg.a, cfg.b, cfg.n);
  const WeightFunction f = build_weight(cfg, mesh);
  const VerificationReport rep = verify_theorems(cfg.p, f, mesh, amp_options_from(cfg));
  OutputSink sink(cfg.output_dir);
  sink.write_json("verification.json", verification_report_to_json(rep));
  std::ostringstream s;
  s << "theorem battery for f = " << cfg.f_spec.describe() << ", p = " << format_double(cfg.p)
    << " (certifies " << rep.certifies << ")\n";
  for (const CheckEntry& e : rep.entries) {
    s << "  [" << (!e.applicable ? " n/a" : (e.passed ? "pass" : "FAIL")) << "] " << e.check_id;
    if (e.applicable)
      s << "  measured = " << format_double(e.measured) << ", tolerance = " << format_double(e.tolerance);
    if (!e.note.empty()) s << "  (" << e.note << ")";
    s << "\n";
  }
  s << (rep.all_passed ? "all applicable checks passed\n" : "SOME CHECKS FAILED\n");
  sink.write_summary("verify_summary.txt", s.str());
  return rep.all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"amplab: p-Laplacian anti-maximum principle laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file; flags override it");

  // Shared flags, applied on top of the config file.
  struct Flags {
    std::optional<double> p, a, b;
    std::optional<int> n, jobs;
    std::optional<double> eigen_tol, solve_tol, bisect_tol, margin, delta;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::vector<std::string> f_parts;
    std::optional<double> lambda;
    bool cold_start = false;
  } flags;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--p", flags.p, "exponent p > 1");
    cmd->add_option("--a", flags.a, "left endpoint");
    cmd->add_option("--b", flags.b, "right endpoint");
    cmd->add_option("--n", flags.n, "interior nodes");
    cmd->add_option("--f", flags.f_parts,
                    "weight spec: constant[:c] | one_minus_sin | one_minus_sin_plus [c] | phi1 | "
                    "nodal_file:path | vanishing_sequence:k | random:seed")
        ->expected(1, 2);
    cmd->add_option("--eigen-tol", flags.eigen_tol, "eigen solver gradient tolerance");
    cmd->add_option("--solve-tol", flags.solve_tol, "solver residual tolerance");
    cmd->add_option("--bisect-tol", flags.bisect_tol, "bisection width, relative to lambda2 - lambda1");
    cmd->add_option("--margin", flags.margin, "relative margin around thresholds");
    cmd->add_option("--delta", flags.delta, "sign classification threshold");
    cmd->add_option("--seed", flags.seed, "random seed for multi-starts");
    cmd->add_option("--jobs", flags.jobs, "parallel workers for cold-started sweeps");
    cmd->add_option("--output-dir,-o", flags.output_dir, "output directory");
  };

  CLI::App* eigen = app.add_subcommand("eigen", "first or second eigenpair");
  int eigen_index = 1;
  eigen->add_option("--index", eigen_index, "eigenpair index (1 or 2)")->check(CLI::Range(1, 2));
  add_common(eigen);

  CLI::App* lstar = app.add_subcommand("lambda-star", "critical value and its minimizer");
  add_common(lstar);

  CLI::App* solve = app.add_subcommand("solve", "ground-state solve at a single lambda");
  solve->add_option("--lambda", flags.lambda, "spectral parameter");
  add_common(solve);

  CLI::App* lamf = app.add_subcommand("lambda-f", "anti-maximum threshold estimate");
  add_common(lamf);

  CLI::App* branch = app.add_subcommand("branch", "ground-state branch sweep");
  std::string grid_spec;
  branch->add_option("--grid", grid_spec, "lambda grid as lo:hi:count (default: window-filling 50 points)");
  branch->add_flag("--cold-start", flags.cold_start, "parallel cold-started sweep instead of warm-started");
  add_common(branch);

  CLI::App* example = app.add_subcommand("example", "reproduce the 1 - sin(x) worked example on (0, pi)");
  add_common(example);

  CLI::App* verify = app.add_subcommand("verify", "run the theorem battery; exit 0 only if all checks pass");
  add_common(verify);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (const char* env = std::getenv("AMP_LAB_OUTPUT_DIR")) cfg.output_dir = env;
    if (!config_path.empty()) cfg = parse_config(config_path, cfg);
    if (flags.p) cfg.p = *flags.p;
    if (flags.a) cfg.a = *flags.a;
    if (flags.b) cfg.b = *flags.b;
    if (flags.n) cfg.n = *flags.n;
    if (flags.eigen_tol) cfg.eigen_tol = *flags.eigen_tol;
    if (flags.solve_tol) cfg.solve_tol = *flags.solve_tol;
    if (flags.bisect_tol) cfg.bisect_tol_rel = *flags.bisect_tol;
    if (flags.margin) cfg.margin_rel = *flags.margin;
    if (flags.delta) cfg.delta_rel = *flags.delta;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.jobs) cfg.jobs = *flags.jobs;
    if (flags.output_dir) cfg.output_dir = *flags.output_dir;
    if (flags.lambda) cfg.lambda = *flags.lambda;
    if (flags.cold_start) cfg.cold_start = true;
    if (!flags.f_parts.empty()) {
      std::string spec = flags.f_parts[0];
      if (flags.f_parts.size() == 2) spec += ":" + flags.f_parts[1];
      cfg.f_spec = FSpec::parse(spec);
    }
    cfg.validate();

    if (*eigen) return run_eigen(cfg, eigen_index);
    if (*lstar) return run_lambda_star(cfg);
    if (*solve) return run_solve(cfg);
    if (*lamf) return run_lambda_f(cfg);
    if (*branch) return run_branch(cfg, grid_spec);
    if (*example) return run_example(cfg);
    if (*verify) return run_verify(cfg);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const Error& e) {
    if (e.code() == errc::bad_config) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 2;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
