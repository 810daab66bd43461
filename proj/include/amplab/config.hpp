#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "amplab/error.hpp"
#include "amplab/functionals.hpp"
#include "amplab/mesh.hpp"
#include "amplab/spectrum.hpp"

namespace amplab {

/// Weight selector: a small tagged value parsed from "constant:2",
/// "one_minus_sin", "one_minus_sin_plus:0.05", "phi1", "nodal_file:path",
/// "vanishing_sequence:3" or "random:seed".
struct FSpec {
  enum class Kind { Constant, OneMinusSin, OneMinusSinPlus, Phi1, NodalFile, VanishingSequence, Random };
  Kind kind = Kind::Constant;
  double param = 1.0;
  std::string path;
  int index = 1;
  std::uint64_t seed = 0;

  static FSpec parse(const std::string& text);
  std::string describe() const;
};

/// Run configuration shared by the command line and the config file.
struct RunConfig {
  double p = 2.0;
  double a = 0.0;
  double b = M_PI;
  int n = 999;
  FSpec f_spec{};
  std::optional<double> lambda;
  std::vector<double> lambda_grid;
  double eigen_tol = 1e-10;
  double solve_tol = 1e-9;
  double bisect_tol_rel = 1e-4;
  double margin_rel = 1e-3;
  double delta_rel = 1e-8;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool cold_start = false;
  std::string output_dir = ".";

  void validate() const {
    if (!(p > 1.0)) fail(errc::bad_config, "p must be > 1, got " + std::to_string(p));
    if (!(b > a)) fail(errc::bad_config, "interval needs b > a");
    if (n < 2) fail(errc::bad_config, "n must be >= 2");
    for (double t : {eigen_tol, solve_tol, bisect_tol_rel, margin_rel, delta_rel})
      if (!(t > 0.0)) fail(errc::bad_config, "tolerances must be positive");
    for (std::size_t i = 1; i < lambda_grid.size(); ++i)
      if (!(lambda_grid[i] > lambda_grid[i - 1])) fail(errc::bad_config, "lambda grid must be sorted increasing");
  }
};

inline FSpec FSpec::parse(const std::string& text) {
  FSpec s;
  std::string head = text, arg;
  for (char sep : {':', '='}) {
    const auto pos = text.find(sep);
    if (pos != std::string::npos) {
      head = text.substr(0, pos);
      arg = text.substr(pos + 1);
      break;
    }
  }
  auto need_number = [&](const char* what) {
    try {
      std::size_t used = 0;
      const double v = std::stod(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
      return v;
    } catch (const std::exception&) {
      fail(errc::bad_config, std::string("f spec '") + text + "' needs a numeric " + what);
    }
  };
  if (head == "constant") {
    s.kind = Kind::Constant;
    s.param = arg.empty() ? 1.0 : need_number("value");
    if (!(s.param > 0.0)) fail(errc::bad_config, "constant weight must be positive");
  } else if (head == "one_minus_sin") {
    s.kind = Kind::OneMinusSin;
  } else if (head == "one_minus_sin_plus") {
    s.kind = Kind::OneMinusSinPlus;
    s.param = arg.empty() ? 0.05 : need_number("offset");
    if (!(s.param > 0.0)) fail(errc::bad_config, "one_minus_sin_plus offset must be positive");
  } else if (head == "phi1") {
    s.kind = Kind::Phi1;
  } else if (head == "nodal_file") {
    s.kind = Kind::NodalFile;
    if (arg.empty()) fail(errc::bad_config, "nodal_file needs a path, e.g. nodal_file:weights.dat");
    s.path = arg;
  } else if (head == "vanishing_sequence") {
    s.kind = Kind::VanishingSequence;
    s.index = arg.empty() ? 1 : static_cast<int>(need_number("index"));
    if (s.index < 1) fail(errc::bad_config, "vanishing_sequence index must be >= 1");
  } else if (head == "random") {
    s.kind = Kind::Random;
    s.seed = arg.empty() ? 0 : static_cast<std::uint64_t>(need_number("seed"));
  } else {
    fail(errc::bad_config, "unknown f spec '" + text + "'");
  }
  return s;
}

inline std::string FSpec::describe() const {
  switch (kind) {
    case Kind::Constant: return "constant:" + std::to_string(param);
    case Kind::OneMinusSin: return "one_minus_sin";
    case Kind::OneMinusSinPlus: return "one_minus_sin_plus:" + std::to_string(param);
    case Kind::Phi1: return "phi1";
    case Kind::NodalFile: return "nodal_file:" + path;
    case Kind::VanishingSequence: return "vanishing_sequence:" + std::to_string(index);
    case Kind::Random: return "random:" + std::to_string(seed);
  }
  return "?";
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& v, int line_no, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(errc::bad_config, "malformed-value at line " + std::to_string(line_no) + ": " + key + " = '" + v + "'");
  }
}

}  // namespace detail

/// Plain key = value configuration, one pair per line, # comments. Values
/// set here are defaults; command-line flags override them.
inline RunConfig parse_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_config, "cannot open config file '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(errc::bad_config, "malformed-value at line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "p") {
      base.p = detail::parse_number(value, line_no, key);
      if (!(base.p > 1.0))
        fail(errc::bad_config, "malformed-value at line " + std::to_string(line_no) + ": p must be > 1");
    } else if (key == "a") {
      base.a = detail::parse_number(value, line_no, key);
    } else if (key == "b") {
      base.b = detail::parse_number(value, line_no, key);
    } else if (key == "n") {
      base.n = static_cast<int>(detail::parse_number(value, line_no, key));
    } else if (key == "f") {
      base.f_spec = FSpec::parse(value);
    } else if (key == "lambda") {
      base.lambda = detail::parse_number(value, line_no, key);
    } else if (key == "eigen_tol") {
      base.eigen_tol = detail::parse_number(value, line_no, key);
    } else if (key == "solve_tol") {
      base.solve_tol = detail::parse_number(value, line_no, key);
    } else if (key == "bisect_tol_rel") {
      base.bisect_tol_rel = detail::parse_number(value, line_no, key);
    } else if (key == "margin_rel") {
      base.margin_rel = detail::parse_number(value, line_no, key);
    } else if (key == "delta_rel") {
      base.delta_rel = detail::parse_number(value, line_no, key);
    } else if (key == "seed") {
      base.seed = static_cast<std::uint64_t>(detail::parse_number(value, line_no, key));
    } else if (key == "jobs") {
      base.jobs = static_cast<int>(detail::parse_number(value, line_no, key));
    } else if (key == "output_dir") {
      base.output_dir = value;
    } else {
      fail(errc::bad_config, "unknown-key at line " + std::to_string(line_no) + ": '" + key + "'");
    }
  }
  return base;
}

}  // namespace amplab
