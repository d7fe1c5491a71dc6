// gwsos: moment relaxations of discrete Gromov-Wasserstein problems.

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwsos/metric.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gwsos;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMaxIter = 2;
constexpr int kExitRowFailed = 3;

struct InputFlags {
  std::string source;
  std::string target;
  std::string weights_source;
  std::string weights_target;
  bool distances = false;
};

struct ModelFlags {
  double p = 2.0;
  double q = 1.0;
  int level = 1;
  std::string hierarchy = "first-level";
  double tol = 1e-6;
  std::int64_t max_iter = 200'000;
  std::uint64_t seed = 0;
  int log_every = 0;
  std::string out;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  }
  return hex.str();
}

MetricMeasureSpace load_space(const std::string& path, const std::string& weights, bool distances) {
  std::optional<fs::path> w;
  if (!weights.empty()) w = weights;
  return distances ? load_distance_matrix(path, w) : load_point_cloud(path, w);
}

json file_entry(const std::string& path) {
  return {{"path", path}, {"sha256", sha256_file(path)}};
}

json input_digests(const InputFlags& in) {
  json out = json::object();
  out["source"] = file_entry(in.source);
  if (!in.target.empty()) out["target"] = file_entry(in.target);
  if (!in.weights_source.empty()) out["weights_source"] = file_entry(in.weights_source);
  if (!in.weights_target.empty()) out["weights_target"] = file_entry(in.weights_target);
  return out;
}

json coupling_json(const Coupling& pi) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < pi.cols(); ++j) row.push_back(pi(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json warnings_json(const MetricMeasureSpace& x, const MetricMeasureSpace& y) {
  json out = json::array();
  for (const auto& w : x.warnings()) out.push_back("source: " + w);
  for (const auto& w : y.warnings()) out.push_back("target: " + w);
  return out;
}

/// Skeleton shared by every report; numeric fields not produced by the
/// command stay null.
json base_report(const std::string& command, const std::vector<std::string>& argv,
                 const InputFlags& in, const ModelFlags& model) {
  json r;
  r["schema_version"] = kSchemaVersion;
  r["command"] = command;
  r["argv"] = argv;
  r["inputs"] = input_digests(in);
  r["hierarchy"] = model.hierarchy;
  r["level"] = model.level;
  r["p"] = model.p;
  r["q"] = model.q;
  r["tol"] = model.tol;
  r["seed"] = model.seed;
  for (const char* key : {"lower_bound", "upper_bound", "time", "eig_ratio", "err_ratio"}) {
    r[key] = nullptr;
  }
  r["solved"] = nullptr;
  r["coupling"] = nullptr;
  r["diagnostics"] = json::object();
  return r;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_report(const json& report, const std::string& out) {
  if (out.empty()) return;
  std::ofstream f(out);
  if (!f) throw ParseError("cannot write report to " + out);
  f << report.dump(2) << '\n';
}

SolverOptions solver_options(const ModelFlags& model) {
  SolverOptions s;
  s.tol = model.tol;
  s.max_iter = model.max_iter;
  s.seed = model.seed;
  if (model.log_every > 0) {
    s.log_interval = model.log_every;
    s.log = &std::cerr;
  }
  return s;
}

void fill_solve_fields(json& r, const SolveResult& result, const Certificate& cert,
                       bool certified) {
  r["lower_bound"] = finite_or_null(result.objective);
  r["time"] = result.wall_time;
  if (certified) {
    r["upper_bound"] = finite_or_null(cert.upper_bound);
    r["eig_ratio"] = finite_or_null(cert.eigenvalue_ratio);
    r["err_ratio"] = finite_or_null(cert.error_ratio);
    r["solved"] = cert.solved;
    r["coupling"] = coupling_json(cert.coupling);
  }
  json& d = r["diagnostics"];
  d["status"] = to_string(result.status);
  d["iterations"] = result.iterations;
  d["primal_residual"] = finite_or_null(result.primal_residual);
  d["dual_residual"] = finite_or_null(result.dual_residual);
  d["gap"] = finite_or_null(result.gap);
  d["dual_objective"] = finite_or_null(result.dual_objective);
  d["exact_zero"] = certified && cert.exact_zero;
  d["refined"] = certified && cert.refined;
}

int exit_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return kExitOk;
    case SolveStatus::MaxIterations: return kExitMaxIter;
    default: return kExitError;
  }
}

struct Solved {
  json report;
  int code = kExitOk;
};

Solved run_solve(const std::string& command, const std::vector<std::string>& argv,
                 const InputFlags& in, const ModelFlags& model) {
  const MetricMeasureSpace x = load_space(in.source, in.weights_source, in.distances);
  const MetricMeasureSpace y = load_space(in.target, in.weights_target, in.distances);
  const CostTensor cost = build_cost_tensor(x, y, model.p, model.q);
  const HierarchyKind kind = parse_hierarchy(model.hierarchy);
  const ConicProblem problem = build_relaxation(kind, cost, x.weights(), y.weights(), model.level);
  const SolverOptions solver = solver_options(model);
  const SolveResult result = solve(problem, solver);

  Solved out;
  out.report = base_report(command, argv, in, model);
  out.report["diagnostics"]["warnings"] = warnings_json(x, y);
  Certificate cert;
  bool certified = false;
  if (result.status == SolveStatus::Optimal || result.status == SolveStatus::MaxIterations) {
    CertifyOptions copt;
    copt.solver = solver;
    try {
      cert = certify(problem, result, cost, copt);
      certified = true;
    } catch (const ToleranceError& e) {
      out.report["diagnostics"]["certificate_error"] = e.what();
    }
  }
  fill_solve_fields(out.report, result, cert, certified);
  out.code = exit_for(result.status);
  return out;
}

void print_summary(const json& r) {
  auto num = [&](const char* key) {
    const json& v = r[key];
    if (v.is_null()) return std::string("n/a");
    std::ostringstream s;
    s << std::setprecision(10) << v.get<double>();
    return s.str();
  };
  std::cout << r["command"].get<std::string>() << ": " << r["hierarchy"].get<std::string>()
            << " level " << r["level"].get<int>() << "\n";
  if (r.contains("value")) std::cout << "  value        " << num("value") << "\n";
  std::cout << "  lower bound  " << num("lower_bound") << "\n"
            << "  upper bound  " << num("upper_bound") << "\n"
            << "  eig ratio    " << num("eig_ratio") << "\n"
            << "  err ratio    " << num("err_ratio") << "\n"
            << "  time         " << num("time") << " s\n";
  if (!r["solved"].is_null()) std::cout << "  solved       " << (r["solved"].get<bool>() ? "yes" : "no") << "\n";
  const json& d = r["diagnostics"];
  if (d.contains("status")) {
    std::cout << "  status       " << d["status"].get<std::string>() << " after "
              << d["iterations"].get<std::int64_t>() << " iterations\n";
  }
  if (d.contains("certificate_error")) {
    std::cout << "  certificate  " << d["certificate_error"].get<std::string>() << "\n";
  }
  if (r.contains("sandwich")) {
    std::cout << "  sandwich     slack " << r["sandwich"]["slack"].get<double>()
              << (r["sandwich"]["global_optimal"].get<bool>() ? " (global optimum)" : "") << "\n";
  }
}

void add_input_flags(CLI::App* cmd, InputFlags& in, bool target) {
  cmd->add_option("--source", in.source, "Source space file (CSV)")->required()->check(CLI::ExistingFile);
  if (target) {
    cmd->add_option("--target", in.target, "Target space file (CSV)")->required()->check(CLI::ExistingFile);
  }
  cmd->add_option("--weights-source", in.weights_source, "Source weights (one column CSV)")
      ->check(CLI::ExistingFile);
  if (target) {
    cmd->add_option("--weights-target", in.weights_target, "Target weights (one column CSV)")
        ->check(CLI::ExistingFile);
  }
  cmd->add_flag("--distances", in.distances, "Inputs are distance matrices instead of point clouds");
}

void add_model_flags(CLI::App* cmd, ModelFlags& model, bool hierarchy) {
  cmd->add_option("-p", model.p, "Exponent on the distortion (>= 1)")->check(CLI::Range(1.0, 1e6));
  cmd->add_option("-q", model.q, "Exponent on the distances (>= 1)")->check(CLI::Range(1.0, 1e6));
  cmd->add_option("--level", model.level, "Relaxation level r")->check(CLI::PositiveNumber);
  if (hierarchy) {
    cmd->add_option("--hierarchy", model.hierarchy, "Relaxation family")
        ->check(CLI::IsMember({"schmudgen", "putinar", "combined", "first-level"}));
  }
  cmd->add_option("--tol", model.tol, "Solver tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", model.max_iter, "Solver iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", model.seed, "Random seed");
  cmd->add_option("--log-every", model.log_every, "Progress line to stderr every k iterations");
  cmd->add_option("--out", model.out, "Report file");
}

std::vector<std::vector<std::string>> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto a = cell.find_first_not_of(" \t");
      const auto b = cell.find_last_not_of(" \t");
      cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string csv_escape(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int run_triangle(const std::string& manifest, bool distances, const ModelFlags& model) {
  const auto rows = read_manifest(manifest);
  const fs::path base = fs::path(manifest).parent_path();
  std::ofstream file;
  if (!model.out.empty()) {
    file.open(model.out);
    if (!file) throw ParseError("cannot write " + model.out);
  }
  std::ostream& out = model.out.empty() ? std::cout : file;
  out << "row,x,y,z,d_xy,d_yz,d_xz,slack,pass,error\n" << std::setprecision(12);

  DistanceOptions opt;
  opt.level = model.level;
  opt.p = model.p;
  opt.q = model.q;
  opt.kind = opt.level == 1 ? HierarchyKind::FirstLevelDNN : HierarchyKind::Schmudgen;
  opt.solver = solver_options(model);
  opt.certify = false;

  int failed = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& cells = rows[k];
    out << k + 1 << ',';
    try {
      if (cells.size() != 3) {
        throw ParseError("manifest row " + std::to_string(k + 1) + ": expected 3 paths, got " +
                         std::to_string(cells.size()));
      }
      std::vector<MetricMeasureSpace> spaces;
      for (const auto& c : cells) {
        const fs::path p = fs::path(c).is_absolute() ? fs::path(c) : base / c;
        spaces.push_back(load_space(p.string(), "", distances));
      }
      const TriangleReport t = triangle_check(spaces[0], spaces[1], spaces[2], opt);
      out << csv_escape(cells[0]) << ',' << csv_escape(cells[1]) << ',' << csv_escape(cells[2]) << ','
          << t.d_xy << ',' << t.d_yz << ',' << t.d_xz << ',' << t.slack << ','
          << (t.pass ? "true" : "false") << ',' << csv_escape(t.message) << '\n';
      if (!t.pass) {
        ++failed;
        std::cerr << "row " << k + 1 << ": " << t.message << '\n';
      }
    } catch (const std::exception& e) {
      ++failed;
      for (std::size_t c = 0; c < 3; ++c) out << csv_escape(c < cells.size() ? cells[c] : "") << ',';
      out << ",,,,false," << csv_escape(e.what()) << '\n';
      std::cerr << "row " << k + 1 << ": " << e.what() << '\n';
    }
  }
  std::cerr << rows.size() - static_cast<std::size_t>(failed) << "/" << rows.size() << " rows pass\n";
  return failed > 0 ? kExitRowFailed : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment relaxations, certificates and distortion distances for discrete "
               "Gromov-Wasserstein problems"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  InputFlags in;
  ModelFlags model;
  std::string manifest;
  std::size_t starts = 64;
  std::string lower_from;

  auto* solve_cmd = app.add_subcommand("solve", "Build, solve and certify a relaxation");
  add_input_flags(solve_cmd, in, true);
  add_model_flags(solve_cmd, model, true);

  auto* distance_cmd = app.add_subcommand("distance", "Distortion distance between two spaces");
  add_input_flags(distance_cmd, in, true);
  add_model_flags(distance_cmd, model, true);

  auto* oracle_cmd = app.add_subcommand("oracle", "Feasible upper bound by local search");
  add_input_flags(oracle_cmd, in, true);
  add_model_flags(oracle_cmd, model, false);
  oracle_cmd->add_option("--starts", starts, "Number of random starts")->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--lower-from", lower_from, "Report whose lower_bound is sandwiched")
      ->check(CLI::ExistingFile);

  auto* triangle_cmd = app.add_subcommand("triangle", "Triangle inequality checks over a manifest");
  triangle_cmd->add_option("--manifest", manifest, "CSV of space-file triples")
      ->required()
      ->check(CLI::ExistingFile);
  triangle_cmd->add_flag("--distances", in.distances, "Inputs are distance matrices");
  add_model_flags(triangle_cmd, model, false);

  auto* export_cmd = app.add_subcommand("export", "Write the relaxation in SDPA sparse format");
  add_input_flags(export_cmd, in, true);
  add_model_flags(export_cmd, model, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (solve_cmd->parsed()) {
      Solved s = run_solve("solve", args, in, model);
      write_report(s.report, model.out);
      print_summary(s.report);
      return s.code;
    }
    if (distance_cmd->parsed()) {
      model.tol = distance_cmd->count("--tol") ? model.tol : DistanceOptions{}.solver.tol;
      Solved s = run_solve("distance", args, in, model);
      const json& lb = s.report["lower_bound"];
      s.report["value"] =
          lb.is_null() ? json(nullptr) : json(std::pow(std::max(lb.get<double>(), 0.0), 1.0 / model.p));
      s.report["tol"] = model.tol;
      write_report(s.report, model.out);
      print_summary(s.report);
      return s.code;
    }
    if (oracle_cmd->parsed()) {
      const MetricMeasureSpace x = load_space(in.source, in.weights_source, in.distances);
      const MetricMeasureSpace y = load_space(in.target, in.weights_target, in.distances);
      const CostTensor cost = build_cost_tensor(x, y, model.p, model.q);
      const auto t0 = std::chrono::steady_clock::now();
      const OracleResult o = best_oracle(cost, x.weights(), y.weights(), starts, model.seed);
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json r = base_report("oracle", args, in, model);
      r["hierarchy"] = "none";
      r["upper_bound"] = o.best_value;
      r["time"] = elapsed;
      r["coupling"] = coupling_json(o.best_coupling);
      r["diagnostics"]["method"] = to_string(o.method);
      r["diagnostics"]["starts"] = o.starts;
      r["diagnostics"]["vertices"] = o.vertices;
      r["diagnostics"]["warnings"] = warnings_json(x, y);
      if (!lower_from.empty()) {
        std::ifstream f(lower_from);
        const json prior = json::parse(f);
        if (!prior.contains("lower_bound") || prior["lower_bound"].is_null()) {
          throw ParseError(lower_from + ": no lower_bound");
        }
        const SandwichReport sw = sandwich(prior["lower_bound"].get<double>(), o.best_value);
        r["lower_bound"] = sw.lower_bound;
        r["sandwich"] = {{"slack", sw.slack}, {"global_optimal", sw.global_optimal}};
      }
      write_report(r, model.out);
      print_summary(r);
      return kExitOk;
    }
    if (triangle_cmd->parsed()) {
      if (!triangle_cmd->count("--tol")) model.tol = DistanceOptions{}.solver.tol;
      return run_triangle(manifest, in.distances, model);
    }
    if (export_cmd->parsed()) {
      const MetricMeasureSpace x = load_space(in.source, in.weights_source, in.distances);
      const MetricMeasureSpace y = load_space(in.target, in.weights_target, in.distances);
      const CostTensor cost = build_cost_tensor(x, y, model.p, model.q);
      const ConicProblem problem = build_relaxation(parse_hierarchy(model.hierarchy), cost,
                                                    x.weights(), y.weights(), model.level);
      if (model.out.empty()) {
        write_sdpa(problem, std::cout);
      } else {
        std::ofstream f(model.out);
        if (!f) throw ParseError("cannot write " + model.out);
        write_sdpa(problem, f);
      }
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
