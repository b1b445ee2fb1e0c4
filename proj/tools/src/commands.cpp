#include "sweepcli/commands.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "sweep/errors.hpp"
#include "sweep/pmp.hpp"
#include "sweepcli/artifacts.hpp"
#include "sweepcli/registry.hpp"

namespace sweepcli {

using nlohmann::json;
using sweep::Mat;
using sweep::Vec;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double to_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("not a number in " + what + ": '" + s + "'");
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size()) throw UsageError("not a number in " + what + ": '" + s + "'");
  return v;
}

bool numeric_row(const std::vector<std::string>& cells) {
  try {
    for (const std::string& c : cells) to_number(c, "csv");
  } catch (const UsageError&) {
    return false;
  }
  return true;
}

// Rows of a CSV file and its header (empty when the first row is numeric).
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (first && !numeric_row(cells)) {
      header = cells;
    } else {
      std::vector<double> r;
      for (const std::string& c : cells) r.push_back(to_number(c, path));
      rows.push_back(std::move(r));
    }
    first = false;
  }
  return {header, rows};
}

Vec start_point(const sweep::SweepingProblem& prob) {
  if (prob.C0.point.size() == prob.n()) return prob.C0.point;
  return Vec::Zero(prob.n());
}

std::string control_csv(const sweep::ControlSignal& u) {
  std::ostringstream os;
  os << std::setprecision(17) << "t";
  for (int i = 0; i < u.dim(); ++i) os << ",u" << i + 1;
  os << "\n";
  for (int j = 0; j < u.grid().N; ++j) {
    os << u.grid().t(j);
    for (int i = 0; i < u.dim(); ++i) os << "," << u.cell(j)[i];
    os << "\n";
  }
  return os.str();
}

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Exceptions to exit codes, with the message on `err`.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sweep::TerminalInfeasible& e) {
    err << "error: " << e.what() << " (terminal residual " << e.residual() << ")\n";
    return kExitFail;
  } catch (const sweep::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFail;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFail;
  }
}

}  // namespace

ProblemFile resolve_problem(const std::string& ref) {
  if (std::filesystem::exists(ref)) return load_problem(ref);
  for (const Example& e : examples()) {
    if (e.name == ref) return e.file;
  }
  throw UsageError("no problem file or builtin example named '" + ref + "'");
}

sweep::ControlSignal parse_control(const std::string& spec, const sweep::Grid& grid, int m) {
  if (spec.rfind("const:", 0) == 0) {
    const auto parts = split(spec.substr(6), ',');
    Vec u(m);
    if (static_cast<int>(parts.size()) == 1) {
      u.setConstant(to_number(parts[0], "control"));
    } else if (static_cast<int>(parts.size()) == m) {
      for (int i = 0; i < m; ++i) u[i] = to_number(parts[static_cast<std::size_t>(i)], "control");
    } else {
      throw UsageError("const control needs 1 or " + std::to_string(m) + " values");
    }
    return sweep::ControlSignal::constant(grid, u);
  }
  if (spec.rfind("csv:", 0) == 0) {
    const auto [header, rows] = read_csv(spec.substr(4));
    // A leading t column (as written by solve) is skipped.
    const std::size_t skip = !header.empty() && header[0] == "t" ? 1 : 0;
    if (static_cast<int>(rows.size()) != grid.N) {
      throw UsageError("control csv needs " + std::to_string(grid.N) + " rows, got " +
                       std::to_string(rows.size()));
    }
    Mat values(m, grid.N);
    for (int j = 0; j < grid.N; ++j) {
      const auto& r = rows[static_cast<std::size_t>(j)];
      if (r.size() != skip + static_cast<std::size_t>(m)) {
        throw UsageError("control csv rows need " + std::to_string(m) + " values");
      }
      for (int i = 0; i < m; ++i) values(i, j) = r[skip + static_cast<std::size_t>(i)];
    }
    return sweep::ControlSignal(grid, values);
  }
  throw UsageError("control must be const:... or csv:...");
}

sweep::ResidualReport verify_with(const sweep::PmpCertificate& cert,
                                  const sweep::SweepingProblem& prob, const GlobalOptions& g) {
  sweep::VerifyOptions vo;
  vo.tol_scale = g.tol_scale;
  vo.seed = g.seed;
  vo.threads = g.threads;
  return sweep::verify(cert, prob, vo);
}

int cmd_check(const CheckOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemFile pf = resolve_problem(o.problem);
    const BuiltProblem b = build_problem(pf, g.seed, o.samples);
    const sweep::SweepingProblem& prob = b.problem;
    const sweep::SweepingSet& S = prob.spec.set();

    const std::vector<Vec> bnd = sweep::sample_boundary(S, b.region, o.samples, g.seed);
    const sweep::A22Result a22 = sweep::check_A22(S, bnd);
    double b_samples = 0.0;
    for (const Vec& x : bnd) {
      if (!sweep::active_set(S, x, 1e-7).empty()) {
        b_samples = std::max(b_samples, sweep::check_A23(S, x, 1e-7).b_hat);
      }
    }

    // Points where A2.3 is checked along a path.
    Mat path;
    if (!o.trajectory_csv.empty()) {
      const auto [header, rows] = read_csv(o.trajectory_csv);
      const std::size_t skip = !header.empty() && header[0] == "t" ? 1 : 0;
      path.resize(prob.n(), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() < skip + static_cast<std::size_t>(prob.n())) {
          throw UsageError("trajectory csv rows need " + std::to_string(prob.n()) + " states");
        }
        for (int i = 0; i < prob.n(); ++i) path(i, static_cast<Eigen::Index>(j)) = rows[j][skip + i];
      }
    } else {
      const sweep::Grid grid{prob.T(), prob.T() > 0.0 ? b.N : 0};
      const sweep::ControlSignal u =
          o.control.empty()
              ? sweep::ControlSignal::constant(grid, 0.5 * (prob.U.lo + prob.U.hi))
              : parse_control(o.control, grid, prob.m());
      path = sweep::integrate_catching_up(prob.spec, start_point(prob), u, b.substeps).x;
    }
    double b_path = 0.0;
    int active_nodes = 0;
    for (Eigen::Index j = 0; j < path.cols(); ++j) {
      const Vec x = path.col(j);
      if (sweep::active_set(S, x, 1e-6).empty()) continue;
      ++active_nodes;
      b_path = std::max(b_path, sweep::check_A23(S, x, 1e-6).b_hat);
    }
    const double b_hat = std::max(b_path, b_samples);

    const auto rays = sweep::recession_directions(S, b.region.center, 64, 1e4, g.seed);

    out << std::setprecision(6);
    out << "problem " << pf.name << "\n";
    out << "eta_hat " << a22.eta_hat << " (" << a22.used_samples << " boundary samples)\n";
    out << "Mbar_psi " << b.estimate.constants.Mbar_psi << "\n";
    out << "Mbar " << b.Mbar << "\n";
    out << "b_hat " << b_path << " along the path (" << active_nodes << " active nodes), "
        << b_samples << " over boundary samples\n";
    if (!rays.empty()) {
      out << "C looks unbounded (" << rays.size() << " recession rays); suggest ball: {\"y0\": "
          << to_json(b.region.center).dump() << ", \"R0\": " << 10.0 * b.region.radius << "}\n";
    }
    if (!a22.pass) {
      err << "A2.2 failed: active gradients admit a null convex combination (eta_hat "
          << a22.eta_hat << ")\n";
      return kExitFail;
    }
    if (!(b_hat < 1.0)) {
      err << "A2.3 failed: b_hat " << b_hat << " >= 1\n";
      return kExitFail;
    }
    out << "A2.2 pass, A2.3 pass\n";
    return kExitPass;
  });
}

int cmd_simulate(const SimulateOptions& o, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const ProblemFile pf = resolve_problem(o.problem);
    const BuiltProblem b = build_problem(pf, g.seed);
    const sweep::SweepingProblem& prob = b.problem;
    const sweep::SweepingSet& S = prob.spec.set();
    const double gamma = o.gamma ? *o.gamma : b.gammas.back();
    const double eta = S.constants().eta;
    const double bound = eta > 0.0 ? 2.0 * b.Mbar / eta : 0.0;

    std::optional<sweep::PenaltySchedule> sched;
    try {
      sched.emplace(std::vector<double>{gamma}, b.Mbar, S);
    } catch (const sweep::InvalidSchedule& e) {
      std::ostringstream msg;
      msg << "gamma " << gamma << " refused: the schedule requires gamma > 2 Mbar/eta = " << bound
          << " (" << e.what() << ")";
      throw UsageError(msg.str());
    }

    const sweep::Grid grid{prob.T(), prob.T() > 0.0 ? b.N : 0};
    const sweep::ControlSignal u = parse_control(o.control, grid, prob.m());
    if (!u.within(prob.U, 1e-12)) throw UsageError("control leaves the control box");

    const Vec x0 = sweep::initial_state(prob, *sched, 0);
    const sweep::Trajectory tr = sweep::integrate_penalized(prob.spec, gamma, x0, u);

    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["problem"] = pf.name;
    summary["gamma"] = gamma;
    summary["N"] = grid.N;
    summary["x0"] = to_json(x0);
    double margin = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= grid.N; ++j) {
      margin = std::min(margin, -sweep::psi_gamma(S, gamma, tr.x.col(j)).value);
    }
    summary["invariance_margin"] = margin;
    summary["max_xi"] = tr.xi.size() > 0 ? tr.xi.maxCoeff() : 0.0;
    summary["xi_bound"] = bound;

    std::string oracle_csv;
    if (o.oracle) {
      // Same start as the penalized run, so the distance measures the dynamics.
      const sweep::Trajectory orc = sweep::integrate_catching_up(prob.spec, x0, u, b.substeps);
      const sweep::PathDistance d = sweep::compare_to_oracle(tr, orc);
      summary["sup_dist"] = d.sup;
      summary["l2_dist"] = d.l2;
      oracle_csv = trajectory_csv(orc, &u);
    }

    write_atomic(join(o.out, "trajectory.csv"), trajectory_csv(tr, &u));
    if (o.oracle) write_atomic(join(o.out, "oracle.csv"), oracle_csv);
    write_atomic(join(o.out, "summary.json"), dump(summary));

    out << std::setprecision(6) << "gamma " << gamma << " invariance_margin " << margin
        << " max_xi " << summary["max_xi"].get<double>() << " (bound " << bound << ")";
    if (o.oracle) out << " sup_dist " << summary["sup_dist"].get<double>();
    out << "\n";
    return kExitPass;
  });
}

int cmd_solve(const SolveOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemFile pf = resolve_problem(o.problem);
    const BuiltProblem b = build_problem(pf, g.seed);
    const sweep::SweepingProblem& prob = b.problem;
    const sweep::SolveConfig cfg = make_config(b);
    const sweep::Grid grid{prob.T(), cfg.N};
    const Vec u0 = prob.U.clamp(Vec::Zero(prob.m()));
    const sweep::SolveResult res = sweep::solve(prob, cfg, sweep::ControlSignal::constant(grid, u0));

    sweep::CertificateOptions co;
    co.seed = g.seed;
    const sweep::PmpCertificate cert = sweep::extract_certificate(res, prob, cfg, co);
    const sweep::ResidualReport rep = verify_with(cert, prob, g);

    json s;
    s["schema_version"] = kSchemaVersion;
    s["problem"] = pf.name;
    s["J"] = res.J;
    s["objective"] = res.objective;
    s["gamma"] = res.gamma;
    s["terminal_residual"] = res.terminal_residual;
    s["terminal_multiplier"] = to_json(res.terminal_multiplier);
    s["x0"] = to_json(res.trajectory.x.col(0));
    s["xT"] = to_json(res.trajectory.x.col(grid.N));
    s["lambda"] = cert.lambda;
    s["certificate_pass"] = rep.pass;
    s["constants"] = {{"eta", prob.spec.set().constants().eta},
                      {"Mbar_psi", prob.spec.set().constants().Mbar_psi},
                      {"Mbar", b.Mbar},
                      {"estimated", b.estimated}};
    s["log"] = json::array();
    for (const sweep::GammaLog& l : res.log) {
      s["log"].push_back({{"gamma", l.gamma},
                          {"J", l.J},
                          {"iterations", l.iterations},
                          {"evaluations", l.evaluations},
                          {"outer", l.outer},
                          {"pg_norm", l.pg_norm},
                          {"terminal_residual", l.terminal_residual}});
    }

    // Everything is rendered before the first file is written.
    const std::string files[][2] = {
        {"trajectory.csv", trajectory_csv(res.trajectory, &res.control)},
        {"control.csv", control_csv(res.control)},
        {"certificate.json", dump(certificate_to_json(cert))},
        {"report.json", dump(report_to_json(rep))},
        {"solve.json", dump(s)},
    };
    for (const auto& f : files) write_atomic(join(o.out, f[0]), f[1]);

    out << std::setprecision(6) << "J " << res.J << " gamma " << res.gamma << " terminal_residual "
        << res.terminal_residual << " lambda " << cert.lambda << "\n";
    for (const sweep::Residual& r : rep.items) {
      out << "  " << std::left << std::setw(16) << r.name << std::right << std::setw(14) << r.value
          << "  tol " << r.tol << (r.pass ? "  ok" : "  FAIL") << "\n";
    }
    return rep.pass ? kExitPass : kExitFail;
  });
}

int cmd_verify(const VerifyCliOptions& o, const GlobalOptions& g, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const sweep::PmpCertificate cert = certificate_from_json(read_json(o.certificate));
    const BuiltProblem b = build_problem(resolve_problem(o.problem), g.seed);
    try {
      cert.validate(b.problem.n(), b.problem.m(), b.problem.spec.set().count());
    } catch (const sweep::GridMismatch& e) {
      throw SchemaError(std::string("certificate does not fit the problem: ") + e.what());
    }
    const sweep::ResidualReport rep = verify_with(cert, b.problem, g);
    if (!o.out.empty()) write_atomic(o.out, dump(report_to_json(rep)));
    out << std::setprecision(6);
    for (const sweep::Residual& r : rep.items) {
      out << std::left << std::setw(16) << r.name << std::right << std::setw(14) << r.value
          << "  tol " << r.tol << (r.pass ? "  ok" : "  FAIL") << "\n";
    }
    out << (rep.pass ? "pass" : "fail") << "\n";
    return rep.pass ? kExitPass : kExitFail;
  });
}

int cmd_example_list(std::ostream& out) {
  for (const Example& e : examples()) {
    out << std::left << std::setw(16) << e.name << (e.fixture ? "[fixture] " : "") << e.summary
        << "\n";
  }
  return kExitPass;
}

int cmd_example_export(const ExportOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Example& e = find_example(o.name);
    const std::string doc = dump(problem_to_json(e.file));
    std::string cert;
    if (!o.certificate.empty()) {
      if (e.name != "paper-6-1") throw UsageError("closed-form certificate exists for paper-6-1 only");
      if (o.nodes < 1) throw UsageError("--nodes must be positive");
      cert = dump(certificate_to_json(closed_form::certificate(o.nodes)));
    }
    if (o.out.empty()) {
      out << doc;
    } else {
      write_atomic(o.out, doc);
    }
    if (!cert.empty()) write_atomic(o.certificate, cert);
    return kExitPass;
  });
}

}  // namespace sweepcli
