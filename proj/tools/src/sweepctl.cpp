#include <iostream>

#include <CLI11.hpp>

#include "sweepcli/commands.hpp"

int main(int argc, char** argv) {
  using namespace sweepcli;

  CLI::App app{"Solve and certify optimal control problems for sweeping processes"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "seed for every sampled quantity")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--tol-scale", g.tol_scale, "multiplies every verifier tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CheckOptions co;
  auto* check = app.add_subcommand("check", "estimate constants and test the set assumptions");
  check->add_option("problem", co.problem, "problem file or builtin name")->required();
  check->add_option("--trajectory", co.trajectory_csv, "CSV with columns t,x1..xn");
  check->add_option("--control", co.control, "const:v,... or csv:path for the oracle path");
  check->add_option("--samples", co.samples, "boundary samples")->capture_default_str();

  SimulateOptions so;
  double gamma = 0.0;
  auto* sim = app.add_subcommand("simulate", "integrate the penalized system for one control");
  sim->add_option("problem", so.problem, "problem file or builtin name")->required();
  auto* gamma_opt = sim->add_option("--gamma", gamma, "penalty parameter");
  sim->add_option("--control", so.control, "const:v,... or csv:path")->capture_default_str();
  sim->add_flag("--oracle", so.oracle, "also run the catching-up scheme and compare");
  sim->add_option("--out", so.out, "output directory")->capture_default_str();

  SolveOptions vo;
  auto* solve = app.add_subcommand("solve", "solve over the penalty schedule and certify");
  solve->add_option("problem", vo.problem, "problem file or builtin name")->required();
  solve->add_option("--out", vo.out, "output directory")->capture_default_str();

  VerifyCliOptions ver;
  auto* verify = app.add_subcommand("verify", "check a certificate against a problem");
  verify->add_option("certificate", ver.certificate, "certificate JSON")->required();
  verify->add_option("problem", ver.problem, "problem file or builtin name")->required();
  verify->add_option("--out", ver.out, "report JSON path");

  ExportOptions eo;
  auto* example = app.add_subcommand("example", "builtin problems");
  example->require_subcommand(1);
  auto* list = example->add_subcommand("list", "list builtin problems");
  auto* exp = example->add_subcommand("export", "write a builtin problem as JSON");
  exp->add_option("name", eo.name, "builtin name")->required();
  exp->add_option("--out", eo.out, "problem JSON path (stdout when omitted)");
  exp->add_option("--certificate", eo.certificate, "also write the closed-form certificate");
  exp->add_option("--nodes", eo.nodes, "grid cells of the exported certificate")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitUsage;
  }

  if (*check) return cmd_check(co, g, std::cout, std::cerr);
  if (*sim) {
    if (*gamma_opt) so.gamma = gamma;
    return cmd_simulate(so, g, std::cout, std::cerr);
  }
  if (*solve) return cmd_solve(vo, g, std::cout, std::cerr);
  if (*verify) return cmd_verify(ver, g, std::cout, std::cerr);
  if (*list) return cmd_example_list(std::cout);
  if (*exp) return cmd_example_export(eo, std::cout, std::cerr);
  return kExitUsage;
}
