#pragma once

// Subcommands of sweepctl. Each returns the process exit code:
// 0 pass, 1 numeric failure, 2 usage or schema error.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "sweep/pmp.hpp"
#include "sweepcli/problem_io.hpp"

namespace sweepcli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

/// Bad command-line input. Maps to exit code 2.
class UsageError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  double tol_scale = 1.0;
};

/// A problem file path, or the name of a builtin example.
ProblemFile resolve_problem(const std::string& ref);

/// "const:v1,v2,..." or "csv:path" (one row of m values per cell, optional
/// header line). Throws UsageError.
sweep::ControlSignal parse_control(const std::string& spec, const sweep::Grid& grid, int m);

struct CheckOptions {
  std::string problem;
  std::string trajectory_csv;  // optional; otherwise the oracle under `control`
  std::string control;         // optional; defaults to the center of U
  int samples = 400;
};

struct SimulateOptions {
  std::string problem;
  std::optional<double> gamma;  // defaults to the last schedule entry
  std::string control = "const:0";
  bool oracle = false;
  std::string out = ".";
};

struct SolveOptions {
  std::string problem;
  std::string out = ".";
};

struct VerifyCliOptions {
  std::string certificate;
  std::string problem;
  std::string out;  // optional report path
};

struct ExportOptions {
  std::string name;
  std::string out;          // problem JSON; stdout when empty
  std::string certificate;  // closed-form certificate, paper-6-1 only
  int nodes = 2000;
};

int cmd_check(const CheckOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& o, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err);
int cmd_solve(const SolveOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyCliOptions& o, const GlobalOptions& g, std::ostream& out,
               std::ostream& err);
int cmd_example_list(std::ostream& out);
int cmd_example_export(const ExportOptions& o, std::ostream& out, std::ostream& err);

/// Verification with the global options applied; runs the condition groups
/// concurrently when threads > 1. Results do not depend on the thread count.
sweep::ResidualReport verify_with(const sweep::PmpCertificate& cert,
                                  const sweep::SweepingProblem& prob, const GlobalOptions& g);

}  // namespace sweepcli
