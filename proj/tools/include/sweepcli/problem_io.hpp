#pragma once

// Problem files: JSON documents describing a sweeping control problem.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sweep/estimate.hpp"
#include "sweep/ocp.hpp"

namespace sweepcli {

inline constexpr int kSchemaVersion = 1;

/// Malformed input document. Maps to exit code 2.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScheduleSpec {
  std::vector<double> gammas;  // explicit list; empty means auto
  double gamma_min = 0.0;      // auto: 0 means max(10, 4 Mbar / eta)
  double gamma_max = 1e3;
  int steps = 8;
};

struct ProblemFile {
  std::string name;
  int n = 0;
  int m = 0;
  double T = 1.0;
  std::vector<std::string> psi;
  std::vector<std::string> f;
  std::string phi = "0";
  std::string g = "0";

  std::string C0_kind = "point";  // point | sublevel
  std::vector<double> C0_point;
  std::vector<std::string> C0_psi;

  std::string CT_kind = "all";  // all | affine | sublevel
  std::vector<double> CT_a;
  double CT_b = 0.0;
  std::vector<std::string> CT_psi;

  std::vector<double> U_lo;
  std::vector<double> U_hi;
  double delta = 1.0;

  std::optional<std::pair<std::vector<double>, double>> ball;  // (y0, R0)
  ScheduleSpec schedule;
  int N = 200;
  int substeps = 1;  // transcription steps per control cell
  double K_tilde = 100.0;

  // Where sampled constants are estimated. Defaults to the C0 point, radius 1.
  std::optional<sweep::Region> region;
  // Fixed constants; zero entries are estimated.
  double eta = 0.0;
  double Mbar_psi = 0.0;
  double Mbar = 0.0;
};

/// Throws SchemaError.
ProblemFile problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemFile& p);

ProblemFile load_problem(const std::string& path);

/// A problem file turned into library objects, with its constants resolved.
struct BuiltProblem {
  sweep::SweepingProblem problem;
  sweep::SetEstimate estimate;  // estimate.constants are those in use
  double Mbar = 0.0;
  bool estimated = false;  // some constant came from sampling
  std::vector<double> gammas;
  int N = 200;
  int substeps = 1;
  double K_tilde = 100.0;
  sweep::Region region;
};

/// Parses expressions and estimates missing constants. Throws SchemaError for
/// inconsistent documents and sweep::Error for invalid fields.
BuiltProblem build_problem(const ProblemFile& p, std::uint64_t seed = 0, int samples = 400);

/// SolveConfig for the built problem. Throws sweep::InvalidSchedule.
sweep::SolveConfig make_config(const BuiltProblem& b);

}  // namespace sweepcli
