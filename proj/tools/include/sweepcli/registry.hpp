#pragma once

// Builtin example problems and the closed-form solution of "paper-6-1".

#include <string>
#include <vector>

#include "sweep/pmp.hpp"
#include "sweepcli/problem_io.hpp"

namespace sweepcli {

struct Example {
  std::string name;
  std::string summary;
  bool fixture = false;  // assumption-checker fixture rather than a control problem
  ProblemFile file;
};

const std::vector<Example>& examples();

/// Throws SchemaError for unknown names.
const Example& find_example(const std::string& name);

/// Known solution of the three-state example on [0, 1/2]: u = 1, both
/// constraints active, adjoint jump of (3/8, 0, 3/8) at the final time.
namespace closed_form {

inline constexpr double kT = 0.5;
inline constexpr double kLambda = 0.25;
inline constexpr double kAtom = 3.0 / 16.0;

sweep::Vec state(double t);
/// Right-continuous adjoint: the formula on [0, T) and (3/4, 0, 0) at T.
sweep::Vec adjoint(double t);
/// Density of the absolutely continuous part of measure i (0 or 1).
double density(int i, double t);

/// Certificate sampled on N cells, with the jump and atoms at T.
sweep::PmpCertificate certificate(int N);

}  // namespace closed_form

}  // namespace sweepcli
