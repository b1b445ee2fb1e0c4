#pragma once

// Dense solvers for the tiny quadratic programs that show up in the
// geometry code (r <= 16 variables).

#include "sweep/field.hpp"

namespace sweep {

struct MinNormResult {
  Vec weights;  // convex weights, one per column
  Vec point;    // sum_i weights_i * G.col(i)
  double norm = 0.0;
  int iterations = 0;
};

/// Nearest point to the origin in the convex hull of the columns of G
/// (Wolfe's min-norm-point algorithm).
MinNormResult min_norm_point(const Mat& G, double tol = 1e-12, int max_iters = 500);

/// min 0.5 x'Qx - b'x  subject to x >= 0, Q symmetric positive semidefinite.
/// Lawson-Hanson style active set; a tiny diagonal shift keeps singular Q
/// bounded.
Vec nonneg_qp(const Mat& Q, const Vec& b, double tol = 1e-13, int max_iters = 200);

/// min ||A x - y|| subject to x >= 0.
Vec nnls(const Mat& A, const Vec& y, double tol = 1e-13);

}  // namespace sweep
