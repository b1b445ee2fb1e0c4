#include "sweep/smallqp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace sweep {

namespace {

// Affine minimizer: min ||G_S v|| subject to sum v = 1.
Vec affine_min(const Mat& G, const std::vector<int>& S) {
  const int k = static_cast<int>(S.size());
  Mat K = Mat::Zero(k + 1, k + 1);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) K(a, b) = G.col(S[a]).dot(G.col(S[b]));
    K(a, k) = 1.0;
    K(k, a) = 1.0;
  }
  Vec rhs = Vec::Zero(k + 1);
  rhs[k] = 1.0;
  Vec sol = K.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(k);
}

}  // namespace

MinNormResult min_norm_point(const Mat& G, double tol, int max_iters) {
  const int r = static_cast<int>(G.cols());
  MinNormResult out;
  out.weights = Vec::Zero(r);
  if (r == 0) {
    out.point = Vec::Zero(G.rows());
    return out;
  }
  double scale = 0.0;
  int start = 0;
  for (int i = 0; i < r; ++i) {
    double nn = G.col(i).squaredNorm();
    scale = std::max(scale, nn);
    if (nn < G.col(start).squaredNorm()) start = i;
  }
  if (scale == 0.0) {
    out.weights[0] = 1.0;
    out.point = Vec::Zero(G.rows());
    return out;
  }

  std::vector<int> S{start};
  std::vector<double> w{1.0};
  Vec x = G.col(start);

  int it = 0;
  for (; it < max_iters; ++it) {
    int j = 0;
    double best = x.dot(G.col(0));
    for (int i = 1; i < r; ++i) {
      double v = x.dot(G.col(i));
      if (v < best) {
        best = v;
        j = i;
      }
    }
    if (x.squaredNorm() - best <= tol * scale) break;
    if (std::find(S.begin(), S.end(), j) != S.end()) break;
    S.push_back(j);
    w.push_back(0.0);

    for (int inner = 0; inner < max_iters; ++inner) {
      Vec v = affine_min(G, S);
      bool positive = true;
      for (int a = 0; a < v.size(); ++a) positive = positive && v[a] > tol;
      if (positive) {
        for (std::size_t a = 0; a < S.size(); ++a) w[a] = v[static_cast<int>(a)];
        break;
      }
      double theta = 1.0;
      for (std::size_t a = 0; a < S.size(); ++a) {
        double va = v[static_cast<int>(a)];
        if (va <= tol && w[a] - va > 0.0) theta = std::min(theta, w[a] / (w[a] - va));
      }
      std::vector<int> S2;
      std::vector<double> w2;
      for (std::size_t a = 0; a < S.size(); ++a) {
        double wa = w[a] + theta * (v[static_cast<int>(a)] - w[a]);
        if (wa > tol) {
          S2.push_back(S[a]);
          w2.push_back(wa);
        }
      }
      if (S2.empty()) {
        S2.push_back(S.back());
        w2.push_back(1.0);
      }
      double sum = 0.0;
      for (double q : w2) sum += q;
      for (double& q : w2) q /= sum;
      S = std::move(S2);
      w = std::move(w2);
    }
    x.setZero();
    for (std::size_t a = 0; a < S.size(); ++a) x += w[a] * G.col(S[a]);
  }

  for (std::size_t a = 0; a < S.size(); ++a) out.weights[S[a]] = w[a];
  out.point = x;
  out.norm = x.norm();
  out.iterations = it;
  return out;
}

Vec nonneg_qp(const Mat& Q_in, const Vec& b, double tol, int max_iters) {
  const int k = static_cast<int>(b.size());
  Vec x = Vec::Zero(k);
  if (k == 0) return x;
  Mat Q = Q_in;
  double tr = std::max(Q.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  Q.diagonal().array() += 1e-13 * tr;
  const double gtol = tol * std::max(1.0, b.cwiseAbs().maxCoeff());

  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  auto solve_passive = [&](Vec& z) {
    std::vector<int> P;
    for (int i = 0; i < k; ++i)
      if (passive[static_cast<std::size_t>(i)]) P.push_back(i);
    z = Vec::Zero(k);
    if (P.empty()) return;
    const int p = static_cast<int>(P.size());
    Mat QP(p, p);
    Vec bP(p);
    for (int a = 0; a < p; ++a) {
      bP[a] = b[P[a]];
      for (int c = 0; c < p; ++c) QP(a, c) = Q(P[a], P[c]);
    }
    Vec zP = QP.ldlt().solve(bP);
    for (int a = 0; a < p; ++a) z[P[a]] = zP[a];
  };

  for (int it = 0; it < max_iters; ++it) {
    Vec grad = b - Q * x;  // negative gradient
    int j = -1;
    double best = gtol;
    for (int i = 0; i < k; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && grad[i] > best) {
        best = grad[i];
        j = i;
      }
    }
    if (j < 0) break;
    passive[static_cast<std::size_t>(j)] = true;

    for (int inner = 0; inner <= k; ++inner) {
      Vec z;
      solve_passive(z);
      bool ok = true;
      for (int i = 0; i < k; ++i) ok = ok && (!passive[static_cast<std::size_t>(i)] || z[i] > 0.0);
      if (ok) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (int i = 0; i < k; ++i) {
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) {
          alpha = std::min(alpha, x[i] / (x[i] - z[i]));
        }
      }
      x += alpha * (z - x);
      for (int i = 0; i < k; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x[i] <= 1e-15) {
          passive[static_cast<std::size_t>(i)] = false;
          x[i] = 0.0;
        }
      }
    }
  }
  return x.cwiseMax(0.0);
}

Vec nnls(const Mat& A, const Vec& y, double tol) {
  return nonneg_qp(A.transpose() * A, A.transpose() * y, tol);
}

}  // namespace sweep
