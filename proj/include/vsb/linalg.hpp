#pragma once

#include <utility>

#include "vsb/types.hpp"

namespace vsb {

/// Symmetric bilinear map B: R^n x R^n -> R^n stored flat, column j*n+k = B[e_j, e_k].
struct BilinearMap {
  Mat flat;  // n rows, n*n columns
  int n = 0;

  static BilinearMap zero(int n) {
    BilinearMap b;
    b.n = n;
    b.flat = Mat::Zero(n, n * n);
    return b;
  }

  Vec apply(const Vec& a, const Vec& b) const {
    Vec out = Vec::Zero(n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out += flat.col(j * n + k) * (a(j) * b(k));
    return out;
  }

  /// Matrix of the partial application r -> B[a, r].
  Mat partial(const Vec& a) const {
    Mat out = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) out.col(k) += flat.col(j * n + k) * a(j);
    return out;
  }

  double symmetry_defect() const {
    double d = 0.0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        d = std::max(d, (flat.col(j * n + k) - flat.col(k * n + j)).norm());
    return d;
  }
};

/// Solve A u = (I-Pi) rhs for u in Ker Pi, by deflation: [(I-Pi)A(I-Pi) + Pi] u = (I-Pi) rhs.
/// The deflated matrix is invertible iff the restriction of A to Ker Pi is.
Vec restricted_solve(const Mat& A, const Mat& projector, const Vec& rhs);

/// Smallest singular value of A restricted to Ker Pi (orthonormal-basis reduction).
double restricted_min_singular_value(const Mat& A, const Mat& projector);

/// Solve L w = rhs for w in Im Pi, where L maps into Im Pi. Deflation: [L Pi + (I-Pi)] w = rhs.
Vec range_solve(const Mat& L, const Mat& projector, const Vec& rhs);

/// Smallest singular value of L restricted to Im Pi.
double range_min_singular_value(const Mat& L, const Mat& projector);

/// Factor a rank-one projector Pi = c z^T with <c,z> = 1. Throws if the second
/// singular value exceeds tol.
std::pair<Vec, Vec> rank_one_factors(const Mat& projector, double tol = 1e-8);

}  // namespace vsb
