#include "vsb/linalg.hpp"

#include <Eigen/SVD>

#include "vsb/errors.hpp"

namespace vsb {

namespace {

/// Orthonormal basis of the range of M (columns), keeping directions with
/// singular value above 0.5 (M is expected to be a projector, spectrum {0,1}).
Mat projector_range_basis(const Mat& M) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 0.5) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace

Vec restricted_solve(const Mat& A, const Mat& projector, const Vec& rhs) {
  const int n = static_cast<int>(A.rows());
  const Mat I = Mat::Identity(n, n);
  const Mat co = I - projector;
  const Mat deflated = co * A * co + projector;
  Eigen::FullPivLU<Mat> lu(deflated);
  if (!lu.isInvertible())
    throw SingularOperatorError(
        "restricted operator on Ker(Pi) is singular (resonance: a nontrivial "
        "multiplier equals 1)");
  Vec u = lu.solve(co * rhs);
  return co * u;
}

double restricted_min_singular_value(const Mat& A, const Mat& projector) {
  const int n = static_cast<int>(A.rows());
  const Mat co = Mat::Identity(n, n) - projector;
  const Mat W = projector_range_basis(co);
  if (W.cols() == 0) return 0.0;
  const Mat R = W.transpose() * A * W;
  Eigen::JacobiSVD<Mat> svd(R);
  return svd.singularValues().tail(1)(0);
}

Vec range_solve(const Mat& L, const Mat& projector, const Vec& rhs) {
  const int n = static_cast<int>(L.rows());
  const Mat I = Mat::Identity(n, n);
  const Mat deflated = L * projector + (I - projector);
  Eigen::FullPivLU<Mat> lu(deflated);
  if (!lu.isInvertible())
    throw SingularOperatorError(
        "operator restricted to Im(Pi) is singular (degenerate zero: M'(theta0) = 0)");
  Vec w = lu.solve(rhs);
  return projector * w;
}

double range_min_singular_value(const Mat& L, const Mat& projector) {
  const Mat W = projector_range_basis(projector);
  if (W.cols() == 0) return 0.0;
  const Mat R = W.transpose() * L * W;
  Eigen::JacobiSVD<Mat> svd(R);
  return svd.singularValues().tail(1)(0);
}

std::pair<Vec, Vec> rank_one_factors(const Mat& projector, double tol) {
  Eigen::JacobiSVD<Mat> svd(projector, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s.size() > 1 && s(1) > tol)
    throw SingularOperatorError("projector is not rank one");
  Vec c = svd.matrixU().col(0);
  Vec z = svd.matrixV().col(0) * s(0);
  // Fix the sign so that <c,z> = +1 (idempotency makes it +-1 up to roundoff).
  if (c.dot(z) < 0) {
    c = -c;
    z = -z;
  }
  return {c, z};
}

}  // namespace vsb
