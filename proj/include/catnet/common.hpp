#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace catnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a caller violates an operation's documented precondition
/// (dimension mismatch, non-equilibrium input, asymmetric matrix, ...).
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function, e.g. t <= 0 for a
/// copula generator.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Statistical estimation could not proceed (e.g. a column made only of ties).
class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string &what) {
  if (!cond)
    throw PreconditionError(what);
}

/// Closed interval applied to every behavior coordinate.
struct SearchBox {
  double lo = -5.0;
  double hi = 5.0;

  bool contains(double v, double slack = 0.0) const {
    return v >= lo - slack && v <= hi + slack;
  }
  bool contains(const Vector &x, double slack = 0.0) const {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!contains(x[i], slack))
        return false;
    return true;
  }
};

inline double inf_norm(const Vector &v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Eigenvalues of a small symmetric matrix, ascending.
inline Vector symmetric_eigenvalues(const Matrix &h) {
  const auto n = h.rows();
  if (n == 0)
    return Vector(0);
  if (n == 1)
    return Vector::Constant(1, h(0, 0));
  if (n == 2) {
    // Closed form keeps the hot paths (continuation, relaxation) cheap.
    const double a = h(0, 0), b = h(0, 1), d = h(1, 1);
    const double mean = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), b);
    Vector ev(2);
    ev << mean - rad, mean + rad;
    return ev;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Smallest |eigenvalue| of a symmetric matrix, i.e. its smallest singular value.
inline double min_abs_eigenvalue(const Matrix &h) {
  const Vector ev = symmetric_eigenvalues(h);
  return ev.size() == 0 ? 0.0 : ev.cwiseAbs().minCoeff();
}

/// Descending singular values.
inline Vector singular_values(const Matrix &m) {
  if (m.size() == 0)
    return Vector(0);
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

/// Numerical rank: singular values at or above tol * max(sigma_max, 1).
inline int numerical_rank(const Vector &sv, double tol) {
  if (sv.size() == 0)
    return 0;
  const double cutoff = tol * std::max(sv.maxCoeff(), 1.0);
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] >= cutoff)
      ++r;
  return r;
}

inline int numerical_rank(const Matrix &m, double tol) {
  return numerical_rank(singular_values(m), tol);
}

} // namespace catnet
