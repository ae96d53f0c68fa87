#pragma once

// Near-singularity diagnostics on the network critical set: corank of
// H_eps, codimension of the image of D(pi) for pi: C_eps -> control space,
// discriminant normals and their alignment angles.

#include "catnet/network.hpp"

#include <numbers>
#include <optional>
#include <span>

namespace catnet {

inline constexpr double default_tol_rank = 1e-8;

/// Number of singular values of H below tol_rank * max(sigma_max, 1).
inline int corank(const Matrix &h, double tol_rank = default_tol_rank) {
  require(h.rows() == h.cols(), "corank: matrix must be square");
  return static_cast<int>(h.rows()) - numerical_rank(h, tol_rank);
}

namespace detail {

inline void require_equilibrium(const NetworkSystem &sys, const NetworkEquilibrium &eq) {
  sys.check(eq.x, eq.alpha);
  if (!is_equilibrium(sys, eq.x, eq.alpha))
    throw PreconditionError("diagnostics: point is not on the critical set (||grad|| >= " +
                            std::to_string(tol_equilibrium) + ")");
}

/// Orthonormal basis of the tangent space of C_eps at eq: the null space of
/// [H_eps | B], as columns over (x, alpha) coordinates.
inline Matrix tangent_basis(const NetworkSystem &sys, const NetworkEquilibrium &eq,
                            double tol_rank) {
  const int n = sys.n(), p = sys.p();
  Matrix j(n, n + p);
  j << network_hessian(sys, eq.x, eq.alpha), network_mixed(sys, eq.x, eq.alpha);
  Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeFullV);
  const int r = numerical_rank(svd.singularValues(), tol_rank);
  return svd.matrixV().rightCols(n + p - r);
}

inline Vector canonical_sign(Vector v) {
  const double scale = v.norm();
  for (Eigen::Index q = 0; q < v.size(); ++q) {
    if (std::abs(v[q]) > 1e-12 * scale) {
      if (v[q] < 0.0)
        v = -v;
      break;
    }
  }
  return v;
}

} // namespace detail

/// Rank deficiency of the projection of C_eps onto the controls of the given
/// sectors: p_I - rank(D pi_I).
inline int projection_rank_drop(const NetworkSystem &sys, const NetworkEquilibrium &eq,
                                std::span<const int> sectors,
                                double tol_rank = default_tol_rank) {
  detail::require_equilibrium(sys, eq);
  const Matrix t = detail::tangent_basis(sys, eq, tol_rank);
  std::vector<Eigen::Index> rows;
  for (int i : sectors) {
    require(i >= 0 && i < sys.k(), "projection_rank_drop: sector index out of range");
    for (int q = 0; q < sys.control_dim(i); ++q)
      rows.push_back(sys.n() + sys.control_offset(i) + q);
  }
  const Matrix dpi = t(rows, Eigen::all);
  return static_cast<int>(rows.size()) - numerical_rank(dpi, tol_rank);
}

/// codim of Im D(pi) for the full projection (x, alpha) -> alpha.
inline int dpi_codim(const NetworkSystem &sys, const NetworkEquilibrium &eq,
                     double tol_rank = default_tol_rank) {
  std::vector<int> all(sys.k());
  for (int i = 0; i < sys.k(); ++i)
    all[i] = i;
  return projection_rank_drop(sys, eq, all, tol_rank);
}

/// Sectors I are catastrophically correlated at eq when the projection onto
/// their controls drops rank by at least |I| - 1.
inline bool catastrophically_correlated(const NetworkSystem &sys, const NetworkEquilibrium &eq,
                                        std::span<const int> sectors,
                                        double tol_rank = default_tol_rank) {
  return projection_rank_drop(sys, eq, sectors, tol_rank) >=
         static_cast<int>(sectors.size()) - 1;
}

/// No well-defined discriminant normal: the point is a higher-order
/// degeneracy (e.g. the cusp vertex) or the sector does not take part.
struct DegenerateIsolated {
  std::string reason;
};

using NormalResult = std::variant<Vector, DegenerateIsolated>;

/// Unit normal, in sector i's control space, of the discriminant through eq.
///
/// At a regular point this is the direction of grad_{alpha_i} det H_eps(x(alpha), alpha)
/// along the critical set, with dx/dalpha = -H^{-1} B (implicit
/// differentiation). On the discriminant itself (corank >= 1) the limit of
/// that direction is B^T v for the kernel vector v of H_eps, provided the
/// cubic term of V_eps along v does not vanish; otherwise the point has no
/// smooth normal. Sign is fixed so the first nonzero component is positive.
inline NormalResult discriminant_normal(const NetworkSystem &sys, const NetworkEquilibrium &eq,
                                        int i) {
  detail::require_equilibrium(sys, eq);
  require(i >= 0 && i < sys.k(), "discriminant_normal: sector index out of range");
  const Matrix h = network_hessian(sys, eq.x, eq.alpha);
  const Matrix b = network_mixed(sys, eq.x, eq.alpha);
  const auto tx = network_hessian_x_derivatives(sys, eq.x, eq.alpha);
  const int ao = sys.control_offset(i), pi = sys.control_dim(i);

  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector &sv = svd.singularValues();
  const double threshold = tol_degeneracy * std::max(1.0, sv[0]);
  const int n = sys.n();
  int kernel = 0;
  for (int q = 0; q < n; ++q)
    if (sv[q] < threshold)
      ++kernel;

  Vector normal(pi);
  if (kernel == 0) {
    const auto ta = network_hessian_alpha_derivatives(sys, eq.x, eq.alpha);
    const Matrix hinv = svd.solve(Matrix::Identity(n, n));
    const Matrix dx = -hinv * b;
    for (int q = 0; q < pi; ++q) {
      const int j = ao + q;
      Matrix hdot = ta[j];
      for (int c = 0; c < n; ++c)
        hdot += tx[c] * dx(c, j);
      normal[q] = (hinv * hdot).trace();
    }
  } else {
    const Matrix v0 = svd.matrixV().rightCols(kernel);
    const int o = sys.behavior_offset(i), d = sys.behavior_dim(i);
    Vector v;
    if (kernel == 1) {
      v = v0.col(0);
    } else {
      Eigen::JacobiSVD<Matrix> sub(v0.middleRows(o, d), Eigen::ComputeFullV);
      v = v0 * sub.matrixV().col(0);
    }
    if (v.segment(o, d).norm() < 1e-8)
      return DegenerateIsolated{"sector " + std::to_string(i) + " is not in the kernel of H"};
    double cubic = 0.0;
    for (int c = 0; c < n; ++c)
      cubic += v[c] * v.dot(tx[c] * v);
    if (std::abs(cubic) < tol_degeneracy)
      return DegenerateIsolated{"cubic term vanishes along the kernel (higher-order point)"};
    normal = (b.transpose() * v).segment(ao, pi);
  }
  const double len = normal.norm();
  if (!(len > 1e-300) || !std::isfinite(len))
    return DegenerateIsolated{"discriminant gradient vanishes"};
  return detail::canonical_sign(normal / len);
}

/// Angle in degrees, in [0, 90], between the undirected lines spanned by u
/// and v. The shorter vector is zero-padded to the longer one's length.
inline double normal_alignment_angle(const Vector &u, const Vector &v) {
  const Eigen::Index m = std::max(u.size(), v.size());
  Vector a = Vector::Zero(m), c = Vector::Zero(m);
  a.head(u.size()) = u;
  c.head(v.size()) = v;
  const double na = a.norm(), nc = c.norm();
  require(na > 0.0 && nc > 0.0, "normal_alignment_angle: zero vector");
  const double cosine = std::min(1.0, std::abs(a.dot(c)) / (na * nc));
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

struct SingularityDiagnostics {
  Vector singular_values_h; // descending
  int corank = 0;
  int dpi_codim = 0;
  std::vector<int> sector_coranks; // per diagonal block
  std::vector<std::optional<Vector>> discriminant_normals;
  Matrix pairwise_angles; // degrees; NaN where a normal is undefined
};

inline SingularityDiagnostics diagnose(const NetworkSystem &sys, const NetworkEquilibrium &eq,
                                       double tol_rank = default_tol_rank) {
  detail::require_equilibrium(sys, eq);
  SingularityDiagnostics d;
  const Matrix h = network_hessian(sys, eq.x, eq.alpha);
  d.singular_values_h = singular_values(h);
  d.corank = static_cast<int>(h.rows()) - numerical_rank(d.singular_values_h, tol_rank);
  d.dpi_codim = dpi_codim(sys, eq, tol_rank);
  for (int i = 0; i < sys.k(); ++i) {
    const int o = sys.behavior_offset(i), n = sys.behavior_dim(i);
    d.sector_coranks.push_back(corank(h.block(o, o, n, n), tol_rank));
    const NormalResult r = discriminant_normal(sys, eq, i);
    if (const auto *nv = std::get_if<Vector>(&r))
      d.discriminant_normals.emplace_back(*nv);
    else
      d.discriminant_normals.emplace_back(std::nullopt);
  }
  const int k = sys.k();
  d.pairwise_angles = Matrix::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < k; ++i) {
    d.pairwise_angles(i, i) = 0.0;
    for (int j = i + 1; j < k; ++j)
      if (d.discriminant_normals[i] && d.discriminant_normals[j])
        d.pairwise_angles(i, j) = d.pairwise_angles(j, i) =
            normal_alignment_angle(*d.discriminant_normals[i], *d.discriminant_normals[j]);
  }
  return d;
}

} // namespace catnet
