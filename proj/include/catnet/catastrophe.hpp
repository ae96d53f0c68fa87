#pragma once

// The seven elementary catastrophe normal forms: potential, gradient,
// Hessian, the mixed behavior/control block, third derivatives, and
// critical-point search and classification.

#include "catnet/common.hpp"
#include "catnet/newton.hpp"
#include "catnet/polynomial.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace catnet {

enum class CatastropheKind {
  Fold,              // A2
  Cusp,              // A3
  Swallowtail,       // A4
  Butterfly,         // A5
  EllipticUmbilic,   // D4-
  HyperbolicUmbilic, // D4+
  ParabolicUmbilic   // D5
};

inline constexpr std::array<CatastropheKind, 7> all_kinds{
    CatastropheKind::Fold,            CatastropheKind::Cusp,
    CatastropheKind::Swallowtail,     CatastropheKind::Butterfly,
    CatastropheKind::EllipticUmbilic, CatastropheKind::HyperbolicUmbilic,
    CatastropheKind::ParabolicUmbilic};

/// Absolute threshold on the smallest Hessian eigenvalue below which a
/// critical point is classified Degenerate.
inline constexpr double tol_degeneracy = 1e-8;
/// Euclidean distance under which two critical points are merged.
inline constexpr double tol_merge = 1e-6;

struct NormalForm {
  CatastropheKind kind = CatastropheKind::Cusp;

  constexpr int behavior_dim() const {
    switch (kind) {
    case CatastropheKind::Fold:
    case CatastropheKind::Cusp:
    case CatastropheKind::Swallowtail:
    case CatastropheKind::Butterfly:
      return 1;
    default:
      return 2;
    }
  }

  constexpr int control_dim() const {
    switch (kind) {
    case CatastropheKind::Fold:
      return 1;
    case CatastropheKind::Cusp:
      return 2;
    case CatastropheKind::Swallowtail:
      return 3;
    case CatastropheKind::Butterfly:
      return 4;
    case CatastropheKind::EllipticUmbilic:
    case CatastropheKind::HyperbolicUmbilic:
      return 3;
    case CatastropheKind::ParabolicUmbilic:
      return 4;
    }
    return 0;
  }

  constexpr bool is_a_series() const { return behavior_dim() == 1; }

  friend constexpr bool operator==(NormalForm, NormalForm) = default;
};

inline constexpr std::string_view to_string(CatastropheKind k) {
  switch (k) {
  case CatastropheKind::Fold: return "fold";
  case CatastropheKind::Cusp: return "cusp";
  case CatastropheKind::Swallowtail: return "swallowtail";
  case CatastropheKind::Butterfly: return "butterfly";
  case CatastropheKind::EllipticUmbilic: return "elliptic_umbilic";
  case CatastropheKind::HyperbolicUmbilic: return "hyperbolic_umbilic";
  case CatastropheKind::ParabolicUmbilic: return "parabolic_umbilic";
  }
  return "unknown";
}

inline std::optional<CatastropheKind> kind_from_string(std::string_view s) {
  for (auto k : all_kinds)
    if (to_string(k) == s)
      return k;
  return std::nullopt;
}

/// Behavior state x and control parameters alpha of one sector.
struct SectorPoint {
  Vector x;
  Vector alpha;
};

enum class CriticalKind { Minimum, Maximum, Saddle, Degenerate };

inline constexpr std::string_view to_string(CriticalKind k) {
  switch (k) {
  case CriticalKind::Minimum: return "minimum";
  case CriticalKind::Maximum: return "maximum";
  case CriticalKind::Saddle: return "saddle";
  case CriticalKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

struct CriticalPointClass {
  CriticalKind kind = CriticalKind::Degenerate;
  int negative_eigenvalues = 0;
  double min_abs_eigenvalue = 0.0;
};

struct CriticalPoint {
  SectorPoint point;
  CriticalPointClass cls;
};

namespace detail {

inline void check_dims(NormalForm f, const Vector &x, const Vector &alpha) {
  if (x.size() != f.behavior_dim() || alpha.size() != f.control_dim())
    throw PreconditionError("normal form " + std::string(to_string(f.kind)) +
                            ": expected " + std::to_string(f.behavior_dim()) +
                            " behavior and " + std::to_string(f.control_dim()) +
                            " control coordinates, got " + std::to_string(x.size()) +
                            " and " + std::to_string(alpha.size()));
}

} // namespace detail

inline double potential(NormalForm f, const Vector &x, const Vector &c) {
  detail::check_dims(f, x, c);
  switch (f.kind) {
  case CatastropheKind::Fold: {
    const double u = x[0];
    return u * u * u / 3.0 + c[0] * u;
  }
  case CatastropheKind::Cusp: {
    const double u = x[0], u2 = u * u;
    return u2 * u2 / 4.0 + c[0] * u2 / 2.0 + c[1] * u;
  }
  case CatastropheKind::Swallowtail: {
    const double u = x[0], u2 = u * u, u3 = u2 * u;
    return u3 * u2 / 5.0 + c[0] * u3 / 3.0 + c[1] * u2 / 2.0 + c[2] * u;
  }
  case CatastropheKind::Butterfly: {
    const double u = x[0], u2 = u * u, u3 = u2 * u, u4 = u2 * u2;
    return u4 * u2 / 6.0 + c[0] * u4 / 4.0 + c[1] * u3 / 3.0 + c[2] * u2 / 2.0 + c[3] * u;
  }
  case CatastropheKind::EllipticUmbilic: {
    const double u = x[0], v = x[1];
    return u * u * u - 3.0 * u * v * v + c[0] * (u * u + v * v) + c[1] * u + c[2] * v;
  }
  case CatastropheKind::HyperbolicUmbilic: {
    const double u = x[0], v = x[1];
    return u * u * u + v * v * v + c[0] * u * v + c[1] * u + c[2] * v;
  }
  case CatastropheKind::ParabolicUmbilic: {
    const double u = x[0], v = x[1], v2 = v * v;
    return u * u * v + v2 * v2 + c[0] * u * u + c[1] * v2 + c[2] * u + c[3] * v;
  }
  }
  return 0.0;
}

inline Vector gradient(NormalForm f, const Vector &x, const Vector &c) {
  detail::check_dims(f, x, c);
  Vector g(f.behavior_dim());
  switch (f.kind) {
  case CatastropheKind::Fold:
    g[0] = x[0] * x[0] + c[0];
    break;
  case CatastropheKind::Cusp: {
    const double u = x[0];
    g[0] = u * u * u + c[0] * u + c[1];
    break;
  }
  case CatastropheKind::Swallowtail: {
    const double u = x[0], u2 = u * u;
    g[0] = u2 * u2 + c[0] * u2 + c[1] * u + c[2];
    break;
  }
  case CatastropheKind::Butterfly: {
    const double u = x[0], u2 = u * u, u3 = u2 * u;
    g[0] = u3 * u2 + c[0] * u3 + c[1] * u2 + c[2] * u + c[3];
    break;
  }
  case CatastropheKind::EllipticUmbilic: {
    const double u = x[0], v = x[1];
    g[0] = 3.0 * u * u - 3.0 * v * v + 2.0 * c[0] * u + c[1];
    g[1] = -6.0 * u * v + 2.0 * c[0] * v + c[2];
    break;
  }
  case CatastropheKind::HyperbolicUmbilic: {
    const double u = x[0], v = x[1];
    g[0] = 3.0 * u * u + c[0] * v + c[1];
    g[1] = 3.0 * v * v + c[0] * u + c[2];
    break;
  }
  case CatastropheKind::ParabolicUmbilic: {
    const double u = x[0], v = x[1];
    g[0] = 2.0 * u * v + 2.0 * c[0] * u + c[2];
    g[1] = u * u + 4.0 * v * v * v + 2.0 * c[1] * v + c[3];
    break;
  }
  }
  return g;
}

inline Matrix hessian(NormalForm f, const Vector &x, const Vector &c) {
  detail::check_dims(f, x, c);
  const int n = f.behavior_dim();
  Matrix h(n, n);
  switch (f.kind) {
  case CatastropheKind::Fold:
    h(0, 0) = 2.0 * x[0];
    break;
  case CatastropheKind::Cusp:
    h(0, 0) = 3.0 * x[0] * x[0] + c[0];
    break;
  case CatastropheKind::Swallowtail: {
    const double u = x[0];
    h(0, 0) = 4.0 * u * u * u + 2.0 * c[0] * u + c[1];
    break;
  }
  case CatastropheKind::Butterfly: {
    const double u = x[0], u2 = u * u;
    h(0, 0) = 5.0 * u2 * u2 + 3.0 * c[0] * u2 + 2.0 * c[1] * u + c[2];
    break;
  }
  case CatastropheKind::EllipticUmbilic: {
    const double u = x[0], v = x[1];
    const double off = -6.0 * v;
    h << 6.0 * u + 2.0 * c[0], off, off, -6.0 * u + 2.0 * c[0];
    break;
  }
  case CatastropheKind::HyperbolicUmbilic: {
    h << 6.0 * x[0], c[0], c[0], 6.0 * x[1];
    break;
  }
  case CatastropheKind::ParabolicUmbilic: {
    const double u = x[0], v = x[1];
    const double off = 2.0 * u;
    h << 2.0 * v + 2.0 * c[0], off, off, 12.0 * v * v + 2.0 * c[1];
    break;
  }
  }
  return h;
}

/// Mixed second derivatives d^2 V / dx dalpha (behavior_dim x control_dim).
inline Matrix mixed_derivative(NormalForm f, const Vector &x, const Vector &c) {
  detail::check_dims(f, x, c);
  Matrix b = Matrix::Zero(f.behavior_dim(), f.control_dim());
  switch (f.kind) {
  case CatastropheKind::Fold:
    b(0, 0) = 1.0;
    break;
  case CatastropheKind::Cusp:
    b << x[0], 1.0;
    break;
  case CatastropheKind::Swallowtail:
    b << x[0] * x[0], x[0], 1.0;
    break;
  case CatastropheKind::Butterfly:
    b << x[0] * x[0] * x[0], x[0] * x[0], x[0], 1.0;
    break;
  case CatastropheKind::EllipticUmbilic:
    b << 2.0 * x[0], 1.0, 0.0,
         2.0 * x[1], 0.0, 1.0;
    break;
  case CatastropheKind::HyperbolicUmbilic:
    b << x[1], 1.0, 0.0,
         x[0], 0.0, 1.0;
    break;
  case CatastropheKind::ParabolicUmbilic:
    b << 2.0 * x[0], 0.0, 1.0, 0.0,
         0.0, 2.0 * x[1], 0.0, 1.0;
    break;
  }
  return b;
}

/// dH/dx_k for each behavior coordinate k.
inline std::vector<Matrix> hessian_x_derivatives(NormalForm f, const Vector &x,
                                                 const Vector &c) {
  detail::check_dims(f, x, c);
  std::vector<Matrix> out;
  switch (f.kind) {
  case CatastropheKind::Fold:
    out.push_back(Matrix::Constant(1, 1, 2.0));
    break;
  case CatastropheKind::Cusp:
    out.push_back(Matrix::Constant(1, 1, 6.0 * x[0]));
    break;
  case CatastropheKind::Swallowtail:
    out.push_back(Matrix::Constant(1, 1, 12.0 * x[0] * x[0] + 2.0 * c[0]));
    break;
  case CatastropheKind::Butterfly:
    out.push_back(Matrix::Constant(
        1, 1, 20.0 * x[0] * x[0] * x[0] + 6.0 * c[0] * x[0] + 2.0 * c[1]));
    break;
  case CatastropheKind::EllipticUmbilic: {
    Matrix dx(2, 2), dy(2, 2);
    dx << 6.0, 0.0, 0.0, -6.0;
    dy << 0.0, -6.0, -6.0, 0.0;
    out = {dx, dy};
    break;
  }
  case CatastropheKind::HyperbolicUmbilic: {
    Matrix dx = Matrix::Zero(2, 2), dy = Matrix::Zero(2, 2);
    dx(0, 0) = 6.0;
    dy(1, 1) = 6.0;
    out = {dx, dy};
    break;
  }
  case CatastropheKind::ParabolicUmbilic: {
    Matrix dx(2, 2), dy(2, 2);
    dx << 0.0, 2.0, 2.0, 0.0;
    dy << 2.0, 0.0, 0.0, 24.0 * x[1];
    out = {dx, dy};
    break;
  }
  }
  return out;
}

/// dH/dalpha_j for each control coordinate j.
inline std::vector<Matrix> hessian_alpha_derivatives(NormalForm f, const Vector &x,
                                                     const Vector &c) {
  detail::check_dims(f, x, c);
  const int n = f.behavior_dim();
  std::vector<Matrix> out(f.control_dim(), Matrix::Zero(n, n));
  switch (f.kind) {
  case CatastropheKind::Fold:
    break;
  case CatastropheKind::Cusp:
    out[0](0, 0) = 1.0;
    break;
  case CatastropheKind::Swallowtail:
    out[0](0, 0) = 2.0 * x[0];
    out[1](0, 0) = 1.0;
    break;
  case CatastropheKind::Butterfly:
    out[0](0, 0) = 3.0 * x[0] * x[0];
    out[1](0, 0) = 2.0 * x[0];
    out[2](0, 0) = 1.0;
    break;
  case CatastropheKind::EllipticUmbilic:
    out[0] = 2.0 * Matrix::Identity(2, 2);
    break;
  case CatastropheKind::HyperbolicUmbilic:
    out[0](0, 1) = out[0](1, 0) = 1.0;
    break;
  case CatastropheKind::ParabolicUmbilic:
    out[0](0, 0) = 2.0;
    out[1](1, 1) = 2.0;
    break;
  }
  return out;
}

inline double potential(NormalForm f, const SectorPoint &p) { return potential(f, p.x, p.alpha); }
inline Vector gradient(NormalForm f, const SectorPoint &p) { return gradient(f, p.x, p.alpha); }
inline Matrix hessian(NormalForm f, const SectorPoint &p) { return hessian(f, p.x, p.alpha); }

/// Coefficients (ascending) of the A-series equilibrium polynomial dV/dx.
inline poly::Coefficients equilibrium_polynomial(NormalForm f, const Vector &c) {
  require(f.is_a_series(), "equilibrium_polynomial: A-series forms only");
  require(c.size() == f.control_dim(), "equilibrium_polynomial: control dimension mismatch");
  switch (f.kind) {
  case CatastropheKind::Fold: return {c[0], 0.0, 1.0};
  case CatastropheKind::Cusp: return {c[1], c[0], 0.0, 1.0};
  case CatastropheKind::Swallowtail: return {c[2], c[1], c[0], 0.0, 1.0};
  case CatastropheKind::Butterfly: return {c[3], c[2], c[1], c[0], 0.0, 1.0};
  default: return {};
  }
}

/// Classification of a symmetric Hessian by its spectrum.
inline CriticalPointClass classify(const Matrix &h) {
  const Vector ev = symmetric_eigenvalues(h);
  CriticalPointClass cls;
  cls.min_abs_eigenvalue = ev.size() ? ev.cwiseAbs().minCoeff() : 0.0;
  cls.negative_eigenvalues = static_cast<int>((ev.array() < 0.0).count());
  const int n = static_cast<int>(h.rows());
  if (cls.min_abs_eigenvalue < tol_degeneracy)
    cls.kind = CriticalKind::Degenerate;
  else if (cls.negative_eigenvalues == 0)
    cls.kind = CriticalKind::Minimum;
  else if (cls.negative_eigenvalues == n)
    cls.kind = CriticalKind::Maximum;
  else
    cls.kind = CriticalKind::Saddle;
  return cls;
}

/// Side length of the D-series Newton start grid.
inline constexpr int d_series_grid = 21;

/// Critical points of one normal form inside the search box.
///
/// A-series: every distinct real root of the equilibrium polynomial in the
/// box, isolated with a Sturm sequence. D-series: Newton from a 21 x 21 grid
/// of starts, merged at tol_merge; this is best-effort and can miss roots
/// whose basins of attraction avoid the grid. Starts that fail to converge
/// are dropped.
inline std::vector<CriticalPoint> critical_points(NormalForm f, const Vector &alpha,
                                                  const SearchBox &box) {
  require(alpha.size() == f.control_dim(), "critical_points: control dimension mismatch");
  require(box.lo <= box.hi, "critical_points: empty search box");
  std::vector<CriticalPoint> out;
  if (f.is_a_series()) {
    for (double r : poly::real_roots(equilibrium_polynomial(f, alpha), box.lo, box.hi)) {
      CriticalPoint cp;
      cp.point.x = Vector::Constant(1, r);
      cp.point.alpha = alpha;
      cp.cls = classify(hessian(f, cp.point));
      out.push_back(std::move(cp));
    }
    return out;
  }

  auto grad = [&](const Vector &x) { return gradient(f, x, alpha); };
  auto hess = [&](const Vector &x) { return hessian(f, x, alpha); };
  const double step = (box.hi - box.lo) / (d_series_grid - 1);
  for (int i = 0; i < d_series_grid; ++i) {
    for (int j = 0; j < d_series_grid; ++j) {
      Vector x0(2);
      x0 << box.lo + i * step, box.lo + j * step;
      const NewtonResult r = newton_solve(grad, hess, x0);
      if (!r.converged || !box.contains(r.x, 1e-12))
        continue;
      const bool seen = std::any_of(out.begin(), out.end(), [&](const CriticalPoint &cp) {
        return (cp.point.x - r.x).norm() < tol_merge;
      });
      if (seen)
        continue;
      CriticalPoint cp;
      cp.point.x = r.x;
      cp.point.alpha = alpha;
      cp.cls = classify(hessian(f, cp.point));
      out.push_back(std::move(cp));
    }
  }
  std::sort(out.begin(), out.end(), [](const CriticalPoint &a, const CriticalPoint &b) {
    return std::lexicographical_compare(a.point.x.begin(), a.point.x.end(),
                                        b.point.x.begin(), b.point.x.end());
  });
  return out;
}

/// 4a^3 + 27b^2: zero iff x^3 + a x + b has a repeated real root.
inline constexpr double cusp_discriminant(double a, double b) {
  return 4.0 * a * a * a + 27.0 * b * b;
}

} // namespace catnet
