#pragma once

// Coupled network potential V_eps(x; alpha) = sum_i V_i(x_i; alpha_i) + eps W(x)
// with bilinear coupling W = sum_{i<j} lambda_ij <x_i><x_j> on the first
// behavior coordinate of every sector.

#include "catnet/catastrophe.hpp"

#include <variant>

namespace catnet {

/// Tolerance on ||grad_x V_eps||_inf for a point to count as an equilibrium.
inline constexpr double tol_equilibrium = 1e-9;

struct CouplingSpec {
  double epsilon = 0.0;
  Matrix lambda; // k x k, symmetric, zero diagonal

  /// Weak-but-nontrivial coupling: eps > 0 and some lambda_ij != 0.
  bool nontrivial() const {
    return epsilon > 0.0 && lambda.size() > 0 && (lambda.array() != 0.0).any();
  }
};

class NetworkSystem {
public:
  NetworkSystem() = default;

  NetworkSystem(std::vector<NormalForm> sectors, CouplingSpec coupling)
      : sectors_(std::move(sectors)), coupling_(std::move(coupling)) {
    require(!sectors_.empty(), "NetworkSystem: at least one sector required");
    const auto k = static_cast<Eigen::Index>(sectors_.size());
    if (coupling_.lambda.size() == 0)
      coupling_.lambda = Matrix::Zero(k, k);
    require(coupling_.lambda.rows() == k && coupling_.lambda.cols() == k,
            "NetworkSystem: lambda must be k x k");
    require(coupling_.epsilon >= 0.0 && std::isfinite(coupling_.epsilon),
            "NetworkSystem: epsilon must be finite and >= 0");
    for (Eigen::Index i = 0; i < k; ++i) {
      require(coupling_.lambda(i, i) == 0.0, "NetworkSystem: lambda diagonal must be zero");
      for (Eigen::Index j = 0; j < k; ++j)
        require(coupling_.lambda(i, j) == coupling_.lambda(j, i),
                "NetworkSystem: lambda must be symmetric");
    }
    int xo = 0, ao = 0;
    for (const auto &f : sectors_) {
      x_offset_.push_back(xo);
      a_offset_.push_back(ao);
      xo += f.behavior_dim();
      ao += f.control_dim();
    }
    n_ = xo;
    p_ = ao;
  }

  int k() const { return static_cast<int>(sectors_.size()); }
  int n() const { return n_; }
  int p() const { return p_; }
  const std::vector<NormalForm> &sectors() const { return sectors_; }
  NormalForm sector(int i) const { return sectors_[i]; }
  const CouplingSpec &coupling() const { return coupling_; }

  int behavior_offset(int i) const { return x_offset_[i]; }
  int control_offset(int i) const { return a_offset_[i]; }
  int behavior_dim(int i) const { return sectors_[i].behavior_dim(); }
  int control_dim(int i) const { return sectors_[i].control_dim(); }

  /// eps * lambda_ij, the constant cross-block entry of H_eps.
  double coupling_weight(int i, int j) const {
    return coupling_.epsilon * coupling_.lambda(i, j);
  }

  Vector sector_x(const Vector &x, int i) const {
    return x.segment(x_offset_[i], behavior_dim(i));
  }
  Vector sector_alpha(const Vector &alpha, int i) const {
    return alpha.segment(a_offset_[i], control_dim(i));
  }

  void check(const Vector &x, const Vector &alpha) const {
    if (x.size() != n_ || alpha.size() != p_)
      throw PreconditionError("network: expected x of length " + std::to_string(n_) +
                              " and alpha of length " + std::to_string(p_) + ", got " +
                              std::to_string(x.size()) + " and " +
                              std::to_string(alpha.size()));
  }

private:
  std::vector<NormalForm> sectors_;
  CouplingSpec coupling_;
  std::vector<int> x_offset_, a_offset_;
  int n_ = 0, p_ = 0;
};

inline double network_potential(const NetworkSystem &sys, const Vector &x, const Vector &alpha) {
  sys.check(x, alpha);
  double v = 0.0;
  for (int i = 0; i < sys.k(); ++i)
    v += potential(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(alpha, i));
  double w = 0.0;
  for (int i = 0; i < sys.k(); ++i)
    for (int j = i + 1; j < sys.k(); ++j)
      w += sys.coupling().lambda(i, j) * x[sys.behavior_offset(i)] * x[sys.behavior_offset(j)];
  return v + sys.coupling().epsilon * w;
}

inline Vector network_gradient(const NetworkSystem &sys, const Vector &x, const Vector &alpha) {
  sys.check(x, alpha);
  Vector g(sys.n());
  for (int i = 0; i < sys.k(); ++i)
    g.segment(sys.behavior_offset(i), sys.behavior_dim(i)) =
        gradient(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(alpha, i));
  for (int i = 0; i < sys.k(); ++i)
    for (int j = 0; j < sys.k(); ++j)
      if (i != j)
        g[sys.behavior_offset(i)] += sys.coupling_weight(i, j) * x[sys.behavior_offset(j)];
  return g;
}

inline Matrix network_hessian(const NetworkSystem &sys, const Vector &x, const Vector &alpha) {
  sys.check(x, alpha);
  Matrix h = Matrix::Zero(sys.n(), sys.n());
  for (int i = 0; i < sys.k(); ++i) {
    const int o = sys.behavior_offset(i), d = sys.behavior_dim(i);
    h.block(o, o, d, d) = hessian(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(alpha, i));
  }
  for (int i = 0; i < sys.k(); ++i)
    for (int j = 0; j < sys.k(); ++j)
      if (i != j)
        h(sys.behavior_offset(i), sys.behavior_offset(j)) = sys.coupling_weight(i, j);
  return h;
}

/// B = d^2 V_eps / dx dalpha (n x p). Block diagonal: W carries no controls.
inline Matrix network_mixed(const NetworkSystem &sys, const Vector &x, const Vector &alpha) {
  sys.check(x, alpha);
  Matrix b = Matrix::Zero(sys.n(), sys.p());
  for (int i = 0; i < sys.k(); ++i)
    b.block(sys.behavior_offset(i), sys.control_offset(i), sys.behavior_dim(i),
            sys.control_dim(i)) =
        mixed_derivative(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(alpha, i));
  return b;
}

/// dH_eps/dx_k for every behavior coordinate (W is bilinear, so only the
/// sector blocks contribute).
inline std::vector<Matrix> network_hessian_x_derivatives(const NetworkSystem &sys,
                                                         const Vector &x,
                                                         const Vector &alpha) {
  sys.check(x, alpha);
  std::vector<Matrix> out(sys.n(), Matrix::Zero(sys.n(), sys.n()));
  for (int i = 0; i < sys.k(); ++i) {
    const int o = sys.behavior_offset(i), d = sys.behavior_dim(i);
    const auto blocks =
        hessian_x_derivatives(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(alpha, i));
    for (int q = 0; q < d; ++q)
      out[o + q].block(o, o, d, d) = blocks[q];
  }
  return out;
}

inline std::vector<Matrix> network_hessian_alpha_derivatives(const NetworkSystem &sys,
                                                             const Vector &x,
                                                             const Vector &alpha) {
  sys.check(x, alpha);
  std::vector<Matrix> out(sys.p(), Matrix::Zero(sys.n(), sys.n()));
  for (int i = 0; i < sys.k(); ++i) {
    const int o = sys.behavior_offset(i), d = sys.behavior_dim(i);
    const int ao = sys.control_offset(i);
    const auto blocks =
        hessian_alpha_derivatives(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(alpha, i));
    for (int q = 0; q < sys.control_dim(i); ++q)
      out[ao + q].block(o, o, d, d) = blocks[q];
  }
  return out;
}

/// Stability signature of one sector's diagonal block of H_eps.
struct SectorSignature {
  int negative_eigenvalues = 0;
  double min_abs_eigenvalue = 0.0;

  friend bool operator==(const SectorSignature &, const SectorSignature &) = default;
};

struct NetworkEquilibrium {
  Vector x;
  Vector alpha;
  std::vector<SectorSignature> sector_signatures;
  double full_min_singular_value = 0.0;
  int negative_eigenvalues = 0; // of the full H_eps

  bool is_minimum() const { return negative_eigenvalues == 0; }
};

inline std::vector<SectorSignature> sector_signatures(const NetworkSystem &sys, const Matrix &h) {
  std::vector<SectorSignature> out;
  for (int i = 0; i < sys.k(); ++i) {
    const int o = sys.behavior_offset(i), d = sys.behavior_dim(i);
    const Vector ev = symmetric_eigenvalues(h.block(o, o, d, d));
    out.push_back({static_cast<int>((ev.array() < 0.0).count()), ev.cwiseAbs().minCoeff()});
  }
  return out;
}

/// Attach stability data to a point (no convergence check).
inline NetworkEquilibrium make_equilibrium(const NetworkSystem &sys, Vector x, Vector alpha) {
  const Matrix h = network_hessian(sys, x, alpha);
  NetworkEquilibrium eq;
  eq.sector_signatures = sector_signatures(sys, h);
  const Vector ev = symmetric_eigenvalues(h);
  eq.full_min_singular_value = ev.cwiseAbs().minCoeff();
  eq.negative_eigenvalues = static_cast<int>((ev.array() < 0.0).count());
  eq.x = std::move(x);
  eq.alpha = std::move(alpha);
  return eq;
}

inline bool is_equilibrium(const NetworkSystem &sys, const Vector &x, const Vector &alpha,
                           double tol = tol_equilibrium) {
  return inf_norm(network_gradient(sys, x, alpha)) < tol;
}

inline NewtonResult network_newton(const NetworkSystem &sys, const Vector &alpha,
                                   const Vector &x0, const NewtonOptions &opts = {}) {
  return newton_solve([&](const Vector &x) { return network_gradient(sys, x, alpha); },
                      [&](const Vector &x) { return network_hessian(sys, x, alpha); }, x0,
                      opts);
}

/// All equilibria reachable by Newton from the deterministic start set:
/// Cartesian products of per-sector uncoupled critical points plus the box
/// corners. Results lie inside the box, are merged at tol_merge and sorted.
inline std::vector<NetworkEquilibrium> find_equilibria(const NetworkSystem &sys,
                                                       const Vector &alpha,
                                                       const SearchBox &box) {
  require(alpha.size() == sys.p(), "find_equilibria: alpha length mismatch");
  require(box.lo <= box.hi, "find_equilibria: empty search box");

  std::vector<Vector> starts;
  constexpr std::size_t max_product = 1u << 14;
  {
    std::vector<std::vector<Vector>> per_sector;
    std::size_t total = 1;
    for (int i = 0; i < sys.k(); ++i) {
      std::vector<Vector> xs;
      for (const auto &cp : critical_points(sys.sector(i), sys.sector_alpha(alpha, i), box))
        xs.push_back(cp.point.x);
      total *= xs.size();
      per_sector.push_back(std::move(xs));
    }
    if (total > 0 && total <= max_product) {
      std::vector<std::size_t> idx(sys.k(), 0);
      for (std::size_t c = 0; c < total; ++c) {
        Vector x(sys.n());
        for (int i = 0; i < sys.k(); ++i)
          x.segment(sys.behavior_offset(i), sys.behavior_dim(i)) = per_sector[i][idx[i]];
        starts.push_back(std::move(x));
        for (int i = 0; i < sys.k(); ++i) {
          if (++idx[i] < per_sector[i].size())
            break;
          idx[i] = 0;
        }
      }
    }
  }
  if (sys.n() <= 14) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << sys.n()); ++mask) {
      Vector x(sys.n());
      for (int d = 0; d < sys.n(); ++d)
        x[d] = (mask >> d) & 1u ? box.hi : box.lo;
      starts.push_back(std::move(x));
    }
  }

  std::vector<NetworkEquilibrium> out;
  for (const auto &x0 : starts) {
    const NewtonResult r = network_newton(sys, alpha, x0);
    if (!r.converged || !box.contains(r.x, 1e-9))
      continue;
    const bool seen = std::any_of(out.begin(), out.end(), [&](const NetworkEquilibrium &e) {
      return (e.x - r.x).norm() < tol_merge;
    });
    if (!seen)
      out.push_back(make_equilibrium(sys, r.x, alpha));
  }
  std::sort(out.begin(), out.end(), [](const NetworkEquilibrium &a, const NetworkEquilibrium &b) {
    return std::lexicographical_compare(a.x.begin(), a.x.end(), b.x.begin(), b.x.end());
  });
  return out;
}

struct ContinuationOptions {
  NewtonOptions newton;
  double max_substep_dx = 0.1; // largest accepted state change per sub-step
  int max_halvings = 20;       // sub-step floor is 2^-max_halvings of the step
};

/// Branch termination: the continued equilibrium ceased to exist (Newton
/// lost it) or became degenerate.
struct FoldSignal {
  enum class Reason { NoConvergence, Degenerate };
  Reason reason = Reason::NoConvergence;
  NetworkEquilibrium last_good; // furthest point reached along the step
  double reached_fraction = 0.0;
};

using ContinuationResult = std::variant<NetworkEquilibrium, FoldSignal>;

namespace detail {

struct TrackResult {
  Vector x;
  double reached = 0.0;
  bool complete = false;
};

/// Natural-parameter continuation of a root of grad(x, s) = 0 for s in [0, 1]
/// with step halving. A sub-step is accepted when Newton converges and the
/// state moves by at most max_substep_dx.
template <class GradFn, class HessFn>
TrackResult track_root(GradFn &&grad, HessFn &&hess, Vector x, const ContinuationOptions &opts) {
  TrackResult out;
  double s = 0.0, ds = 1.0;
  const double min_ds = std::ldexp(1.0, -opts.max_halvings);
  while (s < 1.0) {
    ds = std::min(ds, 1.0 - s);
    const double target = (s + ds >= 1.0) ? 1.0 : s + ds;
    const NewtonResult r = newton_solve([&](const Vector &y) { return grad(y, target); },
                                        [&](const Vector &y) { return hess(y, target); }, x,
                                        opts.newton);
    if (r.converged && inf_norm(r.x - x) <= opts.max_substep_dx) {
      x = r.x;
      s = target;
      ds *= 2.0;
    } else {
      ds *= 0.5;
      if (ds < min_ds)
        break;
    }
  }
  out.x = std::move(x);
  out.reached = s;
  out.complete = s >= 1.0;
  return out;
}

inline Vector lerp(const Vector &a, const Vector &b, double s) {
  return s >= 1.0 ? b : Vector(a + s * (b - a));
}

} // namespace detail

/// Newton-correct a known equilibrium to new controls. The step is split
/// into sub-steps when needed; failure to follow the branch all the way, or
/// a degenerate endpoint, yields a FoldSignal.
inline ContinuationResult continue_equilibrium(const NetworkSystem &sys,
                                               const NetworkEquilibrium &eq,
                                               const Vector &alpha_new,
                                               const ContinuationOptions &opts = {}) {
  sys.check(eq.x, eq.alpha);
  require(alpha_new.size() == sys.p(), "continue_equilibrium: alpha length mismatch");
  const auto track = detail::track_root(
      [&](const Vector &x, double s) {
        return network_gradient(sys, x, detail::lerp(eq.alpha, alpha_new, s));
      },
      [&](const Vector &x, double s) {
        return network_hessian(sys, x, detail::lerp(eq.alpha, alpha_new, s));
      },
      eq.x, opts);
  if (!track.complete) {
    FoldSignal fs;
    fs.reason = FoldSignal::Reason::NoConvergence;
    fs.reached_fraction = track.reached;
    fs.last_good = track.reached > 0.0
                       ? make_equilibrium(sys, track.x, detail::lerp(eq.alpha, alpha_new, track.reached))
                       : eq;
    return fs;
  }
  NetworkEquilibrium out = make_equilibrium(sys, track.x, alpha_new);
  if (out.full_min_singular_value < tol_degeneracy) {
    FoldSignal fs;
    fs.reason = FoldSignal::Reason::Degenerate;
    fs.reached_fraction = 1.0;
    fs.last_good = std::move(out);
    return fs;
  }
  return out;
}

/// Follow sector i's own equilibrium while every other sector's state and
/// all controls move linearly from (x_from, alpha_from) to (x_to, alpha_to).
/// Returns the continued sector state, or nothing when the sector branch is
/// lost on the way.
inline std::optional<Vector> continue_sector(const NetworkSystem &sys, int i,
                                             const Vector &x_from, const Vector &alpha_from,
                                             const Vector &x_to, const Vector &alpha_to,
                                             const ContinuationOptions &opts = {}) {
  sys.check(x_from, alpha_from);
  sys.check(x_to, alpha_to);
  const int o = sys.behavior_offset(i), d = sys.behavior_dim(i);
  auto full = [&](const Vector &xi, double s) {
    Vector x = detail::lerp(x_from, x_to, s);
    x.segment(o, d) = xi;
    return x;
  };
  const auto track = detail::track_root(
      [&](const Vector &xi, double s) {
        return Vector(
            network_gradient(sys, full(xi, s), detail::lerp(alpha_from, alpha_to, s)).segment(o, d));
      },
      [&](const Vector &xi, double s) {
        return Matrix(network_hessian(sys, full(xi, s), detail::lerp(alpha_from, alpha_to, s))
                          .block(o, o, d, d));
      },
      x_from.segment(o, d), opts);
  if (!track.complete)
    return std::nullopt;
  return track.x;
}

/// Gradient flow left a ball of the configured escape radius.
class EscapeError : public std::runtime_error {
public:
  EscapeError(const std::string &what, Vector where)
      : std::runtime_error(what), where_(std::move(where)) {}
  const Vector &where() const { return where_; }

private:
  Vector where_;
};

struct RelaxOptions {
  double tolerance = tol_equilibrium;
  int max_iterations = 20000;
  double escape_radius = 1e3;
  double max_step = 0.1; // inf-norm cap on a single state update
};

struct RelaxResult {
  Vector x;
  bool converged = false;
  int iterations = 0;
};

/// Relax the state along dx/dt = -grad V_eps. Explicit steps with an
/// adaptive time step and Armijo backtracking on V_eps; where the Hessian is
/// positive definite the step is preconditioned by it (Newton step), which
/// leaves the set of reachable minima unchanged but converges quadratically.
inline RelaxResult relax(const NetworkSystem &sys, Vector x, const Vector &alpha,
                         const RelaxOptions &opts = {}) {
  sys.check(x, alpha);
  RelaxResult out;
  double h = 0.1;
  double v = network_potential(sys, x, alpha);
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it;
    if (!(inf_norm(x) <= opts.escape_radius))
      throw EscapeError("gradient flow left the escape radius", x);
    const Vector g = network_gradient(sys, x, alpha);
    if (inf_norm(g) < opts.tolerance) {
      out.converged = true;
      break;
    }
    const Matrix hs = network_hessian(sys, x, alpha);
    Eigen::LLT<Matrix> llt(hs);
    const bool newton = llt.info() == Eigen::Success && symmetric_eigenvalues(hs)[0] > 0.0;
    Vector d = newton ? Vector(llt.solve(-g)) : Vector(-h * g);
    const double dn = inf_norm(d);
    if (dn > opts.max_step)
      d *= opts.max_step / dn;
    const double slope = g.dot(d);
    // Near a minimum the decrease drops below round-off in V itself.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(v));
    double t = 1.0;
    Vector trial = x + d;
    double vt = network_potential(sys, trial, alpha);
    while (!(vt <= v + 1e-4 * t * slope + noise) && t > 1e-12) {
      t *= 0.5;
      trial = x + t * d;
      vt = network_potential(sys, trial, alpha);
    }
    if (t <= 1e-12) {
      // No descent possible at this resolution: the state sits on a flat
      // or round-off-limited spot.
      out.converged = inf_norm(g) < 1e3 * opts.tolerance;
      break;
    }
    if (!newton)
      h = (t == 1.0) ? std::min(2.0 * h, 1e3) : std::max(h * t, 1e-8);
    x = std::move(trial);
    v = vt;
  }
  if (!(inf_norm(x) <= opts.escape_radius))
    throw EscapeError("gradient flow left the escape radius", x);
  out.x = std::move(x);
  return out;
}

} // namespace catnet
