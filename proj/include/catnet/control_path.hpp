#pragma once

// Control trajectories alpha(t): deterministic ramps and Euler-Maruyama
// diffusions with uniformly elliptic covariance.

#include "catnet/common.hpp"

#include <cstdint>
#include <random>
#include <variant>

namespace catnet {

inline constexpr double default_ellipticity_floor = 1e-6;

/// splitmix64 finalizer; decorrelates consecutive integers.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of ensemble replicate r.
inline constexpr std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t r) {
  return base_seed ^ splitmix64(r);
}

/// True iff the smallest eigenvalue of the (symmetric) covariance is >= floor.
inline bool ellipticity_check(const Matrix &covariance, double floor) {
  require(covariance.rows() == covariance.cols() && covariance.rows() > 0,
          "ellipticity_check: covariance must be square and nonempty");
  require((covariance - covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "ellipticity_check: covariance must be symmetric");
  return symmetric_eigenvalues(covariance)[0] >= floor;
}

struct Ramp {
  Vector alpha_start;
  Vector alpha_end;
};

struct Diffusion {
  Vector drift;
  Matrix covariance;
};

class ControlPathSpec {
public:
  using Kind = std::variant<Ramp, Diffusion>;

  static ControlPathSpec ramp(Vector alpha_start, Vector alpha_end, double horizon, double dt) {
    require(alpha_start.size() == alpha_end.size() && alpha_start.size() > 0,
            "ramp: start and end must have the same nonzero length");
    return ControlPathSpec(Ramp{std::move(alpha_start), std::move(alpha_end)}, horizon, dt, 0,
                           default_ellipticity_floor);
  }

  /// Rejects covariances that are not uniformly elliptic at `floor`.
  static ControlPathSpec diffusion(Vector drift, Matrix covariance, double horizon, double dt,
                                   std::uint64_t seed,
                                   double floor = default_ellipticity_floor) {
    require(floor > 0.0, "diffusion: ellipticity floor must be positive");
    require(drift.size() > 0 && covariance.rows() == drift.size() &&
                covariance.cols() == drift.size(),
            "diffusion: covariance must be p x p with p = length(drift)");
    if (!ellipticity_check(covariance, floor))
      throw PreconditionError(
          "diffusion: covariance is not uniformly elliptic (smallest eigenvalue below floor)");
    return ControlPathSpec(Diffusion{std::move(drift), std::move(covariance)}, horizon, dt, seed,
                           floor);
  }

  const Kind &kind() const { return kind_; }
  bool is_diffusion() const { return std::holds_alternative<Diffusion>(kind_); }
  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  std::uint64_t seed() const { return seed_; }
  double ellipticity_floor() const { return floor_; }
  int control_dim() const {
    return static_cast<int>(std::visit(
        [](const auto &k) -> Eigen::Index {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Ramp>)
            return k.alpha_start.size();
          else
            return k.drift.size();
        },
        kind_));
  }

  /// ceil(T/dt); a ratio within 1e-9 of an integer counts as that integer.
  int steps() const {
    return static_cast<int>(std::ceil(horizon_ / dt_ - 1e-9));
  }

  ControlPathSpec with_seed(std::uint64_t seed) const {
    ControlPathSpec s = *this;
    s.seed_ = seed;
    return s;
  }

private:
  ControlPathSpec(Kind kind, double horizon, double dt, std::uint64_t seed, double floor)
      : kind_(std::move(kind)), horizon_(horizon), dt_(dt), seed_(seed), floor_(floor) {
    require(horizon > 0.0 && std::isfinite(horizon), "control path: horizon must be > 0");
    require(dt > 0.0 && dt < horizon, "control path: need 0 < dt < T");
  }

  Kind kind_;
  double horizon_ = 1.0;
  double dt_ = 0.01;
  std::uint64_t seed_ = 0;
  double floor_ = default_ellipticity_floor;
};

struct ControlPath {
  std::vector<double> times;
  std::vector<Vector> values;

  std::size_t size() const { return times.size(); }
};

/// Realize a path. Ramps interpolate linearly from alpha_start (alpha0 only
/// fixes the dimension); diffusions start at alpha0 and step
///   alpha_{n+1} = alpha_n + drift h + L z sqrt(h),  L L^T = covariance,
/// with z standard normal from mt19937_64 seeded by spec.seed(). The last
/// step is shortened so that the final time is exactly T.
inline ControlPath simulate_path(const ControlPathSpec &spec, const Vector &alpha0) {
  require(alpha0.size() == spec.control_dim(), "simulate_path: alpha0 length mismatch");
  const int steps = spec.steps();
  ControlPath path;
  path.times.reserve(steps + 1);
  path.values.reserve(steps + 1);
  for (int s = 0; s <= steps; ++s)
    path.times.push_back(s == steps ? spec.horizon() : s * spec.dt());

  if (const auto *ramp = std::get_if<Ramp>(&spec.kind())) {
    for (double t : path.times) {
      const double w = t / spec.horizon();
      path.values.push_back(w >= 1.0 ? ramp->alpha_end
                                     : Vector(ramp->alpha_start +
                                              w * (ramp->alpha_end - ramp->alpha_start)));
    }
    return path;
  }

  const auto &diff = std::get<Diffusion>(spec.kind());
  const Matrix chol = diff.covariance.llt().matrixL();
  std::mt19937_64 rng(spec.seed());
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector a = alpha0;
  Vector z(a.size());
  path.values.push_back(a);
  for (int s = 1; s <= steps; ++s) {
    const double h = path.times[s] - path.times[s - 1];
    for (Eigen::Index q = 0; q < z.size(); ++q)
      z[q] = normal(rng);
    a += diff.drift * h + chol * z * std::sqrt(h);
    path.values.push_back(a);
  }
  return path;
}

} // namespace catnet
