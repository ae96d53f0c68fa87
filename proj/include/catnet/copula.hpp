#pragma once

// Archimedean copulas (Independence, Clayton, Gumbel): generators, CDF,
// Marshall-Olkin sampling, Kendall's tau and moment fitting, and the
// rank transform of per-sector event intensities.

#include "catnet/cascade.hpp"

#include <cstdint>
#include <numbers>
#include <random>

namespace catnet {

enum class CopulaFamily { Independence, Clayton, Gumbel };

inline constexpr std::string_view to_string(CopulaFamily f) {
  switch (f) {
  case CopulaFamily::Independence: return "independence";
  case CopulaFamily::Clayton: return "clayton";
  case CopulaFamily::Gumbel: return "gumbel";
  }
  return "unknown";
}

inline std::optional<CopulaFamily> family_from_string(std::string_view s) {
  for (auto f : {CopulaFamily::Independence, CopulaFamily::Clayton, CopulaFamily::Gumbel})
    if (to_string(f) == s)
      return f;
  return std::nullopt;
}

/// Fitted parameters are capped here; comonotone data would otherwise give
/// an infinite theta.
inline constexpr double theta_max = 50.0;

class CopulaModel {
public:
  CopulaModel() = default;

  CopulaModel(CopulaFamily family, double theta) : family_(family), theta_(theta) {
    switch (family) {
    case CopulaFamily::Independence:
      theta_ = 0.0;
      break;
    case CopulaFamily::Clayton:
      require(theta > 0.0 && std::isfinite(theta), "Clayton copula requires theta > 0");
      break;
    case CopulaFamily::Gumbel:
      require(theta >= 1.0 && std::isfinite(theta), "Gumbel copula requires theta >= 1");
      break;
    }
  }

  static CopulaModel independence() { return {}; }

  CopulaFamily family() const { return family_; }
  double theta() const { return theta_; }

  /// Population Kendall tau of the family.
  double tau() const {
    switch (family_) {
    case CopulaFamily::Clayton: return theta_ / (theta_ + 2.0);
    case CopulaFamily::Gumbel: return 1.0 - 1.0 / theta_;
    default: return 0.0;
    }
  }

private:
  CopulaFamily family_ = CopulaFamily::Independence;
  double theta_ = 0.0;
};

/// psi(t) for t in (0, 1].
inline double generator(const CopulaModel &m, double t) {
  if (!(t > 0.0 && t <= 1.0))
    throw DomainError("copula generator: t must lie in (0, 1]");
  switch (m.family()) {
  case CopulaFamily::Independence: return -std::log(t);
  case CopulaFamily::Clayton: return (std::pow(t, -m.theta()) - 1.0) / m.theta();
  case CopulaFamily::Gumbel: return std::pow(-std::log(t), m.theta());
  }
  return 0.0;
}

/// psi^{-1}(s) for s >= 0 (s = +inf maps to 0).
inline double generator_inverse(const CopulaModel &m, double s) {
  if (!(s >= 0.0))
    throw DomainError("copula generator inverse: s must be >= 0");
  switch (m.family()) {
  case CopulaFamily::Independence: return std::exp(-s);
  case CopulaFamily::Clayton: return std::pow(1.0 + m.theta() * s, -1.0 / m.theta());
  case CopulaFamily::Gumbel: return std::exp(-std::pow(s, 1.0 / m.theta()));
  }
  return 0.0;
}

/// C(u) = psi^{-1}(psi(u_1) + ... + psi(u_k)).
inline double copula_cdf(const CopulaModel &m, std::span<const double> u) {
  require(!u.empty(), "copula_cdf: empty argument");
  double s = 0.0;
  for (double ui : u) {
    if (!(ui > 0.0 && ui <= 1.0))
      throw DomainError("copula_cdf: components must lie in (0, 1]");
    s += generator(m, ui);
  }
  return generator_inverse(m, s);
}

inline double copula_cdf(const CopulaModel &m, const Vector &u) {
  return copula_cdf(m, std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
}

/// Marshall-Olkin frailty sampler: a mixing variable M whose Laplace
/// transform is psi^{-1}, then U_i = psi^{-1}(E_i / M) for independent
/// standard exponentials E_i. Returns an n x k matrix.
inline Matrix sample(const CopulaModel &m, int k, int n, std::uint64_t seed) {
  require(n >= 1 && k >= 2, "copula sample: need n >= 1 and k >= 2");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, std::numbers::pi);
  std::gamma_distribution<double> gamma(m.family() == CopulaFamily::Clayton ? 1.0 / m.theta() : 1.0,
                                        m.family() == CopulaFamily::Clayton ? m.theta() : 1.0);
  Matrix out(n, k);
  for (int r = 0; r < n; ++r) {
    double mix = 1.0;
    if (m.family() == CopulaFamily::Clayton) {
      mix = gamma(rng);
    } else if (m.family() == CopulaFamily::Gumbel && m.theta() > 1.0) {
      // Positive stable law, Laplace transform exp(-s^a), a = 1/theta
      // (Chambers-Mallows-Stuck in Kanter's form).
      const double a = 1.0 / m.theta();
      double v = unif(rng);
      while (v <= 0.0)
        v = unif(rng);
      const double e = expo(rng);
      mix = std::sin(a * v) / std::pow(std::sin(v), 1.0 / a) *
            std::pow(std::sin((1.0 - a) * v) / e, (1.0 - a) / a);
    }
    for (int c = 0; c < k; ++c)
      out(r, c) = generator_inverse(m, expo(rng) / mix);
  }
  return out;
}

/// Kendall's tau-b of two equally long samples.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "kendall_tau: need two samples of equal length >= 2");
  const std::size_t n = x.size();
  long double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0)
        continue;
      if (dx == 0.0)
        ++ties_x;
      else if (dy == 0.0)
        ++ties_y;
      else if ((dx > 0.0) == (dy > 0.0))
        ++concordant;
      else
        ++discordant;
    }
  }
  const long double denom =
      std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
  if (denom == 0.0L)
    throw EstimationError("kendall_tau: a sample consists only of ties");
  return static_cast<double>((concordant - discordant) / denom);
}

inline double kendall_tau(const Vector &x, const Vector &y) {
  return kendall_tau(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                     std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

/// Rank-transformed sample: every column holds average ranks / (n + 1).
struct PseudoObservations {
  Matrix u;
  std::vector<bool> degenerate; // column made only of ties

  int n() const { return static_cast<int>(u.rows()); }
  int k() const { return static_cast<int>(u.cols()); }
};

inline PseudoObservations rank_transform(const Matrix &raw) {
  PseudoObservations po;
  const auto n = raw.rows();
  po.u.resize(n, raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return raw(a, c) < raw(b, c); });
    for (Eigen::Index lo = 0; lo < n;) {
      Eigen::Index hi = lo;
      while (hi + 1 < n && raw(order[hi + 1], c) == raw(order[lo], c))
        ++hi;
      const double rank = 0.5 * static_cast<double>(lo + hi) + 1.0;
      for (Eigen::Index q = lo; q <= hi; ++q)
        po.u(order[q], c) = rank / static_cast<double>(n + 1);
      lo = hi + 1;
    }
    po.degenerate.push_back(n > 0 && (raw.col(c).array() == raw(0, c)).all());
  }
  return po;
}

inline Matrix tau_matrix(const PseudoObservations &po) {
  const int k = po.k();
  Matrix t = Matrix::Identity(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      t(i, j) = t(j, i) = (po.degenerate[i] || po.degenerate[j])
                              ? std::numeric_limits<double>::quiet_NaN()
                              : kendall_tau(Vector(po.u.col(i)), Vector(po.u.col(j)));
  return t;
}

struct CopulaFit {
  CopulaModel model;
  CopulaFamily requested = CopulaFamily::Independence;
  double tau = 0.0;
  bool independence_fallback = false;
  bool saturated = false;
};

/// Moment fit by Kendall's tau. For k > 2 the pairwise taus are averaged.
/// A tau that is not significantly positive (<= 0, or within 1.96 standard
/// errors of 0 under independence) falls back to Independence.
inline CopulaFit fit_by_tau(const PseudoObservations &po, CopulaFamily family) {
  require(po.n() >= 10 && po.k() >= 2, "fit_by_tau: need n >= 10 observations of k >= 2 columns");
  for (int c = 0; c < po.k(); ++c)
    if (po.degenerate[c])
      throw EstimationError("fit_by_tau: column " + std::to_string(c) + " is degenerate (all ties)");
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < po.k(); ++i)
    for (int j = i + 1; j < po.k(); ++j, ++pairs)
      sum += kendall_tau(Vector(po.u.col(i)), Vector(po.u.col(j)));
  CopulaFit fit;
  fit.requested = family;
  fit.tau = sum / pairs;
  if (family == CopulaFamily::Independence)
    return fit;
  const double n = po.n();
  const double se0 = std::sqrt(2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0)));
  if (fit.tau <= 0.0 || fit.tau <= 1.96 * se0) {
    fit.independence_fallback = true;
    return fit;
  }
  double theta = family == CopulaFamily::Clayton
                     ? (fit.tau >= 1.0 ? theta_max : 2.0 * fit.tau / (1.0 - fit.tau))
                     : (fit.tau >= 1.0 ? theta_max : 1.0 / (1.0 - fit.tau));
  if (theta >= theta_max) {
    theta = theta_max;
    fit.saturated = true;
  }
  fit.model = CopulaModel(family, theta);
  return fit;
}

/// Per replicate and sector, the jump size of the largest event (0 when the
/// sector had none), rank-transformed column by column.
inline PseudoObservations intensities_from_reports(std::span<const CascadeReport> reports, int k) {
  require(reports.size() >= 10, "intensities_from_reports: need at least 10 replicate reports");
  Matrix raw = Matrix::Zero(static_cast<Eigen::Index>(reports.size()), k);
  for (std::size_t r = 0; r < reports.size(); ++r)
    for (const auto &e : reports[r].events) {
      require(e.sector >= 0 && e.sector < k, "intensities_from_reports: sector out of range");
      raw(static_cast<Eigen::Index>(r), e.sector) =
          std::max(raw(static_cast<Eigen::Index>(r), e.sector), e.jump_size);
    }
  return rank_transform(raw);
}

} // namespace catnet
