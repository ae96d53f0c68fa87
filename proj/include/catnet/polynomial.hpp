#pragma once

// Real-root isolation for univariate polynomials via Sturm sequences.

#include "catnet/common.hpp"

#include <cstddef>
#include <span>

namespace catnet::poly {

/// Coefficients in ascending order: c[0] + c[1] x + ... + c[d] x^d.
using Coefficients = std::vector<double>;

inline double evaluate(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;)
    acc = acc * x + c[i];
  return acc;
}

inline Coefficients derivative(std::span<const double> c) {
  Coefficients d;
  for (std::size_t i = 1; i < c.size(); ++i)
    d.push_back(static_cast<double>(i) * c[i]);
  return d;
}

inline double max_abs(std::span<const double> c) {
  double m = 0.0;
  for (double v : c)
    m = std::max(m, std::abs(v));
  return m;
}

/// Drop leading coefficients that are negligible relative to `scale`.
inline void trim(Coefficients &c, double scale) {
  const double cutoff = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  while (!c.empty() && std::abs(c.back()) <= cutoff)
    c.pop_back();
}

/// Remainder of u / v (v must have a nonzero leading coefficient).
inline Coefficients remainder(Coefficients u, std::span<const double> v) {
  const std::size_t dv = v.size() - 1;
  const double lead = v.back();
  while (u.size() > dv) {
    const double q = u.back() / lead;
    const std::size_t shift = u.size() - 1 - dv;
    for (std::size_t i = 0; i <= dv; ++i)
      u[shift + i] -= q * v[i];
    u.pop_back();
  }
  return u;
}

/// Sturm sequence p, p', -rem(p, p'), ... Each member is scaled to unit
/// max-norm; the chain stops at the (numerical) gcd of p and p'.
inline std::vector<Coefficients> sturm_sequence(Coefficients p) {
  std::vector<Coefficients> seq;
  trim(p, max_abs(p));
  if (p.empty())
    return seq;
  const double s0 = max_abs(p);
  for (double &v : p)
    v /= s0;
  seq.push_back(p);
  Coefficients dp = derivative(p);
  trim(dp, max_abs(dp));
  if (dp.empty())
    return seq;
  const double s1 = max_abs(dp);
  for (double &v : dp)
    v /= s1;
  seq.push_back(dp);
  while (seq.back().size() > 1) {
    const auto &u = seq[seq.size() - 2];
    const auto &v = seq.back();
    Coefficients r = remainder(u, v);
    trim(r, std::max(max_abs(u), max_abs(v)));
    if (r.empty())
      break;
    const double s = max_abs(r);
    for (double &c : r)
      c = -c / s;
    seq.push_back(std::move(r));
  }
  return seq;
}

inline int sign_changes(const std::vector<Coefficients> &seq, double x) {
  int changes = 0;
  int last = 0;
  for (const auto &p : seq) {
    const double v = evaluate(p, x);
    const int s = (v > 0.0) - (v < 0.0);
    if (s == 0)
      continue;
    if (last != 0 && s != last)
      ++changes;
    last = s;
  }
  return changes;
}

/// Number of distinct real roots in (a, b].
inline int count_roots(const std::vector<Coefficients> &seq, double a, double b) {
  return sign_changes(seq, a) - sign_changes(seq, b);
}

namespace detail {

inline double refine(const std::vector<Coefficients> &seq, double a, double b) {
  const auto &p = seq.front();
  double fa = evaluate(p, a);
  const double fb = evaluate(p, b);
  const bool bracket = (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0);
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b)
      break;
    const double fm = evaluate(p, m);
    if (fm == 0.0)
      return m;
    if (bracket) {
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    } else if (count_roots(seq, a, m) > 0) {
      b = m;
    } else {
      a = m;
    }
  }
  return 0.5 * (a + b);
}

inline void isolate(const std::vector<Coefficients> &seq, double a, double b,
                    int count, int depth, std::vector<double> &out) {
  if (count <= 0)
    return;
  if (count == 1) {
    out.push_back(refine(seq, a, b));
    return;
  }
  const double m = 0.5 * (a + b);
  if (depth > 200 || m <= a || m >= b) {
    // Unresolvable cluster at machine precision: report it once.
    out.push_back(m);
    return;
  }
  if (evaluate(seq.front(), m) == 0.0) {
    const double left = std::nextafter(m, a);
    out.push_back(m);
    isolate(seq, a, left, count_roots(seq, a, left), depth + 1, out);
    isolate(seq, m, b, count_roots(seq, m, b), depth + 1, out);
    return;
  }
  isolate(seq, a, m, count_roots(seq, a, m), depth + 1, out);
  isolate(seq, m, b, count_roots(seq, m, b), depth + 1, out);
}

} // namespace detail

/// All distinct real roots of p in [lo, hi], ascending. A root of
/// multiplicity > 1 is reported once.
inline std::vector<double> real_roots(const Coefficients &p, double lo, double hi) {
  require(lo <= hi, "real_roots: empty interval");
  std::vector<double> roots;
  const auto seq = sturm_sequence(p);
  if (seq.size() <= 1)
    return roots; // constant polynomial (or zero): no isolated roots
  if (evaluate(seq.front(), lo) == 0.0)
    roots.push_back(lo);
  detail::isolate(seq, lo, hi, count_roots(seq, lo, hi), 0, roots);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double u, double v) {
                            return std::abs(u - v) <= 1e-12 * (1.0 + std::abs(u));
                          }),
              roots.end());
  return roots;
}

} // namespace catnet::poly
