#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace catnet;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

const NormalForm fold{CatastropheKind::Fold};
const NormalForm cusp{CatastropheKind::Cusp};
const NormalForm butterfly{CatastropheKind::Butterfly};
const NormalForm elliptic{CatastropheKind::EllipticUmbilic};

} // namespace

TEST(NormalForm, DimensionsByKind) {
  const int behavior[] = {1, 1, 1, 1, 2, 2, 2};
  const int control[] = {1, 2, 3, 4, 3, 3, 4};
  for (std::size_t q = 0; q < all_kinds.size(); ++q) {
    const NormalForm f{all_kinds[q]};
    EXPECT_EQ(f.behavior_dim(), behavior[q]) << to_string(f.kind);
    EXPECT_EQ(f.control_dim(), control[q]) << to_string(f.kind);
    EXPECT_EQ(kind_from_string(to_string(f.kind)), f.kind);
  }
  EXPECT_FALSE(kind_from_string("frank").has_value());
}

TEST(Potential, HandValues) {
  EXPECT_EQ(potential(fold, vec({0}), vec({0})), 0.0);
  EXPECT_DOUBLE_EQ(potential(cusp, vec({1}), vec({-3, 2})), 0.75);
  EXPECT_DOUBLE_EQ(potential(elliptic, vec({1, 1}), vec({0, 0, 0})), -2.0);
}

TEST(Potential, AllFormsMatchDisplayedPolynomials) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    for (auto kind : all_kinds) {
      const NormalForm f{kind};
      const auto p = oracle::random_point(f, rng);
      const Vector &a = p.alpha;
      double expected = 0.0;
      if (f.is_a_series()) {
        const double x = p.x[0];
        switch (kind) {
        case CatastropheKind::Fold: expected = x * x * x / 3 + a[0] * x; break;
        case CatastropheKind::Cusp: expected = std::pow(x, 4) / 4 + a[0] * x * x / 2 + a[1] * x; break;
        case CatastropheKind::Swallowtail:
          expected = std::pow(x, 5) / 5 + a[0] * std::pow(x, 3) / 3 + a[1] * x * x / 2 + a[2] * x;
          break;
        default:
          expected = std::pow(x, 6) / 6 + a[0] * std::pow(x, 4) / 4 + a[1] * std::pow(x, 3) / 3 +
                     a[2] * x * x / 2 + a[3] * x;
        }
      } else {
        const double x = p.x[0], y = p.x[1];
        switch (kind) {
        case CatastropheKind::EllipticUmbilic:
          expected = x * x * x - 3 * x * y * y + a[0] * (x * x + y * y) + a[1] * x + a[2] * y;
          break;
        case CatastropheKind::HyperbolicUmbilic:
          expected = x * x * x + y * y * y + a[0] * x * y + a[1] * x + a[2] * y;
          break;
        default:
          expected = x * x * y + std::pow(y, 4) + a[0] * x * x + a[1] * y * y + a[2] * x + a[3] * y;
        }
      }
      EXPECT_NEAR(potential(f, p), expected, 1e-12 * (1 + std::abs(expected))) << to_string(kind);
    }
  }
}

TEST(Potential, DimensionMismatchIsPreconditionError) {
  EXPECT_THROW(potential(cusp, vec({1, 2}), vec({0, 0})), PreconditionError);
  EXPECT_THROW(gradient(elliptic, vec({1, 2}), vec({0, 0})), PreconditionError);
  EXPECT_THROW(hessian(fold, vec({1}), vec({0, 0})), PreconditionError);
}

TEST(Gradient, HandValues) {
  EXPECT_EQ(gradient(fold, vec({1}), vec({-1}))[0], 0.0);
  EXPECT_EQ(gradient(cusp, vec({1}), vec({-3, 2}))[0], 0.0);
  EXPECT_EQ(gradient(butterfly, vec({0}), vec({0, 0, 0, 5}))[0], 5.0);
}

TEST(Hessian, HandValues) {
  EXPECT_EQ(hessian(fold, vec({0}), vec({0.7}))(0, 0), 0.0);
  EXPECT_EQ(hessian(cusp, vec({1}), vec({-3, 0.3}))(0, 0), 0.0);
  const Matrix h = hessian(elliptic, vec({0, 0}), vec({1, 0, 0}));
  EXPECT_EQ(h, (Matrix(2, 2) << 2, 0, 0, 2).finished());
}

TEST(Derivatives, MatchFiniteDifferencesForAllForms) {
  std::mt19937_64 rng(3);
  for (auto kind : all_kinds) {
    const NormalForm f{kind};
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = oracle::random_point(f, rng);
      const Vector g = gradient(f, p);
      const Vector g_fd =
          oracle::fd_gradient([&](const Vector &x) { return potential(f, x, p.alpha); }, p.x);
      EXPECT_LT(oracle::rel_error(g, g_fd), 1e-5) << to_string(kind);
      const Matrix h = hessian(f, p);
      const Matrix h_fd =
          oracle::fd_jacobian([&](const Vector &x) { return gradient(f, x, p.alpha); }, p.x);
      EXPECT_LT(oracle::rel_error(h, h_fd), 1e-5) << to_string(kind);
      const Matrix b = mixed_derivative(f, p.x, p.alpha);
      const Matrix b_fd =
          oracle::fd_jacobian([&](const Vector &a) { return gradient(f, p.x, a); }, p.alpha);
      EXPECT_LT(oracle::rel_error(b, b_fd), 1e-5) << to_string(kind);
    }
  }
}

TEST(Hessian, DSeriesExactlySymmetric) {
  std::mt19937_64 rng(5);
  for (auto kind : {CatastropheKind::EllipticUmbilic, CatastropheKind::HyperbolicUmbilic,
                    CatastropheKind::ParabolicUmbilic}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = oracle::random_point(NormalForm{kind}, rng);
      const Matrix h = hessian(NormalForm{kind}, p);
      EXPECT_EQ(h(0, 1), h(1, 0));
    }
  }
}

TEST(CriticalPoints, FoldExamples) {
  const auto two = critical_points(fold, vec({-1}), {});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NEAR(two[0].point.x[0], -1.0, 1e-12);
  EXPECT_EQ(two[0].cls.kind, CriticalKind::Maximum);
  EXPECT_NEAR(two[1].point.x[0], 1.0, 1e-12);
  EXPECT_EQ(two[1].cls.kind, CriticalKind::Minimum);
  EXPECT_TRUE(critical_points(fold, vec({1}), {}).empty());
}

TEST(CriticalPoints, CuspSymmetricExample) {
  const auto cps = critical_points(cusp, vec({-1, 0}), {});
  ASSERT_EQ(cps.size(), 3u);
  EXPECT_NEAR(cps[0].point.x[0], -1.0, 1e-12);
  EXPECT_NEAR(cps[1].point.x[0], 0.0, 1e-12);
  EXPECT_NEAR(cps[2].point.x[0], 1.0, 1e-12);
  EXPECT_EQ(cps[0].cls.kind, CriticalKind::Minimum);
  EXPECT_EQ(cps[1].cls.kind, CriticalKind::Maximum);
  EXPECT_EQ(cps[2].cls.kind, CriticalKind::Minimum);
  EXPECT_EQ(cps[1].cls.negative_eigenvalues, 1);
}

TEST(CriticalPoints, DegenerateClassification) {
  const auto cps = critical_points(cusp, vec({-3, 2}), {});
  ASSERT_EQ(cps.size(), 2u); // double root at 1, simple root at -2
  EXPECT_NEAR(cps[0].point.x[0], -2.0, 1e-10);
  EXPECT_NEAR(cps[1].point.x[0], 1.0, 1e-6);
  EXPECT_EQ(classify(hessian(cusp, vec({1}), vec({-3, 2}))).kind, CriticalKind::Degenerate);
}

TEST(CriticalPoints, CuspCountFollowsDiscriminantSign) {
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double a = -2.0 + 4.0 * i / 49, b = -2.0 + 4.0 * j / 49;
      const double d = cusp_discriminant(a, b);
      if (std::abs(d) < 1e-6)
        continue;
      EXPECT_EQ(critical_points(cusp, vec({a, b}), {}).size(), d < 0 ? 3u : 1u)
          << "a=" << a << " b=" << b;
    }
  }
}

TEST(CriticalPoints, ASeriesMatchesBisectionScan) {
  std::mt19937_64 rng(17);
  const SearchBox box{-3.0, 3.0};
  for (auto kind : {CatastropheKind::Fold, CatastropheKind::Cusp, CatastropheKind::Swallowtail,
                    CatastropheKind::Butterfly}) {
    const NormalForm f{kind};
    for (int trial = 0; trial < 40; ++trial) {
      const auto p = oracle::random_point(f, rng);
      const auto scan = oracle::scan_roots(
          [&](double x) { return gradient(f, vec({x}), p.alpha)[0]; }, box.lo, box.hi);
      const auto cps = critical_points(f, p.alpha, box);
      ASSERT_EQ(cps.size(), scan.size()) << to_string(kind);
      for (std::size_t q = 0; q < scan.size(); ++q)
        EXPECT_NEAR(cps[q].point.x[0], scan[q], 1e-8);
    }
  }
}

TEST(CriticalPoints, DSeriesRootsAreCriticalAndDistinct) {
  std::mt19937_64 rng(23);
  for (auto kind : {CatastropheKind::EllipticUmbilic, CatastropheKind::HyperbolicUmbilic,
                    CatastropheKind::ParabolicUmbilic}) {
    const NormalForm f{kind};
    for (int trial = 0; trial < 10; ++trial) {
      const auto p = oracle::random_point(f, rng);
      const auto cps = critical_points(f, p.alpha, {});
      for (std::size_t q = 0; q < cps.size(); ++q) {
        EXPECT_LT(inf_norm(gradient(f, cps[q].point)), 1e-9);
        for (std::size_t r = q + 1; r < cps.size(); ++r)
          EXPECT_GE((cps[q].point.x - cps[r].point.x).norm(), tol_merge);
      }
    }
  }
  // a = 1: the elliptic umbilic has a minimum at the origin and three saddles.
  const auto eu = critical_points(elliptic, vec({1, 0, 0}), {});
  ASSERT_EQ(eu.size(), 4u);
  int minima = 0, saddles = 0;
  for (const auto &cp : eu) {
    minima += cp.cls.kind == CriticalKind::Minimum;
    saddles += cp.cls.kind == CriticalKind::Saddle;
  }
  EXPECT_EQ(minima, 1);
  EXPECT_EQ(saddles, 3);
}

TEST(CuspDiscriminant, Values) {
  static_assert(cusp_discriminant(0, 0) == 0.0);
  EXPECT_EQ(cusp_discriminant(-3, 2), 0.0);
  EXPECT_EQ(cusp_discriminant(-1, 0), -4.0);
}

TEST(Polynomial, SturmCountsAndRoots) {
  // (x - 1)^2 (x + 2) = x^3 - 3x + 2
  const poly::Coefficients p{2, -3, 0, 1};
  const auto roots = poly::real_roots(p, -5, 5);
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_NEAR(roots[0], -2.0, 1e-12);
  EXPECT_NEAR(roots[1], 1.0, 1e-6);
  // x^5 - x = x (x^4 - 1): roots -1, 0, 1
  const auto r5 = poly::real_roots({0, -1, 0, 0, 0, 1}, -5, 5);
  ASSERT_EQ(r5.size(), 3u);
  EXPECT_NEAR(r5[1], 0.0, 1e-14);
  EXPECT_TRUE(poly::real_roots({1, 0, 1}, -5, 5).empty());
}
