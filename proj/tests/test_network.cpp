#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace catnet;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

NetworkSystem two_cusps(double eps, double lambda) {
  Matrix l(2, 2);
  l << 0, lambda, lambda, 0;
  return NetworkSystem({NormalForm{CatastropheKind::Cusp}, NormalForm{CatastropheKind::Cusp}},
                       {eps, l});
}

NetworkSystem single(CatastropheKind k) { return NetworkSystem({NormalForm{k}}, {}); }

} // namespace

TEST(NetworkSystem, ValidatesCoupling) {
  const std::vector<NormalForm> forms{NormalForm{CatastropheKind::Cusp},
                                      NormalForm{CatastropheKind::Fold}};
  EXPECT_THROW(NetworkSystem({}, {}), PreconditionError);
  EXPECT_THROW(NetworkSystem(forms, {-0.1, Matrix::Zero(2, 2)}), PreconditionError);
  EXPECT_THROW(NetworkSystem(forms, {0.1, (Matrix(2, 2) << 1, 0, 0, 0).finished()}),
               PreconditionError);
  EXPECT_THROW(NetworkSystem(forms, {0.1, (Matrix(2, 2) << 0, 1, 2, 0).finished()}),
               PreconditionError);
  const NetworkSystem sys(forms, {0.1, (Matrix(2, 2) << 0, 1, 1, 0).finished()});
  EXPECT_EQ(sys.n(), 2);
  EXPECT_EQ(sys.p(), 3);
  EXPECT_TRUE(sys.coupling().nontrivial());
  EXPECT_FALSE(NetworkSystem(forms, {0.0, (Matrix(2, 2) << 0, 1, 1, 0).finished()})
                   .coupling()
                   .nontrivial());
  EXPECT_FALSE(NetworkSystem(forms, {0.5, Matrix::Zero(2, 2)}).coupling().nontrivial());
}

TEST(NetworkPotential, HandValues) {
  EXPECT_EQ(network_potential(two_cusps(0, 0), vec({0, 0}), vec({0, 0, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(network_potential(two_cusps(1, 2), vec({1, 1}), vec({0, 0, 0, 0})), 2.5);
  EXPECT_THROW(network_potential(two_cusps(1, 2), vec({1}), vec({0, 0, 0, 0})), PreconditionError);
}

TEST(NetworkPotential, DecouplesAtZeroEpsilon) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    NetworkSystem coupled = oracle::random_system(3, rng);
    const NetworkSystem sys(coupled.sectors(), {0.0, coupled.coupling().lambda});
    const Vector x = oracle::random_vector(sys.n(), rng);
    const Vector a = oracle::random_vector(sys.p(), rng);
    double sum = 0.0;
    Vector grad(sys.n());
    for (int i = 0; i < sys.k(); ++i) {
      sum += potential(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(a, i));
      grad.segment(sys.behavior_offset(i), sys.behavior_dim(i)) =
          gradient(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(a, i));
    }
    EXPECT_DOUBLE_EQ(network_potential(sys, x, a), sum);
    EXPECT_EQ(network_gradient(sys, x, a), grad);
    const Matrix h = network_hessian(sys, x, a);
    for (int i = 0; i < sys.k(); ++i)
      for (int j = 0; j < sys.k(); ++j) {
        const auto blk = h.block(sys.behavior_offset(i), sys.behavior_offset(j),
                                 sys.behavior_dim(i), sys.behavior_dim(j));
        if (i == j)
          EXPECT_EQ(Matrix(blk), hessian(sys.sector(i), sys.sector_x(x, i), sys.sector_alpha(a, i)));
        else
          EXPECT_TRUE(blk.isZero(0.0));
      }
  }
}

TEST(NetworkGradient, CoupledCuspStationaryEquations) {
  const auto sys = two_cusps(0.5, 1.0);
  EXPECT_EQ(network_gradient(sys, vec({0, 0}), vec({0.7, 0, -1.3, 0})), vec({0, 0}));
  EXPECT_EQ(network_gradient(sys, vec({0, 1}), vec({0, 0, 0.4, 0.2}))[0], 0.5);
}

TEST(NetworkHessian, CoupledCuspDisplay) {
  const Matrix h = network_hessian(two_cusps(0.5, 1.0), vec({0, 0}), vec({1, 0.3, 1, -0.2}));
  EXPECT_EQ(h, (Matrix(2, 2) << 1, 0.5, 0.5, 1).finished());
  EXPECT_DOUBLE_EQ(h.determinant(), 0.75);
  const Matrix h2 = network_hessian(two_cusps(0.1, 1.0), vec({1, 1}), vec({-3, 0, -3, 0}));
  EXPECT_EQ(h2, (Matrix(2, 2) << 0, 0.1, 0.1, 0).finished());
}

TEST(NetworkDerivatives, MatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int k = 1; k <= 4; ++k) {
    for (int trial = 0; trial < 100; ++trial) {
      const NetworkSystem sys = oracle::random_system(k, rng);
      const Vector x = oracle::random_vector(sys.n(), rng);
      const Vector a = oracle::random_vector(sys.p(), rng);
      const Vector g_fd = oracle::fd_gradient(
          [&](const Vector &y) { return network_potential(sys, y, a); }, x);
      EXPECT_LT(oracle::rel_error(network_gradient(sys, x, a), g_fd), 1e-5);
      const Matrix h = network_hessian(sys, x, a);
      const Matrix h_fd = oracle::fd_jacobian(
          [&](const Vector &y) { return network_gradient(sys, y, a); }, x);
      EXPECT_LT(oracle::rel_error(h, h_fd), 1e-5);
      EXPECT_EQ(h, Matrix(h.transpose()));
      const Matrix b_fd = oracle::fd_jacobian(
          [&](const Vector &c) { return network_gradient(sys, x, c); }, a);
      EXPECT_LT(oracle::rel_error(network_mixed(sys, x, a), b_fd), 1e-5);
      // Third derivatives used by the discriminant normal.
      const auto tx = network_hessian_x_derivatives(sys, x, a);
      for (int c = 0; c < sys.n(); ++c) {
        Vector xp = x, xm = x;
        xp[c] += 1e-6;
        xm[c] -= 1e-6;
        const Matrix fd = (network_hessian(sys, xp, a) - network_hessian(sys, xm, a)) / 2e-6;
        EXPECT_LT(oracle::rel_error(tx[c], fd), 1e-5);
      }
      const auto ta = network_hessian_alpha_derivatives(sys, x, a);
      for (int c = 0; c < sys.p(); ++c) {
        Vector ap = a, am = a;
        ap[c] += 1e-6;
        am[c] -= 1e-6;
        const Matrix fd = (network_hessian(sys, x, ap) - network_hessian(sys, x, am)) / 2e-6;
        EXPECT_LT(oracle::rel_error(ta[c], fd), 1e-5);
      }
    }
  }
}

TEST(NetworkHessian, CoupledCuspDeterminantIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2, 2), e(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const double eps = e(rng), lam = u(rng);
    const auto sys = two_cusps(eps, lam);
    const Vector x = oracle::random_vector(2, rng), a = oracle::random_vector(4, rng);
    const double expected =
        (3 * x[0] * x[0] + a[0]) * (3 * x[1] * x[1] + a[2]) - eps * eps * lam * lam;
    EXPECT_NEAR(network_hessian(sys, x, a).determinant(), expected, 1e-12);
  }
}

TEST(FindEquilibria, DecoupledCartesianProduct) {
  const auto nine = find_equilibria(two_cusps(0, 1), vec({-1, 0, -1, 0}), {});
  ASSERT_EQ(nine.size(), 9u);
  for (const auto &eq : nine) {
    EXPECT_LT(inf_norm(network_gradient(two_cusps(0, 1), eq.x, eq.alpha)), tol_equilibrium);
    for (double v : eq.x)
      EXPECT_NEAR(std::abs(v), std::round(std::abs(v)), 1e-12);
  }
  const auto one = find_equilibria(two_cusps(0, 1), vec({1, 0, 1, 0}), {});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_LT(one[0].x.norm(), 1e-12);

  const NetworkSystem folds({NormalForm{CatastropheKind::Fold}, NormalForm{CatastropheKind::Fold}},
                            {0.01, (Matrix(2, 2) << 0, 1, 1, 0).finished()});
  EXPECT_TRUE(find_equilibria(folds, vec({1, 1}), {}).empty());
}

TEST(FindEquilibria, DecouplingLimitIsProductOfSectorSets) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkSystem drawn = oracle::random_system(2, rng);
    const NetworkSystem sys(drawn.sectors(), {0.0, drawn.coupling().lambda});
    const Vector a = oracle::random_vector(sys.p(), rng);
    const auto c0 = critical_points(sys.sector(0), sys.sector_alpha(a, 0), {});
    const auto c1 = critical_points(sys.sector(1), sys.sector_alpha(a, 1), {});
    const auto eqs = find_equilibria(sys, a, {});
    // Every product point is found; D-series sector sets are best-effort, so
    // the network search may find extra sector roots but never miss these.
    for (const auto &p : c0)
      for (const auto &q : c1) {
        Vector x(sys.n());
        x << p.point.x, q.point.x;
        const bool found = std::any_of(eqs.begin(), eqs.end(), [&](const NetworkEquilibrium &e) {
          return (e.x - x).norm() < tol_merge;
        });
        EXPECT_TRUE(found);
      }
    if (sys.sector(0).is_a_series() && sys.sector(1).is_a_series()) {
      EXPECT_EQ(eqs.size(), c0.size() * c1.size());
    }
    for (const auto &e : eqs)
      EXPECT_LT(inf_norm(network_gradient(sys, e.x, e.alpha)), tol_equilibrium);
  }
}

TEST(ContinueEquilibrium, FoldSectorExamples) {
  const auto sys = single(CatastropheKind::Fold);
  const auto eq = make_equilibrium(sys, vec({1}), vec({-1}));
  const auto r = continue_equilibrium(sys, eq, vec({-0.99}));
  ASSERT_TRUE(std::holds_alternative<NetworkEquilibrium>(r));
  EXPECT_NEAR(std::get<NetworkEquilibrium>(r).x[0], std::sqrt(0.99), 1e-12);

  const auto near = make_equilibrium(sys, vec({0.1}), vec({-0.01}));
  const auto lost = continue_equilibrium(sys, near, vec({0.01}));
  ASSERT_TRUE(std::holds_alternative<FoldSignal>(lost));
  const auto &fs = std::get<FoldSignal>(lost);
  EXPECT_LT(fs.reached_fraction, 0.5 + 1e-6);
  EXPECT_LT(std::abs(fs.last_good.alpha[0]), 1e-4);
}

TEST(ContinueEquilibrium, DecoupledSectorsContinueIndependently) {
  const auto sys = two_cusps(0, 1);
  const auto eq = make_equilibrium(sys, vec({1, -1}), vec({-1, 0, -1, 0}));
  const auto r = continue_equilibrium(sys, eq, vec({-1, 0.05, -1.1, 0.02}));
  ASSERT_TRUE(std::holds_alternative<NetworkEquilibrium>(r));
  const Vector x = std::get<NetworkEquilibrium>(r).x;
  const auto s0 = continue_equilibrium(single(CatastropheKind::Cusp),
                                       make_equilibrium(single(CatastropheKind::Cusp), vec({1}), vec({-1, 0})),
                                       vec({-1, 0.05}));
  const auto s1 = continue_equilibrium(single(CatastropheKind::Cusp),
                                       make_equilibrium(single(CatastropheKind::Cusp), vec({-1}), vec({-1, 0})),
                                       vec({-1.1, 0.02}));
  EXPECT_NEAR(x[0], std::get<NetworkEquilibrium>(s0).x[0], 1e-12);
  EXPECT_NEAR(x[1], std::get<NetworkEquilibrium>(s1).x[0], 1e-12);
}

TEST(ContinueEquilibrium, DoesNotJumpAcrossAFold) {
  // One large step across the cusp fold: Newton from x ~ 0.6 at b = 0.38
  // would converge to the far negative root at b = 0.5; continuation must
  // report the fold instead.
  const auto sys = single(CatastropheKind::Cusp);
  const auto start = find_equilibria(sys, vec({-1, 0.38}), {});
  const auto it = std::find_if(start.begin(), start.end(),
                               [](const NetworkEquilibrium &e) { return e.x[0] > 0.5; });
  ASSERT_NE(it, start.end());
  EXPECT_TRUE(std::holds_alternative<FoldSignal>(continue_equilibrium(sys, *it, vec({-1, 0.5}))));
}

TEST(Relax, ReachesMinimumAndDetectsEscape) {
  const auto sys = single(CatastropheKind::Cusp);
  const auto r = relax(sys, vec({0.2}), vec({-1, 0}));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-9);
  const auto fold = single(CatastropheKind::Fold);
  RelaxOptions opts;
  opts.escape_radius = 50;
  EXPECT_THROW(relax(fold, vec({0}), vec({1}), opts), EscapeError);
}
