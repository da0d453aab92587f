#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace cpdfl;

namespace {

LambdaProblem random_problem(std::mt19937_64& rng, Index N, Index P, double beta, double yscale = 1.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    LambdaProblem lp;
    lp.F.resize(N, P);
    lp.y.resize(N);
    for (Index i = 0; i < N; ++i) {
        for (Index p = 0; p < P; ++p) lp.F(i, p) = n(rng);
        lp.y(i) = yscale * n(rng);
    }
    lp.beta = beta;
    return lp;
}

}  // namespace

TEST(RegKind, ParseAndPrint) {
    EXPECT_EQ(parse_reg_kind("l1"), RegKind::L1);
    EXPECT_EQ(parse_reg_kind("L2"), RegKind::L2);
    EXPECT_EQ(parse_reg_kind("fn"), RegKind::FixedNorm);
    EXPECT_EQ(parse_reg_kind(to_string(RegKind::FixedNorm)), RegKind::FixedNorm);
    EXPECT_THROW(parse_reg_kind("l3"), std::invalid_argument);
}

TEST(SpectralNorm, MatchesEigenvalues) {
    std::mt19937_64 rng(60);
    for (int t = 0; t < 20; ++t) {
        const LambdaProblem lp = random_problem(rng, 12, 5, 0.0);
        const rmat G = lp.F.transpose() * lp.F;
        const double want = Eigen::SelfAdjointEigenSolver<rmat>(G).eigenvalues().maxCoeff();
        const double got = spectral_norm_psd(G);
        EXPECT_LE(got, want * (1 + 1e-12));
        EXPECT_GE(got, 0.95 * want);
    }
    EXPECT_EQ(spectral_norm_psd(rmat::Zero(3, 3)), 0.0);
}

TEST(SolveL1, OrthogonalDesignSoftThreshold) {
    LambdaProblem lp;
    lp.F = rmat::Identity(4, 4);
    lp.y = (rvec(4) << 0.5, -0.1, 2.0, -3.0).finished();
    lp.beta = 0.3;
    lp.inner_steps = 1;
    const double t = 0.99;
    const rvec got = solve_l1(lp, lp.y);
    for (Index i = 0; i < 4; ++i) {
        const double p = lp.y(i);
        const double want = std::abs(p) > lp.beta * t ? std::copysign(std::abs(p) - lp.beta * t, p) : 0.0;
        EXPECT_NEAR(got(i), want, 1e-12);
    }
    EXPECT_EQ(got(1), 0.0);
}

TEST(SolveL1, HandEvaluatedThreshold) {
    // p = 0.5, beta t = 0.2 -> 0.3 ; p = -0.1 -> 0
    LambdaProblem lp;
    lp.F = rmat::Identity(2, 2);
    lp.y = (rvec(2) << 0.5, -0.1).finished();
    lp.beta = 0.2 / 0.99;
    lp.inner_steps = 1;
    const rvec got = solve_l1(lp, lp.y);
    EXPECT_NEAR(got(0), 0.3, 1e-12);
    EXPECT_EQ(got(1), 0.0);
    lp.nonneg = true;
    lp.y(0) = -0.5;
    const rvec nn = solve_l1(lp, lp.y);
    EXPECT_EQ(nn(0), 0.0);
}

TEST(SolveL1, ZeroBetaConvergesToLeastSquares) {
    std::mt19937_64 rng(61);
    LambdaProblem lp = random_problem(rng, 30, 4, 0.0);
    lp.inner_steps = 20000;
    lp.inner_tol = 0.0;
    const rvec got = solve_l1(lp, rvec::Zero(4));
    EXPECT_LE((got - oracle::ridge(lp.F, lp.y, 0.0)).norm(), 1e-6);
}

TEST(SolveL1, ExactZerosAndDescent) {
    std::mt19937_64 rng(62);
    for (int t = 0; t < 100; ++t) {
        LambdaProblem lp = random_problem(rng, 20, 6, 3.0);
        lp.nonneg = t % 3 == 0;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        rvec start(6);
        for (Index p = 0; p < 6; ++p) start(p) = u(rng);
        if (lp.nonneg) start = start.cwiseAbs();
        double prev = lambda_objective(lp, RegKind::L1, start);
        const rvec got = solve_l1(lp, start, [&](int, const rvec& it) {
            const double cur = lambda_objective(lp, RegKind::L1, it);
            EXPECT_LE(cur, prev + 1e-10 * std::max(1.0, std::abs(prev)));
            prev = cur;
        });
        for (Index p = 0; p < 6; ++p) {
            const double v = got(p);
            EXPECT_TRUE(v == 0.0 || std::abs(v) >= std::numeric_limits<double>::min());
            if (v == 0.0) EXPECT_FALSE(std::signbit(v));
            if (lp.nonneg) EXPECT_GE(v, 0.0);
        }
    }
}

TEST(SolveL1, ZeroDesignReturnsOrigin) {
    LambdaProblem lp;
    lp.F = rmat::Zero(5, 3);
    lp.y = rvec::Ones(5);
    lp.beta = 0.1;
    EXPECT_EQ(solve_l1(lp, rvec::Ones(3)), rvec::Zero(3));
}

TEST(SolveL2, ScalarRidgeAndLimit) {
    LambdaProblem lp;
    lp.F = rmat::Identity(3, 3);
    lp.y = (rvec(3) << 2.0, -4.0, 1.0).finished();
    lp.beta = 1.0;
    EXPECT_LE((solve_l2(lp) - lp.y / 2.0).cwiseAbs().maxCoeff(), 1e-14);
    lp.beta = 1e12;
    EXPECT_LE(solve_l2(lp).norm(), 1e-11);
}

TEST(SolveL2, MatchesDenseOracle) {
    std::mt19937_64 rng(63);
    for (int t = 0; t < 50; ++t) {
        LambdaProblem lp = random_problem(rng, 10, 3, 0.05 * t);
        const rvec want = oracle::ridge(lp.F, lp.y, lp.beta);
        EXPECT_LE((solve_l2(lp) - want).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, want.norm()));
        const double base = lambda_objective(lp, RegKind::L2, want);
        EXPECT_LE(base, lambda_objective(lp, RegKind::L2, want + rvec::Constant(3, 1e-4)));
    }
}

TEST(SolveL2, NonnegClampsAndSingularThrows) {
    LambdaProblem lp;
    lp.F = rmat::Identity(2, 2);
    lp.y = (rvec(2) << 1.0, -1.0).finished();
    lp.beta = 1.0;
    lp.nonneg = true;
    EXPECT_EQ(solve_l2(lp), (rvec(2) << 0.5, 0.0).finished());
    lp.F = rmat::Zero(2, 2);
    lp.beta = 0.0;
    EXPECT_THROW(solve_l2(lp), std::runtime_error);
}

TEST(SolveFixedNorm, InteriorAndProjection) {
    LambdaProblem lp;
    lp.F = rmat::Identity(3, 3);
    lp.y = (rvec(3) << 0.3, -0.4, 0.1).finished();
    EXPECT_LE((solve_fixed_norm(lp) - lp.y).cwiseAbs().maxCoeff(), 1e-12);
    lp.y = (rvec(3) << 3.0, -4.0, 12.0).finished();
    EXPECT_LE((solve_fixed_norm(lp) - lp.y / 13.0).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SolveFixedNorm, MatchesMuGridOracle) {
    std::mt19937_64 rng(64);
    for (int t = 0; t < 40; ++t) {
        const LambdaProblem lp = random_problem(rng, 10, 3, 0.0, t % 4 == 0 ? 0.1 : 10.0);
        const rvec got = solve_fixed_norm(lp);
        const rvec want = oracle::fixed_norm_grid(lp.F, lp.y);
        EXPECT_LE(got.norm(), 1.0 + 1e-8);
        const double fg = oracle::ls_value(lp.F, lp.y, got), fw = oracle::ls_value(lp.F, lp.y, want);
        EXPECT_LE(std::abs(fg - fw), 1e-6 * std::max(1.0, fw));
    }
}

TEST(SolveFixedNorm, ZeroDesignAndNonneg) {
    LambdaProblem lp;
    lp.F = rmat::Zero(4, 2);
    lp.y = rvec::Ones(4);
    EXPECT_EQ(solve_fixed_norm(lp), rvec::Zero(2));
    std::mt19937_64 rng(65);
    for (int t = 0; t < 30; ++t) {
        LambdaProblem q = random_problem(rng, 12, 4, 0.0, 5.0);
        q.nonneg = true;
        const rvec got = solve_fixed_norm(q);
        EXPECT_TRUE((got.array() >= 0.0).all());
        EXPECT_LE(got.norm(), 1.0 + 1e-8);
    }
}

TEST(SolveFixedNorm, RankDeficientDesign) {
    std::mt19937_64 rng(66);
    LambdaProblem lp = random_problem(rng, 10, 3, 0.0, 10.0);
    lp.F.col(2) = lp.F.col(0);
    const rvec got = solve_fixed_norm(lp);
    EXPECT_LE(got.norm(), 1.0 + 1e-8);
    // no feasible point does better along the shared direction
    for (int k = 0; k < 200; ++k) {
        rvec cand = oracle::random_unit_X(rng, 3, 1).col(0).array() - 0.5;
        cand /= std::max(1.0, cand.norm());
        EXPECT_LE(oracle::ls_value(lp.F, lp.y, got), oracle::ls_value(lp.F, lp.y, cand) + 1e-9);
    }
}

TEST(SolveLambda, EachSolverDoesNotIncreaseItsObjective) {
    std::mt19937_64 rng(67);
    for (int t = 0; t < 60; ++t) {
        const LambdaProblem lp = random_problem(rng, 15, 4, 0.5);
        rvec start = oracle::random_unit_X(rng, 4, 1).col(0) / 2.0;
        for (RegKind kind : {RegKind::L1, RegKind::L2, RegKind::FixedNorm}) {
            const rvec got = solve_lambda(kind, lp, start);
            EXPECT_LE(lambda_objective(lp, kind, got), lambda_objective(lp, kind, start) + 1e-10);
        }
    }
}

TEST(SolveLambda, RejectsBadProblems) {
    LambdaProblem lp;
    lp.F = rmat::Ones(3, 2);
    lp.y = rvec::Ones(4);
    EXPECT_THROW(solve_l2(lp), std::invalid_argument);
    lp.y = rvec::Ones(3);
    lp.beta = -1.0;
    EXPECT_THROW(solve_l1(lp, rvec::Zero(2)), std::invalid_argument);
    lp.beta = 0.1;
    EXPECT_THROW(solve_l1(lp, rvec::Zero(3)), std::invalid_argument);
}
