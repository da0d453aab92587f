#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace cpdfl;

TEST(FourierFactor, ZeroInputIsAllOnes) {
    const cvec f = fourier_factor(0.0, FourierSpec{4, 3.0, false});
    for (Index k = 0; k < 4; ++k) EXPECT_EQ(f(k), cplx(1.0, 0.0));
}

TEST(FourierFactor, MatchesScalarOracle) {
    const cvec f = fourier_factor(0.25, FourierSpec{4, 2.0, false});
    for (Index k = 0; k < 4; ++k) {
        const cplx want = std::exp(cplx(0, 2 * oracle::kPi * 0.25 * 3.0 / 2.0)) *
                          std::exp(cplx(0, -oracle::kPi * static_cast<double>(k) / 4.0));
        EXPECT_NEAR(std::abs(f(k) - want), 0.0, 1e-14);
    }
}

TEST(FourierFactor, AtThetaStillUnitModulus) {
    const double theta = 7.5;
    const cvec f = fourier_factor(theta > 1 ? 1.0 : theta, FourierSpec{6, theta, false});
    for (Index k = 0; k < 6; ++k) EXPECT_NEAR(std::abs(f(k)), 1.0, 1e-12);
    const cvec g = fourier_factor(0.0, FourierSpec{6, theta, false});
    const cvec h = fourier_factor(theta, FourierSpec{6, theta, false});
    for (Index k = 0; k < 6; ++k) {
        const cplx want = std::exp(cplx(0, 2 * oracle::kPi * (2.0 + 6.0) / 2.0));
        EXPECT_NEAR(std::abs(h(k) - want), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(g(k)), 1.0, 1e-12);
    }
}

TEST(FourierFactor, UnitModulusAndPeriodicity) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0), th(0.5, 100.0);
    for (int t = 0; t < 200; ++t) {
        const double x = u(rng);
        const FourierSpec s{Index{2} << (t % 5), th(rng), false};
        const cvec f = fourier_factor(x, s);
        const cvec g = fourier_factor(x + s.theta, s);
        for (Index k = 0; k < s.num_freq; ++k) {
            EXPECT_NEAR(std::abs(f(k)), 1.0, 1e-12);
            EXPECT_NEAR(std::abs(f(k) - g(k)), 0.0, 1e-10);
            EXPECT_NEAR(std::abs(f(k) - oracle::fourier_entry(x, k, s.num_freq, s.theta)), 0.0, 1e-12);
        }
    }
}

TEST(FourierFactor, RejectsNonFinite) {
    EXPECT_THROW(fourier_factor(std::nan(""), FourierSpec{2, 1.0, false}), std::invalid_argument);
    EXPECT_THROW(fourier_factor(0.5, FourierSpec{2, 0.0, false}), std::invalid_argument);
}

TEST(Quantize, ZeroInputFactorsAreOnes) {
    const auto q = quantize_factor(0.0, FourierSpec{8, 3.0, true});
    ASSERT_EQ(q.size(), 3u);
    for (const auto& g : q) {
        EXPECT_EQ(g(0), cplx(1.0, 0.0));
        EXPECT_EQ(g(1), cplx(1.0, 0.0));
    }
}

TEST(Quantize, TwoFrequenciesIsOneFactor) {
    const FourierSpec s{2, 4.0, true};
    const auto q = quantize_factor(0.3, s);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_LE((q[0] - fourier_factor(0.3, s)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Quantize, BitFactorShape) {
    const FourierSpec s{16, 9.0, true};
    const double x = 0.7;
    for (int b = 1; b < 4; ++b) {
        const cvec g = quantized_bit_factor(x, b, s);
        EXPECT_EQ(g(0), cplx(1.0, 0.0));
        EXPECT_NEAR(std::abs(g(1) - std::exp(cplx(0, -2 * oracle::kPi * x * std::ldexp(1.0, b) / 9.0))), 0.0,
                    1e-14);
    }
}

TEST(Quantize, ReconstructsUnquantizedFactor) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0), th(0.5, 2000.0);
    const Index sizes[] = {2, 4, 8, 16, 64};
    for (int t = 0; t < 100; ++t) {
        const FourierSpec s{sizes[t % 5], th(rng), true};
        const double x = u(rng);
        const auto q = quantize_factor(x, s);
        cvec full = q.back();
        for (int b = static_cast<int>(q.size()) - 2; b >= 0; --b) full = kron(full, q[static_cast<std::size_t>(b)]);
        EXPECT_LE((full - fourier_factor(x, s)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Quantize, RejectsNonPowerOfTwo) {
    EXPECT_THROW(quantize_factor(0.5, FourierSpec{6, 1.0, true}), std::invalid_argument);
    EXPECT_THROW(FourierSpec({12, 1.0, true}).validate(), std::invalid_argument);
    EXPECT_NO_THROW(FourierSpec({12, 1.0, false}).validate());
}

TEST(FeatureMatrix, RowsMatchPerSampleFactor) {
    std::mt19937_64 rng(13);
    const FourierSpec s{4, 5.0, false};
    EXPECT_EQ(feature_matrix(rvec::Zero(3), 5.0, s), cmat::Ones(3, 4));
    const rvec col = oracle::random_unit_X(rng, 3, 1).col(0);
    const cmat M = feature_matrix(col, 5.0, s);
    for (Index n = 0; n < 3; ++n) {
        EXPECT_LE((M.row(n).transpose() - fourier_factor(col(n), s)).cwiseAbs().maxCoeff(), 0.0);
    }
    rvec one(1);
    one << 0.4;
    EXPECT_LE((feature_matrix(one, 5.0, s).row(0).transpose() - fourier_factor(0.4, s)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FeatureMatrix, RejectsOutOfRange) {
    rvec col(2);
    col << 0.5, 1.5;
    EXPECT_THROW(feature_matrix(col, 1.0, FourierSpec{2, 1.0, false}), std::invalid_argument);
}

TEST(FeatureFamily, SlotsAreDimensionMajorBitMinor) {
    FeatureFamily fam{{2.0}, {4, 8}, true};
    const auto slots = fam.slots();
    ASSERT_EQ(slots.size(), 5u);
    EXPECT_EQ(slots[0], (CoreSlot{0, 0, 2}));
    EXPECT_EQ(slots[1], (CoreSlot{0, 1, 2}));
    EXPECT_EQ(slots[2], (CoreSlot{1, 0, 2}));
    EXPECT_EQ(slots[4], (CoreSlot{1, 2, 2}));
    fam.quantized = false;
    EXPECT_EQ(fam.slots()[1], (CoreSlot{1, -1, 8}));
}

TEST(FeatureFamily, ValidatesThetas) {
    EXPECT_THROW((FeatureFamily{{}, {2}, true}).validate(), std::invalid_argument);
    EXPECT_THROW((FeatureFamily{{2.0, 2.0}, {2}, true}).validate(), std::invalid_argument);
    EXPECT_THROW((FeatureFamily{{-1.0}, {2}, true}).validate(), std::invalid_argument);
    EXPECT_THROW((FeatureFamily{{1.0}, {1}, false}).validate(), std::invalid_argument);
    EXPECT_NO_THROW((FeatureFamily{{1.0, 3.0}, {2, 4}, true}).validate());
}

TEST(FeatureFamily, SlotMatrixConjugates) {
    std::mt19937_64 rng(14);
    const FeatureFamily fam{{3.0}, {4, 4}, true};
    const rmat X = oracle::random_unit_X(rng, 5, 2);
    for (const auto& slot : fam.slots()) {
        const cmat plain = slot_feature_matrix(X, 3.0, slot, fam, false);
        const cmat conj = slot_feature_matrix(X, 3.0, slot, fam, true);
        EXPECT_LE((plain.conjugate() - conj).cwiseAbs().maxCoeff(), 1e-15);
        for (Index n = 0; n < 5; ++n) {
            EXPECT_LE((plain.row(n).transpose() - slot_factor(X(n, slot.dim), 3.0, slot, fam)).cwiseAbs().maxCoeff(),
                      1e-14);
        }
    }
}
