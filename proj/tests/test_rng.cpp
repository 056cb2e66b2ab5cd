#include <gtest/gtest.h>

#include "sgbm/rng.hpp"

using namespace sgbm;

// Known-answer vectors from the Random123 distribution (philox4x32, 10 rounds).
TEST(Philox, KnownAnswerVectors) {
    const auto r1 = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(r1[0], 0x6627e8d5u);
    EXPECT_EQ(r1[1], 0xe169c58du);
    EXPECT_EQ(r1[2], 0xbc57ac4cu);
    EXPECT_EQ(r1[3], 0x9b00dbd8u);

    const auto r2 = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(r2[0], 0x408f276du);
    EXPECT_EQ(r2[1], 0x41c83b0eu);
    EXPECT_EQ(r2[2], 0xa20bc7c6u);
    EXPECT_EQ(r2[3], 0x6d5451fdu);

    const auto r3 = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(r3[0], 0xd16cfe09u);
    EXPECT_EQ(r3[1], 0x94fdccebu);
    EXPECT_EQ(r3[2], 0x5001e420u);
    EXPECT_EQ(r3[3], 0x24126ea1u);
}

TEST(RngStream, DeterministicAndKeyed) {
    const RngStream a(42), b(42), c(43);
    EXPECT_EQ(a.bits64(7, 3, 1, 0), b.bits64(7, 3, 1, 0));
    EXPECT_NE(a.bits64(7, 3, 1, 0), c.bits64(7, 3, 1, 0));
    EXPECT_NE(a.bits64(7, 3, 1, 0), a.bits64(8, 3, 1, 0));
    EXPECT_NE(a.bits64(7, 3, 1, 0), a.bits64(7, 4, 1, 0));
    EXPECT_NE(a.bits64(7, 3, 1, 0), a.bits64(7, 3, 2, 0));
    EXPECT_NE(a.bits64(7, 3, 1, 0), a.bits64(7, 3, 1, 1));
}

TEST(RngStream, UniformInOpenInterval) {
    const RngStream rng(123);
    double mn = 1.0, mx = 0.0, sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform(i, 0, 0, 0);
        mn = std::min(mn, u);
        mx = std::max(mx, u);
        sum += u;
    }
    EXPECT_GT(mn, 0.0);
    EXPECT_LT(mx, 1.0);
    EXPECT_NEAR(sum / n, 0.5, 5.0 / std::sqrt(12.0 * n));
}

// norm_inv is checked against the erfc-based CDF: round-trip to ~1e-13.
TEST(NormInv, RoundTripAgainstCdf) {
    for (double p : {1e-12, 1e-8, 1e-4, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-6, 1 - 1e-10}) {
        const double x = norm_inv(p);
        EXPECT_NEAR(norm_cdf(x), p, 1e-13 + 1e-12 * p) << "p=" << p;
    }
    EXPECT_NEAR(norm_inv(0.975), 1.959963984540054, 1e-12);
    EXPECT_THROW(norm_inv(0.0), Error);
    EXPECT_THROW(norm_inv(1.0), Error);
}

TEST(NormInv, MomentsOfNormalDraws) {
    const RngStream rng(7);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(i, 1, 0, 1);
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}
