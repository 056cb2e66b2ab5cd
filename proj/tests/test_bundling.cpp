#include <gtest/gtest.h>

#include <numeric>

#include "sgbm/bundling.hpp"
#include "sgbm/model.hpp"
#include "sgbm/path_engine.hpp"

using namespace sgbm;

namespace {

double correlation(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::vector<std::vector<double>> heston_cloud(double rho, int n, int date,
                                              std::uint64_t seed) {
    ModelSpec m = preset("TestA").model;
    m.rho_xv = rho;
    const PathGrid g = simulate(m, preset("TestA").grid, n, seed);
    return {g.x[date], g.v[date]};
}

}  // namespace

TEST(Rotate2d, ZeroCovarianceIsIdentity) {
    const std::vector<double> d1{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> d2{5.0, 5.0, 5.0, 5.0};  // constant: cov = 0
    const Rotation r = fit_rotation2(d1, d2);
    EXPECT_FALSE(r.skipped);
    EXPECT_DOUBLE_EQ(r.slope1, 0.0);
    EXPECT_DOUBLE_EQ(r.cos_a1, 1.0);  // sign(0) := +1
    EXPECT_DOUBLE_EQ(r.sin_a1, 0.0);
    double q1 = 2.5, q2 = -1.5, q3 = 0.0;
    apply_rotation(r, q1, q2, q3);
    EXPECT_DOUBLE_EQ(q1, 2.5);
    EXPECT_DOUBLE_EQ(q2, -1.5);
}

TEST(Rotate2d, PerfectCorrelationGives45Degrees) {
    std::vector<double> d1(100), d2(100);
    for (int i = 0; i < 100; ++i) d1[i] = d2[i] = 0.01 * i;
    const Rotation r = fit_rotation2(d1, d2);
    EXPECT_NEAR(r.slope1, 1.0, 1e-12);
    EXPECT_NEAR(r.cos_a1, std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(r.sin_a1, std::sqrt(0.5), 1e-12);
    const auto q = rotate_columns(r, {d1, d2});
    EXPECT_NEAR(std::abs(correlation(q[0], q[1])), 0.0, 1e-10);
}

TEST(Rotate2d, DecorrelatesTestACloud) {
    const auto cloud = heston_cloud(-0.64, 100000, 5, 31);
    EXPECT_LT(correlation(cloud[0], cloud[1]), -0.5);  // strongly correlated
    const Rotation r = fit_rotation2(cloud[0], cloud[1]);
    const auto q = rotate_columns(r, cloud);
    EXPECT_LT(std::abs(correlation(q[0], q[1])), 0.05);
}

TEST(Rotate2d, ZeroVarianceSkips) {
    const std::vector<double> d1{1.0, 1.0, 1.0};
    const std::vector<double> d2{0.0, 1.0, 2.0};
    const Rotation r = fit_rotation2(d1, d2);
    EXPECT_TRUE(r.skipped);
}

// Decorrelation property: rotation reduces |corr| for simulated Heston clouds.
TEST(Rotate2d, ReducesCorrelationProperty) {
    for (double rho : {-0.9, -0.5, -0.2, 0.3, 0.7, 0.9}) {
        const auto cloud = heston_cloud(rho, 20000, 10, 37);
        const double before = std::abs(correlation(cloud[0], cloud[1]));
        const Rotation r = fit_rotation2(cloud[0], cloud[1]);
        const auto q = rotate_columns(r, cloud);
        const double after = std::abs(correlation(q[0], q[1]));
        EXPECT_LT(after, before) << "rho=" << rho;
    }
}

TEST(Rotate3d, ZeroCovariancesPermuteWithSigns) {
    std::vector<double> d1{1.0, -1.0, 2.0, -2.0};
    std::vector<double> d2{3.0, 3.0, 3.0, 3.0};
    std::vector<double> d3{4.0, 4.0, 4.0, 4.0};
    const Rotation r = fit_rotation3(d1, d2, d3);
    double q1 = 1.0, q2 = 2.0, q3 = 3.0;
    apply_rotation(r, q1, q2, q3);
    EXPECT_DOUBLE_EQ(q1, -3.0);  // -d3
    EXPECT_DOUBLE_EQ(q2, 2.0);   // d2
    EXPECT_DOUBLE_EQ(q3, 1.0);   // d1
}

TEST(Rotate3d, DiagonalPlusZeroThird) {
    std::vector<double> d1(50), d2(50), d3(50, 0.0);
    for (int i = 0; i < 50; ++i) d1[i] = d2[i] = 0.1 * i;
    const Rotation r = fit_rotation3(d1, d2, d3);
    EXPECT_NEAR(r.slope1, 1.0, 1e-12);
    EXPECT_NEAR(r.slope2, 0.0, 1e-12);
    EXPECT_NEAR(r.cos_a1, std::sqrt(0.5), 1e-12);
}

// The displayed two-angle matrix cannot zero all three covariances: the
// (q2,q3) pair keeps a residual of roughly corr(x,v) cos(a1) cos(a2). The
// standardized fit decorrelates the two pairs the construction targets and
// must not amplify the third.
TEST(Rotate3d, DecorrelatesTestBCloud) {
    const Preset p = preset("TestB_rho02_T5");
    const PathGrid g = simulate(p.model, p.grid, 50000, 41);
    const std::vector<std::vector<double>> cols{g.x[2], g.v[2], g.r[2]};
    double pre = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            pre = std::max(pre, std::abs(correlation(cols[i], cols[j])));
    const Rotation r = fit_rotation3_standardized(cols[0], cols[1], cols[2]);
    const auto q = rotate_columns(r, cols);
    EXPECT_LT(std::abs(correlation(q[0], q[1])), 0.1);
    EXPECT_LT(std::abs(correlation(q[0], q[2])), 0.1);
    EXPECT_LT(std::abs(correlation(q[1], q[2])), pre + 0.1);
}

TEST(Bifurcation, OneIterationFourBundles) {
    std::vector<double> d1{-1.0, -0.5, 0.5, 1.0};
    std::vector<double> d2{1.0, -1.0, 1.0, -1.0};
    const BundleResult res = recursive_bifurcation({d1, d2}, 1);
    EXPECT_EQ(res.n_bundles, 4);
    EXPECT_EQ(res.n_empty, 0);
    std::vector<int> seen = res.bundle;
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Bifurcation, ThreeIterationsGive64Bundles) {
    const auto cloud = heston_cloud(-0.64, 5000, 5, 43);
    const BundleResult res = recursive_bifurcation(cloud, 3);
    EXPECT_EQ(res.n_bundles, 64);
    for (int b : res.bundle) {
        EXPECT_GE(b, 0);
        EXPECT_LT(b, 64);
    }
}

TEST(Bifurcation, DegenerateCloudCollapsesToOneBundle) {
    std::vector<double> d1(10, 1.0), d2(10, 2.0);
    const BundleResult res = recursive_bifurcation({d1, d2}, 2);
    EXPECT_EQ(res.n_bundles, 16);
    for (int b : res.bundle) EXPECT_EQ(b, res.bundle[0]);
    EXPECT_EQ(res.n_empty, 15);
}

TEST(EqualNumber, ExactDivision) {
    std::vector<double> d1(16), d2(16);
    for (int i = 0; i < 16; ++i) {
        d1[i] = i;
        d2[i] = 15 - i;
    }
    const BundleResult res = equal_number({d1, d2}, {2, 2, 1});
    EXPECT_EQ(res.n_bundles, 4);
    std::array<int, 4> count{};
    for (int b : res.bundle) ++count[b];
    for (int c : count) EXPECT_EQ(c, 4);
}

TEST(EqualNumber, BalancedRemainder) {
    std::vector<double> d(10);
    for (int i = 0; i < 10; ++i) d[i] = i * 1.0;
    const BundleResult res = equal_number({d}, {3, 1, 1});
    std::array<int, 3> count{};
    for (int b : res.bundle) ++count[b];
    EXPECT_EQ(count[0], 4);
    EXPECT_EQ(count[1], 3);
    EXPECT_EQ(count[2], 3);
}

TEST(EqualNumber, BalanceInvariant) {
    const auto cloud = heston_cloud(-0.64, 3001, 5, 47);
    const BundleResult res = equal_number(cloud, {8, 8, 1});
    std::vector<int> count(res.n_bundles, 0);
    for (int b : res.bundle) ++count[b];
    const auto [mn, mx] = std::minmax_element(count.begin(), count.end());
    EXPECT_LE(*mx - *mn, 2);  // one per split level
}

TEST(EqualNumber, RejectsTooManyBundles) {
    std::vector<double> d(10, 1.0);
    EXPECT_THROW(equal_number({d}, {11, 1, 1}), Error);
}

TEST(Classify, ReplaysPassOneAssignment) {
    const auto cloud = heston_cloud(-0.64, 20000, 5, 53);
    {
        const Rotation rot = fit_rotation2(cloud[0], cloud[1]);
        const auto rotated = rotate_columns(rot, cloud);
        BundleResult res = recursive_bifurcation(rotated, 3);
        res.rule.rotation = rot;
        const auto replay = classify(res.rule, cloud);
        EXPECT_EQ(replay, res.bundle);
    }
    {
        const BundleResult res = equal_number(cloud, {8, 8, 1});
        const auto replay = classify(res.rule, cloud);
        EXPECT_EQ(replay, res.bundle);
    }
    {
        const Preset p = preset("TestB_rho02_T5");
        const PathGrid g = simulate(p.model, p.grid, 5000, 55);
        const std::vector<std::vector<double>> cols{g.x[3], g.v[3], g.r[3]};
        const Rotation rot = fit_rotation3_standardized(cols[0], cols[1], cols[2]);
        BundleResult res = recursive_bifurcation(rotate_columns(rot, cols), 2);
        res.rule.rotation = rot;
        const auto replay = classify(res.rule, cols);
        EXPECT_EQ(replay, res.bundle);
    }
}

TEST(Classify, OutOfRangeClampsToEdgeBundles) {
    std::vector<double> d(100);
    for (int i = 0; i < 100; ++i) d[i] = i;
    const BundleResult res = equal_number({d}, {4, 1, 1});
    const auto lo = classify(res.rule, {{-1000.0}});
    const auto hi = classify(res.rule, {{+1000.0}});
    EXPECT_EQ(lo[0], 0);
    EXPECT_EQ(hi[0], 3);
}

// Pass-2 sample twice the size: every bundle stays populated (Test A, J=64).
TEST(Classify, SecondPassKeepsBundlesPopulated) {
    const Preset p = preset("TestA");
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const PathGrid g1 = simulate(p.model, p.grid, 500000, seed);
        const std::vector<std::vector<double>> c1{g1.x[5], g1.v[5]};
        const Rotation rot = fit_rotation2(c1[0], c1[1]);
        BundleResult res = recursive_bifurcation(rotate_columns(rot, c1), 3);
        res.rule.rotation = rot;
        const PathGrid g2 = simulate(p.model, p.grid, 1000000, seed + 1000);
        const auto assign = classify(res.rule, {g2.x[5], g2.v[5]});
        std::vector<int> count(64, 0);
        for (int b : assign) ++count[b];
        for (int c : count) EXPECT_GT(c, 0) << "seed " << seed;
    }
}

TEST(ActiveFilter, MaskBehaviour) {
    std::vector<std::uint8_t> alive{1, 0, 1, 1, 0};
    const auto idx = active_indices(alive);
    EXPECT_EQ(idx, (std::vector<std::uint32_t>{0, 2, 3}));
    EXPECT_TRUE(active_indices(std::vector<std::uint8_t>(4, 0)).empty());
}

// Partition property across methods and dates.
TEST(Bundling, PartitionProperty) {
    const auto cloud = heston_cloud(-0.64, 10000, 3, 59);
    for (int variant = 0; variant < 2; ++variant) {
        BundleResult res = variant == 0 ? recursive_bifurcation(cloud, 2)
                                        : equal_number(cloud, {4, 4, 1});
        EXPECT_EQ(res.bundle.size(), cloud[0].size());
        for (int b : res.bundle) {
            EXPECT_GE(b, 0);
            EXPECT_LT(b, res.n_bundles);
        }
    }
}
