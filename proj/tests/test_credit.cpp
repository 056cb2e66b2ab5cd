#include <gtest/gtest.h>

#include "sgbm/credit.hpp"
#include "sgbm/model.hpp"

using namespace sgbm;

TEST(DefaultProbability, ClosedFormCases) {
    EXPECT_NEAR(pd(1.0, 0.03), 1.0 - std::exp(-0.03), 1e-15);
    EXPECT_DOUBLE_EQ(pd(0.0, 0.03), 0.0);
    EXPECT_DOUBLE_EQ(pd(5.0, 0.0), 0.0);
    EXPECT_THROW(pd(-1.0, 0.03), Error);
    // non-decreasing, towards 1
    double prev = 0.0;
    for (double t : {0.5, 1.0, 2.0, 10.0, 100.0, 1000.0}) {
        const double p = pd(t, 0.03);
        EXPECT_GE(p, prev);
        prev = p;
    }
    EXPECT_NEAR(prev, 1.0, 1e-12);
}

TEST(Cva, TelescopingWithUnitExposure) {
    CreditSpec credit;
    credit.hazard_rate = 0.03;
    credit.recovery = 0.0;
    const std::vector<double> dates{0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> ee_star(4, 1.0);
    EXPECT_NEAR(cva(ee_star, credit, dates), 1.0 - std::exp(-0.03), 1e-14);
}

TEST(Cva, LinearityAndMonotonicity) {
    CreditSpec credit;
    credit.hazard_rate = 0.03;
    const std::vector<double> dates{0.0, 0.5, 1.0};
    const std::vector<double> ee{4.0, 2.5};
    const double base = cva(ee, credit, dates);
    std::vector<double> scaled{8.0, 5.0};
    EXPECT_NEAR(cva(scaled, credit, dates), 2.0 * base, 1e-14);
    CreditSpec higher_h = credit;
    higher_h.hazard_rate = 0.05;
    EXPECT_GT(cva(ee, higher_h, dates), base);
    CreditSpec with_recovery = credit;
    with_recovery.recovery = 0.4;
    EXPECT_LT(cva(ee, with_recovery, dates), base);
    EXPECT_THROW(cva(std::vector<double>{1.0}, credit, dates), Error);
}

TEST(McOracle, DegenerateHestonMatchesBlackScholes) {
    ModelSpec m = preset("TestA").model;
    m.gamma = 1e-13;
    m.v0 = m.vbar;  // constant variance: Black-Scholes with sigma = sqrt(vbar)
    ContractSpec c;
    c.kind = ContractKind::European;
    c.omega = -1;
    c.strike = 100.0;
    c.tenor = 1.0;
    const TimeGrid grid = TimeGrid::uniform(1.0, 10, 0.05);
    const McPrice mc = mc_european_oracle(m, c, grid, 200000, 211);
    const double bs = bs_price(100.0, 100.0, 1.0, 0.04, std::sqrt(m.vbar), -1);
    EXPECT_NEAR(mc.price, bs, 3.0 * mc.std_err);
}

TEST(McOracle, TinyStrikeCallIsForward) {
    ModelSpec m = preset("TestA").model;
    ContractSpec c;
    c.kind = ContractKind::European;
    c.omega = 1;
    c.strike = 1e-9;
    c.tenor = 1.0;
    const TimeGrid grid = TimeGrid::uniform(1.0, 10, 0.05);
    const McPrice mc = mc_european_oracle(m, c, grid, 200000, 223);
    EXPECT_NEAR(mc.price, 100.0, 3.0 * mc.std_err);  // deterministic r: S0
}

TEST(McOracle, BarrierCashFlowsVanishOnKnockout) {
    ModelSpec m = preset("TestA").model;
    ContractSpec c;
    c.kind = ContractKind::DownAndOutBarrier;
    c.omega = -1;
    c.strike = 100.0;
    c.tenor = 1.0;
    c.barrier = 80.0;
    const TimeGrid grid = TimeGrid::uniform(1.0, 10, 0.05);
    const McPrice knock = mc_european_oracle(m, c, grid, 50000, 227);
    ContractSpec vanilla = c;
    vanilla.kind = ContractKind::European;
    const McPrice plain = mc_european_oracle(m, vanilla, grid, 50000, 227);
    EXPECT_LT(knock.price, plain.price);
    EXPECT_GT(knock.price, 0.0);
}

TEST(ImpliedVol, RoundTrip) {
    const double price = bs_price(100.0, 110.0, 2.0, 0.03, 0.2, -1);
    EXPECT_NEAR(implied_vol(price, 100.0, 110.0, 2.0, 0.03, -1), 0.2, 1e-8);
    const double cprice = bs_price(100.0, 90.0, 0.5, 0.01, 0.45, 1);
    EXPECT_NEAR(implied_vol(cprice, 100.0, 90.0, 0.5, 0.01, 1), 0.45, 1e-8);
}

TEST(ImpliedVol, RejectsPricesAtArbitrageBounds) {
    // put at its discounted-intrinsic lower bound
    const double lower = std::max(110.0 * std::exp(-0.03 * 2.0) - 100.0, 0.0);
    EXPECT_THROW(implied_vol(lower, 100.0, 110.0, 2.0, 0.03, -1), Error);
    EXPECT_THROW(implied_vol(-0.1, 100.0, 100.0, 1.0, 0.0, 1), Error);
    EXPECT_THROW(implied_vol(100.1, 100.0, 100.0, 1.0, 0.0, 1), Error);
}

TEST(HullWhiteBond, ReducesToFlatDiscountWithoutRateVol) {
    EXPECT_NEAR(hw_zcb(0.01, 0.02, 0.0, 0.02, 10.0), std::exp(-0.2), 1e-12);
    const ModelSpec hhw = preset("TestB_rho02_T5").model;
    EXPECT_GT(model_zcb(hhw, 10.0), std::exp(-0.2));  // convexity raises the bond
    const ModelSpec hes = preset("TestA").model;
    EXPECT_NEAR(model_zcb(hes, 1.0), std::exp(-0.04), 1e-15);
}
