#include <gtest/gtest.h>

#include "sgbm/config.hpp"
#include "sgbm/model.hpp"
#include "sgbm/rng.hpp"

using namespace sgbm;

TEST(Payoff, PutCallCases) {
    ContractSpec put;
    put.omega = -1;
    put.strike = 100.0;
    ContractSpec call = put;
    call.omega = 1;
    EXPECT_DOUBLE_EQ(payoff(put, 90.0), 10.0);
    EXPECT_DOUBLE_EQ(payoff(call, 90.0), 0.0);
    EXPECT_DOUBLE_EQ(payoff(put, 100.0), 0.0);
    EXPECT_THROW(payoff(put, -1.0), Error);
}

// payoff(put) + payoff(call) == |S - K| for any S, K
TEST(Payoff, PutCallIdentityProperty) {
    const RngStream rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double s = 1e-3 + 300.0 * rng.uniform(i, 0, 0, 0);
        const double k = 1e-3 + 300.0 * rng.uniform(i, 0, 0, 1);
        ContractSpec put;
        put.omega = -1;
        put.strike = k;
        ContractSpec call = put;
        call.omega = 1;
        EXPECT_NEAR(payoff(put, s) + payoff(call, s), std::abs(s - k), 1e-12);
    }
}

TEST(Preset, TestAMatchesSetup) {
    const Preset p = preset("TestA");
    EXPECT_EQ(p.model.family, ModelFamily::Heston);
    EXPECT_DOUBLE_EQ(p.model.s0, 100.0);
    EXPECT_DOUBLE_EQ(p.model.r0, 0.04);
    EXPECT_DOUBLE_EQ(p.model.kappa, 1.15);
    EXPECT_DOUBLE_EQ(p.model.gamma, 0.39);
    EXPECT_DOUBLE_EQ(p.model.vbar, 0.0348);
    EXPECT_DOUBLE_EQ(p.model.rho_xv, -0.64);
    EXPECT_FALSE(p.model.feller_satisfied());
    // 10 equally spaced exercise dates on (0, 1]
    EXPECT_EQ(p.contract.exercise_dates.size(), 10u);
    EXPECT_EQ(p.grid.n_intervals(), 10);
    for (int m = 1; m <= 10; ++m) {
        EXPECT_NEAR(p.grid.dates[m], 0.1 * m, 1e-14);
        EXPECT_TRUE(p.contract.is_exercise_date(m));
    }
    EXPECT_FALSE(p.contract.is_exercise_date(0));
    EXPECT_EQ(p.grid.substeps[0], 2);  // dt_qe = 0.05 inside 0.1-spaced dates
}

TEST(Preset, TestBVariants) {
    const Preset b1 = preset("TestB_rho02_T5");
    EXPECT_EQ(b1.model.family, ModelFamily::HHW);
    EXPECT_DOUBLE_EQ(b1.model.rho_xr, 0.2);
    EXPECT_DOUBLE_EQ(b1.contract.tenor, 5.0);
    EXPECT_FALSE(b1.model.feller_satisfied());
    const Preset b2 = preset("TestB_rho06_T10");
    EXPECT_DOUBLE_EQ(b2.model.rho_xr, 0.6);
    EXPECT_DOUBLE_EQ(b2.contract.tenor, 10.0);
    EXPECT_THROW(preset("nope"), Error);
}

TEST(Preset, ConfigRoundTripIsFieldIdentical) {
    for (const auto& name : preset_names()) {
        RunConfig cfg;
        cfg.preset_name = name;
        cfg.resolve();
        const std::string text = serialize_config(cfg);
        const RunConfig back = parse_config(text);
        EXPECT_EQ(back.resolved_model.family, cfg.resolved_model.family);
        EXPECT_EQ(back.resolved_model.s0, cfg.resolved_model.s0);
        EXPECT_EQ(back.resolved_model.kappa, cfg.resolved_model.kappa);
        EXPECT_EQ(back.resolved_model.gamma, cfg.resolved_model.gamma);
        EXPECT_EQ(back.resolved_model.rho_xv, cfg.resolved_model.rho_xv);
        EXPECT_EQ(back.resolved_model.rho_xr, cfg.resolved_model.rho_xr);
        EXPECT_EQ(back.resolved_contract.strike, cfg.resolved_contract.strike);
        EXPECT_EQ(back.resolved_contract.tenor, cfg.resolved_contract.tenor);
        EXPECT_EQ(back.resolved_contract.exercise_dates,
                  cfg.resolved_contract.exercise_dates);
        EXPECT_EQ(back.resolved_grid.dates, cfg.resolved_grid.dates);
    }
}

TEST(TimeGrid, Validation) {
    EXPECT_THROW(TimeGrid::make({0.0, 0.1, 0.1}, 0.05), Error);
    EXPECT_THROW(TimeGrid::make({0.0, 0.1}, 0.03), Error);  // does not divide
    const TimeGrid g = TimeGrid::uniform(1.0, 10, 0.05);
    EXPECT_EQ(g.total_substeps(), 20);
    EXPECT_EQ(g.substep_index(10), 20);
    EXPECT_EQ(g.substep_index(1), 2);
}

TEST(ModelSpec, Validation) {
    ModelSpec m = preset("TestA").model;
    m.rho_xv = -1.5;
    EXPECT_THROW(m.validate(), Error);
    m = preset("TestA").model;
    m.kappa = -0.1;
    EXPECT_THROW(m.validate(), Error);
    ModelSpec bs;
    bs.family = ModelFamily::BS;
    bs.sigma = 0.0;
    EXPECT_THROW(bs.validate(), Error);
    bs.sigma = 0.2;
    bs.r0 = 0.02;
    EXPECT_NO_THROW(bs.validate());
}
