// Default-probability model, CVA aggregation and the independent reference
// pricers (plain Monte Carlo cash flow, Black-Scholes, implied volatility).
#pragma once

#include <cmath>
#include <span>

#include "sgbm/common.hpp"
#include "sgbm/model.hpp"
#include "sgbm/path_engine.hpp"

namespace sgbm {

struct CreditSpec {
    double hazard_rate = 0.03;
    double recovery = 0.0;
    double pfe_alpha = 0.975;

    void validate() const {
        SGBM_REQUIRE(hazard_rate >= 0.0, "CreditSpec: hazard rate must be >= 0");
        SGBM_REQUIRE(recovery >= 0.0 && recovery < 1.0,
                     "CreditSpec: recovery must lie in [0,1)");
        SGBM_REQUIRE(pfe_alpha > 0.0 && pfe_alpha < 1.0,
                     "CreditSpec: alpha must lie in (0,1)");
    }
};

inline double pd(double t, double hazard_rate) {
    SGBM_REQUIRE(t >= 0.0, "pd: t must be >= 0");
    return -std::expm1(-hazard_rate * t);
}

// Discrete CVA: (1 - recovery) * sum_m EE*(t_m) (PD(t_{m+1}) - PD(t_m)).
inline double cva(std::span<const double> ee_star, const CreditSpec& credit,
                  std::span<const double> dates) {
    credit.validate();
    const std::size_t M = dates.size() - 1;
    SGBM_REQUIRE(dates.size() >= 2, "cva: need at least one interval");
    SGBM_REQUIRE(ee_star.size() == M || ee_star.size() == M + 1,
                 "cva: EE* length must cover m = 0..M-1");
    double acc = 0.0;
    for (std::size_t m = 0; m < M; ++m)
        acc += ee_star[m] *
               (pd(dates[m + 1], credit.hazard_rate) - pd(dates[m], credit.hazard_rate));
    return (1.0 - credit.recovery) * acc;
}

// ---------------------------------------------------------------------------
// Black-Scholes utilities

inline double bs_price(double s0, double strike, double tenor, double rate,
                       double sigma, int omega) {
    SGBM_REQUIRE(sigma > 0.0 && tenor > 0.0, "bs_price: sigma, T must be positive");
    const double st = sigma * std::sqrt(tenor);
    const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * tenor) / st;
    const double d2 = d1 - st;
    const double df = std::exp(-rate * tenor);
    if (omega > 0) return s0 * norm_cdf(d1) - strike * df * norm_cdf(d2);
    return strike * df * norm_cdf(-d2) - s0 * norm_cdf(-d1);
}

inline double bs_vega(double s0, double strike, double tenor, double rate,
                      double sigma) {
    const double st = sigma * std::sqrt(tenor);
    const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * tenor) / st;
    return s0 * norm_pdf(d1) * std::sqrt(tenor);
}

// Implied Black-Scholes volatility by safeguarded Newton over [1e-6, 5].
inline double implied_vol(double price, double s0, double strike, double tenor,
                          double rate, int omega = 1) {
    SGBM_REQUIRE(s0 > 0.0 && strike > 0.0 && tenor > 0.0, "implied_vol: bad inputs");
    const double df = std::exp(-rate * tenor);
    const double lower = (omega > 0) ? std::max(s0 - strike * df, 0.0)
                                     : std::max(strike * df - s0, 0.0);
    const double upper = (omega > 0) ? s0 : strike * df;
    SGBM_REQUIRE(price > lower && price < upper,
                 "implied_vol: price violates no-arbitrage bounds");

    double lo = 1e-6, hi = 5.0;
    double sigma = 0.2;
    for (int it = 0; it < 200; ++it) {
        const double p = bs_price(s0, strike, tenor, rate, sigma, omega);
        const double err = p - price;
        if (std::abs(err) < 1e-10) return sigma;
        if (err > 0.0)
            hi = sigma;
        else
            lo = sigma;
        const double vega = bs_vega(s0, strike, tenor, rate, sigma);
        double next = sigma - err / std::max(vega, 1e-300);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        sigma = next;
    }
    return sigma;
}

// ---------------------------------------------------------------------------
// Zero-coupon bonds implied by the model (used to invert implied vols under
// stochastic rates: Black-Scholes at the bond-effective rate).

inline double hw_zcb(double lambda, double theta, double eta, double r0, double tenor) {
    const double B = (lambda > 1e-12) ? -std::expm1(-lambda * tenor) / lambda : tenor;
    const double A = (theta - eta * eta / (2.0 * lambda * lambda)) * (B - tenor) -
                     eta * eta * B * B / (4.0 * lambda);
    return std::exp(A - B * r0);
}

inline double model_zcb(const ModelSpec& m, double tenor) {
    if (m.has_stochastic_rate()) return hw_zcb(m.lambda, m.theta, m.eta, m.r0, tenor);
    return std::exp(-m.r0 * tenor);
}

inline double model_zcb_rate(const ModelSpec& m, double tenor) {
    return -std::log(model_zcb(m, tenor)) / tenor;
}

// ---------------------------------------------------------------------------
// Plain Monte Carlo discounted-cash-flow pricer (the reference methodology).
// For barriers the cash flow is zero on knocked-out paths.

struct McPrice {
    double price = 0.0;
    double std_err = 0.0;
};

inline McPrice mc_european_oracle(const ModelSpec& model, const ContractSpec& contract,
                                  const TimeGrid& grid, int n_paths,
                                  std::uint64_t seed, int threads = 1) {
    SGBM_REQUIRE(contract.kind == ContractKind::European ||
                     contract.kind == ContractKind::DownAndOutBarrier,
                 "mc_european_oracle: terminal-payoff contracts only");
    SimulateOptions opts;
    opts.threads = threads;
    opts.track_interval_minima = contract.kind == ContractKind::DownAndOutBarrier;
    const PathGrid paths = simulate(model, grid, n_paths, seed, opts);
    const int M = grid.n_intervals();
    const double log_barrier =
        (contract.kind == ContractKind::DownAndOutBarrier) ? std::log(contract.barrier)
                                                           : 0.0;
    std::vector<double> vals(n_paths);
    for (int i = 0; i < n_paths; ++i) {
        bool alive = true;
        if (opts.track_interval_minima) {
            for (int k = 0; k < M && alive; ++k)
                if (paths.interval_min_x[k][i] <= log_barrier) alive = false;
        }
        vals[i] = alive
                      ? paths.disc[M][i] * payoff(contract, std::exp(paths.x[M][i]))
                      : 0.0;
    }
    const MeanStd s = mean_std(vals);
    return {s.mean, s.se};
}

}  // namespace sgbm
