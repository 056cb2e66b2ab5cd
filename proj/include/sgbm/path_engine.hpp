// Forward simulation of (x, v, r) on the QE substep grid. Variance follows
// Andersen's quadratic-exponential scheme, rates the exact Ornstein-Uhlenbeck
// transition, and the log-asset the exact-integral decomposion with trapezoid
// variance weights and no martingale correction. Pathwise discount factors
// accumulate left-endpoint rates per substep.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sgbm/common.hpp"
#include "sgbm/model.hpp"
#include "sgbm/rng.hpp"

namespace sgbm {

struct PathGrid {
    TimeGrid grid;
    ModelFamily family = ModelFamily::Heston;
    int n_paths = 0;
    int n_dims = 1;
    std::uint64_t seed = 0;

    // One vector of n_paths per monitoring date. v/r present per family.
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> v;
    std::vector<std::vector<double>> r;
    std::vector<std::vector<double>> disc;  // D(0, t_m), disc[0] == 1

    // min of x over the substeps inside interval m (right endpoints included);
    // filled only when requested at simulation time.
    std::vector<std::vector<double>> interval_min_x;

    bool has_v() const { return !v.empty(); }
    bool has_r() const { return !r.empty(); }

    // State columns ordered x, v, r (only the dimensions the family has).
    const std::vector<double>& column(int date, int dim) const {
        if (dim == 0) return x[date];
        if (dim == 1) return has_v() ? v[date] : r[date];
        return r[date];
    }
};

struct SimulateOptions {
    int threads = 1;
    bool track_interval_minima = false;
};

namespace detail {

// Per-substep constants shared by all paths.
struct SubstepPlan {
    double dt = 0.0;
    double sqrt_dt = 0.0;
    double e_kappa = 1.0;   // exp(-kappa dt)
    double qe_c1 = 0.0;     // gamma^2 e (1-e) / kappa
    double qe_c2 = 0.0;     // vbar gamma^2 (1-e)^2 / (2 kappa)
    double ou_decay = 1.0;  // exp(-lambda dt)
    double ou_vol = 0.0;    // eta sqrt((1-exp(-2 lambda dt)) / (2 lambda))
    int end_date = -1;      // monitoring date reached after this substep, or -1
};

inline std::vector<SubstepPlan> build_plan(const ModelSpec& model, const TimeGrid& grid) {
    std::vector<SubstepPlan> plan;
    plan.reserve(grid.total_substeps());
    for (int m = 0; m < grid.n_intervals(); ++m) {
        const int n = grid.substeps[m];
        const double dt = (grid.dates[m + 1] - grid.dates[m]) / n;
        SubstepPlan p;
        p.dt = dt;
        p.sqrt_dt = std::sqrt(dt);
        if (model.has_variance() && model.kappa > 0.0) {
            p.e_kappa = std::exp(-model.kappa * dt);
            const double g2 = model.gamma * model.gamma;
            p.qe_c1 = g2 * p.e_kappa * (1.0 - p.e_kappa) / model.kappa;
            p.qe_c2 = model.vbar * g2 * (1.0 - p.e_kappa) * (1.0 - p.e_kappa) /
                      (2.0 * model.kappa);
        } else if (model.has_variance()) {
            // kappa == 0: flat conditional mean, Euler-style variance of the CIR
            p.e_kappa = 1.0;
            p.qe_c1 = model.gamma * model.gamma * dt;
            p.qe_c2 = 0.0;
        }
        if (model.has_stochastic_rate()) {
            const double l = model.lambda;
            if (l > 1e-12) {
                p.ou_decay = std::exp(-l * dt);
                p.ou_vol = model.eta * std::sqrt(-std::expm1(-2.0 * l * dt) / (2.0 * l));
            } else {
                p.ou_decay = 1.0;
                p.ou_vol = model.eta * std::sqrt(dt);
            }
        }
        for (int k = 0; k < n; ++k) {
            plan.push_back(p);
            plan.back().end_date = (k == n - 1) ? m + 1 : -1;
        }
    }
    return plan;
}

inline double qe_variance_step(double v, const SubstepPlan& p, const ModelSpec& model,
                               double u01) {
    const double m = model.vbar + (v - model.vbar) * p.e_kappa;
    const double s2 = v * p.qe_c1 + p.qe_c2;
    if (s2 <= 1e-24 * std::max(m * m, 1e-300)) return m;  // degenerate diffusion
    const double psi = s2 / (m * m);
    if (psi <= 1.5) {
        const double inv = 2.0 / psi;
        const double b2 = inv - 1.0 + std::sqrt(inv) * std::sqrt(inv - 1.0);
        const double a = m / (1.0 + b2);
        const double z = norm_inv(u01);
        const double t = std::sqrt(b2) + z;
        return a * t * t;
    }
    const double pr = (psi - 1.0) / (psi + 1.0);
    if (u01 <= pr) return 0.0;
    const double beta = (1.0 - pr) / m;
    return std::log((1.0 - pr) / (1.0 - u01)) / beta;
}

}  // namespace detail

// Pure in (model, grid, n_paths, seed); paths are generated independently.
inline PathGrid simulate(const ModelSpec& model, const TimeGrid& grid, int n_paths,
                         std::uint64_t seed, const SimulateOptions& opts = {}) {
    model.validate();
    SGBM_REQUIRE(n_paths >= 2, "simulate: need at least two paths");
    const int M = grid.n_intervals();

    PathGrid out;
    out.grid = grid;
    out.family = model.family;
    out.n_paths = n_paths;
    out.n_dims = model.n_dims();
    out.seed = seed;
    out.x.assign(M + 1, std::vector<double>(n_paths));
    if (model.has_variance()) out.v.assign(M + 1, std::vector<double>(n_paths));
    if (model.has_stochastic_rate()) out.r.assign(M + 1, std::vector<double>(n_paths));
    out.disc.assign(M + 1, std::vector<double>(n_paths));
    if (opts.track_interval_minima)
        out.interval_min_x.assign(M, std::vector<double>(n_paths));

    const auto plan = detail::build_plan(model, grid);
    const RngStream rng(seed);

    const bool with_v = model.has_variance();
    const bool with_r = model.has_stochastic_rate();
    const double x0 = model.x0();
    const double q_ortho = with_v
        ? std::sqrt(std::max(0.0, 1.0 - model.rho_xv * model.rho_xv -
                                      model.rho_xr * model.rho_xr))
        : std::sqrt(std::max(0.0, 1.0 - model.rho_xr * model.rho_xr));
    const bool exact_vol_coupling = with_v && model.gamma > 1e-8;

    parallel_for(static_cast<std::size_t>(n_paths), opts.threads, [&](std::size_t i) {
        double x = x0;
        double v = model.v0;
        double r = with_r ? model.r0 : model.r0;
        double log_disc = 0.0;

        out.x[0][i] = x;
        if (with_v) out.v[0][i] = v;
        if (with_r) out.r[0][i] = r;
        out.disc[0][i] = 1.0;

        int interval = 0;
        double min_x = x;
        for (std::uint32_t s = 0; s < plan.size(); ++s) {
            const auto& p = plan[s];
            const double u_v = rng.uniform(i, s, 0, 0);
            const double z_r = with_r ? rng.normal(i, s, 0, 1) : 0.0;
            const double z_p = rng.normal(i, s, 1, 0);

            log_disc -= r * p.dt;

            double x_new;
            if (with_v) {
                const double v_new = detail::qe_variance_step(v, p, model, u_v);
                const double v_mid = 0.5 * (v + v_new);
                double shock = model.rho_xr * z_r + q_ortho * z_p;
                double coupling;
                if (exact_vol_coupling) {
                    coupling = model.rho_xv / model.gamma *
                               (v_new - v - model.kappa * (model.vbar - v_mid) * p.dt);
                } else {
                    shock += model.rho_xv * norm_inv(u_v);
                    coupling = 0.0;
                }
                x_new = x + (r - 0.5 * v_mid) * p.dt + coupling +
                        std::sqrt(v_mid * p.dt) * shock;
                v = v_new;
            } else {
                const double shock = model.rho_xr * z_r + q_ortho * z_p;
                x_new = x + (r - 0.5 * model.sigma * model.sigma) * p.dt +
                        model.sigma * p.sqrt_dt * shock;
            }
            x = x_new;
            if (with_r) r = model.theta + (r - model.theta) * p.ou_decay + p.ou_vol * z_r;

            min_x = std::min(min_x, x);
            if (p.end_date >= 0) {
                const int m = p.end_date;
                out.x[m][i] = x;
                if (with_v) out.v[m][i] = v;
                if (with_r) out.r[m][i] = r;
                out.disc[m][i] = std::exp(log_disc);
                if (opts.track_interval_minima) {
                    out.interval_min_x[interval][i] = min_x;
                    min_x = x;  // next interval starts here
                }
                ++interval;
            }
        }
    });
    return out;
}

// Cross-sectional (optionally discounted-to-t0) moment of the state at a date.
inline MeanStd sample_moment_stats(const PathGrid& grid, int date,
                                   const std::vector<int>& exponents,
                                   bool discounted) {
    SGBM_REQUIRE(date >= 0 && date < static_cast<int>(grid.x.size()),
                 "sample_moment: date index out of range");
    SGBM_REQUIRE(static_cast<int>(exponents.size()) == grid.n_dims,
                 "sample_moment: exponent count must match state dimension");
    std::vector<double> vals(grid.n_paths);
    for (int i = 0; i < grid.n_paths; ++i) {
        double m = discounted ? grid.disc[date][i] : 1.0;
        for (int d = 0; d < grid.n_dims; ++d) {
            const double s = grid.column(date, d)[i];
            for (int e = 0; e < exponents[d]; ++e) m *= s;
        }
        vals[i] = m;
    }
    return mean_std(vals);
}

inline double sample_moment(const PathGrid& grid, int date,
                            const std::vector<int>& exponents, bool discounted) {
    return sample_moment_stats(grid, date, exponents, discounted).mean;
}

}  // namespace sgbm
