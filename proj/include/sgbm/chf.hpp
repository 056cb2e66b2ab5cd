// Discounted characteristic functions for the Heston, BSHW and H1HW models,
// the conditional expectation E[sqrt(v_t)|v_s] with its small-tau and d>1/2
// regimes, and the G1/G2 rate-vol coupling integrals of the H1HW model.
//
// The Heston exponent is evaluated through beta_minus = -gamma^2 u1(u1+i) /
// beta_plus (conjugate form) and a complex log1p, which stays accurate down
// to the degenerate vol-of-vol regime; gamma is floored at 1e-7 inside the
// transform, which perturbs moments by O(gamma^2) ~ 1e-14.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <utility>

#include "sgbm/common.hpp"
#include "sgbm/model.hpp"

namespace sgbm {

using cplx = std::complex<double>;

struct State {
    double x = 0.0;
    double v = 0.0;
    double r = 0.0;
};

namespace detail {

inline cplx log1p_c(cplx z) {
    if (std::abs(z) < 1e-4) {
        // 4-term series; |error| <= |z|^5
        return z * (1.0 - z * (0.5 - z * (1.0 / 3.0 - z * 0.25)));
    }
    return std::log(1.0 + z);
}

constexpr double kGammaFloor = 1e-7;

struct HestonExponent {
    cplx Cbar;  // coefficient of v_t
    cplx I1;    // kappa*vbar integral term of A
};

inline HestonExponent heston_exponent(double kappa, double gamma, double vbar,
                                      double rho_xv, double u1, double u2,
                                      double tau) {
    const cplx i(0.0, 1.0);
    const double g = std::max(gamma, kGammaFloor);
    const double g2 = g * g;
    const cplx u1u1i = cplx(u1 * u1, u1);  // u1*(u1+i)
    const cplx kg = kappa - g * rho_xv * i * u1;
    const cplx D1 = std::sqrt(kg * kg + g2 * u1u1i);
    const cplx beta_p = kg + D1;
    const cplx beta_m = -g2 * u1u1i / beta_p;
    const cplx iu2g2 = i * u2 * g2;
    const cplx gg = (iu2g2 - beta_m) / (iu2g2 - beta_p);
    const cplx e = std::exp(-D1 * tau);

    HestonExponent out;
    out.Cbar = (beta_m * (iu2g2 - beta_p) - beta_p * (iu2g2 - beta_m) * e) /
               (g2 * ((iu2g2 - beta_p) - (iu2g2 - beta_m) * e));
    const cplx r_minus = -u1u1i / beta_p;
    out.I1 = kappa * vbar *
             (r_minus * tau - (2.0 / g2) * (log1p_c(-gg * e) - log1p_c(-gg)));
    return out;
}

// Hull-White pieces shared by BSHW and H1HW: D-bar and the theta / eta^2
// contributions to A-bar.
struct HwExponent {
    cplx Dbar;
    cplx I_theta;
    cplx I_eta;
};

inline HwExponent hw_exponent(double lambda, double theta, double eta, double u1,
                              double u3, double tau) {
    const cplx i(0.0, 1.0);
    const cplx iu1m1 = cplx(-1.0, u1);            // iu1 - 1
    const double em1 = std::expm1(-lambda * tau);  // e^{-lambda tau} - 1
    const double e = em1 + 1.0;
    HwExponent out;
    out.Dbar = iu1m1 * (-em1 / lambda) + i * u3 * e;
    out.I_theta = theta * (iu1m1 * tau + em1 * iu1m1 / lambda - i * u3 * em1);
    const cplx u1pi = cplx(u1, 1.0);              // u1 + i
    const cplx w = cplx(lambda * u3 - u1, -1.0);  // lambda u3 - u1 - i
    out.I_eta = eta * eta / (2.0 * lambda * lambda) *
                ((2.0 / lambda) * u1pi * em1 * w +
                 std::expm1(-2.0 * lambda * tau) / (2.0 * lambda) * w * w -
                 u1pi * u1pi * tau);
    return out;
}

}  // namespace detail

// E[sqrt(v_t) | v_s] for the CIR variance over a gap tau = t - s.
inline double expected_sqrt_v(double kappa, double gamma, double vbar, double v_s,
                              double tau) {
    SGBM_REQUIRE(tau >= 0.0, "expected_sqrt_v: tau must be >= 0");
    SGBM_REQUIRE(kappa >= 0.0 && gamma >= 0.0 && vbar >= 0.0 && v_s >= 0.0,
                 "expected_sqrt_v: parameters must be non-negative");
    if (tau < 1e-4) return std::sqrt(v_s);

    const double one_me = (kappa > 1e-12) ? -std::expm1(-kappa * tau) : 0.0;
    const double decay = 1.0 - one_me;  // e^{-kappa tau}
    const double mean = vbar + (v_s - vbar) * decay;
    if (gamma < 1e-10) return std::sqrt(std::max(mean, 0.0));

    const double c = (kappa > 1e-12)
                         ? gamma * gamma * one_me / (4.0 * kappa)
                         : gamma * gamma * tau / 4.0;
    const double d = (kappa > 1e-12) ? 4.0 * kappa * vbar / (gamma * gamma) : 0.0;
    const double lam = v_s * decay / c;

    // Non-central-chi series is unstable for large lam; the d>1/2 closed
    // approximation doubles as the large-lam asymptotic (rel. error O(1/lam^2)).
    if (d > 0.5 || lam > 500.0) {
        const double inner = lam - 1.0 + d + d / (2.0 * (d + lam));
        return std::sqrt(c * std::max(inner, 0.0));
    }

    // the Poisson-mixture weights peak near k = lam/2, so the cap must sit
    // well past 250 for the series region lam <= 500 to be fully summed
    const double half = 0.5 * lam;
    double term = std::exp(std::lgamma(0.5 * (1.0 + d)) - std::lgamma(0.5 * d));
    double sum = term;
    for (int k = 1; k <= 400; ++k) {
        term *= half / k * (0.5 * (1.0 + d) + k - 1.0) / (0.5 * d + k - 1.0);
        sum += term;
        if (k > half && term < 1e-12 * sum) break;
    }
    return std::sqrt(2.0 * c) * std::exp(-half) * sum;
}

// Diagnostic bundle for the E[sqrt(v)] machinery (one evaluation).
struct SqrtVarTerms {
    double c = 0.0;
    double d = 0.0;
    double lambda = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    int quad_intervals = 0;
};

namespace detail {

// n-point Gauss-Legendre nodes/weights on [-1, 1]
struct GaussNodes {
    std::vector<double> x, w;
    explicit GaussNodes(int n) : x(n), w(n) {
        for (int k = 0; k < n; ++k) {
            double xi = std::cos(M_PI * (k + 0.75) / (n + 0.5));
            double p1 = 0.0, dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0;
                p1 = xi;
                for (int l = 2; l <= n; ++l) {
                    const double p2 = ((2.0 * l - 1.0) * xi * p1 - (l - 1.0) * p0) / l;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
                const double dx = p1 / dp;
                xi -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            x[k] = xi;
            w[k] = 2.0 / ((1.0 - xi * xi) * dp * dp);
        }
    }
};

}  // namespace detail

// Quadrature of
//   G_1 = int_0^tau E[sqrt(v_{tau-s})|v_t] (1 - e^{-lambda s}) ds,
//   G_2 = int_0^tau E[sqrt(v_{tau-s})|v_t] e^{-lambda s} ds
// with roughly L function evaluations. E[sqrt(v_g)|v] carries a boundary
// layer of width ~v/gamma^2 near zero gap (the Jensen correction ramps up
// there), so the rule is composite Gauss-Legendre over panels that grow
// geometrically away from the layer; uniform low-order rules cannot make the
// quadrature invisible next to the other scheme errors out to tau = 10.
inline std::pair<double, double> g_integrals(double kappa, double gamma, double vbar,
                                             double lambda, double v_t, double tau,
                                             int L = 64) {
    SGBM_REQUIRE(L >= 1, "g_integrals: need at least one interval");
    if (tau <= 0.0) return {0.0, 0.0};
    // panel boundaries in the gap variable w = tau - s
    std::vector<double> bounds{0.0};
    for (double b = 0.05; b < tau; b *= 2.0) bounds.push_back(b);
    bounds.push_back(tau);
    const int n_panels = static_cast<int>(bounds.size()) - 1;
    const int per_panel = std::clamp(L / n_panels, 4, 32);
    static thread_local std::vector<std::unique_ptr<detail::GaussNodes>> cache(33);
    if (!cache[per_panel])
        cache[per_panel] = std::make_unique<detail::GaussNodes>(per_panel);
    const detail::GaussNodes& gl = *cache[per_panel];

    double g1 = 0.0, g2 = 0.0;
    for (int p = 0; p < n_panels; ++p) {
        const double mid = 0.5 * (bounds[p] + bounds[p + 1]);
        const double half = 0.5 * (bounds[p + 1] - bounds[p]);
        for (int k = 0; k < per_panel; ++k) {
            const double gap = mid + half * gl.x[k];
            const double esq = expected_sqrt_v(kappa, gamma, vbar, v_t, gap);
            const double decay = std::exp(-lambda * (tau - gap));
            g1 += gl.w[k] * half * esq * (1.0 - decay);
            g2 += gl.w[k] * half * esq * decay;
        }
    }
    return {g1, g2};
}

inline SqrtVarTerms sqrt_var_terms(const ModelSpec& m, double v_t, double tau,
                                   int L = 64) {
    SqrtVarTerms t;
    const double one_me = (m.kappa > 1e-12) ? -std::expm1(-m.kappa * tau) : 0.0;
    t.c = (m.kappa > 1e-12) ? m.gamma * m.gamma * one_me / (4.0 * m.kappa)
                            : m.gamma * m.gamma * tau / 4.0;
    t.d = (m.kappa > 1e-12) ? 4.0 * m.kappa * m.vbar / (m.gamma * m.gamma) : 0.0;
    t.lambda = (t.c > 0.0) ? v_t * (1.0 - one_me) / t.c : 0.0;
    auto [g1, g2] = g_integrals(m.kappa, m.gamma, m.vbar, m.lambda, v_t, tau, L);
    t.g1 = g1;
    t.g2 = g2;
    t.quad_intervals = L;
    return t;
}

struct DchfOptions {
    int g_quad_intervals = 64;
};

// Discounted characteristic function Phi(u; tau, X_t) = E[exp(i u . X_{t+tau})
// D(t, t+tau) | X_t]. Frequencies u = (u1, u2, u3) pair with (x, v, r);
// components for dimensions a family lacks are ignored.
inline cplx dchf(const ModelSpec& m, std::array<double, 3> u, double tau,
                 const State& X, const DchfOptions& opts = {}) {
    SGBM_REQUIRE(tau >= 0.0, "dchf: tau must be >= 0");
    const cplx i(0.0, 1.0);
    const double u1 = u[0], u2 = u[1], u3 = u[2];
    if (tau == 0.0) {
        cplx expo = i * u1 * X.x;
        if (m.has_variance()) expo += i * u2 * X.v;
        if (m.has_stochastic_rate()) expo += i * u3 * X.r;
        return std::exp(expo);
    }
    switch (m.family) {
        case ModelFamily::BS: {
            const cplx iu1 = i * u1;
            const cplx A = m.r0 * (iu1 - 1.0) * tau +
                           0.5 * m.sigma * m.sigma * iu1 * (iu1 - 1.0) * tau;
            return std::exp(A + iu1 * X.x);
        }
        case ModelFamily::Heston: {
            const auto h = detail::heston_exponent(m.kappa, m.gamma, m.vbar,
                                                   m.rho_xv, u1, u2, tau);
            const cplx A = h.I1 + m.r0 * (i * u1 - 1.0) * tau;
            return std::exp(A + i * u1 * X.x + h.Cbar * X.v);
        }
        case ModelFamily::BSHW: {
            const auto hw = detail::hw_exponent(m.lambda, m.theta, m.eta, u1, u3, tau);
            const cplx iu1 = i * u1;
            const cplx I_sigma = 0.5 * m.sigma * m.sigma * iu1 * (iu1 - 1.0) * tau;
            const double em1 = std::expm1(-m.lambda * tau);
            const cplx iu1u12 = cplx(u1 * u1, u1);  // iu1 + u1^2
            const cplx I_cross = m.eta * m.sigma * m.rho_xr / m.lambda *
                                 (-iu1u12 / m.lambda * (m.lambda * tau + em1) +
                                  u1 * u3 * em1);
            const cplx A = I_sigma + hw.I_theta + hw.I_eta + I_cross;
            return std::exp(A + iu1 * X.x + hw.Dbar * X.r);
        }
        case ModelFamily::HHW: {
            const auto h = detail::heston_exponent(m.kappa, m.gamma, m.vbar,
                                                   m.rho_xv, u1, u2, tau);
            const auto hw = detail::hw_exponent(m.lambda, m.theta, m.eta, u1, u3, tau);
            const auto [g1, g2] = g_integrals(m.kappa, m.gamma, m.vbar, m.lambda,
                                              X.v, tau, opts.g_quad_intervals);
            const cplx iu1u12 = cplx(u1 * u1, u1);
            const cplx I4 = m.eta * m.rho_xr *
                            (-iu1u12 / m.lambda * g1 - u1 * u3 * g2);
            const cplx A = hw.I_theta + h.I1 + hw.I_eta + I4;
            return std::exp(A + i * u1 * X.x + h.Cbar * X.v + hw.Dbar * X.r);
        }
    }
    throw Error("dchf: unknown model family");
}

}  // namespace sgbm
