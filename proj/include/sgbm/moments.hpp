// Discounted moments E[x^a v^b r^c D(t,t+tau) | X_t].
//
// Three routes are provided:
//  * heston_closed_moment — the closed-form Heston moments (degree <= 2).
//  * moment_dchf_fd       — generic backend: central finite differences of
//    the discounted ChF at u = 0 with one Richardson extrapolation.
//  * MomentEvaluator      — production evaluator used by the exposure engine.
//    It differentiates the exponent coefficient functions once per (model,
//    tau), then assembles per-state moments through the derivative recursion
//    of exp(W); the state enters W linearly except for the H1HW G1/G2
//    integrals, which are interpolated from a precomputed spline in v.
#pragma once

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include "sgbm/chf.hpp"
#include "sgbm/common.hpp"
#include "sgbm/model.hpp"

namespace sgbm {

struct Exponents {
    int a = 0;  // power of x
    int b = 0;  // power of v
    int c = 0;  // power of r
    int total() const { return a + b + c; }
};

inline int moment_degree_cap(const ModelSpec& m) {
    return m.family == ModelFamily::HHW ? 2 : 3;
}

inline void validate_request(const ModelSpec& m, const Exponents& e) {
    SGBM_REQUIRE(e.a >= 0 && e.b >= 0 && e.c >= 0,
                 "moment request: exponents must be non-negative");
    SGBM_REQUIRE(e.total() <= moment_degree_cap(m),
                 "moment request: degree above the model's cap");
    if (!m.has_variance()) SGBM_REQUIRE(e.b == 0, "moment request: model has no v");
    if (!m.has_stochastic_rate())
        SGBM_REQUIRE(e.c == 0, "moment request: model has no r");
}

namespace detail {

// Central-difference steps per frequency dimension. The x step follows the
// transform scale of log-price; v and r moments are orders of magnitude
// smaller, and at h = 1e-3 double-precision roundoff (~eps/h^2) would swamp
// them, so those dimensions use a step matched to their state scale.
constexpr std::array<double, 3> kFdSteps{1e-3, 5e-2, 5e-2};

// D^alpha f(0) by tensor-product central differences, Richardson-extrapolated
// once: (4 D(h/2) - D(h)) / 3.
template <class F>
cplx fd_partial(const F& f, std::array<int, 3> alpha,
                std::array<double, 3> h = kFdSteps) {
    struct Node {
        int off;
        double w;
    };
    static const std::vector<Node> stencils[4] = {
        {{0, 1.0}},
        {{-1, -0.5}, {1, 0.5}},
        {{-1, 1.0}, {0, -2.0}, {1, 1.0}},
        {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}},
    };
    auto level = [&](double shrink) {
        const double h0 = h[0] * shrink, h1 = h[1] * shrink, h2 = h[2] * shrink;
        cplx acc(0.0, 0.0);
        for (const auto& n0 : stencils[alpha[0]])
            for (const auto& n1 : stencils[alpha[1]])
                for (const auto& n2 : stencils[alpha[2]]) {
                    const double w = n0.w * n1.w * n2.w;
                    acc += w * f(std::array<double, 3>{n0.off * h0, n1.off * h1,
                                                       n2.off * h2});
                }
        double scale = 1.0;
        for (int k = 0; k < alpha[0]; ++k) scale *= h0;
        for (int k = 0; k < alpha[1]; ++k) scale *= h1;
        for (int k = 0; k < alpha[2]; ++k) scale *= h2;
        return acc / scale;
    };
    const int order = alpha[0] + alpha[1] + alpha[2];
    if (order == 0) return f({0.0, 0.0, 0.0});
    const cplx ch = level(1.0);
    const cplx ch2 = level(0.5);
    return (4.0 * ch2 - ch) / 3.0;
}

inline cplx i_pow(int n) {
    switch (n & 3) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, 1.0};
        case 2: return {-1.0, 0.0};
        default: return {0.0, -1.0};
    }
}

// Natural cubic spline on a uniform grid.
class UniformSpline {
public:
    UniformSpline() = default;
    UniformSpline(double x0, double h, std::vector<double> ys) : x0_(x0), h_(h), y_(std::move(ys)) {
        const int n = static_cast<int>(y_.size());
        SGBM_REQUIRE(n >= 3 && h_ > 0.0, "UniformSpline: bad grid");
        m_.assign(n, 0.0);
        std::vector<double> diag(n, 4.0), rhs(n, 0.0);
        for (int i = 1; i + 1 < n; ++i)
            rhs[i] = 6.0 * (y_[i - 1] - 2.0 * y_[i] + y_[i + 1]) / (h_ * h_);
        // Thomas algorithm on the interior rows (natural ends: m = 0)
        for (int i = 2; i + 1 < n; ++i) {
            const double f = 1.0 / diag[i - 1];
            diag[i] -= f;
            rhs[i] -= f * rhs[i - 1];
        }
        for (int i = n - 2; i >= 1; --i) m_[i] = (rhs[i] - m_[i + 1]) / diag[i];
    }

    bool covers(double x) const {
        return !y_.empty() && x >= x0_ && x <= x0_ + h_ * (y_.size() - 1);
    }

    double operator()(double x) const {
        const int n = static_cast<int>(y_.size());
        int i = static_cast<int>((x - x0_) / h_);
        i = std::clamp(i, 0, n - 2);
        const double s = x - (x0_ + i * h_);
        const double m0 = m_[i], m1 = m_[i + 1];
        const double b = (y_[i + 1] - y_[i]) / h_ - h_ * (2.0 * m0 + m1) / 6.0;
        return y_[i] + s * (b + s * (0.5 * m0 + s * (m1 - m0) / (6.0 * h_)));
    }

private:
    double x0_ = 0.0;
    double h_ = 1.0;
    std::vector<double> y_;
    std::vector<double> m_;
};

}  // namespace detail

// Generic backend: differentiate the discounted ChF numerically at u = 0.
inline double moment_dchf_fd(const ModelSpec& m, const Exponents& e, double tau,
                             const State& X,
                             std::array<double, 3> steps = detail::kFdSteps,
                             const DchfOptions& opts = {}) {
    validate_request(m, e);
    const auto d = detail::fd_partial(
        [&](std::array<double, 3> u) { return dchf(m, u, tau, X, opts); },
        {e.a, e.b, e.c}, steps);
    return (detail::i_pow(-e.total() & 3) * d).real();
}

// Closed-form Heston discounted moments, degree <= 2. Constants are grouped
// per tau so per-state evaluation is a handful of multiplies.
class HestonClosedEval {
public:
    HestonClosedEval(const ModelSpec& m, double tau) : r_(m.r0), tau_(tau) {
        SGBM_REQUIRE(m.family == ModelFamily::Heston,
                     "HestonClosedEval: Heston only");
        SGBM_REQUIRE(m.kappa > 1e-12, "HestonClosedEval: kappa must be positive");
        const double k = m.kappa, g = m.gamma, vb = m.vbar, rho = m.rho_xv;
        const double e = std::exp(-k * tau);
        const double g2 = g * g, kt = k * tau;
        e_ = e;
        one_me_ = -std::expm1(-k * tau);
        disc_ = std::exp(-r_ * tau);
        vbar_ = vb;
        kappa_ = k;
        drift_ = (r_ - 0.5 * vb) * tau;
        om1_ = e * e * g2 +
               4.0 * e * ((1.0 + kt) * g2 - 2.0 * rho * k * g * (2.0 + kt) + 2.0 * k * k) +
               (2.0 * kt - 5.0) * g2 - 8.0 * rho * k * g * (kt - 2.0) +
               8.0 * k * k * (kt - 1.0);
        om2_ = -e * e * g2 +
               2.0 * e * (-kt * g2 + 2.0 * rho * k * g * (1.0 + kt) - 2.0 * k * k) +
               g2 - 4.0 * k * rho * g + 4.0 * k * k;
        // gamma^2 * Omega_3 and gamma^2 * Omega_4, multiplied through so the
        // vol-of-vol can degenerate to zero
        om3g2_ = g2 * e * e + 2.0 * k * e * (tau * g2 - 2.0 * rho * g * (1.0 + kt)) +
                 4.0 * k * rho * g - g2;
        om4g2_ = g2 * e * (1.0 - kt) + 2.0 * rho * k * k * tau * g * e - g2 * e * e;
        vv1_ = g2 * (e - e * e) / k;
        vv2_ = vb * g2 * one_me_ * one_me_ / (2.0 * k);
    }

    double bond() const { return disc_; }
    double mean_x(double x, double v) const {
        return x + (vbar_ - v) * one_me_ / (2.0 * kappa_) + drift_;
    }
    double mean_v(double v) const { return vbar_ + (v - vbar_) * e_; }

    double moment(const Exponents& e, double x, double v) const {
        SGBM_REQUIRE(e.c == 0 && e.total() <= 2,
                     "HestonClosedEval: degree <= 2 in (x, v) only");
        const int key = e.a * 3 + e.b;
        switch (key) {
            case 0: return disc_;                          // (0,0)
            case 1: return mean_v(v) * disc_;              // (0,1)
            case 3: return mean_x(x, v) * disc_;           // (1,0)
            case 2: {                                      // (0,2)
                const double mv = mean_v(v);
                return (v * vv1_ + vv2_ + mv * mv) * disc_;
            }
            case 4: {                                      // (1,1)
                const double k2 = kappa_ * kappa_;
                return (mean_v(v) * mean_x(x, v) + vbar_ * om3g2_ / (4.0 * k2) +
                        v * om4g2_ / (2.0 * k2)) * disc_;
            }
            case 6: {                                      // (2,0)
                const double mx = mean_x(x, v);
                const double k3 = kappa_ * kappa_ * kappa_;
                return (mx * mx + vbar_ * om1_ / (8.0 * k3) + v * om2_ / (4.0 * k3)) *
                       disc_;
            }
        }
        throw Error("HestonClosedEval: unsupported exponent pair");
    }

private:
    double r_, tau_;
    double e_, one_me_, disc_, vbar_, kappa_, drift_;
    double om1_, om2_, om3g2_, om4g2_, vv1_, vv2_;
};

inline double heston_closed_moment(const ModelSpec& m, const Exponents& e, double tau,
                                   const State& X) {
    return HestonClosedEval(m, tau).moment(e, X.x, X.v);
}

// Production evaluator: all discounted moments of total degree <= `degree`
// for one (model, tau), evaluated per state.
class MomentEvaluator {
public:
    MomentEvaluator(const ModelSpec& m, double tau, int degree,
                    double v_max_hint = 0.0, const DchfOptions& opts = {})
        : model_(m), tau_(tau), degree_(degree), opts_(opts) {
        SGBM_REQUIRE(degree >= 0 && degree <= moment_degree_cap(m),
                     "MomentEvaluator: degree above the model's cap");
        SGBM_REQUIRE(tau >= 0.0, "MomentEvaluator: tau must be >= 0");
        enumerate_tuples();
        build_coefficient_tables();
        build_plan();
        if (m.family == ModelFamily::HHW && tau > 0.0) build_g_splines(v_max_hint);
    }

    const std::vector<Exponents>& tuples() const { return tuples_; }
    int n_tuples() const { return static_cast<int>(tuples_.size()); }
    int tuple_index(int a, int b, int c) const {
        if (a < 0 || b < 0 || c < 0 || a > 3 || b > 3 || c > 3) return -1;
        return index_[a][b][c];
    }

    double bond(const State& X) const {
        double w0 = p_[0].real() + cv_[0].real() * X.v + dr_[0].real() * X.r;
        return std::exp(w0);
    }

    // Central moments E[(x_T - x_t)^a v_T^b r_T^c D | X_t] for every tuple.
    void eval_central(const State& X, double* cm) const {
        double g1 = 0.0, g2 = 0.0;
        if (model_.family == ModelFamily::HHW && tau_ > 0.0) g_values(X.v, g1, g2);
        const int nt = n_tuples();
        cplx w[kMaxTuples];
        for (int k = 0; k < nt; ++k)
            w[k] = p_[k] + cv_[k] * X.v + dr_[k] * X.r + q1_[k] * g1 + q2_[k] * g2;
        cplx T[kMaxTuples];
        T[0] = 1.0;
        for (const auto& step : plan_) {
            cplx acc(0.0, 0.0);
            for (const auto& t : step.terms) acc += t.coef * w[t.w_idx] * T[t.t_idx];
            T[step.target] = acc;
        }
        const double b = std::exp(w[0].real());
        for (int k = 0; k < nt; ++k)
            cm[k] = (detail::i_pow(-tuples_[k].total() & 3) * T[k]).real() * b;
    }

    // Raw discounted moments for every tuple at the given state.
    void eval_all(const State& X, double* out) const {
        double cm[kMaxTuples];
        eval_central(X, cm);
        double xp[4] = {1.0, X.x, X.x * X.x, X.x * X.x * X.x};
        const int nt = n_tuples();
        for (int k = 0; k < nt; ++k) {
            const auto& e = tuples_[k];
            double acc = 0.0;
            for (int j = 0; j <= e.a; ++j)
                acc += binomial(e.a, j) * xp[j] * cm[tuple_index(e.a - j, e.b, e.c)];
            out[k] = acc;
        }
    }

    double moment(const Exponents& e, const State& X) const {
        validate_request(model_, e);
        SGBM_REQUIRE(e.total() <= degree_, "MomentEvaluator: degree above build cap");
        double out[kMaxTuples];
        eval_all(X, out);
        return out[tuple_index(e.a, e.b, e.c)];
    }

    // Coefficients c_j with E[x_T^a v^b r^c D | X] = sum_j c_j x_t^j.
    std::vector<double> x_expansion(const Exponents& e, const State& X) const {
        validate_request(model_, e);
        SGBM_REQUIRE(e.total() <= degree_, "MomentEvaluator: degree above build cap");
        double cm[kMaxTuples];
        eval_central(X, cm);
        std::vector<double> coef(e.a + 1);
        for (int j = 0; j <= e.a; ++j)
            coef[j] = binomial(e.a, j) * cm[tuple_index(e.a - j, e.b, e.c)];
        return coef;
    }

    static constexpr int kMaxTuples = 24;

private:
    struct Term {
        double coef;
        int w_idx;
        int t_idx;
    };
    struct Step {
        int target;
        std::vector<Term> terms;
    };

    void enumerate_tuples() {
        for (auto& plane : index_)
            for (auto& row : plane) row.fill(-1);
        const bool has_v = model_.has_variance(), has_r = model_.has_stochastic_rate();
        for (int tot = 0; tot <= degree_; ++tot)
            for (int a = tot; a >= 0; --a)
                for (int b = tot - a; b >= 0; --b) {
                    const int c = tot - a - b;
                    if ((b > 0 && !has_v) || (c > 0 && !has_r)) continue;
                    index_[a][b][c] = static_cast<int>(tuples_.size());
                    tuples_.push_back({a, b, c});
                }
        SGBM_REQUIRE(n_tuples() <= kMaxTuples, "MomentEvaluator: tuple overflow");
    }

    // W(u; X) = A0(u) + C(u) v + D(u) r + a1(u) G1 + a2(u) G2 (+ i u1 x, which
    // the central form drops). Derivatives of each coefficient at u = 0.
    void build_coefficient_tables() {
        const ModelSpec& m = model_;
        const double tau = tau_;
        std::function<cplx(std::array<double, 3>)> A0, C, D, a1, a2;
        const cplx zero(0.0, 0.0);
        C = [&](std::array<double, 3>) { return zero; };
        D = C;
        a1 = C;
        a2 = C;
        switch (m.family) {
            case ModelFamily::BS:
                A0 = [m, tau](std::array<double, 3> u) {
                    const cplx iu1(0.0, u[0]);
                    return m.r0 * (iu1 - 1.0) * tau +
                           0.5 * m.sigma * m.sigma * iu1 * (iu1 - 1.0) * tau;
                };
                break;
            case ModelFamily::Heston:
                A0 = [m, tau](std::array<double, 3> u) {
                    const auto h = detail::heston_exponent(m.kappa, m.gamma, m.vbar,
                                                           m.rho_xv, u[0], u[1], tau);
                    return h.I1 + m.r0 * cplx(-1.0, u[0]) * tau;
                };
                C = [m, tau](std::array<double, 3> u) {
                    return detail::heston_exponent(m.kappa, m.gamma, m.vbar, m.rho_xv,
                                                   u[0], u[1], tau)
                        .Cbar;
                };
                break;
            case ModelFamily::BSHW:
                A0 = [m, tau](std::array<double, 3> u) {
                    const auto hw =
                        detail::hw_exponent(m.lambda, m.theta, m.eta, u[0], u[2], tau);
                    const cplx iu1(0.0, u[0]);
                    const double em1 = std::expm1(-m.lambda * tau);
                    const cplx iu1u12 = cplx(u[0] * u[0], u[0]);
                    const cplx cross = m.eta * m.sigma * m.rho_xr / m.lambda *
                                       (-iu1u12 / m.lambda * (m.lambda * tau + em1) +
                                        u[0] * u[2] * em1);
                    return 0.5 * m.sigma * m.sigma * iu1 * (iu1 - 1.0) * tau +
                           hw.I_theta + hw.I_eta + cross;
                };
                D = [m, tau](std::array<double, 3> u) {
                    return detail::hw_exponent(m.lambda, m.theta, m.eta, u[0], u[2], tau)
                        .Dbar;
                };
                break;
            case ModelFamily::HHW:
                A0 = [m, tau](std::array<double, 3> u) {
                    const auto h = detail::heston_exponent(m.kappa, m.gamma, m.vbar,
                                                           m.rho_xv, u[0], u[1], tau);
                    const auto hw =
                        detail::hw_exponent(m.lambda, m.theta, m.eta, u[0], u[2], tau);
                    return h.I1 + hw.I_theta + hw.I_eta;
                };
                C = [m, tau](std::array<double, 3> u) {
                    return detail::heston_exponent(m.kappa, m.gamma, m.vbar, m.rho_xv,
                                                   u[0], u[1], tau)
                        .Cbar;
                };
                D = [m, tau](std::array<double, 3> u) {
                    return detail::hw_exponent(m.lambda, m.theta, m.eta, u[0], u[2], tau)
                        .Dbar;
                };
                a1 = [m](std::array<double, 3> u) {
                    return -m.eta * m.rho_xr / m.lambda * cplx(u[0] * u[0], u[0]);
                };
                a2 = [m](std::array<double, 3> u) {
                    return cplx(-m.eta * m.rho_xr * u[0] * u[2], 0.0);
                };
                break;
        }
        const int nt = n_tuples();
        p_.resize(nt);
        cv_.resize(nt);
        dr_.resize(nt);
        q1_.resize(nt);
        q2_.resize(nt);
        for (int k = 0; k < nt; ++k) {
            const std::array<int, 3> al = {tuples_[k].a, tuples_[k].b, tuples_[k].c};
            if (tau_ == 0.0) {
                // Phi = exp(i u . X): A0 = 0, C = i u2, D = i u3
                p_[k] = zero;
                cv_[k] = (al == std::array<int, 3>{0, 1, 0}) ? cplx(0.0, 1.0) : zero;
                dr_[k] = (al == std::array<int, 3>{0, 0, 1}) ? cplx(0.0, 1.0) : zero;
                q1_[k] = q2_[k] = zero;
                continue;
            }
            p_[k] = detail::fd_partial(A0, al);
            cv_[k] = detail::fd_partial(C, al);
            dr_[k] = detail::fd_partial(D, al);
            q1_[k] = detail::fd_partial(a1, al);
            q2_[k] = detail::fd_partial(a2, al);
        }
    }

    void build_plan() {
        plan_.clear();
        for (int k = 1; k < n_tuples(); ++k) {
            const Exponents& al = tuples_[k];
            int j;
            Exponents ap = al;
            if (al.a > 0) {
                j = 0;
                ap.a -= 1;
            } else if (al.b > 0) {
                j = 1;
                ap.b -= 1;
            } else {
                j = 2;
                ap.c -= 1;
            }
            Step step;
            step.target = k;
            for (int ba = 0; ba <= ap.a; ++ba)
                for (int bb = 0; bb <= ap.b; ++bb)
                    for (int bc = 0; bc <= ap.c; ++bc) {
                        Term t;
                        t.coef = binomial(ap.a, ba) * binomial(ap.b, bb) *
                                 binomial(ap.c, bc);
                        const int wa = ba + (j == 0), wb = bb + (j == 1),
                                  wc = bc + (j == 2);
                        t.w_idx = tuple_index(wa, wb, wc);
                        t.t_idx = tuple_index(ap.a - ba, ap.b - bb, ap.c - bc);
                        step.terms.push_back(t);
                    }
            plan_.push_back(std::move(step));
        }
    }

    void build_g_splines(double v_max_hint) {
        const double v_hi =
            std::max({v_max_hint * 1.05, 6.0 * std::max(model_.v0, model_.vbar), 0.5});
        const int n = 513;
        const double h = v_hi / (n - 1);
        std::vector<double> y1(n), y2(n);
        for (int i = 0; i < n; ++i) {
            auto [g1, g2] = g_integrals(model_.kappa, model_.gamma, model_.vbar,
                                        model_.lambda, i * h, tau_,
                                        opts_.g_quad_intervals);
            y1[i] = g1;
            y2[i] = g2;
        }
        g1_spline_ = detail::UniformSpline(0.0, h, std::move(y1));
        g2_spline_ = detail::UniformSpline(0.0, h, std::move(y2));
        has_splines_ = true;
    }

    void g_values(double v, double& g1, double& g2) const {
        if (has_splines_ && g1_spline_.covers(v)) {
            g1 = g1_spline_(v);
            g2 = g2_spline_(v);
            return;
        }
        auto [a, b] = g_integrals(model_.kappa, model_.gamma, model_.vbar,
                                  model_.lambda, v, tau_, opts_.g_quad_intervals);
        g1 = a;
        g2 = b;
    }

    ModelSpec model_;
    double tau_;
    int degree_;
    DchfOptions opts_;
    std::vector<Exponents> tuples_;
    std::array<std::array<std::array<int, 4>, 4>, 4> index_;
    std::vector<cplx> p_, cv_, dr_, q1_, q2_;
    std::vector<Step> plan_;
    bool has_splines_ = false;
    detail::UniformSpline g1_spline_, g2_spline_;
};

enum class MomentBackend { ClosedForm, DchfFd };

inline double discounted_moment(const ModelSpec& m, const Exponents& e, double tau,
                                const State& X,
                                MomentBackend backend = MomentBackend::DchfFd) {
    validate_request(m, e);
    if (backend == MomentBackend::ClosedForm) return heston_closed_moment(m, e, tau, X);
    return moment_dchf_fd(m, e, tau, X);
}

// Validation mode: evaluates both backends and fails loudly on disagreement.
inline double discounted_moment_checked(const ModelSpec& m, const Exponents& e,
                                        double tau, const State& X,
                                        double rel_tol = 1e-6) {
    const double a = heston_closed_moment(m, e, tau, X);
    const double b = moment_dchf_fd(m, e, tau, X);
    const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
    if (std::abs(a - b) > rel_tol * scale)
        throw Error("discounted_moment: backend disagreement beyond tolerance");
    return a;
}

}  // namespace sgbm
