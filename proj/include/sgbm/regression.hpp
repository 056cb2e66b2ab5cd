// Monomial bases (the tabulated orderings), per-bundle least squares with
// column standardization and minimum-norm handling of rank deficiency, and
// the piecewise-polynomial projection probe used for convergence studies.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sgbm/common.hpp"

namespace sgbm {

// Exponents of one monomial over the model's state dimensions (up to 3).
struct Monomial {
    std::array<int, 3> e{0, 0, 0};
    int degree() const { return e[0] + e[1] + e[2]; }
};

struct BasisSpec {
    int dims = 2;
    int order = 2;
    std::vector<Monomial> monomials;  // first entry is the constant
    int size() const { return static_cast<int>(monomials.size()); }
};

// H = (n+p)! / (n! p!)
inline int basis_count(int n, int p) {
    return static_cast<int>(binomial(n + p, p) + 0.5);
}

inline BasisSpec enumerate_basis(int n, int p) {
    SGBM_REQUIRE(n >= 1 && n <= 3, "enumerate_basis: n in {1,2,3}");
    SGBM_REQUIRE(p >= 0 && p <= 3, "enumerate_basis: p in 0..3");
    SGBM_REQUIRE(!(n == 3 && p == 3), "enumerate_basis: p <= 2 when n = 3");
    BasisSpec b;
    b.dims = n;
    b.order = p;
    if (n == 1) {
        for (int d = 0; d <= p; ++d) b.monomials.push_back({{d, 0, 0}});
    } else if (n == 2) {
        // {1, x, v, x^2, x v, v^2, x^3, x^2 v, x v^2, v^3}
        for (int d = 0; d <= p; ++d)
            for (int a = d; a >= 0; --a) b.monomials.push_back({{a, d - a, 0}});
    } else {
        // p=1: {1, x, v, r};  p=2: {1, x, x^2, v, v^2, r, r^2, xv, xr, rv}
        static const std::array<int, 3> order2[] = {
            {0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 2, 0},
            {0, 0, 1}, {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
        if (p >= 0) b.monomials.push_back({{0, 0, 0}});
        if (p == 1) {
            b.monomials.push_back({{1, 0, 0}});
            b.monomials.push_back({{0, 1, 0}});
            b.monomials.push_back({{0, 0, 1}});
        } else if (p == 2) {
            b.monomials.clear();
            for (const auto& e : order2) b.monomials.push_back({e});
        }
    }
    SGBM_REQUIRE(b.size() == basis_count(n, p), "enumerate_basis: count mismatch");
    return b;
}

struct FitDiagnostics {
    int rank = 0;
    bool rank_deficient = false;
    double condition = 0.0;  // R diagonal ratio of the standardized system
};

// OLS of (possibly several) target columns on the monomial design matrix.
// Columns are centered/scaled before the solve and the coefficients mapped
// back to the raw basis; requires column 0 of psi to be the constant.
inline Eigen::MatrixXd fit_bundle(const Eigen::MatrixXd& psi,
                                  const Eigen::MatrixXd& targets,
                                  FitDiagnostics* diag = nullptr) {
    const auto rows = psi.rows();
    const auto H = psi.cols();
    SGBM_REQUIRE(rows == targets.rows(), "fit_bundle: row mismatch");
    SGBM_REQUIRE(rows >= 1, "fit_bundle: empty bundle");

    Eigen::MatrixXd Z(rows, H);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(H), sc = Eigen::VectorXd::Ones(H);
    Z.col(0).setOnes();
    for (Eigen::Index k = 1; k < H; ++k) {
        mu(k) = psi.col(k).mean();
        const double sd =
            std::sqrt((psi.col(k).array() - mu(k)).square().sum() /
                      std::max<double>(1.0, static_cast<double>(rows - 1)));
        const double rms = std::sqrt(psi.col(k).squaredNorm() /
                                     static_cast<double>(rows));
        if (sd <= 1e-12 * std::max(rms, 1e-300)) {
            // constant up to rounding noise: standardizing would amplify the
            // noise into a full-strength column; drop it instead
            Z.col(k).setZero();
            sc(k) = 1.0;
        } else {
            sc(k) = sd;
            Z.col(k) = (psi.col(k).array() - mu(k)) / sc(k);
        }
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Z);
    const Eigen::MatrixXd b = cod.solve(targets);
    if (diag) {
        diag->rank = static_cast<int>(cod.rank());
        diag->rank_deficient = cod.rank() < H;
        diag->condition = std::numeric_limits<double>::infinity();
        if (cod.rank() >= 1) {
            const Eigen::MatrixXd R = cod.matrixT();
            const double r0 = std::abs(R(0, 0));
            const double rk = std::abs(R(cod.rank() - 1, cod.rank() - 1));
            if (rk > 0.0) diag->condition = r0 / rk;
        }
    }

    Eigen::MatrixXd beta = b;
    for (Eigen::Index k = 1; k < H; ++k) {
        beta.row(k) = b.row(k) / sc(k);
        beta.row(0) -= beta.row(k) * mu(k);
    }
    return beta;
}

// ---------------------------------------------------------------------------
// Piecewise L2 projection probe (empirical convergence of the bundle bound).

namespace detail {

struct GaussLegendre {
    std::vector<double> x, w;  // nodes/weights on [-1, 1]
    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int k = 0; k < n; ++k) {
            double xi = std::cos(M_PI * (k + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = xi;
                for (int l = 2; l <= n; ++l) {
                    const double p2 = ((2.0 * l - 1.0) * xi * p1 - (l - 1.0) * p0) / l;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
                const double dx = p1 / dp;
                xi -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            double p0 = 1.0, p1 = xi;
            for (int l = 2; l <= n; ++l) {
                const double p2 = ((2.0 * l - 1.0) * xi * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
            x[k] = xi;
            w[k] = 2.0 / ((1.0 - xi * xi) * dp * dp);
        }
    }
};

inline double legendre_p(int l, double t) {
    double p0 = 1.0, p1 = t;
    if (l == 0) return p0;
    for (int k = 2; k <= l; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

}  // namespace detail

// L2 error of projecting f onto degree-p polynomials on J equal subintervals
// of [a, b], via Legendre coefficients under 32-point Gauss quadrature.
inline double projection_error_probe(const std::function<double(double)>& f, double a,
                                     double b, int p, int J) {
    SGBM_REQUIRE(J >= 1 && p >= 0, "projection_error_probe: bad arguments");
    static const detail::GaussLegendre gl(32);
    const double h = (b - a) / J;
    double err2 = 0.0;
    for (int i = 0; i < J; ++i) {
        const double lo = a + i * h, mid = lo + 0.5 * h, half = 0.5 * h;
        double f2 = 0.0;
        std::vector<double> c(p + 1, 0.0);
        for (std::size_t k = 0; k < gl.x.size(); ++k) {
            const double t = gl.x[k];
            const double fx = f(mid + half * t);
            f2 += gl.w[k] * fx * fx;
            for (int l = 0; l <= p; ++l) c[l] += gl.w[k] * fx * detail::legendre_p(l, t);
        }
        // ||P_l||^2 on [-1,1] is 2/(2l+1); interval scaling by `half`
        double proj2 = 0.0;
        for (int l = 0; l <= p; ++l) proj2 += c[l] * c[l] * (2.0 * l + 1.0) / 2.0;
        err2 += half * std::max(0.0, f2 - proj2);
    }
    return std::sqrt(err2);
}

}  // namespace sgbm
