// Cross-sectional bundling of simulated paths: recursive bifurcation with a
// decorrelating rotation, and equal-number (quantile) bundling. Rules fitted
// on the first pass are persisted so the path-estimator pass can classify a
// fresh path set without re-fitting.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sgbm/common.hpp"

namespace sgbm {

enum class BundleMethod { BifurcationRotation, EqualNumber };

struct Rotation {
    int dims = 2;
    bool skipped = false;  // var(d1) == 0, rotation left as identity
    double cos_a1 = 1.0, sin_a1 = 0.0;
    double cos_a2 = 1.0, sin_a2 = 0.0;
    double slope1 = 0.0, slope2 = 0.0;
    // optional per-column standardization applied before rotating (persisted
    // with the rule so the path-estimator pass replays it)
    bool standardized = false;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    std::array<double, 3> scale{1.0, 1.0, 1.0};
};

namespace detail {

inline double sign_pos(double k) { return k < 0.0 ? -1.0 : 1.0; }  // sign(0) := +1

struct CovStats {
    double var1 = 0.0;
    double cov12 = 0.0;
    double cov13 = 0.0;
};

inline CovStats cov_stats(std::span<const double> d1, std::span<const double> d2,
                          std::span<const double> d3) {
    const std::size_t n = d1.size();
    double m1 = 0.0, m2 = 0.0, m3 = 0.0;
    for (std::size_t i = 0; i < n; ++i) m1 += d1[i];
    m1 /= n;
    if (!d2.empty()) {
        for (std::size_t i = 0; i < n; ++i) m2 += d2[i];
        m2 /= n;
    }
    if (!d3.empty()) {
        for (std::size_t i = 0; i < n; ++i) m3 += d3[i];
        m3 /= n;
    }
    CovStats s;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = d1[i] - m1;
        s.var1 += a * a;
        if (!d2.empty()) s.cov12 += a * (d2[i] - m2);
        if (!d3.empty()) s.cov13 += a * (d3[i] - m3);
    }
    return s;
}

inline void angle_from_slope(double k, double& c, double& s) {
    c = std::sqrt(1.0 / (1.0 + k * k)) * sign_pos(k);
    s = std::sqrt(k * k / (1.0 + k * k));
}

}  // namespace detail

// Slope k1 = cov(d1,d2)/var(d1) from the sample cross-section.
inline Rotation fit_rotation2(std::span<const double> d1, std::span<const double> d2) {
    SGBM_REQUIRE(d1.size() == d2.size() && d1.size() >= 2,
                 "fit_rotation2: columns must match and hold >= 2 points");
    Rotation r;
    r.dims = 2;
    const auto s = detail::cov_stats(d1, d2, {});
    if (s.var1 <= 0.0) {
        r.skipped = true;
        return r;
    }
    r.slope1 = s.cov12 / s.var1;
    detail::angle_from_slope(r.slope1, r.cos_a1, r.sin_a1);
    return r;
}

inline Rotation fit_rotation3(std::span<const double> d1, std::span<const double> d2,
                              std::span<const double> d3) {
    SGBM_REQUIRE(d1.size() == d2.size() && d1.size() == d3.size() && d1.size() >= 2,
                 "fit_rotation3: columns must match and hold >= 2 points");
    Rotation r;
    r.dims = 3;
    const auto s = detail::cov_stats(d1, d2, d3);
    if (s.var1 <= 0.0) {
        r.skipped = true;
        return r;
    }
    r.slope1 = s.cov12 / s.var1;
    r.slope2 = s.cov13 / s.var1;
    detail::angle_from_slope(r.slope1, r.cos_a1, r.sin_a1);
    detail::angle_from_slope(r.slope2, r.cos_a2, r.sin_a2);
    return r;
}

// In-place rotation of point (q1, q2[, q3]).
inline void apply_rotation(const Rotation& r, double& q1, double& q2, double& q3) {
    if (r.skipped) return;
    if (r.standardized) {
        q1 = (q1 - r.center[0]) / r.scale[0];
        q2 = (q2 - r.center[1]) / r.scale[1];
        q3 = (q3 - r.center[2]) / r.scale[2];
    }
    if (r.dims == 2) {
        const double a = r.cos_a1 * q1 + r.sin_a1 * q2;
        const double b = -r.sin_a1 * q1 + r.cos_a1 * q2;
        q1 = a;
        q2 = b;
        return;
    }
    const double a = r.cos_a1 * r.sin_a2 * q1 + r.sin_a1 * q2 - r.cos_a1 * r.cos_a2 * q3;
    const double b = -r.sin_a1 * r.sin_a2 * q1 + r.cos_a1 * q2 + r.sin_a1 * r.cos_a2 * q3;
    const double c = r.cos_a2 * q1 + r.sin_a2 * q3;
    q1 = a;
    q2 = b;
    q3 = c;
}

// 3-d rotation fitted on per-column standardized data: the raw x, v, r
// cross-sections differ by orders of magnitude in spread, which would let the
// dominant column pollute every rotated coordinate. The rotation matrix is
// unchanged; the standardization is recorded for replay.
inline Rotation fit_rotation3_standardized(std::span<const double> d1,
                                           std::span<const double> d2,
                                           std::span<const double> d3) {
    const std::size_t n = d1.size();
    Rotation pre;
    pre.dims = 3;
    pre.standardized = true;
    const std::span<const double> cols[3] = {d1, d2, d3};
    std::vector<double> z1(n), z2(n), z3(n);
    std::vector<double>* zs[3] = {&z1, &z2, &z3};
    for (int d = 0; d < 3; ++d) {
        const MeanStd s = mean_std(cols[d]);
        pre.center[d] = s.mean;
        pre.scale[d] = s.sd > 1e-300 ? s.sd : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            (*zs[d])[i] = (cols[d][i] - pre.center[d]) / pre.scale[d];
    }
    Rotation r = fit_rotation3(z1, z2, z3);
    r.standardized = true;
    r.center = pre.center;
    r.scale = pre.scale;
    return r;
}

inline std::vector<std::vector<double>> rotate_columns(
    const Rotation& r, const std::vector<std::vector<double>>& cols) {
    SGBM_REQUIRE(static_cast<int>(cols.size()) == r.dims || r.dims <= 1,
                 "rotate_columns: dimension mismatch");
    std::vector<std::vector<double>> out = cols;
    if (r.skipped || cols.size() < 2) return out;
    const std::size_t n = cols[0].size();
    for (std::size_t i = 0; i < n; ++i) {
        double q1 = cols[0][i];
        double q2 = cols[1][i];
        double q3 = cols.size() > 2 ? cols[2][i] : 0.0;
        apply_rotation(r, q1, q2, q3);
        out[0][i] = q1;
        out[1][i] = q2;
        if (cols.size() > 2) out[2][i] = q3;
    }
    return out;
}

// Persisted classification rule: rotation angles plus either the bifurcation
// threshold tree (per-level, per-cell means) or the equal-number quantile
// boundaries per nesting level.
struct BundleRule {
    BundleMethod method = BundleMethod::BifurcationRotation;
    int dims = 2;
    int n_bundles = 0;
    Rotation rotation;
    // bifurcation: level_means[l][cell][d]; level_valid marks non-empty cells
    int iterations = 0;
    std::vector<std::vector<std::array<double, 3>>> level_means;
    std::vector<std::vector<std::uint8_t>> level_valid;
    // equal-number
    std::array<int, 3> splits{1, 1, 1};
    std::vector<double> bounds1;
    std::vector<std::vector<double>> bounds2;
    std::vector<std::vector<double>> bounds3;
};

struct BundleResult {
    std::vector<int> bundle;  // per (active) path
    int n_bundles = 0;
    int n_empty = 0;  // flagged, not an error
    BundleRule rule;
};

// Recursive bifurcation: j iterations of per-cell mean splits along every
// dimension, (2^n)^j bundles. Columns are the (already rotated) coordinates.
inline BundleResult recursive_bifurcation(const std::vector<std::vector<double>>& cols,
                                          int iterations) {
    const int n_dims = static_cast<int>(cols.size());
    SGBM_REQUIRE(n_dims >= 1 && n_dims <= 3, "recursive_bifurcation: 1-3 dims");
    SGBM_REQUIRE(iterations >= 1, "recursive_bifurcation: iterations >= 1");
    const std::size_t n = cols[0].size();

    BundleResult out;
    out.rule.method = BundleMethod::BifurcationRotation;
    out.rule.dims = n_dims;
    out.rule.iterations = iterations;
    out.bundle.assign(n, 0);

    int cells = 1;
    for (int level = 0; level < iterations; ++level) {
        std::vector<std::array<double, 3>> sums(cells, {0.0, 0.0, 0.0});
        std::vector<std::int64_t> counts(cells, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = out.bundle[i];
            ++counts[c];
            for (int d = 0; d < n_dims; ++d) sums[c][d] += cols[d][i];
        }
        std::vector<std::array<double, 3>> means(cells, {0.0, 0.0, 0.0});
        std::vector<std::uint8_t> valid(cells, 0);
        for (int c = 0; c < cells; ++c) {
            if (counts[c] > 0) {
                valid[c] = 1;
                for (int d = 0; d < n_dims; ++d)
                    means[c][d] = sums[c][d] / static_cast<double>(counts[c]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int c = out.bundle[i];
            int child = 0;
            for (int d = 0; d < n_dims; ++d)
                if (cols[d][i] > means[c][d]) child |= 1 << d;
            out.bundle[i] = (c << n_dims) | child;
        }
        out.rule.level_means.push_back(std::move(means));
        out.rule.level_valid.push_back(std::move(valid));
        cells <<= n_dims;
    }
    out.n_bundles = cells;
    out.rule.n_bundles = cells;
    std::vector<std::uint8_t> seen(cells, 0);
    for (int b : out.bundle) seen[b] = 1;
    for (int c = 0; c < cells; ++c)
        if (!seen[c]) ++out.n_empty;
    return out;
}

namespace detail {

// Split [0, n) ranked positions into j near-equal chunks, larger chunks first.
inline std::vector<std::size_t> chunk_offsets(std::size_t n, int j) {
    std::vector<std::size_t> off(j + 1, 0);
    const std::size_t base = n / j, rem = n % j;
    for (int g = 0; g < j; ++g)
        off[g + 1] = off[g] + base + (static_cast<std::size_t>(g) < rem ? 1 : 0);
    return off;
}

}  // namespace detail

// Quantile bundling: rank by column 0 into splits[0] groups, re-rank each
// group by column 1 into splits[1], optionally a third level. Ranking ties
// break by path index (stable).
inline BundleResult equal_number(const std::vector<std::vector<double>>& cols,
                                 std::array<int, 3> splits) {
    const int n_dims = static_cast<int>(cols.size());
    SGBM_REQUIRE(n_dims >= 1 && n_dims <= 3, "equal_number: 1-3 dims");
    const std::size_t n = cols[0].size();
    int levels = 0;
    std::int64_t product = 1;
    for (int d = 0; d < 3; ++d) {
        SGBM_REQUIRE(splits[d] >= 1, "equal_number: splits must be >= 1");
        if (d < n_dims && splits[d] > 1) levels = d + 1;
        if (d < n_dims) product *= splits[d];
    }
    SGBM_REQUIRE(product <= static_cast<std::int64_t>(n),
                 "equal_number: product of splits exceeds active paths");

    BundleResult out;
    out.rule.method = BundleMethod::EqualNumber;
    out.rule.dims = n_dims;
    out.rule.splits = splits;
    out.bundle.assign(n, 0);

    const int j1 = splits[0], j2 = n_dims > 1 ? splits[1] : 1,
              j3 = n_dims > 2 ? splits[2] : 1;
    out.n_bundles = j1 * j2 * j3;
    out.rule.n_bundles = out.n_bundles;
    out.rule.bounds2.assign(j1, {});
    out.rule.bounds3.assign(static_cast<std::size_t>(j1) * j2, {});

    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    auto by_col = [&](const std::vector<double>& col) {
        return [&col](std::uint32_t a, std::uint32_t b) {
            if (col[a] != col[b]) return col[a] < col[b];
            return a < b;
        };
    };
    auto cut_bounds = [&](const std::vector<double>& col, std::size_t lo,
                          std::size_t hi, int j, std::vector<double>& bounds) {
        const auto off = detail::chunk_offsets(hi - lo, j);
        bounds.resize(j - 1);
        for (int g = 0; g + 1 < j; ++g) {
            const double left = col[order[lo + off[g + 1] - 1]];
            const double right = col[order[lo + off[g + 1]]];
            bounds[g] = 0.5 * (left + right);
        }
        return off;
    };

    std::sort(order.begin(), order.end(), by_col(cols[0]));
    const auto off1 = cut_bounds(cols[0], 0, n, j1, out.rule.bounds1);
    for (int g1 = 0; g1 < j1; ++g1) {
        const std::size_t lo1 = off1[g1], hi1 = off1[g1 + 1];
        if (j2 > 1 || n_dims > 1)
            std::sort(order.begin() + lo1, order.begin() + hi1, by_col(cols[1]));
        std::vector<std::size_t> off2{0, hi1 - lo1};
        if (n_dims > 1)
            off2 = cut_bounds(cols[1], lo1, hi1, j2, out.rule.bounds2[g1]);
        for (int g2 = 0; g2 < j2; ++g2) {
            const std::size_t lo2 = lo1 + off2[g2], hi2 = lo1 + off2[g2 + 1];
            std::vector<std::size_t> off3{0, hi2 - lo2};
            if (n_dims > 2) {
                std::sort(order.begin() + lo2, order.begin() + hi2, by_col(cols[2]));
                off3 = cut_bounds(cols[2], lo2, hi2, j3,
                                  out.rule.bounds3[static_cast<std::size_t>(g1) * j2 + g2]);
            }
            for (int g3 = 0; g3 < j3; ++g3) {
                const int id = (g1 * j2 + g2) * j3 + g3;
                for (std::size_t k = lo2 + off3[g3]; k < lo2 + off3[g3 + 1]; ++k)
                    out.bundle[order[k]] = id;
            }
        }
    }
    return out;
}

namespace detail {

inline int locate(const std::vector<double>& bounds, double v) {
    // group index: first g with v <= bounds[g], else last group
    int g = 0;
    while (g < static_cast<int>(bounds.size()) && v > bounds[g]) ++g;
    return g;
}

}  // namespace detail

// Applies a persisted rule to (possibly fresh) data; no re-fitting. Values
// outside the fitted range clamp to the nearest boundary bundle.
inline std::vector<int> classify(const BundleRule& rule,
                                 const std::vector<std::vector<double>>& cols) {
    SGBM_REQUIRE(static_cast<int>(cols.size()) == rule.dims,
                 "classify: rule dimensionality must match data");
    const std::size_t n = cols[0].size();
    std::vector<int> bundle(n, 0);
    if (rule.method == BundleMethod::BifurcationRotation) {
        for (std::size_t i = 0; i < n; ++i) {
            double q1 = cols[0][i];
            double q2 = rule.dims > 1 ? cols[1][i] : 0.0;
            double q3 = rule.dims > 2 ? cols[2][i] : 0.0;
            apply_rotation(rule.rotation, q1, q2, q3);
            const double q[3] = {q1, q2, q3};
            int cell = 0;
            for (int level = 0; level < rule.iterations; ++level) {
                int child = 0;
                if (rule.level_valid[level][cell]) {
                    const auto& mean = rule.level_means[level][cell];
                    for (int d = 0; d < rule.dims; ++d)
                        if (q[d] > mean[d]) child |= 1 << d;
                }
                cell = (cell << rule.dims) | child;
            }
            bundle[i] = cell;
        }
        return bundle;
    }
    const int j2 = rule.dims > 1 ? rule.splits[1] : 1;
    const int j3 = rule.dims > 2 ? rule.splits[2] : 1;
    for (std::size_t i = 0; i < n; ++i) {
        const int g1 = detail::locate(rule.bounds1, cols[0][i]);
        int g2 = 0, g3 = 0;
        if (rule.dims > 1) g2 = detail::locate(rule.bounds2[g1], cols[1][i]);
        if (rule.dims > 2)
            g3 = detail::locate(rule.bounds3[static_cast<std::size_t>(g1) * j2 + g2],
                                cols[2][i]);
        bundle[i] = (g1 * j2 + g2) * j3 + g3;
    }
    return bundle;
}

// Indices of paths still alive at a date (barrier knockouts and exercised
// paths carry status 0).
inline std::vector<std::uint32_t> active_indices(std::span<const std::uint8_t> alive) {
    std::vector<std::uint32_t> idx;
    idx.reserve(alive.size());
    for (std::size_t i = 0; i < alive.size(); ++i)
        if (alive[i]) idx.push_back(static_cast<std::uint32_t>(i));
    return idx;
}

}  // namespace sgbm
