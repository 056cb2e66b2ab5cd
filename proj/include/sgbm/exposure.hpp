// SGBM backward iteration: bundle the cross-section at each monitoring date,
// regress next-date option values on next-date monomials per bundle, replace
// monomials by their discounted conditional moments to obtain continuation
// values, and apply the contract rule. Produces the direct-estimator exposure
// profiles with Greeks, the persisted per-date rules/coefficients, and the
// out-of-sample path estimator driven by a second simulation.
//
// Contracts sharing one simulation can be swept as a batch (same kind and
// barrier; strikes and payoffs may differ): the per-bundle decomposition and
// the per-path moment vector are computed once and reused for every target
// column.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "sgbm/bundling.hpp"
#include "sgbm/credit.hpp"
#include "sgbm/model.hpp"
#include "sgbm/moments.hpp"
#include "sgbm/path_engine.hpp"
#include "sgbm/regression.hpp"

namespace sgbm {

struct SweepConfig {
    int order = 2;  // polynomial order p
    BundleMethod method = BundleMethod::BifurcationRotation;
    int bifurcation_iters = 3;           // J = (2^n)^iters
    std::array<int, 3> splits{8, 8, 1};  // equal-number splits, priority order
    int threads = 1;
    int g_quad_intervals = 64;
    CreditSpec credit;
    bool keep_assignments = false;  // retain per-date bundle ids (CSV dumps)
};

struct DateCoefficients {
    BundleRule rule;
    std::vector<int> group_of_bundle;           // bundle id -> regression group
    std::vector<Eigen::MatrixXd> group_beta;    // per group: H x n_contracts
    int n_groups = 0;
    int n_empty_bundles = 0;
    int n_rank_deficient = 0;
};

struct CoefficientTable {
    BasisSpec basis;
    std::vector<DateCoefficients> dates;  // index m = 0..M-1
};

struct ExposureReport {
    std::string estimator;  // "direct" or "path"
    std::vector<double> t;
    std::vector<double> ee, ee_star, pfe, delta_ee, gamma_ee;
    double v0 = 0.0;
    double cva = 0.0;
    std::uint64_t seed = 0;
    int n_paths = 0;
    int n_bundles = 0;
    int order = 0;
    double pfe_alpha = 0.975;
};

struct SweepResult {
    std::vector<ExposureReport> reports;  // one per contract
    CoefficientTable coeffs;
    std::vector<std::vector<int>> assignments;  // [date][path], kept on request
};

// Empirical nearest-rank quantile: element ceil(alpha N) (1-based) ascending.
inline double pfe_quantile(std::vector<double> exposures, double alpha) {
    SGBM_REQUIRE(alpha > 0.0 && alpha < 1.0, "pfe: alpha must lie in (0,1)");
    if (exposures.empty()) return 0.0;
    std::sort(exposures.begin(), exposures.end());
    const auto n = exposures.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(alpha * static_cast<double>(n)));
    rank = std::min(std::max<std::size_t>(rank, 1), n);
    return exposures[rank - 1];
}

namespace detail {

// Basis-indexed discounted moments phi_k plus their first and second
// x-derivatives (the derivative of a moment in x is a lower moment).
class BasisMomentProvider {
public:
    BasisMomentProvider(const ModelSpec& model, double tau, const BasisSpec& basis,
                        double v_max_hint, int g_quad)
        : model_(model) {
        DchfOptions opts;
        opts.g_quad_intervals = g_quad;
        evaluator_ = std::make_unique<MomentEvaluator>(model, tau, basis.order,
                                                       v_max_hint, opts);
        if (model.family == ModelFamily::Heston && basis.order <= 2)
            closed_ = std::make_unique<HestonClosedEval>(model, tau);
        const auto& tuples = evaluator_->tuples();
        n_tuples_ = evaluator_->n_tuples();
        tuples_ = tuples;
        for (const auto& mono : basis.monomials) {
            const Exponents e = map_exponents(model, mono);
            phi_idx_.push_back(evaluator_->tuple_index(e.a, e.b, e.c));
            dx_idx_.push_back(e.a >= 1 ? evaluator_->tuple_index(e.a - 1, e.b, e.c) : 0);
            dx_fac_.push_back(static_cast<double>(e.a));
            dxx_idx_.push_back(e.a >= 2 ? evaluator_->tuple_index(e.a - 2, e.b, e.c) : 0);
            dxx_fac_.push_back(static_cast<double>(e.a) * (e.a - 1));
        }
    }

    static Exponents map_exponents(const ModelSpec& model, const Monomial& mono) {
        Exponents e;
        e.a = mono.e[0];
        if (model.has_variance()) {
            e.b = mono.e[1];
            e.c = mono.e[2];
        } else {
            e.b = 0;
            e.c = mono.e[1];
        }
        return e;
    }

    void eval(const State& X, double* phi, double* dphi, double* d2phi) const {
        double buf[MomentEvaluator::kMaxTuples];
        if (closed_) {
            for (int t = 0; t < n_tuples_; ++t)
                buf[t] = closed_->moment(tuples_[t], X.x, X.v);
        } else {
            evaluator_->eval_all(X, buf);
        }
        const int H = static_cast<int>(phi_idx_.size());
        for (int k = 0; k < H; ++k) {
            phi[k] = buf[phi_idx_[k]];
            dphi[k] = dx_fac_[k] > 0.0 ? dx_fac_[k] * buf[dx_idx_[k]] : 0.0;
            d2phi[k] = dxx_fac_[k] > 0.0 ? dxx_fac_[k] * buf[dxx_idx_[k]] : 0.0;
        }
    }

private:
    ModelSpec model_;
    std::unique_ptr<MomentEvaluator> evaluator_;
    std::unique_ptr<HestonClosedEval> closed_;
    std::vector<Exponents> tuples_;
    int n_tuples_ = 0;
    std::vector<int> phi_idx_, dx_idx_, dxx_idx_;
    std::vector<double> dx_fac_, dxx_fac_;
};

// First monitoring date (1-based) at which a path is dead, INT_MAX if never.
inline std::vector<int> knockout_dates(const PathGrid& paths, double barrier) {
    SGBM_REQUIRE(!paths.interval_min_x.empty(),
                 "barrier sweep needs interval minima (enable at simulation)");
    const int M = paths.grid.n_intervals();
    const double lb = std::log(barrier);
    std::vector<int> kdate(paths.n_paths, std::numeric_limits<int>::max());
    for (int i = 0; i < paths.n_paths; ++i) {
        for (int k = 0; k < M; ++k) {
            if (paths.interval_min_x[k][i] <= lb) {
                kdate[i] = k + 1;
                break;
            }
        }
    }
    return kdate;
}

inline int bundle_count(const ModelSpec& model, const SweepConfig& cfg) {
    if (cfg.method == BundleMethod::BifurcationRotation)
        return 1 << (model.n_dims() * cfg.bifurcation_iters);
    int j = 1;
    for (int d = 0; d < model.n_dims(); ++d) j *= cfg.splits[d];
    return j;
}

// Bundles with fewer than max(2H, 10) paths borrow their regression from an
// enclosing parent cell (bifurcation) or merge with adjacent quantile
// bundles (equal-number).
inline std::vector<int> regression_groups(const BundleResult& bres,
                                          const std::vector<int>& occupancy, int H,
                                          int dims, int& n_groups) {
    const int J = bres.n_bundles;
    const int min_occ = std::max(2 * H, 10);
    std::vector<int> group(J, -1);
    n_groups = 0;

    if (bres.rule.method == BundleMethod::BifurcationRotation) {
        const int iters = bres.rule.iterations;
        // occupancy per node per level (level L = leaves)
        std::vector<std::vector<int>> occ(iters + 1);
        occ[iters] = occupancy;
        for (int l = iters - 1; l >= 0; --l) {
            occ[l].assign(1 << (dims * l), 0);
            for (int c = 0; c < static_cast<int>(occ[l + 1].size()); ++c)
                occ[l][c >> dims] += occ[l + 1][c];
        }
        // deepest ancestor with enough paths; (level, node) keys to group ids
        std::vector<std::vector<int>> node_group(iters + 1);
        for (int l = 0; l <= iters; ++l) node_group[l].assign(occ[l].size(), -1);
        // empty leaves resolve to their nearest sufficiently-occupied ancestor
        for (int b = 0; b < J; ++b) {
            int l = iters, node = b;
            while (l > 0 && occ[l][node] < min_occ) {
                --l;
                node >>= dims;
            }
            if (node_group[l][node] < 0) node_group[l][node] = n_groups++;
            group[b] = node_group[l][node];
        }
        return group;
    }

    // equal-number: coalesce consecutive quantile bundles
    int start = 0;
    while (start < J) {
        int end = start;
        int total = 0;
        while (end < J && total < min_occ) total += occupancy[end++];
        if (total < min_occ && n_groups > 0) {
            // underfull tail joins the previous group
            for (int b = start; b < end; ++b) group[b] = n_groups - 1;
        } else {
            for (int b = start; b < end; ++b) group[b] = n_groups;
            ++n_groups;
        }
        start = end;
    }
    return group;
}

}  // namespace detail

// Equal-number bundling ranks stock first, then the interest rate, then the
// variance; the state columns are ordered (x, v, r), hence the permutation.
inline std::array<int, 3> bundling_column_order(const ModelSpec& model,
                                                BundleMethod method) {
    if (method == BundleMethod::EqualNumber && model.family == ModelFamily::HHW)
        return {0, 2, 1};
    return {0, 1, 2};
}

inline std::vector<double> monitoring_taus(const TimeGrid& grid) {
    std::vector<double> taus(grid.n_intervals());
    for (int m = 0; m < grid.n_intervals(); ++m)
        taus[m] = grid.dates[m + 1] - grid.dates[m];
    return taus;
}

inline SweepResult backward_sweep(const ModelSpec& model, const PathGrid& paths,
                                  std::span<const ContractSpec> contracts,
                                  const SweepConfig& cfg) {
    SGBM_REQUIRE(!contracts.empty(), "backward_sweep: no contracts");
    const int M = paths.grid.n_intervals();
    const int N = paths.n_paths;
    const int C = static_cast<int>(contracts.size());
    const int dims = model.n_dims();
    const ContractKind kind = contracts[0].kind;
    for (const auto& c : contracts) {
        c.validate(model.s0);
        SGBM_REQUIRE(c.kind == kind, "backward_sweep: batch must share contract kind");
        SGBM_REQUIRE(c.kind != ContractKind::DownAndOutBarrier ||
                         c.barrier == contracts[0].barrier,
                     "backward_sweep: batch must share the barrier level");
        for (int e : c.exercise_dates)
            SGBM_REQUIRE(e <= M, "backward_sweep: exercise date outside the grid");
    }
    const bool barrier = kind == ContractKind::DownAndOutBarrier;
    const bool bermudan = kind == ContractKind::Bermudan;

    const BasisSpec basis = enumerate_basis(dims, cfg.order);
    const int H = basis.size();

    std::vector<int> kdate;
    if (barrier) kdate = detail::knockout_dates(paths, contracts[0].barrier);

    double v_max = 0.0;
    if (model.has_variance())
        for (int m = 0; m <= M; ++m)
            for (double v : paths.v[m]) v_max = std::max(v_max, v);

    // moment providers cached per interval length
    const auto taus = monitoring_taus(paths.grid);
    std::vector<std::shared_ptr<detail::BasisMomentProvider>> providers(M);
    {
        std::vector<std::pair<long long, std::shared_ptr<detail::BasisMomentProvider>>>
            cache;
        for (int m = 0; m < M; ++m) {
            const long long key = std::llround(taus[m] * 1e12);
            std::shared_ptr<detail::BasisMomentProvider> p;
            for (auto& [k, v] : cache)
                if (k == key) p = v;
            if (!p) {
                p = std::make_shared<detail::BasisMomentProvider>(
                    model, taus[m], basis, v_max, cfg.g_quad_intervals);
                cache.emplace_back(key, p);
            }
            providers[m] = p;
        }
    }

    // current option values (regression targets for the previous date)
    std::vector<std::vector<double>> V(C, std::vector<double>(N));
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < N; ++i) {
            const bool alive = !barrier || kdate[i] > M;
            V[c][i] = alive ? payoff(contracts[c], std::exp(paths.x[M][i])) : 0.0;
        }

    // Bermudan needs the whole backward history to absorb exercise forward.
    std::vector<std::vector<std::vector<double>>> store_v, store_dc, store_d2c;
    std::vector<std::vector<std::vector<std::uint8_t>>> ex_bits;  // [c][m][i]
    if (bermudan) {
        store_v.assign(C, std::vector<std::vector<double>>(M));
        store_dc.assign(C, std::vector<std::vector<double>>(M));
        store_d2c.assign(C, std::vector<std::vector<double>>(M));
        ex_bits.assign(C, std::vector<std::vector<std::uint8_t>>(M));
    }

    SweepResult result;
    result.coeffs.basis = basis;
    result.coeffs.dates.resize(M);
    if (cfg.keep_assignments) result.assignments.assign(M, std::vector<int>(N, -1));

    result.reports.assign(C, ExposureReport{});
    for (int c = 0; c < C; ++c) {
        auto& rep = result.reports[c];
        rep.estimator = "direct";
        rep.t = paths.grid.dates;
        rep.ee.assign(M + 1, 0.0);
        rep.ee_star.assign(M + 1, 0.0);
        rep.pfe.assign(M + 1, 0.0);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        rep.delta_ee.assign(M + 1, cfg.order >= 1 ? 0.0 : nan);
        rep.gamma_ee.assign(M + 1, cfg.order >= 2 ? 0.0 : nan);
        rep.seed = paths.seed;
        rep.n_paths = N;
        rep.n_bundles = detail::bundle_count(model, cfg);
        rep.order = cfg.order;
        rep.pfe_alpha = cfg.credit.pfe_alpha;
    }

    std::vector<double> dc_row(static_cast<std::size_t>(C) * N),
        d2c_row(static_cast<std::size_t>(C) * N);
    std::vector<double> scratch(N);
    // value derivatives at t_1 (or at maturity when M = 1), feeding the
    // pathwise chain for the date-0 Greeks
    std::vector<double> dv1(static_cast<std::size_t>(C) * N, 0.0),
        d2v1(static_cast<std::size_t>(C) * N, 0.0);

    auto payoff_slope = [&](int c, double spot) {
        return contracts[c].omega * (spot - contracts[c].strike) > 0.0
                   ? contracts[c].omega * spot
                   : 0.0;
    };

    for (int m = M - 1; m >= 0; --m) {
        auto& dc_entry = result.coeffs.dates[m];

        // active paths at t_m
        std::vector<std::uint32_t> act;
        act.reserve(N);
        for (int i = 0; i < N; ++i)
            if (!barrier || kdate[i] > m) act.push_back(i);

        if (act.empty()) {
            for (int c = 0; c < C; ++c) std::fill(V[c].begin(), V[c].end(), 0.0);
            if (bermudan)
                for (int c = 0; c < C; ++c) {
                    store_v[c][m].assign(N, 0.0);
                    store_dc[c][m].assign(N, 0.0);
                    store_d2c[c][m].assign(N, 0.0);
                    ex_bits[c][m].assign(N, 0);
                }
            continue;
        }

        // bundle the active cross-section at t_m (single bundle at t_0)
        const auto col_order = bundling_column_order(model, cfg.method);
        std::vector<std::vector<double>> cols(dims,
                                              std::vector<double>(act.size()));
        for (int d = 0; d < dims; ++d) {
            const auto& col = paths.column(m, col_order[d]);
            for (std::size_t j = 0; j < act.size(); ++j) cols[d][j] = col[act[j]];
        }
        BundleResult bres;
        if (m == 0) {
            bres = equal_number(cols, {1, 1, 1});
        } else if (cfg.method == BundleMethod::BifurcationRotation) {
            Rotation rot;
            if (dims == 2)
                rot = fit_rotation2(cols[0], cols[1]);
            else if (dims == 3)
                rot = fit_rotation3_standardized(cols[0], cols[1], cols[2]);
            else
                rot.skipped = true;
            rot.dims = dims;
            const auto rotated = dims >= 2 ? rotate_columns(rot, cols) : cols;
            bres = recursive_bifurcation(rotated, cfg.bifurcation_iters);
            bres.rule.rotation = rot;
        } else {
            std::array<int, 3> splits = cfg.splits;
            for (int d = dims; d < 3; ++d) splits[d] = 1;
            // never ask for more bundles than active paths
            while (static_cast<std::int64_t>(splits[0]) * splits[1] * splits[2] >
                   static_cast<std::int64_t>(act.size())) {
                int* largest = &splits[0];
                for (int d = 1; d < dims; ++d)
                    if (splits[d] > *largest) largest = &splits[d];
                if (*largest == 1) break;
                *largest = (*largest + 1) / 2;
            }
            bres = equal_number(cols, splits);
        }
        dc_entry.rule = bres.rule;
        dc_entry.n_empty_bundles = bres.n_empty;
        if (cfg.keep_assignments)
            for (std::size_t j = 0; j < act.size(); ++j)
                result.assignments[m][act[j]] = bres.bundle[j];

        std::vector<int> occupancy(bres.n_bundles, 0);
        for (int b : bres.bundle) ++occupancy[b];
        dc_entry.group_of_bundle = detail::regression_groups(
            bres, occupancy, H, dims, dc_entry.n_groups);

        // rows (active indices) per regression group
        std::vector<std::vector<std::uint32_t>> group_rows(dc_entry.n_groups);
        for (std::size_t j = 0; j < act.size(); ++j)
            group_rows[dc_entry.group_of_bundle[bres.bundle[j]]].push_back(act[j]);

        // per-group OLS on next-date values against next-date monomials
        dc_entry.group_beta.assign(dc_entry.n_groups, Eigen::MatrixXd());
        std::vector<int> deficient(dc_entry.n_groups, 0);
        parallel_for(dc_entry.n_groups, cfg.threads, [&](std::size_t g) {
            const auto& rows = group_rows[g];
            Eigen::MatrixXd psi(rows.size(), H);
            Eigen::MatrixXd targets(rows.size(), C);
            for (std::size_t rix = 0; rix < rows.size(); ++rix) {
                const int i = rows[rix];
                double s[3] = {paths.column(m + 1, 0)[i], 0.0, 0.0};
                for (int d = 1; d < dims; ++d) s[d] = paths.column(m + 1, d)[i];
                for (int k = 0; k < H; ++k) {
                    double val = 1.0;
                    for (int d = 0; d < dims; ++d)
                        for (int e = 0; e < basis.monomials[k].e[d]; ++e) val *= s[d];
                    psi(rix, k) = val;
                }
                for (int c = 0; c < C; ++c) targets(rix, c) = V[c][i];
            }
            FitDiagnostics diag;
            dc_entry.group_beta[g] = fit_bundle(psi, targets, &diag);
            deficient[g] = diag.rank_deficient ? 1 : 0;
        });
        for (int g = 0; g < dc_entry.n_groups; ++g)
            dc_entry.n_rank_deficient += deficient[g];

        // continuation values and contract rule at t_m
        if (bermudan)
            for (int c = 0; c < C; ++c) {
                store_v[c][m].assign(N, 0.0);
                store_dc[c][m].assign(N, 0.0);
                store_d2c[c][m].assign(N, 0.0);
                ex_bits[c][m].assign(N, 0);
            }
        const auto& provider = *providers[m];
        std::vector<std::uint8_t> is_ex(C, 0);
        for (int c = 0; c < C; ++c)
            is_ex[c] = bermudan && m > 0 && contracts[c].is_exercise_date(m);

        parallel_for(act.size(), cfg.threads, [&](std::size_t j) {
            const int i = act[j];
            State X;
            X.x = paths.x[m][i];
            if (paths.has_v()) X.v = paths.v[m][i];
            if (paths.has_r()) X.r = paths.r[m][i];
            double phi[16], dphi[16], d2phi[16];
            provider.eval(X, phi, dphi, d2phi);
            const auto& beta = dc_entry.group_beta[dc_entry.group_of_bundle
                                                       [bres.bundle[j]]];
            const double spot = std::exp(X.x);
            for (int c = 0; c < C; ++c) {
                double cont = 0.0, dcont = 0.0, d2cont = 0.0;
                for (int k = 0; k < H; ++k) {
                    const double b = beta(k, c);
                    cont += b * phi[k];
                    dcont += b * dphi[k];
                    d2cont += b * d2phi[k];
                }
                double value = cont;
                if (is_ex[c]) {
                    const double g = payoff(contracts[c], spot);
                    if (g > cont) {
                        ex_bits[c][m][i] = 1;
                        value = g;
                    }
                }
                V[c][i] = value;
                dc_row[static_cast<std::size_t>(c) * N + i] = dcont;
                d2c_row[static_cast<std::size_t>(c) * N + i] = d2cont;
            }
        });
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < N; ++i)
                if (barrier && kdate[i] <= m) V[c][i] = 0.0;

        if (m == 1) {
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < N; ++i) {
                    double dv = 0.0, d2v = 0.0;
                    if (!barrier || kdate[i] > 1) {
                        if (bermudan && ex_bits[c][1][i]) {
                            const double slope =
                                payoff_slope(c, std::exp(paths.x[1][i]));
                            dv = d2v = slope;
                        } else {
                            dv = dc_row[static_cast<std::size_t>(c) * N + i];
                            d2v = d2c_row[static_cast<std::size_t>(c) * N + i];
                        }
                    }
                    dv1[static_cast<std::size_t>(c) * N + i] = dv;
                    d2v1[static_cast<std::size_t>(c) * N + i] = d2v;
                }
        }

        if (bermudan) {
            for (int c = 0; c < C; ++c) {
                store_v[c][m] = V[c];
                for (int i = 0; i < N; ++i) {
                    store_dc[c][m][i] = dc_row[static_cast<std::size_t>(c) * N + i];
                    store_d2c[c][m][i] = d2c_row[static_cast<std::size_t>(c) * N + i];
                }
            }
        } else {
            // exposure aggregates are forward-known; fold them in now
            const double s0 = model.s0;
            for (int c = 0; c < C; ++c) {
                auto& rep = result.reports[c];
                double se = 0.0, ss = 0.0, sd = 0.0, sg = 0.0;
                for (int i = 0; i < N; ++i) {
                    const bool alive = !barrier || kdate[i] > m;
                    const double e = alive ? std::max(V[c][i], 0.0) : 0.0;
                    scratch[i] = e;
                    se += e;
                    ss += e * paths.disc[m][i];
                    if (alive && V[c][i] > 0.0) {
                        const double d1 = dc_row[static_cast<std::size_t>(c) * N + i];
                        const double d2 = d2c_row[static_cast<std::size_t>(c) * N + i];
                        sd += d1;
                        sg += d2 - d1;
                    }
                }
                rep.ee[m] = se / N;
                rep.ee_star[m] = ss / N;
                rep.pfe[m] = pfe_quantile(scratch, cfg.credit.pfe_alpha);
                if (cfg.order >= 1) rep.delta_ee[m] = sd / (N * s0);
                if (cfg.order >= 2) rep.gamma_ee[m] = sg / (N * s0 * s0);
            }
        }
    }

    // Bermudan: absorb exercise forward, then aggregate per date.
    if (bermudan) {
        std::vector<int> first_ex(N);
        for (int c = 0; c < C; ++c) {
            auto& rep = result.reports[c];
            for (int i = 0; i < N; ++i) {
                int e = M;  // stopping at maturity if never exercised early
                for (int m = 1; m < M; ++m)
                    if (ex_bits[c][m][i]) {
                        e = m;
                        break;
                    }
                first_ex[i] = e;
            }
            const double s0 = model.s0;
            for (int m = 0; m < M; ++m) {
                double se = 0.0, ss = 0.0, sd = 0.0, sg = 0.0;
                for (int i = 0; i < N; ++i) {
                    const bool alive = m < first_ex[i];
                    const double v = store_v[c][m][i];
                    const double e = alive ? std::max(v, 0.0) : 0.0;
                    scratch[i] = e;
                    se += e;
                    ss += e * paths.disc[m][i];
                    if (alive && v > 0.0) {
                        const double d1 = store_dc[c][m][i];
                        const double d2 = store_d2c[c][m][i];
                        sd += d1;
                        sg += d2 - d1;
                    }
                }
                rep.ee[m] = se / N;
                rep.ee_star[m] = ss / N;
                rep.pfe[m] = pfe_quantile(scratch, cfg.credit.pfe_alpha);
                if (cfg.order >= 1) rep.delta_ee[m] = sd / (N * s0);
                if (cfg.order >= 2) rep.gamma_ee[m] = sg / (N * s0 * s0);
            }
        }
    }

    // Date-0 Greeks: all paths share X_0, so the single-bundle fit's own
    // derivative there carries the global-misfit bias; the pathwise chain
    // through the (well-localized) date-1 value derivatives is used instead:
    // dEE(0)/dS0 = E[D(0,t_1) dV_1/dx] / S0.
    if (M == 1) {
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < N; ++i) {
                double slope = 0.0;
                if (!barrier || kdate[i] > 1)
                    slope = payoff_slope(c, std::exp(paths.x[1][i]));
                dv1[static_cast<std::size_t>(c) * N + i] = slope;
                d2v1[static_cast<std::size_t>(c) * N + i] = slope;
            }
    }
    for (int c = 0; c < C; ++c) {
        auto& rep = result.reports[c];
        rep.v0 = bermudan ? store_v[c][0][0] : V[c][0];
        if (cfg.order >= 1) {
            double sd = 0.0, sg = 0.0;
            for (int i = 0; i < N; ++i) {
                const double d1 = dv1[static_cast<std::size_t>(c) * N + i];
                const double d2 = d2v1[static_cast<std::size_t>(c) * N + i];
                sd += paths.disc[1][i] * d1;
                sg += paths.disc[1][i] * (d2 - d1);
            }
            const bool exposed = std::max(rep.v0, 0.0) > 0.0;
            rep.delta_ee[0] = exposed ? sd / (N * model.s0) : 0.0;
            if (cfg.order >= 2)
                rep.gamma_ee[0] = exposed ? sg / (N * model.s0 * model.s0) : 0.0;
        }
        rep.cva = cva(std::span<const double>(rep.ee_star).subspan(0, M), cfg.credit,
                      paths.grid.dates);
    }
    return result;
}

// Greeks accessor with the explicit p = 0 failure mode.
inline std::pair<std::vector<double>, std::vector<double>> greeks(
    const ExposureReport& rep) {
    SGBM_REQUIRE(rep.order >= 1,
                 "greeks: unavailable for p = 0 (no state-dependent basis)");
    return {rep.delta_ee, rep.gamma_ee};
}

// Out-of-sample path estimator: fresh paths (conventionally twice as many),
// classified with the pass-1 rules and priced with the pass-1 coefficients;
// EE comes from discounted realized cash flows under the frozen policy.
inline std::vector<ExposureReport> path_estimator(
    const ModelSpec& model, const PathGrid& paths2,
    std::span<const ContractSpec> contracts, const CoefficientTable& coeffs,
    const SweepConfig& cfg) {
    const int M = paths2.grid.n_intervals();
    const int N = paths2.n_paths;
    const int C = static_cast<int>(contracts.size());
    const int dims = model.n_dims();
    const ContractKind kind = contracts[0].kind;
    const bool barrier = kind == ContractKind::DownAndOutBarrier;
    const bool bermudan = kind == ContractKind::Bermudan;
    SGBM_REQUIRE(static_cast<int>(coeffs.dates.size()) == M,
                 "path_estimator: coefficient table does not match the grid");
    const BasisSpec& basis = coeffs.basis;
    const int H = basis.size();

    std::vector<int> kdate(N, std::numeric_limits<int>::max());
    if (barrier) kdate = detail::knockout_dates(paths2, contracts[0].barrier);

    double v_max = 0.0;
    if (model.has_variance())
        for (int m = 0; m <= M; ++m)
            for (double v : paths2.v[m]) v_max = std::max(v_max, v);

    const auto taus = monitoring_taus(paths2.grid);

    // stopping date index and cash flow per contract and path
    std::vector<std::vector<int>> stop(C, std::vector<int>(N, M));
    std::vector<std::vector<double>> cash(C, std::vector<double>(N, 0.0));
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < N; ++i) {
            if (barrier && kdate[i] <= M) {
                stop[c][i] = kdate[i];
                cash[c][i] = 0.0;
            } else {
                cash[c][i] = payoff(contracts[c], std::exp(paths2.x[M][i]));
            }
        }

    if (bermudan) {
        std::vector<std::shared_ptr<detail::BasisMomentProvider>> providers(M);
        std::vector<std::pair<long long, std::shared_ptr<detail::BasisMomentProvider>>>
            cache;
        for (int m = 1; m < M; ++m) {
            const long long key = std::llround(taus[m] * 1e12);
            std::shared_ptr<detail::BasisMomentProvider> p;
            for (auto& [k, v] : cache)
                if (k == key) p = v;
            if (!p) {
                p = std::make_shared<detail::BasisMomentProvider>(
                    model, taus[m], basis, v_max, cfg.g_quad_intervals);
                cache.emplace_back(key, p);
            }
            providers[m] = p;
        }
        std::vector<std::uint8_t> decided(static_cast<std::size_t>(C) * N, 0);
        for (int m = 1; m < M; ++m) {
            std::vector<std::uint8_t> any_ex(C, 0);
            for (int c = 0; c < C; ++c) any_ex[c] = contracts[c].is_exercise_date(m);
            bool need = false;
            for (int c = 0; c < C; ++c) need = need || any_ex[c];
            if (!need) continue;
            const auto& entry = coeffs.dates[m];
            SGBM_REQUIRE(!entry.group_beta.empty(),
                         "path_estimator: missing coefficients for a date");
            const auto col_order = bundling_column_order(model, entry.rule.method);
            std::vector<std::vector<double>> cols(dims);
            for (int d = 0; d < dims; ++d) cols[d] = paths2.column(m, col_order[d]);
            const std::vector<int> bundle = classify(entry.rule, cols);
            const auto& provider = *providers[m];
            parallel_for(static_cast<std::size_t>(N), cfg.threads, [&](std::size_t i) {
                bool all_done = true;
                for (int c = 0; c < C; ++c)
                    all_done = all_done && decided[static_cast<std::size_t>(c) * N + i];
                if (all_done) return;
                State X;
                X.x = paths2.x[m][i];
                if (paths2.has_v()) X.v = paths2.v[m][i];
                if (paths2.has_r()) X.r = paths2.r[m][i];
                double phi[16], dphi[16], d2phi[16];
                provider.eval(X, phi, dphi, d2phi);
                const auto& beta =
                    entry.group_beta[entry.group_of_bundle[bundle[i]]];
                const double spot = std::exp(X.x);
                for (int c = 0; c < C; ++c) {
                    if (!any_ex[c] || decided[static_cast<std::size_t>(c) * N + i])
                        continue;
                    const double g = payoff(contracts[c], spot);
                    double cont = 0.0;
                    for (int k = 0; k < H; ++k) cont += beta(k, c) * phi[k];
                    if (g > cont) {
                        decided[static_cast<std::size_t>(c) * N + i] = 1;
                        stop[c][i] = m;
                        cash[c][i] = g;
                    }
                }
            });
        }
    }

    std::vector<ExposureReport> reports(C);
    std::vector<double> scratch(N);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int c = 0; c < C; ++c) {
        auto& rep = reports[c];
        rep.estimator = "path";
        rep.t = paths2.grid.dates;
        rep.ee.assign(M + 1, 0.0);
        rep.ee_star.assign(M + 1, 0.0);
        rep.pfe.assign(M + 1, 0.0);
        rep.delta_ee.assign(M + 1, nan);
        rep.gamma_ee.assign(M + 1, nan);
        rep.seed = paths2.seed;
        rep.n_paths = N;
        rep.n_bundles = detail::bundle_count(model, cfg);
        rep.order = cfg.order;
        rep.pfe_alpha = cfg.credit.pfe_alpha;
        for (int m = 0; m < M; ++m) {
            double se = 0.0, ss = 0.0;
            for (int i = 0; i < N; ++i) {
                double e = 0.0;
                if (stop[c][i] > m && cash[c][i] > 0.0) {
                    const double d_fwd = paths2.disc[stop[c][i]][i] / paths2.disc[m][i];
                    e = d_fwd * cash[c][i];
                    ss += paths2.disc[stop[c][i]][i] * cash[c][i];
                }
                scratch[i] = e;
                se += e;
            }
            rep.ee[m] = se / N;
            rep.ee_star[m] = ss / N;
            rep.pfe[m] = pfe_quantile(scratch, cfg.credit.pfe_alpha);
        }
        rep.v0 = rep.ee[0];
        rep.cva = cva(std::span<const double>(rep.ee_star).subspan(0, M), cfg.credit,
                      paths2.grid.dates);
    }
    return reports;
}

}  // namespace sgbm
