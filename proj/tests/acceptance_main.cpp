// Acceptance battery: end-to-end checks of prices, exposure profiles, Greeks,
// CVA, moment backends and determinism at desk scale. Prints one PASS/FAIL
// line per criterion; the exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sgbm/sgbm.hpp"

using namespace sgbm;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

bool within(double value, double target, double rel_tol) {
    return std::abs(value - target) <= rel_tol * std::abs(target);
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct SeedRun {
    ExposureReport direct;
    ExposureReport path;
};

SeedRun run_test_a(std::uint64_t seed, int n_paths, int iters, int order,
                   bool with_path, const ContractSpec* contract_override = nullptr) {
    const Preset p = preset("TestA");
    const ContractSpec contract =
        contract_override ? *contract_override : p.contract;
    SweepConfig cfg;
    cfg.order = order;
    cfg.bifurcation_iters = iters;
    SimulateOptions so;
    so.track_interval_minima = contract.kind == ContractKind::DownAndOutBarrier;
    const PathGrid paths = simulate(p.model, p.grid, n_paths, seed, so);
    SeedRun out;
    const std::array<ContractSpec, 1> cs{contract};
    auto sweep = backward_sweep(p.model, paths, cs, cfg);
    out.direct = sweep.reports[0];
    if (with_path) {
        const PathGrid paths2 =
            simulate(p.model, p.grid, 2 * n_paths, path_estimator_seed(seed), so);
        out.path = path_estimator(p.model, paths2, cs, sweep.coeffs, cfg)[0];
    }
    return out;
}

template <class Get>
MeanStd collect(const std::vector<SeedRun>& runs, bool direct, Get get) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(get(direct ? r.direct : r.path));
    return mean_std(xs);
}

// ---------------------------------------------------------------- criterion 1+2
void criteria_1_2() {
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<SeedRun> big;
    for (auto s : seeds) big.push_back(run_test_a(s, 100000, 3, 2, true));

    const auto v0d = collect(big, true, [](const ExposureReport& r) { return r.v0; });
    const auto v0p = collect(big, false, [](const ExposureReport& r) { return r.v0; });
    const auto d0 =
        collect(big, true, [](const ExposureReport& r) { return r.delta_ee[0]; });
    const auto g0 =
        collect(big, true, [](const ExposureReport& r) { return r.gamma_ee[0]; });
    const auto cv = collect(big, true, [](const ExposureReport& r) { return r.cva; });

    bool ok = true;
    std::string detail;
    ok &= within(v0d.mean, 5.486, 0.01);
    ok &= within(v0p.mean, 5.476, 0.01);
    ok &= within(d0.mean, -0.328, 0.02);
    ok &= within(g0.mean, 0.0247, 0.05);
    ok &= within(cv.mean, 0.0926, 0.03);
    detail = "Test A Bermudan: V0_direct=" + num(v0d.mean) + " (5.486+-1%), V0_path=" +
             num(v0p.mean) + " (5.476+-1%), DeltaEE0=" + num(d0.mean) +
             " (-0.328+-2%), GammaEE0=" + num(g0.mean) + " (0.0247+-5%), CVA=" +
             num(cv.mean) + " (0.0926+-3%)";
    report(1, ok, detail);

    // bracketing per seed plus the J/p refinement of the direct-path gap
    const double joint_se = 3.0 * std::sqrt(v0d.sd * v0d.sd + v0p.sd * v0p.sd);
    bool ok2 = true;
    for (const auto& r : big) ok2 &= r.path.v0 <= r.direct.v0 + joint_se;
    double gap_fine = 0.0, gap_coarse = 0.0;
    for (const auto& r : big)
        gap_fine += relative_l2(r.direct.ee, r.path.ee) / seeds.size();
    for (auto s : seeds) {
        const SeedRun coarse = run_test_a(s, 100000, 1, 1, true);
        gap_coarse += relative_l2(coarse.direct.ee, coarse.path.ee) / seeds.size();
    }
    ok2 &= gap_fine < gap_coarse;
    report(2, ok2,
           "estimator bracketing on every seed (3 joint se = " + num(joint_se) +
               "); EE rel-L2 gap J=64,p=2: " + num(gap_fine) +
               " < J=4,p=1: " + num(gap_coarse));
}

// ------------------------------------------------------------------ criterion 3
void criterion_3() {
    ContractSpec barrier;
    barrier.kind = ContractKind::DownAndOutBarrier;
    barrier.omega = -1;
    barrier.strike = 100.0;
    barrier.tenor = 1.0;
    barrier.barrier = 80.0;
    std::vector<SeedRun> runs;
    for (std::uint64_t s : {1, 2, 3, 4, 5})
        runs.push_back(run_test_a(s, 100000, 3, 2, false, &barrier));
    const auto v0 = collect(runs, true, [](const ExposureReport& r) { return r.v0; });
    const auto d0 =
        collect(runs, true, [](const ExposureReport& r) { return r.delta_ee[0]; });
    const auto g0 =
        collect(runs, true, [](const ExposureReport& r) { return r.gamma_ee[0]; });
    const auto cv = collect(runs, true, [](const ExposureReport& r) { return r.cva; });
    bool ok = true;
    ok &= within(v0.mean, 1.2300, 0.01);
    ok &= within(d0.mean, -0.0609, 0.05);
    ok &= within(cv.mean, 0.0363, 0.03);
    ok &= within(g0.mean, 0.0020, 0.30);  // documented p=2 bias vs COS 0.0031
    report(3, ok,
           "barrier L=80: V0=" + num(v0.mean) + " (1.2300+-1%), DeltaEE0=" +
               num(d0.mean) + " (-0.0609+-5%), CVA=" + num(cv.mean) +
               " (0.0363+-3%), GammaEE0=" + num(g0.mean) + " (0.0020+-30%)");
}

// ------------------------------------------------------------------ criterion 4
void criterion_4() {
    ModelSpec model = preset("TestB_rho06_T10").model;
    model.rho_xr = 0.2;  // Table uses rho = 0.2 with T = 10
    const double T = 10.0;
    const TimeGrid grid = TimeGrid::uniform(T, 200, 0.05);  // SGBM dt = 0.05
    const std::vector<double> strikes{40, 80, 100, 120, 180};
    const std::vector<double> table{25.96, 19.95, 18.34, 17.43, 17.32};

    std::vector<ContractSpec> contracts;
    for (double k : strikes) {
        ContractSpec c;
        c.kind = ContractKind::European;
        c.omega = -1;
        c.strike = k;
        c.tenor = T;
        contracts.push_back(c);
    }
    SweepConfig cfg;
    cfg.order = 2;
    cfg.bifurcation_iters = 2;  // (2^3)^2 = 64 bundles
    const PathGrid paths = simulate(model, grid, 200000, 7);
    const auto sweep = backward_sweep(model, paths, contracts, cfg);

    const double r_star = model_zcb_rate(model, T);
    bool ok = true;
    std::string detail = "HHW European implied vols (%):";
    const TimeGrid mc_grid = TimeGrid::uniform(T, 1, 0.05);
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        const double iv =
            100.0 * implied_vol(sweep.reports[i].v0, model.s0, strikes[i], T, r_star, -1);
        const McPrice mc =
            mc_european_oracle(model, contracts[i], mc_grid, 200000, 77);
        const double iv_mc =
            100.0 * implied_vol(mc.price, model.s0, strikes[i], T, r_star, -1);
        ok &= std::abs(iv - table[i]) <= 0.10;
        ok &= std::abs(iv - iv_mc) <= 0.10;
        detail += " K" + num(strikes[i]) + "=" + num(iv) + "(tab " + num(table[i]) +
                  ",mc " + num(iv_mc) + ")";
    }
    report(4, ok, detail + " tolerance 0.10");
}

// ------------------------------------------------------------------ criterion 5
void criterion_5() {
    struct Case {
        const char* name;
        double v0, cva;
    };
    const Case cases[2] = {{"TestB_rho02_T5", 11.37, 0.983},
                           {"TestB_rho06_T10", 15.92, 2.968}};
    bool ok = true;
    std::string detail = "HHW Bermudan:";
    for (const auto& c : cases) {
        const Preset p = preset(c.name);
        SweepConfig cfg;
        cfg.order = 2;
        cfg.bifurcation_iters = 3;  // (2^3)^3 = 512 bundles
        const PathGrid paths = simulate(p.model, p.grid, 200000, 11);
        const auto sweep = backward_sweep(
            p.model, paths, std::array<ContractSpec, 1>{p.contract}, cfg);
        const auto& rep = sweep.reports[0];
        ok &= within(rep.v0, c.v0, 0.015);
        ok &= within(rep.cva, c.cva, 0.03);
        detail += std::string(" ") + c.name + ": V0=" + num(rep.v0) + " (" +
                  num(c.v0) + "+-1.5%), CVA=" + num(rep.cva) + " (" + num(c.cva) +
                  "+-3%);";
    }
    report(5, ok, detail);
}

// ------------------------------------------------------------------ criterion 6
void criterion_6() {
    const ModelSpec m = preset("TestA").model;
    const double x = m.x0();
    double worst = 0.0;
    for (double tau : {0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 1.0, 1.5}) {
        for (double v : {0.005, 0.01, 0.02, 0.0348, 0.05, 0.08, 0.12, 0.2, 0.35, 0.5}) {
            const State X{x, v, 0.0};
            for (const Exponents& e :
                 {Exponents{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}, {1, 1, 0},
                  {0, 2, 0}}) {
                const double a = heston_closed_moment(m, e, tau, X);
                const double b = moment_dchf_fd(m, e, tau, X);
                worst = std::max(worst,
                                 std::abs(a - b) / std::max(std::abs(a), 1e-12));
            }
        }
    }
    bool ok = worst <= 1e-6;

    // both backends against Monte Carlo sample moments at N = 2e5
    const TimeGrid g = TimeGrid::uniform(0.1, 1, 0.005);
    const PathGrid pg = simulate(m, g, 200000, 13);
    const State X0{m.x0(), m.v0, 0.0};
    std::string mc_detail;
    for (auto [a, b] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{2, 0},
                        std::pair{1, 1}, std::pair{0, 2}}) {
        const auto s = sample_moment_stats(pg, 1, {a, b}, true);
        const double closed = heston_closed_moment(m, {a, b, 0}, 0.1, X0);
        const double fd = moment_dchf_fd(m, {a, b, 0}, 0.1, X0);
        ok &= std::abs(closed - s.mean) <= 3.0 * s.se;
        ok &= std::abs(fd - s.mean) <= 3.0 * s.se;
    }
    report(6, ok,
           "moment backends: worst closed-vs-dChF rel gap " + num(worst) +
               " (<=1e-6) on 100-point grid; both within 3 se of MC at N=2e5");
}

// ------------------------------------------------------------------ criterion 7
void criterion_7() {
    bool ok = true;
    std::string detail = "projection L2 slopes:";
    for (int p : {1, 2}) {
        std::vector<double> lx, ly;
        for (int J = 2; J <= 64; J *= 2) {
            lx.push_back(std::log2(static_cast<double>(J)));
            ly.push_back(std::log2(projection_error_probe(
                [](double t) { return std::sin(t); }, 0.0, M_PI, p, J)));
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= lx.size();
        my /= lx.size();
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        const double slope = sxy / sxx;
        ok &= std::abs(slope + (p + 1.0)) <= 0.3;
        detail += " p=" + std::to_string(p) + ": " + num(slope) + " (target " +
                  num(-(p + 1.0)) + "+-0.3);";
    }
    report(7, ok, detail);
}

// ------------------------------------------------------------------ criterion 8
void criterion_8() {
    bool ok = true;
    std::string detail = "DeltaEE(0) vs central finite differences:";

    {  // Test A with common random numbers
        const auto base = run_test_a(21, 100000, 3, 2, false);
        Preset p = preset("TestA");
        auto bumped = [&](double s0) {
            ModelSpec m = p.model;
            m.s0 = s0;
            SweepConfig cfg;
            cfg.order = 2;
            cfg.bifurcation_iters = 3;
            const PathGrid paths = simulate(m, p.grid, 100000, 21);
            return backward_sweep(m, paths, std::array<ContractSpec, 1>{p.contract},
                                  cfg)
                .reports[0]
                .ee[0];
        };
        const double fd = (bumped(101.0) - bumped(99.0)) / 2.0;
        const double delta = base.direct.delta_ee[0];
        ok &= std::abs(delta - fd) <= 0.01 * std::abs(delta);
        detail += " TestA: " + num(delta) + " vs fd " + num(fd) + ";";
    }
    {  // Test B, rho = 0.2, T = 5
        const Preset p = preset("TestB_rho02_T5");
        SweepConfig cfg;
        cfg.order = 2;
        cfg.bifurcation_iters = 2;  // 64 bundles
        auto value = [&](double s0) {
            ModelSpec m = p.model;
            m.s0 = s0;
            const PathGrid paths = simulate(m, p.grid, 100000, 23);
            return backward_sweep(m, paths, std::array<ContractSpec, 1>{p.contract},
                                  cfg);
        };
        const auto base = value(100.0);
        const double fd = (value(101.0).reports[0].ee[0] -
                           value(99.0).reports[0].ee[0]) / 2.0;
        const double delta = base.reports[0].delta_ee[0];
        ok &= std::abs(delta - fd) <= 0.01 * std::abs(delta);
        detail += " TestB: " + num(delta) + " vs fd " + num(fd) + ";";
    }
    report(8, ok, detail + " tolerance 1% relative");
}

// ------------------------------------------------------------------ criterion 9
void criterion_9() {
    bool ok = true;
    std::string detail;
    {  // Heston with vanishing vol-of-vol against the Black-Scholes closed form
        ModelSpec m = preset("TestA").model;
        m.gamma = 1e-12;
        m.v0 = m.vbar;
        ContractSpec c;
        c.kind = ContractKind::European;
        c.omega = -1;
        c.strike = 100.0;
        c.tenor = 1.0;
        const TimeGrid grid = preset("TestA").grid;
        SweepConfig cfg;
        cfg.order = 2;
        cfg.bifurcation_iters = 3;
        const PathGrid paths = simulate(m, grid, 200000, 31);
        const auto sweep =
            backward_sweep(m, paths, std::array<ContractSpec, 1>{c}, cfg);
        const McPrice mc = mc_european_oracle(m, c, grid, 200000, 31);
        const double bs = bs_price(100.0, 100.0, 1.0, m.r0, std::sqrt(m.vbar), -1);
        ok &= std::abs(sweep.reports[0].v0 - bs) <= 3.0 * mc.std_err;
        detail += "Heston(gamma->0) V0=" + num(sweep.reports[0].v0) + " vs BS " +
                  num(bs) + " (3se=" + num(3.0 * mc.std_err) + ");";
    }
    {  // HHW with vanishing rate vol against Heston at matched seeds
        Preset hhw = preset("TestB_rho02_T5");
        hhw.model.eta = 0.0;
        hhw.model.rho_xr = 0.0;
        ModelSpec hes;
        hes.family = ModelFamily::Heston;
        hes.s0 = 100.0;
        hes.r0 = 0.02;
        hes.kappa = 0.3;
        hes.gamma = 0.6;
        hes.v0 = 0.05;
        hes.vbar = 0.05;
        hes.rho_xv = -0.3;
        SweepConfig cfg_h, cfg_hhw;
        cfg_h.order = cfg_hhw.order = 2;
        cfg_h.method = cfg_hhw.method = BundleMethod::EqualNumber;
        cfg_h.splits = {8, 8, 1};
        cfg_hhw.splits = {8, 1, 8};  // priority x, r, v with r degenerate
        const PathGrid ph = simulate(hes, hhw.grid, 100000, 33);
        const PathGrid pw = simulate(hhw.model, hhw.grid, 100000, 33);
        ContractSpec contract = hhw.contract;
        const auto rh =
            backward_sweep(hes, ph, std::array<ContractSpec, 1>{contract}, cfg_h);
        const auto rw = backward_sweep(hhw.model, pw,
                                       std::array<ContractSpec, 1>{contract}, cfg_hhw);
        const double gap = relative_l2(rh.reports[0].ee, rw.reports[0].ee);
        ok &= gap < 1e-2;
        detail += " HHW(eta->0) vs Heston EE rel-L2=" + num(gap) + " (<1e-2)";
    }
    report(9, ok, detail);
}

// ----------------------------------------------------------------- criterion 10
void criterion_10() {
    const fs::path base = fs::temp_directory_path() / "sgbm_acceptance_det";
    fs::remove_all(base);
    auto cfg_text = [&](const std::string& out, int threads) {
        return "[run]\npreset = TestA\npaths = 20000\nseeds = 4,9\norder = 2\n"
               "iterations = 2\nestimators = both\nthreads = " +
               std::to_string(threads) + "\noutput_dir = " + out + "\n";
    };
    run(parse_config(cfg_text((base / "t1").string(), 1)));
    run(parse_config(cfg_text((base / "t4").string(), 4)));
    run(parse_config(cfg_text((base / "t1b").string(), 1)));
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    bool ok = true;
    for (const char* f : {"seed4_direct.csv", "seed4_path.csv", "seed9_direct.csv",
                          "seed9_path.csv", "summary.json"}) {
        const std::string a = slurp(base / "t1" / f);
        ok &= !a.empty();
        ok &= a == slurp(base / "t4" / f);
        ok &= a == slurp(base / "t1b" / f);
    }
    fs::remove_all(base);
    report(10, ok, "byte-identical outputs across reruns and thread counts");
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criteria_1_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    const auto dt = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    std::printf("%d/10 criteria passed (%llds)\n", 10 - g_failures,
                static_cast<long long>(dt));
    return g_failures;
}
