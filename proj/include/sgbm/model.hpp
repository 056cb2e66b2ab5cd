// Model/contract/time-grid definitions shared by all components, plus the
// parameter presets used throughout the test batteries.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sgbm/common.hpp"

namespace sgbm {

enum class ModelFamily { BS, Heston, BSHW, HHW };

inline std::string to_string(ModelFamily f) {
    switch (f) {
        case ModelFamily::BS: return "BS";
        case ModelFamily::Heston: return "Heston";
        case ModelFamily::BSHW: return "BSHW";
        case ModelFamily::HHW: return "HHW";
    }
    return "?";
}

inline ModelFamily model_family_from_string(const std::string& s) {
    if (s == "BS") return ModelFamily::BS;
    if (s == "Heston") return ModelFamily::Heston;
    if (s == "BSHW") return ModelFamily::BSHW;
    if (s == "HHW") return ModelFamily::HHW;
    throw Error("unknown model family '" + s + "'");
}

struct ModelSpec {
    ModelFamily family = ModelFamily::Heston;
    double s0 = 100.0;     // spot
    double r0 = 0.0;       // initial (or constant) short rate
    double v0 = 0.0;       // initial variance
    double kappa = 0.0;    // variance mean-reversion speed
    double vbar = 0.0;     // long-run variance
    double gamma = 0.0;    // vol-of-vol
    double lambda = 0.0;   // rate mean-reversion speed
    double theta = 0.0;    // rate mean level
    double eta = 0.0;      // rate volatility
    double sigma = 0.0;    // constant volatility (BS / BSHW)
    double rho_xv = 0.0;   // corr(dW_x, dW_v)
    double rho_xr = 0.0;   // corr(dW_x, dW_r)

    double x0() const { return std::log(s0); }

    bool has_variance() const {
        return family == ModelFamily::Heston || family == ModelFamily::HHW;
    }
    bool has_stochastic_rate() const {
        return family == ModelFamily::BSHW || family == ModelFamily::HHW;
    }
    // State dimensionality: [x], [x,v], [x,r] or [x,v,r].
    int n_dims() const {
        switch (family) {
            case ModelFamily::BS: return 1;
            case ModelFamily::Heston: return 2;
            case ModelFamily::BSHW: return 2;
            case ModelFamily::HHW: return 3;
        }
        return 1;
    }

    // Reported, never enforced; parameter sets violating it are first-class.
    bool feller_satisfied() const { return 2.0 * kappa * vbar >= gamma * gamma; }

    void validate() const {
        SGBM_REQUIRE(s0 > 0.0, "ModelSpec: s0 must be positive");
        SGBM_REQUIRE(kappa >= 0.0 && gamma >= 0.0 && lambda >= 0.0 && eta >= 0.0 &&
                         sigma >= 0.0,
                     "ModelSpec: kappa, gamma, lambda, eta, sigma must be >= 0");
        SGBM_REQUIRE(v0 >= 0.0 && vbar >= 0.0, "ModelSpec: v0, vbar must be >= 0");
        SGBM_REQUIRE(std::abs(rho_xv) <= 1.0 && std::abs(rho_xr) <= 1.0,
                     "ModelSpec: correlations must lie in [-1,1]");
        if (has_variance()) {
            SGBM_REQUIRE(rho_xv * rho_xv + rho_xr * rho_xr <= 1.0 + 1e-12,
                         "ModelSpec: rho_xv^2 + rho_xr^2 must not exceed 1");
        }
        if (family == ModelFamily::BS || family == ModelFamily::BSHW) {
            SGBM_REQUIRE(sigma > 0.0, "ModelSpec: sigma must be positive for BS/BSHW");
        }
    }
};

enum class ContractKind { European, Bermudan, DownAndOutBarrier };

inline std::string to_string(ContractKind k) {
    switch (k) {
        case ContractKind::European: return "European";
        case ContractKind::Bermudan: return "Bermudan";
        case ContractKind::DownAndOutBarrier: return "DownAndOutBarrier";
    }
    return "?";
}

inline ContractKind contract_kind_from_string(const std::string& s) {
    if (s == "European") return ContractKind::European;
    if (s == "Bermudan") return ContractKind::Bermudan;
    if (s == "DownAndOutBarrier" || s == "Barrier") return ContractKind::DownAndOutBarrier;
    throw Error("unknown contract kind '" + s + "'");
}

struct ContractSpec {
    ContractKind kind = ContractKind::Bermudan;
    int omega = -1;        // +1 call, -1 put
    double strike = 100.0;
    double tenor = 1.0;
    double barrier = 0.0;  // level L, down-and-out only
    // Indices into TimeGrid::dates (Bermudan only); all > 0.
    std::vector<int> exercise_dates;

    void validate(double s0) const {
        SGBM_REQUIRE(omega == 1 || omega == -1, "ContractSpec: omega must be +-1");
        SGBM_REQUIRE(strike > 0.0, "ContractSpec: strike must be positive");
        SGBM_REQUIRE(tenor > 0.0, "ContractSpec: tenor must be positive");
        if (kind == ContractKind::DownAndOutBarrier) {
            SGBM_REQUIRE(barrier > 0.0 && barrier < s0,
                         "ContractSpec: barrier must satisfy 0 < L < S0");
        }
        if (kind == ContractKind::Bermudan) {
            SGBM_REQUIRE(!exercise_dates.empty(),
                         "ContractSpec: Bermudan needs exercise dates");
            for (int e : exercise_dates)
                SGBM_REQUIRE(e > 0, "ContractSpec: exercise dates must be > t0");
        }
    }

    bool is_exercise_date(int m) const {
        for (int e : exercise_dates)
            if (e == m) return true;
        return false;
    }
};

inline double payoff(const ContractSpec& c, double spot) {
    SGBM_REQUIRE(spot > 0.0, "payoff: spot must be positive");
    return std::max(c.omega * (spot - c.strike), 0.0);
}

// Monitoring dates t_0 = 0 < t_1 < ... < t_M = T plus the finer QE substep
// grid used by the path engine between them.
struct TimeGrid {
    std::vector<double> dates;        // size M+1, dates[0] = 0
    double dt_qe = 0.0;               // nominal substep
    std::vector<int> substeps;        // substeps per monitoring interval, size M

    int n_intervals() const { return static_cast<int>(dates.size()) - 1; }
    double tenor() const { return dates.back(); }
    int total_substeps() const {
        int n = 0;
        for (int s : substeps) n += s;
        return n;
    }
    // Global substep index at which date m is reached.
    int substep_index(int m) const {
        int n = 0;
        for (int k = 0; k < m; ++k) n += substeps[k];
        return n;
    }

    static TimeGrid make(const std::vector<double>& dates, double dt_qe) {
        SGBM_REQUIRE(dates.size() >= 2, "TimeGrid: need at least one interval");
        SGBM_REQUIRE(dates.front() == 0.0, "TimeGrid: first date must be 0");
        SGBM_REQUIRE(dt_qe > 0.0, "TimeGrid: dt_qe must be positive");
        TimeGrid g;
        g.dates = dates;
        g.dt_qe = dt_qe;
        for (std::size_t m = 0; m + 1 < dates.size(); ++m) {
            const double dt = dates[m + 1] - dates[m];
            SGBM_REQUIRE(dt > 0.0, "TimeGrid: dates must be strictly increasing");
            const double ratio = dt / dt_qe;
            const int n = static_cast<int>(std::llround(ratio));
            SGBM_REQUIRE(n >= 1 && std::abs(ratio - n) <= 1e-12 * std::max(1.0, ratio),
                         "TimeGrid: dt_qe must divide every monitoring interval");
            g.substeps.push_back(n);
        }
        return g;
    }

    // M equally spaced monitoring dates on (0, T].
    static TimeGrid uniform(double tenor, int n_dates, double dt_qe) {
        SGBM_REQUIRE(n_dates >= 1, "TimeGrid: n_dates must be >= 1");
        std::vector<double> d(n_dates + 1);
        for (int m = 0; m <= n_dates; ++m)
            d[m] = tenor * static_cast<double>(m) / n_dates;
        return make(d, dt_qe);
    }
};

struct Preset {
    std::string name;
    ModelSpec model;
    ContractSpec contract;
    TimeGrid grid;
};

// Exercise dates are the monitoring dates t_1..t_M; t_0 never is one.
inline std::vector<int> all_monitoring_exercise_dates(const TimeGrid& g) {
    std::vector<int> e(g.n_intervals());
    for (int m = 1; m <= g.n_intervals(); ++m) e[m - 1] = m;
    return e;
}

inline Preset preset(const std::string& name) {
    Preset p;
    p.name = name;
    if (name == "TestA") {
        p.model.family = ModelFamily::Heston;
        p.model.s0 = 100.0;
        p.model.r0 = 0.04;
        p.model.kappa = 1.15;
        p.model.gamma = 0.39;
        p.model.vbar = 0.0348;
        p.model.v0 = 0.0348;
        p.model.rho_xv = -0.64;
        p.contract.kind = ContractKind::Bermudan;
        p.contract.omega = -1;
        p.contract.strike = 100.0;
        p.contract.tenor = 1.0;
        p.grid = TimeGrid::uniform(1.0, 10, 0.05);
    } else if (name == "TestB_rho02_T5" || name == "TestB_rho06_T10") {
        p.model.family = ModelFamily::HHW;
        p.model.s0 = 100.0;
        p.model.kappa = 0.3;
        p.model.gamma = 0.6;
        p.model.v0 = 0.05;
        p.model.vbar = 0.05;
        p.model.lambda = 0.01;
        p.model.eta = 0.01;
        p.model.r0 = 0.02;
        p.model.theta = 0.02;
        p.model.rho_xv = -0.3;
        p.contract.kind = ContractKind::Bermudan;
        p.contract.omega = -1;
        p.contract.strike = 100.0;
        if (name == "TestB_rho02_T5") {
            p.model.rho_xr = 0.2;
            p.contract.tenor = 5.0;
            p.grid = TimeGrid::uniform(5.0, 10, 0.05);
        } else {
            p.model.rho_xr = 0.6;
            p.contract.tenor = 10.0;
            p.grid = TimeGrid::uniform(10.0, 10, 0.05);
        }
    } else {
        throw Error("unknown preset '" + name + "'");
    }
    p.contract.exercise_dates = all_monitoring_exercise_dates(p.grid);
    p.model.validate();
    p.contract.validate(p.model.s0);
    return p;
}

inline std::vector<std::string> preset_names() {
    return {"TestA", "TestB_rho02_T5", "TestB_rho06_T10"};
}

}  // namespace sgbm
