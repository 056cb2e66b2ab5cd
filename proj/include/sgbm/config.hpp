// Run configuration: a small INI-style document (sections, key = value,
// '#' comments). Unknown sections or keys are hard errors with the offending
// line, so typos cannot silently change an experiment.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sgbm/bundling.hpp"
#include "sgbm/credit.hpp"
#include "sgbm/model.hpp"

namespace sgbm {

struct RunConfig {
    // [run]
    std::optional<std::string> preset_name;
    int paths = 100000;
    std::vector<std::uint64_t> seeds{1};
    int order = 2;
    BundleMethod method = BundleMethod::BifurcationRotation;
    int iterations = 3;
    std::array<int, 3> splits{8, 8, 1};
    bool splits_given = false;
    std::string estimators = "both";  // direct | path | both
    std::string output_dir = "out";
    int threads = 1;
    bool dump_bundles = false;
    bool dump_paths = false;
    bool validate_moments = false;
    // inline model/contract/grid (when no preset)
    ModelSpec model;
    ContractSpec contract;
    int monitoring_dates = 10;
    double dt_qe = 0.05;
    CreditSpec credit;

    ModelSpec resolved_model;
    ContractSpec resolved_contract;
    TimeGrid resolved_grid;

    void resolve() {
        SGBM_REQUIRE(!seeds.empty(), "config: seeds must be non-empty");
        SGBM_REQUIRE(paths >= 2, "config: paths must be >= 2");
        SGBM_REQUIRE(estimators == "direct" || estimators == "path" ||
                         estimators == "both",
                     "config: estimators must be direct|path|both");
        if (preset_name) {
            Preset p = preset(*preset_name);
            resolved_model = p.model;
            resolved_contract = p.contract;
            resolved_grid = p.grid;
        } else {
            resolved_model = model;
            resolved_contract = contract;
            resolved_grid =
                TimeGrid::uniform(contract.tenor, monitoring_dates, dt_qe);
            if (resolved_contract.kind == ContractKind::Bermudan &&
                resolved_contract.exercise_dates.empty())
                resolved_contract.exercise_dates =
                    all_monitoring_exercise_dates(resolved_grid);
        }
        resolved_model.validate();
        resolved_contract.validate(resolved_model.s0);
        credit.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        SGBM_REQUIRE(pos == v.size(), "config: bad number for '" + key + "'");
        return d;
    } catch (const Error&) {
        throw;
    } catch (...) {
        throw Error("config: bad number for '" + key + "': " + v);
    }
}

inline long long to_int(const std::string& v, const std::string& key) {
    const double d = to_double(v, key);
    const long long n = static_cast<long long>(d);
    SGBM_REQUIRE(static_cast<double>(n) == d, "config: '" + key + "' must be integral");
    return n;
}

inline bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config: bad boolean for '" + key + "': " + v);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    bool grid_tenor_set = false;
    while (std::getline(ss, raw)) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = " (line " + std::to_string(line_no) + ")";
        if (line.front() == '[') {
            SGBM_REQUIRE(line.back() == ']', "config: malformed section" + where);
            section = line.substr(1, line.size() - 2);
            SGBM_REQUIRE(section == "run" || section == "model" ||
                             section == "contract" || section == "grid" ||
                             section == "credit",
                         "config: unknown section '" + section + "'" + where);
            continue;
        }
        const auto eq = line.find('=');
        SGBM_REQUIRE(eq != std::string::npos, "config: expected key = value" + where);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        SGBM_REQUIRE(!key.empty() && !val.empty(),
                     "config: empty key or value" + where);

        auto unknown = [&]() {
            throw Error("config: unknown field '" + section + "." + key + "'" + where);
        };
        if (section == "run") {
            if (key == "preset") cfg.preset_name = val;
            else if (key == "paths") cfg.paths = static_cast<int>(detail::to_int(val, key));
            else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& s : detail::split_list(val))
                    cfg.seeds.push_back(static_cast<std::uint64_t>(detail::to_int(s, key)));
            } else if (key == "order") cfg.order = static_cast<int>(detail::to_int(val, key));
            else if (key == "bundling") {
                if (val == "bifurcation") cfg.method = BundleMethod::BifurcationRotation;
                else if (val == "equal") cfg.method = BundleMethod::EqualNumber;
                else throw Error("config: bundling must be bifurcation|equal" + where);
            } else if (key == "iterations") cfg.iterations = static_cast<int>(detail::to_int(val, key));
            else if (key == "splits") {
                const auto parts = detail::split_list(val);
                SGBM_REQUIRE(parts.size() >= 1 && parts.size() <= 3,
                             "config: splits takes 1-3 values" + where);
                cfg.splits = {1, 1, 1};
                for (std::size_t i = 0; i < parts.size(); ++i)
                    cfg.splits[i] = static_cast<int>(detail::to_int(parts[i], key));
                cfg.splits_given = true;
            } else if (key == "estimators") cfg.estimators = val;
            else if (key == "output_dir") cfg.output_dir = val;
            else if (key == "threads") cfg.threads = static_cast<int>(detail::to_int(val, key));
            else if (key == "dump_bundles") cfg.dump_bundles = detail::to_bool(val, key);
            else if (key == "dump_paths") cfg.dump_paths = detail::to_bool(val, key);
            else if (key == "validate_moments") cfg.validate_moments = detail::to_bool(val, key);
            else unknown();
        } else if (section == "model") {
            if (key == "family") cfg.model.family = model_family_from_string(val);
            else if (key == "s0") cfg.model.s0 = detail::to_double(val, key);
            else if (key == "r0") cfg.model.r0 = detail::to_double(val, key);
            else if (key == "v0") cfg.model.v0 = detail::to_double(val, key);
            else if (key == "kappa") cfg.model.kappa = detail::to_double(val, key);
            else if (key == "vbar") cfg.model.vbar = detail::to_double(val, key);
            else if (key == "gamma") cfg.model.gamma = detail::to_double(val, key);
            else if (key == "lambda") cfg.model.lambda = detail::to_double(val, key);
            else if (key == "theta") cfg.model.theta = detail::to_double(val, key);
            else if (key == "eta") cfg.model.eta = detail::to_double(val, key);
            else if (key == "sigma") cfg.model.sigma = detail::to_double(val, key);
            else if (key == "rho_xv") cfg.model.rho_xv = detail::to_double(val, key);
            else if (key == "rho_xr") cfg.model.rho_xr = detail::to_double(val, key);
            else unknown();
        } else if (section == "contract") {
            if (key == "kind") cfg.contract.kind = contract_kind_from_string(val);
            else if (key == "omega") {
                if (val == "call") cfg.contract.omega = 1;
                else if (val == "put") cfg.contract.omega = -1;
                else cfg.contract.omega = static_cast<int>(detail::to_int(val, key));
            } else if (key == "strike") cfg.contract.strike = detail::to_double(val, key);
            else if (key == "tenor") {
                cfg.contract.tenor = detail::to_double(val, key);
                grid_tenor_set = true;
            } else if (key == "barrier") cfg.contract.barrier = detail::to_double(val, key);
            else unknown();
        } else if (section == "grid") {
            if (key == "monitoring_dates")
                cfg.monitoring_dates = static_cast<int>(detail::to_int(val, key));
            else if (key == "dt_qe") cfg.dt_qe = detail::to_double(val, key);
            else unknown();
        } else if (section == "credit") {
            if (key == "hazard_rate") cfg.credit.hazard_rate = detail::to_double(val, key);
            else if (key == "recovery") cfg.credit.recovery = detail::to_double(val, key);
            else if (key == "pfe_alpha") cfg.credit.pfe_alpha = detail::to_double(val, key);
            else unknown();
        } else {
            throw Error("config: key outside any section" + where);
        }
    }
    (void)grid_tenor_set;
    cfg.resolve();
    return cfg;
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::string s;
    auto add = [&](const std::string& k, const std::string& v) {
        s += k + " = " + v + "\n";
    };
    s += "[run]\n";
    if (cfg.preset_name) add("preset", *cfg.preset_name);
    add("paths", std::to_string(cfg.paths));
    {
        std::string seeds;
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            seeds += (i ? "," : "") + std::to_string(cfg.seeds[i]);
        add("seeds", seeds);
    }
    add("order", std::to_string(cfg.order));
    add("bundling",
        cfg.method == BundleMethod::BifurcationRotation ? "bifurcation" : "equal");
    add("iterations", std::to_string(cfg.iterations));
    if (cfg.splits_given)
        add("splits", std::to_string(cfg.splits[0]) + "," +
                          std::to_string(cfg.splits[1]) + "," +
                          std::to_string(cfg.splits[2]));
    add("estimators", cfg.estimators);
    add("output_dir", cfg.output_dir);
    add("threads", std::to_string(cfg.threads));
    if (!cfg.preset_name) {
        const ModelSpec& m = cfg.resolved_model;
        s += "[model]\n";
        add("family", to_string(m.family));
        add("s0", std::to_string(m.s0));
        add("r0", std::to_string(m.r0));
        add("v0", std::to_string(m.v0));
        add("kappa", std::to_string(m.kappa));
        add("vbar", std::to_string(m.vbar));
        add("gamma", std::to_string(m.gamma));
        add("lambda", std::to_string(m.lambda));
        add("theta", std::to_string(m.theta));
        add("eta", std::to_string(m.eta));
        add("sigma", std::to_string(m.sigma));
        add("rho_xv", std::to_string(m.rho_xv));
        add("rho_xr", std::to_string(m.rho_xr));
        const ContractSpec& c = cfg.resolved_contract;
        s += "[contract]\n";
        add("kind", to_string(c.kind));
        add("omega", std::to_string(c.omega));
        add("strike", std::to_string(c.strike));
        add("tenor", std::to_string(c.tenor));
        if (c.kind == ContractKind::DownAndOutBarrier)
            add("barrier", std::to_string(c.barrier));
        s += "[grid]\n";
        add("monitoring_dates", std::to_string(cfg.monitoring_dates));
        add("dt_qe", std::to_string(cfg.dt_qe));
    }
    s += "[credit]\n";
    add("hazard_rate", std::to_string(cfg.credit.hazard_rate));
    add("recovery", std::to_string(cfg.credit.recovery));
    add("pfe_alpha", std::to_string(cfg.credit.pfe_alpha));
    return s;
}

}  // namespace sgbm
