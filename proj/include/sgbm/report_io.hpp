// Exposure-report CSV serialization (shortest round-trip decimals, fixed
// column order), the relative-L2 report comparison, and path/bundle dumps.
#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "sgbm/common.hpp"
#include "sgbm/exposure.hpp"
#include "sgbm/path_engine.hpp"

namespace sgbm {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// temp-file-plus-rename so readers never observe partial output
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        SGBM_REQUIRE(out.good(), "cannot open for writing: " + tmp);
        out << content;
        SGBM_REQUIRE(out.good(), "write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string exposure_csv(const ExposureReport& rep) {
    std::string s = "t,EE,EEstar,PFE,DeltaEE,GammaEE\n";
    for (std::size_t m = 0; m < rep.t.size(); ++m) {
        s += format_double(rep.t[m]);
        s += ',';
        s += format_double(rep.ee[m]);
        s += ',';
        s += format_double(rep.ee_star[m]);
        s += ',';
        s += format_double(rep.pfe[m]);
        s += ',';
        s += format_double(rep.delta_ee[m]);
        s += ',';
        s += format_double(rep.gamma_ee[m]);
        s += '\n';
    }
    return s;
}

inline ExposureReport read_exposure_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    SGBM_REQUIRE(in.good(), "cannot open: " + path.string());
    std::string line;
    SGBM_REQUIRE(std::getline(in, line) && line.rfind("t,EE", 0) == 0,
                 "not an exposure CSV: " + path.string());
    ExposureReport rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        SGBM_REQUIRE(row.size() == 6, "bad CSV row in " + path.string());
        rep.t.push_back(row[0]);
        rep.ee.push_back(row[1]);
        rep.ee_star.push_back(row[2]);
        rep.pfe.push_back(row[3]);
        rep.delta_ee.push_back(row[4]);
        rep.gamma_ee.push_back(row[5]);
    }
    return rep;
}

struct CompareResult {
    double ee = 0.0, ee_star = 0.0, pfe = 0.0, delta_ee = 0.0, gamma_ee = 0.0;
};

// Relative L2 distance per quantity, normalized by the first report:
// (sum (a_m - b_m)^2 / sum a_m^2)^(1/2).
inline double relative_l2(std::span<const double> a, std::span<const double> b) {
    SGBM_REQUIRE(a.size() == b.size(), "relative_l2: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) || std::isnan(b[i])) continue;
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += a[i] * a[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

inline CompareResult compare_reports(const ExposureReport& a, const ExposureReport& b) {
    SGBM_REQUIRE(a.t.size() == b.t.size(), "compare: date grids differ");
    for (std::size_t i = 0; i < a.t.size(); ++i)
        SGBM_REQUIRE(std::abs(a.t[i] - b.t[i]) <= 1e-12 * std::max(1.0, a.t[i]),
                     "compare: date grids differ");
    CompareResult r;
    r.ee = relative_l2(a.ee, b.ee);
    r.ee_star = relative_l2(a.ee_star, b.ee_star);
    r.pfe = relative_l2(a.pfe, b.pfe);
    r.delta_ee = relative_l2(a.delta_ee, b.delta_ee);
    r.gamma_ee = relative_l2(a.gamma_ee, b.gamma_ee);
    return r;
}

inline std::string bundles_csv(const PathGrid& paths,
                               const std::vector<std::vector<int>>& assignments) {
    std::string s = "path,date,bundle\n";
    for (std::size_t m = 0; m < assignments.size(); ++m)
        for (std::size_t i = 0; i < assignments[m].size(); ++i) {
            s += std::to_string(i);
            s += ',';
            s += format_double(paths.grid.dates[m]);
            s += ',';
            s += std::to_string(assignments[m][i]);
            s += '\n';
        }
    return s;
}

inline std::string paths_csv(const PathGrid& paths) {
    std::string s = "path,date,x,v,r,disc\n";
    const int M = paths.grid.n_intervals();
    for (int i = 0; i < paths.n_paths; ++i)
        for (int m = 0; m <= M; ++m) {
            s += std::to_string(i);
            s += ',';
            s += format_double(paths.grid.dates[m]);
            s += ',';
            s += format_double(paths.x[m][i]);
            s += ',';
            s += format_double(paths.has_v() ? paths.v[m][i] : 0.0);
            s += ',';
            s += format_double(paths.has_r() ? paths.r[m][i] : 0.0);
            s += ',';
            s += format_double(paths.disc[m][i]);
            s += '\n';
        }
    return s;
}

}  // namespace sgbm
