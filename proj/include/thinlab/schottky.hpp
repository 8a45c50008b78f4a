#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinlab/error.hpp"
#include "thinlab/mobius.hpp"

namespace thinlab {

struct IsometricDisk {
    double center = 0.0;
    double radius = 0.0;
    int owner = 0;        // generator index
    bool inverse = false; // disk of the inverse generator

    double lo() const { return center - radius; }
    double hi() const { return center + radius; }
};

// Symbol 2i is the isometric disk of generator i, symbol 2i+1 that of its inverse.
struct SchottkyData {
    std::vector<MobiusMap> generators;
    std::vector<IsometricDisk> disks;

    int symbols() const { return static_cast<int>(2 * generators.size()); }
    static int partner(int j) { return j ^ 1; }

    // generator whose isometric disk is disk j
    MobiusMap disk_generator(int j) const {
        const MobiusMap& g = generators[j / 2];
        return (j % 2 == 0) ? g : g.inverse();
    }
};

constexpr double kDiskMargin = 1e-9;

inline IsometricDisk isometric_disk(const MobiusMap& m, int owner, bool inverse) {
    IsometricDisk disk;
    disk.center = -static_cast<double>(m.d) / static_cast<double>(m.c);
    disk.radius = 1.0 / std::fabs(static_cast<double>(m.c));
    disk.owner = owner;
    disk.inverse = inverse;
    return disk;
}

// disks are filled only when every generator has c != 0
inline SchottkyData make_schottky(const std::vector<MobiusMap>& generators) {
    SchottkyData data;
    data.generators = generators;
    for (std::size_t i = 0; i < generators.size(); ++i)
        if (generators[i].c == 0) return data;
    for (std::size_t i = 0; i < generators.size(); ++i) {
        data.disks.push_back(isometric_disk(generators[i], static_cast<int>(i), false));
        data.disks.push_back(isometric_disk(generators[i].inverse(), static_cast<int>(i), true));
    }
    return data;
}

inline SchottkyData example_group() {
    return make_schottky({MobiusMap{2, 3, 1, 2}, MobiusMap{6, 35, 1, 6}});
}

struct Violation {
    ErrorKind kind;
    int first = -1;
    int second = -1;
    std::string detail;
};

struct ValidationReport {
    bool valid = true;
    std::vector<Violation> violations;
    std::vector<std::pair<double, double>> intervals;

    bool has(ErrorKind k) const {
        return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
    }
};

inline ValidationReport validate_schottky(const SchottkyData& data) {
    ValidationReport report;
    auto fail = [&](ErrorKind k, int i, int j, std::string msg) {
        report.valid = false;
        report.violations.push_back({k, i, j, std::move(msg)});
    };
    const int g = static_cast<int>(data.generators.size());
    for (int i = 0; i < g; ++i) {
        const MobiusMap& m = data.generators[i];
        if (m.det() != 1) fail(ErrorKind::DeterminantNotOne, i, -1, "generator " + std::to_string(i + 1) + " " + m.str());
        if (m.c == 0)
            fail(ErrorKind::ZeroLowerLeftEntry, i, -1, "generator " + std::to_string(i + 1) + " " + m.str());
        else if (!m.hyperbolic())
            fail(ErrorKind::NonHyperbolicGenerator, i, -1, "generator " + std::to_string(i + 1) + " " + m.str());
    }
    if (g < 2) fail(ErrorKind::TooFewGenerators, -1, -1, "need at least 2 generators, got " + std::to_string(g));
    if (!report.valid) return report;

    const int n = data.symbols();
    for (const auto& disk : data.disks) report.intervals.emplace_back(disk.lo(), disk.hi());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto &a = data.disks[i], &b = data.disks[j];
            bool apart = a.hi() + kDiskMargin < b.lo() || b.hi() + kDiskMargin < a.lo();
            if (!apart)
                fail(ErrorKind::OverlappingDisks, i, j,
                     "disk intervals " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " intersect");
        }
    if (!report.valid) return report;

    // ping-pong: G_j carries the boundary of disk j onto the boundary of disk j-bar and infinity into it
    for (int j = 0; j < n; ++j) {
        MobiusMap gj = data.disk_generator(j);
        const auto& src = data.disks[j];
        const auto& dst = data.disks[SchottkyData::partner(j)];
        double e1 = mobius_apply(gj, src.lo()).image, e2 = mobius_apply(gj, src.hi()).image;
        double lo = std::min(e1, e2), hi = std::max(e1, e2);
        double tol = 1e-9 * (1.0 + std::fabs(dst.center));
        double at_infinity = static_cast<double>(gj.a) / static_cast<double>(gj.c);
        if (std::fabs(lo - dst.lo()) > tol || std::fabs(hi - dst.hi()) > tol ||
            std::fabs(at_infinity - dst.center) > tol)
            fail(ErrorKind::OverlappingDisks, j, SchottkyData::partner(j), "isometric-circle law fails for symbol " +
                                                                           std::to_string(j + 1));
    }
    return report;
}

inline void require_valid(const SchottkyData& data) {
    ValidationReport report = validate_schottky(data);
    if (!report.valid) throw Error(report.violations.front().kind, report.violations.front().detail);
}

// {"generators": [[[a,b],[c,d]], ...]}
inline SchottkyData parse_group_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigParse, e.what());
    }
    if (!doc.is_object() || !doc.contains("generators") || !doc["generators"].is_array())
        throw Error(ErrorKind::ConfigParse, "expected an object with a \"generators\" array");
    std::vector<MobiusMap> gens;
    for (const auto& m : doc["generators"]) {
        auto ok = m.is_array() && m.size() == 2 && m[0].is_array() && m[1].is_array() && m[0].size() == 2 &&
                  m[1].size() == 2;
        if (ok)
            for (const auto& row : m)
                for (const auto& v : row) ok = ok && v.is_number_integer();
        if (!ok) throw Error(ErrorKind::ConfigParse, "generator must be [[a,b],[c,d]] with integer entries");
        gens.push_back({m[0][0].get<std::int64_t>(), m[0][1].get<std::int64_t>(), m[1][0].get<std::int64_t>(),
                        m[1][1].get<std::int64_t>()});
    }
    return make_schottky(gens);
}

inline SchottkyData load_group_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigParse, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_group_json(buf.str());
}

}  // namespace thinlab
