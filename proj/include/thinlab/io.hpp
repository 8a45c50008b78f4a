#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinlab/error.hpp"

namespace thinlab {

// 17 significant digits, round-trips every double
inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    // cells are strings already; use cell() for numbers
    void row(std::vector<std::string> cells) {
        if (cells.size() != header_.size()) throw Error(ErrorKind::InvalidArgument, "csv row width");
        rows_.push_back(std::move(cells));
    }
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }

    std::string body() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += r[i];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    std::size_t size() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// nlohmann prints the shortest round-trip form; reports want a fixed 17 digits
inline void dump_json(const nlohmann::json& j, std::string& out, int indent = 0) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    const std::string close(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
    case nlohmann::json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        std::size_t k = 0;
        for (auto it = j.begin(); it != j.end(); ++it, ++k) {
            out += pad + nlohmann::json(it.key()).dump() + ": ";
            dump_json(it.value(), out, indent + 2);
            out += (k + 1 < j.size()) ? ",\n" : "\n";
        }
        out += close + "}";
        return;
    }
    case nlohmann::json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t k = 0; k < j.size(); ++k) {
            out += pad;
            dump_json(j[k], out, indent + 2);
            out += (k + 1 < j.size()) ? ",\n" : "\n";
        }
        out += close + "]";
        return;
    }
    case nlohmann::json::value_t::number_float: {
        double v = j.get<double>();
        out += std::isfinite(v) ? fmt17(v) : "null";
        return;
    }
    default:
        out += j.dump();
    }
}

inline std::string json_text(const nlohmann::json& j) {
    std::string out;
    dump_json(j, out);
    out += '\n';
    return out;
}

inline std::string timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

// <dir>/<command>-<timestamp>.<ext>, suffixed when the name is taken
inline std::filesystem::path artifact_path(const std::filesystem::path& dir, const std::string& command,
                                           const std::string& ext, const std::string& stamp = timestamp_now()) {
    std::filesystem::create_directories(dir);
    std::filesystem::path p = dir / (command + "-" + stamp + "." + ext);
    for (int k = 1; std::filesystem::exists(p); ++k)
        p = dir / (command + "-" + stamp + "-" + std::to_string(k) + "." + ext);
    return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + p.string());
    out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::ConfigParse, "cannot open " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace thinlab
