#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinlab/experiments.hpp"
#include "thinlab/flattening.hpp"
#include "thinlab/io.hpp"

namespace thinlab {

struct RunConfig {
    std::string group_file; // empty: built-in example group
    double theta = 0.0;     // 0: measured
    int degree = 16;
    int depth = 5;
    std::vector<double> a{0.0};
    std::vector<double> b{0.0};
    std::vector<int> q{5, 7, 11};
    int p = 0;        // 0: detect
    int r_blocks = 2; // r'
    int l = 0;        // 0: p + 1
    std::vector<std::uint64_t> seeds{7};
    int blocks = 3;   // decay budget J
    int y = 0, z = 0; // return-set endpoints, 0-based
    std::vector<int> tail{0, 0};
    int k_max = 60;
    std::string out = "out";
};

inline void validate_config(const RunConfig& c) {
    if (c.q.empty() || c.a.empty() || c.b.empty() || c.seeds.empty())
        throw Error(ErrorKind::InvalidArgument, "q, a, b and seed lists must be nonempty");
    std::set<int> seen;
    for (int q : c.q) {
        if (q < 1) throw Error(ErrorKind::InvalidArgument, "q = " + std::to_string(q));
        if (!square_free(q)) throw Error(ErrorKind::NotSquareFree, "q = " + std::to_string(q));
        if (!seen.insert(q).second) throw Error(ErrorKind::InvalidArgument, "q listed twice: " + std::to_string(q));
    }
    if (c.degree < 2) throw Error(ErrorKind::InvalidArgument, "degree must be >= 2");
    if (c.depth < 1) throw Error(ErrorKind::InvalidArgument, "depth must be >= 1");
    if (c.r_blocks < 2) throw Error(ErrorKind::InvalidArgument, "r' must be >= 2");
    if (c.blocks < 1) throw Error(ErrorKind::InvalidArgument, "decay budget must be >= 1");
}

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigParse, e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::ConfigParse, "config must be a JSON object");
    RunConfig c;
    try {
        if (j.contains("group")) c.group_file = j["group"].get<std::string>();
        if (j.contains("theta")) c.theta = j["theta"].get<double>();
        if (j.contains("degree")) c.degree = j["degree"].get<int>();
        if (j.contains("depth")) c.depth = j["depth"].get<int>();
        if (j.contains("a")) c.a = j["a"].get<std::vector<double>>();
        if (j.contains("b")) c.b = j["b"].get<std::vector<double>>();
        if (j.contains("q")) c.q = j["q"].get<std::vector<int>>();
        if (j.contains("p")) c.p = j["p"].get<int>();
        if (j.contains("r_blocks")) c.r_blocks = j["r_blocks"].get<int>();
        if (j.contains("l")) c.l = j["l"].get<int>();
        if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("blocks")) c.blocks = j["blocks"].get<int>();
        if (j.contains("y")) c.y = j["y"].get<int>() - 1;
        if (j.contains("z")) c.z = j["z"].get<int>() - 1;
        if (j.contains("tail")) {
            c.tail.clear();
            for (int v : j["tail"].get<std::vector<int>>()) c.tail.push_back(v - 1);
        }
        if (j.contains("k_max")) c.k_max = j["k_max"].get<int>();
        if (j.contains("out")) c.out = j["out"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigParse, e.what());
    }
    return c;
}

// Shared state for one run: group, coding, thermodynamics.
struct RunContext {
    RunConfig config;
    SchottkyData data;
    MarkovModel model;
    std::unique_ptr<Thermo> thermo;
    std::map<int, std::shared_ptr<const CylinderSpace>> spaces;
    std::optional<LevelDetection> level;

    explicit RunContext(RunConfig c) : config(std::move(c)) {
        data = config.group_file.empty() ? example_group() : load_group_file(config.group_file);
        require_valid(data);
        model = build_markov_model(data);
        ThermoOptions opt;
        opt.degree = config.degree;
        opt.theta = config.theta;
        thermo = std::make_unique<Thermo>(model, opt);
    }

    std::shared_ptr<const CylinderSpace> space(int depth) {
        auto it = spaces.find(depth);
        if (it == spaces.end()) it = spaces.emplace(depth, std::make_shared<const CylinderSpace>(*thermo, depth)).first;
        return it->second;
    }

    int return_level() {
        if (config.p > 0) return config.p;
        if (!level) level = detect_level(data, model, config.q);
        return level->p;
    }
    long q0() {
        if (!level) level = detect_level(data, model, config.q);
        return level->q0;
    }
    int block_length() { return config.l > 0 ? config.l : return_level() + 1; }
};

struct CommandResult {
    std::vector<std::filesystem::path> artifacts;
    nlohmann::json summary;
    int exit_code = 0;
};

inline std::filesystem::path emit_json(const RunConfig& c, const std::string& cmd, const nlohmann::json& j,
                                       const std::string& stamp) {
    auto p = artifact_path(c.out, cmd, "json", stamp);
    write_text(p, json_text(j));
    return p;
}

inline std::filesystem::path emit_csv(const RunConfig& c, const std::string& cmd, const CsvTable& t,
                                      const std::string& stamp) {
    auto p = artifact_path(c.out, cmd, "csv", stamp);
    write_text(p, t.body());
    return p;
}

inline CommandResult cmd_validate(const RunConfig& c, const std::string& stamp) {
    SchottkyData data = c.group_file.empty() ? example_group() : load_group_file(c.group_file);
    ValidationReport rep = validate_schottky(data);
    nlohmann::json j;
    j["valid"] = rep.valid;
    j["violations"] = nlohmann::json::array();
    for (const auto& v : rep.violations)
        j["violations"].push_back({{"kind", kind_name(v.kind)},
                                   {"first", v.first + 1},
                                   {"second", v.second + 1},
                                   {"detail", v.detail}});
    j["intervals"] = nlohmann::json::array();
    for (const auto& [lo, hi] : rep.intervals) j["intervals"].push_back({lo, hi});
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_json(c, "validate", j, stamp));
    out.exit_code = rep.valid ? 0 : 2;
    return out;
}

inline CommandResult cmd_delta(RunContext& ctx, const std::string& stamp) {
    const Thermo& th = *ctx.thermo;
    nlohmann::json j;
    j["delta"] = th.delta();
    j["gap"] = th.rpf0().gap;
    j["degree"] = th.grid().degree;
    j["residual"] = std::fabs(leading_eigenvalue(th.grid(), th.branches(), th.delta()) - 1.0);
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_json(ctx.config, "delta", j, stamp));
    return out;
}

inline CommandResult cmd_rpf(RunContext& ctx, const std::string& stamp) {
    const Thermo& th = *ctx.thermo;
    const RpfSolution& r = th.rpf0();
    nlohmann::json j;
    j["lambda0"] = r.lambda;
    j["nu_h"] = r.integrate(r.h);
    j["gap"] = r.gap;
    j["delta"] = th.delta();
    j["theta"] = th.theta();
    j["C_theta"] = th.coding_constant();
    j["T0"] = th.T0();
    j["A_f"] = th.A_f();
    j["C_f"] = th.C_f();
    CsvTable t({"a", "lambda"});
    for (double a : ctx.config.a) t.row({CsvTable::cell(a), CsvTable::cell(th.lambda(a))});
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_json(ctx.config, "rpf", j, stamp));
    out.artifacts.push_back(emit_csv(ctx.config, "rpf", t, stamp));
    return out;
}

inline CommandResult cmd_cayley(RunContext& ctx, const std::string& stamp) {
    const int p = ctx.return_level();
    ReturnSet S = build_return_set(ctx.model, ctx.config.y, ctx.config.z, p);
    CsvTable t({"q", "degree", "lambda2", "epsilon", "lambda_min", "diameter"});
    nlohmann::json j;
    j["p"] = p;
    j["return_set_size"] = S.elements.size();
    double eps_min = INFINITY;
    for (int q : ctx.config.q) {
        auto G = group_mod_q(q);
        CayleyGap g = cayley_gap(S, *G);
        GenerationCertificate cert = generates_full(S, *G);
        t.row({CsvTable::cell(q), CsvTable::cell(g.lambda1), CsvTable::cell(g.lambda2), CsvTable::cell(g.epsilon),
               CsvTable::cell(g.lambda_min), CsvTable::cell(cert.diameter)});
        eps_min = std::min(eps_min, g.epsilon);
    }
    j["epsilon_min"] = eps_min;
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_csv(ctx.config, "cayley", t, stamp));
    out.artifacts.push_back(emit_json(ctx.config, "cayley", j, stamp));
    return out;
}

inline nlohmann::json flattening_json(const FlatteningReport& r) {
    nlohmann::json j;
    j["q"] = r.q;
    j["p"] = r.p;
    j["l"] = r.l;
    j["r_blocks"] = r.r_blocks;
    j["r"] = r.r;
    j["s"] = r.s;
    j["tail"] = r.tail;
    j["nu1_identity_residual"] = r.nu1_identity_residual;
    j["log_nu_ratio"] = r.log_nu_ratio;
    j["log_nu_bound"] = r.log_nu_bound;
    j["log_flatness"] = r.log_flatness;
    j["log_flatness_bound"] = r.log_flatness_bound;
    j["eta_contraction"] = r.eta_contraction;
    j["epsilon"] = r.epsilon;
    j["log_one_minus_c"] = r.log_one_minus_c;
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : r.blocks)
        j["blocks"].push_back({{"block", b.block}, {"log_flatness", b.log_flatness}, {"contraction", b.contraction}});
    j["nu_contraction"] = r.nu_contraction;
    j["young_ratio"] = r.young_ratio;
    j["mu_new_norm"] = r.mu_new_norm;
    j["mu_l2"] = r.mu_l2;
    j["nu_l1"] = r.nu_l1;
    j["bound_plain"] = r.bound_plain;
    j["bound_sharp"] = r.bound_sharp;
    j["operator_ratio"] = r.operator_ratio;
    j["flattening_ratio"] = r.flattening_ratio;
    j["checks"] = {{"nu_identity", r.nu_identity_ok}, {"nu_bound", r.nu_bound_ok}, {"nearly_flat", r.flat_ok},
                   {"eta", r.eta_ok},                 {"young", r.young_ok},       {"new_norm", r.new_norm_ok}};
    return j;
}

inline CommandResult cmd_flatten(RunContext& ctx, const std::string& stamp) {
    const RunConfig& c = ctx.config;
    const int p = ctx.return_level();
    const int l = ctx.block_length();
    ReturnSet S = build_return_set(ctx.model, c.y, c.z, p);
    nlohmann::json j;
    j["reports"] = nlohmann::json::array();
    CsvTable t({"q", "log_N", "flattening_ratio", "operator_ratio"});
    std::vector<double> xs, ys, ys_op;
    for (int q : c.q) {
        auto G = group_mod_q(q);
        NewSpaceDecomposition dec = build_decomposition(G);
        FlatteningInput in;
        in.xi = cd(c.a.front(), c.b.front());
        in.x = omega(ctx.model, c.y);
        in.p = p;
        in.l = l;
        in.r_blocks = c.r_blocks;
        in.tail = c.tail;
        in.epsilon = cayley_gap(S, *G).epsilon;
        in.phi_seed = c.seeds.front();
        FlatteningReport r = flattening_pipeline(*ctx.thermo, dec, in);
        j["reports"].push_back(flattening_json(r));
        const double logN = std::log(static_cast<double>(q));
        t.row({CsvTable::cell(q), CsvTable::cell(logN), CsvTable::cell(r.flattening_ratio),
               CsvTable::cell(r.operator_ratio)});
        xs.push_back(logN);
        ys.push_back(std::log(r.flattening_ratio));
        ys_op.push_back(std::log(r.operator_ratio));
    }
    if (xs.size() >= 2) {
        j["trend_slope"] = ls_slope(xs, ys);
        j["operator_trend_slope"] = ls_slope(xs, ys_op);
    }
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_json(c, "flatten", j, stamp));
    out.artifacts.push_back(emit_csv(c, "flatten", t, stamp));
    return out;
}

inline CommandResult cmd_decay(RunContext& ctx, const std::string& stamp) {
    const RunConfig& c = ctx.config;
    auto space = ctx.space(c.depth);
    const int l = ctx.block_length();
    CsvTable t({"q", "a", "b", "seed", "j", "norm", "norm_uniform", "bound"});
    nlohmann::json j;
    j["curves"] = nlohmann::json::array();
    for (int q : c.q) {
        auto G = group_mod_q(q);
        NewSpaceDecomposition dec = build_decomposition(G);
        DecaySchedule sch = make_schedule(*ctx.thermo, q, l);
        std::optional<ReturnSet> S;
        if (q > 1) S = build_return_set(ctx.model, c.y, c.z, ctx.return_level());
        for (double a : c.a)
            for (double b : c.b) {
                CongruenceOperator M(space, G, cd(a, b));
                for (std::uint64_t seed : c.seeds) {
                    DecayOptions opt;
                    opt.blocks = c.blocks;
                    DecayCurve curve = decay_small_b(M, dec, sch, seed, opt, S ? &*S : nullptr);
                    for (std::size_t k = 0; k < curve.norms.size(); ++k)
                        t.row({CsvTable::cell(q), CsvTable::cell(a), CsvTable::cell(b),
                               std::to_string(seed), CsvTable::cell(static_cast<long>(k)),
                               CsvTable::cell(curve.norms[k]), CsvTable::cell(curve.uniform_norms[k]),
                               CsvTable::cell(curve.bounds[k])});
                    j["curves"].push_back({{"q", q},
                                           {"a", a},
                                           {"b", b},
                                           {"seed", seed},
                                           {"r", sch.r},
                                           {"s", sch.s},
                                           {"schedule_valid", sch.valid()},
                                           {"rate", curve.rate},
                                           {"step_factor", curve.step_factor},
                                           {"below_bound", curve.below_bound}});
                }
            }
    }
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_csv(c, "decay", t, stamp));
    out.artifacts.push_back(emit_json(c, "decay", j, stamp));
    return out;
}

inline CommandResult cmd_twist(RunContext& ctx, const std::string& stamp) {
    const RunConfig& c = ctx.config;
    auto space = ctx.space(c.depth);
    CsvTable t({"b", "radius", "dense_radius", "degree"});
    nlohmann::json j;
    j["radii"] = nlohmann::json::array();
    for (double b : c.b) {
        TwistedRadius r = twisted_radius(*ctx.thermo, *space, b, c.k_max, c.seeds.front(), 3, c.a.front());
        t.row({CsvTable::cell(b), CsvTable::cell(r.radius), CsvTable::cell(r.dense_radius), CsvTable::cell(r.degree)});
        j["radii"].push_back({{"b", b}, {"radius", r.radius}, {"dense_radius", r.dense_radius}, {"degree", r.degree}});
    }
    CommandResult out;
    out.summary = j;
    out.artifacts.push_back(emit_csv(c, "twist", t, stamp));
    out.artifacts.push_back(emit_json(c, "twist", j, stamp));
    return out;
}

// Merge every artifact in the output directory; per-q uniformity from decay and cayley artifacts.
inline CommandResult cmd_report(const RunConfig& c, const std::string& stamp) {
    namespace fs = std::filesystem;
    nlohmann::json merged;
    merged["artifacts"] = nlohmann::json::object();
    std::map<int, nlohmann::json> per_q;
    std::vector<fs::path> files;
    if (fs::exists(c.out))
        for (const auto& e : fs::directory_iterator(c.out))
            if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        if (name.rfind("report-", 0) == 0) continue;
        if (f.extension() == ".json") {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(read_text(f));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorKind::ConfigParse, name + ": " + e.what());
            }
            merged["artifacts"][name] = doc;
            if (name.rfind("decay-", 0) == 0 && doc.contains("curves"))
                for (const auto& cv : doc["curves"]) {
                    auto& s = per_q[cv["q"].get<int>()];
                    double rate = cv["rate"].get<double>();
                    s["rate_min"] = s.contains("rate_min") ? std::min(s["rate_min"].get<double>(), rate) : rate;
                    s["rate_max"] = s.contains("rate_max") ? std::max(s["rate_max"].get<double>(), rate) : rate;
                    bool below = cv["below_bound"].get<bool>();
                    s["below_bound"] = s.contains("below_bound") ? (s["below_bound"].get<bool>() && below) : below;
                    s["curves"] = s.value("curves", 0) + 1;
                }
        } else if (f.extension() == ".csv") {
            std::string body = read_text(f);
            merged["artifacts"][name] = {{"rows", std::count(body.begin(), body.end(), '\n') - 1}};
            if (name.rfind("cayley-", 0) == 0) {
                std::istringstream in(body);
                std::string line;
                std::getline(in, line);
                while (std::getline(in, line)) {
                    std::vector<std::string> cells;
                    std::stringstream ls(line);
                    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
                    if (cells.size() >= 4) per_q[std::stoi(cells[0])]["epsilon"] = std::stod(cells[3]);
                }
            }
        }
    }
    merged["uniformity"] = nlohmann::json::object();
    double rmin = INFINITY, rmax = 0.0;
    for (auto& [q, s] : per_q) {
        merged["uniformity"][std::to_string(q)] = s;
        if (q > 1 && s.contains("rate_max")) {
            rmin = std::min(rmin, s["rate_min"].get<double>());
            rmax = std::max(rmax, s["rate_max"].get<double>());
        }
    }
    if (rmax > 0.0) merged["rate_spread"] = rmax / rmin;
    CommandResult out;
    out.summary = merged;
    out.artifacts.push_back(emit_json(c, "report", merged, stamp));
    return out;
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"validate", "delta",  "rpf",   "cayley",
                                                "flatten",  "decay", "twist", "report"};
    return names;
}

// Runs one command; thinlab::Error maps to its exit code with the kind on stderr.
inline int run_command(const std::string& cmd, const RunConfig& c, std::ostream& log = std::cerr,
                       CommandResult* result = nullptr) {
    try {
        validate_config(c);
        const std::string stamp = timestamp_now();
        CommandResult r;
        if (cmd == "validate") {
            r = cmd_validate(c, stamp);
        } else if (cmd == "report") {
            r = cmd_report(c, stamp);
        } else {
            RunContext ctx(c);
            if (cmd == "delta") r = cmd_delta(ctx, stamp);
            else if (cmd == "rpf") r = cmd_rpf(ctx, stamp);
            else if (cmd == "cayley") r = cmd_cayley(ctx, stamp);
            else if (cmd == "flatten") r = cmd_flatten(ctx, stamp);
            else if (cmd == "decay") r = cmd_decay(ctx, stamp);
            else if (cmd == "twist") r = cmd_twist(ctx, stamp);
            else throw Error(ErrorKind::InvalidArgument, "unknown command " + cmd);
        }
        for (const auto& p : r.artifacts) log << p.string() << '\n';
        if (result) *result = r;
        return r.exit_code;
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    }
}

}  // namespace thinlab
