#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "thinlab/cli.hpp"

namespace {

template <class T>
std::vector<T> split_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        std::stringstream cell(item);
        T v{};
        if (!(cell >> v) || !(cell >> std::ws).eof())
            throw thinlab::Error(thinlab::ErrorKind::ConfigParse, "bad list entry '" + item + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thinlab: transfer operators and congruence experiments for Schottky groups"};
    app.require_subcommand(1, 1);

    std::string config_file, group_file, q_list, a_list, b_list, seed_list, tail;
    std::optional<int> degree, depth, p, r, l, blocks, k_max, y, z;
    std::optional<double> theta;
    std::string out_dir;

    for (const auto& name : thinlab::command_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_file, "JSON run config");
        sub->add_option("--group", group_file, "JSON group file");
        sub->add_option("--q", q_list, "comma separated moduli");
        sub->add_option("--a", a_list, "comma separated real parts");
        sub->add_option("--b", b_list, "comma separated imaginary parts");
        sub->add_option("--seed", seed_list, "comma separated seeds");
        sub->add_option("--theta", theta, "theta override");
        sub->add_option("--degree", degree, "collocation degree");
        sub->add_option("--depth", depth, "cylinder depth");
        sub->add_option("--p", p, "return level");
        sub->add_option("--r", r, "r = r' l");
        sub->add_option("--l", l, "block length");
        sub->add_option("--blocks", blocks, "decay budget in blocks");
        sub->add_option("--k-max", k_max, "twisted iterates");
        sub->add_option("--y", y, "return-set start symbol (1-based)");
        sub->add_option("--z", z, "return-set end symbol (1-based)");
        sub->add_option("--tail", tail, "tail word, 1-based, comma separated");
        sub->add_option("--out", out_dir, "artifact directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    thinlab::RunConfig c;
    try {
        if (!config_file.empty()) c = thinlab::parse_config(thinlab::read_text(config_file));
        if (!group_file.empty()) c.group_file = group_file;
        if (!q_list.empty()) c.q = split_list<int>(q_list);
        if (!a_list.empty()) c.a = split_list<double>(a_list);
        if (!b_list.empty()) c.b = split_list<double>(b_list);
        if (!seed_list.empty()) c.seeds = split_list<std::uint64_t>(seed_list);
        if (theta) c.theta = *theta;
        if (degree) c.degree = *degree;
        if (depth) c.depth = *depth;
        if (p) c.p = *p;
        if (l) c.l = *l;
        if (r) {
            int len = c.l > 0 ? c.l : 0;
            if (len == 0) throw thinlab::Error(thinlab::ErrorKind::InvalidArgument, "--r needs --l");
            if (*r % len != 0) throw thinlab::Error(thinlab::ErrorKind::InvalidArgument, "r must be a multiple of l");
            c.r_blocks = *r / len;
        }
        if (blocks) c.blocks = *blocks;
        if (k_max) c.k_max = *k_max;
        if (y) c.y = *y - 1;
        if (z) c.z = *z - 1;
        if (!tail.empty()) {
            c.tail.clear();
            for (int v : split_list<int>(tail)) c.tail.push_back(v - 1);
        }
        if (!out_dir.empty()) c.out = out_dir;
    } catch (const thinlab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return thinlab::exit_code_for(e.kind());
    }
    return thinlab::run_command(cmd, c, std::cout);
}
