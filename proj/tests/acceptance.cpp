// One PASS/FAIL line per acceptance criterion; exit 1 if any fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <random>

#include "oracles.hpp"

using namespace thinlab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::string csv; // compared byte-for-byte on rerun
};

const MarkovModel& model() {
    static const MarkovModel m = build_markov_model(example_group());
    return m;
}

const Thermo& thermo() {
    static const Thermo th(model());
    return th;
}

std::shared_ptr<const CylinderSpace> space(int depth) {
    static std::map<int, std::shared_ptr<const CylinderSpace>> cache;
    auto& s = cache[depth];
    if (!s) s = std::make_shared<const CylinderSpace>(thermo(), depth);
    return s;
}

const ReturnSet& return_set() {
    static const ReturnSet S = build_return_set(model(), 0, 0, 3);
    return S;
}

std::string g17(double v) { return fmt17(v); }

Word random_word(std::mt19937_64& rng, int len, int first = -1) {
    std::uniform_int_distribution<int> sym(0, 3);
    Word w{first >= 0 ? first : sym(rng)};
    while (static_cast<int>(w.size()) < len) {
        int s = sym(rng);
        if (model().allowed(w.back(), s)) w.push_back(s);
    }
    return w;
}

Outcome check_rpf_normalization() {
    Thermo th(model());
    const RpfSolution& r = th.rpf0();
    const double e_lambda = std::fabs(r.lambda - 1.0), e_nu = std::fabs(r.integrate(r.h) - 1.0);
    Outcome o;
    o.pass = e_lambda <= 1e-10 && e_nu <= 1e-12;
    o.detail = "|lambda0-1|=" + g17(e_lambda) + " |nu(h)-1|=" + g17(e_nu);
    return o;
}

Outcome check_critical_exponent() {
    const double delta = thermo().delta();
    const double ref = oracle::refinement_delta(model(), 8);
    Thermo fine(model(), ThermoOptions{32, 0.05, 0.0});
    const double e_ref = std::fabs(delta - ref), e_double = std::fabs(delta - fine.delta());
    Outcome o;
    o.pass = e_ref <= 1e-4 && e_double <= 1e-8;
    o.detail = "delta=" + g17(delta) + " oracle=" + g17(ref) + " doubling=" + g17(e_double);
    return o;
}

Outcome check_decomposition_identities() {
    auto G = group_mod_q(15);
    NewSpaceDecomposition dec = build_decomposition(G);
    auto S = space(3);
    const long n = static_cast<long>(G->order());
    std::mt19937_64 rng(15);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double orth = 0.0;
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXcd v(n);
        for (long i = 0; i < n; ++i) v[i] = cd(gauss(rng), gauss(rng));
        Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(n);
        for (int d : dec.levels()) {
            Eigen::VectorXcd ev = dec.project(d, v);
            sum += ev;
            orth = std::max(orth, (dec.project(d, ev) - ev).norm() / v.norm());
            for (int e : dec.levels())
                if (e != d) orth = std::max(orth, dec.project(e, ev).norm() / v.norm());
        }
        orth = std::max(orth, (sum - v).norm() / v.norm());
    }
    double norm_err = 0.0;
    for (int d : {1, 3, 5}) {
        auto push = dec.project_and_scale(random_new_vector_function(S, dec, 50 + d, d), d);
        norm_err = std::max(norm_err, std::fabs(push.norm_full - std::sqrt(push.spade) * push.norm_projected) /
                                          push.norm_full);
    }
    const cd xi(0.02, 0.5);
    CongruenceOperator M(S, G, xi);
    std::map<int, std::unique_ptr<CongruenceOperator>> lower;
    for (int d : dec.levels()) lower[d] = std::make_unique<CongruenceOperator>(S, dec.quotient(d), xi);
    double comm = 0.0, equi = 0.0;
    auto rel = [](const FiberMatrix& a, const FiberMatrix& b) {
        return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int level = dec.levels()[seed % dec.levels().size()];
        CongruenceFunction H = random_new_vector_function(S, dec, 200 + seed, level);
        CongruenceFunction MH = M.apply(H);
        for (int d : dec.levels()) comm = std::max(comm, rel(dec.project(d, MH).values, M.apply(dec.project(d, H)).values));
        auto down = dec.project_and_scale(H, level);
        auto down_after = dec.project_and_scale(MH, level);
        equi = std::max(equi, rel(down_after.function.values, lower[level]->apply(down.function).values));
    }
    Outcome o;
    o.pass = orth <= 1e-10 && norm_err <= 1e-9 && comm <= 1e-9 && equi <= 1e-9;
    o.detail = "orth=" + g17(orth) + " norm=" + g17(norm_err) + " e.M=" + g17(comm) + " proj.M=" + g17(equi);
    o.csv = "orth,norm,commute,equivariance\n" + g17(orth) + "," + g17(norm_err) + "," + g17(comm) + "," + g17(equi) + "\n";
    return o;
}

Outcome check_measure_lemmas() {
    const Thermo& th = thermo();
    const double C = std::exp(th.T0() * th.theta() / (1.0 - th.theta()));
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> rs(2, 6), gap(1, 3), sym(0, 3);
    std::uniform_real_distribution<double> as(-0.04, 0.04), bs(-1.0, 1.0);
    bool ok = true;
    double worst_abs = 0.0, worst_log = 0.0, worst_nu0 = 0.0;
    std::string csv = "q,r,s,tail,x,words,abs_excess,log_ratio,nu0_l1\n";
    for (int q : {5, 7}) {
        auto G = group_mod_q(q);
        for (int t = 0; t < 10; ++t) {
            const int r = rs(rng), s = r + gap(rng);
            Word tail = random_word(rng, s - r);
            SymbolicPoint x = extend_by_omega(model(), random_word(rng, 3));
            const cd xi(as(rng), bs(rng));
            MeasureSet ms = build_measures(th, G, xi, x, r, s, tail);
            double abs_excess = 0.0, log_ratio = 0.0;
            for (long g = 0; g < ms.mu.weights.size(); ++g) {
                const double hat = ms.muhat.weights[g].real(), nu = ms.nu.weights[g].real();
                abs_excess = std::max(abs_excess, std::abs(ms.mu.weights[g]) - hat * (1 + 1e-12));
                if (hat == 0.0 && nu == 0.0) continue;
                if (hat == 0.0 || nu == 0.0) {
                    log_ratio = INFINITY;
                    continue;
                }
                log_ratio = std::max(log_ratio, std::fabs(std::log(hat / nu)));
            }
            const double nu0 = ms.nu0.l1();
            ok = ok && ms.words > 0 && abs_excess <= 0.0 && log_ratio <= std::log(C) && nu0 <= th.C_f();
            worst_abs = std::max(worst_abs, abs_excess);
            worst_log = std::max(worst_log, log_ratio);
            worst_nu0 = std::max(worst_nu0, nu0);
            csv += std::to_string(q) + "," + std::to_string(r) + "," + std::to_string(s) + "," + word_string(tail) + "," +
                   word_string(x.prefix(4)) + "," + std::to_string(ms.words) + "," + g17(abs_excess) + "," + g17(log_ratio) + "," + g17(nu0) + "\n";
        }
    }
    Outcome o;
    o.pass = ok;
    o.detail = "max(|mu|-muhat)=" + g17(worst_abs) + " max|log muhat/nu|=" + g17(worst_log) + " (log C=" +
               g17(std::log(C)) + ") max|nu0|=" + g17(worst_nu0) + " (C_f=" + g17(th.C_f()) + ")";
    o.csv = csv;
    return o;
}

Outcome check_approximation_bound() {
    const Thermo& th = thermo();
    auto G = group_mod_q(5);
    auto S = space(6);
    const auto anchors = anchor_points(model(), 2);
    bool ok = true;
    double worst_ratio = 0.0;
    std::vector<double> xs, ys;
    std::string csv = "input,s_minus_r,residual,bound,ratio\n";
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CongruenceFunction H = random_lipschitz_function(S, G, 300 + seed, th.theta());
        for (int gap : {2, 3, 4}) {
            ApproxCheck c = approx_transfer_check(th, cd(0.02, 0.3), H, 1, 1 + gap, anchors);
            ok = ok && c.ratio <= 1.0;
            worst_ratio = std::max(worst_ratio, c.ratio);
            xs.push_back(gap);
            ys.push_back(std::log(c.residual));
            csv += std::to_string(seed) + "," + std::to_string(gap) + "," + g17(c.residual) + "," + g17(c.bound) + "," +
                   g17(c.ratio) + "\n";
        }
    }
    const double factor = std::exp(ls_slope(xs, ys));
    const double theta = th.theta();
    ok = ok && factor >= 0.5 * theta && factor <= 2.0 * theta;
    Outcome o;
    o.pass = ok;
    o.detail = "max ratio=" + g17(worst_ratio) + " residual factor per step=" + g17(factor) + " theta=" + g17(theta);
    o.csv = csv;
    return o;
}

Outcome check_expansion() {
    const std::vector<int> moduli{5, 7, 11, 13, 15, 35};
    LevelDetection lv = detect_level(example_group(), model(), moduli);
    ReturnSet S = build_return_set(model(), 0, 0, lv.p);
    bool ok = true;
    double eps_min = INFINITY;
    int worst_q = 0;
    std::string csv = "q,degree,lambda2,epsilon\n";
    for (int q : moduli) {
        if (std::gcd(static_cast<long>(q), lv.q0) != 1) continue;
        auto G = group_mod_q(q);
        ok = ok && generates_full(S, *G).full;
        CayleyGap g = cayley_gap(S, *G);
        ok = ok && g.lambda1 == static_cast<double>(reduced_generators(S.elements, *G).size());
        if (g.epsilon < eps_min) {
            eps_min = g.epsilon;
            worst_q = q;
        }
        csv += std::to_string(q) + "," + g17(g.lambda1) + "," + g17(g.lambda2) + "," + g17(g.epsilon) + "\n";
    }
    ok = ok && eps_min > 0.0;
    Outcome o;
    o.pass = ok;
    o.detail = "p=" + std::to_string(lv.p) + " q0=" + std::to_string(lv.q0) + " min eps=" + g17(eps_min) +
               " at q=" + std::to_string(worst_q);
    o.csv = csv;
    return o;
}

Outcome check_flattening_trend() {
    std::vector<double> xs, ys, ys_op;
    bool svd_ok = true;
    std::string csv = "q,flattening_ratio,operator_ratio,mu_new_norm,bound_plain\n";
    for (int q : {5, 7, 11, 13}) {
        auto G = group_mod_q(q);
        NewSpaceDecomposition dec = build_decomposition(G);
        FlatteningInput in;
        in.xi = cd(0.02, 0.3);
        in.x = omega(model(), 0);
        in.p = 3;
        in.l = 4;
        in.r_blocks = 2;
        in.tail = {0, 0};
        in.epsilon = cayley_gap(return_set(), *G).epsilon;
        FlatteningReport r = flattening_pipeline(thermo(), dec, in);
        if (q == 5 || q == 7) {
            // dense SVD path (n <= 400) against the plain (#F_q)^{1/2} |mu|_2 scaling
            svd_ok = svd_ok && G->order() <= kDenseSvdLimit && r.mu_new_norm <= r.bound_plain * (1 + 1e-10) &&
                     r.new_norm_ok;
        }
        xs.push_back(std::log(static_cast<double>(q)));
        ys.push_back(std::log(r.flattening_ratio));
        ys_op.push_back(std::log(r.operator_ratio));
        csv += std::to_string(q) + "," + g17(r.flattening_ratio) + "," + g17(r.operator_ratio) + "," +
               g17(r.mu_new_norm) + "," + g17(r.bound_plain) + "\n";
    }
    const double slope = ls_slope(xs, ys), slope_op = ls_slope(xs, ys_op);
    Outcome o;
    o.pass = slope <= -0.2 && svd_ok;
    o.detail = "slope=" + g17(slope) + " (operator-norm slope " + g17(slope_op) + ") svd bound " + (svd_ok ? "ok" : "violated");
    o.csv = csv;
    return o;
}

Outcome check_uniform_decay() {
    auto S = space(5);
    bool below = true;
    std::map<int, double> rate_max;
    double rmin = INFINITY, rmax = 0.0;
    std::string csv = "q,a,b,j,norm,bound,rate\n";
    for (int q : {5, 7, 11}) {
        auto G = group_mod_q(q);
        NewSpaceDecomposition dec = build_decomposition(G);
        DecaySchedule sch = make_schedule(thermo(), q, 4);
        for (double a : {0.0, 0.02, -0.02})
            for (double b : {0.0, 0.5, -0.5}) {
                CongruenceOperator M(S, G, cd(a, b));
                DecayCurve c = decay_small_b(M, dec, sch, 7, {}, &return_set());
                below = below && c.below_bound;
                rmin = std::min(rmin, c.rate);
                rmax = std::max(rmax, c.rate);
                for (std::size_t j = 0; j < c.norms.size(); ++j)
                    csv += std::to_string(q) + "," + g17(a) + "," + g17(b) + "," + std::to_string(j) + "," +
                           g17(c.norms[j]) + "," + g17(c.bounds[j]) + "," + g17(c.rate) + "\n";
            }
    }
    Outcome o;
    o.pass = below && rmax <= 2.0 * rmin;
    o.detail = std::string("below bound: ") + (below ? "all" : "not all") + " rates in [" + g17(rmin) + ", " + g17(rmax) + "]";
    o.csv = csv;
    return o;
}

Outcome check_twisted_contraction() {
    auto S = space(5);
    std::vector<double> radii;
    std::string csv = "b,radius,dense_radius\n";
    for (double b : {5.0, 20.0, 80.0}) {
        TwistedRadius r = twisted_radius(thermo(), *S, b, 60);
        radii.push_back(r.radius);
        csv += g17(b) + "," + g17(r.radius) + "," + g17(r.dense_radius) + "\n";
    }
    bool ok = true;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        ok = ok && radii[i] < 1.0;
        if (i > 0) ok = ok && radii[i] <= 1.05 * radii[i - 1];
    }
    Outcome o;
    o.pass = ok;
    o.detail = "radii b=5,20,80: " + g17(radii[0]) + ", " + g17(radii[1]) + ", " + g17(radii[2]);
    o.csv = csv;
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "rpf normalization", 5, check_rpf_normalization},
        {2, "critical exponent", 30, check_critical_exponent},
        {3, "decomposition identities", 60, check_decomposition_identities},
        {4, "measure lemmas", 60, check_measure_lemmas},
        {5, "approximation bound", 120, check_approximation_bound},
        {6, "expansion", 120, check_expansion},
        {7, "flattening trend", 300, check_flattening_trend},
        {8, "uniform decay", 600, check_uniform_decay},
        {9, "twisted contraction", 300, check_twisted_contraction},
    };
    bool all = true;
    std::map<int, std::string> first_csv;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const Error& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        all = all && pass;
        first_csv[c.id] = o.csv;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
                  << " [" << fmt17(secs).substr(0, 6) << " s, budget " << c.budget_s << " s]" << std::endl;
    }
    // determinism: rerun 3..9 and compare CSV bodies
    {
        bool same = true;
        std::string diff;
        for (const auto& c : criteria) {
            if (c.id < 3) continue;
            Outcome o;
            try {
                o = c.run();
            } catch (const Error& e) {
                o.csv = std::string("error: ") + e.what();
            }
            if (o.csv != first_csv[c.id]) {
                same = false;
                diff += " " + std::to_string(c.id);
            }
        }
        all = all && same;
        std::cout << (same ? "PASS" : "FAIL") << " criterion 10 (determinism): CSV bodies of criteria 3-9 "
                  << (same ? "byte-identical on rerun" : "differ:" + diff) << std::endl;
    }
    return all ? 0 : 1;
}
