#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace thinlab;

namespace {

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

Word random_word(std::mt19937_64& rng, int len) {
    std::uniform_int_distribution<int> sym(0, 3);
    Word w{sym(rng)};
    while (static_cast<int>(w.size()) < len) {
        int s = sym(rng);
        if (model().allowed(w.back(), s)) w.push_back(s);
    }
    return w;
}

double rel(const FiberMatrix& a, const FiberMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

template <class Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
    try {
        fn();
        ADD_FAILURE() << "expected " << kind_name(kind);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind) << e.what();
    }
}

}  // namespace

TEST(GroupModQ, OrdersMatchEnumeration) {
    EXPECT_EQ(group_mod_q(5)->order(), 120u);
    EXPECT_EQ(group_mod_q(6)->order(), 144u);
    for (int q = 1; q <= 21; ++q) {
        if (!square_free(q)) continue;
        auto G = group_mod_q(q);
        EXPECT_EQ(static_cast<long>(G->order()), oracle::count_sl2(q)) << "q = " << q;
        EXPECT_EQ(G->order(), sl2_order(q));
    }
}

TEST(GroupModQ, Errors) {
    expect_error(ErrorKind::NotSquareFree, [] { group_mod_q(4); });
    expect_error(ErrorKind::NotSquareFree, [] { group_mod_q(18); });
    expect_error(ErrorKind::BadPrime, [] { group_mod_q(6, 2); });
    expect_error(ErrorKind::TooLarge, [] { group_mod_q(101); });
    expect_error(ErrorKind::InvalidArgument, [] { group_mod_q(0); });
}

TEST(GroupModQ, ClosedUnderProductAndInverse) {
    for (int q : {5, 6, 7, 15}) {
        auto G = group_mod_q(q);
        const int n = static_cast<int>(G->order());
        std::mt19937_64 rng(q);
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int t = 0; t < 2000; ++t) {
            int a = pick(rng), b = pick(rng);
            int ab = G->mul(a, b);
            ASSERT_GE(ab, 0);
            const auto& e = G->element(ab);
            EXPECT_EQ(((static_cast<long>(e[0]) * e[3] - static_cast<long>(e[1]) * e[2]) % q + q) % q, 1 % q);
            EXPECT_EQ(G->mul(a, G->inv(a)), G->identity());
            EXPECT_EQ(G->mul(G->mul(a, b), G->inv(b)), a);
        }
    }
}

TEST(Cocycle, IdentityHomomorphismAndSentinel) {
    const auto& m = model();
    auto G = group_mod_q(35);
    auto G1 = group_mod_q(1);
    EXPECT_EQ(G->index_of(cocycle_mod(m, *G, {2})), G->identity());
    EXPECT_EQ(G->index_of(cocycle_mod(m, *G, {})), G->identity());
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        Word w = random_word(rng, 9);
        const std::size_t cut = 1 + t % 7;
        Word head(w.begin(), w.begin() + static_cast<long>(cut) + 1), tail(w.begin() + static_cast<long>(cut), w.end());
        auto whole = cocycle_mod(m, *G, w);
        EXPECT_EQ(whole, G->multiply(cocycle_mod(m, *G, head), cocycle_mod(m, *G, tail)));
        EXPECT_EQ(whole, G->reduce(trajectory_cocycle(m, w)));
        EXPECT_EQ(G1->index_of(cocycle_mod(m, *G1, w)), G1->identity());
    }
    expect_error(ErrorKind::InadmissibleWord, [&] { cocycle_mod(m, *G, {0, 1}); });
}

TEST(CongruenceOperator, ScalarCaseMatchesPointwiseOperator) {
    const Thermo& th = thermo();
    auto S = space(4);
    auto G1 = group_mod_q(1);
    // locate depth-4 cylinders geometrically, not through the word table
    std::vector<Interval> cyl(S->size());
    for (std::size_t i = 0; i < S->size(); ++i) cyl[i] = cylinder_interval(th.model(), S->word(i));
    for (cd xi : {cd(0, 0), cd(0.02, 0.7), cd(-0.03, -0.4)}) {
        CongruenceOperator M(S, G1, xi);
        CongruenceFunction H = random_function(S, G1, 3);
        auto lookup = [&](int j, double up) -> cd {
            for (std::size_t i = 0; i < cyl.size(); ++i)
                if (S->word(i)[0] == j && up >= cyl[i].lo && up <= cyl[i].hi) return H.values(static_cast<long>(i), 0);
            ADD_FAILURE() << "no cylinder contains " << up;
            return 0.0;
        };
        CongruenceFunction out = M.apply(H);
        for (std::size_t i = 0; i < S->size(); ++i) {
            cd direct = th.apply_at(xi, S->word(i)[0], S->anchor(i), lookup);
            EXPECT_NEAR(std::abs(out.values(static_cast<long>(i), 0) - direct), 0.0, 1e-12);
        }
    }
}

TEST(CongruenceOperator, ConstantsAreFixedAtZero) {
    auto S = space(5);
    for (int q : {1, 5, 6}) {
        auto G = group_mod_q(q);
        CongruenceOperator M(S, G, cd(0, 0));
        CongruenceFunction H(S, G);
        H.values.setConstant(cd(0.3, -1.2));
        CongruenceFunction out = congruence_apply(M, H, 3);
        EXPECT_LE(rel(out.values, H.values), 1e-10) << "q = " << q;
    }
}

TEST(CongruenceOperator, NormBounds) {
    const Thermo& th = thermo();
    auto S = space(5);
    const double ceiling = th.model().n * std::exp(th.T0());
    for (cd xi : {cd(0, 0), cd(0.04, 0.9), cd(-0.04, -0.9)}) {
        auto G = group_mod_q(7);
        CongruenceOperator M(S, G, xi);
        EXPECT_LE(M.weight_bound(), ceiling);
        EXPECT_LE(M.l2_weight_bound(), ceiling);
        CongruenceFunction H = random_function(S, G, 11);
        for (int k = 0; k < 5; ++k) {
            CongruenceFunction next = M.apply(H);
            EXPECT_LE(l2_norm(next), M.l2_weight_bound() * l2_norm(H) * (1 + 1e-12));
            EXPECT_LE(sup_norm(next), M.weight_bound() * sup_norm(H) * (1 + 1e-12));
            H = next;
        }
    }
    auto G5 = group_mod_q(5);
    CongruenceOperator M(S, G5, cd(0, 0));
    expect_error(ErrorKind::ModulusMismatch, [&] { M.apply(random_function(S, group_mod_q(7), 1)); });
    expect_error(ErrorKind::InvalidArgument, [&] { CongruenceOperator bad(S, G5, cd(0.06, 0)); });
}

TEST(CongruenceOperator, FiberActionIsUnitary) {
    auto G = group_mod_q(15);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXcd phi(static_cast<long>(G->order()));
    for (long i = 0; i < phi.size(); ++i) phi[i] = cd(gauss(rng), gauss(rng));
    for (int h : {0, 17, 999}) {
        auto perm = G->right_translation(h);
        std::vector<int> sorted = perm;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], static_cast<int>(i));
        Eigen::VectorXcd moved(phi.size());
        for (long g = 0; g < phi.size(); ++g) moved[g] = phi[perm[g]];
        EXPECT_NEAR(moved.squaredNorm(), phi.squaredNorm(), 1e-9 * phi.squaredNorm());
    }
}

TEST(Decomposition, PrimeHasTwoPieces) {
    auto dec = build_decomposition(group_mod_q(7));
    EXPECT_EQ(dec.levels(), (std::vector<int>{1, 7}));
    EXPECT_EQ(dec.dimension(1), 1);
    EXPECT_EQ(dec.dimension(7), 335);
}

TEST(Decomposition, DimensionsAtFifteen) {
    auto G = group_mod_q(15);
    auto dec = build_decomposition(G);
    const long n = static_cast<long>(G->order());
    long total = 0;
    for (int d : dec.levels()) {
        // trace of an idempotent = rank, computed column by column
        double trace = 0.0;
        for (long g = 0; g < n; ++g) trace += dec.project(d, Eigen::VectorXcd::Unit(n, g)).real()[g];
        EXPECT_NEAR(trace, static_cast<double>(dec.dimension(d)), 1e-8) << "level " << d;
        total += dec.dimension(d);
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(dec.dimension(15) + dec.dimension(5) + dec.dimension(3) + 1, n);
}

TEST(Decomposition, ProjectorsAreOrthogonalIdempotentSelfAdjoint) {
    auto G = group_mod_q(15);
    auto dec = build_decomposition(G);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const long n = static_cast<long>(G->order());
    auto rnd = [&] {
        Eigen::VectorXcd v(n);
        for (long i = 0; i < n; ++i) v[i] = cd(gauss(rng), gauss(rng));
        return v;
    };
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXcd u = rnd(), v = rnd();
        Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(n);
        for (int d : dec.levels()) {
            Eigen::VectorXcd ev = dec.project(d, v);
            sum += ev;
            EXPECT_LE((dec.project(d, ev) - ev).norm(), 1e-10 * v.norm());
            EXPECT_LE(std::abs(dec.project(d, u).dot(v) - u.dot(ev)), 1e-10 * u.norm() * v.norm());
            for (int e : dec.levels())
                if (e != d) EXPECT_LE(dec.project(e, ev).norm(), 1e-10 * v.norm());
        }
        EXPECT_LE((sum - v).norm(), 1e-10 * v.norm());
    }
}

TEST(Decomposition, PushdownScalesBySpade) {
    auto G = group_mod_q(15);
    auto dec = build_decomposition(G);
    auto S = space(3);
    const double theta = thermo().theta();
    for (int d : {3, 5}) {
        CongruenceFunction H = random_new_vector_function(S, dec, 40 + d, d);
        auto push = dec.project_and_scale(H, d);
        EXPECT_DOUBLE_EQ(push.spade, static_cast<double>(G->order()) / static_cast<double>(group_mod_q(d)->order()));
        EXPECT_NEAR(push.norm_full / push.norm_projected, std::sqrt(push.spade), 1e-9);
        double lip_full = lipschitz_seminorm(H, theta), lip_down = lipschitz_seminorm(push.function, theta);
        EXPECT_NEAR(lip_full / lip_down, std::sqrt(push.spade), 1e-8);
    }
    CongruenceFunction H = random_new_vector_function(S, dec, 9);
    auto same = dec.project_and_scale(H, 15);
    EXPECT_EQ(same.spade, 1.0);
    EXPECT_LE(rel(same.function.values, H.values), 0.0);
    expect_error(ErrorKind::NotInNewSpace, [&] { dec.project_and_scale(H, 5); });
    expect_error(ErrorKind::ModulusMismatch, [&] { dec.project_and_scale(H, 7); });
    expect_error(ErrorKind::ModulusMismatch, [&] { dec.project(5, random_function(S, group_mod_q(7), 1)); });
}

TEST(Decomposition, CommutesWithOperatorAndPushdownIsEquivariant) {
    auto G = group_mod_q(15);
    auto dec = build_decomposition(G);
    auto S = space(3);
    const cd xi(0.02, 0.5);
    CongruenceOperator M(S, G, xi);
    std::map<int, std::unique_ptr<CongruenceOperator>> lower;
    for (int d : dec.levels()) lower[d] = std::make_unique<CongruenceOperator>(S, dec.quotient(d), xi);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CongruenceFunction H = random_function(S, G, 100 + seed);
        CongruenceFunction MH = M.apply(H);
        for (int d : dec.levels()) {
            CongruenceFunction eH = dec.project(d, H);
            EXPECT_LE(rel(dec.project(d, MH).values, M.apply(eH).values), 1e-9);
            auto down = dec.project_and_scale(eH, d);
            auto down_after = dec.project_and_scale(M.apply(eH), d);
            EXPECT_LE(rel(down_after.function.values, lower[d]->apply(down.function).values), 1e-9);
        }
    }
}

TEST(Decomposition, PythagorasAcrossLevels) {
    auto G = group_mod_q(15);
    auto dec = build_decomposition(G);
    auto S = space(3);
    const cd xi(-0.01, 0.3);
    CongruenceOperator M(S, G, xi);
    for (std::uint64_t seed : {1, 2, 3}) {
        CongruenceFunction H = random_function(S, G, seed);
        CongruenceFunction MkH = congruence_apply(M, H, 2);
        double lhs = std::pow(l2_norm(MkH), 2), rhs = 0.0;
        for (int d : dec.levels()) {
            CongruenceOperator Md(S, dec.quotient(d), xi);
            auto down = dec.project_and_scale(dec.project(d, H), d);
            rhs += down.spade * std::pow(l2_norm(congruence_apply(Md, down.function, 2)), 2);
        }
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-8);
    }
}
