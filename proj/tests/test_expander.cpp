#include <gtest/gtest.h>

#include <optional>
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

const ReturnSet& level3() {
    static const ReturnSet S = build_return_set(model(), 0, 0, 3);
    return S;
}

Eigen::VectorXcd random_vector(long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXcd v(n);
    for (long i = 0; i < n; ++i) v[i] = cd(gauss(rng), gauss(rng));
    return v;
}

FlatteningReport flatten_at(int q) {
    auto G = group_mod_q(q);
    NewSpaceDecomposition dec = build_decomposition(G);
    FlatteningInput in;
    in.xi = cd(0.02, 0.3);
    in.x = omega(model(), 0);
    in.p = 3;
    in.l = 4;
    in.r_blocks = 2;
    in.tail = {0, 0};
    in.epsilon = cayley_gap(level3(), *G).epsilon;
    return flattening_pipeline(thermo(), dec, in);
}

}  // namespace

TEST(ReturnSet, ContainsIdentityAndGrowsWithLevel) {
    const MarkovModel& m = model();
    for (int y = 0; y < m.n; ++y)
        for (int z = 0; z < m.n; ++z)
            for (int p : {1, 2}) {
                ReturnSet S = build_return_set(m, y, z, p);
                if (S.elements.empty()) continue;
                std::set<MobiusMap> here(S.elements.begin(), S.elements.end());
                EXPECT_TRUE(here.count(MobiusMap::identity()));
                for (const auto& g : S.elements) {
                    EXPECT_EQ(g.det(), 1);
                    EXPECT_TRUE(here.count(g.inverse()));
                }
                for (int up : {p + 1, p + 2}) {
                    ReturnSet T = build_return_set(m, y, z, up);
                    std::set<MobiusMap> there(T.elements.begin(), T.elements.end());
                    for (const auto& g : S.elements) EXPECT_TRUE(there.count(g)) << g.str();
                }
            }
}

TEST(Generation, ClosuresAreSubgroups) {
    const ReturnSet& S = level3();
    auto G2 = group_mod_q(2);
    auto c2 = generates_full(S, *G2);
    EXPECT_FALSE(c2.full);
    EXPECT_EQ(G2->order() % c2.closure_size, 0u);
    for (int q : {5, 7, 11, 13, 15, 35}) {
        auto G = group_mod_q(q);
        auto c = generates_full(S, *G);
        EXPECT_TRUE(c.full) << "q = " << q;
        EXPECT_EQ(c.closure_size, G->order());
    }
    auto G5 = group_mod_q(5);
    EXPECT_TRUE(generates_full(build_return_set(model(), 0, 0, 2), *G5).full);
    // the generators themselves fail only at 2
    EXPECT_EQ(strong_approximation_failures(example_group(), primes_up_to(13)), std::vector<int>{2});
}

TEST(Generation, DetectedLevel) {
    LevelDetection d = detect_level(example_group(), model(), {5, 7, 11});
    EXPECT_EQ(d.p, 3);
    EXPECT_EQ(d.q0, 2);
    EXPECT_EQ(d.bad_primes, std::vector<int>{2});
}

TEST(Cayley, DegreeGapAndDenseSpectrum) {
    const ReturnSet& S = level3();
    auto G5 = group_mod_q(5);
    CayleyGap gap = cayley_gap(S, *G5);
    std::vector<int> gens = reduced_generators(S.elements, *G5);
    EXPECT_EQ(gap.lambda1, static_cast<double>(gens.size()));
    std::vector<double> ev = oracle::cayley_spectrum(gens, *G5);
    EXPECT_NEAR(ev.front(), gap.lambda1, 1e-9);
    EXPECT_NEAR(gap.lambda2, ev[1], 1e-8);
    EXPECT_NEAR(gap.lambda_min, ev.back(), 1e-8);
    EXPECT_GT(gap.epsilon, 0.0);
    for (int q : {7, 11, 13, 15, 35}) {
        CayleyGap g = cayley_gap(S, *group_mod_q(q));
        EXPECT_GT(g.epsilon, 0.0) << "q = " << q;
        EXPECT_LE(g.lambda2, g.lambda1);
        EXPECT_GE(g.lambda_min, -g.lambda1 - 1e-9);
    }
}

TEST(Cayley, ConjugationInvariance) {
    const ReturnSet& S = level3();
    const MobiusMap h{1, 1, 0, 1};
    ReturnSet T = S;
    for (auto& g : T.elements) g = h * g * h.inverse();
    for (int q : {5, 7}) {
        auto G = group_mod_q(q);
        EXPECT_NEAR(cayley_gap(S, *G).lambda2, cayley_gap(T, *G).lambda2, 1e-8) << "q = " << q;
    }
}

TEST(Cayley, ErrorsOnBadInput) {
    ReturnSet trivial;
    trivial.elements = {MobiusMap::identity()};
    trivial.symmetrized = true;
    try {
        cayley_gap(trivial, *group_mod_q(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotGenerating);
    }
    ReturnSet raw = build_return_set(model(), 0, 0, 3, false);
    try {
        cayley_gap(raw, *group_mod_q(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(Characters, MinimalNewDimension) {
    for (int p : {5, 7}) {
        auto G = group_mod_q(p);
        std::vector<double> deg = oracle::character_degrees(*G);
        double sum_sq = 0.0, min_nontrivial = INFINITY;
        for (double d : deg) {
            EXPECT_NEAR(d, std::round(d), 1e-6);
            sum_sq += d * d;
            if (d > 1.5) min_nontrivial = std::min(min_nontrivial, std::round(d));
        }
        EXPECT_NEAR(sum_sq, static_cast<double>(G->order()), 1e-5);
        EXPECT_EQ(min_nontrivial, min_new_dimension(p));
        EXPECT_EQ(min_nontrivial, 0.5 * (p - 1));
    }
    EXPECT_EQ(min_new_dimension(35), 6.0);
}

TEST(Convolution, Identities) {
    auto G = group_mod_q(7);
    const long n = static_cast<long>(G->order());
    Eigen::VectorXcd phi = random_vector(n, 1), psi = random_vector(n, 2);
    EXPECT_LE((convolve(dirac(G, G->identity()), phi) - phi).norm(), 1e-13 * phi.norm());
    for (int g : {3, 77, 200}) EXPECT_NEAR(convolve(dirac(G, g), phi).norm(), phi.norm(), 1e-10);
    // associativity of composition
    MeasureOnFq mu(G, "mu"), nu(G, "nu");
    mu.weights = random_vector(n, 3);
    nu.weights = random_vector(n, 4);
    EXPECT_LE((convolve(convolve_measures(mu, nu), phi) - convolve(mu, convolve(nu, phi))).norm(),
              1e-10 * phi.norm() * mu.l1() * nu.l1());
    // adjoint
    EXPECT_NEAR(std::abs(convolve(mu, phi).dot(psi) - phi.dot(convolve(adjoint(mu), psi))), 0.0,
                1e-9 * mu.l1() * phi.norm() * psi.norm());
    EXPECT_LE((convolution_matrix(mu) * phi - convolve(mu, phi)).norm(), 1e-10 * mu.l1() * phi.norm());
    // positive measure on the unit constant
    MeasureOnFq pos(G, "pos");
    pos.weights = random_vector(n, 5).cwiseAbs().cast<cd>();
    Eigen::VectorXcd uniform = Eigen::VectorXcd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(convolve(pos, uniform).norm(), pos.l1(), 1e-10 * pos.l1());
    // Young
    EXPECT_LE(convolve(mu, phi).norm(), mu.l1() * phi.norm() * (1 + 1e-12));
}

TEST(Measures, NuZeroMatchesExplicitWords) {
    const Thermo& th = thermo();
    auto G = group_mod_q(5);
    const SymbolicPoint x = omega(model(), 0);
    for (const Word& tail : {Word{0}, Word{3, 1}}) {
        const int r = 4, s = r + static_cast<int>(tail.size());
        MeasureSet ms = build_measures(th, G, cd(0.02, 0.4), x, r, s, tail);
        Eigen::VectorXd brute = oracle::brute_nu0(th, *G, 0.02, x, r, tail.back());
        EXPECT_LE((ms.nu0.weights.real() - brute).cwiseAbs().maxCoeff(), 1e-12 * brute.sum());
        EXPECT_LE(ms.nu0.weights.imag().cwiseAbs().maxCoeff(), 0.0);
        // |mu| <= mu-hat, nu = e^{tail f} nu_0
        EXPECT_LE(ms.mu.l1(), ms.muhat.l1() * (1 + 1e-12));
        EXPECT_LE((ms.nu.weights - std::exp(ms.tail_f) * ms.nu0.weights).cwiseAbs().maxCoeff(), 1e-12 * ms.nu.l1());
    }
}

TEST(Measures, BuildErrors) {
    auto G = group_mod_q(5);
    const SymbolicPoint x = omega(model(), 0);
    auto kind_of = [&](auto&& fn) -> std::optional<ErrorKind> {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        return std::nullopt;
    };
    EXPECT_EQ(kind_of([&] { build_measures(thermo(), G, 0.0, x, 3, 3, {}); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of([&] { build_measures(thermo(), G, 0.0, x, 3, 5, {0}); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of([&] { build_measures(thermo(), G, 0.0, x, 3, 5, {0, 1}); }), ErrorKind::InadmissibleWord);
}

TEST(Approximation, ExactOnTailFunctions) {
    const Thermo& th = thermo();
    auto G = group_mod_q(5);
    auto space = std::make_shared<const CylinderSpace>(th, 4);
    // depends on the first two symbols only
    CongruenceFunction H = random_function(space, G, 1);
    for (std::size_t i = 0; i < space->size(); ++i) {
        Word w = space->word(i);
        Word head(w.begin(), w.begin() + 2);
        Word rep = head;
        while (rep.size() < 4) rep.push_back(rep.back());
        H.values.row(static_cast<long>(i)) = H.values.row(space->index_of(rep));
    }
    ApproxCheck c = approx_transfer_check(th, cd(0.02, 0.3), H, 2, 4, anchor_points(model(), 2));
    EXPECT_LE(c.residual, 1e-10 * sup_norm(H) * th.C_f() * std::pow(3.0, 4));
}

TEST(Approximation, ResidualBelowBoundAndShrinksGeometrically) {
    const Thermo& th = thermo();
    auto G = group_mod_q(5);
    auto space = std::make_shared<const CylinderSpace>(th, 6);
    CongruenceFunction H = random_lipschitz_function(space, G, 3, th.theta());
    std::vector<double> xs, ys;
    for (int gap = 1; gap <= 4; ++gap) {
        ApproxCheck c = approx_transfer_check(th, cd(0.02, 0.3), H, 1, 1 + gap, anchor_points(model(), 2));
        EXPECT_LE(c.ratio, 1.0) << "s - r = " << gap;
        xs.push_back(gap);
        ys.push_back(std::log(c.residual));
    }
    const double factor = std::exp(ls_slope(xs, ys));
    EXPECT_GE(factor, 0.5 * th.theta());
    EXPECT_LE(factor, 2.0 * th.theta());
    try {
        approx_transfer_check(th, cd(0.0, 0.0), H, 2, 7, anchor_points(model(), 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DepthExhausted);
    }
}

TEST(Flattening, ChecksPassAtSmallModuli) {
    for (int q : {5, 7}) {
        FlatteningReport r = flatten_at(q);
        EXPECT_TRUE(r.nu_identity_ok) << r.nu1_identity_residual;
        EXPECT_TRUE(r.nu_bound_ok) << r.log_nu_ratio << " vs " << r.log_nu_bound;
        EXPECT_TRUE(r.flat_ok) << r.log_flatness << " vs " << r.log_flatness_bound;
        EXPECT_TRUE(r.eta_ok) << r.eta_contraction;
        EXPECT_TRUE(r.young_ok) << r.young_ratio;
        EXPECT_TRUE(r.new_norm_ok) << r.mu_new_norm << " vs " << r.bound_sharp;
        EXPECT_LE(r.nu_contraction, 1.0);
        EXPECT_LE(r.bound_sharp, r.bound_plain);
        EXPECT_GT(r.flattening_ratio, 0.0);
        EXPECT_LE(r.flattening_ratio, r.operator_ratio * (1 + 1e-9));
    }
}

TEST(Flattening, RejectsBadInput) {
    auto G = group_mod_q(5);
    NewSpaceDecomposition dec = build_decomposition(G);
    FlatteningInput in;
    in.x = omega(model(), 0);
    in.p = 3;
    in.l = 3;
    in.tail = {0};
    try {
        flattening_pipeline(thermo(), dec, in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}
