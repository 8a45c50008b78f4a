#pragma once

#include <algorithm>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "thinlab/group_mod_q.hpp"
#include "thinlab/lanczos.hpp"
#include "thinlab/markov.hpp"

namespace thinlab {

struct ReturnSet {
    int y = 0, z = 0, p = 1;
    std::vector<MobiusMap> elements;
    bool symmetrized = false;
};

constexpr std::size_t kMaxReturnWords = 4096;

// c^{p+1}(alpha) for alpha_0 .. alpha_{p+1}
inline MobiusMap trajectory_cocycle(const MarkovModel& m, const Word& alpha) {
    MobiusMap c;
    for (std::size_t j = 0; j + 1 < alpha.size(); ++j) c = c * m.cocycle(alpha[j], alpha[j + 1]);
    return c;
}

// S^p(y,z): c^{p+1}(alpha) c^{p+1}(alpha~)^{-1} over words with p+2 symbols from y to z.
inline ReturnSet build_return_set(const MarkovModel& m, int y, int z, int p, bool symmetrize = true) {
    if (p < 1) throw Error(ErrorKind::InvalidArgument, "return level p must be >= 1");
    auto words = enumerate_words(m.transitions, y, z, p + 1);
    if (words.size() > kMaxReturnWords) throw Error(ErrorKind::EnumerationTooLarge, "return set enumeration cap");
    std::vector<MobiusMap> cs;
    for (const auto& w : words) cs.push_back(trajectory_cocycle(m, w));
    std::set<MobiusMap> elems;
    for (const auto& a : cs)
        for (const auto& b : cs) elems.insert(a * b.inverse());
    if (symmetrize) {
        std::vector<MobiusMap> inv;
        for (const auto& e : elems) inv.push_back(e.inverse());
        elems.insert(inv.begin(), inv.end());
    }
    ReturnSet S;
    S.y = y;
    S.z = z;
    S.p = p;
    S.elements.assign(elems.begin(), elems.end());
    S.symmetrized = symmetrize;
    return S;
}

// distinct reductions mod q, as group indices
inline std::vector<int> reduced_generators(const std::vector<MobiusMap>& gens, const GroupModQ& G) {
    std::set<int> out;
    for (const auto& g : gens) out.insert(G.index_of(g));
    return {out.begin(), out.end()};
}

struct GenerationCertificate {
    bool full = false;
    std::size_t closure_size = 0;
    int diameter = 0;
};

// breadth-first closure of the reduced generators (right multiplication)
inline GenerationCertificate generated_subgroup(const std::vector<int>& gens, const GroupModQ& G) {
    std::vector<int> depth(G.order(), -1);
    std::vector<GroupModQ::Elem> gen_elems;
    for (int g : gens) gen_elems.push_back(G.element(g));
    std::deque<int> queue{G.identity()};
    depth[G.identity()] = 0;
    GenerationCertificate cert;
    cert.closure_size = 1;
    while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        for (const auto& s : gen_elems) {
            int nxt = G.index_of(G.multiply(G.element(cur), s));
            if (depth[nxt] >= 0) continue;
            depth[nxt] = depth[cur] + 1;
            cert.diameter = std::max(cert.diameter, depth[nxt]);
            ++cert.closure_size;
            queue.push_back(nxt);
        }
    }
    cert.full = cert.closure_size == G.order();
    return cert;
}

inline GenerationCertificate generates_full(const ReturnSet& S, const GroupModQ& G) {
    return generated_subgroup(reduced_generators(S.elements, G), G);
}

struct CayleyGap {
    int q = 1;
    double lambda1 = 0.0; // degree
    double lambda2 = 0.0; // top of the spectrum orthogonal to constants
    double lambda_min = 0.0;
    double epsilon = 0.0;
    int lanczos_steps = 0;
};

// Adjacency (A phi)(g) = sum_{s in S_q} phi(g s); Lanczos on the complement of constants.
inline CayleyGap cayley_gap(const ReturnSet& S, const GroupModQ& G) {
    if (!S.symmetrized) throw Error(ErrorKind::InvalidArgument, "Cayley gap needs a symmetric set");
    std::vector<int> gens = reduced_generators(S.elements, G);
    if (!generated_subgroup(gens, G).full)
        throw Error(ErrorKind::NotGenerating, "S^p does not generate F_q for q = " + std::to_string(G.q()));
    const long n = static_cast<long>(G.order());
    std::vector<std::vector<int>> right(gens.size(), std::vector<int>(n));
    for (std::size_t k = 0; k < gens.size(); ++k)
        for (long g = 0; g < n; ++g) right[k][g] = G.mul(static_cast<int>(g), gens[k]);
    auto apply = [&](const Eigen::VectorXcd& phi) {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
        for (const auto& r : right)
            for (long g = 0; g < n; ++g) out[g] += phi[r[g]];
        return out;
    };
    auto no_constants = [&](const Eigen::VectorXcd& phi) {
        Eigen::VectorXcd out = phi;
        out.array() -= phi.mean();
        return out;
    };
    LanczosResult lr = lanczos_extremes(n, apply, no_constants, 7, 400, 1e-13);
    if (!lr.converged) throw Error(ErrorKind::NoConvergence, "Lanczos did not settle");
    CayleyGap out;
    out.q = G.q();
    out.lambda1 = static_cast<double>(gens.size());
    out.lambda2 = lr.top;
    out.lambda_min = lr.bottom;
    out.lanczos_steps = lr.steps;
    out.epsilon = 1.0 - out.lambda2 / out.lambda1;
    return out;
}

inline std::vector<int> primes_up_to(int bound) {
    std::vector<int> out;
    for (int p = 2; p <= bound; ++p)
        if (prime_factors(p).size() == 1 && prime_factors(p)[0] == p) out.push_back(p);
    return out;
}

// Primes where the Schottky generators fail to surject onto SL_2(F_p); their product bounds q0 from below.
inline std::vector<int> strong_approximation_failures(const SchottkyData& data, const std::vector<int>& primes) {
    std::vector<int> bad;
    for (int p : primes) {
        auto G = group_mod_q(p);
        std::vector<MobiusMap> gens;
        for (const auto& g : data.generators) {
            gens.push_back(g);
            gens.push_back(g.inverse());
        }
        if (!generated_subgroup(reduced_generators(gens, *G), *G).full) bad.push_back(p);
    }
    return bad;
}

struct LevelDetection {
    int p = 0;                  // smallest level generating at every tested modulus and endpoint pair
    std::vector<int> bad_primes; // primes recorded into q0
    long q0 = 1;
};

inline LevelDetection detect_level(const SchottkyData& data, const MarkovModel& m, const std::vector<int>& moduli,
                                   int max_level = 4) {
    LevelDetection out;
    std::set<int> primes;
    for (int q : moduli)
        for (int p : prime_factors(q)) primes.insert(p);
    for (int p : primes_up_to(13)) primes.insert(p);
    out.bad_primes = strong_approximation_failures(data, {primes.begin(), primes.end()});
    for (int p : out.bad_primes) out.q0 *= p;
    std::vector<std::shared_ptr<const GroupModQ>> groups;
    for (int q : moduli)
        if (std::gcd(static_cast<long>(q), out.q0) == 1) groups.push_back(group_mod_q(q));
    for (int level = 1; level <= max_level; ++level) {
        bool ok = true;
        for (int y = 0; y < m.n && ok; ++y)
            for (int z = 0; z < m.n && ok; ++z) {
                if (enumerate_words(m.transitions, y, z, level + 1).empty()) continue;
                ReturnSet S = build_return_set(m, y, z, level);
                for (const auto& G : groups)
                    if (!generates_full(S, *G).full) {
                        ok = false;
                        break;
                    }
            }
        if (ok) {
            out.p = level;
            return out;
        }
    }
    throw Error(ErrorKind::NotGenerating, "no return level up to " + std::to_string(max_level) + " generates");
}

}  // namespace thinlab
