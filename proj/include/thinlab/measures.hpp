#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "thinlab/congruence.hpp"

namespace thinlab {

struct MeasureOnFq {
    std::shared_ptr<const GroupModQ> group;
    Eigen::VectorXcd weights;
    std::string tag;

    MeasureOnFq() = default;
    MeasureOnFq(std::shared_ptr<const GroupModQ> g, std::string t)
        : group(std::move(g)), weights(Eigen::VectorXcd::Zero(static_cast<long>(group->order()))), tag(std::move(t)) {}

    double l1() const { return weights.cwiseAbs().sum(); }
    double l2() const { return weights.norm(); }
    std::size_t support() const {
        std::size_t n = 0;
        for (long i = 0; i < weights.size(); ++i) n += weights[i] != 0.0;
        return n;
    }
};

inline MeasureOnFq dirac(std::shared_ptr<const GroupModQ> G, int g) {
    MeasureOnFq m(std::move(G), "delta");
    m.weights[g] = 1.0;
    return m;
}

// (mu * phi)(g) = sum_h mu(h) phi(g h^{-1})
inline Eigen::VectorXcd convolve(const MeasureOnFq& mu, const Eigen::VectorXcd& phi) {
    const GroupModQ& G = *mu.group;
    if (phi.size() != static_cast<long>(G.order())) throw Error(ErrorKind::ModulusMismatch, "phi is not on F_q");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(phi.size());
    for (long h = 0; h < mu.weights.size(); ++h) {
        const cd w = mu.weights[h];
        if (w == 0.0) continue;
        const GroupModQ::Elem hinv = G.inverse(G.element(static_cast<std::size_t>(h)));
        for (long g = 0; g < phi.size(); ++g)
            out[g] += w * phi[G.index_of(G.multiply(G.element(static_cast<std::size_t>(g)), hinv))];
    }
    return out;
}

// Composition of convolution operators: (mu conv nu) * phi = mu * (nu * phi),
// hence atoms a (from mu) and b (from nu) land on b a.
inline MeasureOnFq convolve_measures(const MeasureOnFq& mu, const MeasureOnFq& nu) {
    if (mu.group->q() != nu.group->q()) throw Error(ErrorKind::ModulusMismatch, "measures on different F_q");
    const GroupModQ& G = *mu.group;
    MeasureOnFq out(mu.group, mu.tag + "*" + nu.tag);
    std::vector<long> sa, sb;
    for (long a = 0; a < mu.weights.size(); ++a)
        if (mu.weights[a] != 0.0) sa.push_back(a);
    for (long b = 0; b < nu.weights.size(); ++b)
        if (nu.weights[b] != 0.0) sb.push_back(b);
    for (long a : sa)
        for (long b : sb) out.weights[G.mul(static_cast<int>(b), static_cast<int>(a))] += mu.weights[a] * nu.weights[b];
    return out;
}

// Dense matrix of phi -> mu * phi.
inline Eigen::MatrixXcd convolution_matrix(const MeasureOnFq& mu) {
    const GroupModQ& G = *mu.group;
    const long n = static_cast<long>(G.order());
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    for (long h = 0; h < n; ++h) {
        if (mu.weights[h] == 0.0) continue;
        std::vector<int> perm = G.right_translation(static_cast<int>(h));
        for (long g = 0; g < n; ++g) A(g, perm[g]) += mu.weights[h];
    }
    return A;
}

// mu^*(h) = conj(mu(h^{-1})), the adjoint of convolution by mu
inline MeasureOnFq adjoint(const MeasureOnFq& mu) {
    MeasureOnFq out(mu.group, mu.tag + "^*");
    for (long h = 0; h < mu.weights.size(); ++h)
        if (mu.weights[h] != 0.0) out.weights[mu.group->inv(static_cast<int>(h))] = std::conj(mu.weights[h]);
    return out;
}

constexpr std::size_t kMaxMeasureWords = 2000000;

// State of a word alpha^k . x grown by prepending symbols.
struct WalkState {
    int last = 0;      // alpha_k (or x_0 when k = 0)
    double point = 0.0; // zeta(alpha^k, x)
    double f = 0.0;     // f_k^{(a)}(alpha^k, x)
    double tau = 0.0;   // tau_k(alpha^k, x)
    int elem = 0;       // c_q^k(alpha^k, x)
};

class WordWalker {
public:
    WordWalker(const Thermo& th, const GroupModQ& G, double a) : th_(th), G_(G), a_(a) {
        for (int j = 0; j < th.model().n; ++j) step_.push_back(G.index_of(th.model().cocycle(j, 0)));
    }

    WalkState start(const SymbolicPoint& x) const {
        WalkState s;
        s.last = x.at(0);
        s.point = eval_point(th_.model(), x);
        s.elem = G_.identity();
        return s;
    }

    WalkState prepend(const WalkState& s, int j) const {
        const MarkovModel& m = th_.model();
        WalkState t;
        t.last = j;
        t.point = m.branch(j, s.point);
        double tau = m.roof(j, t.point);
        t.f = s.f + th_.f(a_, j, t.point, s.last, s.point);
        t.tau = s.tau + tau;
        t.elem = G_.mul(step_[j], s.elem);
        return t;
    }

    // visit every admissible alpha^k (alpha_1 first in `word`), `top` constrains alpha_k when >= 0
    template <class Visit>
    void walk(const WalkState& s0, int k, int top, Visit&& visit) const {
        std::vector<int> word;
        auto rec = [&](auto&& self, const WalkState& s, int depth) -> void {
            if (depth == k) {
                if (top < 0 || k == 0 || th_.model().allowed(top, s.last)) visit(word, s);
                return;
            }
            for (int j = 0; j < th_.model().n; ++j) {
                if (!th_.model().allowed(j, s.last)) continue;
                word.push_back(j);
                self(self, prepend(s, j), depth + 1);
                word.pop_back();
            }
        };
        rec(rec, s0, 0);
    }

    int step(int j) const { return step_[j]; }

private:
    const Thermo& th_;
    const GroupModQ& G_;
    double a_;
    std::vector<int> step_;
};

inline std::size_t count_walks(const MarkovModel& m, int k) {
    double c = m.n * std::pow(static_cast<double>(m.n - 1), std::max(0, k - 1));
    return c > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(c);
}

struct MeasureSet {
    MeasureOnFq mu, nu0, muhat, nu;
    double tail_f = 0.0; // f_{s-r}(tail, omega(alpha_{r+1}))
    std::size_t words = 0;
};

// f_{len}(w, omega(w_last)) summed over the first `count` shifts, w given left to right.
inline double f_on_extension(const Thermo& th, const Word& w, int count, double a) {
    const MarkovModel& m = th.model();
    SymbolicPoint om = omega(m, w.back());
    double u = eval_point(m, om);
    int after = om.at(0);
    double total = 0.0;
    for (std::size_t i = w.size(); i-- > 0;) {
        double up = m.branch(w[i], u);
        if (static_cast<int>(i) < count) total += th.f(a, w[i], up, after, u);
        after = w[i];
        u = up;
    }
    return total;
}

// mu, nu_0, mu-hat, nu for the tail (alpha_s, ..., alpha_{r+1}) at x.
inline MeasureSet build_measures(const Thermo& th, std::shared_ptr<const GroupModQ> G, cd xi, const SymbolicPoint& x,
                                 int r, int s, const Word& tail) {
    const MarkovModel& m = th.model();
    if (!(0 < r && r < s)) throw Error(ErrorKind::InvalidArgument, "need 0 < r < s");
    if (static_cast<int>(tail.size()) != s - r) throw Error(ErrorKind::InvalidArgument, "tail must have s - r symbols");
    if (!is_admissible(m.transitions, tail)) throw Error(ErrorKind::InadmissibleWord, word_string(tail));
    if (count_walks(m, r) > kMaxMeasureWords) throw Error(ErrorKind::EnumerationTooLarge, "alpha^r enumeration cap");
    const double a = xi.real(), b = xi.imag();
    MeasureSet out{MeasureOnFq(G, "mu"), MeasureOnFq(G, "nu0"), MeasureOnFq(G, "muhat"), MeasureOnFq(G, "nu"), 0.0, 0};
    out.tail_f = f_on_extension(th, tail, s - r, a);
    WordWalker walker(th, *G, a);
    const int top = tail.back(); // alpha_{r+1}
    walker.walk(walker.start(x), r, top, [&](const Word&, const WalkState& st) {
        const int atom = G->mul(walker.step(top), st.elem);
        WalkState full = st;
        for (std::size_t i = tail.size(); i-- > 0;) full = walker.prepend(full, tail[i]);
        out.mu.weights[atom] += std::exp(cd(full.f, b * full.tau));
        out.nu0.weights[atom] += std::exp(st.f);
        out.muhat.weights[atom] += std::exp(full.f);
        out.nu.weights[atom] += std::exp(out.tail_f + st.f);
        ++out.words;
    });
    return out;
}

// H as a function of a coded point: symbolic sequence plus its image in U.
using FiberFunction = std::function<Eigen::VectorXcd(const SymbolicPoint&, double)>;

inline FiberFunction as_fiber_function(const CongruenceFunction& H) {
    return [&H](const SymbolicPoint& y, double) -> Eigen::VectorXcd {
        int i = H.space->index_of(y);
        return H.values.row(i).transpose();
    };
}

struct ApproxCheck {
    double residual = 0.0; // sup over anchors of the l2 gap
    double bound = 0.0;    // C_f * Lip * theta^{s-r}
    double ratio = 0.0;
    double lipschitz = 0.0;
};

// Compares M^s H(x), summed pointwise over all alpha^s, with the tail decomposition
// sum over tails of mu_tail * phi_tail, for each anchor x.
inline ApproxCheck approx_transfer_check(const Thermo& th, std::shared_ptr<const GroupModQ> G, cd xi,
                                         const FiberFunction& H, double lipschitz, int r, int s,
                                         const std::vector<SymbolicPoint>& anchors) {
    const MarkovModel& m = th.model();
    if (!(0 < r && r < s) || s - r > 8) throw Error(ErrorKind::InvalidArgument, "need 0 < r < s and s - r <= 8");
    const long F = static_cast<long>(G->order());
    std::vector<Word> tails = enumerate_cylinders(m.transitions, s - r);
    std::vector<double> residuals(anchors.size(), 0.0);
    parallel_for(anchors.size(), [&](std::size_t ai) {
        const SymbolicPoint& x = anchors[ai];
        WordWalker walker(th, *G, xi.real());
        Eigen::VectorXcd direct = Eigen::VectorXcd::Zero(F);
        walker.walk(walker.start(x), s, -1, [&](const Word& word, const WalkState& st) {
            Word alpha(word.rbegin(), word.rend());
            SymbolicPoint y = x.prepended(alpha);
            Eigen::VectorXcd h = H(y, st.point);
            MeasureOnFq atom = dirac(G, st.elem);
            direct += std::exp(cd(st.f, xi.imag() * st.tau)) * convolve(atom, h);
        });
        Eigen::VectorXcd approx = Eigen::VectorXcd::Zero(F);
        for (const Word& tail : tails) {
            MeasureSet ms = build_measures(th, G, xi, x, r, s, tail);
            if (ms.words == 0) continue;
            SymbolicPoint ext = extend_by_omega(m, tail);
            Eigen::VectorXcd h = H(ext, eval_point(m, ext));
            // c^{s-r-1}(tail, omega) = c(alpha_s, alpha_{s-1}) ... c(alpha_{r+2}, alpha_{r+1})
            int c = G->identity();
            for (std::size_t i = 0; i + 1 < tail.size(); ++i) c = G->mul(c, walker.step(tail[i]));
            Eigen::VectorXcd phi = convolve(dirac(G, c), h);
            approx += convolve(ms.mu, phi);
        }
        residuals[ai] = (direct - approx).norm();
    });
    ApproxCheck out;
    for (double v : residuals) out.residual = std::max(out.residual, v);
    out.lipschitz = lipschitz;
    out.bound = th.C_f() * lipschitz * std::pow(th.theta(), s - r);
    out.ratio = out.bound > 0.0 ? out.residual / out.bound : (out.residual == 0.0 ? 0.0 : INFINITY);
    return out;
}

// Cylinder-function input: its values must be defined at depth >= s.
inline ApproxCheck approx_transfer_check(const Thermo& th, cd xi, const CongruenceFunction& H, int r, int s,
                                         const std::vector<SymbolicPoint>& anchors) {
    if (H.space->depth() < s) throw Error(ErrorKind::DepthExhausted, "cylinder depth below s");
    double lip = lipschitz_seminorm(H, th.theta(), 0);
    return approx_transfer_check(th, H.group, xi, as_fiber_function(H), lip, r, s, anchors);
}

// Anchors x = w . omega(w_last) over admissible words with `symbols` symbols.
inline std::vector<SymbolicPoint> anchor_points(const MarkovModel& m, int symbols) {
    std::vector<SymbolicPoint> out;
    for (const Word& w : enumerate_cylinders(m.transitions, symbols)) out.push_back(extend_by_omega(m, w));
    return out;
}

}  // namespace thinlab
