#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "thinlab/group_mod_q.hpp"
#include "thinlab/parallel.hpp"
#include "thinlab/transfer.hpp"

namespace thinlab {

using FiberMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One inverse branch landing in a cylinder: prepend `symbol`, truncate to depth.
struct CylinderPred {
    int src = 0;
    int symbol = 0;
    double u_prime = 0.0;
    double tau = 0.0;
};

// Admissible words with `depth` symbols, their anchor points and nu_U masses.
class CylinderSpace {
public:
    CylinderSpace(const Thermo& th, int depth) : th_(&th), depth_(depth) {
        if (depth < 1) throw Error(ErrorKind::InvalidArgument, "cylinder depth must be >= 1");
        const MarkovModel& m = th.model();
        words_ = enumerate_cylinders(m.transitions, depth);
        for (std::size_t i = 0; i < words_.size(); ++i) lookup_[encode(words_[i])] = static_cast<int>(i);
        anchors_.resize(words_.size());
        preds_.resize(words_.size());
        masses_.resize(words_.size());
        parallel_for(words_.size(), [&](std::size_t i) {
            const Word& w = words_[i];
            anchors_[i] = eval_point(m, extend_by_omega(m, w));
            for (int j = 0; j < m.n; ++j) {
                if (!m.allowed(j, w[0])) continue;
                Word jw(depth_);
                jw[0] = j;
                for (int t = 1; t < depth_; ++t) jw[t] = w[t - 1];
                CylinderPred p;
                p.src = index_of(jw);
                p.symbol = j;
                p.u_prime = m.branch(j, anchors_[i]);
                p.tau = m.roof(j, p.u_prime);
                preds_[i].push_back(p);
            }
            masses_[i] = cylinder_mass(w);
        });
    }

    const Thermo& thermo() const { return *th_; }
    int depth() const { return depth_; }
    std::size_t size() const { return words_.size(); }
    const Word& word(std::size_t i) const { return words_[i]; }
    double anchor(std::size_t i) const { return anchors_[i]; }
    const std::vector<CylinderPred>& preds(std::size_t i) const { return preds_[i]; }
    double mass(std::size_t i) const { return masses_[i]; }
    const std::vector<double>& masses() const { return masses_; }

    int index_of(const Word& w) const {
        if (static_cast<int>(w.size()) != depth_) return -1;
        auto it = lookup_.find(encode(w));
        return it == lookup_.end() ? -1 : it->second;
    }

    // cylinder of the first `depth` symbols of x
    int index_of(const SymbolicPoint& x) const { return index_of(x.prefix(depth_)); }

    // index of the first disagreement between two cylinder words (depth when equal)
    int disagreement(std::size_t a, std::size_t b) const {
        for (int t = 0; t < depth_; ++t)
            if (words_[a][t] != words_[b][t]) return t;
        return depth_;
    }

private:
    long encode(const Word& w) const {
        long key = 0;
        for (int s : w) key = key * th_->model().n + s;
        return key;
    }

    // nu_U(C[w]) via the conformal pullback of nu_0 from U_{w_last}
    double cylinder_mass(const Word& w) const {
        const MarkovModel& m = th_->model();
        const CollocationGrid& g = th_->grid();
        const RpfSolution& rpf = th_->rpf0();
        const int last = w.back();
        double total = 0.0;
        for (int i = 0; i < g.per_symbol(); ++i) {
            double u = g.nodes[last][i];
            double jac = 1.0;
            for (std::size_t t = w.size() - 1; t-- > 0;) {
                MobiusImage im = mobius_apply(m.backward[w[t]], u);
                jac *= im.derivative_modulus;
                u = im.image;
            }
            total += rpf.nu[g.index(last, i)] * th_->h0(w[0], u) * std::pow(jac, th_->delta());
        }
        return total;
    }

    const Thermo* th_;
    int depth_;
    std::vector<Word> words_;
    std::unordered_map<long, int> lookup_;
    std::vector<double> anchors_;
    std::vector<std::vector<CylinderPred>> preds_;
    std::vector<double> masses_;
};

// Function on depth-D cylinders with values in C^{F_q}; row = cylinder, column = group element.
struct CongruenceFunction {
    std::shared_ptr<const CylinderSpace> space;
    std::shared_ptr<const GroupModQ> group;
    FiberMatrix values;

    CongruenceFunction() = default;
    CongruenceFunction(std::shared_ptr<const CylinderSpace> s, std::shared_ptr<const GroupModQ> g)
        : space(std::move(s)), group(std::move(g)),
          values(FiberMatrix::Zero(static_cast<long>(space->size()), static_cast<long>(group->order()))) {}

    long cylinders() const { return values.rows(); }
    long fiber() const { return values.cols(); }
};

inline void require_same_modulus(const CongruenceFunction& a, const CongruenceFunction& b) {
    if (a.group->q() != b.group->q() || a.values.rows() != b.values.rows())
        throw Error(ErrorKind::ModulusMismatch, "functions live over different fibers");
}

// Ordered product of per-step cocycles along consecutive pairs, reduced mod q.
inline GroupModQ::Elem cocycle_mod(const MarkovModel& m, const GroupModQ& G, const Word& alpha) {
    if (!is_admissible(m.transitions, alpha)) throw Error(ErrorKind::InadmissibleWord, word_string(alpha));
    GroupModQ::Elem acc = G.element(G.identity());
    for (std::size_t k = 0; k + 1 < alpha.size(); ++k)
        acc = G.multiply(acc, G.reduce(m.cocycle(alpha[k], alpha[k + 1])));
    return acc;
}

// M_{xi,q}: sum over inverse branches of e^{f^{(a)} + ib tau} times the right
// translation by the inverse cocycle, f and tau frozen at cylinder anchors.
class CongruenceOperator {
public:
    CongruenceOperator(std::shared_ptr<const CylinderSpace> space, std::shared_ptr<const GroupModQ> group, cd xi)
        : space_(std::move(space)), group_(std::move(group)), xi_(xi) {
        const Thermo& th = space_->thermo();
        const MarkovModel& m = th.model();
        th.potential(xi.real()); // domain check on |a|
        weights_.resize(space_->size());
        for (std::size_t i = 0; i < space_->size(); ++i) {
            const int k = space_->word(i)[0];
            const double u = space_->anchor(i);
            for (const auto& p : space_->preds(i))
                weights_[i].push_back(std::exp(cd(th.f(xi.real(), p.symbol, p.u_prime, k, u), xi.imag() * p.tau)));
        }
        perms_.resize(m.n);
        for (int j = 0; j < m.n; ++j) {
            int c = group_->index_of(m.cocycle(j, 0));
            perms_[j] = group_->right_translation(c);
        }
    }

    const CylinderSpace& space() const { return *space_; }
    const GroupModQ& group() const { return *group_; }
    std::shared_ptr<const CylinderSpace> space_ptr() const { return space_; }
    std::shared_ptr<const GroupModQ> group_ptr() const { return group_; }
    cd xi() const { return xi_; }
    const std::vector<cd>& weights(std::size_t i) const { return weights_[i]; }

    CongruenceFunction apply(const CongruenceFunction& H) const {
        if (H.group->q() != group_->q() || H.space.get() != space_.get())
            throw Error(ErrorKind::ModulusMismatch, "operator and function disagree on q or cylinders");
        CongruenceFunction out(space_, group_);
        const long F = static_cast<long>(group_->order());
        parallel_for(space_->size(), [&](std::size_t i) {
            auto row = out.values.row(static_cast<long>(i));
            const auto& preds = space_->preds(i);
            for (std::size_t t = 0; t < preds.size(); ++t) {
                const cd w = weights_[i][t];
                const auto& perm = perms_[preds[t].symbol];
                const cd* src = H.values.data() + static_cast<long>(preds[t].src) * F;
                for (long g = 0; g < F; ++g) row[g] += w * src[perm[g]];
            }
        });
        return out;
    }

    // Largest row sum of weight moduli: an upper bound for the one-step growth of every norm used here.
    double weight_bound() const {
        double b = 0.0;
        for (const auto& ws : weights_) {
            double s = 0.0;
            for (cd w : ws) s += std::abs(w);
            b = std::max(b, s);
        }
        return b;
    }

    // Schur test in the mass-weighted l2 norm: sqrt(row bound * max_j sum_{(i,t) -> j} m_i |w| / m_j)
    double l2_weight_bound() const {
        std::vector<double> col(space_->size(), 0.0);
        for (std::size_t i = 0; i < space_->size(); ++i) {
            const auto& preds = space_->preds(i);
            for (std::size_t t = 0; t < preds.size(); ++t)
                col[preds[t].src] += space_->mass(i) * std::abs(weights_[i][t]);
        }
        double c = 0.0;
        for (std::size_t j = 0; j < col.size(); ++j) c = std::max(c, col[j] / space_->mass(j));
        return std::sqrt(weight_bound() * c);
    }

private:
    std::shared_ptr<const CylinderSpace> space_;
    std::shared_ptr<const GroupModQ> group_;
    cd xi_;
    std::vector<std::vector<cd>> weights_;
    std::vector<std::vector<int>> perms_;
};

inline CongruenceFunction congruence_apply(const CongruenceOperator& M, const CongruenceFunction& H, int steps) {
    if (steps < 0) throw Error(ErrorKind::InvalidArgument, "negative step count");
    CongruenceFunction out = H;
    for (int k = 0; k < steps; ++k) out = M.apply(out);
    return out;
}

// ---- norms ----

inline double l2_norm(const CongruenceFunction& H) {
    double s = 0.0;
    for (long i = 0; i < H.cylinders(); ++i) s += H.space->mass(static_cast<std::size_t>(i)) * H.values.row(i).squaredNorm();
    return std::sqrt(s);
}

inline double l2_uniform_norm(const CongruenceFunction& H) {
    return std::sqrt(H.values.squaredNorm() / static_cast<double>(H.cylinders()));
}

inline double sup_norm(const CongruenceFunction& H) {
    double s = 0.0;
    for (long i = 0; i < H.cylinders(); ++i) s = std::max(s, H.values.row(i).norm());
    return s;
}

// Discrete Lipschitz seminorm for d_theta over cylinder pairs sharing at least
// `min_shared` leading symbols (1 by default; 0 gives the full seminorm of the
// locally constant extension).
inline double lipschitz_seminorm(const CongruenceFunction& H, double theta, int min_shared = 1) {
    const CylinderSpace& S = *H.space;
    const std::size_t n = S.size();
    std::vector<double> best(n, 0.0);
    parallel_for(n, [&](std::size_t a) {
        double local = 0.0;
        for (std::size_t b = a + 1; b < n; ++b) {
            int k = S.disagreement(a, b);
            if (k < min_shared) continue;
            double diff = (H.values.row(static_cast<long>(a)) - H.values.row(static_cast<long>(b))).norm();
            local = std::max(local, diff / std::pow(theta, k));
        }
        best[a] = local;
    });
    double out = 0.0;
    for (double v : best) out = std::max(out, v);
    return out;
}

inline double lipschitz_norm(const CongruenceFunction& H, double theta) {
    return sup_norm(H) + lipschitz_seminorm(H, theta);
}

inline CongruenceFunction random_function(std::shared_ptr<const CylinderSpace> space,
                                          std::shared_ptr<const GroupModQ> group, std::uint64_t seed) {
    CongruenceFunction H(std::move(space), std::move(group));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (long i = 0; i < H.values.rows(); ++i)
        for (long g = 0; g < H.values.cols(); ++g) H.values(i, g) = cd(gauss(rng), gauss(rng));
    return H;
}

// sum_k theta^k Z(w_0..w_k), one Gaussian fiber vector per prefix: Lipschitz for d_theta
inline CongruenceFunction random_lipschitz_function(std::shared_ptr<const CylinderSpace> space,
                                                    std::shared_ptr<const GroupModQ> group, std::uint64_t seed,
                                                    double theta) {
    CongruenceFunction H(space, std::move(group));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::map<Word, Eigen::RowVectorXcd> noise;
    const long F = H.values.cols();
    for (long i = 0; i < H.values.rows(); ++i) {
        const Word& w = space->word(static_cast<std::size_t>(i));
        for (int k = 0; k < space->depth(); ++k) {
            Word pre(w.begin(), w.begin() + k + 1);
            auto it = noise.find(pre);
            if (it == noise.end()) {
                Eigen::RowVectorXcd z(F);
                for (long g = 0; g < F; ++g) z[g] = cd(gauss(rng), gauss(rng));
                it = noise.emplace(pre, z).first;
            }
            H.values.row(i) += std::pow(theta, k) * it->second;
        }
    }
    return H;
}

}  // namespace thinlab
