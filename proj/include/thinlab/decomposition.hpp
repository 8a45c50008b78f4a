#pragma once

#include <map>
#include <memory>
#include <vector>

#include "thinlab/congruence.hpp"

namespace thinlab {

// Level structure of L^2(F_q): pullback averages P_d for d | q and the
// Moebius-inverted new-vector projectors e_{q,q'}.
class NewSpaceDecomposition {
public:
    explicit NewSpaceDecomposition(std::shared_ptr<const GroupModQ> G) : G_(std::move(G)) {
        const int q = G_->q();
        if (prime_factors(q).size() > 3) throw Error(ErrorKind::TooLarge, "more than three prime factors");
        for (int d : divisors(q)) {
            auto Gd = (d == q) ? G_ : group_mod_q(d);
            Level lv;
            lv.group = Gd;
            lv.label.resize(G_->order());
            lv.fiber_size.assign(Gd->order(), 0);
            lv.representative.assign(Gd->order(), -1);
            for (std::size_t g = 0; g < G_->order(); ++g) {
                const auto& e = G_->element(g);
                GroupModQ::Elem r{e[0] % d, e[1] % d, e[2] % d, e[3] % d};
                if (d == 1) r = {0, 0, 0, 0};
                int h = Gd->index_of(r);
                lv.label[g] = h;
                lv.fiber_size[h]++;
                if (lv.representative[h] < 0) lv.representative[h] = static_cast<int>(g);
            }
            levels_[d] = std::move(lv);
        }
    }

    const GroupModQ& group() const { return *G_; }
    std::vector<int> levels() const { return divisors(G_->q()); }
    std::shared_ptr<const GroupModQ> quotient(int d) const { return level(d).group; }

    // #ker(F_q -> F_{q'})
    double spade(int qp) const { return static_cast<double>(G_->order()) / static_cast<double>(level(qp).group->order()); }

    // dimension of E^q_{q'} from the group orders
    long dimension(int qp) const {
        long dim = 0;
        for (int d : divisors(qp)) dim += mobius_mu(qp / d) * static_cast<long>(level(d).group->order());
        return dim;
    }

    // orthogonal projection onto the pullback of L^2(F_d)
    Eigen::VectorXcd pullback_average(int d, const Eigen::VectorXcd& phi) const {
        const Level& lv = level(d);
        Eigen::VectorXcd sums = Eigen::VectorXcd::Zero(static_cast<long>(lv.group->order()));
        for (std::size_t g = 0; g < G_->order(); ++g) sums[lv.label[g]] += phi[static_cast<long>(g)];
        Eigen::VectorXcd out(phi.size());
        for (std::size_t g = 0; g < G_->order(); ++g)
            out[static_cast<long>(g)] = sums[lv.label[g]] / static_cast<double>(lv.fiber_size[lv.label[g]]);
        return out;
    }

    Eigen::VectorXcd project(int qp, const Eigen::VectorXcd& phi) const {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(phi.size());
        for (int d : divisors(qp)) {
            int mu = mobius_mu(qp / d);
            if (mu != 0) out += static_cast<double>(mu) * pullback_average(d, phi);
        }
        return out;
    }

    CongruenceFunction project(int qp, const CongruenceFunction& H) const {
        check_group(H);
        CongruenceFunction out = H;
        parallel_for(static_cast<std::size_t>(H.cylinders()), [&](std::size_t i) {
            Eigen::VectorXcd row = H.values.row(static_cast<long>(i)).transpose();
            out.values.row(static_cast<long>(i)) = project(qp, row).transpose();
        });
        return out;
    }

    struct Pushdown {
        CongruenceFunction function; // at level q'
        double spade = 1.0;
        double norm_full = 0.0;
        double norm_projected = 0.0;
    };

    // proj_{q,q'}: read H on coset representatives after checking kernel invariance
    Pushdown project_and_scale(const CongruenceFunction& H, int qp, double tol = 1e-9) const {
        check_group(H);
        if (G_->q() % qp != 0) throw Error(ErrorKind::ModulusMismatch, "q' must divide q");
        const Level& lv = level(qp);
        double scale = std::max(1.0, H.values.cwiseAbs().maxCoeff());
        for (long i = 0; i < H.cylinders(); ++i) {
            Eigen::VectorXcd row = H.values.row(i).transpose();
            if ((pullback_average(qp, row) - row).cwiseAbs().maxCoeff() > tol * scale)
                throw Error(ErrorKind::NotInNewSpace, "fiber is not invariant under the kernel of reduction");
        }
        Pushdown out;
        out.function = CongruenceFunction(H.space, lv.group);
        for (std::size_t h = 0; h < lv.group->order(); ++h)
            out.function.values.col(static_cast<long>(h)) = H.values.col(lv.representative[h]);
        out.spade = spade(qp);
        out.norm_full = l2_norm(H);
        out.norm_projected = l2_norm(out.function);
        return out;
    }

    // pulls a level-d function back to F_q
    Eigen::VectorXcd lift(int d, const Eigen::VectorXcd& phi) const {
        const Level& lv = level(d);
        Eigen::VectorXcd out(static_cast<long>(G_->order()));
        for (std::size_t g = 0; g < G_->order(); ++g) out[static_cast<long>(g)] = phi[lv.label[g]];
        return out;
    }

private:
    struct Level {
        std::shared_ptr<const GroupModQ> group;
        std::vector<int> label;
        std::vector<int> fiber_size;
        std::vector<int> representative;
    };

    const Level& level(int d) const {
        auto it = levels_.find(d);
        if (it == levels_.end()) throw Error(ErrorKind::ModulusMismatch, "level does not divide q");
        return it->second;
    }

    void check_group(const CongruenceFunction& H) const {
        if (H.group->q() != G_->q()) throw Error(ErrorKind::ModulusMismatch, "function is not over F_q");
    }

    std::shared_ptr<const GroupModQ> G_;
    std::map<int, Level> levels_;
};

inline NewSpaceDecomposition build_decomposition(std::shared_ptr<const GroupModQ> G) {
    return NewSpaceDecomposition(std::move(G));
}

// Random function with every fiber in E^q_q.
inline CongruenceFunction random_new_vector_function(std::shared_ptr<const CylinderSpace> space,
                                                     const NewSpaceDecomposition& dec, std::uint64_t seed,
                                                     int level = 0) {
    auto G = dec.quotient(dec.group().q());
    CongruenceFunction H = random_function(std::move(space), G, seed);
    return dec.project(level > 0 ? level : dec.group().q(), H);
}

}  // namespace thinlab
