#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "thinlab/decomposition.hpp"
#include "thinlab/expander.hpp"

namespace thinlab {

// ---- contraction schedule ----

struct DecaySchedule {
    int q = 1;
    int r = 0, s = 1;
    double C0 = 1.0;
    int l = 2;
    double log_C1 = 0.0; // C1 of the small-|b| distortion lemma, in log form
    double C_f = 1.0;
    double C_s = 0.0;
    double kappa = 0.05;

    // both schedule invariants
    bool valid() const {
        const double logN = std::log(static_cast<double>(q));
        bool r_ok = r % l == 0 && r >= C0 * logN - 1e-12 && r < C0 * logN + l;
        return r_ok && (std::log(4.0) + log_C1 + std::log(C_f) + (s - r) * log_theta <= -logN);
    }
    double log_theta = std::log(1.0 / 9.0);
};

inline double log_small_b_constant(const Thermo& th, double b0 = 1.0) {
    const double t = th.theta();
    const double k = th.T0() * t / (1.0 - t);
    return std::log(1.0 + b0) + std::log(k) + k;
}

inline DecaySchedule make_schedule(const Thermo& th, int q, int l, double C0 = 1.0, double kappa = 0.05) {
    if (l < 1) throw Error(ErrorKind::InvalidArgument, "block length must be >= 1");
    DecaySchedule d;
    d.q = q;
    d.l = l;
    d.C0 = C0;
    d.kappa = kappa;
    d.C_f = th.C_f();
    d.log_C1 = log_small_b_constant(th);
    d.log_theta = std::log(th.theta());
    const double logN = std::log(static_cast<double>(q));
    d.r = l * static_cast<int>(std::ceil(C0 * logN / l - 1e-12));
    const double gap = -(logN + std::log(4.0) + d.log_C1 + std::log(d.C_f)) / d.log_theta;
    d.s = static_cast<int>(std::floor(d.r + gap)) + 1;
    const double log2 = std::log(2.0);
    const double log4C1Cf = std::log(4.0) + d.log_C1 + std::log(d.C_f);
    d.C_s = C0 - 1.0 / d.log_theta + l / log2 - log4C1Cf / (d.log_theta * log2) + 1.0 / log2;
    return d;
}

// ---- small |b| distortion ----

struct DistortionResult {
    double ratio = 0.0;
    double log_bound = 0.0; // log C1
};

inline cd birkhoff_phase(const Thermo& th, const Word& alpha, const SymbolicPoint& x, cd xi) {
    const MarkovModel& m = th.model();
    double u = eval_point(m, x);
    int after = x.at(0);
    double f = 0.0, tau = 0.0;
    for (std::size_t i = alpha.size(); i-- > 0;) {
        double up = m.branch(alpha[i], u);
        f += th.f(xi.real(), alpha[i], up, after, u);
        tau += m.roof(alpha[i], up);
        after = alpha[i];
        u = up;
    }
    return cd(f, xi.imag() * tau);
}

inline DistortionResult small_b_distortion(const Thermo& th, cd xi, const Word& alpha, const SymbolicPoint& x,
                                           const SymbolicPoint& y) {
    DistortionResult out;
    out.log_bound = log_small_b_constant(th);
    const double d = d_theta(x, y, th.theta());
    if (d == 0.0) return out;
    Word ax = alpha;
    ax.push_back(x.at(0));
    Word ay = alpha;
    ay.push_back(y.at(0));
    if (!is_admissible(th.model().transitions, ax) || !is_admissible(th.model().transitions, ay))
        throw Error(ErrorKind::InadmissibleConcatenation, "alpha does not continue into x and y");
    cd delta = birkhoff_phase(th, alpha, y, xi) - birkhoff_phase(th, alpha, x, xi);
    out.ratio = std::abs(1.0 - std::exp(delta)) / d;
    return out;
}

// ---- decay of new vectors ----

struct DecayCurve {
    int q = 1;
    cd xi{0.0, 0.0};
    std::uint64_t seed = 0;
    int s = 1;
    std::vector<double> norms;      // ||M^{js} H||_2, j = 0..J
    std::vector<double> bounds;     // N^{-j kappa} ||H||_Lip
    std::vector<double> step_norms; // after every single application
    std::vector<double> uniform_norms; // unweighted l2 at the same j, for comparison
    double lipschitz_norm = 1.0;
    double rate = 0.0;       // fitted per-application contraction
    double step_factor = 0.0; // rate^s
    bool below_bound = false;
};

// Leading eigenpair projection of the q = 1 cylinder operator (dense, small).
struct ScalarProjector {
    Eigen::VectorXcd right, left; // left . right = 1
    Eigen::VectorXcd remove(const Eigen::VectorXcd& v) const { return v - right * left.dot(v); }
};

inline Eigen::MatrixXcd dense_scalar_operator(const CongruenceOperator& M) {
    const CylinderSpace& S = M.space();
    const long n = static_cast<long>(S.size());
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    for (long i = 0; i < n; ++i) {
        const auto& preds = S.preds(static_cast<std::size_t>(i));
        for (std::size_t t = 0; t < preds.size(); ++t) A(i, preds[t].src) += M.weights(static_cast<std::size_t>(i))[t];
    }
    return A;
}

inline ScalarProjector leading_projector(const CongruenceOperator& M) {
    Eigen::MatrixXcd A = dense_scalar_operator(M);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> er(A), el(A.adjoint());
    auto top = [](const Eigen::VectorXcd& ev) {
        long best = 0;
        for (long i = 1; i < ev.size(); ++i)
            if (std::abs(ev[i]) > std::abs(ev[best])) best = i;
        return best;
    };
    ScalarProjector P;
    P.right = er.eigenvectors().col(top(er.eigenvalues()));
    P.left = el.eigenvectors().col(top(el.eigenvalues())); // used through dot(), i.e. conjugated
    P.left /= std::conj(P.left.dot(P.right));
    return P;
}

inline double second_eigenvalue_modulus(const CongruenceOperator& M) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(dense_scalar_operator(M), false);
    std::vector<double> mods;
    for (long i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
    std::sort(mods.rbegin(), mods.rend());
    return mods.size() > 1 ? mods[1] : 0.0;
}

struct DecayOptions {
    int blocks = 3;              // J
    int max_applications = 2000; // budget
    double kappa = 0.05;
};

inline CongruenceFunction new_vector_input(const CongruenceOperator& M, const NewSpaceDecomposition& dec,
                                           std::uint64_t seed, const ScalarProjector* scalar) {
    auto H = random_function(M.space_ptr(), M.group_ptr(), seed);
    if (M.group().q() == 1) {
        Eigen::VectorXcd v = H.values.col(0);
        H.values.col(0) = scalar->remove(v);
    } else {
        H = dec.project(M.group().q(), H);
    }
    double lip = lipschitz_norm(H, M.space().thermo().theta());
    H.values /= lip;
    return H;
}

inline void reproject(CongruenceFunction& H, const NewSpaceDecomposition& dec, const ScalarProjector* scalar) {
    if (H.group->q() == 1) {
        Eigen::VectorXcd v = H.values.col(0);
        H.values.col(0) = scalar->remove(v);
    } else {
        H = dec.project(H.group->q(), H);
    }
}

inline DecayCurve decay_small_b(const CongruenceOperator& M, const NewSpaceDecomposition& dec, const DecaySchedule& sch,
                                std::uint64_t seed, const DecayOptions& opt = {}, const ReturnSet* certify = nullptr) {
    const int q = M.group().q();
    if (std::fabs(M.xi().imag()) > 1.0) throw Error(ErrorKind::InvalidArgument, "small |b| regime needs |b| <= 1");
    if (certify && q > 1 && !generates_full(*certify, M.group()).full)
        throw Error(ErrorKind::NotGenerating, "return set does not generate F_q");
    if (static_cast<long>(opt.blocks) * sch.s > opt.max_applications)
        throw Error(ErrorKind::BudgetExceeded, "decay schedule exceeds the application budget");
    ScalarProjector scalar;
    if (q == 1) scalar = leading_projector(M);
    DecayCurve c;
    c.q = q;
    c.xi = M.xi();
    c.seed = seed;
    c.s = sch.s;
    CongruenceFunction H = new_vector_input(M, dec, seed, &scalar);
    c.lipschitz_norm = lipschitz_norm(H, M.space().thermo().theta());
    const double logN = std::log(static_cast<double>(std::max(q, 1)));
    c.norms.push_back(l2_norm(H));
    c.uniform_norms.push_back(l2_uniform_norm(H));
    c.step_norms.push_back(c.norms.back());
    for (int j = 1; j <= opt.blocks; ++j) {
        for (int k = 0; k < sch.s; ++k) {
            H = M.apply(H);
            reproject(H, dec, &scalar);
            c.step_norms.push_back(l2_norm(H));
        }
        c.norms.push_back(c.step_norms.back());
        c.uniform_norms.push_back(l2_uniform_norm(H));
    }
    c.below_bound = true;
    for (int j = 0; j <= opt.blocks; ++j) {
        c.bounds.push_back(std::exp(-j * opt.kappa * logN) * c.lipschitz_norm);
        if (c.norms[j] > c.bounds[j]) c.below_bound = false;
    }
    // fit over the applications after the first block
    std::vector<double> xs, ys;
    for (std::size_t k = static_cast<std::size_t>(sch.s); k < c.step_norms.size(); ++k)
        if (c.step_norms[k] > 0.0) {
            xs.push_back(static_cast<double>(k));
            ys.push_back(std::log(c.step_norms[k]));
        }
    double slope = 0.0;
    if (xs.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= xs.size();
        my /= ys.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        slope = sxy / sxx;
    }
    c.rate = std::exp(slope);
    c.step_factor = std::pow(c.rate, sch.s);
    return c;
}

struct SupLipRatios {
    double ratio_sup = 0.0;
    double ratio_lip = 0.0;
    double bound = 0.0; // N^{-kappa} / 2
};

inline SupLipRatios supnorm_lipschitz_check(const CongruenceOperator& M, const NewSpaceDecomposition& dec,
                                            const CongruenceFunction& H, int s, double kappa = 0.05) {
    const double theta = M.space().thermo().theta();
    SupLipRatios out;
    out.bound = 0.5 * std::pow(static_cast<double>(std::max(1, M.group().q())), -kappa);
    const double denom = sup_norm(H) + lipschitz_seminorm(H, theta);
    if (denom == 0.0) return out;
    ScalarProjector scalar;
    if (M.group().q() == 1) scalar = leading_projector(M);
    CongruenceFunction out_fn = H;
    for (int k = 0; k < s; ++k) {
        out_fn = M.apply(out_fn);
        reproject(out_fn, dec, &scalar);
    }
    out.ratio_sup = sup_norm(out_fn) / denom;
    out.ratio_lip = lipschitz_seminorm(out_fn, theta) / denom;
    return out;
}

// ---- twisted transfer operator, q = 1 ----

inline int twisted_degree(double b) { return std::max(16, static_cast<int>(std::ceil(2.0 * std::fabs(b))) + 24); }

// Normalized operator e^{f^{(a)} + ib tau} assembled on a grid of any degree.
inline Eigen::MatrixXcd normalized_on_grid(const Thermo& th, const CollocationGrid& g, cd xi) {
    const MarkovModel& m = th.model();
    auto br = grid_branches(m, g);
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(g.size(), g.size());
    for (const auto& e : br) {
        cd w = std::exp(cd(th.f(xi.real(), e.source_symbol, e.u_prime, e.target_symbol, e.u), xi.imag() * e.tau));
        for (int c = 0; c < g.per_symbol(); ++c) L(e.row, g.index(e.source_symbol, c)) += w * e.basis[c];
    }
    return L;
}

struct TwistedRadius {
    double b = 0.0;
    int degree = 16;
    int k_max = 0;
    double radius = 0.0;       // growth estimate from iterates
    double dense_radius = 0.0; // modulus of the relevant eigenvalue
};

// grid -> values at the cylinder anchors
inline Eigen::MatrixXd anchor_evaluation(const CylinderSpace& S, const CollocationGrid& g) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<long>(S.size()), g.size());
    std::vector<double> basis(g.per_symbol());
    for (std::size_t i = 0; i < S.size(); ++i) {
        int sym = S.word(i)[0];
        g.basis(sym, S.anchor(i), basis.data());
        for (int c = 0; c < g.per_symbol(); ++c) E(static_cast<long>(i), g.index(sym, c)) = basis[c];
    }
    return E;
}

inline TwistedRadius twisted_radius(const Thermo& th, const CylinderSpace& quad, double b, int k_max,
                                    std::uint64_t seed = 11, int samples = 3, double a = 0.0) {
    TwistedRadius out;
    out.b = b;
    out.k_max = k_max;
    out.degree = twisted_degree(b);
    CollocationGrid g = make_grid(th.model(), out.degree);
    Eigen::MatrixXcd L = normalized_on_grid(th, g, cd(a, b));
    Eigen::MatrixXd E = anchor_evaluation(quad, g);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(quad.masses().data(), static_cast<long>(quad.size()));
    auto norm = [&](const Eigen::VectorXcd& v) {
        Eigen::VectorXcd at = E.cast<cd>() * v;
        return std::sqrt((w.array() * at.array().abs2()).sum());
    };

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(L, false);
    std::vector<double> mods;
    for (long i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
    std::sort(mods.rbegin(), mods.rend());
    const bool untwisted = b == 0.0;
    out.dense_radius = untwisted ? mods[1] : mods[0];

    // mean-zero projection for the untwisted case: leading eigenpair of L
    Eigen::VectorXcd right, left;
    if (untwisted) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> er(L), el(L.adjoint());
        auto top = [](const Eigen::VectorXcd& ev) {
            long best = 0;
            for (long i = 1; i < ev.size(); ++i)
                if (std::abs(ev[i]) > std::abs(ev[best])) best = i;
            return best;
        };
        right = er.eigenvectors().col(top(er.eigenvalues()));
        left = el.eigenvectors().col(top(el.eigenvalues()));
        left /= std::conj(left.dot(right));
    }
    auto project = [&](Eigen::VectorXcd v) {
        if (untwisted) v -= right * left.dot(v);
        return v;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double scale_b = std::max(1.0, std::fabs(b));
    for (int smp = 0; smp < samples; ++smp) {
        Eigen::VectorXcd H(g.size());
        for (long i = 0; i < H.size(); ++i) H[i] = cd(gauss(rng), gauss(rng));
        if (b < 0) H = H.conjugate().eval();
        H = project(H);
        // ||H||_{1,b} from sup and finite-difference C^1 seminorm at the anchors
        Eigen::VectorXcd at = E.cast<cd>() * H;
        double sup = at.cwiseAbs().maxCoeff();
        double c1 = 0.0;
        for (std::size_t i = 1; i < quad.size(); ++i)
            if (quad.word(i)[0] == quad.word(i - 1)[0]) {
                double dx = std::fabs(quad.anchor(i) - quad.anchor(i - 1));
                if (dx > 0) c1 = std::max(c1, std::abs(at[static_cast<long>(i)] - at[static_cast<long>(i) - 1]) / dx);
            }
        H /= (sup + c1 / scale_b);
        Eigen::VectorXcd v = H;
        double half_norm = 0.0;
        const int half = k_max / 2;
        for (int k = 1; k <= k_max; ++k) {
            v = project(L * v);
            if (k == half) half_norm = norm(v);
        }
        double full_norm = norm(v);
        double est = (half_norm > 0 && full_norm > 0) ? std::pow(full_norm / half_norm, 1.0 / (k_max - half)) : 0.0;
        out.radius = std::max(out.radius, est);
    }
    return out;
}

}  // namespace thinlab
