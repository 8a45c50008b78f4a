#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "thinlab/decomposition.hpp"
#include "thinlab/lanczos.hpp"
#include "thinlab/measures.hpp"

namespace thinlab {

constexpr std::size_t kDenseSvdLimit = 400;
constexpr std::size_t kDenseMatvecLimit = 2500; // dense convolution matrix, Lanczos on A^* A
constexpr std::size_t kMaxFlatteningFiber = 20000;

// smallest dimension of an irreducible piece of E^q_q
inline double min_new_dimension(int q) {
    double d = 1.0;
    for (int p : prime_factors(q)) d *= 0.5 * (p - 1);
    return d;
}

// Operator norm of phi -> mu * phi on the range of `restrict` (identity when empty).
inline double restricted_convolution_norm(const MeasureOnFq& mu,
                                          const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& restrict,
                                          bool allow_dense_svd = true) {
    const long n = static_cast<long>(mu.group->order());
    if (static_cast<std::size_t>(n) > kMaxFlatteningFiber)
        throw Error(ErrorKind::FibersTooLarge, "#F_q = " + std::to_string(n));
    if (allow_dense_svd && static_cast<std::size_t>(n) <= kDenseSvdLimit) {
        Eigen::MatrixXcd A = convolution_matrix(mu);
        if (restrict) {
            Eigen::MatrixXcd P(n, n);
            for (long k = 0; k < n; ++k) P.col(k) = restrict(Eigen::VectorXcd::Unit(n, k));
            A = A * P;
        }
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
        return svd.singularValues()[0];
    }
    if (static_cast<std::size_t>(n) <= kDenseMatvecLimit && mu.support() > 64) {
        Eigen::MatrixXcd A = convolution_matrix(mu);
        LanczosResult lr = lanczos_extremes(
            n, [&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(A.adjoint() * (A * v)); }, restrict, 3, 200,
            1e-12);
        return std::sqrt(std::max(0.0, lr.top));
    }
    MeasureOnFq star = adjoint(mu);
    LanczosResult lr = lanczos_extremes(
        n, [&](const Eigen::VectorXcd& v) { return convolve(star, convolve(mu, v)); }, restrict, 3, 200, 1e-12);
    return std::sqrt(std::max(0.0, lr.top));
}

inline Eigen::VectorXcd remove_mean(const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out = v;
    out.array() -= v.mean();
    return out;
}

struct BlockSummary {
    int block = 0;
    double log_flatness = 0.0; // log(max E / min E) inside the block
    double contraction = 0.0;  // ||eta~ on L^2_0|| / ||eta||_1
};

struct FlatteningReport {
    int q = 1;
    int p = 1, l = 2, r_blocks = 2, r = 4, s = 5;
    std::string tail;
    // nu_1 as block convolution versus single sum
    double nu1_identity_residual = 0.0;
    // nu_0 <= e^{r' C theta^l} nu_1 and back
    double log_nu_ratio = 0.0;
    double log_nu_bound = 0.0;
    // nearly flat
    double log_flatness = 0.0;
    double log_flatness_bound = 0.0;
    // eta blocks
    double eta_contraction = 0.0;
    double epsilon = 0.0;
    double log_one_minus_c = 0.0;
    std::vector<BlockSummary> blocks;
    // nu and mu
    double nu_contraction = 0.0;
    double young_ratio = 0.0;
    double mu_new_norm = 0.0;
    double mu_l2 = 0.0;
    double nu_l1 = 0.0;
    double bound_plain = 0.0; // (#F_q)^{1/2} ||mu||_2
    double bound_sharp = 0.0; // (#F_q / d_min)^{1/2} ||mu||_2
    double operator_ratio = 0.0;   // ||mu~ on E^q_q|| / ||nu||_1
    double flattening_ratio = 0.0; // mean ||mu * phi||_2 / ||nu||_1 over unit random phi in E^q_q
    // pass flags
    bool nu_identity_ok = false, nu_bound_ok = false, flat_ok = false, eta_ok = false, young_ok = false,
         new_norm_ok = false;
};

struct FlatteningInput {
    cd xi{0.0, 0.0};
    SymbolicPoint x;
    int p = 1;
    int l = 2;
    int r_blocks = 2;
    Word tail;          // (alpha_s, ..., alpha_{r+1})
    double epsilon = 0; // measured Cayley gap used in the c bound
    std::uint64_t phi_seed = 17;
    int phi_samples = 4;
};

// f summed over every shift of (w, x), w left to right
inline double f_on_word_at(const Thermo& th, const Word& w, const SymbolicPoint& x, double a) {
    const MarkovModel& m = th.model();
    double u = eval_point(m, x);
    int after = x.at(0);
    double total = 0.0;
    for (std::size_t i = w.size(); i-- > 0;) {
        double up = m.branch(w[i], u);
        total += th.f(a, w[i], up, after, u);
        after = w[i];
        u = up;
    }
    return total;
}

inline FlatteningReport flattening_pipeline(const Thermo& th, const NewSpaceDecomposition& dec,
                                            const FlatteningInput& in) {
    const MarkovModel& m = th.model();
    auto G = dec.quotient(dec.group().q());
    const int q = G->q();
    const int p = in.p, l = in.l, rb = in.r_blocks, r = rb * l;
    const int s = r + static_cast<int>(in.tail.size());
    if (l <= p) throw Error(ErrorKind::InvalidArgument, "need l > p");
    if (rb < 2) throw Error(ErrorKind::InvalidArgument, "need at least two blocks");
    if (in.tail.empty()) throw Error(ErrorKind::InvalidArgument, "tail must be nonempty");
    if (G->order() > kMaxFlatteningFiber) throw Error(ErrorKind::FibersTooLarge, "#F_q = " + std::to_string(G->order()));
    const double a = in.xi.real();
    const double theta = th.theta();

    FlatteningReport rep;
    rep.q = q;
    rep.p = p;
    rep.l = l;
    rep.r_blocks = rb;
    rep.r = r;
    rep.s = s;
    rep.tail = word_string(in.tail);
    rep.epsilon = in.epsilon;

    MeasureSet ms = build_measures(th, G, in.xi, in.x, r, s, in.tail);
    WordWalker walker(th, *G, a);

    // A[1..r+1]: A[i] = alpha_i, A[r+1] from the tail
    auto word_of = [&](const std::vector<int>& A, int hi, int lo) {
        Word w;
        for (int i = hi; i >= lo; --i) w.push_back(A[i]);
        return w;
    };
    // memoized on (block, word): the leaves revisit the same block words many times
    std::map<Word, double> memo;
    auto log_E = [&](int j, const std::vector<int>& A) {
        Word w = (j == 1) ? word_of(A, 2 * l - p, 1)
                 : (j < rb) ? word_of(A, (j + 1) * l - p, (j - 1) * l + 1)
                            : word_of(A, r, r - l + 1);
        Word key = w;
        key.push_back(-j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        double v = (j == 1) ? f_on_word_at(th, w, in.x, a) : f_on_extension(th, w, (j < rb) ? l : p, a);
        memo.emplace(std::move(key), v);
        return v;
    };
    auto block_atom = [&](int j, const std::vector<int>& A) {
        int c = G->identity();
        for (int i = j * l + 1; i >= (j - 1) * l + 2; --i) c = G->mul(c, walker.step(A[i]));
        return c;
    };
    auto full_atom = [&](const std::vector<int>& A) {
        int c = G->identity();
        for (int i = r + 1; i >= 1; --i) c = G->mul(c, walker.step(A[i]));
        return c;
    };

    // single sum over alpha^r of prod_j E_j
    MeasureOnFq nu1_direct(G, "nu1");
    std::vector<int> A(r + 2, 0);
    A[r + 1] = in.tail.back();
    {
        auto rec = [&](auto&& self, int i) -> void {
            if (i > r) {
                if (!m.allowed(A[r + 1], A[r])) return;
                double le = 0.0;
                for (int j = 1; j <= rb; ++j) le += log_E(j, A);
                nu1_direct.weights[full_atom(A)] += std::exp(le);
                return;
            }
            for (int c = 0; c < m.n; ++c) {
                int below = (i == 1) ? in.x.at(0) : A[i - 1];
                if (!m.allowed(c, below)) continue;
                A[i] = c;
                self(self, i + 1);
            }
        };
        rec(rec, 1);
    }

    // block form: outer (l-p)_2 parts fixed, eta_j summed over the (p)_1 parts
    MeasureOnFq nu1_blocks(G, "nu1");
    std::vector<int> outer_pos;
    for (int j = 1; j <= rb; ++j)
        for (int i = (j - 1) * l + 1; i <= j * l - p; ++i) outer_pos.push_back(i);
    std::vector<BlockSummary> summaries(rb);
    for (int j = 0; j < rb; ++j) summaries[j].block = j + 1;
    double worst_flat = 0.0, worst_eta = 0.0;
    std::map<std::vector<int>, double> eta_memo;
    auto outer = [&](auto&& self, std::size_t k) -> void {
        if (k < outer_pos.size()) {
            for (int c = 0; c < m.n; ++c) {
                A[outer_pos[k]] = c;
                self(self, k + 1);
            }
            return;
        }
        // admissibility inside each (l-p)_2 part and against x
        if (!m.allowed(A[1], in.x.at(0))) return;
        for (int j = 1; j <= rb; ++j)
            for (int i = (j - 1) * l + 2; i <= j * l - p; ++i)
                if (!m.allowed(A[i], A[i - 1])) return;
        MeasureOnFq acc = dirac(G, walker.step(A[1]));
        for (int j = 1; j <= rb; ++j) {
            MeasureOnFq eta(G, "eta");
            double lo = INFINITY, hi = -INFINITY;
            auto fill = [&](auto&& me, int i) -> void {
                if (i > j * l) {
                    if (!m.allowed(A[j * l + 1], A[j * l])) return;
                    double le = log_E(j, A);
                    lo = std::min(lo, le);
                    hi = std::max(hi, le);
                    eta.weights[block_atom(j, A)] += std::exp(le);
                    return;
                }
                for (int c = 0; c < m.n; ++c) {
                    if (!m.allowed(c, A[i - 1])) continue;
                    A[i] = c;
                    me(me, i + 1);
                }
            };
            fill(fill, j * l - p + 1);
            if (eta.support() == 0) return;
            double flat = hi - lo;
            // eta_j only sees the outer parts of blocks j and j+1
            std::vector<int> key{j, A[r + 1]};
            for (int i : outer_pos)
                if (i > (j - 1) * l && i <= (j + 1) * l) key.push_back(A[i]);
            auto hit = eta_memo.find(key);
            if (hit == eta_memo.end())
                hit = eta_memo.emplace(key, restricted_convolution_norm(eta, remove_mean) / eta.l1()).first;
            double contraction = hit->second;
            summaries[j - 1].log_flatness = std::max(summaries[j - 1].log_flatness, flat);
            summaries[j - 1].contraction = std::max(summaries[j - 1].contraction, contraction);
            worst_flat = std::max(worst_flat, flat);
            worst_eta = std::max(worst_eta, contraction);
            acc = convolve_measures(acc, eta);
        }
        nu1_blocks.weights += acc.weights;
    };
    outer(outer, 0);
    rep.blocks = summaries;

    double scale = std::max(nu1_direct.l1(), 1e-300);
    rep.nu1_identity_residual = (nu1_direct.weights - nu1_blocks.weights).cwiseAbs().maxCoeff() / scale;
    rep.nu_identity_ok = rep.nu1_identity_residual <= 1e-10;

    // Estimate_f constant C = T0 theta^{1-p} / (1 - theta)
    const double C = th.T0() * std::pow(theta, 1 - p) / (1.0 - theta);
    rep.log_nu_bound = rb * C * std::pow(theta, l);
    double worst = 0.0;
    bool support_match = true;
    for (long g = 0; g < ms.nu0.weights.size(); ++g) {
        double v0 = ms.nu0.weights[g].real(), v1 = nu1_direct.weights[g].real();
        if (v0 == 0.0 && v1 == 0.0) continue;
        if (v0 == 0.0 || v1 == 0.0) {
            support_match = false;
            continue;
        }
        worst = std::max(worst, std::fabs(std::log(v0 / v1)));
    }
    rep.log_nu_ratio = worst;
    rep.nu_bound_ok = support_match && worst <= rep.log_nu_bound;

    rep.log_flatness = worst_flat;
    rep.log_flatness_bound = th.T0() * (theta / (1.0 - theta) + p);
    rep.flat_ok = worst_flat <= rep.log_flatness_bound;

    rep.eta_contraction = worst_eta;
    // c = sqrt(1 - eps^2 / (2 C0^2 N^{2p})); 1 - c ~ eps^2 / (4 C0^2 N^{2p}) in log form
    rep.log_one_minus_c = (in.epsilon > 0.0)
                              ? 2.0 * std::log(in.epsilon) - std::log(4.0) - 2.0 * rep.log_flatness_bound -
                                    2.0 * p * std::log(static_cast<double>(m.n))
                              : -INFINITY;
    rep.eta_ok = worst_eta < 1.0 && std::isfinite(rep.log_one_minus_c);

    rep.nu_l1 = ms.nu.l1();
    rep.nu_contraction = restricted_convolution_norm(ms.nu, remove_mean) / rep.nu_l1;
    // Young sanity on a mean-zero indicator difference
    {
        Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(static_cast<long>(G->order()));
        phi[0] = 1.0;
        phi[static_cast<long>(G->order()) - 1] = -1.0;
        rep.young_ratio = convolve(ms.nu, phi).norm() / (rep.nu_l1 * phi.norm());
        rep.young_ok = rep.young_ratio <= 1.0 + 1e-12;
    }
    auto new_space = [&](const Eigen::VectorXcd& v) { return dec.project(q, v); };
    rep.mu_new_norm = restricted_convolution_norm(ms.mu, new_space);
    rep.mu_l2 = ms.mu.l2();
    rep.bound_plain = std::sqrt(static_cast<double>(G->order())) * rep.mu_l2;
    rep.bound_sharp = std::sqrt(static_cast<double>(G->order()) / min_new_dimension(q)) * rep.mu_l2;
    rep.new_norm_ok = rep.mu_new_norm <= rep.bound_sharp * (1.0 + 1e-10);
    rep.operator_ratio = rep.mu_new_norm / rep.nu_l1;
    // unit random new vectors, fixed seeds
    {
        std::mt19937_64 rng(in.phi_seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        double acc = 0.0;
        for (int t = 0; t < in.phi_samples; ++t) {
            Eigen::VectorXcd phi(static_cast<long>(G->order()));
            for (long i = 0; i < phi.size(); ++i) phi[i] = cd(gauss(rng), gauss(rng));
            phi = new_space(phi);
            phi /= phi.norm();
            acc += convolve(ms.mu, phi).norm();
        }
        rep.flattening_ratio = acc / in.phi_samples / rep.nu_l1;
    }
    return rep;
}

// least-squares slope of y against x
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace thinlab
