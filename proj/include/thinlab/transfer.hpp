#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "thinlab/chebyshev.hpp"
#include "thinlab/markov.hpp"

namespace thinlab {

using cd = std::complex<double>;

// One inverse branch hitting one collocation node: target node (k, i), source symbol j.
struct BranchEntry {
    int row = 0;
    int target_symbol = 0;
    int source_symbol = 0;
    double u = 0.0;       // target node
    double u_prime = 0.0; // sigma^{-(j,k)}(u)
    double tau = 0.0;     // roof at u'
    std::vector<double> basis;
};

inline std::vector<BranchEntry> grid_branches(const MarkovModel& m, const CollocationGrid& g) {
    std::vector<BranchEntry> out;
    const int n = g.per_symbol();
    for (int k = 0; k < m.n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m.n; ++j) {
                if (!m.allowed(j, k)) continue;
                BranchEntry e;
                e.row = g.index(k, i);
                e.target_symbol = k;
                e.source_symbol = j;
                e.u = g.nodes[k][i];
                e.u_prime = m.branch(j, e.u);
                e.tau = m.roof(j, e.u_prime);
                e.basis.resize(n);
                g.basis(j, e.u_prime, e.basis.data());
                out.push_back(std::move(e));
            }
    return out;
}

// Raw operator with weight e^{s tau} for real s.
inline Eigen::MatrixXd assemble_raw_real(const CollocationGrid& g, const std::vector<BranchEntry>& br, double s) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.size(), g.size());
    const int n = g.per_symbol();
    for (const auto& e : br) {
        double w = std::exp(s * e.tau);
        for (int c = 0; c < n; ++c) L(e.row, g.index(e.source_symbol, c)) += w * e.basis[c];
    }
    return L;
}

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector;
    int iterations = 0;
};

inline EigenPair power_iteration(const Eigen::MatrixXd& A, double tol = 1e-12, int max_iterations = 100000) {
    Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows());
    x /= x.norm();
    EigenPair out;
    for (int it = 1; it <= max_iterations; ++it) {
        Eigen::VectorXd y = A * x;
        double lambda = x.dot(y);
        double residual = (y - lambda * x).norm();
        double ny = y.norm();
        if (ny == 0.0) throw Error(ErrorKind::NoConvergence, "power iteration hit the zero vector");
        x = y / ny;
        if (residual <= tol * std::fabs(lambda)) {
            out.value = x.dot(A * x);
            out.vector = x;
            out.iterations = it;
            if (out.vector.sum() < 0) out.vector = -out.vector;
            return out;
        }
    }
    throw Error(ErrorKind::NoConvergence, "power iteration budget exhausted");
}

// Modulus of the second eigenvalue relative to the first.
inline double second_eigenvalue_ratio(const Eigen::MatrixXd& A, double lambda, const Eigen::VectorXd& right,
                                      const Eigen::VectorXd& left) {
    if (A.rows() <= 256) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
        std::vector<double> mods;
        for (int i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
        std::sort(mods.rbegin(), mods.rend());
        return mods.size() > 1 ? mods[1] / lambda : 0.0;
    }
    // one deflation step, modulus read from two-step growth to absorb complex pairs
    Eigen::MatrixXd D = A - lambda * right * left.transpose() / left.dot(right);
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(A.rows(), 1.0, 2.0);
    x /= x.norm();
    double est = 0.0;
    for (int it = 0; it < 2000; ++it) {
        Eigen::VectorXd y = D * (D * x);
        double g = std::sqrt(y.norm());
        if (g == 0.0) return 0.0;
        x = y / y.norm();
        if (it > 10 && std::fabs(g - est) <= 1e-10 * g) return g / lambda;
        est = g;
    }
    return est / lambda;
}

struct RpfSolution {
    double a = 0.0;
    double lambda = 1.0;
    Eigen::VectorXd h;  // right eigenvector on the grid
    Eigen::VectorXd nu; // left eigenvector as a functional on grid values
    double gap = 0.0;
    int iterations = 0;

    double integrate(const Eigen::VectorXd& values) const { return nu.dot(values); }
};

inline RpfSolution rpf_solve_raw(const CollocationGrid& g, const std::vector<BranchEntry>& br, double s, double a) {
    Eigen::MatrixXd L = assemble_raw_real(g, br, -s);
    EigenPair right = power_iteration(L);
    EigenPair left = power_iteration(L.transpose());
    RpfSolution sol;
    sol.a = a;
    sol.lambda = right.value;
    sol.iterations = right.iterations + left.iterations;
    sol.nu = left.vector / left.vector.sum();
    sol.h = right.vector / sol.nu.dot(right.vector);
    sol.gap = second_eigenvalue_ratio(L, sol.lambda, sol.h, sol.nu);
    return sol;
}

inline double leading_eigenvalue(const CollocationGrid& g, const std::vector<BranchEntry>& br, double s) {
    return power_iteration(assemble_raw_real(g, br, -s)).value;
}

inline double critical_exponent(const MarkovModel& m, const CollocationGrid& g) {
    auto br = grid_branches(m, g);
    double lo = 0.0, hi = 1.0;
    double at_lo = leading_eigenvalue(g, br, lo), at_hi = leading_eigenvalue(g, br, hi);
    if (!(at_lo > 1.0 && at_hi < 1.0))
        throw Error(ErrorKind::RootNotBracketed, "pressure does not change sign on [0,1]");
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        double lam = leading_eigenvalue(g, br, mid);
        if (lam == 1.0) return mid;
        (lam > 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct NormalizedPotential {
    double a = 0.0;
    std::vector<double> values; // f^{(a)} at each grid branch entry
    double A_f = 0.0;
    double T0 = 0.0;
    double a0 = 0.05;
    double C_f = 1.0;
    double tau_min = 0.0, tau_max = 0.0;
};

struct ThermoOptions {
    int degree = 16;
    double a0 = 0.05;
    double theta = 0.0; // 0 selects the measured contraction
};

// Eigendata at the critical exponent and the normalized potential machinery.
class Thermo {
public:
    explicit Thermo(const MarkovModel& model, ThermoOptions opt = {})
        : model_(model), opt_(opt), grid_(make_grid(model, opt.degree)), branches_(grid_branches(model, grid_)) {
        delta_ = critical_exponent(model_, grid_);
        rpf0_ = rpf_solve_raw(grid_, branches_, delta_, 0.0);
        theta_ = opt.theta > 0.0 ? opt.theta : max_contraction(model_);
        c_theta_ = coding_lipschitz(model_, theta_);
        lambda_cache_[0.0] = rpf0_.lambda;
        measure_constants();
    }

    const MarkovModel& model() const { return model_; }
    const CollocationGrid& grid() const { return grid_; }
    const std::vector<BranchEntry>& branches() const { return branches_; }
    double delta() const { return delta_; }
    double theta() const { return theta_; }
    double coding_constant() const { return c_theta_; }
    double a0() const { return opt_.a0; }
    const RpfSolution& rpf0() const { return rpf0_; }
    double A_f() const { return A_f_; }
    double T0() const { return T0_; }
    double C_f() const { return std::exp(A_f_ * opt_.a0); }

    RpfSolution rpf(double a) const { return rpf_solve_raw(grid_, branches_, delta_ + a, a); }

    double lambda(double a) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = lambda_cache_.find(a);
        if (it != lambda_cache_.end()) return it->second;
        double v = leading_eigenvalue(grid_, branches_, delta_ + a);
        lambda_cache_[a] = v;
        return v;
    }

    double h0(int symbol, double x) const {
        return grid_.interpolate(symbol, rpf0_.h.data() + grid_.index(symbol, 0), x);
    }

    // f^{(a)}_{(j,k)}(u') with u = sigma(u') in U_k
    double f(double a, int j, double u_prime, int k, double u) const {
        return -(a + delta_) * model_.roof(j, u_prime) + std::log(h0(j, u_prime)) - std::log(h0(k, u)) -
               std::log(lambda(a));
    }

    double f_at(double a, int j, double u_prime) const {
        double u = mobius_apply(model_.forward[j], u_prime).image;
        int k = symbol_of(u);
        return f(a, j, u_prime, k, u);
    }

    int symbol_of(double x) const {
        int best = 0;
        double dist = INFINITY;
        for (int k = 0; k < model_.n; ++k) {
            const Interval& I = model_.intervals[k];
            double d = (x < I.lo) ? I.lo - x : (x > I.hi ? x - I.hi : 0.0);
            if (d < dist) {
                dist = d;
                best = k;
            }
        }
        return best;
    }

    NormalizedPotential potential(double a) const {
        if (std::fabs(a) >= opt_.a0) throw Error(ErrorKind::InvalidArgument, "|a| must be below a0'");
        NormalizedPotential p;
        p.a = a;
        p.a0 = opt_.a0;
        p.A_f = A_f_;
        p.T0 = T0_;
        p.C_f = C_f();
        p.tau_min = model_.tau_min;
        p.tau_max = model_.tau_max;
        double loglam = std::log(lambda(a));
        for (const auto& e : branches_)
            p.values.push_back(-(a + delta_) * e.tau + std::log(h0(e.source_symbol, e.u_prime)) -
                               std::log(rpf0_.h[e.row]) - loglam);
        return p;
    }

    // Normalized operator at xi = a + ib: weights e^{f^{(a)} + ib tau}.
    Eigen::MatrixXcd normalized(cd xi) const { return normalized_with(potential(xi.real()), xi.imag()); }

    Eigen::MatrixXcd normalized_with(const NormalizedPotential& p, double b) const {
        Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(grid_.size(), grid_.size());
        const int n = grid_.per_symbol();
        for (std::size_t i = 0; i < branches_.size(); ++i) {
            const auto& e = branches_[i];
            cd w = std::exp(cd(p.values[i], b * e.tau));
            for (int c = 0; c < n; ++c) L(e.row, grid_.index(e.source_symbol, c)) += w * e.basis[c];
        }
        return L;
    }

    // Normalized operator evaluated at an arbitrary point u in U_k for a callable H(symbol, x).
    template <class Fn>
    cd apply_at(cd xi, int k, double u, Fn&& H) const {
        cd sum = 0.0;
        for (int j = 0; j < model_.n; ++j) {
            if (!model_.allowed(j, k)) continue;
            double up = model_.branch(j, u);
            double tau = model_.roof(j, up);
            sum += std::exp(cd(f(xi.real(), j, up, k, u), xi.imag() * tau)) * H(j, up);
        }
        return sum;
    }

private:
    void measure_constants() {
        // sample points u' on every cylinder [j,k], ends included
        struct Sample {
            int j, k;
            double up;
        };
        std::vector<Sample> samples;
        for (int j = 0; j < model_.n; ++j)
            for (int k = 0; k < model_.n; ++k) {
                if (!model_.allowed(j, k)) continue;
                const Interval& I = model_.intervals[k];
                for (int i = 0; i <= 32; ++i) samples.push_back({j, k, model_.branch(j, I.lo + I.length() * i / 32.0)});
            }
        double ratio = 0.0;
        const double a0 = opt_.a0;
        for (double a : {-0.01, 0.01, -0.02, 0.02, -0.04, 0.04, -0.999 * a0, 0.999 * a0}) {
            if (std::fabs(a) >= a0) continue;
            double shift = (std::log(lambda(a)) - std::log(lambda(0.0))) / a;
            for (const auto& s : samples) ratio = std::max(ratio, std::fabs(model_.roof(s.j, s.up) + shift));
        }
        A_f_ = 1.05 * ratio;

        auto c1_norm = [&](auto&& fn) {
            double sup = 0.0, slope = 0.0;
            for (const auto& s : samples) {
                double width = cylinder_interval(model_, {s.j, s.k}).length();
                double h = 1e-5 * width;
                sup = std::max(sup, std::fabs(fn(s.j, s.up)));
                slope = std::max(slope, std::fabs(fn(s.j, s.up + h) - fn(s.j, s.up - h)) / (2 * h));
            }
            return sup + slope;
        };
        double best = c1_norm([&](int j, double up) { return model_.roof(j, up); });
        for (double a : {-0.999 * a0, 0.0, 0.999 * a0})
            best = std::max(best, c1_norm([&](int j, double up) { return f_at(a, j, up); }));
        T0_ = 1.05 * std::max(c_theta_, 1.0) * best;
    }

    MarkovModel model_;
    ThermoOptions opt_;
    CollocationGrid grid_;
    std::vector<BranchEntry> branches_;
    double delta_ = 0.0;
    RpfSolution rpf0_;
    double theta_ = 0.0;
    double c_theta_ = 0.0;
    double A_f_ = 0.0;
    double T0_ = 0.0;
    mutable std::mutex mutex_;
    mutable std::map<double, double> lambda_cache_;
};

}  // namespace thinlab

namespace thinlab {

// Raw weights e^{xi tau}, or the normalized weights e^{f^{(Re xi)} + i Im(xi) tau}.
inline Eigen::MatrixXcd assemble_transfer(const Thermo& th, cd xi, bool normalized) {
    if (normalized) return th.normalized(xi);
    const auto& g = th.grid();
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(g.size(), g.size());
    for (const auto& e : th.branches()) {
        cd w = std::exp(xi * e.tau);
        for (int c = 0; c < g.per_symbol(); ++c) L(e.row, g.index(e.source_symbol, c)) += w * e.basis[c];
    }
    return L;
}

}  // namespace thinlab
