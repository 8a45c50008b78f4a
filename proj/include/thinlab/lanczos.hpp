#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "thinlab/error.hpp"

namespace thinlab {

struct LanczosResult {
    double top = 0.0;    // largest eigenvalue
    double bottom = 0.0; // smallest eigenvalue
    int steps = 0;
    bool converged = false;
};

// Extreme eigenvalues of a Hermitian operator restricted to the range of
// `restrict` (an orthogonal projector), full reorthogonalization.
inline LanczosResult lanczos_extremes(long n, const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                                      const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& restrict,
                                      std::uint64_t seed = 1, int max_steps = 300, double tol = 1e-12) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXcd v(n);
    for (long i = 0; i < n; ++i) v[i] = std::complex<double>(gauss(rng), gauss(rng));
    if (restrict) v = restrict(v);
    double nv = v.norm();
    LanczosResult out;
    if (nv == 0.0) return out;
    v /= nv;

    std::vector<Eigen::VectorXcd> basis{v};
    std::vector<double> alpha, beta;
    double previous_top = NAN, previous_bottom = NAN;
    const int limit = static_cast<int>(std::min<long>(max_steps, n));
    for (int k = 0; k < limit; ++k) {
        Eigen::VectorXcd w = apply(basis.back());
        if (restrict) w = restrict(w);
        double a = basis.back().dot(w).real();
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) w -= b * b.dot(w);
        double bnorm = w.norm();

        const int m = static_cast<int>(alpha.size());
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
        out.top = es.eigenvalues()[m - 1];
        out.bottom = es.eigenvalues()[0];
        out.steps = m;
        double scale = std::max({1.0, std::fabs(out.top), std::fabs(out.bottom)});
        if (bnorm <= tol * scale ||
            (k > 4 && std::fabs(out.top - previous_top) <= tol * scale &&
             std::fabs(out.bottom - previous_bottom) <= tol * scale)) {
            out.converged = true;
            return out;
        }
        previous_top = out.top;
        previous_bottom = out.bottom;
        beta.push_back(bnorm);
        basis.push_back(w / bnorm);
    }
    out.converged = (limit == n);
    return out;
}

}  // namespace thinlab
