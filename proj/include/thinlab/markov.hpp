#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "thinlab/mobius.hpp"
#include "thinlab/schottky.hpp"
#include "thinlab/symbolic.hpp"

namespace thinlab {

struct Interval {
    double lo = 0.0, hi = 0.0;
    double center() const { return 0.5 * (lo + hi); }
    double half() const { return 0.5 * (hi - lo); }
    double length() const { return hi - lo; }
};

// Bowen-Series coding of a Schottky group. The forward branch on U_j is G_j (the
// generator whose isometric disk is disk j); the inverse branch sigma^{-(j,k)}
// is G_j^{-1} restricted to U_k and does not depend on k.
struct MarkovModel {
    int n = 0;
    std::vector<int> partner;
    std::vector<Interval> intervals;
    std::vector<MobiusMap> forward;  // G_j
    std::vector<MobiusMap> backward; // G_j^{-1}
    TransitionStructure transitions;
    double tau_min = 0.0, tau_max = 0.0;

    bool allowed(int j, int k) const { return transitions.allowed(j, k); }

    // sigma^{-(j,k)}(u) for u in U_k
    double branch(int j, double u) const { return mobius_apply(backward[j], u).image; }
    double branch_derivative(int j, double u) const { return mobius_apply(backward[j], u).derivative_modulus; }

    // roof on the cylinder [j,k]: log of the expansion of G_j at u' in U_j
    double roof(int j, double u_prime) const {
        const MobiusMap& g = forward[j];
        return -2.0 * std::log(std::fabs(static_cast<double>(g.c) * u_prime + static_cast<double>(g.d)));
    }

    // locally constant cocycle table
    MobiusMap cocycle(int j, int /*k*/) const { return backward[j]; }
};

inline MarkovModel build_markov_model(const SchottkyData& data) {
    require_valid(data);
    MarkovModel m;
    m.n = data.symbols();
    std::vector<std::vector<int>> T(m.n, std::vector<int>(m.n, 0));
    for (int j = 0; j < m.n; ++j) {
        m.partner.push_back(SchottkyData::partner(j));
        m.intervals.push_back({data.disks[j].lo(), data.disks[j].hi()});
        m.forward.push_back(data.disk_generator(j));
        m.backward.push_back(data.disk_generator(j).inverse());
        for (int k = 0; k < m.n; ++k) T[j][k] = (k != SchottkyData::partner(j)) ? 1 : 0;
    }
    m.transitions = make_transitions(std::move(T));
    // |c u + d| is affine without zeros on U_k, so the roof is extremal at interval ends
    m.tau_min = INFINITY;
    m.tau_max = -INFINITY;
    for (int j = 0; j < m.n; ++j)
        for (int k = 0; k < m.n; ++k) {
            if (!m.allowed(j, k)) continue;
            for (double u : {m.intervals[k].lo, m.intervals[k].hi}) {
                double t = m.roof(j, m.branch(j, u));
                m.tau_min = std::min(m.tau_min, t);
                m.tau_max = std::max(m.tau_max, t);
            }
        }
    return m;
}

// Largest derivative modulus of any inverse branch over its closed domain.
inline double max_contraction(const MarkovModel& m) {
    double theta = 0.0;
    for (int j = 0; j < m.n; ++j)
        for (int k = 0; k < m.n; ++k) {
            if (!m.allowed(j, k)) continue;
            const Interval& I = m.intervals[k];
            for (int i = 0; i <= 64; ++i) {
                double u = I.lo + I.length() * i / 64.0;
                theta = std::max(theta, m.branch_derivative(j, u));
            }
        }
    return theta;
}

// Greedy lexicographically smallest admissible continuation after symbol y.
inline SymbolicPoint omega(const MarkovModel& m, int y) {
    std::vector<int> seen_at(m.n, -1);
    Word seq;
    int cur = y;
    while (true) {
        int next = -1;
        for (int k = 0; k < m.n; ++k)
            if (m.allowed(cur, k)) {
                next = k;
                break;
            }
        if (seen_at[next] >= 0) {
            SymbolicPoint p;
            p.preperiod.assign(seq.begin(), seq.begin() + seen_at[next]);
            p.period.assign(seq.begin() + seen_at[next], seq.end());
            return p;
        }
        seen_at[next] = static_cast<int>(seq.size());
        seq.push_back(next);
        cur = next;
    }
}

inline SymbolicPoint extend_by_omega(const MarkovModel& m, const Word& w) {
    return omega(m, w.back()).prepended(w);
}

// zeta^+(x): attracting fixed point of the period's inverse-branch composite,
// pulled back through the preperiod.
inline double eval_point(const MarkovModel& m, const SymbolicPoint& x) {
    const Word& per = x.period;
    double y = m.intervals[per.front()].center();
    for (int it = 0; it < 400; ++it) {
        double z = y;
        for (std::size_t i = per.size(); i-- > 0;) z = m.branch(per[i], z);
        double diff = std::fabs(z - y);
        y = z;
        if (diff <= 1e-16 * std::max(1.0, std::fabs(y))) break;
    }
    for (std::size_t i = x.preperiod.size(); i-- > 0;) y = m.branch(x.preperiod[i], y);
    return y;
}

// Image interval of the cylinder [w_0 ... w_{n-1}].
inline Interval cylinder_interval(const MarkovModel& m, const Word& w) {
    double lo = m.intervals[w.back()].lo, hi = m.intervals[w.back()].hi;
    for (std::size_t i = w.size() - 1; i-- > 0;) {
        lo = m.branch(w[i], lo);
        hi = m.branch(w[i], hi);
    }
    return {std::min(lo, hi), std::max(lo, hi)};
}

// Measured Lipschitz constant of the coding map for d_theta: max over cylinders
// with n symbols of diam / theta^n (n = 0 uses the hull of all intervals).
inline double coding_lipschitz(const MarkovModel& m, double theta, int max_symbols = 7) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& I : m.intervals) {
        lo = std::min(lo, I.lo);
        hi = std::max(hi, I.hi);
    }
    double c = hi - lo;
    for (int len = 1; len <= max_symbols; ++len)
        for (const Word& w : enumerate_cylinders(m.transitions, len))
            c = std::max(c, cylinder_interval(m, w).length() / std::pow(theta, len));
    return c;
}

}  // namespace thinlab
