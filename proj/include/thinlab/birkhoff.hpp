#pragma once

#include <vector>

#include "thinlab/transfer.hpp"

namespace thinlab {

// Symbols y_0..y_n and coded points p_k = zeta(sigma^k y), k = 0..n.
struct Orbit {
    std::vector<int> symbols;
    std::vector<double> points;
};

inline Orbit orbit(const MarkovModel& m, const SymbolicPoint& y, int n) {
    Orbit o;
    o.symbols.resize(n + 1);
    o.points.resize(n + 1);
    for (int k = 0; k <= n; ++k) o.symbols[k] = y.at(k);
    o.points[n] = eval_point(m, y.shifted(n));
    for (int k = n; k-- > 0;) o.points[k] = m.branch(o.symbols[k], o.points[k + 1]);
    return o;
}

// Sum over the first n shifts of the roof along y.
inline double tau_sum(const Thermo& th, const SymbolicPoint& y, int n) {
    Orbit o = orbit(th.model(), y, n);
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += th.model().roof(o.symbols[k], o.points[k]);
    return s;
}

// f_n^{(a)}(y) = sum_{k<n} f^{(a)}(sigma^k y); the h0 terms telescope.
inline double f_sum(const Thermo& th, const SymbolicPoint& y, int n, double a) {
    if (n == 0) return 0.0;
    Orbit o = orbit(th.model(), y, n);
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += th.model().roof(o.symbols[k], o.points[k]);
    return -(a + th.delta()) * s + std::log(th.h0(o.symbols[0], o.points[0])) -
           std::log(th.h0(o.symbols[n], o.points[n])) - n * std::log(th.lambda(a));
}

struct BirkhoffSums {
    double tau = 0.0;
    MobiusMap c;
    double f = 0.0;
};

inline BirkhoffSums birkhoff(const Thermo& th, const Word& alpha, const SymbolicPoint& x, double a) {
    const MarkovModel& m = th.model();
    if (!is_admissible(m.transitions, x)) throw Error(ErrorKind::InadmissibleConcatenation, "x is not admissible");
    if (alpha.empty()) return {};
    Word joined = alpha;
    joined.push_back(x.at(0));
    if (!is_admissible(m.transitions, joined))
        throw Error(ErrorKind::InadmissibleConcatenation, "alpha . x is not admissible");
    SymbolicPoint y = x.prepended(alpha);
    const int n = static_cast<int>(alpha.size());
    BirkhoffSums out;
    out.tau = tau_sum(th, y, n);
    out.f = f_sum(th, y, n, a);
    for (int k = 0; k < n; ++k) out.c = out.c * m.cocycle(alpha[k], joined[k + 1]);
    return out;
}

}  // namespace thinlab
