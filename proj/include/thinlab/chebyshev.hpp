#pragma once

#include <cmath>
#include <vector>

#include "thinlab/markov.hpp"

namespace thinlab {

// First-kind Chebyshev nodes, m + 1 per interval, with barycentric weights.
struct CollocationGrid {
    int degree = 16;
    int symbols = 0;
    std::vector<Interval> intervals;
    std::vector<std::vector<double>> nodes;
    std::vector<double> weights; // shared by all intervals

    int per_symbol() const { return degree + 1; }
    int size() const { return symbols * per_symbol(); }
    int index(int symbol, int node) const { return symbol * per_symbol() + node; }

    // Lagrange basis values l_i(x) on interval `symbol`.
    void basis(int symbol, double x, double* out) const {
        const int n = per_symbol();
        const auto& xs = nodes[symbol];
        for (int i = 0; i < n; ++i)
            if (x == xs[i]) {
                for (int k = 0; k < n; ++k) out[k] = (k == i) ? 1.0 : 0.0;
                return;
            }
        double denom = 0.0;
        for (int i = 0; i < n; ++i) {
            out[i] = weights[i] / (x - xs[i]);
            denom += out[i];
        }
        for (int i = 0; i < n; ++i) out[i] /= denom;
    }

    double interpolate(int symbol, const double* values, double x) const {
        const int n = per_symbol();
        const auto& xs = nodes[symbol];
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            double dx = x - xs[i];
            if (dx == 0.0) return values[i];
            double t = weights[i] / dx;
            num += t * values[i];
            den += t;
        }
        return num / den;
    }
};

inline CollocationGrid make_grid(const MarkovModel& m, int degree) {
    if (degree < 1) throw Error(ErrorKind::InvalidArgument, "collocation degree must be >= 1");
    CollocationGrid g;
    g.degree = degree;
    g.symbols = m.n;
    g.intervals = m.intervals;
    const int n = degree + 1;
    g.weights.resize(n);
    std::vector<double> ref(n);
    for (int i = 0; i < n; ++i) {
        double angle = (2.0 * i + 1.0) * M_PI / (2.0 * n);
        ref[i] = std::cos(angle);
        g.weights[i] = ((i % 2) ? -1.0 : 1.0) * std::sin(angle);
    }
    for (const auto& I : m.intervals) {
        std::vector<double> xs(n);
        for (int i = 0; i < n; ++i) xs[i] = I.center() + I.half() * ref[i];
        g.nodes.push_back(std::move(xs));
    }
    return g;
}

}  // namespace thinlab
