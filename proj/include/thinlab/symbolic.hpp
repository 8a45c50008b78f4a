#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "thinlab/error.hpp"

namespace thinlab {

// Symbols are 0-based internally and 1-based in every serialized form.
using Word = std::vector<int>;

struct TransitionStructure {
    int n = 0;
    std::vector<std::vector<int>> T;
    int mixing = 0;

    bool allowed(int j, int k) const { return T[j][k] != 0; }
};

inline int mixing_exponent(const std::vector<std::vector<int>>& T) {
    const std::size_t n = T.size();
    for (const auto& row : T)
        if (row.size() != n) throw Error(ErrorKind::InvalidArgument, "transition matrix must be square");
    // boolean powers
    std::vector<std::vector<char>> P(n, std::vector<char>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) P[i][j] = T[i][j] != 0;
    for (std::size_t power = 1; power <= n * n; ++power) {
        bool positive = true;
        for (std::size_t i = 0; i < n && positive; ++i)
            for (std::size_t j = 0; j < n && positive; ++j) positive = P[i][j];
        if (positive) return static_cast<int>(power);
        std::vector<std::vector<char>> next(n, std::vector<char>(n, 0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                if (P[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (T[k][j]) next[i][j] = 1;
        P.swap(next);
    }
    throw Error(ErrorKind::NotMixing, "no power up to N^2 is positive");
}

inline TransitionStructure make_transitions(std::vector<std::vector<int>> T) {
    TransitionStructure ts;
    ts.n = static_cast<int>(T.size());
    ts.T = std::move(T);
    ts.mixing = mixing_exponent(ts.T);
    return ts;
}

inline bool is_admissible(const TransitionStructure& ts, const Word& w) {
    for (int s : w)
        if (s < 0 || s >= ts.n) return false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        if (!ts.allowed(w[i], w[i + 1])) return false;
    return true;
}

inline void require_admissible(const TransitionStructure& ts, const Word& w) {
    if (!is_admissible(ts, w)) throw Error(ErrorKind::InadmissibleWord, "word is not admissible");
}

constexpr int kMaxWordLength = 16;

// Admissible words y = w_0, ..., w_len = z with len transitions, in lexicographic order.
inline std::vector<Word> enumerate_words(const TransitionStructure& ts, int y, int z, int len) {
    if (len < 0) throw Error(ErrorKind::InvalidArgument, "negative length");
    if (len > kMaxWordLength) throw Error(ErrorKind::EnumerationTooLarge, "length " + std::to_string(len));
    std::vector<Word> out;
    Word w{y};
    auto rec = [&](auto&& self) -> void {
        if (static_cast<int>(w.size()) == len + 1) {
            if (w.back() == z) out.push_back(w);
            return;
        }
        for (int k = 0; k < ts.n; ++k)
            if (ts.allowed(w.back(), k)) {
                w.push_back(k);
                self(self);
                w.pop_back();
            }
    };
    rec(rec);
    return out;
}

// All admissible words with the given number of symbols, lexicographic.
inline std::vector<Word> enumerate_cylinders(const TransitionStructure& ts, int symbols) {
    if (symbols > kMaxWordLength + 1) throw Error(ErrorKind::EnumerationTooLarge, "depth " + std::to_string(symbols));
    std::vector<Word> out;
    Word w;
    auto rec = [&](auto&& self) -> void {
        if (static_cast<int>(w.size()) == symbols) {
            out.push_back(w);
            return;
        }
        for (int k = 0; k < ts.n; ++k)
            if (w.empty() || ts.allowed(w.back(), k)) {
                w.push_back(k);
                self(self);
                w.pop_back();
            }
    };
    rec(rec);
    return out;
}

struct SymbolicPoint {
    Word preperiod;
    Word period;

    int at(std::size_t i) const {
        if (i < preperiod.size()) return preperiod[i];
        return period[(i - preperiod.size()) % period.size()];
    }

    SymbolicPoint shifted(std::size_t k) const {
        SymbolicPoint out;
        if (k <= preperiod.size()) {
            out.preperiod.assign(preperiod.begin() + static_cast<long>(k), preperiod.end());
            out.period = period;
        } else {
            std::size_t r = (k - preperiod.size()) % period.size();
            out.period.assign(period.begin() + static_cast<long>(r), period.end());
            out.period.insert(out.period.end(), period.begin(), period.begin() + static_cast<long>(r));
        }
        return out;
    }

    SymbolicPoint prepended(const Word& w) const {
        SymbolicPoint out;
        out.preperiod = w;
        out.preperiod.insert(out.preperiod.end(), preperiod.begin(), preperiod.end());
        out.period = period;
        return out;
    }

    Word prefix(std::size_t n) const {
        Word w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = at(i);
        return w;
    }
};

inline bool is_admissible(const TransitionStructure& ts, const SymbolicPoint& x) {
    if (x.period.empty()) return false;
    Word w = x.preperiod;
    w.insert(w.end(), x.period.begin(), x.period.end());
    w.push_back(x.period.front());
    return is_admissible(ts, w);
}

// index of first disagreement, or -1 when the sequences coincide
inline long first_disagreement(const SymbolicPoint& x, const SymbolicPoint& y) {
    std::size_t span = std::max(x.preperiod.size(), y.preperiod.size()) +
                       std::lcm(x.period.size(), y.period.size());
    for (std::size_t i = 0; i < span; ++i)
        if (x.at(i) != y.at(i)) return static_cast<long>(i);
    return -1;
}

inline double d_theta(const SymbolicPoint& x, const SymbolicPoint& y, double theta) {
    long n = first_disagreement(x, y);
    return n < 0 ? 0.0 : std::pow(theta, static_cast<double>(n));
}

inline std::string word_string(const Word& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(w[i] + 1);
    }
    return s;
}

}  // namespace thinlab
