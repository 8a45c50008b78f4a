#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "thinlab/error.hpp"
#include "thinlab/mobius.hpp"

namespace thinlab {

inline std::vector<int> prime_factors(int q) {
    std::vector<int> ps;
    for (int p = 2; static_cast<long>(p) * p <= q; ++p)
        if (q % p == 0) {
            ps.push_back(p);
            while (q % p == 0) q /= p;
        }
    if (q > 1) ps.push_back(q);
    return ps;
}

inline bool square_free(int q) {
    if (q < 1) return false;
    for (int p = 2; static_cast<long>(p) * p <= q; ++p)
        if (q % (p * p) == 0) return false;
    return true;
}

inline std::uint64_t sl2_order(int q) {
    std::uint64_t order = 1;
    for (int p : prime_factors(q)) order *= static_cast<std::uint64_t>(p) * (static_cast<std::uint64_t>(p) * p - 1);
    return order;
}

inline std::vector<int> divisors(int q) {
    std::vector<int> ds;
    for (int d = 1; d <= q; ++d)
        if (q % d == 0) ds.push_back(d);
    return ds;
}

inline int mobius_mu(int n) {
    if (!square_free(n)) return 0;
    return (prime_factors(n).size() % 2) ? -1 : 1;
}

constexpr std::uint64_t kMaxGroupOrder = 1000000;

// SL_2(Z/q), elements sorted by their (a,b,c,d) key.
class GroupModQ {
public:
    using Elem = std::array<int, 4>;

    int q() const { return q_; }
    std::size_t order() const { return elems_.size(); }
    const Elem& element(std::size_t i) const { return elems_[i]; }
    int identity() const { return identity_; }

    int index_of(const Elem& e) const {
        std::uint64_t k = key(e);
        if (!direct_.empty()) return direct_[k];
        auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
        if (it == keys_.end() || *it != k) return -1;
        return static_cast<int>(it - keys_.begin());
    }

    Elem reduce(const MobiusMap& m) const {
        return {mod(m.a), mod(m.b), mod(m.c), mod(m.d)};
    }

    int index_of(const MobiusMap& m) const { return index_of(reduce(m)); }

    Elem multiply(const Elem& x, const Elem& y) const {
        auto mm = [&](std::int64_t u, std::int64_t v, std::int64_t w, std::int64_t z) {
            return static_cast<int>((u * v + w * z) % q_);
        };
        if (q_ == 1) return {0, 0, 0, 0};
        return {mm(x[0], y[0], x[1], y[2]), mm(x[0], y[1], x[1], y[3]), mm(x[2], y[0], x[3], y[2]),
                mm(x[2], y[1], x[3], y[3])};
    }

    Elem inverse(const Elem& x) const {
        if (q_ == 1) return {0, 0, 0, 0};
        return {x[3], (q_ - x[1]) % q_, (q_ - x[2]) % q_, x[0]};
    }

    int mul(int i, int j) const { return index_of(multiply(elems_[i], elems_[j])); }
    int inv(int i) const { return index_of(inverse(elems_[i])); }

    // perm[g] = index(g h^{-1}), so (delta_h * phi)(g) = phi(perm[g])
    std::vector<int> right_translation(int h) const {
        std::vector<int> perm(order());
        Elem hinv = inverse(elems_[h]);
        for (std::size_t g = 0; g < order(); ++g) perm[g] = index_of(multiply(elems_[g], hinv));
        return perm;
    }

    friend std::shared_ptr<const GroupModQ> group_mod_q(int q, int q0);

private:
    int mod(std::int64_t v) const {
        std::int64_t r = v % q_;
        return static_cast<int>(r < 0 ? r + q_ : r);
    }
    std::uint64_t key(const Elem& e) const {
        std::uint64_t Q = static_cast<std::uint64_t>(q_);
        return ((static_cast<std::uint64_t>(e[0]) * Q + e[1]) * Q + e[2]) * Q + e[3];
    }

    int q_ = 1;
    std::vector<Elem> elems_;
    std::vector<std::uint64_t> keys_;
    std::vector<int> direct_; // key -> index when q^4 is small enough
    int identity_ = 0;
};

namespace detail {

inline std::vector<GroupModQ::Elem> enumerate_sl2_prime(int p) {
    std::vector<GroupModQ::Elem> out;
    auto inv = [p](int x) {
        int r = 1, b = x, e = p - 2;
        while (e) {
            if (e & 1) r = static_cast<int>(static_cast<long>(r) * b % p);
            b = static_cast<int>(static_cast<long>(b) * b % p);
            e >>= 1;
        }
        return r;
    };
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b)
            for (int c = 0; c < p; ++c) {
                long bc = static_cast<long>(b) * c % p;
                if (a != 0) {
                    int d = static_cast<int>((1 + bc) % p * inv(a) % p);
                    out.push_back({a, b, c, d});
                } else if ((bc + 1) % p == 0) {
                    for (int d = 0; d < p; ++d) out.push_back({a, b, c, d});
                }
            }
    return out;
}

inline int crt(const std::vector<int>& residues, const std::vector<int>& primes, int q) {
    long x = 0;
    for (std::size_t i = 0; i < primes.size(); ++i) {
        long Mi = q / primes[i];
        long yi = 1;
        while ((Mi % primes[i]) * yi % primes[i] != 1) ++yi;
        x = (x + static_cast<long>(residues[i]) * Mi % q * yi) % q;
    }
    return static_cast<int>(x);
}

}  // namespace detail

inline std::shared_ptr<const GroupModQ> group_mod_q(int q, int q0 = 1) {
    if (q < 1) throw Error(ErrorKind::InvalidArgument, "modulus must be positive");
    if (!square_free(q)) throw Error(ErrorKind::NotSquareFree, "q = " + std::to_string(q));
    if (q > 1 && q0 > 1 && std::gcd(q, q0) > 1)
        throw Error(ErrorKind::BadPrime, "q = " + std::to_string(q) + " shares a prime with q0 = " + std::to_string(q0));
    if (sl2_order(q) > kMaxGroupOrder) throw Error(ErrorKind::TooLarge, "#F_q = " + std::to_string(sl2_order(q)));
    auto G = std::make_shared<GroupModQ>();
    G->q_ = q;
    if (q == 1) {
        G->elems_ = {{0, 0, 0, 0}};
    } else {
        std::vector<int> primes = prime_factors(q);
        std::vector<std::vector<GroupModQ::Elem>> parts;
        for (int p : primes) parts.push_back(detail::enumerate_sl2_prime(p));
        std::vector<std::size_t> idx(primes.size(), 0);
        std::vector<int> res(primes.size());
        while (true) {
            GroupModQ::Elem e;
            for (int c = 0; c < 4; ++c) {
                for (std::size_t i = 0; i < primes.size(); ++i) res[i] = parts[i][idx[i]][c];
                e[c] = detail::crt(res, primes, q);
            }
            G->elems_.push_back(e);
            std::size_t i = 0;
            while (i < idx.size() && ++idx[i] == parts[i].size()) idx[i++] = 0;
            if (i == idx.size()) break;
        }
    }
    std::sort(G->elems_.begin(), G->elems_.end());
    for (const auto& e : G->elems_) G->keys_.push_back(G->key(e));
    const std::uint64_t span = static_cast<std::uint64_t>(q) * q * q * q;
    if (span <= 20000000) {
        G->direct_.assign(span, -1);
        for (std::size_t i = 0; i < G->keys_.size(); ++i) G->direct_[G->keys_[i]] = static_cast<int>(i);
    }
    G->identity_ = G->index_of(GroupModQ::Elem{1 % q, 0, 0, 1 % q});
    return G;
}

}  // namespace thinlab
