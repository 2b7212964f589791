#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace hi {

using Int = mpz_class;
using Rat = mpq_class;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Finite subset of the positive integers, kept sorted and duplicate free.
class FinSet {
public:
    FinSet() = default;
    FinSet(std::initializer_list<std::int64_t> xs);
    explicit FinSet(std::vector<std::int64_t> xs);

    // Sorts and deduplicates; rejects entries below 1.
    static FinSet from_unsorted(std::vector<std::int64_t> xs);

    const std::vector<std::int64_t>& elems() const { return elems_; }
    std::size_t size() const { return elems_.size(); }
    bool empty() const { return elems_.empty(); }
    std::int64_t min() const;
    std::int64_t max() const;
    bool contains(std::int64_t k) const;

    FinSet with(std::int64_t k) const;
    FinSet intersect(const FinSet& o) const;
    FinSet unite(const FinSet& o) const;
    FinSet clip(std::int64_t lo, std::int64_t hi) const;

    auto begin() const { return elems_.begin(); }
    auto end() const { return elems_.end(); }

    bool operator==(const FinSet&) const = default;
    auto operator<=>(const FinSet&) const = default;

    std::string str() const;

private:
    std::vector<std::int64_t> elems_;
};

// A < B in the block order (max A < min B); empty sets compare true.
bool successive(const FinSet& a, const FinSet& b);

// Closed integer interval [lo, hi]; hi may be kInf.
struct Interval {
    static constexpr std::int64_t kInf = INT64_MAX;
    std::int64_t lo = 1;
    std::int64_t hi = kInf;
    bool contains(std::int64_t k) const { return lo <= k && k <= hi; }
    bool meets(const FinSet& s) const;
};

// Canonical a/b; mpq_class(a, b) alone does not reduce.
inline Rat frac(long a, long b) {
    Rat q(a, b);
    q.canonicalize();
    return q;
}

Rat parse_rat(const std::string& s);
std::string rat_str(const Rat& q);
Int parse_int(const std::string& s);
std::string int_str(const Int& z);

// Rational lower and upper bounds on sqrt(q) with gap below 2^-bits.
std::pair<Rat, Rat> sqrt_bounds(const Rat& q, unsigned bits = 64);
// Exact rational square root when q is a square of a rational.
bool exact_sqrt(const Rat& q, Rat& out);

// a/sqrt(b) compared to c/sqrt(d) style helpers all reduce to this:
// sign-aware comparison of x*sqrt(p) against y*sqrt(q).
int compare_scaled_roots(const Rat& x, const Rat& p, const Rat& y, const Rat& q);

// 64-bit FNV-1a of s as 16 hex digits; used for digests that must be stable across runs.
std::string fnv1a_hex(const std::string& s);

}  // namespace hi
