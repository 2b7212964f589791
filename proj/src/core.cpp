#include "hi/core.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace hi {

FinSet::FinSet(std::initializer_list<std::int64_t> xs) : FinSet(std::vector<std::int64_t>(xs)) {}

FinSet::FinSet(std::vector<std::int64_t> xs) : elems_(std::move(xs)) {
    for (std::size_t i = 0; i < elems_.size(); ++i) {
        if (elems_[i] < 1) throw Error("FinSet element below 1: " + std::to_string(elems_[i]));
        if (i > 0 && elems_[i] <= elems_[i - 1]) throw Error("FinSet not strictly increasing");
    }
}

FinSet FinSet::from_unsorted(std::vector<std::int64_t> xs) {
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return FinSet(std::move(xs));
}

std::int64_t FinSet::min() const {
    if (elems_.empty()) throw Error("min of empty FinSet");
    return elems_.front();
}

std::int64_t FinSet::max() const {
    if (elems_.empty()) throw Error("max of empty FinSet");
    return elems_.back();
}

bool FinSet::contains(std::int64_t k) const {
    return std::binary_search(elems_.begin(), elems_.end(), k);
}

FinSet FinSet::with(std::int64_t k) const {
    auto v = elems_;
    v.push_back(k);
    return from_unsorted(std::move(v));
}

FinSet FinSet::intersect(const FinSet& o) const {
    std::vector<std::int64_t> v;
    std::set_intersection(begin(), end(), o.begin(), o.end(), std::back_inserter(v));
    return FinSet(std::move(v));
}

FinSet FinSet::unite(const FinSet& o) const {
    std::vector<std::int64_t> v;
    std::set_union(begin(), end(), o.begin(), o.end(), std::back_inserter(v));
    return FinSet(std::move(v));
}

FinSet FinSet::clip(std::int64_t lo, std::int64_t hi) const {
    std::vector<std::int64_t> v;
    for (auto k : elems_)
        if (lo <= k && k <= hi) v.push_back(k);
    return FinSet(std::move(v));
}

std::string FinSet::str() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < elems_.size(); ++i) os << (i ? "," : "") << elems_[i];
    os << '}';
    return os.str();
}

bool successive(const FinSet& a, const FinSet& b) {
    if (a.empty() || b.empty()) return true;
    return a.max() < b.min();
}

bool Interval::meets(const FinSet& s) const {
    auto it = std::lower_bound(s.begin(), s.end(), lo);
    return it != s.end() && *it <= hi;
}

Rat parse_rat(const std::string& s) {
    if (s.empty()) throw Error("empty rational literal");
    Rat q;
    if (q.set_str(s, 10) != 0) throw Error("bad rational literal: " + s);
    if (q.get_den() == 0) throw Error("zero denominator: " + s);
    q.canonicalize();
    return q;
}

std::string rat_str(const Rat& q) { return q.get_str(10); }

Int parse_int(const std::string& s) {
    Int z;
    if (s.empty() || z.set_str(s, 10) != 0) throw Error("bad integer literal: " + s);
    return z;
}

std::string int_str(const Int& z) { return z.get_str(10); }

std::pair<Rat, Rat> sqrt_bounds(const Rat& q, unsigned bits) {
    if (q < 0) throw Error("sqrt of negative rational");
    Rat r;
    if (exact_sqrt(q, r)) return {r, r};
    // floor(sqrt(q * 4^bits)) / 2^bits brackets sqrt(q) within 2^-bits.
    Int scale = Int(1) << bits;
    Int num = q.get_num() * scale * scale;
    Int t = num / q.get_den();
    Int s;
    mpz_sqrt(s.get_mpz_t(), t.get_mpz_t());
    Rat lo(s, scale), hi(s + 1, scale);
    lo.canonicalize();
    hi.canonicalize();
    return {lo, hi};
}

bool exact_sqrt(const Rat& q, Rat& out) {
    if (q < 0) return false;
    const Int& a = q.get_num();
    const Int& b = q.get_den();
    if (!mpz_perfect_square_p(a.get_mpz_t()) || !mpz_perfect_square_p(b.get_mpz_t())) return false;
    Int ra, rb;
    mpz_sqrt(ra.get_mpz_t(), a.get_mpz_t());
    mpz_sqrt(rb.get_mpz_t(), b.get_mpz_t());
    out = Rat(ra, rb);
    out.canonicalize();
    return true;
}

int compare_scaled_roots(const Rat& x, const Rat& p, const Rat& y, const Rat& q) {
    // x*sqrt(p) vs y*sqrt(q), with p, q >= 0.
    int sx = sgn(x) * (p > 0 ? 1 : 0);
    int sy = sgn(y) * (q > 0 ? 1 : 0);
    if (sx != sy) return sx < sy ? -1 : 1;
    if (sx == 0) return 0;
    Rat lhs = x * x * p, rhs = y * y * q;
    int c = cmp(lhs, rhs);
    c = c < 0 ? -1 : (c > 0 ? 1 : 0);
    return sx > 0 ? c : -c;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace hi
