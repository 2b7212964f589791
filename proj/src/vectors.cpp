#include "hi/vectors.hpp"

#include <cmath>
#include <sstream>

namespace hi {

SparseVector::SparseVector(std::initializer_list<std::pair<const std::int64_t, Rat>> xs) {
    for (auto& [k, v] : xs) set(k, v);
}

SparseVector SparseVector::unit(std::int64_t k) {
    SparseVector v;
    v.set(k, 1);
    return v;
}

Rat SparseVector::get(std::int64_t k) const {
    auto it = coords_.find(k);
    return it == coords_.end() ? Rat(0) : it->second;
}

void SparseVector::set(std::int64_t k, const Rat& v) {
    if (k < 1) throw Error("vector index below 1");
    if (v == 0)
        coords_.erase(k);
    else
        coords_[k] = v;
}

void SparseVector::add(std::int64_t k, const Rat& v) { set(k, get(k) + v); }

FinSet SparseVector::support() const {
    std::vector<std::int64_t> s;
    s.reserve(coords_.size());
    for (auto& [k, v] : coords_) s.push_back(k);
    return FinSet(std::move(s));
}

Interval SparseVector::range() const { return {min_support(), max_support()}; }

std::int64_t SparseVector::min_support() const {
    if (coords_.empty()) throw Error("support of zero vector");
    return coords_.begin()->first;
}

std::int64_t SparseVector::max_support() const {
    if (coords_.empty()) throw Error("support of zero vector");
    return coords_.rbegin()->first;
}

SparseVector SparseVector::restrict(const Interval& iv) const {
    SparseVector r;
    for (auto it = coords_.lower_bound(iv.lo); it != coords_.end() && it->first <= iv.hi; ++it)
        r.coords_.insert(*it);
    return r;
}

SparseVector SparseVector::restrict(const FinSet& s) const {
    SparseVector r;
    for (auto k : s) {
        auto it = coords_.find(k);
        if (it != coords_.end()) r.coords_.insert(*it);
    }
    return r;
}

SparseVector SparseVector::scaled(const Rat& c) const {
    SparseVector r;
    if (c == 0) return r;
    for (auto& [k, v] : coords_) r.coords_[k] = v * c;
    return r;
}

SparseVector SparseVector::operator+(const SparseVector& o) const {
    SparseVector r = *this;
    for (auto& [k, v] : o.coords_) r.add(k, v);
    return r;
}

SparseVector SparseVector::operator-(const SparseVector& o) const { return *this + (-o); }

SparseVector SparseVector::operator-() const { return scaled(-1); }

Rat SparseVector::dot(const SparseVector& o) const {
    const auto& a = coords_.size() <= o.coords_.size() ? coords_ : o.coords_;
    const auto& b = coords_.size() <= o.coords_.size() ? o.coords_ : coords_;
    Rat s = 0;
    for (auto& [k, v] : a) {
        auto it = b.find(k);
        if (it != b.end()) s += v * it->second;
    }
    return s;
}

Rat SparseVector::l2_squared() const {
    Rat s = 0;
    for (auto& [k, v] : coords_) s += v * v;
    return s;
}

Rat SparseVector::l1() const {
    Rat s = 0;
    for (auto& [k, v] : coords_) s += abs(v);
    return s;
}

Rat SparseVector::max_abs() const {
    Rat s = 0;
    for (auto& [k, v] : coords_)
        if (abs(v) > s) s = abs(v);
    return s;
}

std::string SparseVector::str() const {
    std::ostringstream os;
    os << '[';
    bool first = true;
    for (auto& [k, v] : coords_) {
        os << (first ? "" : ", ") << k << ':' << rat_str(v);
        first = false;
    }
    os << ']';
    return os.str();
}

SqrtVector SqrtVector::from_rational(const SparseVector& x) {
    SqrtVector r;
    for (auto& [k, v] : x.coords()) r.coords_[k] = {v * v, sgn(v)};
    return r;
}

SqrtVector SqrtVector::from_squares(const SparseVector& squares) {
    SqrtVector r;
    for (auto& [k, v] : squares.coords()) {
        if (v < 0) throw Error("negative square in SqrtVector");
        r.coords_[k] = {v, 1};
    }
    return r;
}

void SqrtVector::set(std::int64_t k, const Rat& square, int sign) {
    if (k < 1) throw Error("vector index below 1");
    if (square < 0) throw Error("negative square in SqrtVector");
    if (square == 0 || sign == 0)
        coords_.erase(k);
    else
        coords_[k] = {square, sign > 0 ? 1 : -1};
}

FinSet SqrtVector::support() const {
    std::vector<std::int64_t> s;
    for (auto& [k, c] : coords_) s.push_back(k);
    return FinSet(std::move(s));
}

Interval SqrtVector::range() const { return {min_support(), max_support()}; }

std::int64_t SqrtVector::min_support() const {
    if (coords_.empty()) throw Error("support of zero vector");
    return coords_.begin()->first;
}

std::int64_t SqrtVector::max_support() const {
    if (coords_.empty()) throw Error("support of zero vector");
    return coords_.rbegin()->first;
}

SparseVector SqrtVector::squares() const {
    SparseVector s;
    for (auto& [k, c] : coords_) s.set(k, c.square);
    return s;
}

Rat SqrtVector::l2_squared() const {
    Rat s = 0;
    for (auto& [k, c] : coords_) s += c.square;
    return s;
}

SqrtVector SqrtVector::scaled_by_root(const Rat& c) const {
    if (c < 0) throw Error("scaled_by_root needs c >= 0");
    SqrtVector r;
    if (c == 0) return r;
    for (auto& [k, x] : coords_) r.coords_[k] = {x.square * c, x.sign};
    return r;
}

SqrtVector SqrtVector::negated() const {
    SqrtVector r = *this;
    for (auto& [k, x] : r.coords_) x.sign = -x.sign;
    return r;
}

SqrtVector SqrtVector::restrict(const Interval& iv) const {
    SqrtVector r;
    for (auto it = coords_.lower_bound(iv.lo); it != coords_.end() && it->first <= iv.hi; ++it)
        r.coords_.insert(*it);
    return r;
}

SqrtVector SqrtVector::disjoint_sum(const SqrtVector& o) const {
    SqrtVector r = *this;
    for (auto& [k, c] : o.coords_) {
        if (r.coords_.count(k)) throw Error("disjoint_sum on overlapping supports");
        r.coords_[k] = c;
    }
    return r;
}

bool SqrtVector::to_rational(SparseVector& out) const {
    SparseVector r;
    for (auto& [k, c] : coords_) {
        Rat root;
        if (!exact_sqrt(c.square, root)) return false;
        r.set(k, c.sign * root);
    }
    out = r;
    return true;
}

double SqrtVector::approx(std::int64_t k) const {
    auto it = coords_.find(k);
    if (it == coords_.end()) return 0.0;
    return it->second.sign * std::sqrt(it->second.square.get_d());
}

std::pair<Rat, Rat> SqrtVector::dot_bounds(const SparseVector& f, unsigned bits) const {
    Rat lo = 0, hi = 0;
    for (auto& [k, a] : f.coords()) {
        auto it = coords_.find(k);
        if (it == coords_.end()) continue;
        auto [r0, r1] = sqrt_bounds(it->second.square, bits);
        Rat s = a * it->second.sign;
        if (s > 0) {
            lo += s * r0;
            hi += s * r1;
        } else {
            lo += s * r1;
            hi += s * r0;
        }
    }
    return {lo, hi};
}

std::string SqrtVector::str() const {
    std::ostringstream os;
    os << '[';
    bool first = true;
    for (auto& [k, c] : coords_) {
        os << (first ? "" : ", ") << k << ':' << (c.sign < 0 ? "-" : "") << "sqrt(" << rat_str(c.square) << ')';
        first = false;
    }
    os << ']';
    return os.str();
}

}  // namespace hi
