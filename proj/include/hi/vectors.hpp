#pragma once

#include "hi/core.hpp"

#include <map>
#include <string>

namespace hi {

// Finitely supported vector with exact rational coordinates.
class SparseVector {
public:
    SparseVector() = default;
    SparseVector(std::initializer_list<std::pair<const std::int64_t, Rat>> xs);

    static SparseVector unit(std::int64_t k);

    Rat get(std::int64_t k) const;
    void set(std::int64_t k, const Rat& v);
    void add(std::int64_t k, const Rat& v);

    const std::map<std::int64_t, Rat>& coords() const { return coords_; }
    bool is_zero() const { return coords_.empty(); }
    FinSet support() const;
    // Smallest interval covering the support; throws on the zero vector.
    Interval range() const;
    std::int64_t min_support() const;
    std::int64_t max_support() const;

    SparseVector restrict(const Interval& iv) const;
    SparseVector restrict(const FinSet& s) const;
    SparseVector scaled(const Rat& c) const;
    SparseVector operator+(const SparseVector& o) const;
    SparseVector operator-(const SparseVector& o) const;
    SparseVector operator-() const;

    Rat dot(const SparseVector& o) const;
    Rat l2_squared() const;
    Rat l1() const;
    Rat max_abs() const;

    bool operator==(const SparseVector&) const = default;
    std::string str() const;

private:
    std::map<std::int64_t, Rat> coords_;
};

// Vector whose coordinates are sign * sqrt(square) with rational squares.
// This is closed under the square-root weighting used by squared averages.
class SqrtVector {
public:
    struct Coord {
        Rat square;
        int sign = 1;
        bool operator==(const Coord&) const = default;
    };

    SqrtVector() = default;
    static SqrtVector from_rational(const SparseVector& x);
    static SqrtVector from_squares(const SparseVector& squares);

    const std::map<std::int64_t, Coord>& coords() const { return coords_; }
    void set(std::int64_t k, const Rat& square, int sign = 1);
    bool is_zero() const { return coords_.empty(); }

    FinSet support() const;
    Interval range() const;
    std::int64_t min_support() const;
    std::int64_t max_support() const;

    // The coordinatewise squares as a nonnegative rational vector.
    SparseVector squares() const;
    Rat l2_squared() const;
    // Multiplies every coordinate by sqrt(c), c >= 0.
    SqrtVector scaled_by_root(const Rat& c) const;
    SqrtVector negated() const;
    SqrtVector restrict(const Interval& iv) const;
    // Coordinate sum of disjointly supported vectors.
    SqrtVector disjoint_sum(const SqrtVector& o) const;

    // Exact when every square is a rational square.
    bool to_rational(SparseVector& out) const;
    double approx(std::int64_t k) const;

    // Certified bounds [lo, hi] on <f, x> for a rational functional f.
    std::pair<Rat, Rat> dot_bounds(const SparseVector& f, unsigned bits = 64) const;

    bool operator==(const SqrtVector&) const = default;
    std::string str() const;

private:
    std::map<std::int64_t, Coord> coords_;
};

}  // namespace hi
