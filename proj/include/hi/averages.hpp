#pragma once

#include "hi/core.hpp"
#include "hi/vectors.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hi {

// Strictly increasing sequence: an explicit head optionally followed by an
// arithmetic progression. A stream without a progression is finite.
class IndexStream {
public:
    static IndexStream arithmetic(std::int64_t start, std::int64_t step = 1);
    static IndexStream explicit_list(std::vector<std::int64_t> xs);
    static IndexStream with_tail(std::vector<std::int64_t> head, std::int64_t start, std::int64_t step);

    std::int64_t at(std::size_t i) const;
    std::int64_t min() const { return at(0); }
    bool finite() const { return !tail_; }
    std::optional<std::size_t> size() const;
    // The subsequence of elements strictly greater than x.
    IndexStream after(std::int64_t x) const;
    IndexStream drop(std::size_t n) const;
    std::vector<std::int64_t> prefix(std::size_t n) const;
    bool contains(std::int64_t x) const;
    std::string str() const;

private:
    std::vector<std::int64_t> head_;
    bool tail_ = false;
    std::int64_t start_ = 0, step_ = 1;
};

namespace averages {

// Caps the number of materialized coordinates of any single average.
inline constexpr std::size_t kMaxSupport = 1u << 20;

// [xi]_1^M, ..., [xi]_count^M.
std::vector<SparseVector> build_basic(int xi, const IndexStream& m, std::size_t count);

// (xi)_n^M, 1-based n.
SqrtVector build_squared(int xi, const IndexStream& m, std::size_t n);

struct Mass {
    Rat value;     // exact maximum of the summed squares over F in S_eta
    FinSet witness;
    double root = 0;
};

// Exact max over F in S_eta, F inside supp v, of the sum of v(k)^2.
Mass schreier_l2_mass(const SqrtVector& v, int eta);
Mass schreier_mass_of_weights(const SparseVector& w, int eta);

// Upper bound C_xi / min M on the S_{xi-1} mass of [xi]_1^M valid for every
// stream M, with C_1 = 1 and C_xi = 1 + 3/2 C_{xi-1}.
Rat mass_bound_constant(int xi);
Rat universal_mass_bound(int xi, std::int64_t min_m);

// Smallest n with universal_mass_bound(xi, n) < eps^2.
std::int64_t eps_threshold(int xi, const Rat& eps);

struct EpsCheck {
    bool ok = false;
    bool exact = false;  // exact mass computed rather than the universal bound
    Rat mass;            // exact mass or the bound
    FinSet witness;
};

// Checks sup over F in S_{xi-1} of the squared mass of (xi)_1^R against eps^2.
EpsCheck check_eps(int xi, const IndexStream& r, const Rat& eps);

// sum_n (xi)_1^R(p_n) u_n over blocks whose minimum lies in R.
SqrtVector squared_average_of_blocks(const std::vector<SqrtVector>& blocks, const Rat& eps, int xi,
                                     const IndexStream& r);

struct NormOracleResult {
    Rat norm_sq;            // exact squared norm over the certified tree set
    Rat certified_lower;    // rational lower bound carried by the certificate
    std::string certificate;  // serialized tree
};

using NormOracle = std::function<NormOracleResult(const SqrtVector&)>;

struct SmoothResult {
    bool success = false;
    int round = 0;
    std::size_t index = 0;
    SqrtVector raw;        // the squared average before normalization
    Rat raw_norm_sq;
    Rat certified_lower;   // certificate value on raw
    std::string certificate;
    SqrtVector normalized;
    std::vector<std::string> transcript;
};

// Iterated squared averages of the blocks at level f_j + 1, normalizing each
// round, until some vector has norm at least 1/2 or ell_j rounds pass.
SmoothResult smooth_normalize_search(const std::vector<SqrtVector>& blocks, const Rat& eps, int xi, int rounds,
                                     const NormOracle& norm);

}  // namespace averages
}  // namespace hi
