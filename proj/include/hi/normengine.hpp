#pragma once

#include "hi/averages.hpp"
#include "hi/params.hpp"
#include "hi/trees.hpp"
#include "hi/vectors.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hi {

struct NormCertificate {
    NormingTree tree;
    // Exact eval(tree, x) for rational x; for square-root vectors the rational lower end of the enclosure.
    Rat value;
    std::string vector_digest;

    nlohmann::json to_json() const;
    static NormCertificate from_json(const nlohmann::json& j);
};

struct NormBounds {
    Rat lower;                      // |value| of the best certificate
    Rat upper_sq;                   // squared l2 norm of x
    std::optional<Rat> even_exact_sq;
    bool even_set_mode = false;
};

struct EstimateReport {
    bool pass = false;
    Rat lhs_sq;  // squared quantity on the left of the inequality
    Rat rhs_sq;  // squared bound
    std::string detail;
    std::string str() const;
};

namespace normengine {

enum class EvenMode { Interval, Set };

// Canonical text of a vector, hashed; identical vectors give identical digests.
std::string digest(const SparseVector& x);
std::string digest(const SqrtVector& x);

// Exact squared optimum over even-weight trees with real coefficients.
// Interval mode runs a split-point DP; set mode ranges over successive subsets with a bitmask memo.
Rat norm_even_exact_sq(const SqrtVector& x, const ParameterSystem& p, EvenMode mode = EvenMode::Interval,
                       std::size_t max_support = 14);
Rat norm_even_exact_sq(const SparseVector& x, const ParameterSystem& p, EvenMode mode = EvenMode::Interval,
                       std::size_t max_support = 14);

struct EvenSolution {
    Rat value_sq;
    NormingTree tree;  // rational-coefficient tree realizing value_sq up to rounding of square roots
};

// Interval-mode optimum together with a validated witness tree.
EvenSolution even_solve(const SqrtVector& x, const ParameterSystem& p, std::size_t max_support = 200);

// Best certificate among singletons, the even optimum tree, and the supplied candidate trees (and their negations).
NormCertificate norm_lower(const SparseVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                           std::size_t budget = 200, const std::vector<NormingTree>& candidates = {});
NormCertificate norm_lower(const SqrtVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                           std::size_t budget = 200, const std::vector<NormingTree>& candidates = {});

Rat norm_upper_sq(const SparseVector& x);
Rat norm_upper_sq(const SqrtVector& x);

NormBounds bounds(const SparseVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                  std::size_t budget = 200);

// Re-validates the tree and re-evaluates it on x.
bool verify_certificate(const NormCertificate& c, const SparseVector& x, const ParameterSystem& p,
                        const SigmaRegistry& reg);
bool verify_certificate(const NormCertificate& c, const SqrtVector& x, const ParameterSystem& p,
                        const SigmaRegistry& reg);

// Blocks normalized in the even norm; squared even norm of sum a_i x_i against 3 sum a_i^2.
EstimateReport check_upper_l2(const std::vector<SqrtVector>& blocks, const std::vector<Rat>& coeffs,
                              const ParameterSystem& p, std::size_t max_support = 200);

struct AsymptoticReport {
    EstimateReport lower;
    EstimateReport upper;
    NormingTree functional;  // the explicit lower-bound functional
    bool exact = false;      // blocks normalized exactly and a / |a| rational
    bool pass() const { return lower.pass && upper.pass; }
};

// Explicit functional (1/m_2) sum (a_i/|a|) x*_i on blocks with n <= min supp of the first block.
AsymptoticReport check_asymptotic(const std::vector<SparseVector>& blocks, const std::vector<Rat>& coeffs,
                                  const ParameterSystem& p, const SigmaRegistry& reg, std::size_t max_support = 200);

struct ClosureBounds {
    Rat lower_sq;  // squared lower bound on the norm over the closure
    Rat upper_sq;  // squared upper bound
    // True when every registered sequence is a prefix of the chain, the chain trees have no odd
    // nodes and x is rational; then the bounds enclose the norm over all trees.
    bool exhaustive = false;
    std::size_t odd_candidates = 0;  // spans with an admissible odd candidate in the upper run
    std::string detail;
};

// Norm bounds over even trees together with odd nodes built on the given dependent chain.
// Odd nodes use a prefix-registered extension of the chain whose last member is free.
ClosureBounds chain_closure_bounds(const SqrtVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                                   const std::vector<NormingTree>& chain, std::size_t max_support = 200);

// Squared norm of the projection of y onto the cone of nonincreasing nonnegative sequences.
Rat monotone_cone_projection_sq(const std::vector<Rat>& y);

// Oracle for the smoothing search: exact even squared norm and a certificate tree.
averages::NormOracle make_oracle(const ParameterSystem& p, std::size_t max_support = 200);

}  // namespace normengine

}  // namespace hi
