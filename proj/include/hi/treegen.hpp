#pragma once

#include "hi/trees.hpp"

#include <random>

namespace hi::treegen {

// Toy system with m_i = i + 1, small n_i and f_i from the maximum-sum rule
// where that enumeration is cheap. Long enough for many sigma registrations.
ParameterSystem linear_params(std::size_t length = 64);

struct Options {
    int max_depth = 3;
    int max_children = 3;
    int max_gap = 2;
    int max_den = 8;
    bool odd_nodes = true;
    // Largest index used for freely chosen weights.
    std::size_t max_free_index = 8;
};

// Random tree accepted by validate, with index set starting at or after lo.
// Odd nodes carry witnesses whose sigma entries are registered in reg.
NormingTree random_tree(std::mt19937_64& rng, std::int64_t lo, SigmaRegistry& reg, const Options& opt = {});

// Random rational vector supported in [lo, hi].
SparseVector random_vector(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi, int max_den = 9);

}  // namespace hi::treegen
