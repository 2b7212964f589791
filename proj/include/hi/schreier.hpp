#pragma once

#include "hi/core.hpp"

#include <vector>

namespace hi::schreier {

// F in S_xi under the recursive definition; the empty set belongs to every S_xi.
bool is_member(const FinSet& f, int xi);

// F in S_xi and no one-point extension past max F stays in S_xi.
bool is_maximal(const FinSet& f, int xi);

// Nonempty successive sets whose minima form a member of S_xi.
bool is_admissible(const std::vector<FinSet>& sets, int xi);

// Membership of the minima alone, for callers that already hold them sorted.
bool mins_admissible(const std::vector<std::int64_t>& mins, int xi);

// Number of cached (set, xi) entries; exposed for tests.
std::size_t cache_size();
void clear_cache();

}  // namespace hi::schreier

namespace hi::schreier {

// Clamps a big index to int; indices past any set size behave identically.
int clamp_index(const Int& n);

}  // namespace hi::schreier
