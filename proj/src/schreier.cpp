#include "hi/schreier.hpp"

#include <map>
#include <mutex>
#include <shared_mutex>

namespace hi::schreier {

namespace {

using Key = std::pair<int, std::vector<std::int64_t>>;

std::shared_mutex g_mutex;
std::map<Key, bool> g_cache;

bool member_range(const std::int64_t* first, std::size_t len, int xi);

// Length of the longest prefix of [first, first+len) that lies in S_xi.
// Prefix membership is monotone because the families are hereditary.
std::size_t longest_prefix(const std::int64_t* first, std::size_t len, int xi) {
    std::size_t lo = 1, hi = len;  // a singleton is always a member
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        if (member_range(first, mid, xi))
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

bool compute(const std::int64_t* first, std::size_t len, int xi) {
    if (len <= 1) return true;
    if (xi == 0) return false;
    // Greedy left-to-right peeling minimizes the piece count for hereditary families.
    std::int64_t budget = first[0];
    std::size_t pos = 0;
    std::int64_t pieces = 0;
    while (pos < len) {
        if (++pieces > budget) return false;
        pos += longest_prefix(first + pos, len - pos, xi - 1);
    }
    return true;
}

bool member_range(const std::int64_t* first, std::size_t len, int xi) {
    if (len <= 1) return true;
    if (xi == 0) return false;
    if (static_cast<std::int64_t>(len) <= first[0]) return true;  // already in S_1
    // A set needing index xi splits into at least two pieces, one of which needs
    // xi - 1, so membership is settled at index len - 1.
    if (static_cast<std::size_t>(xi) >= len) xi = static_cast<int>(len - 1);
    Key key{xi, std::vector<std::int64_t>(first, first + len)};
    {
        std::shared_lock lock(g_mutex);
        auto it = g_cache.find(key);
        if (it != g_cache.end()) return it->second;
    }
    bool r = compute(first, len, xi);
    std::unique_lock lock(g_mutex);
    g_cache.emplace(std::move(key), r);
    return r;
}

}  // namespace

bool is_member(const FinSet& f, int xi) {
    if (xi < 0) throw Error("negative Schreier index");
    return member_range(f.elems().data(), f.size(), xi);
}

bool is_maximal(const FinSet& f, int xi) {
    if (f.empty()) throw Error("maximality undefined for empty set");
    return is_member(f, xi) && !is_member(f.with(f.max() + 1), xi);
}

bool mins_admissible(const std::vector<std::int64_t>& mins, int xi) {
    if (mins.empty()) return false;
    for (std::size_t i = 1; i < mins.size(); ++i)
        if (mins[i] <= mins[i - 1]) return false;
    return member_range(mins.data(), mins.size(), xi);
}

bool is_admissible(const std::vector<FinSet>& sets, int xi) {
    if (sets.empty()) return false;
    std::vector<std::int64_t> mins;
    mins.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (sets[i].empty()) return false;
        if (i > 0 && !successive(sets[i - 1], sets[i])) return false;
        mins.push_back(sets[i].min());
    }
    return member_range(mins.data(), mins.size(), xi);
}

std::size_t cache_size() {
    std::shared_lock lock(g_mutex);
    return g_cache.size();
}

void clear_cache() {
    std::unique_lock lock(g_mutex);
    g_cache.clear();
}

}  // namespace hi::schreier

namespace hi::schreier {

int clamp_index(const Int& n) {
    if (n < 0) throw Error("negative Schreier index");
    if (n > (1 << 30)) return 1 << 30;
    return static_cast<int>(n.get_si());
}

}  // namespace hi::schreier
