#include "hi/treegen.hpp"

#include "hi/schreier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace hi::treegen {

ParameterSystem linear_params(std::size_t length) {
    static std::mutex mu;
    static std::map<std::size_t, ParameterSystem> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(length); it != cache.end()) return it->second;
    Overrides o;
    for (std::size_t i = 1; i <= length; ++i) {
        o.m.push_back(Int(static_cast<long>(i) + 1));
        o.ell.push_back(params::minimal_ell(o.m.back()));
    }
    o.n.push_back(0);
    for (std::size_t i = 1; i <= length; ++i) o.n.push_back(Int(1 + static_cast<long>(i % 3)));
    return cache[length] = params::generate(Mode::Toy, length, o);
}

namespace {

struct Gen {
    std::mt19937_64& rng;
    SigmaRegistry& reg;
    const Options& opt;

    long uniform(long a, long b) { return std::uniform_int_distribution<long>(a, b)(rng); }
    bool coin(double p) { return std::bernoulli_distribution(p)(rng); }

    const ParameterSystem& params() const { return reg.params(); }

    // Coefficients with sum of squares at most 1; positive and nonincreasing when requested.
    std::vector<Rat> gammas(std::size_t c, bool positive) {
        long d = 2L * opt.max_den;
        long cap = static_cast<long>(std::floor(d / std::sqrt(static_cast<double>(c))));
        cap = std::max(cap, 1L);
        std::vector<long> a(c);
        for (auto& x : a) x = positive ? uniform(1, cap) : uniform(-cap, cap);
        if (positive) std::sort(a.begin(), a.end(), std::greater<>());
        long sq = 0;
        for (auto x : a) sq += x * x;
        if (sq > d * d) d = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(sq))));
        std::vector<Rat> out;
        for (auto x : a) out.push_back(frac(x, d));
        return out;
    }

    NormingTree leaf(std::int64_t& pos) {
        pos += uniform(0, opt.max_gap);
        Rat g = frac(uniform(-opt.max_den, opt.max_den), opt.max_den);
        return NormingTree::leaf(pos++, g);
    }

    NormingTree any(std::int64_t& pos, int depth) {
        if (depth <= 1 || coin(0.3)) return leaf(pos);
        std::size_t top = std::min(opt.max_free_index, params().length());
        auto idx = static_cast<std::size_t>(uniform(1, static_cast<long>(top)));
        if (idx % 2 == 1) {
            if (opt.odd_nodes) {
                std::int64_t save = pos;
                if (auto t = odd(idx, pos, depth)) return *t;
                pos = save;
            }
            if (idx + 1 <= params().length()) ++idx;
        }
        return weighted(params().m(idx), idx, pos, depth);
    }

    NormingTree weighted(const Int& w, std::size_t idx, std::int64_t& pos, int depth) {
        auto c = static_cast<std::size_t>(uniform(1, opt.max_children));
        std::vector<NormingTree> kids;
        std::vector<FinSet> sets;
        int ni = params().schreier_n(idx);
        for (std::size_t i = 0; i < c; ++i) {
            std::int64_t save = pos;
            NormingTree k = any(pos, depth - 1);
            sets.push_back(k.iset);
            if (!schreier::is_admissible(sets, ni)) {
                sets.pop_back();
                pos = save;
                break;
            }
            kids.push_back(std::move(k));
        }
        auto g = gammas(kids.size(), false);
        for (std::size_t i = 0; i < kids.size(); ++i) kids[i].gamma = g[i];
        Rat root = frac(uniform(-opt.max_den, opt.max_den), opt.max_den);
        return NormingTree::node(w, root, std::move(kids));
    }

    std::optional<NormingTree> odd(std::size_t idx, std::int64_t& pos, int depth) {
        const std::size_t len = params().length();
        std::size_t e = idx + 1 + 2 * static_cast<std::size_t>(uniform(0, 2));
        while (e > len && e > idx + 1) e -= 2;
        if (e > len) return std::nullopt;
        long k = uniform(0, 1);
        long nc = uniform(1, opt.max_children);
        std::vector<NormingTree> chain;
        chain.push_back(weighted(params().m(e), e, pos, depth - 1));
        for (long t = 1; t < k + nc; ++t) {
            if (reg.cursor() + 2 > len) break;
            Int w = reg.register_sequence(chain);
            auto wi = params().index_of_weight(w);
            chain.push_back(weighted(w, *wi, pos, depth - 1));
        }
        int ni = params().schreier_n(idx);
        std::vector<FinSet> sets;
        std::size_t keep = 0;
        for (const auto& r : chain) {
            sets.push_back(r.iset);
            if (!schreier::is_admissible(sets, ni)) break;
            ++keep;
        }
        if (keep < static_cast<std::size_t>(k) + 1) return std::nullopt;
        chain.resize(keep);
        nc = static_cast<long>(keep) - k;
        pos = chain.back().iset.max() + 1;
        const auto& first = chain[static_cast<std::size_t>(k)].iset.elems();
        std::int64_t L = first[static_cast<std::size_t>(uniform(0, static_cast<long>(first.size()) - 1))];
        auto g = gammas(static_cast<std::size_t>(nc), true);
        std::vector<NormingTree> kids;
        for (long i = 0; i < nc; ++i) {
            auto cut = trees::restrict(chain[static_cast<std::size_t>(k + i)], Interval{L, Interval::kInf});
            cut->gamma = g[static_cast<std::size_t>(i)];
            kids.push_back(std::move(*cut));
        }
        Rat root = frac(uniform(-opt.max_den, opt.max_den), opt.max_den);
        NormingTree t = NormingTree::node(params().m(idx), root, std::move(kids));
        auto w = std::make_shared<DependentWitness>();
        w->k = k;
        w->L = L;
        w->extension = std::move(chain);
        t.witness = std::move(w);
        return t;
    }
};

}  // namespace

NormingTree random_tree(std::mt19937_64& rng, std::int64_t lo, SigmaRegistry& reg, const Options& opt) {
    Gen g{rng, reg, opt};
    std::int64_t pos = std::max<std::int64_t>(lo, 1);
    return g.any(pos, opt.max_depth);
}

SparseVector random_vector(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi, int max_den) {
    SparseVector x;
    std::uniform_int_distribution<long> num(-9, 9), den(1, max_den);
    std::bernoulli_distribution keep(0.7);
    for (std::int64_t k = lo; k <= hi; ++k)
        if (keep(rng)) x.set(k, frac(num(rng), den(rng)));
    return x;
}

}  // namespace hi::treegen
