#include "hi/averages.hpp"
#include "hi/schreier.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace hi {
namespace {

using averages::build_basic;
using averages::build_squared;

constexpr size_t kIterations = 100;

// Literal transcription of the recursion on an explicit finite list.
std::vector<std::map<std::int64_t, Rat>> literal(int xi, std::vector<std::int64_t> m, size_t count) {
    std::vector<std::map<std::int64_t, Rat>> out;
    if (xi == 0) {
        for (size_t n = 0; n < count; ++n) out.push_back({{m.at(n), Rat(1)}});
        return out;
    }
    std::vector<std::int64_t> cur = m;
    for (size_t n = 0; n < count; ++n) {
        std::int64_t k = cur.at(0);
        auto inner = literal(xi - 1, cur, static_cast<size_t>(k));
        std::map<std::int64_t, Rat> v;
        for (auto& piece : inner)
            for (auto& [idx, c] : piece) v[idx] += c / k;
        out.push_back(v);
        std::int64_t top = v.rbegin()->first;
        std::vector<std::int64_t> rest;
        for (auto x : cur)
            if (x > top) rest.push_back(x);
        cur = rest;
    }
    return out;
}

std::vector<std::int64_t> random_stream(std::mt19937_64& rng, std::int64_t lo, size_t len) {
    std::vector<std::int64_t> s;
    std::int64_t cur = lo;
    for (size_t i = 0; i < len; ++i) {
        s.push_back(cur);
        cur += 1 + static_cast<std::int64_t>(rng() % 3);
    }
    return s;
}

class AveragesTest : public ::testing::Test {
protected:
    std::mt19937_64 rng{0xa5e};
};

TEST_F(AveragesTest, LevelZeroIsUnitVectors) {
    auto m = IndexStream::arithmetic(3, 4);
    auto v = build_basic(0, m, 5);
    for (size_t n = 0; n < 5; ++n) EXPECT_EQ(v[n], SparseVector::unit(3 + 4 * static_cast<std::int64_t>(n)));
}

TEST_F(AveragesTest, EvensExamples) {
    auto evens = IndexStream::arithmetic(2, 2);
    auto v = build_basic(1, evens, 2);
    EXPECT_EQ(v[0], (SparseVector{{2, Rat(1, 2)}, {4, Rat(1, 2)}}));
    SparseVector second;
    for (std::int64_t k = 6; k <= 16; k += 2) second.set(k, Rat(1, 6));
    EXPECT_EQ(v[1], second);
}

TEST_F(AveragesTest, SquaredExamples) {
    auto evens = IndexStream::arithmetic(2, 2);
    auto s = build_squared(1, evens, 1);
    EXPECT_EQ(s.squares(), (SparseVector{{2, Rat(1, 2)}, {4, Rat(1, 2)}}));
    EXPECT_EQ(s.l2_squared(), 1);
    auto z = build_squared(0, evens, 3);
    EXPECT_EQ(z.squares(), SparseVector::unit(6));
}

TEST_F(AveragesTest, MatchesLiteralRecursion) {
    for (size_t it = 0; it < kIterations; ++it) {
        int xi = static_cast<int>(rng() % 3);
        auto list = random_stream(rng, 1 + static_cast<std::int64_t>(rng() % 3), 400);
        size_t count = 1 + rng() % 2;
        std::vector<SparseVector> got;
        try {
            got = build_basic(xi, IndexStream::explicit_list(list), count);
        } catch (const Error&) {
            continue;  // exhausted the finite list
        }
        auto want = literal(xi, list, count);
        ASSERT_EQ(got.size(), want.size());
        for (size_t n = 0; n < count; ++n) {
            SparseVector w;
            for (auto& [k, c] : want[n]) w.set(k, c);
            ASSERT_EQ(got[n], w);
        }
    }
}

TEST_F(AveragesTest, ExactnessAndSuccessiveness) {
    size_t checked = 0;
    for (size_t it = 0; checked < kIterations; ++it) {
        int xi = static_cast<int>(rng() % 4);
        std::int64_t start = 1 + static_cast<std::int64_t>(rng() % (xi == 3 ? 2 : 6));
        std::int64_t step = 1 + static_cast<std::int64_t>(rng() % 2);
        auto m = IndexStream::arithmetic(start, step);
        size_t count = xi == 3 ? 1 : 1 + rng() % 3;
        std::vector<SparseVector> v;
        try {
            v = build_basic(xi, m, count);
        } catch (const Error&) {
            continue;
        }
        for (size_t n = 0; n < v.size(); ++n) {
            Rat sum = 0;
            for (auto& [k, c] : v[n].coords()) {
                sum += c;
                ASSERT_TRUE(m.contains(k));
            }
            ASSERT_EQ(sum, 1);
            auto sq = SqrtVector::from_squares(v[n]);
            ASSERT_EQ(sq.l2_squared(), 1);
            if (n > 0) ASSERT_LT(v[n - 1].max_support(), v[n].min_support());
        }
        ++checked;
    }
}

TEST_F(AveragesTest, MassExamples) {
    SqrtVector one;
    one.set(7, Rat(3, 11));
    for (int eta = 0; eta < 4; ++eta) EXPECT_EQ(averages::schreier_l2_mass(one, eta).value, Rat(3, 11));
    auto s = build_squared(1, IndexStream::arithmetic(2, 2), 1);
    EXPECT_EQ(averages::schreier_l2_mass(s, 0).value, Rat(1, 2));
}

TEST_F(AveragesTest, MassMatchesExhaustiveSearch) {
    for (size_t it = 0; it < kIterations; ++it) {
        auto supp = oracle::random_set(rng, 1, 14, 1 + rng() % 9);
        SparseVector w;
        for (auto k : supp) w.set(k, frac(static_cast<long>(1 + rng() % 9), static_cast<long>(1 + rng() % 5)));
        int eta = static_cast<int>(rng() % 4);
        Rat best = 0;
        for (std::uint32_t mask = 0; mask < (1u << supp.size()); ++mask) {
            oracle::Elems f;
            Rat s = 0;
            for (size_t i = 0; i < supp.size(); ++i)
                if (mask >> i & 1) f.push_back(supp[i]), s += w.get(supp[i]);
            if (oracle::member(f, eta) && s > best) best = s;
        }
        auto got = averages::schreier_mass_of_weights(w, eta);
        ASSERT_EQ(got.value, best);
        ASSERT_TRUE(schreier::is_member(got.witness, eta));
        Rat ws = 0;
        for (auto k : got.witness) ws += w.get(k);
        ASSERT_EQ(ws, best);
    }
}

TEST_F(AveragesTest, MassLevelTwoOfToyStream) {
    // (2)_1^M for M = (2,3,4,...): exhaustive S_1 search over the six points.
    auto s = build_squared(2, IndexStream::arithmetic(2), 1);
    ASSERT_EQ(s.coords().size(), 6u);
    auto m = averages::schreier_l2_mass(s, 1);
    EXPECT_EQ(m.value, Rat(1, 2));
}

TEST_F(AveragesTest, UniversalBoundDominatesExactMass) {
    for (int xi = 1; xi <= 3; ++xi)
        for (std::int64_t start = 1; start <= (xi == 3 ? 2 : 10); ++start)
            for (std::int64_t step = 1; step <= 2; ++step) {
                SparseVector v;
                try {
                    v = build_basic(xi, IndexStream::arithmetic(start, step), 1).front();
                    if (xi >= 3 && v.coords().size() > 40) continue;
                } catch (const Error&) {
                    continue;
                }
                Rat exact = averages::schreier_mass_of_weights(v, xi - 1).value;
                ASSERT_LE(exact, averages::universal_mass_bound(xi, start)) << xi << " " << start;
            }
}

TEST_F(AveragesTest, EpsilonThresholdInstances) {
    for (int xi = 1; xi <= 3; ++xi)
        for (Rat eps : {Rat(1, 2), Rat(1, 10)}) {
            std::int64_t n = averages::eps_threshold(xi, eps);
            ASSERT_LT(averages::universal_mass_bound(xi, n), eps * eps);
            for (std::int64_t start : {n, n + 1, 2 * n}) {
                for (std::int64_t step : {1, 2, 5}) {
                    auto chk = averages::check_eps(xi, IndexStream::arithmetic(start, step), eps);
                    ASSERT_TRUE(chk.ok) << "xi=" << xi << " eps=" << eps << " start=" << start;
                }
            }
            if (xi == 1 || (xi == 2 && eps == Rat(1, 2))) {
                auto chk = averages::check_eps(xi, IndexStream::arithmetic(n), eps);
                EXPECT_TRUE(chk.exact);
            }
        }
}

TEST_F(AveragesTest, SquaredAverageOfUnitBlocks) {
    std::vector<SqrtVector> blocks;
    for (std::int64_t k = 3; k <= 12; ++k) blocks.push_back(SqrtVector::from_rational(SparseVector::unit(k)));
    auto r = IndexStream::explicit_list({3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    auto v = averages::squared_average_of_blocks(blocks, Rat(3, 5), 1, r);
    EXPECT_EQ(v.squares(), (SparseVector{{3, Rat(1, 3)}, {4, Rat(1, 3)}, {5, Rat(1, 3)}}));
    EXPECT_THROW(averages::squared_average_of_blocks(blocks, Rat(1, 2), 1, r), Error);
    try {
        averages::squared_average_of_blocks(blocks, Rat(1, 2), 1, r);
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("F={3}"), std::string::npos) << e.what();
    }
}

TEST_F(AveragesTest, SquaredAverageScalesBlocks) {
    // Two-point blocks; level one gives sqrt(1/k) times each block.
    std::vector<SqrtVector> blocks;
    for (std::int64_t k = 4; k <= 20; k += 2) {
        SparseVector b{{k, Rat(3, 5)}, {k + 1, Rat(-4, 5)}};
        blocks.push_back(SqrtVector::from_rational(b));
    }
    std::vector<std::int64_t> mins;
    for (auto& b : blocks) mins.push_back(b.min_support());
    auto v = averages::squared_average_of_blocks(blocks, Rat(3, 4), 1, IndexStream::explicit_list(mins));
    ASSERT_EQ(v.coords().size(), 8u);
    for (std::int64_t k = 4; k <= 10; k += 2) {
        EXPECT_EQ(v.coords().at(k).square, Rat(9, 25) / 4);
        EXPECT_EQ(v.coords().at(k + 1).square, Rat(16, 25) / 4);
        EXPECT_EQ(v.coords().at(k + 1).sign, -1);
    }
}

TEST_F(AveragesTest, StreamBasics) {
    auto s = IndexStream::with_tail({1, 4}, 10, 3);
    EXPECT_EQ(s.prefix(4), (std::vector<std::int64_t>{1, 4, 10, 13}));
    EXPECT_EQ(s.after(11).min(), 13);
    EXPECT_EQ(s.drop(2).min(), 10);
    EXPECT_THROW(IndexStream::explicit_list({1, 2}).at(2), Error);
    EXPECT_THROW(IndexStream::explicit_list({3, 2}), Error);
}

}  // namespace
}  // namespace hi
