#include "hi/normengine.hpp"
#include "hi/schreier.hpp"
#include "hi/treegen.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hi;
namespace ne = hi::normengine;

namespace {

ParameterSystem make_params(const std::vector<long>& m, const std::vector<long>& n, std::vector<long> ell = {}) {
    Overrides o;
    for (std::size_t i = 0; i < m.size(); ++i) {
        o.m.push_back(Int(m[i]));
        o.ell.push_back(i < ell.size() ? Int(ell[i]) : params::minimal_ell(Int(m[i])));
    }
    for (long v : n) o.n.push_back(Int(v));
    return params::generate(Mode::Toy, m.size(), o);
}

// Even-closure value over successive subsets, enumerated without memoization.
Rat brute_val(const std::vector<std::int64_t>& e, const std::map<std::int64_t, Rat>& sq, const ParameterSystem& p);

struct Enumerator {
    const std::vector<std::int64_t>& e;
    const std::map<std::int64_t, Rat>& sq;
    const ParameterSystem& p;
    int xi;
    std::vector<std::vector<std::int64_t>> pieces;
    Rat best = -1;

    void go(std::size_t i) {
        if (i == e.size()) {
            if (pieces.empty()) return;
            if (pieces.size() == 1 && pieces[0].size() == e.size()) return;
            std::vector<std::int64_t> mins;
            for (auto& q : pieces) mins.push_back(q.front());
            if (!schreier::is_member(FinSet(mins), xi)) return;
            Rat s = 0;
            for (auto& q : pieces) s += brute_val(q, sq, p);
            if (s > best) best = s;
            return;
        }
        go(i + 1);
        if (!pieces.empty()) {
            pieces.back().push_back(e[i]);
            go(i + 1);
            pieces.back().pop_back();
        }
        pieces.push_back({e[i]});
        go(i + 1);
        pieces.pop_back();
    }
};

Rat brute_val(const std::vector<std::int64_t>& e, const std::map<std::int64_t, Rat>& sq, const ParameterSystem& p) {
    Rat best = 0;
    for (auto k : e) best = std::max(best, sq.at(k));
    for (std::size_t j = 2; j <= p.length(); j += 2) {
        Enumerator en{e, sq, p, p.schreier_n(j), {}, -1};
        en.go(0);
        if (en.best >= 0) {
            Int m = p.m(j);
            best = std::max(best, Rat(en.best / (m * m)));
        }
    }
    return best;
}

Rat brute_even_sq(const SparseVector& x, const ParameterSystem& p) {
    std::vector<std::int64_t> e;
    std::map<std::int64_t, Rat> sq;
    for (const auto& [k, v] : x.coords()) {
        e.push_back(k);
        sq[k] = v * v;
    }
    return brute_val(e, sq, p);
}

SparseVector random_sparse(std::mt19937_64& rng, std::size_t max_n, std::int64_t lo, std::int64_t span) {
    SparseVector x;
    std::uniform_int_distribution<std::int64_t> pos(lo, lo + span - 1);
    std::uniform_int_distribution<long> num(-6, 6), den(1, 4);
    std::size_t n = 1 + rng() % max_n;
    while (x.coords().size() < n) {
        long a = num(rng);
        if (a != 0) x.set(pos(rng), frac(a, den(rng)));
    }
    return x;
}

class NormEngineTest : public ::testing::Test {
protected:
    void SetUp() override {
        // m_2 = 3 with S_3 families, m_4 = 5 with S_2, m_6 = 7 with S_1.
        small_ = make_params({2, 3, 4, 5, 6, 7}, {0, 1, 3, 1, 2, 2, 1});
        // Tightly constrained variant: n_2 = 1.
        tight_ = make_params({2, 3, 4, 5}, {0, 0, 1, 1, 1});
    }

    ParameterSystem small_, tight_;
    std::mt19937_64 rng_{7341};
};

}  // namespace

TEST_F(NormEngineTest, UnitVectorsHaveNormOne) {
    SigmaRegistry reg(small_);
    for (std::int64_t k : {1, 4, 17}) {
        auto e = SparseVector::unit(k);
        EXPECT_EQ(ne::norm_even_exact_sq(e, small_), 1);
        EXPECT_EQ(ne::norm_even_exact_sq(e, small_, ne::EvenMode::Set), 1);
        auto c = ne::norm_lower(e, small_, reg);
        EXPECT_EQ(c.value, 1);
        EXPECT_TRUE(c.tree.terminal());
        EXPECT_EQ(ne::norm_upper_sq(e), 1);
    }
}

TEST_F(NormEngineTest, TwoPointExample) {
    SigmaRegistry reg(small_);
    SparseVector x{{3, 1}, {7, 1}};
    EXPECT_EQ(ne::norm_upper_sq(x), 2);
    // Best even tree: a singleton beats (1/3) sqrt(2).
    EXPECT_EQ(ne::norm_even_exact_sq(x, small_), 1);
    auto cand = NormingTree::node(small_.m(2), 1, {NormingTree::leaf(3, frac(3, 5)), NormingTree::leaf(7, frac(4, 5))});
    ASSERT_TRUE(trees::validate(cand, small_, reg).ok());
    EXPECT_EQ(trees::eval(cand, x), frac(7, 15));
    auto c = ne::norm_lower(x, small_, reg, 200, {cand});
    EXPECT_EQ(c.value, 1);
    // Small coordinates let the weighted tree win.
    SparseVector y;
    for (std::int64_t k = 20; k < 36; ++k) y.set(k, 1);
    EXPECT_EQ(ne::norm_even_exact_sq(y, small_), frac(16, 9));
    auto cy = ne::norm_lower(y, small_, reg);
    EXPECT_EQ(cy.value, frac(4, 3));
    EXPECT_TRUE(ne::verify_certificate(cy, y, small_, reg));
}

TEST_F(NormEngineTest, SignSymmetry) {
    SigmaRegistry reg(small_);
    for (int it = 0; it < 50; ++it) {
        auto x = random_sparse(rng_, 8, 1, 12);
        EXPECT_EQ(ne::norm_even_exact_sq(x, small_), ne::norm_even_exact_sq(-x, small_));
        auto a = ne::norm_lower(x, small_, reg);
        auto b = ne::norm_lower(-x, small_, reg);
        EXPECT_EQ(abs(a.value), abs(b.value));
    }
}

TEST_F(NormEngineTest, ModesAgreeWithBruteForce) {
    for (const ParameterSystem* p : {&small_, &tight_}) {
        for (int it = 0; it < 100; ++it) {
            SparseVector x = random_sparse(rng_, 6, 1, 9);
            Rat brute = brute_even_sq(x, *p);
            EXPECT_EQ(ne::norm_even_exact_sq(x, *p, ne::EvenMode::Set), brute) << x.str();
            EXPECT_EQ(ne::norm_even_exact_sq(x, *p, ne::EvenMode::Interval), brute) << x.str();
        }
    }
}

TEST_F(NormEngineTest, SetAndIntervalModesAgreeWhenTreesWin) {
    int composite = 0;
    for (const ParameterSystem* p : {&small_, &tight_}) {
        for (int it = 0; it < 20; ++it) {
            SparseVector x;
            std::int64_t lo = 1 + static_cast<std::int64_t>(rng_() % 8);
            std::size_t n = 10 + rng_() % 3;
            while (x.coords().size() < n) {
                std::int64_t k = lo + static_cast<std::int64_t>(rng_() % 14);
                x.set(k, (rng_() % 4 == 0) ? Rat(-1) : (rng_() % 5 == 0 ? frac(1, 2) : Rat(1)));
            }
            Rat set = ne::norm_even_exact_sq(x, *p, ne::EvenMode::Set);
            EXPECT_EQ(ne::norm_even_exact_sq(x, *p, ne::EvenMode::Interval), set) << x.str();
            if (set > x.max_abs() * x.max_abs()) ++composite;
        }
    }
    EXPECT_GT(composite, 5);
}

TEST_F(NormEngineTest, SolutionTreeValidatesAndAttainsValue) {
    SigmaRegistry reg(small_);
    for (int it = 0; it < 100; ++it) {
        SparseVector x = random_sparse(rng_, 12, 1, 16);
        auto sx = SqrtVector::from_rational(x);
        auto sol = ne::even_solve(sx, small_);
        auto rep = trees::validate(sol.tree, small_, reg);
        ASSERT_TRUE(rep.ok()) << rep.str();
        auto iv = trees::eval_bounds(sol.tree, sx, 96);
        Rat lo = iv.first < 0 ? Rat(-iv.second) : iv.first;
        ASSERT_GE(lo, 0);
        EXPECT_LE(lo * lo, sol.value_sq);
        Rat gap = sol.value_sq - lo * lo;
        EXPECT_LE(gap * (Int(1) << 40), sol.value_sq) << x.str();
    }
}

TEST_F(NormEngineTest, EvenTreesNeverExceedEvenOptimum) {
    auto p = treegen::linear_params(64);
    treegen::Options opt;
    opt.odd_nodes = false;
    for (int it = 0; it < 200; ++it) {
        SigmaRegistry reg(p);
        auto t = treegen::random_tree(rng_, 1, reg, opt);
        ASSERT_TRUE(trees::validate(t, p, reg).ok());
        auto x = treegen::random_vector(rng_, 1, std::min<std::int64_t>(t.iset.max() + 1, 24));
        if (x.is_zero()) continue;
        Rat v = trees::eval(t, x);
        EXPECT_LE(v * v, ne::norm_even_exact_sq(x, p, ne::EvenMode::Interval, 200));
    }
}

TEST_F(NormEngineTest, SandwichAndCertificates) {
    SigmaRegistry reg(small_);
    for (int it = 0; it < 100; ++it) {
        SparseVector x = random_sparse(rng_, 10, 1, 14);
        auto b = ne::bounds(x, small_, reg);
        ASSERT_TRUE(b.even_exact_sq.has_value());
        EXPECT_LE(b.lower * b.lower, *b.even_exact_sq);
        EXPECT_LE(*b.even_exact_sq, b.upper_sq);
        auto c = ne::norm_lower(x, small_, reg);
        EXPECT_TRUE(ne::verify_certificate(c, x, small_, reg));
        auto round = NormCertificate::from_json(nlohmann::json::parse(c.to_json().dump()));
        EXPECT_TRUE(ne::verify_certificate(round, x, small_, reg));
        NormCertificate tampered = c;
        tampered.value += frac(1, 1000);
        EXPECT_FALSE(ne::verify_certificate(tampered, x, small_, reg));
        SparseVector other = x;
        other.add(x.max_support() + 1, 1);
        EXPECT_FALSE(ne::verify_certificate(c, other, small_, reg));
    }
}

TEST_F(NormEngineTest, Bimonotone) {
    for (int it = 0; it < 100; ++it) {
        SparseVector x = random_sparse(rng_, 10, 1, 14);
        std::int64_t a = 1 + static_cast<std::int64_t>(rng_() % 14);
        std::int64_t b = a + static_cast<std::int64_t>(rng_() % 8);
        std::int64_t c = std::max<std::int64_t>(1, a - static_cast<std::int64_t>(rng_() % 3));
        Interval inner{a, b}, outer{c, b + static_cast<std::int64_t>(rng_() % 3)};
        auto xi = x.restrict(inner);
        auto xo = x.restrict(outer);
        if (xi.is_zero()) continue;
        EXPECT_LE(ne::norm_even_exact_sq(xi, small_), ne::norm_even_exact_sq(xo, small_));
        EXPECT_LE(ne::norm_even_exact_sq(xo, small_), ne::norm_even_exact_sq(x, small_));
    }
}

TEST_F(NormEngineTest, Guards) {
    SigmaRegistry reg(small_);
    EXPECT_THROW(ne::norm_lower(SparseVector{}, small_, reg), Error);
    EXPECT_EQ(ne::norm_even_exact_sq(SparseVector{}, small_), 0);
    SparseVector big;
    for (std::int64_t k = 1; k <= 15; ++k) big.set(k, 1);
    EXPECT_THROW(ne::norm_even_exact_sq(big, small_, ne::EvenMode::Set), Error);
    EXPECT_NO_THROW(ne::norm_even_exact_sq(big, small_, ne::EvenMode::Interval));
    // Over budget: singletons and candidates only.
    auto c = ne::norm_lower(big, small_, reg, 10);
    EXPECT_EQ(c.value, 1);
}

TEST_F(NormEngineTest, UpperL2Examples) {
    for (std::size_t n : {1u, 3u, 6u}) {
        std::vector<SqrtVector> blocks;
        std::vector<Rat> a;
        for (std::size_t i = 0; i < n; ++i) {
            blocks.push_back(SqrtVector::from_rational(SparseVector::unit(static_cast<std::int64_t>(2 + i))));
            a.push_back(1);
        }
        auto r = ne::check_upper_l2(blocks, a, small_);
        EXPECT_TRUE(r.pass);
        EXPECT_EQ(r.rhs_sq, 3 * static_cast<long>(n));
    }
    // Single block: the norm of a_1 x_1 is |a_1|.
    SparseVector b{{4, 2}, {5, -1}, {9, frac(1, 2)}};
    auto r = ne::check_upper_l2({SqrtVector::from_rational(b)}, {frac(-5, 3)}, small_);
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.lhs_sq, frac(25, 9));
    EXPECT_THROW(ne::check_upper_l2({SqrtVector::from_rational(b), SqrtVector::from_rational(b)}, {1, 1}, small_),
                 Error);
}

TEST_F(NormEngineTest, UpperL2RandomInstances) {
    for (int it = 0; it < 60; ++it) {
        std::vector<SqrtVector> blocks;
        std::vector<Rat> a;
        std::int64_t pos = 1;
        std::size_t n = 1 + rng_() % 5;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = random_sparse(rng_, 4, pos, 5);
            pos = x.max_support() + 1;
            blocks.push_back(SqrtVector::from_rational(x));
            a.push_back(frac(static_cast<long>(rng_() % 13) - 6, 1 + static_cast<long>(rng_() % 3)));
        }
        auto r = ne::check_upper_l2(blocks, a, small_);
        EXPECT_TRUE(r.pass) << r.str();
    }
}

TEST_F(NormEngineTest, AsymptoticExamples) {
    SigmaRegistry reg(small_);
    std::vector<SparseVector> blocks;
    std::vector<Rat> a;
    for (std::int64_t k = 5; k < 9; ++k) {
        blocks.push_back(SparseVector::unit(k));
        a.push_back(1);
    }
    auto r = ne::check_asymptotic(blocks, a, small_, reg);
    EXPECT_TRUE(r.pass()) << r.lower.str() << " / " << r.upper.str();
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.lower.lhs_sq, frac(4, 9));
    EXPECT_TRUE(trees::validate(r.functional, small_, reg).ok());

    auto one = ne::check_asymptotic({SparseVector{{3, 2}, {4, 1}}}, {frac(-3, 2)}, small_, reg);
    EXPECT_TRUE(one.pass());
    EXPECT_EQ(one.lower.lhs_sq, frac(1, 4));
    EXPECT_EQ(one.lower.rhs_sq, frac(1, 4));

    std::vector<SparseVector> crowded{SparseVector::unit(2), SparseVector::unit(3), SparseVector::unit(4)};
    EXPECT_THROW(ne::check_asymptotic(crowded, {1, 1, 1}, small_, reg), Error);
}

TEST_F(NormEngineTest, AsymptoticRandomExact) {
    SigmaRegistry reg(small_);
    for (int it = 0; it < 40; ++it) {
        std::size_t n = 1 + rng_() % 4;
        std::vector<SparseVector> blocks;
        std::int64_t pos = static_cast<std::int64_t>(n) + static_cast<std::int64_t>(rng_() % 3);
        for (std::size_t i = 0; i < n; ++i) {
            auto x = random_sparse(rng_, 5, pos, 6);
            pos = x.max_support() + 1;
            blocks.push_back(x);
        }
        // Rational unit direction (Pythagorean) scaled by an integer.
        std::vector<Rat> a;
        Rat s = frac(1 + static_cast<long>(rng_() % 5), 1);
        for (std::size_t i = 0; i < n; ++i) a.push_back(0);
        a[0] = s;
        if (n >= 2) {
            a[0] = s * frac(3, 5);
            a[1] = -s * frac(4, 5);
        }
        auto r = ne::check_asymptotic(blocks, a, small_, reg);
        EXPECT_TRUE(r.exact);
        EXPECT_TRUE(r.pass()) << r.lower.str() << " / " << r.upper.str();
    }
}

TEST(SmoothSearch, SucceedsWithinEllRounds) {
    // m_2 = 3 with ell_2 = 2 so 2^ell_2 > m_2; n_1 = 0 forces f_2 = 0 and level f_2 + 1 = 1.
    auto p = make_params({2, 3, 4, 5}, {0, 0, 3, 1, 3}, {1, 2, 2, 3});
    ASSERT_EQ(p.f(2), 0);
    std::vector<SqrtVector> blocks;
    for (std::int64_t k = 1; k <= 200; ++k) blocks.push_back(SqrtVector::from_rational(SparseVector::unit(k)));
    auto res = averages::smooth_normalize_search(blocks, frac(1, 2), 1, 2, ne::make_oracle(p));
    ASSERT_TRUE(res.success);
    EXPECT_EQ(res.round, 2);
    EXPECT_GE(res.raw_norm_sq * 4, 1);
    EXPECT_GE(res.certified_lower * 2, 1);
    SigmaRegistry reg(p);
    auto t = trees::from_json(nlohmann::json::parse(res.certificate));
    EXPECT_TRUE(trees::validate(t, p, reg).ok());
    auto iv = trees::eval_bounds(t, res.raw, 96);
    EXPECT_GE(iv.first * 2, 1);
}
