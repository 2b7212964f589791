#include "hi/params.hpp"

#include <gtest/gtest.h>

#include <random>

namespace hi {
namespace {

constexpr size_t kIterations = 300;

// Full box enumeration with no pruning or recursion tricks.
Int naive_f(const std::vector<long>& m, const std::vector<long>& n, size_t j) {
    long bound = m[j - 1] * m[j - 1] * m[j - 1];
    std::vector<long> cap(j - 1);
    for (size_t i = 0; i + 1 < j; ++i) {
        long c = 0, p = 1;
        while (p * m[i] < bound) p *= m[i], ++c;
        cap[i] = c;
    }
    long best = 0;
    std::vector<long> rho(j - 1, 0);
    while (true) {
        long prod = 1, obj = 0;
        bool ok = true;
        for (size_t i = 0; i + 1 < j && ok; ++i)
            for (long r = 0; r < rho[i] && ok; ++r) {
                prod *= m[i];
                ok = prod < bound;
            }
        if (ok) {
            for (size_t i = 0; i + 1 < j; ++i) obj += rho[i] * n[i + 1];
            best = std::max(best, obj);
        }
        size_t k = 0;
        while (k + 1 < j && rho[k] == cap[k]) rho[k++] = 0;
        if (k + 1 >= j) break;
        ++rho[k];
    }
    return Int(best);
}

class ParamsTest : public ::testing::Test {
protected:
    std::mt19937_64 rng{0x9a4a5};
};

TEST_F(ParamsTest, PaperFaithfulPrefix) {
    auto p = params::generate(Mode::PaperFaithful, 2);
    EXPECT_EQ(p.m(1), 247);
    EXPECT_EQ(p.m(2), 61010);
    EXPECT_EQ(p.ell(1), 8);
    EXPECT_EQ(p.ell(2), 16);
    EXPECT_EQ(p.f(1), 1);
    EXPECT_EQ(p.n(0), 0);
    EXPECT_EQ(p.n(1), 17);
    // 247^6 < 61010^3 <= 247^7, so f_2 = 6 * n_1; frozen regression value.
    EXPECT_EQ(p.f(2), 102);
    EXPECT_EQ(p.n(2), 16 * 103 + 1);
    EXPECT_TRUE(params::validate(p).all_pass()) << params::validate(p).str();
}

TEST_F(ParamsTest, PaperFaithfulLengthOne) {
    auto p = params::generate(Mode::PaperFaithful, 1);
    EXPECT_EQ(p.f(1), 1);
    EXPECT_EQ(p.n(0), 0);
    EXPECT_EQ(p.length(), 1u);
}

TEST_F(ParamsTest, PaperFaithfulLongerAllPass) {
    auto p = params::generate(Mode::PaperFaithful, 5);
    auto r = params::validate(p);
    EXPECT_TRUE(r.all_pass()) << r.str();
    for (size_t j = 2; j <= 5; ++j) EXPECT_EQ(p.f(j), params::compute_f(j, p));
}

TEST_F(ParamsTest, ToyReportListsFailures) {
    Overrides o;
    o.m = {3, 10, 101};
    o.n = {0, 2, 5, 13};
    auto p = params::generate(Mode::Toy, 3, o);
    auto r = params::validate(p);
    EXPECT_FALSE(r.passes("m_1 > 246"));
    EXPECT_NE(r.str().find("m_1 > 246: FAIL(3)"), std::string::npos) << r.str();
    EXPECT_EQ(p.m(3), 101);
    EXPECT_EQ(p.n(3), 13);
}

TEST_F(ParamsTest, BoundaryNEqualsLF) {
    auto p = params::generate(Mode::PaperFaithful, 2);
    p.mode = Mode::Toy;
    p.n_[2] = p.ell(2) * (p.f(2) + 1);
    auto r = params::validate(p);
    EXPECT_FALSE(r.passes("l_2(f_2+1) < n_2"));
}

TEST_F(ParamsTest, ComputeFExamples) {
    Overrides o;
    o.m = {3, 10};
    o.n = {0, 2, 40};
    auto p = params::generate(Mode::Toy, 2, o);
    EXPECT_EQ(params::compute_f(2, p), 12);
    o.n = {0, 0, 40};
    auto q = params::generate(Mode::Toy, 2, o);
    EXPECT_EQ(params::compute_f(2, q), 0);
    EXPECT_THROW(params::compute_f(1, q), Error);
}

TEST_F(ParamsTest, ComputeFMatchesNaive) {
    for (size_t it = 0; it < kIterations; ++it) {
        size_t len = 2 + rng() % 3;
        std::vector<long> m, n{0};
        long cur = 1;
        for (size_t i = 0; i < len; ++i) {
            cur += 1 + static_cast<long>(rng() % 30);
            m.push_back(cur);
            n.push_back(static_cast<long>(rng() % 9));
        }
        if (m.back() > 100) continue;  // keeps m_j^3 <= 10^6
        Overrides o;
        for (auto v : m) o.m.push_back(v);
        for (auto v : n) o.n.push_back(v);
        auto p = params::generate(Mode::Toy, len, o);
        for (size_t j = 2; j <= len; ++j) ASSERT_EQ(params::compute_f(j, p), naive_f(m, n, j));
    }
}

TEST_F(ParamsTest, OverrideErrors) {
    Overrides bad;
    bad.m = {0, 5};
    EXPECT_THROW(params::generate(Mode::Toy, 2, bad), Error);
    Overrides len;
    len.m = {3, 10, 20};
    EXPECT_THROW(params::generate(Mode::Toy, 2, len), Error);
    Overrides weak;
    weak.m = {100, 20000};
    try {
        params::generate(Mode::PaperFaithful, 2, weak);
        FAIL() << "expected error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("m_1 > 246"), std::string::npos) << e.what();
    }
}

TEST_F(ParamsTest, Deterministic) {
    EXPECT_EQ(params::generate(Mode::PaperFaithful, 4), params::generate(Mode::PaperFaithful, 4));
    auto p = params::generate(Mode::PaperFaithful, 2);
    params::extend(p, 4);
    EXPECT_EQ(p, params::generate(Mode::PaperFaithful, 4));
}

TEST_F(ParamsTest, WeightLookup) {
    auto p = params::generate(Mode::PaperFaithful, 3);
    EXPECT_TRUE(p.is_even_weight(p.m(2)));
    EXPECT_TRUE(p.is_odd_weight(p.m(3)));
    EXPECT_FALSE(p.index_of_weight(Int(5)).has_value());
}

}  // namespace
}  // namespace hi
