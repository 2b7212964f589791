#include "hi/io.hpp"
#include "hi/normengine.hpp"
#include "hi/schreier.hpp"
#include "hi/witness.hpp"

#include <gtest/gtest.h>

using namespace hi;
namespace ne = hi::normengine;

namespace {

ParameterSystem small_params() {
    // m_2 = 3 with 2^ell_2 > m_2; n_1 = 0 forces f_2 = 0 so the averages live at level 1.
    Overrides o;
    for (long m : {2, 3, 4, 5}) o.m.push_back(Int(m));
    for (long l : {1, 2, 2, 3}) o.ell.push_back(Int(l));
    for (long n : {0, 0, 3, 1, 3}) o.n.push_back(Int(n));
    return params::generate(Mode::Toy, 4, o);
}

std::vector<SqrtVector> units(std::int64_t from, std::int64_t to, std::int64_t step) {
    std::vector<SqrtVector> out;
    for (std::int64_t k = from; k <= to; k += step) out.push_back(SqrtVector::from_rational(SparseVector::unit(k)));
    return out;
}

bool check_named(const WitnessBundle& b, const ParameterSystem& p, const SigmaRegistry& reg, const std::string& name) {
    for (const auto& c : witness::check_bundle(b, p, reg))
        if (c.name == name) return c.pass;
    ADD_FAILURE() << "no check named " << name;
    return false;
}

}  // namespace

TEST(ToyFixture, AllInvariantsHold) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    EXPECT_TRUE(b.all_pass());
    for (const auto& c : b.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.detail;
    ASSERT_EQ(b.xstars.size(), 4u);
    // Chain weights follow sigma on linear parameters: m_4, m_6, m_8, m_10.
    std::vector<Int> expect{Int(5), Int(7), Int(9), Int(11)};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(b.xstars[i].weight, expect[i]);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(trees::eval(b.xstars[i], b.zs[i]), 1);
    EXPECT_EQ(b.t, (std::vector<std::int64_t>{4, 6, 8, 10}));
    // The maximal S_1 set starting at 4 has four points, so each squared coefficient is 1/4.
    ASSERT_EQ(p.schreier_n(3), 1);
    for (const auto& bs : b.beta_sq) EXPECT_EQ(bs, frac(1, 4));
    EXPECT_TRUE(schreier::is_maximal(FinSet(b.t), 1));
}

TEST(ToyFixture, LowerFunctionalIdentity) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    Rat m(p.m(3));
    Rat sum = 0;
    for (const auto& bs : b.beta_sq) sum += bs;
    EXPECT_EQ(sum, 1);
    // Direct expansion: (1/m) sum_k beta_k x*_k(sum_i beta_i z_i) with successive supports.
    Rat direct = 0;
    for (std::size_t k = 0; k < b.xstars.size(); ++k) {
        Rat bk;
        ASSERT_TRUE(exact_sqrt(b.beta_sq[k], bk));
        direct += bk * trees::eval(b.xstars[k], b.plain);
    }
    direct /= m;
    EXPECT_EQ(direct, 1 / m);
    EXPECT_EQ(trees::eval(b.lower_functional, b.plain), 1 / m);
    EXPECT_TRUE(trees::validate(b.lower_functional, p, reg).ok());
}

TEST(PaperFixture, IdentityUnderPaperParameters) {
    auto p = witness::paper_params();
    SigmaRegistry reg(p);
    auto b = witness::paper_fixture(p, reg);
    EXPECT_TRUE(b.all_pass());
    EXPECT_TRUE(params::validate(p).all_pass());
    auto r = witness::hi_pair(b, p, reg);
    EXPECT_TRUE(r.identity);
    EXPECT_EQ(r.identity_value, Rat(1) / Rat(p.m(3)));
    EXPECT_EQ(r.beta_sum, 1);
}

TEST(HiPair, ToyReport) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    auto r = witness::hi_pair(b, p, reg);
    EXPECT_TRUE(r.identity);
    EXPECT_TRUE(r.functional_valid);
    EXPECT_EQ(r.identity_value, frac(1, 4));
    EXPECT_TRUE(r.exhaustive);
    EXPECT_TRUE(r.sign_symmetric);
    EXPECT_EQ(r.target_sq, Rat(517 * 517) / Rat(16));
    EXPECT_LE(r.tree_lo * r.tree_lo, r.plain.upper_sq);
    EXPECT_EQ(r.separation, r.alternating.upper_sq < r.plain.lower_sq);
    EXPECT_EQ(r.ratio_sq, r.plain.lower_sq / r.alternating.upper_sq);
    auto j = r.to_json();
    EXPECT_TRUE(j.contains("ratio_sq"));
    EXPECT_TRUE(j.contains("target_sq"));
}

TEST(HiPair, RejectsInvalidLowerFunctional) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    b.lower_functional.children.pop_back();
    EXPECT_THROW(witness::hi_pair(b, p, reg), Error);
}

TEST(Bundle, JsonRoundTripIsExact) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    std::string first = io::dump(b.to_json());
    auto back = WitnessBundle::from_json(nlohmann::json::parse(first));
    EXPECT_EQ(io::dump(back.to_json()), first);
    for (const auto& c : witness::check_bundle(back, p, reg)) EXPECT_TRUE(c.pass) << c.name;
}

TEST(Bundle, TamperingIsDetected) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    {
        auto t = b;
        t.plain.set(4, t.plain.get(4) + 1);
        EXPECT_FALSE(check_named(t, p, reg, "plain vector"));
    }
    {
        auto t = b;
        t.alternating = t.plain;
        EXPECT_FALSE(check_named(t, p, reg, "alternating vector"));
    }
    {
        auto t = b;
        t.registry_hash = "0000000000000000";
        EXPECT_FALSE(check_named(t, p, reg, "registry snapshot"));
    }
    {
        auto t = b;
        t.zs[1] = t.zs[1].scaled(2);
        EXPECT_FALSE(check_named(t, p, reg, "z_2 = g/x*(g)"));
    }
    {
        auto t = b;
        t.beta_sq[0] = frac(1, 2);
        EXPECT_FALSE(check_named(t, p, reg, "average coefficients"));
    }
    {
        // The registry no longer matches the chain weights.
        auto q = witness::toy_params();
        SigmaRegistry fresh(q);
        bool all = true;
        for (const auto& c : witness::check_bundle(b, q, fresh)) all = all && c.pass;
        EXPECT_FALSE(all);
    }
}

TEST(Bundle, MalformedJsonThrows) {
    EXPECT_THROW(WitnessBundle::from_json(nlohmann::json::parse(R"({"kind":"witness_bundle"})")), Error);
    EXPECT_THROW(WitnessBundle::from_json(nlohmann::json::parse(R"({"kind":"vector"})")), Error);
}

TEST(BuildYs, SmoothAveragesOnUnitBlocks) {
    auto p = small_params();
    witness::Options opt;
    opt.eps_override = frac(1, 2);
    auto ys = witness::build_ys(units(1, 400, 1), units(401, 800, 1), 1, p, opt);
    ASSERT_EQ(ys.size(), 1u);
    const auto& y = ys.front();
    EXPECT_EQ(y.side, Side::U);
    EXPECT_LE(y.round, schreier::clamp_index(p.ell(2)));
    EXPECT_GE(y.raw_norm_sq * 4, 1);
    EXPECT_GE(y.certified_lower * 2, 1);
    EXPECT_EQ(ne::norm_even_exact_sq(y.y, p, ne::EvenMode::Interval, 200), 1);
    for (const auto& [k, c] : y.y.coords()) EXPECT_LE(k, 400);
}

TEST(BuildYs, Errors) {
    auto p = small_params();
    EXPECT_THROW(witness::build_ys({}, units(2, 10, 2), 1, p), Error);
    EXPECT_THROW(witness::build_ys(units(1, 9, 2), units(2, 10, 2), 0, p), Error);
    EXPECT_THROW(witness::build_ys(units(1, 9, 2), units(2, 10, 2), 3, p), Error);
}

TEST(SelectSubsequence, ConditionsHoldOnTheChosenAverages) {
    auto p = witness::toy_params();
    std::vector<YAverage> ys;
    std::vector<Rat> eps{frac(1, 2), frac(1, 3), frac(1, 4), frac(1, 100), frac(1, 1000)};
    for (std::size_t i = 0; i < eps.size(); ++i) {
        YAverage y;
        y.index = i + 1;
        y.eps = eps[i];
        y.y = SqrtVector::from_rational(SparseVector::unit(static_cast<std::int64_t>(i + 1)));
        ys.push_back(y);
    }
    auto s = witness::select_subsequence(ys, p, 2);
    ASSERT_TRUE(s.ok);
    // Brute-force recheck of both conditions on the chosen positions.
    for (std::size_t a = 0; a < s.chosen.size(); ++a) {
        Rat tail = 0;
        for (std::size_t b = a + 1; b < s.chosen.size(); ++b) tail += ys[s.chosen[b]].eps * ys[s.chosen[b]].eps;
        EXPECT_LT(tail, ys[s.chosen[a]].eps * ys[s.chosen[a]].eps);
    }
    for (std::size_t a = 1; a < s.chosen.size(); ++a) {
        Rat sum = a;  // unit vectors have l1 norm 1
        Rat ratio = Rat(p.m(2 * ys[s.chosen[a]].index)) / Rat(p.m(2 * ys[s.chosen[a - 1]].index));
        EXPECT_LT(sum, ratio * ratio);
    }
    EXPECT_FALSE(witness::select_subsequence({}, p).ok);
    EXPECT_FALSE(witness::select_subsequence(ys, p, 10).ok);
}

TEST(BuildG, NormalizedInTheEvenNorm) {
    auto p = small_params();
    SigmaRegistry reg(p);
    std::vector<YAverage> ys;
    for (std::int64_t k : {2, 3}) {
        YAverage y;
        y.index = static_cast<std::size_t>(k - 1);
        y.eps = frac(1, 2);
        y.y = SqrtVector::from_rational(SparseVector::unit(k));
        ys.push_back(y);
    }
    // n_3 = 1: the maximal S_1 set at 2 takes both averages with squared coefficients 1/2.
    // The eps condition compares the largest squared coefficient 1/2 with eps^2.
    EXPECT_THROW(witness::build_g(ys, 3, p, reg), Error);
    witness::Options opt;
    opt.g_eps_override = frac(3, 4);
    auto g = witness::build_g(ys, 3, p, reg, opt);
    EXPECT_EQ(g.y.coords().at(2).square, frac(1, 2));
    EXPECT_EQ(g.y.coords().at(3).square, frac(1, 2));
    EXPECT_EQ(ne::norm_even_exact_sq(g.g, p, ne::EvenMode::Interval, 200), 1);
    EXPECT_EQ(g.y_norm_sq, ne::norm_even_exact_sq(g.y, p, ne::EvenMode::Interval, 200));
    EXPECT_TRUE(ne::verify_certificate(g.certificate, g.g, p, reg));
    EXPECT_EQ(g.certificate_weight, g.certificate.tree.weight);
    EXPECT_THROW(witness::build_g({}, 3, p, reg), Error);
    EXPECT_THROW(witness::build_g(ys, 99, p, reg), Error);
}

TEST(BuildChain, NamedFailures) {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    EXPECT_THROW(witness::build_chain(units(1, 9, 2), units(2, 10, 2), 1, p, reg, 1), Error);
    EXPECT_THROW(witness::build_chain({}, units(2, 10, 2), 1, p, reg, 2), Error);
    auto other = witness::toy_params();
    EXPECT_THROW(witness::build_chain(units(1, 9, 2), units(2, 10, 2), 1, other, reg, 2), Error);
    // Too few blocks for the first average: the failure names the stage.
    try {
        witness::build_chain(units(3, 9, 2), units(4, 10, 2), 1, p, reg, 2);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("g_1 could not be formed"), std::string::npos) << e.what();
    }
}
