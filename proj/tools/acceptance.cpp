// Prints one PASS/FAIL line per acceptance criterion.
// Exit status is 0 when every criterion passes, or when exactly the criteria named by
// --known-failures fail; 1 otherwise.

#include "hi/averages.hpp"
#include "hi/cli.hpp"
#include "hi/io.hpp"
#include "hi/normengine.hpp"
#include "hi/schreier.hpp"
#include "hi/treegen.hpp"
#include "hi/witness.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace hi;
namespace ne = hi::normengine;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome fail(const std::string& why) { return {false, why}; }

ParameterSystem small_params(const std::vector<long>& m, const std::vector<long>& n, const std::vector<long>& ell = {}) {
    Overrides o;
    for (std::size_t i = 0; i < m.size(); ++i) {
        o.m.push_back(Int(m[i]));
        o.ell.push_back(i < ell.size() ? Int(ell[i]) : params::minimal_ell(Int(m[i])));
    }
    for (long v : n) o.n.push_back(Int(v));
    return params::generate(Mode::Toy, m.size(), o);
}

std::string approx(const Rat& q) {
    std::ostringstream ss;
    ss << std::setprecision(6) << q.get_d();
    return ss.str();
}

// ---- 1 ----
Outcome schreier_oracle() {
    std::size_t sets = 0;
    auto all = oracle::subsets_of_range(11, 6);
    for (const auto& e : all)
        for (int xi = 0; xi <= 3; ++xi) {
            bool got = schreier::is_member(FinSet(e), xi);
            if (got != oracle::member(e, xi)) return fail("disagreement on " + FinSet(e).str() + " xi=" + std::to_string(xi));
            ++sets;
            if (!got) continue;
            // Hereditary.
            for (std::uint32_t mask = 0; mask < (1u << e.size()); ++mask) {
                std::vector<std::int64_t> g;
                for (std::size_t i = 0; i < e.size(); ++i)
                    if (mask >> i & 1) g.push_back(e[i]);
                if (!schreier::is_member(FinSet(g), xi)) return fail("not hereditary at " + FinSet(e).str());
            }
        }
    std::mt19937_64 rng(11);
    for (int it = 0; it < 2000; ++it) {
        // Spreading.
        auto p = oracle::random_set(rng, 1, 12, 1 + rng() % 6);
        int xi = static_cast<int>(rng() % 4);
        if (schreier::is_member(FinSet(p), xi)) {
            std::vector<std::int64_t> q;
            std::int64_t floor = 0;
            for (auto v : p) {
                floor = std::max(floor + 1, v + static_cast<std::int64_t>(rng() % 4));
                q.push_back(floor);
            }
            if (!schreier::is_member(FinSet(q), xi)) return fail("not spreading at " + FinSet(p).str());
        }
        // Convolution: S_b-admissible unions of S_a sets lie in S_{a+b}.
        int a = static_cast<int>(rng() % 3), b = static_cast<int>(rng() % (5 - a));
        std::vector<FinSet> blocks;
        std::int64_t next = 1 + static_cast<std::int64_t>(rng() % 4);
        while (next <= 12 && blocks.size() < 4) {
            std::vector<std::int64_t> blk;
            std::size_t len = 1 + rng() % 3;
            for (std::size_t k = 0; k < len && next <= 12; ++k) blk.push_back(next++);
            next += static_cast<std::int64_t>(rng() % 2);
            blocks.emplace_back(blk);
        }
        bool each = true;
        std::vector<std::int64_t> mins, all_pts;
        for (auto& blk : blocks) {
            each = each && schreier::is_member(blk, a);
            mins.push_back(blk.min());
            all_pts.insert(all_pts.end(), blk.begin(), blk.end());
        }
        if (each && schreier::is_member(FinSet(mins), b) && !schreier::is_member(FinSet(all_pts), a + b))
            return fail("convolution fails at " + FinSet(all_pts).str());
    }
    return {true, std::to_string(sets) + " (set, xi) pairs match the partition oracle; property suites hold"};
}

// ---- 2 ----
Outcome averages_exact() {
    std::mt19937_64 rng(0xa5e);
    std::size_t checked = 0;
    for (std::size_t it = 0; checked < 100 && it < 10000; ++it) {
        int xi = static_cast<int>(rng() % 4);
        std::int64_t start = 1 + static_cast<std::int64_t>(rng() % (xi == 3 ? 2 : 6));
        std::int64_t step = 1 + static_cast<std::int64_t>(rng() % 2);
        auto m = IndexStream::arithmetic(start, step);
        std::size_t count = xi == 3 ? 1 : 1 + rng() % 3;
        std::vector<SparseVector> v;
        try {
            v = averages::build_basic(xi, m, count);
        } catch (const Error&) {
            continue;
        }
        for (const auto& a : v) {
            Rat sum = 0;
            for (const auto& [k, c] : a.coords()) sum += c;
            if (sum != 1) return fail("coordinate sum " + rat_str(sum));
            if (SqrtVector::from_squares(a).l2_squared() != 1) return fail("squared average mass differs from 1");
        }
        ++checked;
    }
    if (checked < 100) return fail("only " + std::to_string(checked) + " averages generated");
    std::size_t eps_checks = 0;
    for (int xi = 1; xi <= 3; ++xi)
        for (Rat eps : {Rat(1, 2), Rat(1, 10)}) {
            std::int64_t n = averages::eps_threshold(xi, eps);
            for (std::int64_t start : {n, n + 1, 2 * n})
                for (std::int64_t step : {1, 2, 5}) {
                    auto chk = averages::check_eps(xi, IndexStream::arithmetic(start, step), eps);
                    if (!chk.ok) return fail("eps check fails at xi=" + std::to_string(xi) + " eps=" + rat_str(eps));
                    ++eps_checks;
                }
        }
    return {true, "100 averages exact; " + std::to_string(eps_checks) + " eps instances hold"};
}

// ---- 3 ----
Outcome upper_l2() {
    auto p = small_params({2, 3, 4, 5, 6, 7}, {0, 1, 3, 1, 2, 2, 1});
    std::mt19937_64 rng(31);
    for (int it = 0; it < 500; ++it) {
        std::size_t n = 1 + rng() % 5;
        std::int64_t pos = 1;
        std::vector<SqrtVector> blocks;
        std::vector<Rat> a;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = treegen::random_vector(rng, pos, pos + 3, 4);
            if (x.is_zero()) x = SparseVector::unit(pos);
            pos = x.max_support() + 1;
            blocks.push_back(SqrtVector::from_rational(x));
            a.push_back(frac(static_cast<long>(rng() % 13) - 6, 1 + static_cast<long>(rng() % 3)));
        }
        auto r = ne::check_upper_l2(blocks, a, p);
        if (!r.pass) return fail("instance " + std::to_string(it) + ": " + r.str());
    }
    return {true, "500 combinations: |sum a_i x_i|^2 <= 3 sum a_i^2 exactly"};
}

// ---- 4 ----
Outcome asymptotic() {
    auto p = small_params({2, 3, 4, 5, 6, 7}, {0, 1, 3, 1, 2, 2, 1});
    SigmaRegistry reg(p);
    std::mt19937_64 rng(41);
    static const std::vector<std::vector<long>> tuples{{1}, {3, 4}, {2, 3, 6}, {2, 4, 5, 6}};
    for (int it = 0; it < 100; ++it) {
        std::size_t n = 1 + rng() % 4;
        std::int64_t pos = static_cast<std::int64_t>(n + rng() % 3);
        std::vector<SparseVector> blocks;
        std::vector<Rat> a;
        long scale = 1 + static_cast<long>(rng() % 5);
        for (std::size_t i = 0; i < n; ++i) {
            auto x = treegen::random_vector(rng, pos, pos + 4, 4);
            if (x.is_zero()) x = SparseVector::unit(pos);
            pos = x.max_support() + 1;
            blocks.push_back(x);
            long c = tuples[n - 1][i] * scale;
            a.push_back(frac(rng() % 2 ? c : -c, 1));
        }
        auto r = ne::check_asymptotic(blocks, a, p, reg);
        if (!r.exact) return fail("instance " + std::to_string(it) + " not exact");
        if (!r.pass()) return fail("instance " + std::to_string(it) + ": " + r.lower.str() + " / " + r.upper.str());
        if (!trees::validate(r.functional, p, reg).ok()) return fail("functional invalid");
    }
    return {true, "100 families: explicit functional gives (1/m_2)|a| exactly; upper bound holds"};
}

// ---- 5 ----
Outcome dual_bound() {
    auto p = treegen::linear_params(64);
    std::mt19937_64 rng(51);
    for (int it = 0; it < 1000; ++it) {
        SigmaRegistry reg(p);
        auto t = treegen::random_tree(rng, 1 + static_cast<std::int64_t>(rng() % 3), reg);
        auto rep = trees::validate(t, p, reg);
        if (!rep.ok()) return fail("generated tree invalid: " + rep.str());
        auto x = treegen::random_vector(rng, 1, t.iset.max() + 2);
        Rat v = trees::eval(t, x);
        if (v * v > x.l2_squared()) return fail("eval^2 exceeds l2^2 at instance " + std::to_string(it));
    }
    return {true, "1000 (tree, vector) pairs"};
}

// ---- 6 ----
Outcome decomposition() {
    auto p = treegen::linear_params(64);
    treegen::Options opt;
    opt.max_depth = 4;
    std::mt19937_64 rng(61);
    for (int it = 0; it < 100; ++it) {
        SigmaRegistry reg(p);
        auto t = treegen::random_tree(rng, 2, reg, opt);
        std::size_t wi = t.terminal() ? 1 : *p.index_of_weight(t.weight) + 1;
        std::size_t j = wi + static_cast<std::size_t>(rng() % 4);
        auto d = trees::decompose(t, j, p);
        for (const auto& c : d.checks)
            if (!c.pass) return fail("instance " + std::to_string(it) + ": " + c.name + " " + c.detail);
        SparseVector sum;
        for (const auto& term : d.terms) sum = sum + term.functional.scaled(term.lambda);
        if (sum != trees::functional(t)) return fail("reconstruction differs at instance " + std::to_string(it));
    }
    return {true, "100 trees decomposed; reconstruction and all four bounds hold"};
}

// ---- 7 ----
Outcome restriction() {
    auto p = treegen::linear_params(64);
    std::mt19937_64 rng(71);
    int negated = 0;
    for (int it = 0; it < 200; ++it) {
        SigmaRegistry reg(p);
        auto t = treegen::random_tree(rng, 2, reg);
        auto f = trees::functional(t);
        auto x = treegen::random_vector(rng, 1, t.iset.max() + 2);
        std::int64_t lo = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(t.iset.max() + 1));
        Interval iv{lo, lo + static_cast<std::int64_t>(rng() % 12)};
        auto r = trees::restrict(t, iv);
        if (r ? trees::functional(*r) != f.restrict(iv) : !f.restrict(iv).is_zero())
            return fail("restriction identity fails at instance " + std::to_string(it));
        // A terminal root contributes gamma^2, so negation acts on node trees only.
        if (t.terminal()) continue;
        ++negated;
        if (trees::eval(trees::negate(t), x) != -trees::eval(t, x))
            return fail("negation identity fails at instance " + std::to_string(it));
    }
    return {true, "200 (tree, interval, vector) triples; negation on " + std::to_string(negated) + " node trees"};
}

// ---- 8 ----
Outcome smoothing() {
    // m_2 = 3, l_2 = 2 so 2^l_2 > m_2.
    auto p = small_params({2, 3, 4, 5}, {0, 0, 3, 1, 3}, {1, 2, 2, 3});
    if (!(Int(1) << 2 > p.m(2))) return fail("parameters do not satisfy 2^l_2 > m_2");
    SigmaRegistry reg(p);
    int rounds = static_cast<int>(p.ell(2).get_si());
    int level = static_cast<int>(p.f(2).get_si()) + 1;
    std::vector<std::vector<SqrtVector>> families(2);
    for (std::int64_t k = 1; k <= 200; ++k) families[0].push_back(SqrtVector::from_rational(SparseVector::unit(k)));
    for (std::int64_t k = 1; k <= 200; ++k)
        families[1].push_back(SqrtVector::from_rational(SparseVector{{k, Rat(k % 2 ? -1 : 1)}}));
    std::string detail;
    for (const auto& blocks : families) {
        auto res = averages::smooth_normalize_search(blocks, frac(1, 2), level, rounds, ne::make_oracle(p));
        if (!res.success) return fail("search failed: " + (res.transcript.empty() ? std::string() : res.transcript.back()));
        if (res.round > rounds) return fail("search used more than l_2 rounds");
        auto t = trees::from_json(nlohmann::json::parse(res.certificate));
        if (!trees::validate(t, p, reg).ok()) return fail("certificate tree invalid");
        auto iv = trees::eval_bounds(t, res.raw, 96);
        if (iv.first * 2 < 1) return fail("certificate below 1/2");
        detail += (detail.empty() ? "" : "; ") + std::string("round ") + std::to_string(res.round) + " of " +
                  std::to_string(rounds) + ", certified >= " + approx(iv.first);
    }
    return {true, detail};
}

// ---- 9 ----
Outcome pair_identity() {
    std::string detail;
    for (bool paper : {false, true}) {
        auto p = paper ? witness::paper_params() : witness::toy_params();
        SigmaRegistry reg(p);
        auto b = paper ? witness::paper_fixture(p, reg) : witness::toy_fixture(p, reg);
        auto r = witness::hi_pair(b, p, reg);
        if (!r.identity || !r.functional_valid) return fail(std::string(paper ? "paper" : "toy") + " identity fails");
        if (r.identity_value != r.expected || r.beta_sum != 1) return fail("value differs from 1/m_{2j+1}");
        detail += std::string(detail.empty() ? "" : "; ") + (paper ? "paper_faithful" : "toy") + ": " +
                  rat_str(r.identity_value);
    }
    return {true, detail};
}

// ---- 10 ----
Outcome separation() {
    auto p = witness::toy_params();
    SigmaRegistry reg(p);
    auto b = witness::toy_fixture(p, reg);
    auto r = witness::hi_pair(b, p, reg);
    std::ostringstream d;
    d << "exhaustive=" << (r.exhaustive ? "yes" : "no") << " plain^2 in [" << rat_str(r.plain.lower_sq) << ", "
      << rat_str(r.plain.upper_sq) << "] alternating^2 in [" << rat_str(r.alternating.lower_sq) << ", "
      << rat_str(r.alternating.upper_sq) << "] ratio ~" << std::setprecision(6) << std::sqrt(r.ratio_sq.get_d())
      << " vs target 517/m_3 = " << approx(Rat(517) / Rat(p.m(3)));
    return {r.exhaustive && r.separation, d.str()};
}

// ---- 11 ----
Outcome estimates_rule() {
    std::map<std::string, int> paper_pass;
    std::size_t positives = 0, negatives = 0, inconclusive = 0;
    for (bool paper : {false, true}) {
        auto p = paper ? witness::paper_params() : witness::toy_params();
        SigmaRegistry reg(p);
        auto b = paper ? witness::paper_fixture(p, reg) : witness::toy_fixture(p, reg);
        for (const auto& e : estimates::standard_instances(b, p, reg)) {
            auto r = estimates::validate(e.estimate, e.instance, b, p, reg);
            std::string where = e.estimate + " / " + e.instance.name + (paper ? " (paper_faithful)" : " (toy)");
            if (e.negative) {
                ++negatives;
                if (r.verdict != Verdict::Invalid) return fail("negative not detected: " + where);
                continue;
            }
            ++positives;
            if (r.verdict == Verdict::Pass) {
                if (paper) ++paper_pass[e.estimate];
                continue;
            }
            if (r.verdict != Verdict::Inconclusive) return fail(verdict_name(r.verdict) + ": " + where);
            ++inconclusive;
            bool named = false, z_bound = false;
            for (const auto& h : r.hypotheses)
                if (h.regime && !h.holds) {
                    named = true;
                    z_bound = z_bound || h.name == "|z_i| <= 2";
                }
            if (!named) return fail("inconclusive without a named hypothesis: " + where);
            if (paper && !z_bound) return fail("paper_faithful inconclusive not due to the z bound: " + where);
        }
    }
    for (const auto& n : estimates::names())
        if (paper_pass[n] == 0) return fail("no paper_faithful PASS for " + n);
    return {true, std::to_string(positives) + " positive instances (" + std::to_string(inconclusive) +
                      " inconclusive with named regime hypothesis), " + std::to_string(negatives) +
                      " negatives INVALID"};
}

// ---- 12 ----
Outcome replay() {
    auto dir = fs::temp_directory_path() / ("hi-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto path = [&](const std::string& n) { return (dir / n).string(); };
    auto run = [](const std::vector<std::string>& a) {
        std::ostringstream o, e;
        return cli::run(a, o, e);
    };
    io::write_text(path("toy.json"), io::dump(io::params_to_json(witness::toy_params())));
    io::write_text(path("x.json"), io::dump(io::vector_to_json(SparseVector{{2, frac(3, 4)}, {3, frac(-1, 3)}, {6, 1}})));
    run({"registry", "init", path("reg.jsonl")});
    std::vector<std::vector<std::string>> cmds{
        {"params", "generate", "--preset", "paper", "-o", path("paper.json")},
        {"witness", "build", "--params", path("toy.json"), "--registry", path("reg.jsonl"), "--fixture", "toy", "-o",
         path("bundle.json")},
        {"norm", path("x.json"), "--params", path("toy.json"), "--registry", path("reg.jsonl"), "-o", path("cert.json")},
        {"verify", path("bundle.json"), "--params", path("toy.json"), "--registry", path("reg.jsonl")},
        {"pair", path("bundle.json"), "--params", path("toy.json"), "--registry", path("reg.jsonl")},
        {"suite", "--seed", "5", "--count", "4"},
        {"schreier", "{3,4,5}", "1", "--maximal"}};
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        auto c = cmds[i];
        c.insert(c.begin(), {"--manifest", path("m" + std::to_string(i) + ".json")});
        run(c);
    }
    // Later mutations of the registry must not affect replays.
    run({"registry", "init", path("reg.jsonl"), "--force"});
    std::size_t ok = 0;
    std::string bad;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (run({"replay", path("m" + std::to_string(i) + ".json")}) == 0)
            ++ok;
        else
            bad += " " + cmds[i][0];
    }
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (ok != cmds.size()) return fail("replay differs for:" + bad);
    return {true, std::to_string(ok) + " manifests replayed byte-identically after the registry was reset"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance report"};
    std::vector<int> known;
    app.add_option("--known-failures", known, "criteria expected to fail")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    struct Criterion {
        int id;
        std::string title;
        std::function<Outcome()> fn;
    };
    std::vector<Criterion> all{
        {1, "Schreier oracle equivalence and property suites", schreier_oracle},
        {2, "hierarchy averages exactness and eps instances", averages_exact},
        {3, "upper l2 estimate with constant sqrt(3)", upper_l2},
        {4, "asymptotic l2 lower bound with constant 1/m_2", asymptotic},
        {5, "universal dual bound eval^2 <= |x|_2^2", dual_bound},
        {6, "tree decomposition bounds", decomposition},
        {7, "restriction and negation identities", restriction},
        {8, "smoothing search within l_j rounds", smoothing},
        {9, "HI pair exact identity 1/m_{2j+1}", pair_identity},
        {10, "HI pair strict separation in the toy fixture", separation},
        {11, "estimate validators", estimates_rule},
        {12, "manifest replay determinism", replay},
    };
    std::set<int> failed;
    for (const auto& c : all) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) failed.insert(c.id);
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << std::setw(2) << c.id << "  " << c.title << " ["
                  << std::fixed << std::setprecision(1) << secs << " s] " << o.detail << std::endl;
    }
    std::set<int> expected(known.begin(), known.end());
    return failed == expected ? 0 : 1;
}
