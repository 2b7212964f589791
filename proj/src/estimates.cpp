#include "hi/schreier.hpp"
#include "hi/witness.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace hi {

using nlohmann::json;

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
        case Verdict::Invalid: return "INVALID";
    }
    return "?";
}

json EstimateResult::to_json() const {
    json hs = json::array();
    for (const auto& h : hypotheses)
        hs.push_back({{"name", h.name}, {"holds", h.holds}, {"regime", h.regime}, {"detail", h.detail}});
    json ps = json::array();
    for (const auto& q : parts)
        ps.push_back({{"name", q.name},
                      {"lhs", {rat_str(q.lhs_lo), rat_str(q.lhs_hi)}},
                      {"rhs", {rat_str(q.rhs_lo), rat_str(q.rhs_hi)}},
                      {"holds", q.holds},
                      {"detail", q.detail}});
    return {{"estimate", estimate}, {"instance", instance}, {"verdict", verdict_name(verdict)},
            {"hypotheses", hs},     {"parts", ps},          {"detail", detail}};
}

json EstimateInstance::to_json() const {
    json j{{"name", name}, {"j0", j0}, {"family", family}};
    if (functional) j["functional"] = trees::to_json(*functional);
    j["members"] = json::array();
    for (const auto& m : members) j["members"].push_back(trees::to_json(m));
    j["coeffs"] = json::array();
    for (const auto& c : coeffs) j["coeffs"].push_back(rat_str(c));
    if (range) j["range"] = {range->first, range->second};
    return j;
}

EstimateInstance EstimateInstance::from_json(const json& j) {
    EstimateInstance e;
    try {
        e.name = j.at("name").get<std::string>();
        e.j0 = j.value("j0", std::size_t{0});
        if (j.contains("family")) e.family = j.at("family").get<std::vector<std::size_t>>();
        if (j.contains("functional")) e.functional = trees::from_json(j.at("functional"));
        if (j.contains("members"))
            for (const auto& m : j.at("members")) e.members.push_back(trees::from_json(m));
        if (j.contains("coeffs"))
            for (const auto& c : j.at("coeffs")) e.coeffs.push_back(parse_rat(c.get<std::string>()));
        if (j.contains("range")) {
            auto r = j.at("range").get<std::vector<std::size_t>>();
            if (r.size() != 2) throw Error("range needs two entries");
            e.range = std::make_pair(r[0], r[1]);
        }
    } catch (const json::exception& ex) {
        throw Error(std::string("malformed estimate instance: ") + ex.what());
    }
    return e;
}

namespace estimates {

namespace {

using IndexSet = std::vector<std::size_t>;  // sorted 1-based chain indices

struct Ctx {
    const WitnessBundle& b;
    const ParameterSystem& p;
    const SigmaRegistry& reg;
    std::size_t P;
    Rat m;  // m_{2j+1}
    std::vector<Rat> beta, alpha;
};

Ctx make_ctx(const WitnessBundle& b, const ParameterSystem& p, const SigmaRegistry& reg) {
    Ctx c{b, p, reg, b.xstars.size(), Rat(p.m(2 * b.j + 1)), {}, {}};
    for (std::size_t i = 0; i < c.P; ++i) {
        Rat r;
        if (!exact_sqrt(b.beta_sq[i], r)) throw Error("bundle coefficients are not rational squares");
        c.beta.push_back(r);
        c.alpha.push_back(i % 2 == 0 ? Rat(-r) : r);
    }
    return c;
}

Interval range_of(const NormingTree& t) { return {t.iset.min(), t.iset.max()}; }
Interval range_of(const SparseVector& x) { return x.range(); }
Interval range_of(const SqrtVector& x) { return x.range(); }

bool overlap(const Interval& a, const Interval& b) { return a.lo <= b.hi && b.lo <= a.hi; }

NormingTree unit(NormingTree t) {
    t.gamma = 1;
    return t;
}

// Sum over S of alpha_i z_i.
SparseVector combo(const Ctx& c, const IndexSet& s) {
    SparseVector out;
    for (auto i : s) out = out + c.b.zs[i - 1].scaled(c.alpha[i - 1]);
    return out;
}

Rat alpha_sq_meeting(const Ctx& c, const IndexSet& s, const Interval& r) {
    Rat acc = 0;
    for (auto i : s)
        if (overlap(r, range_of(c.b.zs[i - 1]))) acc += c.alpha[i - 1] * c.alpha[i - 1];
    return acc;
}

IndexSet all_indices(std::size_t P) {
    IndexSet s;
    for (std::size_t i = 1; i <= P; ++i) s.push_back(i);
    return s;
}

std::string set_str(const IndexSet& s) {
    std::string out = "{";
    for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "," : "") + std::to_string(s[k]);
    return out + "}";
}

std::pair<Rat, Rat> root_bounds(const Rat& sq) { return sqrt_bounds(sq, 96); }

// |lhs| against sqrt(rhs_sq).
EstimatePart part_sq(std::string name, const Rat& lhs, const Rat& rhs_sq, bool strict, std::string detail = {}) {
    EstimatePart q;
    q.name = std::move(name);
    q.lhs_lo = q.lhs_hi = abs(lhs);
    auto rb = root_bounds(rhs_sq);
    q.rhs_lo = rb.first;
    q.rhs_hi = rb.second;
    Rat l2 = q.lhs_hi * q.lhs_hi;
    q.holds = strict ? (l2 < rhs_sq || (l2 == 0 && rhs_sq == 0)) : l2 <= rhs_sq;
    q.detail = std::move(detail);
    return q;
}

// Enclosed left side against a right side given by an enclosure.
EstimatePart part_iv(std::string name, const std::pair<Rat, Rat>& lhs, const std::pair<Rat, Rat>& rhs, bool strict,
                     std::string detail = {}) {
    EstimatePart q;
    q.name = std::move(name);
    q.lhs_lo = lhs.first;
    q.lhs_hi = lhs.second;
    q.rhs_lo = rhs.first;
    q.rhs_hi = rhs.second;
    bool zero = lhs.first == 0 && lhs.second == 0 && rhs.first == 0 && rhs.second == 0;
    q.holds = zero || (strict ? lhs.second < rhs.first : lhs.second <= rhs.first);
    if (!q.holds && !(strict ? lhs.first >= rhs.second : lhs.first > rhs.second)) detail += " (undecided at precision)";
    q.detail = std::move(detail);
    return q;
}

std::pair<Rat, Rat> abs_iv(const std::pair<Rat, Rat>& v) {
    if (v.first >= 0) return v;
    if (v.second <= 0) return {-v.second, -v.first};
    return {Rat(0), std::max(Rat(-v.first), v.second)};
}

void hyp(EstimateResult& r, std::string name, bool holds, bool regime, std::string detail = {}) {
    r.hypotheses.push_back({std::move(name), holds, regime, std::move(detail)});
}

void finalize(EstimateResult& r) {
    bool statement_ok = true, regime_ok = true, parts_ok = true;
    std::vector<std::string> named;
    for (const auto& h : r.hypotheses) {
        if (h.holds) continue;
        if (h.regime) {
            regime_ok = false;
            named.push_back(h.name);
        } else {
            statement_ok = false;
        }
    }
    for (const auto& q : r.parts) parts_ok = parts_ok && q.holds;
    if (!statement_ok) {
        r.verdict = Verdict::Invalid;
        r.parts.clear();
    } else if (parts_ok) {
        r.verdict = Verdict::Pass;
    } else if (!regime_ok) {
        r.verdict = Verdict::Inconclusive;
        std::string s;
        for (const auto& n : named) s += (s.empty() ? "" : "; ") + n;
        r.detail = "violated regime hypotheses: " + s;
    } else {
        r.verdict = Verdict::Fail;
    }
}

bool valid_tree(const Ctx& c, const NormingTree& t, std::string* why = nullptr) {
    auto rep = trees::validate(t, c.p, c.reg);
    if (!rep.ok() && why) *why = rep.str();
    return rep.ok();
}

std::set<Int> chain_weights(const Ctx& c, const IndexSet& s) {
    std::set<Int> w;
    for (auto i : s) w.insert(c.b.xstars[i - 1].weight);
    return w;
}

std::optional<std::size_t> chain_position(const Ctx& c, const Int& w) {
    for (std::size_t i = 0; i < c.P; ++i)
        if (c.b.xstars[i].weight == w) return i + 1;
    return std::nullopt;
}

bool z_bounded(const Ctx& c) {
    for (const auto& z : c.b.zs)
        if (z.l2_squared() > 4) return false;
    return true;
}

// Hypotheses on the chain under which the estimates are stated.
void chain_regime(EstimateResult& r, const Ctx& c) {
    hyp(r, "chain vectors are normalized squared averages (condition (a))", c.b.origin == "build_chain", true,
        c.b.origin);
    hyp(r, "m_1 > 246", c.p.m(1) > 246, true, "m_1 = " + int_str(c.p.m(1)));
    hyp(r, "|z_i| <= 2", z_bounded(c), true, "checked through the l2 norm");
}

IndexSet family_or_all(const Ctx& c, const EstimateInstance& inst, EstimateResult& r) {
    IndexSet v = inst.family.empty() ? all_indices(c.P) : inst.family;
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    bool ok = std::all_of(v.begin(), v.end(), [&](std::size_t i) { return i >= 1 && i <= c.P; });
    hyp(r, "index set inside {1..p}", ok, false, set_str(v));
    if (!ok) v.clear();
    return v;
}

// ---- the three-interval construction for odd functionals ----

struct Split {
    std::vector<IndexSet> sets;  // J_1 < J_2 < J_3, possibly empty
    IndexSet rest;               // Q minus the union
    std::string detail;
};

Split odd_split_sets(const Ctx& c, const NormingTree& x, const IndexSet& q) {
    Split s;
    s.sets.assign(3, {});
    const auto& w = *x.witness;
    std::size_t d = static_cast<std::size_t>(w.k) + 1;
    std::set<Int> kid_weights;
    for (const auto& ch : x.children) kid_weights.insert(ch.weight);
    std::size_t k0 = 0;
    for (std::size_t k = 1; k <= c.P; ++k)
        if (kid_weights.count(c.b.xstars[k - 1].weight)) k0 = k;
    if (k0 == 0) {
        s.detail = "k0=0";
    } else if (k0 == 1) {
        s.sets[0] = {1};
        s.detail = "k0=1";
    } else if (c.b.xstars[k0 - 1].weight == w.extension.front().weight) {
        s.sets[0] = {k0};
        s.detail = "k0=" + std::to_string(k0) + " matches the head";
    } else {
        if (d <= k0) s.sets[0] = {d};
        if (d < k0) {
            for (std::size_t i = d + 1; i < k0; ++i) s.sets[1].push_back(i);
            s.sets[2] = {k0};
        }
        s.detail = "k0=" + std::to_string(k0) + " d=" + std::to_string(d);
    }
    std::set<std::size_t> qs(q.begin(), q.end()), used;
    for (auto& js : s.sets) {
        IndexSet kept;
        for (auto i : js)
            if (qs.count(i)) kept.push_back(i);
        js = kept;
        used.insert(js.begin(), js.end());
    }
    for (auto i : q)
        if (!used.count(i)) s.rest.push_back(i);
    return s;
}

// Parts (1)-(3) of the split for an odd functional x over Q; per-interval constant 2.
void odd_split_parts(EstimateResult& r, const Ctx& c, const NormingTree& x, const Split& s, const IndexSet& q) {
    for (std::size_t m = 0; m < 3; ++m) {
        if (s.sets[m].empty()) continue;
        Rat lhs = trees::eval(x, combo(c, s.sets[m]));
        Rat rhs = 2 * c.beta[s.sets[m].front() - 1];
        r.parts.push_back(part_sq("(1) J_" + std::to_string(m + 1) + "=" + set_str(s.sets[m]), lhs, rhs * rhs, false));
    }
    std::set<Int> kid;
    for (const auto& ch : x.children) kid.insert(ch.weight);
    bool disjoint = true;
    for (auto i : s.rest)
        if (kid.count(c.b.xstars[i - 1].weight)) disjoint = false;
    EstimatePart p2;
    p2.name = "(2) child weights avoid the chain weights of Q minus the union";
    p2.holds = disjoint;
    p2.detail = "rest " + set_str(s.rest);
    r.parts.push_back(p2);
    Rat lhs = trees::eval(x, combo(c, s.rest));
    Rat rhs = 2 / (c.m * c.m);
    r.parts.push_back(part_sq("(3) remainder", lhs, rhs * rhs, false, "Q=" + set_str(q)));
}

// ---- union of a singleton and three S_f sets ----

bool singleton_plus_three(const std::vector<std::int64_t>& pts, int f) {
    const std::size_t n = pts.size();
    if (n == 0) return true;
    if (n > 12) return false;
    std::vector<int> colour(n, 0);
    std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
        if (i == n) {
            int singles = 0;
            std::vector<std::vector<std::int64_t>> parts(3);
            for (std::size_t k = 0; k < n; ++k) {
                if (colour[k] == 3)
                    ++singles;
                else
                    parts[colour[k]].push_back(pts[k]);
            }
            if (singles > 1) return false;
            for (auto& pp : parts)
                if (!schreier::is_member(FinSet::from_unsorted(pp), f)) return false;
            return true;
        }
        for (int col = 0; col < 4; ++col) {
            colour[i] = col;
            if (rec(i + 1)) return true;
        }
        return false;
    };
    return rec(0);
}

// ---- individual estimates ----

using Validator = std::function<void(EstimateResult&, const Ctx&, const EstimateInstance&)>;

const NormingTree* need_functional(EstimateResult& r, const EstimateInstance& inst) {
    hyp(r, "instance supplies a functional", inst.functional.has_value(), false);
    return inst.functional ? &*inst.functional : nullptr;
}

void big_weight(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    const NormingTree* x = need_functional(r, inst);
    IndexSet v = family_or_all(c, inst, r);
    chain_regime(r, c);
    std::size_t odd = 2 * c.b.j + 1;
    bool sq_gap = true;
    for (std::size_t i = odd + 1; i <= c.p.length(); ++i)
        if (c.p.m(i) < c.p.m(odd) * c.p.m(odd)) sq_gap = false;
    hyp(r, "m_{2j+1}^2 <= m_i for i > 2j+1", sq_gap, true);
    if (!x) return;
    std::string why;
    hyp(r, "functional is a valid tree", valid_tree(c, *x, &why), false, why);
    hyp(r, "w(x*) > m_{2j+1}", Rat(x->weight) > c.m, false, "w=" + int_str(x->weight));
    hyp(r, "w(x*) avoids the chain weights of V", !chain_weights(c, v).count(x->weight), false);
    Rat lhs = trees::eval(*x, combo(c, v));
    Rat k = Rat(496) / (c.m * c.m);
    r.parts.push_back(part_sq("bound 496/m^2", lhs, k * k * alpha_sq_meeting(c, v, range_of(*x)), true,
                              "V=" + set_str(v)));
}

void odd_disjoint(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    const NormingTree* x = need_functional(r, inst);
    IndexSet v = family_or_all(c, inst, r);
    chain_regime(r, c);
    hyp(r, "m_{2j+1} >= 496", c.m >= 496, true);
    if (!x) return;
    std::string why;
    hyp(r, "functional is a valid tree", valid_tree(c, *x, &why), false, why);
    hyp(r, "w(x*) = m_{2j+1}", Rat(x->weight) == c.m, false, "w=" + int_str(x->weight));
    std::set<Int> kid;
    for (const auto& ch : x->children) kid.insert(ch.weight);
    bool clash = false;
    for (auto i : v)
        if (kid.count(c.b.xstars[i - 1].weight)) clash = true;
    hyp(r, "V avoids the child weights", !clash, false);
    Rat lhs = trees::eval(*x, combo(c, v));
    Rat k = Rat(2) / (c.m * c.m);
    r.parts.push_back(part_sq("bound 2/m^2", lhs, k * k * alpha_sq_meeting(c, v, range_of(*x)), true,
                              "V=" + set_str(v)));
}

void odd_split(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    const NormingTree* x = need_functional(r, inst);
    chain_regime(r, c);
    hyp(r, "m_{2j+1} >= 496", c.m >= 496, true);
    IndexSet q = all_indices(c.P);
    if (inst.range) {
        auto [lo, hi] = *inst.range;
        // lo = hi + 1 is the empty interval.
        bool ok = lo >= 1 && lo <= hi + 1 && hi <= c.P;
        hyp(r, "Q is an interval inside {1..p}", ok, false);
        q.clear();
        if (ok)
            for (std::size_t i = lo; i <= hi; ++i) q.push_back(i);
    }
    if (!x) return;
    std::string why;
    hyp(r, "functional is a valid tree", valid_tree(c, *x, &why), false, why);
    hyp(r, "w(x*) = m_{2j+1}", Rat(x->weight) == c.m && x->witness, false, "w=" + int_str(x->weight));
    if (Rat(x->weight) != c.m || !x->witness) return;
    auto s = odd_split_sets(c, *x, q);
    r.detail = s.detail;
    odd_split_parts(r, c, *x, s, q);
}

void combined(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    IndexSet v = family_or_all(c, inst, r);
    chain_regime(r, c);
    hyp(r, "m_{2j+1} >= 496", c.m >= 496, true);
    bool sizes = inst.members.size() == inst.coeffs.size();
    hyp(r, "one coefficient per member", sizes, false);
    if (!sizes) return;
    Rat lsq = 0;
    for (const auto& l : inst.coeffs) lsq += l * l;
    hyp(r, "sum lambda^2 <= 1", lsq <= 1, false, rat_str(lsq));
    Rat asq = 0;
    for (auto i : v) asq += c.alpha[i - 1] * c.alpha[i - 1];
    hyp(r, "sum alpha^2 <= 1", asq <= 1, false, rat_str(asq));
    auto vw = chain_weights(c, v);
    bool kinds = true, e_ok = true, b_ok = true, valid = true;
    std::string why;
    for (const auto& y : inst.members) {
        if (!valid_tree(c, unit(y), &why)) valid = false;
        if (Rat(y.weight) == c.m) {
            for (const auto& ch : y.children)
                if (vw.count(ch.weight)) e_ok = false;
        } else if (Rat(y.weight) > c.m) {
            if (vw.count(y.weight)) b_ok = false;
        } else {
            kinds = false;
        }
    }
    hyp(r, "members are valid trees", valid, false, why);
    hyp(r, "members have weight >= m_{2j+1}", kinds, false);
    hyp(r, "(1) odd members avoid the chain weights of V", e_ok, false);
    hyp(r, "(2) heavy members avoid the chain weights of V", b_ok, false);
    bool unique = true;
    for (auto i : v) {
        int hits = 0;
        for (const auto& y : inst.members)
            if (overlap(range_of(y), range_of(c.b.zs[i - 1]))) ++hits;
        if (hits != 1) unique = false;
    }
    hyp(r, "(3) each i in V meets exactly one member", unique, false);
    SparseVector zsum = combo(c, v);
    Rat lhs = 0;
    for (std::size_t l = 0; l < inst.members.size(); ++l) lhs += inst.coeffs[l] * trees::eval(unit(inst.members[l]), zsum);
    Rat k = Rat(498) / (c.m * c.m);
    r.parts.push_back(part_sq("bound 498/m^2", lhs, k * k, false, "V=" + set_str(v)));
}

void separation(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    const NormingTree* x = need_functional(r, inst);
    chain_regime(r, c);
    hyp(r, "m_{2j+1} >= 496", c.m >= 496, true);
    if (!x) return;
    std::string why;
    hyp(r, "functional is a valid tree", valid_tree(c, *x, &why), false, why);
    if (!why.empty()) return;
    const std::size_t odd = 2 * c.b.j + 1;
    IndexSet all = all_indices(c.P);
    std::vector<IndexSet> js;
    std::vector<Rat> bs;
    std::string mode;
    Rat wx = Rat(x->weight);
    if (!x->terminal() && wx > c.m) {
        mode = "w > m";
        if (auto q = chain_position(c, x->weight)) {
            js.push_back({*q});
            bs.push_back(2);
        }
    } else if (!x->terminal() && wx == c.m) {
        mode = "w = m";
        auto s = odd_split_sets(c, *x, all);
        for (auto& j : s.sets)
            if (!j.empty()) {
                js.push_back(j);
                bs.push_back(2);
            }
    } else {
        mode = "w < m";
        auto dec = trees::decompose(*x, odd, c.p);
        std::vector<Interval> ranges;
        for (const auto& t : dec.terms) ranges.push_back(t.functional.range());
        IndexSet q1;
        for (auto i : all) {
            int hits = 0;
            for (const auto& rg : ranges)
                if (overlap(rg, range_of(c.b.zs[i - 1]))) ++hits;
            if (hits == 1) q1.push_back(i);
        }
        for (std::size_t a = 0; a < dec.terms.size(); ++a) {
            const auto& t = dec.terms[a];
            if (t.cls != 2) continue;
            NormingTree y = unit(trees::subtree(*x, t.path));
            Rat lam = abs(t.lambda);
            if (Rat(y.weight) > c.m) {
                auto q = chain_position(c, y.weight);
                if (q && overlap(ranges[a], range_of(c.b.zs[*q - 1]))) {
                    js.push_back({*q});
                    bs.push_back(2 * lam);
                }
            } else if (y.witness) {
                IndexSet ql;
                for (auto i : q1)
                    if (overlap(ranges[a], range_of(c.b.zs[i - 1]))) ql.push_back(i);
                auto s = odd_split_sets(c, y, ql);
                for (auto& j : s.sets)
                    if (!j.empty()) {
                        js.push_back(j);
                        bs.push_back(2 * lam);
                    }
            }
        }
    }
    // Order the sets and require J_1 < ... < J_s.
    std::vector<std::size_t> order(js.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b2) { return js[a].front() < js[b2].front(); });
    std::vector<IndexSet> sj;
    std::vector<Rat> sb;
    for (auto k : order) {
        sj.push_back(js[k]);
        sb.push_back(bs[k]);
    }
    bool succ = true;
    std::set<std::size_t> used;
    for (std::size_t k = 0; k < sj.size(); ++k) {
        if (k > 0 && sj[k - 1].back() >= sj[k].front()) succ = false;
        used.insert(sj[k].begin(), sj[k].end());
    }
    r.detail = mode + ", s=" + std::to_string(sj.size());
    EstimatePart ps;
    ps.name = "J_1 < ... < J_s";
    ps.holds = succ;
    r.parts.push_back(ps);
    std::vector<std::int64_t> mins;
    for (const auto& j : sj) mins.push_back(c.b.t[j.front() - 1]);
    int f = schreier::clamp_index(c.p.f(odd));
    EstimatePart p1;
    p1.name = "(1) minima in S_0 + 3 S_f";
    p1.holds = singleton_plus_three(mins, f);
    p1.detail = "f=" + std::to_string(f) + " minima " + FinSet::from_unsorted(mins).str();
    r.parts.push_back(p1);
    Rat bsq = 0;
    for (std::size_t k = 0; k < sj.size(); ++k) {
        Rat lhs = trees::eval(*x, combo(c, sj[k]));
        Rat rhs = c.beta[sj[k].front() - 1] * sb[k];
        r.parts.push_back(part_sq("(2) J=" + set_str(sj[k]), lhs, rhs * rhs, false, "b=" + rat_str(sb[k])));
        bsq += sb[k] * sb[k];
    }
    r.parts.push_back(part_sq("(2) sum b^2 <= 36", bsq, 36 * 36, false));
    r.parts.back().lhs_lo = r.parts.back().lhs_hi = bsq;
    r.parts.back().rhs_lo = r.parts.back().rhs_hi = 36;
    IndexSet rest;
    for (auto i : all)
        if (!used.count(i)) rest.push_back(i);
    Rat lhs = trees::eval(*x, combo(c, rest));
    Rat k = Rat(505) / (c.m * c.m);
    r.parts.push_back(part_sq("(3) remainder 505/m^2", lhs, k * k, false, "rest " + set_str(rest)));
}

// ---- section three estimates on the chain vectors ----

// Vectors y_k: the bundle averages when present, else the chain vectors g_i.
std::vector<SqrtVector> averages_of(const Ctx& c, bool& are_averages, std::vector<std::size_t>& index) {
    std::vector<SqrtVector> out;
    are_averages = !c.b.ys.empty();
    index.clear();
    if (are_averages) {
        for (const auto& y : c.b.ys) {
            out.push_back(y.y);
            index.push_back(2 * y.index);
        }
    } else {
        for (std::size_t i = 0; i < c.P; ++i) {
            out.push_back(SqrtVector::from_rational(c.b.gs[i]));
            index.push_back(c.p.index_of_weight(c.b.xstars[i].weight).value_or(0));
        }
    }
    return out;
}

void averages_regime(EstimateResult& r, const Ctx& c, bool are_averages) {
    bool eps_ok = are_averages;
    for (const auto& y : c.b.ys)
        if (!(y.eps * Rat(c.p.m(2 * y.index)) < 1)) eps_ok = false;
    hyp(r, "vectors are smoothly normalized averages with eps_k < 1/m_{2j_k}", eps_ok, true,
        are_averages ? "bundle averages" : "chain vectors used");
}

SqrtVector weighted(const std::vector<SqrtVector>& ys, const std::vector<Rat>& coef) {
    SqrtVector out;
    for (std::size_t k = 0; k < ys.size(); ++k) {
        SqrtVector y = ys[k].scaled_by_root(coef[k] * coef[k]);
        out = out.disjoint_sum(coef[k] < 0 ? y.negated() : y);
    }
    return out;
}

std::pair<Rat, Rat> eval_sum(const std::vector<NormingTree>& members, const std::vector<Rat>& gam, const SqrtVector& y) {
    Rat lo = 0, hi = 0;
    for (std::size_t l = 0; l < members.size(); ++l) {
        auto iv = trees::eval_bounds(unit(members[l]), y, 96);
        if (gam[l] >= 0) {
            lo += gam[l] * iv.first;
            hi += gam[l] * iv.second;
        } else {
            lo += gam[l] * iv.second;
            hi += gam[l] * iv.first;
        }
    }
    return {lo, hi};
}

// Smallest xi with the member minima in S_xi, capped at cap.
int admissibility_index(const std::vector<NormingTree>& members, int cap) {
    std::vector<std::int64_t> mins;
    for (const auto& m : members) mins.push_back(m.iset.min());
    // Membership is monotone in xi and settles by xi = |mins|.
    const int top = std::min<int>(cap, static_cast<int>(mins.size()) + 1);
    for (int xi = 0; xi <= top; ++xi)
        if (schreier::mins_admissible(mins, xi)) return xi;
    return cap + 1;
}

bool members_successive(const std::vector<NormingTree>& members) {
    for (std::size_t l = 1; l < members.size(); ++l)
        if (members[l - 1].iset.max() >= members[l].iset.min()) return false;
    return !members.empty();
}

void family_common(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    bool sizes = inst.members.size() == inst.coeffs.size() && !inst.members.empty();
    hyp(r, "one coefficient per member", sizes, false);
    hyp(r, "members successive", members_successive(inst.members), false);
    std::string why;
    bool valid = true;
    for (const auto& m : inst.members)
        if (!valid_tree(c, unit(m), &why)) valid = false;
    hyp(r, "members are valid trees", valid, false, why);
}

void family_small(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    family_common(r, c, inst);
    bool av;
    std::vector<std::size_t> idx;
    auto ys = averages_of(c, av, idx);
    averages_regime(r, c, av);
    std::size_t j0 = inst.j0 ? inst.j0 : 2 * c.b.j + 1;
    bool order = !idx.empty() && j0 < idx.front();
    for (std::size_t k = 1; k < idx.size(); ++k) order = order && idx[k - 1] < idx[k];
    hyp(r, "j0 < 2j_1 < 2j_2 < ...", order, false);
    int nj0 = schreier::clamp_index(c.p.n(j0));
    int xi = admissibility_index(inst.members, nj0);
    hyp(r, "family S_xi admissible with xi < n_{j0}", xi < nj0, false, "xi=" + std::to_string(xi));
    if (inst.members.size() != inst.coeffs.size()) return;
    std::vector<Rat> beta(ys.size(), Rat(1));
    for (std::size_t k = 0; k < ys.size() && k < c.beta.size() && !av; ++k) beta[k] = c.beta[k];
    Rat gsq = 0, bsq = 0;
    for (const auto& g : inst.coeffs) gsq += g * g;
    for (const auto& b : beta) bsq += b * b;
    auto lhs = abs_iv(eval_sum(inst.members, inst.coeffs, weighted(ys, beta)));
    auto rhs = root_bounds(484 * gsq * bsq);
    r.parts.push_back(part_iv("bound 22", lhs, rhs, false));
}

void weight_gap(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    const NormingTree* x = need_functional(r, inst);
    bool av;
    std::vector<std::size_t> idx;
    auto ys = averages_of(c, av, idx);
    averages_regime(r, c, av);
    std::size_t j0 = inst.j0 ? inst.j0 : 2 * c.b.j + 1;
    if (!x) return;
    std::string why;
    hyp(r, "functional is a valid tree", valid_tree(c, *x, &why), false, why);
    Rat w(x->weight), mj0(c.p.m(j0));
    bool in_range = !idx.empty() && w >= mj0 && w < Rat(c.p.m(idx.front())) && j0 < idx.front();
    hyp(r, "m_{j0} <= w(x*) < m_{j1}", in_range, false, "w=" + int_str(x->weight));
    std::vector<Rat> beta(ys.size(), Rat(1));
    for (std::size_t k = 0; k < ys.size() && k < c.beta.size() && !av; ++k) beta[k] = c.beta[k];
    Rat me = w == mj0 ? mj0 : mj0 * mj0;
    Rat meet = 0;
    for (std::size_t k = 0; k < ys.size(); ++k)
        if (overlap(range_of(*x), range_of(ys[k]))) meet += beta[k] * beta[k];
    auto lhs = trees::eval_bounds(*x, weighted(ys, beta), 96);
    auto rhs = root_bounds(25 * meet / (me * me));
    // Signed left side, strict.
    r.parts.push_back(part_iv("bound 5/m_e", lhs, rhs, true, "m_e=" + rat_str(me)));
}

// The chain vector g_i selected by the instance (first family entry, default 1) and its index j0.
bool pick_g(EstimateResult& r, const Ctx& c, const EstimateInstance& inst, SqrtVector& g, std::size_t& j0) {
    std::size_t i = inst.family.empty() ? 1 : inst.family.front();
    bool ok = i >= 1 && i <= c.P;
    hyp(r, "chain index in range", ok, false);
    if (!ok) return false;
    g = SqrtVector::from_rational(c.b.gs[i - 1]);
    j0 = c.p.index_of_weight(c.b.xstars[i - 1].weight).value_or(0);
    hyp(r, "g is a normalized (1/m_{j0}^2, n_{j0}) squared average", c.b.origin == "build_chain", true, c.b.origin);
    hyp(r, "m_1 > 246", c.p.m(1) > 246, true, "m_1 = " + int_str(c.p.m(1)));
    return true;
}

void two_term(EstimateResult& r, const Ctx& c, const EstimateInstance& inst, const SqrtVector& g, std::size_t j0,
              const Rat& heavy_const, bool mixed) {
    Rat mj0(c.p.m(j0));
    Rat me = mj0;
    for (const auto& m : inst.members) me = std::min(me, Rat(m.weight));
    Rat s_eq = 0, s_ne = 0;
    for (std::size_t l = 0; l < inst.members.size(); ++l) {
        if (!overlap(range_of(inst.members[l]), range_of(g))) continue;
        Rat g2 = inst.coeffs[l] * inst.coeffs[l];
        if (Rat(inst.members[l].weight) == mj0)
            s_eq += g2;
        else
            s_ne += g2;
    }
    Rat k = mixed ? Rat(123) / me : heavy_const / mj0;
    auto a = root_bounds(k * k * s_ne);
    auto b = root_bounds(36 * s_eq);
    auto lhs = eval_sum(inst.members, inst.coeffs, g);
    r.parts.push_back(part_iv(mixed ? "bound 123/m_e + 6" : "bound 47/m_{j0} + 6", lhs,
                              {a.first + b.first, a.second + b.second}, true, "m_e=" + rat_str(me)));
}

void heavy_family(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    family_common(r, c, inst);
    SqrtVector g;
    std::size_t j0 = 0;
    if (!pick_g(r, c, inst, g, j0)) return;
    int nj0 = schreier::clamp_index(c.p.n(j0));
    int xi = admissibility_index(inst.members, nj0);
    hyp(r, "family S_xi admissible with xi < n_{j0}", xi < nj0, false, "xi=" + std::to_string(xi));
    bool heavy = std::all_of(inst.members.begin(), inst.members.end(),
                             [&](const NormingTree& m) { return !m.terminal() && m.weight >= c.p.m(j0); });
    hyp(r, "w(x*_l) >= m_{j0}", heavy, false);
    if (inst.members.size() != inst.coeffs.size()) return;
    two_term(r, c, inst, g, j0, 47, false);
}

void mixed_family(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    family_common(r, c, inst);
    SqrtVector g;
    std::size_t j0 = 0;
    if (!pick_g(r, c, inst, g, j0)) return;
    bool adm = false;
    std::string which;
    for (std::size_t i = 0; i < j0 && !adm; ++i) {
        int n = schreier::clamp_index(c.p.n(i));
        if (admissibility_index(inst.members, n) <= n) {
            adm = true;
            which = "i=" + std::to_string(i);
        }
    }
    hyp(r, "family S_{n_i} admissible for some i < j0", adm, false, which);
    bool weighted_members = std::all_of(inst.members.begin(), inst.members.end(),
                                        [](const NormingTree& m) { return !m.terminal(); });
    hyp(r, "members carry weights", weighted_members, false);
    if (inst.members.size() != inst.coeffs.size() || !weighted_members) return;
    two_term(r, c, inst, g, j0, 0, true);
}

void norming_weight(EstimateResult& r, const Ctx& c, const EstimateInstance& inst) {
    const NormingTree* x = need_functional(r, inst);
    SqrtVector g;
    std::size_t j0 = 0;
    if (!pick_g(r, c, inst, g, j0) || !x) return;
    std::string why;
    hyp(r, "functional is a valid tree", valid_tree(c, *x, &why), false, why);
    hyp(r, "w(x*) != m_{j0}", !x->terminal() && x->weight != c.p.m(j0), false, "w=" + int_str(x->weight));
    if (x->terminal()) return;
    Rat me = std::min(Rat(c.p.m(j0)), Rat(x->weight));
    auto lhs = trees::eval_bounds(*x, g, 96);
    Rat k = Rat(123) / me;
    r.parts.push_back(part_iv("x*(g) < 123/m_e", lhs, {k, k}, true, "m_e=" + rat_str(me)));
    r.parts.push_back(part_iv("x*(g) <= 1/2", lhs, {frac(1, 2), frac(1, 2)}, false));
}

const std::map<std::string, Validator>& table() {
    static const std::map<std::string, Validator> t{
        {"family_small", family_small}, {"weight_gap", weight_gap},       {"heavy_family", heavy_family},
        {"mixed_family", mixed_family}, {"norming_weight", norming_weight}, {"big_weight", big_weight},
        {"odd_disjoint", odd_disjoint}, {"odd_split", odd_split},         {"combined", combined},
        {"separation", separation}};
    return t;
}

}  // namespace

const std::vector<std::string>& names() {
    static const std::vector<std::string> n{"family_small", "weight_gap", "heavy_family", "mixed_family",
                                            "norming_weight", "big_weight", "odd_disjoint", "odd_split",
                                            "combined",      "separation"};
    return n;
}

EstimateResult validate(const std::string& estimate, const EstimateInstance& inst, const WitnessBundle& b,
                        const ParameterSystem& p, const SigmaRegistry& reg) {
    auto it = table().find(estimate);
    if (it == table().end()) throw Error("unknown estimate " + estimate);
    if (b.xstars.empty() || b.zs.size() != b.xstars.size() || b.beta_sq.size() != b.xstars.size())
        throw Error("malformed instance: bundle without a chain");
    EstimateResult r;
    r.estimate = estimate;
    r.instance = inst.name;
    Ctx c = make_ctx(b, p, reg);
    it->second(r, c, inst);
    finalize(r);
    return r;
}

std::vector<SuiteEntry> standard_instances(const WitnessBundle& b, const ParameterSystem& p, SigmaRegistry& reg) {
    (void)reg;
    const std::size_t P = b.xstars.size();
    const std::size_t odd = 2 * b.j + 1;
    std::size_t top = 0;
    for (const auto& x : b.xstars) top = std::max(top, p.index_of_weight(x.weight).value_or(0));
    if (top + 2 > p.length()) throw Error("parameter system too short for the standard instances");
    Int big = p.m(top + 2);
    const std::int64_t t1 = b.t.front();
    auto leafnode = [](const Int& w, std::int64_t k) { return NormingTree::node(w, 1, {NormingTree::leaf(k, 1)}); };
    NormingTree f_big = leafnode(big, t1);
    // Odd functional on a foreign one-member chain.
    NormingTree f_foreign = NormingTree::node(p.m(odd), 1, {leafnode(big, t1)});
    {
        auto w = std::make_shared<DependentWitness>();
        w->extension = {leafnode(big, t1)};
        f_foreign.witness = std::move(w);
    }
    NormingTree f_small = NormingTree::node(p.m(2), 1, {NormingTree::leaf(t1, 1)});
    NormingTree f_leaf = NormingTree::leaf(t1, 1);

    std::vector<SuiteEntry> out;
    auto add = [&](std::string est, EstimateInstance inst, bool negative = false) {
        out.push_back({std::move(est), std::move(inst), negative});
    };
    auto single = [](std::string name, NormingTree t) {
        EstimateInstance e;
        e.name = std::move(name);
        e.functional = std::move(t);
        return e;
    };

    add("big_weight", single("heavy leaf functional", f_big));
    add("odd_disjoint", single("odd functional on a foreign chain", f_foreign));
    {
        // Odd functional whose single heavy child is aligned with sum alpha_i z_i.
        std::vector<NormingTree> leaves;
        bool rational = true;
        for (std::size_t i = 0; i < P && rational; ++i) {
            Rat norm, beta;
            rational = exact_sqrt(b.zs[i].l2_squared(), norm) && exact_sqrt(b.beta_sq[i], beta);
            Rat sign = i % 2 == 0 ? Rat(-1) : Rat(1);
            for (const auto& [k, v] : b.zs[i].coords()) leaves.push_back(NormingTree::leaf(k, sign * beta * v / norm));
        }
        std::vector<std::int64_t> mins;
        for (const auto& l : leaves) mins.push_back(l.iset.min());
        std::size_t e = top + 2;
        while (rational && e <= p.length() && !schreier::mins_admissible(mins, p.schreier_n(e))) e += 2;
        if (rational && e <= p.length()) {
            NormingTree child = NormingTree::node(p.m(e), 1, leaves);
            NormingTree f = NormingTree::node(p.m(odd), 1, {child});
            auto w = std::make_shared<DependentWitness>();
            w->extension = {child};
            f.witness = std::move(w);
            add("odd_disjoint", single("odd functional with an aligned heavy child", f));
        }
    }
    add("odd_split", single("lower functional", b.lower_functional));
    {
        auto e = single("lower functional on the empty interval", b.lower_functional);
        e.range = std::make_pair(std::size_t{1}, std::size_t{0});
        add("odd_split", e);
    }
    add("odd_split", single("odd functional on a foreign chain", f_foreign));
    {
        auto e = single("lower functional on Q={1}", b.lower_functional);
        e.range = std::make_pair(std::size_t{1}, std::size_t{1});
        add("odd_split", e);
    }
    {
        EstimateInstance e;
        e.name = "odd and heavy members";
        e.members = {f_foreign, leafnode(big, P >= 2 ? b.t[1] : b.zs.back().max_support() + 1)};
        e.coeffs = {frac(3, 5), frac(4, 5)};
        e.family = P >= 2 ? std::vector<std::size_t>{1, 2} : std::vector<std::size_t>{1};
        add("combined", e);
    }
    add("separation", single("lower functional", b.lower_functional));
    add("separation", single("heavy leaf functional", f_big));
    add("separation", single("first chain functional", b.xstars.front()));
    add("separation", single("light functional", f_small));
    {
        NormingTree head = b.xstars.front();
        head.gamma = 1;
        add("separation", single("light functional over the chain head", NormingTree::node(p.m(2), 1, {head})));
    }
    add("separation", single("coordinate functional", f_leaf));
    if (P >= 3) {
        // Odd functional using the chain after its first member.
        std::vector<NormingTree> kids;
        for (std::size_t i = 1; i < P; ++i) {
            NormingTree k = b.xstars[i];
            k.gamma = frac(1, 2);
            kids.push_back(std::move(k));
        }
        NormingTree tail = NormingTree::node(p.m(odd), 1, std::move(kids));
        auto w = std::make_shared<DependentWitness>();
        w->k = 1;
        w->L = b.t[1];
        w->extension = b.xstars;
        tail.witness = std::move(w);
        add("odd_split", single("odd functional on the chain tail", tail));
        add("separation", single("odd functional on the chain tail", tail));
    }
    // Section three estimates on the chain vectors.
    add("norming_weight", single("heavy leaf functional", f_big));
    {
        auto e = single("lower functional", b.lower_functional);
        add("weight_gap", e);
    }
    {
        EstimateInstance e;
        e.name = "first chain functional";
        e.members = {b.xstars.front()};
        e.coeffs = {1};
        add("family_small", e);
    }
    {
        EstimateInstance e;
        const std::int64_t next = b.zs.front().max_support() + 1;
        if (schreier::mins_admissible({b.xstars.front().iset.min(), next}, 1)) {
            e.name = "chain functional and heavy leaf";
            e.members = {b.xstars.front(), leafnode(big, next)};
            e.coeffs = {frac(3, 5), frac(4, 5)};
        } else {
            e.name = "chain functional";
            e.members = {b.xstars.front()};
            e.coeffs = {1};
        }
        add("heavy_family", e);
        add("mixed_family", e);
    }

    // Negative instances: one broken hypothesis each.
    add("big_weight", single("weight equals a chain weight", leafnode(b.xstars.front().weight, t1)), true);
    add("odd_disjoint", single("children share the chain weights", b.lower_functional), true);
    add("odd_split", single("even functional", f_big), true);
    {
        EstimateInstance e;
        e.name = "coefficients with sum of squares above one";
        e.members = {f_foreign};
        e.coeffs = {Rat(2)};
        e.family = {1};
        add("combined", e, true);
    }
    add("separation",
        single("invalid tree", NormingTree::node(p.m(2), 1, {NormingTree::leaf(t1, 1), NormingTree::leaf(t1 + 1, 1)})),
        true);
    add("norming_weight", single("weight equals the average weight", b.xstars.front()), true);
    add("weight_gap", single("weight above the first average weight", f_big), true);
    {
        EstimateInstance e;
        e.name = "member below the average weight";
        e.members = {f_small};
        e.coeffs = {1};
        add("heavy_family", e, true);
    }
    {
        EstimateInstance e;
        e.name = "reference index above the average indices";
        e.members = {b.xstars.front()};
        e.coeffs = {1};
        e.j0 = top;
        add("family_small", e, true);
    }
    {
        EstimateInstance e;
        e.name = "family not admissible below the reference level";
        e.members = {leafnode(big, 1), leafnode(big, 2)};
        e.coeffs = {frac(3, 5), frac(4, 5)};
        add("mixed_family", e, true);
    }
    return out;
}

}  // namespace estimates

}  // namespace hi
