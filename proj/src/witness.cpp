#include "hi/witness.hpp"

#include "hi/io.hpp"
#include "hi/schreier.hpp"
#include "hi/treegen.hpp"

#include <algorithm>

namespace hi {

using nlohmann::json;

namespace {

std::string side_name(Side s) { return s == Side::U ? "u" : "v"; }

Side parse_side(const std::string& s) {
    if (s == "u") return Side::U;
    if (s == "v") return Side::V;
    throw Error("unknown side " + s);
}

json rat_list(const std::vector<Rat>& xs) {
    json a = json::array();
    for (const auto& x : xs) a.push_back(rat_str(x));
    return a;
}

std::vector<Rat> rat_list_from(const json& a) {
    std::vector<Rat> out;
    for (const auto& e : a) out.push_back(parse_rat(e.get<std::string>()));
    return out;
}

// First basic average over r; a stream starting at 1 gives e_1 for every xi.
SparseVector first_basic(int xi, const IndexStream& r) {
    if (r.min() == 1) return SparseVector::unit(1);
    return averages::build_basic(xi, r, 1).front();
}

std::size_t even_index(const ParameterSystem& p, const Int& w) {
    auto idx = p.index_of_weight(w);
    if (!idx || *idx % 2 != 0) return 0;
    return *idx;
}

BundleCheck check(std::string name, bool pass, std::string detail = {}) {
    return {std::move(name), pass, std::move(detail)};
}

bool range_within(const FinSet& inner, const Interval& outer) {
    return !inner.empty() && outer.lo <= inner.min() && inner.max() <= outer.hi;
}

NormingTree lower_functional_of(std::size_t j, const std::vector<NormingTree>& xstars, const std::vector<Rat>& beta,
                                const ParameterSystem& p) {
    std::vector<NormingTree> kids;
    for (std::size_t i = 0; i < xstars.size(); ++i) {
        NormingTree c = xstars[i];
        c.gamma = beta[i];
        kids.push_back(std::move(c));
    }
    NormingTree t = NormingTree::node(p.m(2 * j + 1), 1, std::move(kids));
    auto w = std::make_shared<DependentWitness>();
    w->k = 0;
    w->L = 1;
    w->extension = xstars;
    t.witness = std::move(w);
    return t;
}

}  // namespace

// ---- bundle serialization ----

bool WitnessBundle::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BundleCheck& c) { return c.pass; });
}

json WitnessBundle::to_json() const {
    json j{{"schema_version", io::kSchemaVersion}, {"kind", "witness_bundle"}};
    j["j"] = this->j;
    j["origin"] = origin;
    json jy = json::array();
    for (const auto& y : ys)
        jy.push_back({{"index", y.index},
                      {"side", side_name(y.side)},
                      {"eps", rat_str(y.eps)},
                      {"xi", y.xi},
                      {"round", y.round},
                      {"y", io::sqrt_vector_to_json(y.y)},
                      {"raw_norm_sq", rat_str(y.raw_norm_sq)},
                      {"certified_lower", rat_str(y.certified_lower)},
                      {"certificate", y.certificate}});
    j["ys"] = jy;
    j["gs"] = json::array();
    for (const auto& g : gs) j["gs"].push_back(io::vector_to_json(g));
    j["xstars"] = json::array();
    for (const auto& x : xstars) j["xstars"].push_back(trees::to_json(x));
    j["zs"] = json::array();
    for (const auto& z : zs) j["zs"].push_back(io::vector_to_json(z));
    j["t"] = t;
    j["beta_sq"] = rat_list(beta_sq);
    j["plain"] = io::vector_to_json(plain);
    j["alternating"] = io::vector_to_json(alternating);
    j["lower_functional"] = trees::to_json(lower_functional);
    j["registry_hash"] = registry_hash;
    j["regime_notes"] = regime_notes;
    json jc = json::array();
    for (const auto& c : checks) jc.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["checks"] = jc;
    return j;
}

WitnessBundle WitnessBundle::from_json(const json& j) {
    io::require_kind(j, "witness_bundle");
    WitnessBundle b;
    try {
        b.j = j.at("j").get<std::size_t>();
        b.origin = j.at("origin").get<std::string>();
        for (const auto& y : j.at("ys")) {
            YAverage a;
            a.index = y.at("index").get<std::size_t>();
            a.side = parse_side(y.at("side").get<std::string>());
            a.eps = parse_rat(y.at("eps").get<std::string>());
            a.xi = y.at("xi").get<int>();
            a.round = y.at("round").get<int>();
            a.y = io::sqrt_vector_from_json(y.at("y"));
            a.raw_norm_sq = parse_rat(y.at("raw_norm_sq").get<std::string>());
            a.certified_lower = parse_rat(y.at("certified_lower").get<std::string>());
            a.certificate = y.at("certificate").get<std::string>();
            b.ys.push_back(std::move(a));
        }
        for (const auto& g : j.at("gs")) b.gs.push_back(io::vector_from_json(g));
        for (const auto& x : j.at("xstars")) b.xstars.push_back(trees::from_json(x));
        for (const auto& z : j.at("zs")) b.zs.push_back(io::vector_from_json(z));
        b.t = j.at("t").get<std::vector<std::int64_t>>();
        b.beta_sq = rat_list_from(j.at("beta_sq"));
        b.plain = io::vector_from_json(j.at("plain"));
        b.alternating = io::vector_from_json(j.at("alternating"));
        b.lower_functional = trees::from_json(j.at("lower_functional"));
        b.registry_hash = j.at("registry_hash").get<std::string>();
        b.regime_notes = j.at("regime_notes").get<std::vector<std::string>>();
        for (const auto& c : j.at("checks"))
            b.checks.push_back({c.at("name").get<std::string>(), c.at("pass").get<bool>(),
                                c.at("detail").get<std::string>()});
    } catch (const json::exception& e) {
        throw Error(std::string("malformed witness bundle: ") + e.what());
    }
    return b;
}

namespace witness {

// ---- averages ----

std::vector<YAverage> build_ys(const std::vector<SqrtVector>& u, const std::vector<SqrtVector>& v, std::size_t count,
                               const ParameterSystem& p, const Options& opt) {
    if (u.empty() || v.empty()) throw Error("build_ys: empty block input");
    if (count == 0) throw Error("build_ys: count must be positive");
    if (p.length() < 2 * count) throw Error("build_ys: parameter system shorter than 2*count");
    auto oracle = normengine::make_oracle(p, opt.budget);
    std::vector<YAverage> out;
    std::int64_t after = 0;
    for (std::size_t jj = 1; jj <= count; ++jj) {
        Side side = jj % 2 ? Side::U : Side::V;
        const auto& src = side == Side::U ? u : v;
        std::vector<SqrtVector> blocks;
        for (const auto& b : src)
            if (b.min_support() > after) blocks.push_back(b);
        if (blocks.empty()) throw Error("build_ys: " + side_name(side) + " blocks exhausted at y_" + std::to_string(jj));
        YAverage y;
        y.index = jj;
        y.side = side;
        y.eps = opt.eps_override ? *opt.eps_override : Rat(1) / Rat(p.m(2 * jj));
        y.xi = schreier::clamp_index(p.f(2 * jj) + 1);
        int rounds = schreier::clamp_index(p.ell(2 * jj));
        auto res = averages::smooth_normalize_search(blocks, y.eps, y.xi, rounds, oracle);
        if (!res.success)
            throw Error("build_ys: average search failed for y_" + std::to_string(jj) + ": " +
                        (res.transcript.empty() ? std::string("no transcript") : res.transcript.back()));
        y.round = res.round;
        y.y = res.normalized;
        y.raw_norm_sq = res.raw_norm_sq;
        y.certified_lower = res.certified_lower;
        y.certificate = res.certificate;
        after = y.y.max_support();
        out.push_back(std::move(y));
    }
    return out;
}

Selection select_subsequence(const std::vector<YAverage>& ys, const ParameterSystem& p, std::size_t want) {
    Selection s;
    if (ys.empty()) {
        s.log.push_back("no averages");
        return s;
    }
    auto l1_hi = [](const SqrtVector& y) {
        Rat acc = 0;
        for (const auto& [k, c] : y.coords()) acc += sqrt_bounds(c.square, 96).second;
        return acc;
    };
    std::vector<Rat> l1(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) l1[i] = l1_hi(ys[i].y);
    for (std::size_t c = 0; c < ys.size(); ++c) {
        std::vector<std::size_t> trial = s.chosen;
        trial.push_back(c);
        bool ok = true;
        std::string why;
        if (trial.size() >= 2) {
            Rat sum = 0;
            for (std::size_t i = 0; i + 1 < trial.size(); ++i) sum += l1[trial[i]] * l1[trial[i]];
            Rat ratio = Rat(p.m(2 * ys[c].index)) / Rat(p.m(2 * ys[trial[trial.size() - 2]].index));
            if (!(sum < ratio * ratio)) {
                ok = false;
                why = "l1 growth condition fails";
            }
        }
        for (std::size_t k = 0; ok && k < trial.size(); ++k) {
            Rat tail = 0;
            for (std::size_t i = k + 1; i < trial.size(); ++i) tail += ys[trial[i]].eps * ys[trial[i]].eps;
            if (!(tail < ys[trial[k]].eps * ys[trial[k]].eps)) {
                ok = false;
                why = "eps tail condition fails at position " + std::to_string(k + 1);
            }
        }
        if (ok) {
            s.chosen = std::move(trial);
            s.log.push_back("take y_" + std::to_string(ys[c].index));
        } else {
            s.log.push_back("skip y_" + std::to_string(ys[c].index) + ": " + why);
        }
    }
    s.ok = s.chosen.size() >= std::max<std::size_t>(want, 1);
    if (!s.ok) s.log.push_back("fewer than " + std::to_string(want) + " averages satisfy both conditions");
    return s;
}

GAverage build_g(const std::vector<YAverage>& ys, std::size_t j0, const ParameterSystem& p, const SigmaRegistry& reg,
                 const Options& opt) {
    if (ys.empty()) throw Error("build_g: no averages");
    if (j0 == 0 || j0 > p.length()) throw Error("build_g: index out of range");
    GAverage g;
    Rat m = Rat(p.m(j0));
    g.eps = opt.g_eps_override ? *opt.g_eps_override : Rat(1) / (m * m);
    int xi = schreier::clamp_index(p.n(j0));
    std::vector<SqrtVector> blocks;
    std::vector<std::int64_t> mins;
    for (const auto& y : ys) {
        blocks.push_back(y.y);
        mins.push_back(y.y.min_support());
    }
    // Leading averages are dropped until the eps condition holds on the remaining minima.
    std::size_t start = 0;
    for (; start < mins.size(); ++start) {
        std::vector<std::int64_t> tail(mins.begin() + static_cast<long>(start), mins.end());
        if (averages::check_eps(xi, IndexStream::explicit_list(tail), g.eps).ok) break;
    }
    if (start == mins.size()) throw Error("build_g: eps condition fails for every tail of the averages");
    std::vector<SqrtVector> use(blocks.begin() + static_cast<long>(start), blocks.end());
    std::vector<std::int64_t> r(mins.begin() + static_cast<long>(start), mins.end());
    try {
        g.y = averages::squared_average_of_blocks(use, g.eps, xi, IndexStream::explicit_list(r));
    } catch (const Error& e) {
        throw Error(std::string("build_g: not enough averages: ") + e.what());
    }
    g.y_norm_sq = normengine::norm_even_exact_sq(g.y, p, normengine::EvenMode::Interval, opt.budget);
    g.g = g.y.scaled_by_root(1 / g.y_norm_sq);
    g.meets_lower = g.y_norm_sq * m * m >= 1;
    g.certificate = normengine::norm_lower(g.g, p, reg, opt.budget);
    g.certificate_weight = g.certificate.tree.weight;
    return g;
}

WitnessBundle build_chain(const std::vector<SqrtVector>& u, const std::vector<SqrtVector>& v, std::size_t j,
                          ParameterSystem& p, SigmaRegistry& reg, std::size_t length, const Options& opt) {
    if (length < 2) throw Error("build_chain: length must be at least 2");
    if (u.empty() || v.empty()) throw Error("build_chain: empty block input");
    if (&reg.params() != &p) throw Error("build_chain: registry is bound to a different parameter system");
    std::vector<SparseVector> gs;
    std::vector<NormingTree> xs;
    std::vector<YAverage> all_ys;
    std::int64_t after = 0;
    std::size_t idx = 2 * j + 2;
    for (std::size_t i = 1; i <= length; ++i) {
        if (i >= 2) {
            Int w;
            try {
                w = trees::sigma_register(xs, reg);
            } catch (const Error& e) {
                throw Error(std::string("sigma conflict: ") + e.what());
            }
            std::size_t next = even_index(p, w);
            if (next == 0 || next <= idx)
                throw Error("sigma conflict: sigma of the first " + std::to_string(i - 1) + " functionals is " +
                            int_str(w) + ", not an even weight above the previous chain weight");
            idx = next;
        }
        const auto& src = i % 2 ? u : v;
        std::vector<SqrtVector> blocks;
        for (const auto& b : src)
            if (b.min_support() > after) blocks.push_back(b);
        if (blocks.empty()) throw Error("build_chain: blocks exhausted at g_" + std::to_string(i));
        // Averages y from this side, one per even index above idx, until g can be formed.
        std::vector<YAverage> ys;
        auto oracle = normengine::make_oracle(p, opt.budget);
        std::optional<GAverage> g;
        std::string last_error;
        std::int64_t y_after = after;
        for (std::size_t jj = idx / 2 + 1; jj <= idx / 2 + 16 && 2 * jj <= p.length(); ++jj) {
            std::vector<SqrtVector> bl;
            for (const auto& b : blocks)
                if (b.min_support() > y_after) bl.push_back(b);
            if (bl.empty()) break;
            YAverage y;
            y.index = jj;
            y.side = i % 2 ? Side::U : Side::V;
            y.eps = opt.eps_override ? *opt.eps_override : Rat(1) / Rat(p.m(2 * jj));
            y.xi = schreier::clamp_index(p.f(2 * jj) + 1);
            auto res = averages::smooth_normalize_search(bl, y.eps, y.xi, schreier::clamp_index(p.ell(2 * jj)), oracle);
            if (!res.success) {
                last_error = "average search failed for index " + std::to_string(2 * jj);
                if (!res.transcript.empty()) last_error += ": " + res.transcript.back();
                break;
            }
            y.round = res.round;
            y.y = res.normalized;
            y.raw_norm_sq = res.raw_norm_sq;
            y.certified_lower = res.certified_lower;
            y.certificate = res.certificate;
            y_after = y.y.max_support();
            ys.push_back(std::move(y));
            auto sel = select_subsequence(ys, p);
            std::vector<YAverage> chosen;
            for (auto c : sel.chosen) chosen.push_back(ys[c]);
            try {
                g = build_g(chosen, idx, p, reg, opt);
                break;
            } catch (const Error& e) {
                last_error = e.what();
            }
        }
        if (!g) throw Error("build_chain: g_" + std::to_string(i) + " could not be formed: " + last_error);
        const auto& cert = g->certificate;
        if (abs(cert.value) * 2 <= 1)
            throw Error("build_chain: no functional with value above 1/2 on g_" + std::to_string(i) +
                        " (best " + rat_str(cert.value) + ")");
        if (cert.tree.weight != p.m(idx))
            throw Error("certificate weight mismatch (norming-weight regime violation): g_" + std::to_string(i) +
                        " is best normed by weight " + int_str(cert.tree.weight) + " instead of " +
                        int_str(p.m(idx)) + "; certificate " + trees::to_json(cert.tree).dump());
        SparseVector gr;
        if (!g->g.to_rational(gr)) throw Error("build_chain: g_" + std::to_string(i) + " has irrational coordinates");
        gs.push_back(gr);
        xs.push_back(cert.tree);
        after = gr.max_support();
        for (auto& y : ys) all_ys.push_back(std::move(y));
    }
    std::vector<std::int64_t> mins;
    for (const auto& g : gs) mins.push_back(g.min_support());
    int n = schreier::clamp_index(p.n(2 * j + 1));
    if (!schreier::is_maximal(FinSet(mins), n))
        throw Error("admissibility failure: {min supp g_i} = " + FinSet(mins).str() + " is not maximal in S_" +
                    std::to_string(n));
    auto b = assemble(j, gs, xs, p, reg, "build_chain");
    b.ys = std::move(all_ys);
    return b;
}

// ---- bundle assembly and checks ----

WitnessBundle assemble(std::size_t j, const std::vector<SparseVector>& gs, const std::vector<NormingTree>& xstars,
                       const ParameterSystem& p, SigmaRegistry& reg, const std::string& origin) {
    if (gs.empty() || gs.size() != xstars.size()) throw Error("assemble: need equally many vectors and functionals");
    if (2 * j + 1 > p.length()) throw Error("assemble: odd index beyond the parameter system");
    WitnessBundle b;
    b.j = j;
    b.origin = origin;
    b.gs = gs;
    b.xstars = xstars;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        Rat v = trees::eval(xstars[i], gs[i]);
        if (v == 0) throw Error("assemble: x*_" + std::to_string(i + 1) + "(g) = 0");
        SparseVector z = gs[i].scaled(1 / v);
        b.t.push_back(z.min_support());
        b.zs.push_back(std::move(z));
    }
    for (std::size_t i = 1; i < xstars.size(); ++i) {
        std::vector<NormingTree> prefix(xstars.begin(), xstars.begin() + static_cast<long>(i));
        trees::sigma_register(prefix, reg);
    }
    int xi = schreier::clamp_index(p.n(2 * j + 1));
    SparseVector basic;
    try {
        basic = first_basic(xi, IndexStream::explicit_list(b.t));
    } catch (const Error& e) {
        throw Error(std::string("assemble: the average over t does not fit in the chain: ") + e.what());
    }
    std::vector<Rat> beta;
    for (std::size_t i = 0; i < b.t.size(); ++i) {
        Rat sq = basic.get(b.t[i]);
        Rat r;
        if (!exact_sqrt(sq, r)) throw Error("assemble: average coefficient " + rat_str(sq) + " is not a rational square");
        b.beta_sq.push_back(sq);
        beta.push_back(r);
        b.plain = b.plain + b.zs[i].scaled(r);
        b.alternating = b.alternating + b.zs[i].scaled(i % 2 == 0 ? Rat(-r) : r);
    }
    b.lower_functional = lower_functional_of(j, xstars, beta, p);
    b.registry_hash = reg.snapshot_hash();
    b.checks = check_bundle(b, p, reg);
    return b;
}

std::vector<BundleCheck> check_bundle(const WitnessBundle& b, const ParameterSystem& p, const SigmaRegistry& reg) {
    std::vector<BundleCheck> out;
    const std::size_t P = b.xstars.size();
    bool sizes = P > 0 && b.gs.size() == P && b.zs.size() == P && b.t.size() == P && b.beta_sq.size() == P;
    out.push_back(check("sizes", sizes, "p=" + std::to_string(P)));
    if (!sizes) return out;
    if (2 * b.j + 1 > p.length()) {
        out.push_back(check("odd index", false, "2j+1 beyond the parameter system"));
        return out;
    }
    const std::size_t odd = 2 * b.j + 1;
    std::size_t prev_idx = odd;
    std::vector<Rat> beta;
    for (std::size_t i = 0; i < P; ++i) {
        std::string tag = "_" + std::to_string(i + 1);
        const auto& x = b.xstars[i];
        auto rep = trees::validate(x, p, reg);
        out.push_back(check("x*" + tag + " valid", rep.ok(), rep.ok() ? "" : rep.str()));
        if (!rep.ok() || b.gs[i].is_zero() || b.zs[i].is_zero()) continue;
        Rat v = trees::eval(x, b.gs[i]);
        out.push_back(check("x*" + tag + "(g" + tag + ") > 1/2", v * 2 > 1, rat_str(v)));
        out.push_back(check("r(x*" + tag + ") in r(g" + tag + ")", range_within(x.iset, b.gs[i].range())));
        std::size_t idx = even_index(p, x.weight);
        out.push_back(check("w(x*" + tag + ") even above previous", idx > prev_idx,
                            "weight " + int_str(x.weight) + " index " + std::to_string(idx)));
        prev_idx = std::max(prev_idx, idx);
        bool zok = v != 0 && b.zs[i] == b.gs[i].scaled(1 / v);
        out.push_back(check("z" + tag + " = g/x*(g)", zok));
        out.push_back(check("x*" + tag + "(z" + tag + ") = 1", trees::eval(x, b.zs[i]) == 1));
        out.push_back(check("t" + tag + " = min supp z", b.t[i] == b.zs[i].min_support()));
        if (i >= 1) {
            std::vector<NormingTree> prefix(b.xstars.begin(), b.xstars.begin() + static_cast<long>(i));
            auto w = reg.lookup(prefix);
            out.push_back(check("sigma chain" + tag, w && *w == x.weight,
                                w ? "sigma " + int_str(*w) : std::string("prefix not registered")));
        }
    }
    bool succ = true;
    for (std::size_t i = 1; i < P; ++i)
        if (b.gs[i - 1].max_support() >= b.gs[i].min_support()) succ = false;
    out.push_back(check("g successive", succ));
    std::vector<std::int64_t> mins;
    for (const auto& g : b.gs) mins.push_back(g.is_zero() ? 0 : g.min_support());
    int n = schreier::clamp_index(p.n(odd));
    bool maximal = succ && mins.front() > 0 && schreier::is_maximal(FinSet(mins), n);
    out.push_back(check("maximally admissible", maximal, FinSet(mins).str() + " in S_" + std::to_string(n)));
    if (!succ) return out;
    SparseVector basic;
    bool avg_ok = true;
    try {
        basic = first_basic(n, IndexStream::explicit_list(b.t));
    } catch (const Error&) {
        avg_ok = false;
    }
    Rat sum = 0;
    for (std::size_t i = 0; i < P && avg_ok; ++i) {
        Rat r;
        if (basic.get(b.t[i]) != b.beta_sq[i] || !exact_sqrt(b.beta_sq[i], r)) avg_ok = false;
        sum += b.beta_sq[i];
        beta.push_back(r);
    }
    out.push_back(check("average coefficients", avg_ok && sum == 1, "sum " + rat_str(sum)));
    if (!avg_ok) return out;
    SparseVector plain, alt;
    for (std::size_t i = 0; i < P; ++i) {
        plain = plain + b.zs[i].scaled(beta[i]);
        alt = alt + b.zs[i].scaled(i % 2 == 0 ? Rat(-beta[i]) : beta[i]);
    }
    out.push_back(check("plain vector", plain == b.plain));
    out.push_back(check("alternating vector", alt == b.alternating));
    auto lf = lower_functional_of(b.j, b.xstars, beta, p);
    bool same = trees::same_tree(lf, b.lower_functional);
    auto rep = trees::validate(b.lower_functional, p, reg);
    out.push_back(check("lower functional", same && rep.ok(), rep.ok() ? "" : rep.str()));
    out.push_back(check("registry snapshot", b.registry_hash == reg.snapshot_hash(),
                        "bundle " + b.registry_hash + " registry " + reg.snapshot_hash()));
    return out;
}

// ---- fixtures ----

ParameterSystem toy_params() { return treegen::linear_params(64); }

WitnessBundle toy_fixture(ParameterSystem& p, SigmaRegistry& reg) {
    const std::size_t j = 1;
    std::vector<SparseVector> gs;
    std::vector<NormingTree> xs;
    Int w = p.m(2 * j + 2);
    for (std::int64_t a : {4, 6, 8, 10}) {
        if (!xs.empty()) w = trees::sigma_register(xs, reg);
        xs.push_back(NormingTree::node(w, 1, {NormingTree::leaf(a, frac(3, 5)), NormingTree::leaf(a + 1, frac(4, 5))}));
        Rat wr(w);
        gs.push_back(SparseVector{{a, wr * frac(3, 5)}, {a + 1, wr * frac(4, 5)}});
    }
    auto b = assemble(j, gs, xs, p, reg, "toy fixture");
    b.regime_notes = {"g_i are two-point vectors, not normalized squared averages of smoothly normalized averages",
                      "m_1 = " + int_str(p.m(1)) + " <= 246", "|z_i| exceeds 2"};
    return b;
}

ParameterSystem paper_params() { return params::generate(Mode::PaperFaithful, 6); }

WitnessBundle paper_fixture(ParameterSystem& p, SigmaRegistry& reg) {
    const std::size_t j = 1;
    Int w = p.m(2 * j + 2);
    std::vector<NormingTree> xs{NormingTree::node(w, 1, {NormingTree::leaf(1, 1)})};
    std::vector<SparseVector> gs{SparseVector{{1, Rat(w)}}};
    auto b = assemble(j, gs, xs, p, reg, "paper fixture");
    b.regime_notes = {"g_1 = m_4 e_1 is not a normalized squared average", "|z_1| = m_4 exceeds 2"};
    return b;
}

// ---- the vector pair ----

json PairReport::to_json() const {
    auto cb = [](const normengine::ClosureBounds& c) {
        return json{{"lower_sq", rat_str(c.lower_sq)},
                    {"upper_sq", rat_str(c.upper_sq)},
                    {"exhaustive", c.exhaustive},
                    {"odd_candidates", c.odd_candidates},
                    {"detail", c.detail}};
    };
    return {{"identity_value", rat_str(identity_value)},
            {"expected", rat_str(expected)},
            {"beta_sum", rat_str(beta_sum)},
            {"identity", identity},
            {"tree_value", {rat_str(tree_lo), rat_str(tree_hi)}},
            {"functional_valid", functional_valid},
            {"validation", validation},
            {"plain", cb(plain)},
            {"alternating", cb(alternating)},
            {"exhaustive", exhaustive},
            {"separation", separation},
            {"ratio_sq", rat_str(ratio_sq)},
            {"target_sq", rat_str(target_sq)},
            {"ratio_sq_approx", ratio_sq.get_d()},
            {"target_sq_approx", target_sq.get_d()},
            {"sign_symmetric", sign_symmetric}};
}

PairReport hi_pair(const WitnessBundle& b, const ParameterSystem& p, const SigmaRegistry& reg, std::size_t budget) {
    PairReport r;
    auto rep = trees::validate(b.lower_functional, p, reg);
    r.functional_valid = rep.ok();
    r.validation = rep.ok() ? "" : rep.str();
    if (!r.functional_valid) throw Error("hi_pair: lower functional fails validation: " + rep.str());
    Rat m(p.m(2 * b.j + 1));
    for (const auto& q : b.beta_sq) r.beta_sum += q;
    r.identity_value = r.beta_sum / m;
    r.expected = 1 / m;
    r.tree_lo = r.tree_hi = trees::eval(b.lower_functional, b.plain);
    r.identity = r.tree_lo == r.identity_value && r.identity_value == r.expected;
    SqrtVector plain = SqrtVector::from_rational(b.plain);
    SqrtVector alt = SqrtVector::from_rational(b.alternating);
    r.plain = normengine::chain_closure_bounds(plain, p, reg, b.xstars, budget);
    r.alternating = normengine::chain_closure_bounds(alt, p, reg, b.xstars, budget);
    r.exhaustive = r.plain.exhaustive && r.alternating.exhaustive;
    r.separation = r.alternating.upper_sq < r.plain.lower_sq;
    r.ratio_sq = r.plain.lower_sq / r.alternating.upper_sq;
    r.target_sq = Rat(517 * 517) / (m * m);
    auto np = normengine::chain_closure_bounds(plain.negated(), p, reg, b.xstars, budget);
    auto na = normengine::chain_closure_bounds(alt.negated(), p, reg, b.xstars, budget);
    r.sign_symmetric = np.lower_sq == r.plain.lower_sq && np.upper_sq == r.plain.upper_sq &&
                       na.lower_sq == r.alternating.lower_sq && na.upper_sq == r.alternating.upper_sq;
    return r;
}

}  // namespace witness

}  // namespace hi
