#include "hi/trees.hpp"

#include "hi/schreier.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

namespace hi {

NormingTree NormingTree::leaf(std::int64_t p, const Rat& gamma) {
    NormingTree t;
    t.weight = 0;
    t.iset = FinSet{p};
    t.gamma = gamma;
    return t;
}

NormingTree NormingTree::node(const Int& weight, const Rat& gamma, std::vector<NormingTree> children) {
    NormingTree t;
    t.weight = weight;
    t.gamma = gamma;
    for (const auto& c : children) t.iset = t.iset.unite(c.iset);
    t.children = std::move(children);
    return t;
}

std::size_t NormingTree::node_count() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.node_count();
    return n;
}

std::size_t NormingTree::depth() const {
    std::size_t d = 0;
    for (const auto& c : children) d = std::max(d, c.depth());
    return d + 1;
}

std::string path_str(const NodePath& path) {
    std::string s = "root";
    for (auto i : path) s += "/" + std::to_string(i);
    return s;
}

std::string ValidationReport::str() const {
    if (failures.empty()) return "PASS";
    std::string s = "FAIL";
    for (const auto& f : failures) s += "\n  " + f.path + ": " + f.message;
    return s;
}

bool Decomposition::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

namespace {

void canon(const NormingTree& t, std::string& out) {
    out += '(';
    out += int_str(t.weight);
    out += ';';
    bool first = true;
    for (auto k : t.iset) {
        if (!first) out += ',';
        out += std::to_string(k);
        first = false;
    }
    out += ';';
    out += rat_str(t.gamma);
    for (const auto& c : t.children) canon(c, out);
    out += ')';
}

bool sequence_successive(const std::vector<NormingTree>& seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i].iset.empty()) return false;
        if (i > 0 && !(seq[i - 1].iset.max() < seq[i].iset.min())) return false;
    }
    return true;
}

// Structural invariants only; throws with the offending path.
void check_structure(const NormingTree& t, const std::string& path) {
    if (t.iset.empty()) throw Error(path + ": empty index set");
    if (t.terminal()) {
        if (!t.children.empty()) throw Error(path + ": terminal node with children");
        if (t.iset.size() != 1) throw Error(path + ": terminal node needs a singleton index set");
        return;
    }
    if (t.weight < 0) throw Error(path + ": negative weight");
    if (t.children.empty()) throw Error(path + ": weighted node without children");
    FinSet u;
    for (std::size_t i = 0; i < t.children.size(); ++i) {
        const auto& c = t.children[i];
        check_structure(c, path + "/" + std::to_string(i));
        if (i > 0 && !(t.children[i - 1].iset.max() < c.iset.min()))
            throw Error(path + ": children not successive at " + std::to_string(i));
        u = u.unite(c.iset);
    }
    if (!(u == t.iset)) throw Error(path + ": children do not cover the index set");
}

void collect(const NormingTree& t, const Rat& factor, SparseVector& out) {
    if (t.terminal()) {
        out.add(t.iset.min(), factor * t.gamma);
        return;
    }
    Rat f = factor * t.gamma / Rat(t.weight);
    for (const auto& c : t.children) collect(c, f, out);
}

struct Validator {
    const ParameterSystem& p;
    const SigmaRegistry& reg;
    ValidationReport& rep;

    void fail(const std::string& path, const std::string& msg) { rep.failures.push_back({path, msg}); }

    void node(const NormingTree& t, const std::string& path) {
        if (!(abs(t.gamma) <= 1)) fail(path, "|gamma| = " + rat_str(abs(t.gamma)) + " > 1");
        if (t.iset.empty()) {
            fail(path, "empty index set");
            return;
        }
        if (t.terminal()) {
            if (!t.children.empty()) fail(path, "terminal node with children");
            if (t.iset.size() != 1) fail(path, "terminal node needs a singleton index set");
            if (t.witness) fail(path, "witness on a terminal node");
            return;
        }
        auto idx = p.index_of_weight(t.weight);
        if (!idx) {
            fail(path, "weight " + int_str(t.weight) + " not in M");
            return;
        }
        if (t.children.empty()) {
            fail(path, "weighted node without children");
            return;
        }
        FinSet u;
        std::vector<FinSet> sets;
        Rat sq = 0;
        for (std::size_t i = 0; i < t.children.size(); ++i) {
            const auto& c = t.children[i];
            node(c, path + "/" + std::to_string(i));
            if (c.iset.empty()) return;
            if (i > 0 && !(t.children[i - 1].iset.max() < c.iset.min()))
                fail(path, "children " + std::to_string(i - 1) + " and " + std::to_string(i) + " not successive");
            u = u.unite(c.iset);
            sets.push_back(c.iset);
            sq += c.gamma * c.gamma;
        }
        if (!(u == t.iset)) fail(path, "union of children " + u.str() + " != " + t.iset.str());
        if (sq > 1) fail(path, "sum gamma^2 = " + rat_str(sq) + " > 1");
        int ni = p.schreier_n(*idx);
        if (!schreier::is_admissible(sets, ni))
            fail(path, "children not S_" + std::to_string(ni) + "-admissible");
        bool odd = (*idx % 2) == 1;
        if (!odd) {
            if (t.witness) fail(path, "witness on an even node");
            return;
        }
        for (std::size_t i = 0; i < t.children.size(); ++i) {
            if (t.children[i].gamma <= 0) fail(path, "odd node child " + std::to_string(i) + " gamma not positive");
            if (i > 0 && t.children[i].gamma > t.children[i - 1].gamma)
                fail(path, "odd node gammas increase at " + std::to_string(i));
        }
        if (!t.witness) {
            fail(path, "odd node without dependent witness");
            return;
        }
        witness(t, *t.witness, *idx, ni, path);
    }

    void witness(const NormingTree& t, const DependentWitness& w, std::size_t idx, int ni, const std::string& path) {
        std::size_t n = t.children.size();
        if (w.k < 0 || w.L < 1) {
            fail(path, "witness needs k >= 0 and L >= 1");
            return;
        }
        if (w.extension.size() != static_cast<std::size_t>(w.k) + n) {
            fail(path, "witness extension has " + std::to_string(w.extension.size()) + " trees, expected k+n = " +
                           std::to_string(w.k + static_cast<std::int64_t>(n)));
            return;
        }
        std::size_t before = rep.failures.size();
        for (std::size_t r = 0; r < w.extension.size(); ++r) node(w.extension[r], path + "/R" + std::to_string(r + 1));
        if (rep.failures.size() != before) return;
        if (!sequence_successive(w.extension)) {
            fail(path, "witness extension not successive");
            return;
        }
        std::vector<FinSet> sets;
        for (const auto& r : w.extension) sets.push_back(r.iset);
        if (!schreier::is_admissible(sets, ni)) fail(path, "witness extension not S_" + std::to_string(ni) + "-admissible");
        auto i1 = w.extension[0].terminal() ? std::nullopt : p.index_of_weight(w.extension[0].weight);
        if (!i1 || *i1 % 2 != 0 || *i1 < idx + 1)
            fail(path, "w(R_1) = " + int_str(w.extension[0].weight) + " is not m_{2j'} with 2j' > " + std::to_string(idx));
        std::vector<NormingTree> prefix{w.extension[0]};
        for (std::size_t r = 1; r < w.extension.size(); ++r) {
            auto s = reg.lookup(prefix);
            if (!s || *s != w.extension[r].weight)
                fail(path, "sigma(R_1..R_" + std::to_string(r) + ") = " + (s ? int_str(*s) : std::string("unregistered")) +
                               " != w(R_" + std::to_string(r + 1) + ") = " + int_str(w.extension[r].weight));
            prefix.push_back(w.extension[r]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = w.extension[static_cast<std::size_t>(w.k) + i];
            auto cut = trees::restrict(r, Interval{w.L, Interval::kInf});
            if (!cut) {
                fail(path, "R_{k+" + std::to_string(i + 1) + "} vanishes on [L,inf)");
                continue;
            }
            cut->gamma = t.children[i].gamma;
            if (!trees::same_tree(*cut, t.children[i]))
                fail(path, "R_{k+" + std::to_string(i + 1) + "} restricted to [L,inf) differs from child " +
                               std::to_string(i));
        }
    }
};

}  // namespace

// ---- registry ----

SigmaRegistry::SigmaRegistry(ParameterSystem& params) : params_(&params) {}

SigmaRegistry::SigmaRegistry(ParameterSystem& params, const std::filesystem::path& file) : params_(&params), file_(file) {
    std::ifstream in(file);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        insert_loaded(j.at("seq").get<std::string>(), parse_int(j.at("weight").get<std::string>()));
    }
}

void SigmaRegistry::insert_loaded(const std::string& key, const Int& weight) {
    if (map_.count(key)) throw Error("registry file repeats a sequence");
    std::size_t i = 0;
    while (true) {
        if (i >= params_->length()) params::extend(*params_, i + 1);
        if (params_->m(i + 1) == weight) break;
        if (params_->m(i + 1) > weight) throw Error("registry weight " + int_str(weight) + " not in M");
        ++i;
    }
    std::size_t idx = i + 1;
    if (idx % 2 != 0 || idx <= cursor_) throw Error("registry file is not monotone in even indices");
    cursor_ = idx;
    map_[key] = weight;
    log_.emplace_back(key, weight);
}

Int SigmaRegistry::register_sequence(const std::vector<NormingTree>& seq) {
    if (seq.empty()) throw Error("sigma of an empty sequence");
    if (!sequence_successive(seq)) throw Error("sigma needs a successive sequence");
    std::string key = trees::canonical(seq);
    std::unique_lock lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) return it->second;
    Int bound = 0;
    for (const auto& t : seq) bound = std::max(bound, t.weight);
    std::size_t idx = cursor_ + 1;
    if (idx % 2) ++idx;
    while (true) {
        if (params_->length() < idx) params::extend(*params_, idx);
        if (params_->m(idx) > bound) break;
        idx += 2;
    }
    Int w = params_->m(idx);
    cursor_ = idx;
    map_[key] = w;
    log_.emplace_back(key, w);
    if (file_) {
        std::ofstream out(*file_, std::ios::app);
        if (!out) throw Error("cannot append to registry file " + file_->string());
        nlohmann::json j{{"seq", key}, {"weight", int_str(w)}};
        out << j.dump() << '\n';
    }
    return w;
}

std::optional<Int> SigmaRegistry::lookup(const std::vector<NormingTree>& seq) const {
    std::string key = trees::canonical(seq);
    std::shared_lock lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) return it->second;
    return std::nullopt;
}

std::size_t SigmaRegistry::size() const {
    std::shared_lock lock(mu_);
    return log_.size();
}

std::size_t SigmaRegistry::cursor() const {
    std::shared_lock lock(mu_);
    return cursor_;
}

std::vector<std::pair<std::string, Int>> SigmaRegistry::entries() const {
    std::shared_lock lock(mu_);
    return log_;
}

std::string SigmaRegistry::snapshot_hash() const {
    std::shared_lock lock(mu_);
    std::string all;
    for (const auto& [k, w] : log_) all += k + "\t" + int_str(w) + "\n";
    return fnv1a_hex(all);
}

namespace trees {

std::string canonical(const NormingTree& t) {
    std::string out;
    canon(t, out);
    return out;
}

std::string canonical(const std::vector<NormingTree>& seq) {
    std::string out = "[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ',';
        canon(seq[i], out);
    }
    return out + "]";
}

bool same_tree(const NormingTree& a, const NormingTree& b) {
    if (a.weight != b.weight || !(a.iset == b.iset) || a.gamma != b.gamma || a.children.size() != b.children.size())
        return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!same_tree(a.children[i], b.children[i])) return false;
    return true;
}

ValidationReport validate(const NormingTree& t, const ParameterSystem& p, const SigmaRegistry& reg) {
    ValidationReport rep;
    Validator v{p, reg, rep};
    v.node(t, "root");
    return rep;
}

SparseVector functional(const NormingTree& t) {
    check_structure(t, "root");
    SparseVector out;
    if (t.terminal()) {
        out.add(t.iset.min(), t.gamma * t.gamma);
        return out;
    }
    Rat f = t.gamma / Rat(t.weight);
    for (const auto& c : t.children) collect(c, f, out);
    return out;
}

Rat eval(const NormingTree& t, const SparseVector& x) { return functional(t).dot(x); }

std::pair<Rat, Rat> eval_bounds(const NormingTree& t, const SqrtVector& x, unsigned bits) {
    return x.dot_bounds(functional(t), bits);
}

std::optional<NormingTree> restrict(const NormingTree& t, const Interval& iv) {
    if (!iv.meets(t.iset)) return std::nullopt;
    NormingTree r;
    r.weight = t.weight;
    r.gamma = t.gamma;
    r.iset = t.iset.clip(iv.lo, iv.hi);
    if (t.terminal()) return r;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < t.children.size(); ++i) {
        if (auto c = restrict(t.children[i], iv)) {
            r.children.push_back(std::move(*c));
            kept.push_back(i);
        }
    }
    if (t.witness) {
        // Leading dropped children join the prefix; the last used chain tree is cut on the right.
        const auto& w = *t.witness;
        auto s = static_cast<std::int64_t>(kept.front());
        auto e = static_cast<std::size_t>(w.k) + kept.back();
        auto nw = std::make_shared<DependentWitness>();
        nw->k = w.k + s;
        nw->L = std::max(w.L, iv.lo);
        if (e < w.extension.size()) {
            nw->extension.assign(w.extension.begin(), w.extension.begin() + static_cast<std::ptrdiff_t>(e) + 1);
            if (auto last = restrict(nw->extension.back(), Interval{1, iv.hi})) nw->extension.back() = std::move(*last);
        }
        r.witness = std::move(nw);
    }
    return r;
}

NormingTree negate(const NormingTree& t) {
    NormingTree r = t;
    r.gamma = -r.gamma;
    return r;
}

const NormingTree& at(const NormingTree& t, const NodePath& path) {
    const NormingTree* cur = &t;
    for (auto i : path) {
        if (i >= cur->children.size()) throw Error("no node at " + path_str(path));
        cur = &cur->children[i];
    }
    return *cur;
}

NormingTree subtree(const NormingTree& t, const NodePath& path) { return at(t, path); }

Int sigma_register(const std::vector<NormingTree>& seq, SigmaRegistry& reg) { return reg.register_sequence(seq); }

NodeQuantities node_quantities(const NormingTree& t, const NodePath& path, const ParameterSystem& p) {
    NodeQuantities q{Int(1), Int(0), t.gamma};
    const NormingTree* cur = &t;
    for (auto i : path) {
        if (i >= cur->children.size()) throw Error("no node at " + path_str(path));
        auto idx = p.index_of_weight(cur->weight);
        if (!idx) throw Error("ancestor weight " + int_str(cur->weight) + " not in M");
        q.m_of *= cur->weight;
        q.n_of += p.n(*idx);
        if (cur != &t) q.gamma_of *= cur->gamma;
        cur = &cur->children[i];
    }
    return q;
}

Admissibility incomparable_admissibility(const NormingTree& t, const std::vector<NodePath>& nodes,
                                         const ParameterSystem& p) {
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            if (a == b) continue;
            const auto& x = nodes[a];
            const auto& y = nodes[b];
            if (x.size() <= y.size() && std::equal(x.begin(), x.end(), y.begin()))
                throw Error("nodes " + path_str(x) + " and " + path_str(y) + " are comparable");
        }
    Admissibility out{Int(0), true};
    if (nodes.empty()) return out;
    std::vector<FinSet> sets;
    for (const auto& path : nodes) {
        auto q = node_quantities(t, path, p);
        if (q.n_of > out.p) out.p = q.n_of;
        sets.push_back(at(t, path).iset);
    }
    std::sort(sets.begin(), sets.end(), [](const FinSet& a, const FinSet& b) { return a.min() < b.min(); });
    out.admissible = schreier::is_admissible(sets, schreier::clamp_index(out.p));
    return out;
}

Decomposition decompose(const NormingTree& t, std::size_t j, const ParameterSystem& p) {
    if (j < 1 || j > p.length()) throw Error("decompose: index j out of range");
    const Int& mj = p.m(j);
    if (t.weight >= mj) throw Error("decompose needs w(T) = " + int_str(t.weight) + " < m_j = " + int_str(mj));
    Int mj2 = mj * mj;
    Int mj3 = mj2 * mj;

    struct Pick {
        NodePath path;
        int cls;
    };
    std::vector<Pick> picks;
    auto visit = [&](auto&& self, const NormingTree& a, NodePath& path, const Int& m_of) -> void {
        if (a.terminal()) {
            picks.push_back({path, 3});
            return;
        }
        if (a.weight >= mj) {
            picks.push_back({path, 2});
            return;
        }
        Int mc = m_of * a.weight;
        for (std::size_t i = 0; i < a.children.size(); ++i) {
            path.push_back(i);
            if (mc >= mj2)
                picks.push_back({path, 1});
            else
                self(self, a.children[i], path, mc);
            path.pop_back();
        }
    };
    NodePath root;
    visit(visit, t, root, Int(1));

    Decomposition d;
    SparseVector sum;
    Rat l1_sq = 0, all_sq = 0;
    bool l1_range = true, l2_weight = true, l3_form = true;
    std::string l1_detail, l2_detail, l3_detail;
    std::vector<NodePath> paths;
    for (const auto& pk : picks) {
        const NormingTree& a = at(t, pk.path);
        auto q = node_quantities(t, pk.path, p);
        DecompositionTerm term;
        term.path = pk.path;
        term.cls = pk.cls;
        // The node's own coefficient moves into lambda; x*_a is the subtree with unit root coefficient.
        term.lambda = pk.path.empty() ? Rat(a.gamma * a.gamma) : Rat(q.gamma_of * a.gamma / Rat(q.m_of));
        if (a.terminal()) {
            term.functional.add(a.iset.min(), 1);
        } else {
            NormingTree unit = a;
            unit.gamma = 1;
            term.functional = functional(unit);
        }
        sum = sum + term.functional.scaled(term.lambda);
        all_sq += term.lambda * term.lambda;
        if (pk.cls == 1) {
            l1_sq += term.lambda * term.lambda;
            if (!(mj2 <= q.m_of && q.m_of < mj3)) {
                l1_range = false;
                l1_detail = path_str(pk.path);
            }
        }
        if (pk.cls == 2 && a.weight < mj) {
            l2_weight = false;
            l2_detail = path_str(pk.path);
        }
        if (pk.cls == 3 && !(term.functional.coords().size() <= 1 && term.functional.max_abs() <= 1)) {
            l3_form = false;
            l3_detail = path_str(pk.path);
        }
        paths.push_back(pk.path);
        d.terms.push_back(std::move(term));
    }
    SparseVector whole = functional(t);
    Int w = t.weight > 0 ? t.weight : Int(1);
    Rat mj4 = Rat(mj2 * mj2);
    d.checks.push_back({"reconstruction x* = sum lambda x*_a", sum == whole, ""});
    d.checks.push_back({"sum_L1 lambda^2 <= 1/m_j^4", l1_sq * mj4 <= 1, rat_str(l1_sq)});
    d.checks.push_back({"sum_L lambda^2 <= 1/w^2", all_sq * Rat(w * w) <= 1, rat_str(all_sq)});
    d.checks.push_back({"L1 m_j^2 <= m(a) < m_j^3", l1_range, l1_detail});
    d.checks.push_back({"L2 weight >= m_j", l2_weight, l2_detail});
    d.checks.push_back({"L3 terms are gamma e*_p", l3_form, l3_detail});
    auto adm = incomparable_admissibility(t, paths, p);
    std::vector<FinSet> sets;
    for (const auto& path : paths) sets.push_back(at(t, path).iset);
    bool fj_ok = adm.admissible && adm.p <= p.f(j) &&
                 schreier::is_admissible(sets, schreier::clamp_index(p.f(j)));
    d.checks.push_back({"S_{f_j}-admissible", fj_ok, "p=" + int_str(adm.p) + " f_j=" + int_str(p.f(j))});
    return d;
}

std::vector<Rat> rationalize(const std::vector<double>& gammas, double tol) {
    if (!(tol > 0)) throw Error("rationalize needs a positive tolerance");
    std::vector<Rat> exact;
    Rat s = 0;
    for (double g : gammas) {
        if (!std::isfinite(g)) throw Error("rationalize: non-finite input");
        exact.emplace_back(g);
        s += exact.back() * exact.back();
    }
    if (s <= 1) return exact;
    // Scale by c <= 1/sqrt(s) and truncate toward zero on a dyadic grid.
    auto [lo, hi] = sqrt_bounds(s, 96);
    Rat c = 1 / hi;
    double gmin = 1.0;
    for (double g : gammas)
        if (g != 0) gmin = std::min(gmin, std::fabs(g));
    unsigned bits = static_cast<unsigned>(std::ceil(-std::log2(tol * gmin))) + 4;
    Int scale = Int(1) << bits;
    std::vector<Rat> out;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        Rat v = exact[i] * c * Rat(scale);
        Int q = v.get_num() / v.get_den();  // truncates toward zero
        Rat b(q, scale);
        b.canonicalize();
        Rat target = exact[i] / Rat(lo);
        Rat err = abs(b - target);
        if (err > Rat(tol) * abs(exact[i]) && err > Rat(tol) * abs(target))
            throw Error("rationalize: tolerance not reached");
        out.push_back(b);
    }
    return out;
}

Rat coefficient_l2_squared(const NormingTree& t) { return functional(t).l2_squared(); }

nlohmann::json to_json(const NormingTree& t) {
    nlohmann::json j;
    j["weight"] = int_str(t.weight);
    j["iset"] = t.iset.elems();
    j["gamma"] = rat_str(t.gamma);
    j["children"] = nlohmann::json::array();
    for (const auto& c : t.children) j["children"].push_back(to_json(c));
    if (t.witness) {
        nlohmann::json w;
        w["k"] = t.witness->k;
        w["L"] = t.witness->L;
        w["extension"] = nlohmann::json::array();
        for (const auto& r : t.witness->extension) w["extension"].push_back(to_json(r));
        j["witness"] = w;
    }
    return j;
}

NormingTree from_json(const nlohmann::json& j) {
    NormingTree t;
    try {
        t.weight = parse_int(j.at("weight").get<std::string>());
        t.iset = FinSet::from_unsorted(j.at("iset").get<std::vector<std::int64_t>>());
        t.gamma = parse_rat(j.at("gamma").get<std::string>());
        if (j.contains("children"))
            for (const auto& c : j.at("children")) t.children.push_back(from_json(c));
        if (j.contains("witness")) {
            auto w = std::make_shared<DependentWitness>();
            const auto& jw = j.at("witness");
            w->k = jw.at("k").get<std::int64_t>();
            w->L = jw.at("L").get<std::int64_t>();
            for (const auto& r : jw.at("extension")) w->extension.push_back(from_json(r));
            t.witness = std::move(w);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad tree JSON: ") + e.what());
    }
    return t;
}

}  // namespace trees

}  // namespace hi
