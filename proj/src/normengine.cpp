#include "hi/normengine.hpp"

#include "hi/schreier.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_map>

namespace hi {

std::string EstimateReport::str() const {
    return std::string(pass ? "PASS" : "FAIL") + " lhs^2=" + rat_str(lhs_sq) + " rhs^2=" + rat_str(rhs_sq) +
           (detail.empty() ? "" : " " + detail);
}

nlohmann::json NormCertificate::to_json() const {
    return {{"tree", trees::to_json(tree)}, {"value", rat_str(value)}, {"vector_digest", vector_digest}};
}

NormCertificate NormCertificate::from_json(const nlohmann::json& j) {
    NormCertificate c;
    try {
        c.tree = trees::from_json(j.at("tree"));
        c.value = parse_rat(j.at("value").get<std::string>());
        c.vector_digest = j.at("vector_digest").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad certificate JSON: ") + e.what());
    }
    return c;
}

namespace normengine {

namespace {

struct Point {
    std::int64_t pos;
    Rat sq;
    int sign;
};

struct Weight {
    Int m;
    Rat m2;
    int n;  // Schreier index, capped by the support size
};

std::vector<Point> points_of(const SqrtVector& x) {
    std::vector<Point> pts;
    for (const auto& [k, c] : x.coords()) pts.push_back({k, c.square, c.sign});
    return pts;
}

// Even weights that can matter for a vector with these squares.
// Indices up to force_upto are always kept.
std::vector<Weight> relevant_weights(const std::vector<Point>& pts, const ParameterSystem& p, std::size_t force_upto = 0) {
    Rat total = 0, minsq = -1;
    for (const auto& q : pts) {
        total += q.sq;
        if (minsq < 0 || q.sq < minsq) minsq = q.sq;
    }
    int cap = std::max<int>(1, static_cast<int>(pts.size()) - 1);
    std::vector<Weight> ws;
    for (std::size_t j = 2; j <= p.length(); j += 2) {
        Rat m2 = Rat(p.m(j) * p.m(j));
        // A node value never exceeds the l2 mass over m^2; below the smallest square it cannot win.
        if (j > force_upto && total <= minsq * m2) break;
        ws.push_back({p.m(j), m2, std::min(cap, p.schreier_n(j))});
    }
    return ws;
}

class IntervalDP;
// Extra squared candidate for the span [a, b] of point indices, or -1.
using OddHook = std::function<Rat(int, int, const IntervalDP&)>;

class IntervalDP {
public:
    IntervalDP(std::vector<Point> pts, const ParameterSystem& p, OddHook hook = {}, std::size_t force_upto = 0)
        : pts_(std::move(pts)), hook_(std::move(hook)) {
        N_ = static_cast<int>(pts_.size());
        ws_ = relevant_weights(pts_, p, force_upto);
        for (const auto& w : ws_) levels_ = std::max(levels_, w.n);
        for (int a = 0; a < N_; ++a)
            if (constrained(a, N_ - 1)) capped_any_ = true;
        if (!capped_any_) levels_ = std::min(levels_, 1);
        std::size_t cells = static_cast<std::size_t>(N_) * static_cast<std::size_t>(N_);
        if (capped_any_ && static_cast<std::size_t>(levels_) * cells > 4'000'000)
            throw Error("even DP too large: " + std::to_string(N_) + " points, " + std::to_string(levels_) + " levels");
        l2pre_.assign(static_cast<std::size_t>(N_) + 1, Rat(0));
        for (int i = 0; i < N_; ++i) l2pre_[i + 1] = l2pre_[i] + pts_[i].sq;
        val2_.assign(cells, Rat(0));
        U_.assign(cells, Rat(0));
        MU_.assign(cells, Rat(-1));
        RV_.assign(cells, Rat(0));
        RU_.assign(cells, Rat(0));
        leafarg_.assign(cells, 0);
        if (capped_any_) {
            H_.assign(static_cast<std::size_t>(levels_), std::vector<Rat>(cells, Rat(0)));
            M_.assign(static_cast<std::size_t>(levels_), std::vector<Rat>(cells, Rat(-1)));
            RH_.assign(static_cast<std::size_t>(levels_), std::vector<Rat>(cells, Rat(0)));
        }
        run();
    }

    Rat value() const { return N_ == 0 ? Rat(0) : val2(0, N_ - 1); }

    NormingTree tree() {
        if (hook_) throw Error("tree recovery is unavailable with odd candidates");
        return build(0, N_ - 1);
    }

    int size() const { return N_; }
    std::int64_t pos(int i) const { return pts_[static_cast<std::size_t>(i)].pos; }

    // Best squared value of a node of weight m whose pieces lie in [c, b]; -1 if m is not tracked.
    Rat weight_cand(const Int& m, int c, int b) const {
        for (const auto& w : ws_)
            if (w.m == m) return RHn(w.n, c, b) / w.m2;
        return -1;
    }

private:
    using Span = std::pair<int, int>;

    std::size_t ix(int a, int b) const { return static_cast<std::size_t>(a) * static_cast<std::size_t>(N_) + static_cast<std::size_t>(b); }
    bool constrained(int a, int b) const { return pts_[a].pos < b - a + 1; }
    const Rat& val2(int a, int b) const { return val2_[ix(a, b)]; }
    Rat l2(int a, int b) const { return l2pre_[b + 1] - l2pre_[a]; }

    const Rat& Hn(int n, int a, int b) const {
        if (n == 0) return val2_[ix(a, b)];
        if (!capped_any_ || !constrained(a, b)) return U_[ix(a, b)];
        return H_[n - 1][ix(a, b)];
    }
    // Best value over families with at least two pieces and first minimum at a; -1 if none.
    const Rat& Mn(int n, int a, int b) const {
        static const Rat none(-1);
        if (n == 0) return none;
        if (!capped_any_ || !constrained(a, b)) return MU_[ix(a, b)];
        return M_[n - 1][ix(a, b)];
    }
    // max over c >= a of Hn(n, c, b).
    const Rat& RHn(int n, int a, int b) const {
        if (n == 0) return RV_[ix(a, b)];
        if (!capped_any_) return RU_[ix(a, b)];
        return RH_[n - 1][ix(a, b)];
    }

    // At most q chunks covering [d, b], the first starting at d, each chunk valued at level n - 1.
    Rat G(int n, int d, int b, int q) {
        q = std::min(q, b - d + 1);
        if (q <= 1) return Hn(n - 1, d, b);
        std::uint64_t key = ((static_cast<std::uint64_t>(n) * 4096 + static_cast<std::uint64_t>(d)) * 4096 +
                             static_cast<std::uint64_t>(b)) * 4096 + static_cast<std::uint64_t>(q);
        if (auto it = gmemo_.find(key); it != gmemo_.end()) return it->second;
        Rat best = Hn(n - 1, d, b);
        for (int e = d + 1; e <= b; ++e) {
            Rat v = Hn(n - 1, d, e - 1) + G(n, e, b, q - 1);
            if (v > best) best = v;
        }
        gmemo_.emplace(key, best);
        return best;
    }

    void run() {
        for (int b = 0; b < N_; ++b) {
            for (int a = b; a >= 0; --a) {
                std::size_t i = ix(a, b);
                // Largest single square.
                if (a == b || pts_[a].sq >= pts_[leafarg_[ix(a + 1, b)]].sq)
                    leafarg_[i] = a;
                else
                    leafarg_[i] = leafarg_[ix(a + 1, b)];
                Rat best = pts_[leafarg_[i]].sq;
                // Unconstrained multi-piece families starting at a.
                for (int d = a + 1; d <= b; ++d) {
                    Rat v = val2(a, d - 1) + U_[ix(d, b)];
                    if (v > MU_[i]) MU_[i] = v;
                }
                if (capped_any_ && constrained(a, b)) {
                    int sa = static_cast<int>(std::min<std::int64_t>(pts_[a].pos, N_));
                    for (int n = 1; n <= levels_; ++n) {
                        Rat m = Mn(n - 1, a, b);
                        if (sa >= 2)
                            for (int d = a + 1; d <= b; ++d) {
                                Rat v = Hn(n - 1, a, d - 1) + G(n, d, b, sa - 1);
                                if (v > m) m = v;
                            }
                        M_[n - 1][i] = m;
                    }
                }
                Rat mass = l2(a, b);
                for (const auto& w : ws_) {
                    if (mass <= best * w.m2) break;
                    Rat c = Mn(w.n, a, b);
                    if (a < b && RHn(w.n, a + 1, b) > c) c = RHn(w.n, a + 1, b);
                    if (c < 0) continue;
                    Rat v = c / w.m2;
                    if (v > best) best = v;
                }
                if (hook_) {
                    Rat o = hook_(a, b, *this);
                    if (o > best) best = o;
                }
                val2_[i] = best;
                U_[i] = std::max(best, MU_[i]);
                RV_[i] = a < b ? std::max(best, RV_[ix(a + 1, b)]) : best;
                RU_[i] = a < b ? std::max(U_[i], RU_[ix(a + 1, b)]) : U_[i];
                if (capped_any_) {
                    for (int n = 1; n <= levels_; ++n) {
                        if (constrained(a, b)) H_[n - 1][i] = std::max(best, M_[n - 1][i]);
                        const Rat& h = Hn(n, a, b);
                        RH_[n - 1][i] = a < b ? std::max(h, RH_[n - 1][ix(a + 1, b)]) : h;
                    }
                }
            }
        }
    }

    void pieces_u(int a, int b, std::vector<Span>& out) {
        if (U_[ix(a, b)] == val2(a, b)) {
            out.emplace_back(a, b);
            return;
        }
        for (int d = a + 1; d <= b; ++d)
            if (val2(a, d - 1) + U_[ix(d, b)] == MU_[ix(a, b)]) {
                out.emplace_back(a, d - 1);
                pieces_u(d, b, out);
                return;
            }
        throw Error("even DP recovery failed (U)");
    }

    void pieces_h(int n, int a, int b, std::vector<Span>& out) {
        if (n == 0 || Hn(n, a, b) == val2(a, b)) {
            out.emplace_back(a, b);
            return;
        }
        pieces_m(n, a, b, out);
    }

    void pieces_m(int n, int a, int b, std::vector<Span>& out) {
        if (!capped_any_ || !constrained(a, b)) {
            for (int d = a + 1; d <= b; ++d)
                if (val2(a, d - 1) + U_[ix(d, b)] == MU_[ix(a, b)]) {
                    out.emplace_back(a, d - 1);
                    pieces_u(d, b, out);
                    return;
                }
            throw Error("even DP recovery failed (MU)");
        }
        const Rat& target = Mn(n, a, b);
        if (n >= 2 && Mn(n - 1, a, b) == target) {
            pieces_m(n - 1, a, b, out);
            return;
        }
        int sa = static_cast<int>(std::min<std::int64_t>(pts_[a].pos, N_));
        for (int d = a + 1; d <= b; ++d)
            if (Hn(n - 1, a, d - 1) + G(n, d, b, sa - 1) == target) {
                pieces_h(n - 1, a, d - 1, out);
                pieces_g(n, d, b, sa - 1, out);
                return;
            }
        throw Error("even DP recovery failed (M)");
    }

    void pieces_g(int n, int d, int b, int q, std::vector<Span>& out) {
        q = std::min(q, b - d + 1);
        Rat g = G(n, d, b, q);
        if (q <= 1 || g == Hn(n - 1, d, b)) {
            pieces_h(n - 1, d, b, out);
            return;
        }
        for (int e = d + 1; e <= b; ++e)
            if (Hn(n - 1, d, e - 1) + G(n, e, b, q - 1) == g) {
                pieces_h(n - 1, d, e - 1, out);
                pieces_g(n, e, b, q - 1, out);
                return;
            }
        throw Error("even DP recovery failed (G)");
    }

    NormingTree build(int a, int b) {
        const Rat& v = val2(a, b);
        int k = leafarg_[ix(a, b)];
        if (v == pts_[k].sq) return NormingTree::leaf(pts_[k].pos, 1);
        Rat mass = l2(a, b);
        for (const auto& w : ws_) {
            if (mass <= pts_[k].sq * w.m2) break;
            Rat target = v * w.m2;
            std::vector<Span> spans;
            if (Mn(w.n, a, b) == target) {
                pieces_m(w.n, a, b, spans);
            } else {
                for (int c = a + 1; c <= b && spans.empty(); ++c)
                    if (Hn(w.n, c, b) == target) pieces_h(w.n, c, b, spans);
            }
            if (spans.empty()) continue;
            std::vector<NormingTree> kids;
            for (auto [c, d] : spans) {
                NormingTree t = build(c, d);
                Rat ratio = val2(c, d) / target;
                Rat g = sqrt_bounds(ratio, 80).first;
                if (t.terminal()) {
                    auto it = std::find_if(pts_.begin(), pts_.end(), [&](const Point& q) { return q.pos == t.iset.min(); });
                    if (it->sign < 0) g = -g;
                }
                t.gamma = g;
                kids.push_back(std::move(t));
            }
            return NormingTree::node(w.m, 1, std::move(kids));
        }
        throw Error("even DP recovery failed (root)");
    }

    std::vector<Point> pts_;
    OddHook hook_;
    int N_ = 0;
    std::vector<Weight> ws_;
    int levels_ = 0;
    bool capped_any_ = false;
    std::vector<Rat> l2pre_, val2_, U_, MU_, RV_, RU_;
    std::vector<int> leafarg_;
    std::vector<std::vector<Rat>> H_, M_, RH_;
    std::unordered_map<std::uint64_t, Rat> gmemo_;
};

// Successive subsets of the support, memoized over bitmasks.
Rat set_mode(const std::vector<Point>& pts, const ParameterSystem& p) {
    const int N = static_cast<int>(pts.size());
    const std::size_t full = (std::size_t{1} << N) - 1;
    auto ws = relevant_weights(pts, p);
    std::vector<int> levels;
    for (const auto& w : ws)
        if (std::find(levels.begin(), levels.end(), w.n) == levels.end()) levels.push_back(w.n);
    std::vector<std::vector<char>> member(levels.size(), std::vector<char>(full + 1, 0));
    for (std::size_t li = 0; li < levels.size(); ++li)
        for (std::size_t f = 1; f <= full; ++f) {
            std::vector<std::int64_t> e;
            for (int i = 0; i < N; ++i)
                if (f >> i & 1) e.push_back(pts[i].pos);
            member[li][f] = schreier::is_member(FinSet(e), levels[li]);
        }
    std::vector<std::size_t> order(full);
    for (std::size_t m = 1; m <= full; ++m) order[m - 1] = m;
    std::sort(order.begin(), order.end(), [](std::size_t a, std::size_t b) {
        int pa = __builtin_popcountll(a), pb = __builtin_popcountll(b);
        return pa != pb ? pa < pb : a < b;
    });
    std::vector<Rat> val2(full + 1, Rat(0)), W(full + 1, Rat(0)), mass(full + 1, Rat(0));
    auto below = [](int i) { return (std::size_t{1} << i) - 1; };
    for (std::size_t mask : order) {
        int lo = __builtin_ctzll(mask);
        Rat best = 0;
        for (int i = 0; i < N; ++i)
            if (mask >> i & 1) {
                mass[mask] += pts[i].sq;
                if (pts[i].sq > best) best = pts[i].sq;
            }
        // W' : best over strict subsets keeping the minimum.
        Rat wstrict = -1;
        for (int i = lo + 1; i < N; ++i)
            if (mask >> i & 1) wstrict = std::max(wstrict, W[mask & ~(std::size_t{1} << i)]);
        for (const auto& w : ws) {
            if (mass[mask] <= best * w.m2) break;
            std::size_t li = static_cast<std::size_t>(std::find(levels.begin(), levels.end(), w.n) - levels.begin());
            Rat top = -1;
            for (std::size_t f = mask; f; f = (f - 1) & mask) {
                if (!member[li][f]) continue;
                Rat s = 0;
                bool ok = true;
                std::size_t rest = f;
                while (rest) {
                    int c = __builtin_ctzll(rest);
                    rest &= rest - 1;
                    std::size_t window = mask & ~below(c);
                    if (rest) window &= below(__builtin_ctzll(rest));
                    if (window == mask) {
                        if (wstrict < 0) {
                            ok = false;
                            break;
                        }
                        s += wstrict;
                    } else {
                        s += W[window];
                    }
                }
                if (ok && s > top) top = s;
            }
            if (top >= 0 && top / w.m2 > best) best = top / w.m2;
        }
        val2[mask] = best;
        W[mask] = std::max(best, wstrict);
    }
    return val2[full];
}

SqrtVector signed_scale(const SqrtVector& x, const Rat& a) {
    SqrtVector y = x.scaled_by_root(a * a);
    return a < 0 ? y.negated() : y;
}

Rat abs_lower(const std::pair<Rat, Rat>& iv) {
    if (iv.first >= 0) return iv.first;
    if (iv.second <= 0) return -iv.second;
    return 0;
}

}  // namespace

std::string digest(const SparseVector& x) { return fnv1a_hex("Q" + x.str()); }
std::string digest(const SqrtVector& x) { return fnv1a_hex("R" + x.str()); }

Rat norm_even_exact_sq(const SqrtVector& x, const ParameterSystem& p, EvenMode mode, std::size_t max_support) {
    auto pts = points_of(x);
    if (pts.empty()) return 0;
    if (mode == EvenMode::Set) {
        if (pts.size() > max_support || pts.size() > 20)
            throw Error("set-mode support " + std::to_string(pts.size()) + " exceeds guard " + std::to_string(max_support));
        return set_mode(pts, p);
    }
    if (pts.size() > std::max<std::size_t>(max_support, 200))
        throw Error("interval-mode support " + std::to_string(pts.size()) + " exceeds guard");
    return IntervalDP(std::move(pts), p).value();
}

Rat norm_even_exact_sq(const SparseVector& x, const ParameterSystem& p, EvenMode mode, std::size_t max_support) {
    return norm_even_exact_sq(SqrtVector::from_rational(x), p, mode, max_support);
}

EvenSolution even_solve(const SqrtVector& x, const ParameterSystem& p, std::size_t max_support) {
    auto pts = points_of(x);
    if (pts.empty()) throw Error("even_solve of the zero vector");
    if (pts.size() > max_support) throw Error("even_solve support " + std::to_string(pts.size()) + " exceeds budget");
    IntervalDP dp(std::move(pts), p);
    return {dp.value(), dp.tree()};
}

namespace {

template <class Vec, class Eval>
NormCertificate best_certificate(const Vec& x, const ParameterSystem& p, const SigmaRegistry& reg, std::size_t budget,
                                 const std::vector<NormingTree>& candidates, Eval eval) {
    if (x.is_zero()) throw Error("norm of the zero vector");
    NormCertificate best;
    bool have = false;
    auto consider = [&](const NormingTree& t) {
        Rat v = eval(t);
        NormingTree use = t;
        if (v < 0 && !t.terminal()) {
            use = trees::negate(t);
            v = -v;
        }
        if (!have || abs(v) > abs(best.value)) {
            best.tree = std::move(use);
            best.value = v;
            have = true;
        }
    };
    for (const auto& [k, c] : x.coords()) consider(NormingTree::leaf(k, 1));
    SqrtVector sx;
    if constexpr (std::is_same_v<Vec, SparseVector>)
        sx = SqrtVector::from_rational(x);
    else
        sx = x;
    if (sx.coords().size() <= budget) consider(even_solve(sx, p, budget).tree);
    for (const auto& t : candidates)
        if (trees::validate(t, p, reg).ok()) consider(t);
    best.vector_digest = digest(x);
    return best;
}

}  // namespace

NormCertificate norm_lower(const SparseVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                           std::size_t budget, const std::vector<NormingTree>& candidates) {
    return best_certificate(x, p, reg, budget, candidates, [&](const NormingTree& t) { return trees::eval(t, x); });
}

NormCertificate norm_lower(const SqrtVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                           std::size_t budget, const std::vector<NormingTree>& candidates) {
    return best_certificate(x, p, reg, budget, candidates, [&](const NormingTree& t) {
        auto iv = trees::eval_bounds(t, x, 96);
        Rat v = abs_lower(iv);
        return iv.second <= 0 && iv.first < 0 ? Rat(-v) : v;
    });
}

Rat norm_upper_sq(const SparseVector& x) { return x.l2_squared(); }
Rat norm_upper_sq(const SqrtVector& x) { return x.l2_squared(); }

NormBounds bounds(const SparseVector& x, const ParameterSystem& p, const SigmaRegistry& reg, std::size_t budget) {
    NormBounds b;
    auto c = norm_lower(x, p, reg, budget);
    b.lower = abs(c.value);
    b.upper_sq = norm_upper_sq(x);
    auto n = x.coords().size();
    if (n <= budget) b.even_exact_sq = norm_even_exact_sq(x, p, EvenMode::Interval, budget);
    return b;
}

bool verify_certificate(const NormCertificate& c, const SparseVector& x, const ParameterSystem& p,
                        const SigmaRegistry& reg) {
    return c.vector_digest == digest(x) && trees::validate(c.tree, p, reg).ok() && trees::eval(c.tree, x) == c.value;
}

bool verify_certificate(const NormCertificate& c, const SqrtVector& x, const ParameterSystem& p,
                        const SigmaRegistry& reg) {
    if (c.vector_digest != digest(x) || !trees::validate(c.tree, p, reg).ok()) return false;
    auto iv = trees::eval_bounds(c.tree, x, 96);
    return abs_lower(iv) >= abs(c.value) || (iv.first <= c.value && c.value <= iv.second);
}

EstimateReport check_upper_l2(const std::vector<SqrtVector>& blocks, const std::vector<Rat>& coeffs,
                              const ParameterSystem& p, std::size_t max_support) {
    if (blocks.size() != coeffs.size()) throw Error("blocks and coefficients differ in length");
    if (blocks.empty()) throw Error("no blocks");
    SqrtVector y;
    Rat asq = 0;
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].is_zero()) throw Error("zero block");
        if (blocks[i].min_support() <= prev) throw Error("blocks not successive");
        prev = blocks[i].max_support();
        Rat nsq = norm_even_exact_sq(blocks[i], p, EvenMode::Interval, max_support);
        y = y.disjoint_sum(signed_scale(blocks[i].scaled_by_root(1 / nsq), coeffs[i]));
        asq += coeffs[i] * coeffs[i];
    }
    EstimateReport r;
    r.lhs_sq = y.is_zero() ? Rat(0) : norm_even_exact_sq(y, p, EvenMode::Interval, max_support);
    r.rhs_sq = 3 * asq;
    r.pass = r.lhs_sq <= r.rhs_sq;
    r.detail = "blocks=" + std::to_string(blocks.size());
    return r;
}

AsymptoticReport check_asymptotic(const std::vector<SparseVector>& blocks, const std::vector<Rat>& coeffs,
                                  const ParameterSystem& p, const SigmaRegistry& reg, std::size_t max_support) {
    if (blocks.empty()) throw Error("no blocks");
    if (blocks.size() != coeffs.size()) throw Error("blocks and coefficients differ in length");
    if (blocks.front().is_zero()) throw Error("zero block");
    if (static_cast<std::int64_t>(blocks.size()) > blocks.front().min_support())
        throw Error("precondition n <= min supp x_1 fails: n=" + std::to_string(blocks.size()) +
                    ", min supp=" + std::to_string(blocks.front().min_support()));
    if (p.length() < 2) throw Error("check_asymptotic needs m_2");
    AsymptoticReport rep;
    rep.exact = true;
    Rat asq = 0;
    for (const auto& a : coeffs) asq += a * a;
    if (asq == 0) throw Error("zero coefficient vector");
    Rat anorm;
    if (!exact_sqrt(asq, anorm)) rep.exact = false;

    std::vector<SqrtVector> normalized;
    std::vector<NormingTree> kids;
    SqrtVector y;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        SqrtVector b = SqrtVector::from_rational(blocks[i]);
        auto sol = even_solve(b, p, max_support);
        Rat v = trees::eval(sol.tree, blocks[i]);
        if (v * v != sol.value_sq) rep.exact = false;
        SqrtVector nb = b.scaled_by_root(1 / sol.value_sq);
        normalized.push_back(nb);
        y = y.disjoint_sum(signed_scale(nb, coeffs[i]));
        Rat g = sqrt_bounds(coeffs[i] * coeffs[i] / asq, 96).first;
        bool neg = (coeffs[i] < 0) != (v < 0);
        NormingTree t = sol.tree;
        t.gamma = neg ? Rat(-g) : g;
        kids.push_back(std::move(t));
    }
    rep.functional = NormingTree::node(p.m(2), 1, std::move(kids));
    auto iv = trees::eval_bounds(rep.functional, y, 96);
    if (iv.first != iv.second) rep.exact = false;
    Rat m2 = Rat(p.m(2));
    rep.lower.lhs_sq = iv.first >= 0 ? Rat(iv.first * iv.first) : Rat(0);
    rep.lower.rhs_sq = asq / (m2 * m2);
    rep.lower.pass = iv.first >= 0 && rep.lower.lhs_sq >= rep.lower.rhs_sq;
    auto val = trees::validate(rep.functional, p, reg);
    if (!val.ok()) {
        rep.lower.pass = false;
        rep.lower.detail = "functional invalid: " + val.str();
    } else {
        rep.lower.detail = rep.exact ? "exact" : "rounded";
    }
    rep.upper = check_upper_l2(normalized, coeffs, p, max_support);
    return rep;
}

Rat monotone_cone_projection_sq(const std::vector<Rat>& y) {
    // Pool adjacent violators for the nonincreasing fit, then clip at zero.
    std::vector<std::pair<Rat, long>> blocks;
    for (const auto& v : y) {
        blocks.emplace_back(v, 1);
        while (blocks.size() >= 2) {
            auto& [s1, c1] = blocks[blocks.size() - 2];
            auto& [s2, c2] = blocks.back();
            if (s1 * c2 >= s2 * c1) break;
            s1 += s2;
            c1 += c2;
            blocks.pop_back();
        }
    }
    Rat out = 0;
    for (const auto& [s, c] : blocks) {
        if (s <= 0) continue;
        Rat mean = s / c;
        out += mean * mean * c;
    }
    return out;
}

namespace {

bool has_odd_node(const NormingTree& t, const ParameterSystem& p) {
    if (!t.terminal() && !p.is_even_weight(t.weight)) return true;
    for (const auto& c : t.children)
        if (has_odd_node(c, p)) return true;
    return false;
}

NormingTree unit_root(NormingTree t) {
    t.gamma = 1;
    return t;
}

}  // namespace

ClosureBounds chain_closure_bounds(const SqrtVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                                   const std::vector<NormingTree>& chain, std::size_t max_support) {
    if (x.is_zero()) throw Error("closure bounds of the zero vector");
    if (chain.empty()) throw Error("closure bounds need a nonempty chain");
    auto pts = points_of(x);
    if (pts.size() > max_support) throw Error("closure support exceeds budget");
    const int N = static_cast<int>(pts.size());
    ClosureBounds out;
    SparseVector xr;
    bool rational = x.to_rational(xr);

    // Registered prefixes give the weight of the free member R_t.
    std::vector<Int> free_weight(chain.size() + 2, Int(0));  // free_weight[t] for t >= 2
    std::set<std::string> prefix_keys;
    std::size_t tmax = 1;
    std::size_t force = 0;
    for (std::size_t t = 2; t <= chain.size() + 1; ++t) {
        std::vector<NormingTree> prefix(chain.begin(), chain.begin() + static_cast<long>(t - 1));
        prefix_keys.insert(trees::canonical(prefix));
        auto w = reg.lookup(prefix);
        if (!w) break;
        auto idx = p.index_of_weight(*w);
        if (!idx || *idx % 2 != 0) throw Error("registered weight is not an even weight");
        free_weight[t] = *w;
        force = std::max(force, *idx);
        tmax = t;
    }
    bool registry_is_chain = true;
    for (const auto& [key, w] : reg.entries())
        if (!prefix_keys.count(key)) registry_is_chain = false;
    bool chain_even = true;
    for (const auto& t : chain)
        if (has_odd_node(t, p)) chain_even = false;

    auto head_idx = p.index_of_weight(chain.front().weight);
    if (!head_idx || *head_idx % 2 != 0) throw Error("chain head must have an even weight");
    std::vector<std::size_t> odd_idx;
    for (std::size_t o = 1; o < *head_idx && o <= p.length(); o += 2) odd_idx.push_back(o);

    // Per chain member: prefix sums of f_i * x over the points (lower and upper ends for irrational x).
    const std::size_t P = chain.size();
    std::vector<std::vector<Rat>> pre_lo(P, std::vector<Rat>(static_cast<std::size_t>(N) + 1, Rat(0)));
    std::vector<std::vector<Rat>> pre_hi = pre_lo;
    std::vector<std::int64_t> cmin(P), cmax(P);
    for (std::size_t i = 0; i < P; ++i) {
        SparseVector f = trees::functional(unit_root(chain[i]));
        cmin[i] = chain[i].iset.min();
        cmax[i] = chain[i].iset.max();
        for (int k = 0; k < N; ++k) {
            Rat c = f.get(pts[k].pos);
            Rat lo = 0, hi = 0;
            if (c != 0) {
                SqrtVector one;
                one.set(pts[k].pos, pts[k].sq, pts[k].sign);
                auto iv = one.dot_bounds(SparseVector{{pts[k].pos, c}}, 96);
                lo = iv.first;
                hi = iv.second;
            }
            pre_lo[i][k + 1] = pre_lo[i][k] + lo;
            pre_hi[i][k + 1] = pre_hi[i][k] + hi;
        }
    }
    std::vector<std::int64_t> chain_mins(cmin.begin(), cmin.end());

    auto run = [&](bool upper, std::size_t* beats) {
        OddHook hook = [&](int a, int b, const IntervalDP& dp) -> Rat {
            Rat best = -1;
            std::int64_t pa = dp.pos(a);
            std::int64_t next = b + 1 < N ? dp.pos(b + 1) : Interval::kInf;
            for (std::size_t t = 2; t <= tmax; ++t) {
                if (cmax[t - 2] >= next) continue;
                for (int c = a + 1; c <= b; ++c) {
                    if (dp.pos(c) <= cmax[t - 2]) continue;
                    Rat wc = dp.weight_cand(free_weight[t], c, b);
                    if (wc < 0) continue;
                    auto sb = sqrt_bounds(wc, 96);
                    Rat u = upper ? sb.second : sb.first;
                    std::vector<std::int64_t> mins(chain_mins.begin(), chain_mins.begin() + static_cast<long>(t - 1));
                    mins.push_back(dp.pos(c));
                    for (std::size_t k = 0; k + 2 <= t; ++k) {
                        // Fixed members k+1 .. t-1 (1-based); the first is cut at pa.
                        if (cmax[k] < pa) continue;
                        if (k + 1 < t - 1 && cmin[k + 1] < pa) continue;
                        std::vector<Rat> vlo, vhi;
                        for (std::size_t i = k; i + 1 < t; ++i) {
                            vlo.push_back(pre_lo[i][b + 1] - pre_lo[i][a]);
                            vhi.push_back(pre_hi[i][b + 1] - pre_hi[i][a]);
                        }
                        for (std::size_t o : odd_idx) {
                            if (!schreier::mins_admissible(mins, p.schreier_n(o))) continue;
                            Rat mo = Rat(p.m(o));
                            for (int s : {1, -1}) {
                                // Coordinatewise choice within the enclosure: the projection norm is
                                // monotone in each coordinate, so the ends bound it.
                                std::vector<Rat> y;
                                for (std::size_t q = 0; q < vlo.size(); ++q) {
                                    const Rat& lo = s > 0 ? vlo[q] : vhi[q];
                                    const Rat& hi = s > 0 ? vhi[q] : vlo[q];
                                    y.push_back(s * (upper ? hi : lo));
                                }
                                y.push_back(u);
                                Rat v = monotone_cone_projection_sq(y) / (mo * mo);
                                if (v > best) best = v;
                            }
                        }
                    }
                }
            }
            if (beats && best >= 0) ++*beats;
            return best;
        };
        IntervalDP dp(pts, p, hook, force);
        return dp.value();
    };
    std::size_t beats = 0;
    out.lower_sq = run(false, nullptr);
    out.upper_sq = run(true, &beats);
    out.odd_candidates = beats;
    out.exhaustive = rational && registry_is_chain && chain_even;
    out.detail = "points=" + std::to_string(N) + " chain=" + std::to_string(P) + " free_members=" +
                 std::to_string(tmax >= 2 ? tmax - 1 : 0) + " odd_indices=" + std::to_string(odd_idx.size());
    if (!rational) out.detail += " irrational-x";
    if (!registry_is_chain) out.detail += " foreign-registry-entries";
    if (!chain_even) out.detail += " chain-has-odd-nodes";
    return out;
}

averages::NormOracle make_oracle(const ParameterSystem& p, std::size_t max_support) {
    return [p, max_support](const SqrtVector& u) {
        auto sol = even_solve(u, p, max_support);
        auto iv = trees::eval_bounds(sol.tree, u, 96);
        return averages::NormOracleResult{sol.value_sq, abs_lower(iv), trees::to_json(sol.tree).dump()};
    };
}

}  // namespace normengine

}  // namespace hi
