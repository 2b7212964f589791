#include "hi/averages.hpp"

#include "hi/schreier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace hi {

namespace {

class StreamExhausted : public Error {
public:
    StreamExhausted() : Error("explicit index stream exhausted") {}
};

}  // namespace

IndexStream IndexStream::arithmetic(std::int64_t start, std::int64_t step) {
    if (start < 1 || step < 1) throw Error("arithmetic stream needs start >= 1 and step >= 1");
    IndexStream s;
    s.tail_ = true;
    s.start_ = start;
    s.step_ = step;
    return s;
}

IndexStream IndexStream::explicit_list(std::vector<std::int64_t> xs) {
    FinSet check(xs);  // validates strict increase and positivity
    IndexStream s;
    s.head_ = std::move(xs);
    return s;
}

IndexStream IndexStream::with_tail(std::vector<std::int64_t> head, std::int64_t start, std::int64_t step) {
    IndexStream s = explicit_list(std::move(head));
    if (!s.head_.empty() && start <= s.head_.back()) throw Error("stream tail must start past the head");
    auto t = arithmetic(start, step);
    s.tail_ = true;
    s.start_ = t.start_;
    s.step_ = t.step_;
    return s;
}

std::int64_t IndexStream::at(std::size_t i) const {
    if (i < head_.size()) return head_[i];
    if (!tail_) throw StreamExhausted();
    std::size_t k = i - head_.size();
    if (k > static_cast<std::size_t>((std::numeric_limits<std::int64_t>::max() - start_) / step_))
        throw Error("index stream value overflow");
    return start_ + static_cast<std::int64_t>(k) * step_;
}

std::optional<std::size_t> IndexStream::size() const {
    if (tail_) return std::nullopt;
    return head_.size();
}

IndexStream IndexStream::after(std::int64_t x) const {
    IndexStream s;
    for (auto v : head_)
        if (v > x) s.head_.push_back(v);
    s.tail_ = tail_;
    s.step_ = step_;
    if (tail_) {
        if (start_ > x) {
            s.start_ = start_;
        } else {
            std::int64_t k = (x - start_) / step_ + 1;
            s.start_ = start_ + k * step_;
        }
    }
    return s;
}

IndexStream IndexStream::drop(std::size_t n) const {
    if (n == 0) return *this;
    return after(at(n - 1));
}

std::vector<std::int64_t> IndexStream::prefix(std::size_t n) const {
    std::vector<std::int64_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(at(i));
    return out;
}

bool IndexStream::contains(std::int64_t x) const {
    if (std::binary_search(head_.begin(), head_.end(), x)) return true;
    return tail_ && x >= start_ && (x - start_) % step_ == 0;
}

std::string IndexStream::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < head_.size(); ++i) os << (i ? "," : "") << head_[i];
    if (tail_) os << (head_.empty() ? "" : ",") << start_ << "," << start_ + step_ << ",...";
    os << ')';
    return os.str();
}

namespace averages {

namespace {

// [xi]_1^M as coordinate map; accumulates into out with the given scale.
void basic_first(int xi, const IndexStream& m, const Rat& scale, SparseVector& out, std::int64_t& last,
                 std::size_t& budget) {
    if (xi == 0) {
        std::int64_t k = m.min();
        if (budget == 0) throw Error("average support exceeds the materialization cap");
        --budget;
        out.add(k, scale);
        last = k;
        return;
    }
    std::int64_t k = m.min();
    Rat inner = scale / Rat(k);
    IndexStream cur = m;
    for (std::int64_t i = 0; i < k; ++i) {
        basic_first(xi - 1, cur, inner, out, last, budget);
        if (i + 1 < k) cur = cur.after(last);
    }
}

// Counts the support of [xi]_1^M without materializing it; false past the cap.
bool count_first(int xi, const IndexStream& m, std::size_t& count, std::int64_t& last, std::size_t cap) {
    std::int64_t k = m.min();
    if (xi == 0) {
        last = k;
        return ++count <= cap;
    }
    if (xi == 1) {
        count += static_cast<std::size_t>(k);
        if (count > cap) return false;
        last = m.at(static_cast<std::size_t>(k - 1));
        return true;
    }
    IndexStream cur = m;
    for (std::int64_t i = 0; i < k; ++i) {
        if (!count_first(xi - 1, cur, count, last, cap)) return false;
        if (i + 1 < k) cur = cur.after(last);
    }
    return true;
}

SparseVector first_average(int xi, const IndexStream& m, std::int64_t& last, std::size_t budget = kMaxSupport) {
    std::size_t count = 0;
    std::int64_t probe = 0;
    if (!count_first(xi, m, count, probe, budget)) throw Error("average support exceeds the materialization cap");
    SparseVector v;
    basic_first(xi, m, Rat(1), v, last, budget);
    return v;
}

}  // namespace

std::vector<SparseVector> build_basic(int xi, const IndexStream& m, std::size_t count) {
    if (xi < 0) throw Error("negative Schreier index");
    if (count < 1) throw Error("build_basic needs count >= 1");
    std::vector<SparseVector> out;
    IndexStream cur = m;
    for (std::size_t n = 0; n < count; ++n) {
        std::int64_t last = 0;
        out.push_back(first_average(xi, cur, last));
        if (n + 1 < count) cur = cur.after(last);
    }
    return out;
}

SqrtVector build_squared(int xi, const IndexStream& m, std::size_t n) {
    if (n < 1) throw Error("build_squared index is 1-based");
    return SqrtVector::from_squares(build_basic(xi, m, n).back());
}

namespace {

struct Fenwick {
    std::vector<std::int64_t> cnt;
    std::vector<Rat> sum;
    explicit Fenwick(std::size_t n) : cnt(n + 1, 0), sum(n + 1, 0) {}
    void insert(std::size_t pos, const Rat& w) {
        for (std::size_t i = pos + 1; i < cnt.size(); i += i & (~i + 1)) {
            cnt[i] += 1;
            sum[i] += w;
        }
    }
    // Sum of the first t inserted items in rank order.
    Rat top(std::int64_t t) const {
        Rat s = 0;
        std::size_t pos = 0;
        std::size_t step = 1;
        while (step * 2 < cnt.size()) step *= 2;
        for (; step > 0; step /= 2) {
            if (pos + step < cnt.size() && cnt[pos + step] <= t) {
                pos += step;
                t -= cnt[pos];
                s += sum[pos];
            }
        }
        return s;
    }
};

Mass mass_eta1(const std::vector<std::int64_t>& pos, const std::vector<Rat>& w) {
    const std::size_t n = pos.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
    Fenwick fw(n);
    Mass best{0, FinSet{}, 0};
    std::size_t best_i = n;
    for (std::size_t ii = n; ii-- > 0;) {
        std::int64_t t = std::min<std::int64_t>(pos[ii] - 1, static_cast<std::int64_t>(n - 1 - ii));
        Rat v = w[ii] + fw.top(t);
        if (best_i == n || v > best.value) {
            best.value = v;
            best_i = ii;
        }
        fw.insert(rank[ii], w[ii]);
    }
    // Rebuild the witness: the min plus the heaviest later points.
    std::vector<std::size_t> later;
    for (std::size_t j = best_i + 1; j < n; ++j) later.push_back(j);
    std::stable_sort(later.begin(), later.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    std::int64_t t = std::min<std::int64_t>(pos[best_i] - 1, static_cast<std::int64_t>(later.size()));
    std::vector<std::int64_t> f{pos[best_i]};
    for (std::int64_t k = 0; k < t; ++k) f.push_back(pos[later[k]]);
    best.witness = FinSet::from_unsorted(f);
    return best;
}

Mass mass_dp(const std::vector<std::int64_t>& pos, const std::vector<Rat>& w, int eta) {
    const int n = static_cast<int>(pos.size());
    auto idx = [n](int i, int j) { return i * (n + 1) + j; };
    using Table = std::vector<Rat>;
    // levels[lv][i,j]: best S_lv set with min at i inside positions [i, j).
    std::vector<Table> levels(1, Table(n * (n + 1), Rat(0)));
    // chunk[lv][q][i,j]: best union of at most q successive S_{lv-1} sets, first min at i.
    std::vector<std::vector<Table>> chunk(1);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j <= n; ++j) levels[0][idx(i, j)] = w[i];
    for (int lv = 1; lv <= eta; ++lv) {
        const Table& prev = levels[lv - 1];
        std::vector<Table> g(n + 1, Table(n * (n + 1), Rat(0)));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j <= n; ++j) g[1][idx(i, j)] = prev[idx(i, j)];
        for (int q = 2; q <= n; ++q)
            for (int i = n - 1; i >= 0; --i)
                for (int j = i + 1; j <= n; ++j) {
                    Rat best = g[q - 1][idx(i, j)];
                    for (int k = i + 1; k < j; ++k) {
                        Rat v = prev[idx(i, k)] + g[q - 1][idx(k, j)];
                        if (v > best) best = v;
                    }
                    g[q][idx(i, j)] = best;
                }
        Table cur(n * (n + 1), Rat(0));
        for (int i = 0; i < n; ++i) {
            int q = static_cast<int>(std::min<std::int64_t>(pos[i], n));
            for (int j = i + 1; j <= n; ++j) cur[idx(i, j)] = g[q][idx(i, j)];
        }
        levels.push_back(std::move(cur));
        chunk.push_back(std::move(g));
    }
    Mass best{0, FinSet{}, 0};
    int bi = 0;
    for (int i = 0; i < n; ++i)
        if (levels[eta][idx(i, n)] > levels[eta][idx(bi, n)]) bi = i;
    best.value = levels[eta][idx(bi, n)];
    std::vector<std::int64_t> f;
    std::function<void(int, int, int)> rec = [&](int lv, int i, int j) {
        if (lv == 0) {
            f.push_back(pos[i]);
            return;
        }
        const Table& prev = levels[lv - 1];
        const auto& g = chunk[lv];
        int q = static_cast<int>(std::min<std::int64_t>(pos[i], n));
        int s = i;
        while (true) {
            const Rat& v = g[q][idx(s, j)];
            if (q > 1 && g[q - 1][idx(s, j)] == v) {
                --q;
                continue;
            }
            if (prev[idx(s, j)] == v) {
                rec(lv - 1, s, j);
                return;
            }
            int k = s + 1;
            while (k < j && prev[idx(s, k)] + g[q - 1][idx(k, j)] != v) ++k;
            if (k == j) throw Error("mass witness recovery failed");
            rec(lv - 1, s, k);
            s = k;
            --q;
        }
    };
    rec(eta, bi, n);
    best.witness = FinSet::from_unsorted(f);
    return best;
}

}  // namespace

Mass schreier_mass_of_weights(const SparseVector& weights, int eta) {
    if (eta < 0) throw Error("negative Schreier index");
    std::vector<std::int64_t> pos;
    std::vector<Rat> w;
    for (auto& [k, v] : weights.coords()) {
        if (v < 0) throw Error("mass weights must be nonnegative");
        pos.push_back(k);
        w.push_back(v);
    }
    Mass out{0, FinSet{}, 0};
    if (pos.empty()) return out;
    eta = std::min<int>(eta, static_cast<int>(pos.size()));
    if (eta == 0) {
        std::size_t bi = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[bi]) bi = i;
        out.value = w[bi];
        out.witness = FinSet{pos[bi]};
    } else if (eta == 1) {
        out = mass_eta1(pos, w);
    } else {
        if (pos.size() > 40) throw Error("exact Schreier mass needs support <= 40 for index >= 2");
        out = mass_dp(pos, w, eta);
    }
    out.root = std::sqrt(out.value.get_d());
    return out;
}

Mass schreier_l2_mass(const SqrtVector& v, int eta) { return schreier_mass_of_weights(v.squares(), eta); }

Rat mass_bound_constant(int xi) {
    if (xi < 1) throw Error("mass bound needs xi >= 1");
    Rat c = 1;
    for (int k = 2; k <= xi; ++k) c = 1 + Rat(3, 2) * c;
    return c;
}

Rat universal_mass_bound(int xi, std::int64_t min_m) {
    if (min_m < 1) throw Error("stream minimum must be >= 1");
    return mass_bound_constant(xi) / Rat(min_m);
}

std::int64_t eps_threshold(int xi, const Rat& eps) {
    Rat target = eps * eps;
    Rat c = mass_bound_constant(xi);
    // smallest n with c / n < target
    Rat q = c / target;
    Int fl = q.get_num() / q.get_den();
    Int n = fl + 1;
    if (n > std::numeric_limits<std::int64_t>::max()) throw Error("threshold overflow");
    return n.get_si();
}

EpsCheck check_eps(int xi, const IndexStream& r, const Rat& eps) {
    if (xi < 1) throw Error("squared averages need xi >= 1");
    EpsCheck out;
    Rat target = eps * eps;
    try {
        // Exact masses are attempted only on supports the mass routines can handle.
        std::int64_t last = 0;
        auto basic = first_average(xi, r, last, xi - 1 >= 2 ? 40 : std::size_t{1} << 16);
        auto m = schreier_mass_of_weights(basic, xi - 1);
        out.exact = true;
        out.mass = m.value;
        out.witness = m.witness;
        out.ok = m.value < target;
        return out;
    } catch (const Error&) {
        // fall through to the universal bound
    }
    out.exact = false;
    out.mass = universal_mass_bound(xi, r.min());
    out.ok = out.mass < target;
    return out;
}

SqrtVector squared_average_of_blocks(const std::vector<SqrtVector>& blocks, const Rat& eps, int xi,
                                     const IndexStream& r) {
    if (blocks.empty()) throw Error("no blocks");
    for (std::size_t i = 1; i < blocks.size(); ++i)
        if (blocks[i - 1].max_support() >= blocks[i].min_support()) throw Error("blocks are not successive");
    auto chk = check_eps(xi, r, eps);
    if (!chk.ok)
        throw Error("eps condition fails: mass " + rat_str(chk.mass) + " >= " + rat_str(eps * eps) +
                    (chk.exact ? " witnessed by F=" + chk.witness.str() : std::string(" (bound)")));
    auto basic = build_basic(xi, r, 1).front();
    SqrtVector out;
    std::size_t used = 0;
    for (auto& b : blocks) {
        Rat c = basic.get(b.min_support());
        if (c == 0) continue;
        out = out.disjoint_sum(b.scaled_by_root(c));
        ++used;
    }
    for (auto& [k, c] : basic.coords()) {
        bool hit = false;
        for (auto& b : blocks) hit = hit || b.min_support() == k;
        if (!hit) throw Error("stream element " + std::to_string(k) + " is not a block minimum");
    }
    (void)used;
    return out;
}

SmoothResult smooth_normalize_search(const std::vector<SqrtVector>& blocks, const Rat& eps, int xi, int rounds,
                                     const NormOracle& norm) {
    SmoothResult res;
    if (blocks.empty()) throw Error("no blocks");
    auto log = [&](const std::string& s) { res.transcript.push_back(s); };
    std::vector<std::int64_t> mins;
    for (auto& b : blocks) mins.push_back(b.min_support());
    // Drop leading blocks until the eps condition holds on the remaining minima.
    std::size_t start = 0;
    while (start < mins.size()) {
        std::vector<std::int64_t> tail(mins.begin() + static_cast<std::ptrdiff_t>(start), mins.end());
        auto chk = check_eps(xi, IndexStream::explicit_list(tail), eps);
        if (chk.ok) {
            log("eps condition holds from block " + std::to_string(start + 1) + " (mass " + rat_str(chk.mass) +
                (chk.exact ? ", exact)" : ", bound)"));
            break;
        }
        ++start;
    }
    if (start == mins.size()) {
        log("no tail of the block minima meets the eps condition");
        return res;
    }
    std::vector<SqrtVector> level(blocks.begin() + static_cast<std::ptrdiff_t>(start), blocks.end());
    for (int r = 1; r <= rounds; ++r) {
        std::vector<std::int64_t> pm;
        for (auto& b : level) pm.push_back(b.min_support());
        IndexStream cur = IndexStream::explicit_list(pm);
        std::vector<SqrtVector> next;
        for (std::size_t i = 1;; ++i) {
            SparseVector basic;
            std::int64_t last = 0;
            try {
                basic = build_basic(xi, cur, 1).front();
                last = basic.max_support();
            } catch (const Error&) {
                break;
            }
            SqrtVector u;
            for (auto& b : level) {
                Rat c = basic.get(b.min_support());
                if (c != 0) u = u.disjoint_sum(b.scaled_by_root(c));
            }
            auto nr = norm(u);
            log("round " + std::to_string(r) + " vector " + std::to_string(i) + ": |supp| " +
                std::to_string(u.coords().size()) + ", norm^2 " + rat_str(nr.norm_sq));
            if (nr.norm_sq * 4 >= 1) {
                res.success = true;
                res.round = r;
                res.index = i;
                res.raw = u;
                res.raw_norm_sq = nr.norm_sq;
                res.certified_lower = nr.certified_lower;
                res.certificate = nr.certificate;
                res.normalized = u.scaled_by_root(1 / nr.norm_sq);
                return res;
            }
            next.push_back(u.scaled_by_root(1 / nr.norm_sq));
            cur = cur.after(last);
            try {
                (void)cur.min();
            } catch (const Error&) {
                break;
            }
        }
        if (next.empty()) {
            log("round " + std::to_string(r) + ": blocks exhausted before one average formed");
            return res;
        }
        level = std::move(next);
    }
    log("no vector reached norm 1/2 within " + std::to_string(rounds) + " rounds");
    return res;
}

}  // namespace averages
}  // namespace hi
