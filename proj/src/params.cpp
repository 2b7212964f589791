#include "hi/params.hpp"

#include <algorithm>
#include <sstream>

namespace hi {

std::string mode_name(Mode m) { return m == Mode::PaperFaithful ? "paper_faithful" : "toy"; }

Mode parse_mode(const std::string& s) {
    if (s == "paper_faithful") return Mode::PaperFaithful;
    if (s == "toy") return Mode::Toy;
    throw Error("unknown parameter mode: " + s);
}

namespace {

const Int& at(const std::vector<Int>& v, std::size_t i, std::size_t offset, const char* what) {
    if (i < offset || i - offset >= v.size())
        throw Error(std::string("parameter index out of range: ") + what + "_" + std::to_string(i));
    return v[i - offset];
}

}  // namespace

const Int& ParameterSystem::m(std::size_t i) const { return at(m_, i, 1, "m"); }
const Int& ParameterSystem::ell(std::size_t i) const { return at(ell_, i, 1, "l"); }
const Int& ParameterSystem::f(std::size_t i) const { return at(f_, i, 1, "f"); }
const Int& ParameterSystem::n(std::size_t i) const { return at(n_, i, 0, "n"); }

std::optional<std::size_t> ParameterSystem::index_of_weight(const Int& w) const {
    auto it = std::lower_bound(m_.begin(), m_.end(), w);
    if (it != m_.end() && *it == w) return static_cast<std::size_t>(it - m_.begin()) + 1;
    return std::nullopt;
}

bool ParameterSystem::is_even_weight(const Int& w) const {
    auto i = index_of_weight(w);
    return i && *i % 2 == 0;
}

bool ParameterSystem::is_odd_weight(const Int& w) const {
    auto i = index_of_weight(w);
    return i && *i % 2 == 1;
}

int ParameterSystem::schreier_n(std::size_t i) const {
    const Int& v = n(i);
    if (v > (1 << 30)) return 1 << 30;
    return static_cast<int>(v.get_si());
}

std::string CheckLine::str() const {
    std::string s = name + ": " + (pass ? "PASS" : "FAIL");
    if (!witness.empty()) s += "(" + witness + ")";
    return s;
}

bool ParamReport::all_pass() const {
    for (auto& l : lines)
        if (!l.pass) return false;
    return true;
}

bool ParamReport::passes(const std::string& name) const {
    for (auto& l : lines)
        if (l.name == name) return l.pass;
    throw Error("no such check: " + name);
}

std::string ParamReport::str() const {
    std::ostringstream os;
    for (auto& l : lines) os << l.str() << '\n';
    return os.str();
}

namespace params {

Int minimal_ell(const Int& m) {
    if (m < 1) throw Error("minimal_ell needs m >= 1");
    return Int(static_cast<unsigned long>(mpz_sizeinbase(m.get_mpz_t(), 2)));
}

namespace {

Int ipow(const Int& b, unsigned long e) {
    Int r;
    mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
    return r;
}

struct FSearch {
    const std::vector<Int>* m;
    const std::vector<Int>* n;
    Int best = 0;
    std::uint64_t steps = 0;

    // Chooses rho_i for i = idx..1 with running product prod < bound.
    void run(std::size_t idx, const Int& prod, const Int& bound, const Int& acc) {
        if (++steps > 50'000'000) throw Error("compute_f enumeration too large");
        if (acc > best) best = acc;
        if (idx == 0) return;
        const Int& mi = (*m)[idx - 1];
        const Int& ni = (*n)[idx];
        Int p = prod;
        Int a = acc;
        while (true) {
            run(idx - 1, p, bound, a);
            p *= mi;
            if (p >= bound) break;
            a += ni;
        }
    }
};

std::vector<CheckLine> hard_errors(const ParameterSystem& p) {
    std::vector<CheckLine> out;
    std::size_t len = p.length();
    if (p.ell_.size() != len || p.f_.size() != len || p.n_.size() != len + 1)
        out.push_back({"consistent lengths", false, ""});
    for (std::size_t i = 0; i < p.m_.size(); ++i) {
        if (p.m_[i] <= 1) out.push_back({"m_i > 1", false, "m_" + std::to_string(i + 1) + "=" + int_str(p.m_[i])});
        if (i > 0 && p.m_[i] <= p.m_[i - 1])
            out.push_back({"m strictly increasing", false, "m_" + std::to_string(i + 1)});
    }
    for (std::size_t i = 0; i < p.ell_.size(); ++i)
        if (p.ell_[i] < 1) out.push_back({"l_i >= 1", false, "l_" + std::to_string(i + 1)});
    for (std::size_t i = 0; i < p.f_.size(); ++i)
        if (p.f_[i] < 0) out.push_back({"f_i >= 0", false, "f_" + std::to_string(i + 1)});
    for (std::size_t i = 0; i < p.n_.size(); ++i)
        if (p.n_[i] < 0) out.push_back({"n_i >= 0", false, "n_" + std::to_string(i)});
    return out;
}

// Fills index j (1-based) of any missing sequence using the minimal rules.
void fill_index(ParameterSystem& p, std::size_t j) {
    if (p.m_.size() < j) p.m_.push_back(j == 1 ? Int(247) : p.m_[j - 2] * p.m_[j - 2] + 1);
    if (p.ell_.size() < j) p.ell_.push_back(minimal_ell(p.m_[j - 1]));
    if (p.n_.empty()) p.n_.push_back(0);
    if (p.f_.size() < j) p.f_.push_back(j == 1 ? Int(1) : compute_f(j, p));
    if (p.n_.size() < j + 1) p.n_.push_back(p.ell_[j - 1] * (p.f_[j - 1] + 1) + 1);
}

}  // namespace

Int compute_f(std::size_t j, const ParameterSystem& prefix) {
    if (j < 2) throw Error("compute_f needs j >= 2 (f_1 is fixed at 1)");
    if (prefix.m_.size() < j || prefix.n_.size() < j) throw Error("compute_f prefix too short");
    Int bound = ipow(prefix.m_[j - 1], 3);
    FSearch s{&prefix.m_, &prefix.n_};
    s.run(j - 1, Int(1), bound, Int(0));
    return s.best;
}

void extend(ParameterSystem& p, std::size_t length) {
    for (std::size_t j = p.length() + 1; j <= length; ++j) fill_index(p, j);
}

ParameterSystem generate(Mode mode, std::size_t length, const std::optional<Overrides>& overrides) {
    if (length < 1) throw Error("parameter length must be >= 1");
    ParameterSystem p;
    p.mode = mode;
    if (overrides) {
        const auto& o = *overrides;
        auto check_len = [&](const std::vector<Int>& v, std::size_t want, const char* name) {
            if (!v.empty() && v.size() != want)
                throw Error(std::string("override ") + name + " has length " + std::to_string(v.size()) +
                            ", expected " + std::to_string(want));
        };
        check_len(o.m, length, "m");
        check_len(o.ell, length, "l");
        check_len(o.f, length, "f");
        check_len(o.n, length + 1, "n");
        p.m_ = o.m;
        p.ell_ = o.ell;
        p.f_ = o.f;
        p.n_ = o.n;
    }
    for (std::size_t j = 1; j <= length; ++j) fill_index(p, j);
    auto errs = hard_errors(p);
    if (!errs.empty()) throw Error("invalid parameters: " + errs.front().str());
    if (mode == Mode::PaperFaithful) {
        auto rep = validate(p);
        for (auto& l : rep.lines)
            if (!l.pass && l.name.rfind("derived:", 0) != 0)
                throw Error("paper_faithful constraint violated: " + l.str());
    }
    return p;
}

ParamReport validate(const ParameterSystem& p) {
    ParamReport r;
    auto add = [&](std::string name, bool pass, std::string w = "") {
        r.lines.push_back({std::move(name), pass, pass ? "" : std::move(w)});
    };
    for (auto& e : hard_errors(p)) r.lines.push_back(e);
    std::size_t len = std::min({p.m_.size(), p.ell_.size(), p.f_.size(), p.n_.empty() ? 0 : p.n_.size() - 1});
    if (len == 0) return r;
    add("m_1 > 246", p.m_[0] > 246, int_str(p.m_[0]));
    for (std::size_t i = 1; i < len; ++i)
        add("m_" + std::to_string(i) + "^2 < m_" + std::to_string(i + 1), p.m_[i - 1] * p.m_[i - 1] < p.m_[i],
            int_str(p.m_[i - 1] * p.m_[i - 1]) + " >= " + int_str(p.m_[i]));
    for (std::size_t i = 1; i <= len; ++i) {
        Int two_l;
        if (p.ell_[i - 1] > 4096) {
            add("2^l_" + std::to_string(i) + " > m_" + std::to_string(i), true);
            continue;
        }
        mpz_ui_pow_ui(two_l.get_mpz_t(), 2, p.ell_[i - 1].get_ui());
        add("2^l_" + std::to_string(i) + " > m_" + std::to_string(i), two_l > p.m_[i - 1],
            "2^" + int_str(p.ell_[i - 1]) + " <= " + int_str(p.m_[i - 1]));
    }
    add("n_0 = 0", p.n_[0] == 0, int_str(p.n_[0]));
    add("f_1 = 1", p.f_[0] == 1, int_str(p.f_[0]));
    for (std::size_t j = 1; j <= len; ++j) {
        Int lhs = p.ell_[j - 1] * (p.f_[j - 1] + 1);
        add("l_" + std::to_string(j) + "(f_" + std::to_string(j) + "+1) < n_" + std::to_string(j), lhs < p.n_[j],
            int_str(lhs) + " >= " + int_str(p.n_[j]));
    }
    for (std::size_t j = 2; j <= len; ++j) {
        Int fj = compute_f(j, p);
        add("f_" + std::to_string(j) + " = max sum", fj == p.f_[j - 1],
            "expected " + int_str(fj) + ", got " + int_str(p.f_[j - 1]));
    }
    for (std::size_t i = 1; i < len; ++i)
        add("l_" + std::to_string(i) + " <= l_" + std::to_string(i + 1), p.ell_[i - 1] <= p.ell_[i]);
    for (std::size_t i = 0; i < len; ++i)
        add("n_" + std::to_string(i) + " < n_" + std::to_string(i + 1), p.n_[i] < p.n_[i + 1]);
    // Facts the later estimates lean on.
    add("derived: 123/m_1 < 1/2", p.m_[0] > 246, int_str(p.m_[0]));
    if (len >= 3) {
        Int m14 = p.m_[0] * p.m_[0] * p.m_[0] * p.m_[0];
        add("derived: m_3 >= m_1^4", p.m_[2] >= m14, int_str(p.m_[2]) + " < " + int_str(m14));
    }
    if (len >= 2)
        add("derived: m_1^4 >= 496", p.m_[0] * p.m_[0] * p.m_[0] * p.m_[0] >= 496);
    return r;
}

}  // namespace params

}  // namespace hi
