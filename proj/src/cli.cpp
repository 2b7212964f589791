#include "hi/cli.hpp"

#include "hi/io.hpp"
#include "hi/normengine.hpp"
#include "hi/schreier.hpp"
#include "hi/treegen.hpp"
#include "hi/witness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace hi::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json header(const std::string& kind) { return {{"schema_version", io::kSchemaVersion}, {"kind", kind}}; }

void emit(std::ostream& out, const json& j) { out << io::dump(j); }

// Paths read and written by one command, with redirections used by replay.
struct Session {
    std::map<std::string, std::string> redirect;
    bool env_fixed = false;
    std::optional<std::string> env_registry;

    json inputs = json::array();
    json outputs = json::array();
    std::optional<std::string> params_path;
    std::optional<std::string> registry_path;
    std::optional<json> registry_state;
    std::optional<std::string> seed;

    std::string actual(const std::string& path) const {
        auto it = redirect.find(path);
        return it == redirect.end() ? path : it->second;
    }

    std::optional<std::string> registry_env() const {
        if (env_fixed) return env_registry;
        if (const char* v = std::getenv(kRegistryEnv); v && *v) return std::string(v);
        return std::nullopt;
    }

    std::string read(const std::string& path) {
        auto text = io::read_text(actual(path));
        inputs.push_back({{"path", path}, {"digest", fnv1a_hex(text)}});
        return text;
    }

    json read_json(const std::string& path) {
        auto text = read(path);
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw Error("malformed JSON in " + path + ": " + e.what());
        }
    }

    void write(const std::string& path, const std::string& text) {
        io::write_text(actual(path), text);
        outputs.push_back({{"path", path}, {"digest", fnv1a_hex(text)}});
    }

    ParameterSystem load_params(const std::string& path) {
        params_path = path;
        return io::params_from_json(read_json(path));
    }
};

json registry_lines(const std::string& text) {
    json lines = json::array();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

// Advisory lock on the registry file for the lifetime of the object.
class FileLock {
public:
    FileLock(const std::string& path, bool exclusive) {
        fd_ = ::open(path.c_str(), exclusive ? O_RDWR : O_RDONLY);
        if (fd_ < 0) throw Error("cannot open registry file " + path);
        if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
            ::close(fd_);
            throw Error("cannot lock registry file " + path);
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

struct OpenRegistry {
    std::unique_ptr<FileLock> lock;
    std::unique_ptr<SigmaRegistry> reg;
    bool from_file = false;
};

// The explicit path, else the environment default. A named file must exist.
OpenRegistry open_registry(Session& s, ParameterSystem& p, const std::string& flag, bool required, bool exclusive) {
    std::optional<std::string> path;
    if (!flag.empty())
        path = flag;
    else
        path = s.registry_env();
    OpenRegistry r;
    if (!path) {
        if (required) throw Error(std::string("no registry: pass --registry or set ") + kRegistryEnv);
        r.reg = std::make_unique<SigmaRegistry>(p);
        return r;
    }
    auto real = s.actual(*path);
    if (!fs::is_regular_file(real)) throw Error("registry file not found: " + *path);
    r.lock = std::make_unique<FileLock>(real, exclusive);
    s.registry_path = *path;
    s.registry_state = registry_lines(io::read_text(real));
    try {
        r.reg = std::make_unique<SigmaRegistry>(p, real);
    } catch (const json::exception& e) {
        throw Error("malformed registry file " + *path + ": " + e.what());
    }
    r.from_file = true;
    return r;
}

// Registrations of the chain prefixes in order, as the bundle builder performed them.
void register_chain(const WitnessBundle& b, SigmaRegistry& reg) {
    for (std::size_t k = 1; k < b.xstars.size(); ++k) {
        std::vector<NormingTree> prefix(b.xstars.begin(), b.xstars.begin() + static_cast<long>(k));
        trees::sigma_register(prefix, reg);
    }
}

json checks_json(const std::vector<BundleCheck>& cs) {
    json a = json::array();
    for (const auto& c : cs) a.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return a;
}

std::int64_t parse_count(const std::string& tok) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(tok, &used);
    } catch (const std::exception&) {
        throw Error("not an integer: '" + tok + "'");
    }
    if (used != tok.size()) throw Error("not an integer: '" + tok + "'");
    return v;
}

FinSet parse_set(std::string s) {
    std::string clean;
    for (char c : s)
        if (c != '{' && c != '}' && c != ' ') clean += c;
    std::vector<std::int64_t> xs;
    if (clean.empty()) return {};
    std::istringstream in(clean);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        auto v = parse_count(tok);
        if (v < 1) throw Error("set elements must be positive: '" + tok + "'");
        xs.push_back(v);
    }
    return FinSet::from_unsorted(std::move(xs));
}

// ---- schreier ----

struct SchreierOpts {
    std::string set;
    int xi = 0;
    bool maximal = false;
    bool admissible = false;
};

int cmd_schreier(const SchreierOpts& o, std::ostream& out) {
    if (o.xi < 0) throw Error("xi must be nonnegative");
    auto j = header("schreier_report");
    j["xi"] = o.xi;
    if (o.admissible) {
        std::vector<FinSet> sets;
        std::istringstream in(o.set);
        std::string part;
        json arr = json::array();
        while (std::getline(in, part, ';')) {
            sets.push_back(parse_set(part));
            arr.push_back(sets.back().elems());
        }
        j["sets"] = arr;
        j["admissible"] = schreier::is_admissible(sets, o.xi);
    } else {
        auto f = parse_set(o.set);
        j["set"] = f.elems();
        j["member"] = schreier::is_member(f, o.xi);
        if (o.maximal) j["maximal"] = schreier::is_maximal(f, o.xi);
    }
    emit(out, j);
    return 0;
}

// ---- params ----

json param_report_json(const ParamReport& r) {
    json lines = json::array();
    for (const auto& l : r.lines) lines.push_back({{"name", l.name}, {"pass", l.pass}, {"witness", l.witness}});
    return lines;
}

struct ParamsOpts {
    std::string preset;
    std::string mode = "toy";
    std::size_t length = 0;
    std::string output;
    std::string file;
};

int cmd_params_generate(const ParamsOpts& o, Session& s, std::ostream& out) {
    ParameterSystem p;
    if (o.preset == "toy")
        p = witness::toy_params();
    else if (o.preset == "paper")
        p = witness::paper_params();
    else if (!o.preset.empty())
        throw Error("unknown preset: " + o.preset);
    else
        p = params::generate(parse_mode(o.mode), o.length == 0 ? 6 : o.length);
    auto doc = io::dump(io::params_to_json(p));
    auto rep = params::validate(p);
    if (o.output.empty()) {
        out << doc;
        return 0;
    }
    s.write(o.output, doc);
    auto j = header("params_generate_report");
    j["mode"] = mode_name(p.mode);
    j["length"] = p.length();
    j["validation"] = param_report_json(rep);
    j["validation_pass"] = rep.all_pass();
    emit(out, j);
    return 0;
}

int cmd_params_validate(const ParamsOpts& o, Session& s, std::ostream& out) {
    auto p = s.load_params(o.file);
    auto rep = params::validate(p);
    auto j = header("params_validate_report");
    j["mode"] = mode_name(p.mode);
    j["length"] = p.length();
    j["checks"] = param_report_json(rep);
    j["all_pass"] = rep.all_pass();
    emit(out, j);
    return rep.all_pass() ? 0 : 1;
}

// ---- registry ----

struct RegistryOpts {
    std::string file;
    std::string params;
    bool force = false;
};

int cmd_registry_init(const RegistryOpts& o, Session& s, std::ostream& out) {
    if (!o.force && fs::exists(s.actual(o.file))) throw Error("registry file exists: " + o.file + " (use --force)");
    s.write(o.file, "");
    auto j = header("registry_report");
    j["entries"] = 0;
    emit(out, j);
    return 0;
}

int cmd_registry_show(const RegistryOpts& o, Session& s, std::ostream& out) {
    auto p = s.load_params(o.params);
    auto r = open_registry(s, p, o.file, true, false);
    auto j = header("registry_report");
    json es = json::array();
    for (const auto& [k, w] : r.reg->entries()) es.push_back({{"seq", k}, {"weight", int_str(w)}});
    j["entries"] = es.size();
    j["sequences"] = es;
    j["snapshot_hash"] = r.reg->snapshot_hash();
    j["cursor"] = r.reg->cursor();
    emit(out, j);
    return 0;
}

// ---- norm ----

struct NormOpts {
    std::string vector;
    std::string params;
    std::string registry;
    std::string mode = "all";
    std::size_t budget = 200;
    std::string output;
};

struct NormResult {
    std::optional<NormCertificate> cert;
    std::optional<Rat> even_sq;
    std::optional<Rat> upper_sq;
    std::string digest;
};

NormResult compute_norm(const SqrtVector& x, const ParameterSystem& p, const SigmaRegistry& reg,
                        const std::string& mode, std::size_t budget) {
    NormResult r;
    SparseVector q;
    bool rational = x.to_rational(q);
    r.digest = rational ? normengine::digest(q) : normengine::digest(x);
    bool all = mode == "all";
    if (all || mode == "lower") r.cert = rational ? normengine::norm_lower(q, p, reg, budget) : normengine::norm_lower(x, p, reg, budget);
    if (all || mode == "even-exact")
        r.even_sq = normengine::norm_even_exact_sq(x, p, normengine::EvenMode::Interval, budget);
    if (all || mode == "upper") r.upper_sq = normengine::norm_upper_sq(x);
    return r;
}

// lower^2 <= even^2 <= l2^2 for whichever quantities are present.
bool sandwich(const NormResult& r) {
    std::vector<Rat> chain;
    if (r.cert) chain.push_back(r.cert->value * r.cert->value);
    if (r.even_sq) chain.push_back(*r.even_sq);
    if (r.upper_sq) chain.push_back(*r.upper_sq);
    for (std::size_t i = 1; i < chain.size(); ++i)
        if (chain[i - 1] > chain[i]) return false;
    return true;
}

json norm_doc(const json& vector, const NormResult& r, const std::string& mode, std::size_t budget) {
    auto j = header("norm_certificate");
    j["mode"] = mode;
    j["budget"] = budget;
    j["vector"] = vector;
    j["vector_digest"] = r.digest;
    if (r.cert) {
        j["certificate"] = r.cert->to_json();
        j["lower"] = rat_str(abs(r.cert->value));
    }
    if (r.even_sq) j["even_exact_sq"] = rat_str(*r.even_sq);
    if (r.upper_sq) j["upper_sq"] = rat_str(*r.upper_sq);
    j["sandwich"] = sandwich(r);
    return j;
}

int cmd_norm(const NormOpts& o, Session& s, std::ostream& out) {
    auto p = s.load_params(o.params);
    auto vj = s.read_json(o.vector);
    auto x = io::any_vector_from_json(vj);
    if (x.is_zero()) throw Error("the zero vector has no norming certificate");
    auto r = open_registry(s, p, o.registry, false, false);
    auto res = compute_norm(x, p, *r.reg, o.mode, o.budget);
    auto doc = norm_doc(vj, res, o.mode, o.budget);
    if (!o.output.empty()) s.write(o.output, io::dump(doc));
    emit(out, doc);
    return doc["sandwich"].get<bool>() ? 0 : 1;
}

// ---- witness ----

struct WitnessOpts {
    std::string params;
    std::string registry;
    std::string output;
    std::string fixture;
    std::string u, v;
    std::size_t j = 1;
    std::size_t length = 1;
    std::string eps;
    std::string g_eps;
    std::size_t budget = 200;
};

int cmd_witness_build(const WitnessOpts& o, Session& s, std::ostream& out) {
    auto p = s.load_params(o.params);
    std::vector<SqrtVector> u, v;
    if (o.fixture.empty()) {
        if (o.u.empty() || o.v.empty()) throw Error("witness build needs --fixture or both --u and --v");
        u = io::blocks_from_json(s.read_json(o.u));
        v = io::blocks_from_json(s.read_json(o.v));
    } else if (o.fixture != "toy" && o.fixture != "paper") {
        throw Error("unknown fixture: " + o.fixture);
    }
    witness::Options opt;
    if (!o.eps.empty()) opt.eps_override = parse_rat(o.eps);
    if (!o.g_eps.empty()) opt.g_eps_override = parse_rat(o.g_eps);
    opt.budget = o.budget;

    auto r = open_registry(s, p, o.registry, true, true);
    auto j = header("witness_report");
    WitnessBundle b;
    try {
        if (o.fixture == "toy")
            b = witness::toy_fixture(p, *r.reg);
        else if (o.fixture == "paper")
            b = witness::paper_fixture(p, *r.reg);
        else
            b = witness::build_chain(u, v, o.j, p, *r.reg, o.length, opt);
    } catch (const Error& e) {
        j["built"] = false;
        j["error"] = e.what();
        emit(out, j);
        return 1;
    }
    s.write(o.output, io::dump(b.to_json()));
    j["built"] = true;
    j["origin"] = b.origin;
    j["j"] = b.j;
    j["length"] = b.xstars.size();
    j["registry_hash"] = b.registry_hash;
    j["regime_notes"] = b.regime_notes;
    j["checks"] = checks_json(b.checks);
    j["all_pass"] = b.all_pass();
    emit(out, j);
    return b.all_pass() ? 0 : 1;
}

// ---- verify ----

struct VerifyOpts {
    std::string file;
    std::string params;
    std::string registry;
};

int verify_bundle(const json& doc, const VerifyOpts& o, Session& s, std::ostream& out) {
    if (o.params.empty()) throw Error("verifying a bundle needs --params");
    auto p = s.load_params(o.params);
    auto b = WitnessBundle::from_json(doc);
    auto r = open_registry(s, p, o.registry, false, false);
    if (!r.from_file) register_chain(b, *r.reg);
    auto checks = witness::check_bundle(b, p, *r.reg);
    bool all = !checks.empty();
    for (const auto& c : checks) all = all && c.pass;
    bool stored = checks.size() == b.checks.size();
    for (std::size_t i = 0; stored && i < checks.size(); ++i)
        stored = checks[i].name == b.checks[i].name && checks[i].pass == b.checks[i].pass &&
                 checks[i].detail == b.checks[i].detail;
    auto j = header("verify_report");
    j["target"] = "witness_bundle";
    j["checks"] = checks_json(checks);
    j["stored_checks_match"] = stored;
    j["pass"] = all && stored;
    emit(out, j);
    return all && stored ? 0 : 1;
}

int verify_certificate(const json& doc, const VerifyOpts& o, Session& s, std::ostream& out) {
    if (o.params.empty()) throw Error("verifying a certificate needs --params");
    auto p = s.load_params(o.params);
    auto r = open_registry(s, p, o.registry, false, false);
    auto x = io::any_vector_from_json(doc.at("vector"));
    std::string mode = doc.at("mode").get<std::string>();
    std::size_t budget = doc.at("budget").get<std::size_t>();
    if (mode != "lower" && mode != "even-exact" && mode != "upper" && mode != "all")
        throw Error("unknown norm mode in certificate: " + mode);
    auto j = header("verify_report");
    j["target"] = "norm_certificate";
    json checks = json::array();
    auto add = [&](const std::string& name, bool pass) { checks.push_back({{"name", name}, {"pass", pass}}); };

    SparseVector q;
    bool rational = x.to_rational(q);
    std::string digest = rational ? normengine::digest(q) : normengine::digest(x);
    add("vector digest", doc.at("vector_digest") == digest);
    if (doc.contains("certificate")) {
        auto c = NormCertificate::from_json(doc.at("certificate"));
        bool ok = rational ? normengine::verify_certificate(c, q, p, *r.reg)
                           : normengine::verify_certificate(c, x, p, *r.reg);
        add("certificate", ok);
        add("lower value", doc.contains("lower") && parse_rat(doc.at("lower").get<std::string>()) == abs(c.value));
    }
    // Recomputed quantities must agree exactly with the stored ones.
    auto fresh = compute_norm(x, p, *r.reg, mode, budget);
    if (fresh.even_sq)
        add("even exact", doc.contains("even_exact_sq") &&
                              parse_rat(doc.at("even_exact_sq").get<std::string>()) == *fresh.even_sq);
    if (fresh.upper_sq)
        add("upper", doc.contains("upper_sq") && parse_rat(doc.at("upper_sq").get<std::string>()) == *fresh.upper_sq);
    NormResult stored;
    if (doc.contains("certificate")) stored.cert = NormCertificate::from_json(doc.at("certificate"));
    stored.even_sq = fresh.even_sq;
    stored.upper_sq = fresh.upper_sq;
    add("sandwich", sandwich(stored) && doc.at("sandwich") == true);

    bool all = true;
    for (const auto& c : checks) all = all && c.at("pass").get<bool>();
    j["checks"] = checks;
    j["pass"] = all;
    emit(out, j);
    return all ? 0 : 1;
}

int cmd_verify(const VerifyOpts& o, Session& s, std::ostream& out) {
    auto doc = s.read_json(o.file);
    if (!doc.is_object() || !doc.contains("kind")) throw Error("not a bundle or certificate: " + o.file);
    try {
        if (doc.at("kind") == "witness_bundle") return verify_bundle(doc, o, s, out);
        if (doc.at("kind") == "norm_certificate") return verify_certificate(doc, o, s, out);
    } catch (const json::exception& e) {
        throw Error("malformed document " + o.file + ": " + e.what());
    }
    throw Error("not a bundle or certificate: " + o.file);
}

// ---- pair ----

struct PairOpts {
    std::string bundle;
    std::string params;
    std::string registry;
    std::size_t budget = 200;
};

// Human-readable square root of a nonnegative rational; never used in a gate.
std::string approx_root(const Rat& q) {
    std::ostringstream ss;
    ss << std::setprecision(6) << std::sqrt(q.get_d());
    return ss.str();
}

int cmd_pair(const PairOpts& o, Session& s, std::ostream& out) {
    auto p = s.load_params(o.params);
    auto b = WitnessBundle::from_json(s.read_json(o.bundle));
    auto r = open_registry(s, p, o.registry, false, false);
    if (!r.from_file) register_chain(b, *r.reg);
    auto j = header("pair_report");
    witness::PairReport rep;
    try {
        rep = witness::hi_pair(b, p, *r.reg, o.budget);
    } catch (const Error& e) {
        j["error"] = e.what();
        j["pass"] = false;
        emit(out, j);
        return 1;
    }
    // Separation gates only when the closure enumeration is exhaustive.
    bool pass = rep.identity && rep.functional_valid && (!rep.exhaustive || rep.separation);
    j["pair"] = rep.to_json();
    j["ratio_approx"] = approx_root(rep.ratio_sq);
    j["target_approx"] = approx_root(rep.target_sq);
    j["pass"] = pass;
    emit(out, j);
    return pass ? 0 : 1;
}

// ---- suite ----

struct SuiteOpts {
    std::vector<std::string> estimates{"all"};
    std::string params;
    std::uint64_t seed = 1;
    std::size_t count = 20;
    std::size_t budget = 200;
};

const std::vector<std::string>& random_checks() {
    static const std::vector<std::string> names{"upper_l2", "asymptotic"};
    return names;
}

json estimate_block(const ParameterSystem& p0, const std::set<std::string>& wanted, bool& ok) {
    auto p = p0;
    SigmaRegistry reg(p);
    auto b = p.mode == Mode::PaperFaithful ? witness::paper_fixture(p, reg) : witness::toy_fixture(p, reg);
    json rows = json::array();
    for (const auto& e : estimates::standard_instances(b, p, reg)) {
        if (!wanted.count(e.estimate)) continue;
        auto r = estimates::validate(e.estimate, e.instance, b, p, reg);
        bool named = false;
        for (const auto& h : r.hypotheses) named = named || (h.regime && !h.holds);
        bool good = e.negative ? r.verdict == Verdict::Invalid
                               : r.verdict == Verdict::Pass || (r.verdict == Verdict::Inconclusive && named);
        ok = ok && good;
        rows.push_back({{"estimate", e.estimate},
                        {"instance", e.instance.name},
                        {"negative", e.negative},
                        {"verdict", verdict_name(r.verdict)},
                        {"ok", good},
                        {"result", r.to_json()}});
    }
    return rows;
}

json random_block(const ParameterSystem& p0, const std::set<std::string>& wanted, std::uint64_t seed,
                  std::size_t count, std::size_t budget, bool& ok) {
    auto p = p0;
    SigmaRegistry reg(p);
    std::mt19937_64 rng(seed);
    json res = json::object();
    std::size_t up_pass = 0, as_pass = 0;
    json up_fail = json::array(), as_fail = json::array();
    for (std::size_t it = 0; it < count; ++it) {
        std::size_t n = 1 + rng() % 4;
        std::int64_t pos = static_cast<std::int64_t>(n + rng() % 3);
        std::vector<SparseVector> blocks;
        std::vector<Rat> a;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = treegen::random_vector(rng, pos, pos + 3, 6);
            if (x.is_zero()) x = SparseVector::unit(pos);
            pos = x.max_support() + 1;
            blocks.push_back(x);
            long num = static_cast<long>(rng() % 13) - 6;
            if (i == 0 && num == 0) num = 1;
            a.push_back(frac(num, 1 + static_cast<long>(rng() % 3)));
        }
        if (wanted.count("upper_l2")) {
            std::vector<SqrtVector> sb;
            for (const auto& x : blocks) sb.push_back(SqrtVector::from_rational(x));
            auto r = normengine::check_upper_l2(sb, a, p, budget);
            if (r.pass)
                ++up_pass;
            else
                up_fail.push_back({{"instance", it}, {"detail", r.str()}});
        }
        if (wanted.count("asymptotic")) {
            // Integer tuples with a square sum give a rational unit direction, so the functional is exact.
            static const std::vector<std::vector<long>> tuples{{1}, {3, 4}, {2, 3, 6}, {2, 4, 5, 6}};
            std::vector<Rat> ua;
            long scale = 1 + static_cast<long>(rng() % 5);
            for (long c : tuples[n - 1]) ua.push_back(frac(rng() % 2 ? c * scale : -c * scale, 1));
            auto r = normengine::check_asymptotic(blocks, ua, p, reg, budget);
            if (r.pass())
                ++as_pass;
            else
                as_fail.push_back({{"instance", it}, {"lower", r.lower.str()}, {"upper", r.upper.str()}});
        }
    }
    if (wanted.count("upper_l2")) {
        res["upper_l2"] = {{"instances", count}, {"pass", up_pass}, {"failures", up_fail}};
        ok = ok && up_fail.empty();
    }
    if (wanted.count("asymptotic")) {
        res["asymptotic"] = {{"instances", count}, {"pass", as_pass}, {"failures", as_fail}};
        ok = ok && as_fail.empty();
    }
    return res;
}

int cmd_suite(const SuiteOpts& o, Session& s, std::ostream& out) {
    std::set<std::string> wanted;
    for (const auto& n : o.estimates) {
        if (n == "all") {
            wanted.insert(estimates::names().begin(), estimates::names().end());
            wanted.insert(random_checks().begin(), random_checks().end());
            continue;
        }
        bool known = std::find(estimates::names().begin(), estimates::names().end(), n) != estimates::names().end() ||
                     std::find(random_checks().begin(), random_checks().end(), n) != random_checks().end();
        if (!known) throw Error("unknown estimate name: " + n);
        wanted.insert(n);
    }
    s.seed = std::to_string(o.seed);
    std::vector<std::pair<std::string, ParameterSystem>> systems;
    if (o.params.empty()) {
        systems.emplace_back("toy", witness::toy_params());
        systems.emplace_back("paper_faithful", witness::paper_params());
    } else {
        auto p = s.load_params(o.params);
        systems.emplace_back(mode_name(p.mode), p);
    }
    bool ok = true;
    json blocks = json::array();
    for (const auto& [label, p] : systems) {
        json blk = {{"params", label}};
        try {
            blk["estimates"] = estimate_block(p, wanted, ok);
        } catch (const Error& e) {
            throw Error("cannot build the " + label + " fixture: " + e.what());
        }
        blk["random"] = random_block(p, wanted, o.seed, o.count, o.budget, ok);
        blocks.push_back(blk);
    }
    auto j = header("suite_report");
    j["seed"] = std::to_string(o.seed);
    j["count"] = o.count;
    j["systems"] = blocks;
    j["all_ok"] = ok;
    emit(out, j);
    return ok ? 0 : 1;
}

// ---- dispatch ----

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, Session& s);

int cmd_replay(const std::string& manifest_path, std::ostream& out, std::ostream& err);

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, Session& s) {
    CLI::App app{"Exact finite-scale constructions for an asymptotic-l2 hereditarily indecomposable space", "hi"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    std::function<int()> action;

    SchreierOpts so;
    auto* sch = app.add_subcommand("schreier", "Schreier family membership, maximality or admissibility");
    sch->add_option("set", so.set, "set such as {1,2,3}; with --admissible, sets separated by ';'")->required();
    sch->add_option("xi", so.xi, "family index")->required();
    sch->add_flag("--maximal", so.maximal, "also report maximality");
    sch->add_flag("--admissible", so.admissible, "treat the argument as a list of sets");
    sch->callback([&] { action = [&] { return cmd_schreier(so, out); }; });

    ParamsOpts po;
    auto* par = app.add_subcommand("params", "parameter files");
    par->require_subcommand(1);
    auto* gen = par->add_subcommand("generate", "write a parameter file");
    gen->add_option("--preset", po.preset, "toy or paper")->check(CLI::IsMember({"toy", "paper"}));
    gen->add_option("--mode", po.mode, "toy or paper_faithful")->check(CLI::IsMember({"toy", "paper_faithful"}));
    gen->add_option("--length", po.length, "number of indices");
    gen->add_option("-o,--output", po.output, "output file (default: stdout)");
    gen->callback([&] { action = [&] { return cmd_params_generate(po, s, out); }; });
    auto* val = par->add_subcommand("validate", "check a parameter file against its mode's rules");
    val->add_option("file", po.file)->required();
    val->callback([&] { action = [&] { return cmd_params_validate(po, s, out); }; });

    RegistryOpts ro;
    auto* regc = app.add_subcommand("registry", "sigma registry files");
    regc->require_subcommand(1);
    auto* rinit = regc->add_subcommand("init", "create an empty registry file");
    rinit->add_option("file", ro.file)->required();
    rinit->add_flag("--force", ro.force, "overwrite an existing file");
    rinit->callback([&] { action = [&] { return cmd_registry_init(ro, s, out); }; });
    auto* rshow = regc->add_subcommand("show", "list registry entries");
    rshow->add_option("file", ro.file)->required();
    rshow->add_option("--params", ro.params)->required();
    rshow->callback([&] { action = [&] { return cmd_registry_show(ro, s, out); }; });

    NormOpts no;
    auto* nrm = app.add_subcommand("norm", "norm bounds with a certificate");
    nrm->add_option("vector", no.vector)->required();
    nrm->add_option("--params", no.params)->required();
    nrm->add_option("--registry", no.registry, std::string("registry file (default: $") + kRegistryEnv + ")");
    nrm->add_option("--mode", no.mode)->check(CLI::IsMember({"lower", "even-exact", "upper", "all"}));
    nrm->add_option("--budget", no.budget, "support limit for exact computations");
    nrm->add_option("-o,--output", no.output, "certificate file");
    nrm->callback([&] { action = [&] { return cmd_norm(no, s, out); }; });

    WitnessOpts wo;
    VerifyOpts vo;
    auto* wit = app.add_subcommand("witness", "dependent sequence bundles");
    wit->require_subcommand(1);
    auto* wb = wit->add_subcommand("build", "build and check a bundle");
    wb->add_option("--params", wo.params)->required();
    wb->add_option("--registry", wo.registry, std::string("registry file (default: $") + kRegistryEnv + ")");
    wb->add_option("-o,--output", wo.output)->required();
    wb->add_option("--fixture", wo.fixture, "toy or paper");
    wb->add_option("--u", wo.u, "u blocks file");
    wb->add_option("--v", wo.v, "v blocks file");
    wb->add_option("--j", wo.j, "odd index is 2j+1");
    wb->add_option("--length", wo.length, "chain length");
    wb->add_option("--eps", wo.eps, "eps for the averages");
    wb->add_option("--g-eps", wo.g_eps, "eps for the g averages");
    wb->add_option("--budget", wo.budget);
    wb->callback([&] { action = [&] { return cmd_witness_build(wo, s, out); }; });
    auto* wv = wit->add_subcommand("verify", "re-check a bundle file");
    wv->add_option("file", vo.file)->required();
    wv->add_option("--params", vo.params)->required();
    wv->add_option("--registry", vo.registry);
    wv->callback([&] { action = [&] { return cmd_verify(vo, s, out); }; });

    auto* ver = app.add_subcommand("verify", "re-check a bundle or certificate file");
    ver->add_option("file", vo.file)->required();
    ver->add_option("--params", vo.params);
    ver->add_option("--registry", vo.registry);
    ver->callback([&] { action = [&] { return cmd_verify(vo, s, out); }; });

    PairOpts pp;
    auto* pr = app.add_subcommand("pair", "identity and separation report for a bundle");
    pr->add_option("bundle", pp.bundle)->required();
    pr->add_option("--params", pp.params)->required();
    pr->add_option("--registry", pp.registry);
    pr->add_option("--budget", pp.budget);
    pr->callback([&] { action = [&] { return cmd_pair(pp, s, out); }; });

    SuiteOpts su;
    auto* st = app.add_subcommand("suite", "estimate validators and random norm estimates");
    st->add_option("--estimates", su.estimates, "all or names")->delimiter(',');
    st->add_option("--params", su.params, "parameter file (default: toy and paper presets)");
    st->add_option("--seed", su.seed);
    st->add_option("--count", su.count, "random instances per system");
    st->add_option("--budget", su.budget);
    st->callback([&] { action = [&] { return cmd_suite(su, s, out); }; });

    std::string manifest;
    auto* rp = app.add_subcommand("replay", "rerun a manifest and compare outputs byte for byte");
    rp->add_option("manifest", manifest)->required();
    rp->callback([&] { action = [&] { return cmd_replay(manifest, out, err); }; });

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }
    try {
        return action();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    } catch (const json::exception& e) {
        err << "error: malformed input: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return 2;
}

std::atomic<int> replay_counter{0};

int cmd_replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
    auto m = io::read_json(manifest_path);
    io::require_kind(m, "run_manifest");
    std::vector<std::string> command = m.at("command").get<std::vector<std::string>>();
    if (!command.empty() && command.front() == "replay") throw Error("a manifest of a replay cannot be replayed");
    for (const auto& in : m.at("inputs")) {
        auto path = in.at("path").get<std::string>();
        if (fnv1a_hex(io::read_text(path)) != in.at("digest").get<std::string>())
            throw Error("input changed since recording: " + path);
    }

    auto dir = fs::temp_directory_path() /
               ("hi-replay-" + std::to_string(::getpid()) + "-" + std::to_string(replay_counter++));
    fs::create_directories(dir);
    Session inner;
    inner.env_fixed = true;
    if (m.at("env").at(kRegistryEnv).is_string()) inner.env_registry = m.at("env").at(kRegistryEnv).get<std::string>();
    if (m.at("registry_path").is_string()) {
        std::string text;
        for (const auto& l : m.at("registry_state")) text += l.get<std::string>() + "\n";
        auto tmp = (dir / "registry.jsonl").string();
        io::write_text(tmp, text);
        inner.redirect[m.at("registry_path").get<std::string>()] = tmp;
    }
    std::size_t k = 0;
    for (const auto& o : m.at("outputs"))
        inner.redirect[o.at("path").get<std::string>()] = (dir / ("output-" + std::to_string(k++))).string();

    std::ostringstream o, e;
    int code = dispatch(command, o, e, inner);

    auto rep = header("replay_report");
    bool same = true;
    rep["exit_code"] = {{"recorded", m.at("exit_code")}, {"replayed", code}};
    same = same && m.at("exit_code") == code;
    auto sd = fnv1a_hex(o.str());
    rep["stdout"] = {{"recorded", m.at("stdout_digest")}, {"replayed", sd}};
    same = same && m.at("stdout_digest") == sd;
    json outs = json::array();
    for (const auto& rec : m.at("outputs")) {
        auto path = rec.at("path").get<std::string>();
        std::string got = "missing";
        if (fs::exists(inner.actual(path))) got = fnv1a_hex(io::read_text(inner.actual(path)));
        outs.push_back({{"path", path}, {"recorded", rec.at("digest")}, {"replayed", got}});
        same = same && rec.at("digest") == got;
    }
    rep["outputs"] = outs;
    if (m.at("registry_path").is_string()) {
        auto got = fnv1a_hex(io::read_text(inner.actual(m.at("registry_path").get<std::string>())));
        rep["registry_after"] = {{"recorded", m.at("registry_after_digest")}, {"replayed", got}};
        same = same && m.at("registry_after_digest") == got;
    }
    rep["tool_version"] = {{"recorded", m.at("tool_version")}, {"replayed", kToolVersion}};
    rep["identical"] = same;
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (!same) err << e.str();
    emit(out, rep);
    return same ? 0 : 1;
}

json manifest_json(const std::vector<std::string>& command, const Session& s, const std::string& stdout_text,
                   int code) {
    auto j = header("run_manifest");
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["params_path"] = s.params_path ? json(*s.params_path) : json(nullptr);
    j["registry_path"] = s.registry_path ? json(*s.registry_path) : json(nullptr);
    j["registry_state"] = s.registry_state ? *s.registry_state : json(nullptr);
    j["registry_after_digest"] =
        s.registry_path ? json(fnv1a_hex(io::read_text(s.actual(*s.registry_path)))) : json(nullptr);
    auto env = s.registry_env();
    j["env"] = {{kRegistryEnv, env ? json(*env) : json(nullptr)}};
    j["inputs"] = s.inputs;
    j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
    j["outputs"] = s.outputs;
    j["stdout_digest"] = fnv1a_hex(stdout_text);
    j["exit_code"] = code;
    return j;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> command;
    std::optional<std::string> manifest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--manifest") {
            if (i + 1 >= args.size()) {
                err << "error: --manifest needs a file\n";
                return 2;
            }
            manifest = args[++i];
        } else if (args[i].rfind("--manifest=", 0) == 0) {
            manifest = args[i].substr(11);
        } else {
            command.push_back(args[i]);
        }
    }
    Session s;
    std::ostringstream captured;
    int code = dispatch(command, captured, err, s);
    out << captured.str();
    if (manifest) {
        if (!command.empty() && command.front() == "replay") {
            err << "error: a replay cannot be recorded\n";
            return 2;
        }
        try {
            io::write_text(*manifest, io::dump(manifest_json(command, s, captured.str(), code)));
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return 2;
        }
    }
    return code;
}

}  // namespace hi::cli
