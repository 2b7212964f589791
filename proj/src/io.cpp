#include "hi/io.hpp"

#include <fstream>
#include <sstream>

namespace hi::io {

using nlohmann::json;

namespace {

json header(const std::string& kind) { return {{"schema_version", kSchemaVersion}, {"kind", kind}}; }

json int_list(const std::vector<Int>& xs) {
    json a = json::array();
    for (const auto& x : xs) a.push_back(int_str(x));
    return a;
}

std::vector<Int> int_list_from(const json& a) {
    std::vector<Int> out;
    for (const auto& e : a) out.push_back(parse_int(e.get<std::string>()));
    return out;
}

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed ") + what + " JSON: " + e.what());
    } catch (const std::logic_error& e) {
        throw Error(std::string("malformed ") + what + " JSON: bad number " + e.what());
    }
}

}  // namespace

void require_kind(const json& j, const std::string& kind) {
    if (!j.is_object() || !j.contains("kind") || j.at("kind") != kind)
        throw Error("expected a document of kind \"" + kind + "\"");
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
        throw Error("unsupported schema_version");
}

json params_to_json(const ParameterSystem& p) {
    json j = header("params");
    j["mode"] = mode_name(p.mode);
    j["m"] = int_list(p.m_);
    j["ell"] = int_list(p.ell_);
    j["f"] = int_list(p.f_);
    j["n"] = int_list(p.n_);
    return j;
}

ParameterSystem params_from_json(const json& j) {
    require_kind(j, "params");
    return guarded("params", [&] {
        ParameterSystem p;
        p.mode = parse_mode(j.at("mode").get<std::string>());
        p.m_ = int_list_from(j.at("m"));
        p.ell_ = int_list_from(j.at("ell"));
        p.f_ = int_list_from(j.at("f"));
        p.n_ = int_list_from(j.at("n"));
        if (p.ell_.size() != p.m_.size() || p.f_.size() != p.m_.size() || p.n_.size() != p.m_.size() + 1)
            throw Error("params: inconsistent sequence lengths");
        if (p.n_.empty() || p.n_[0] != 0) throw Error("params: n must start with n_0 = 0");
        for (std::size_t i = 0; i < p.m_.size(); ++i) {
            if (p.m_[i] <= 1) throw Error("params: m_i must exceed 1");
            if (i > 0 && p.m_[i] <= p.m_[i - 1]) throw Error("params: m must be strictly increasing");
        }
        return p;
    });
}

json vector_to_json(const SparseVector& x) {
    json j = header("vector");
    json c = json::object();
    for (const auto& [k, v] : x.coords()) c[std::to_string(k)] = rat_str(v);
    j["coords"] = c;
    return j;
}

SparseVector vector_from_json(const json& j) {
    require_kind(j, "vector");
    return guarded("vector", [&] {
        SparseVector x;
        for (const auto& [k, v] : j.at("coords").items()) {
            std::int64_t pos = std::stoll(k);
            if (pos < 1) throw Error("vector: coordinates start at 1");
            x.set(pos, parse_rat(v.get<std::string>()));
        }
        return x;
    });
}

json sqrt_vector_to_json(const SqrtVector& x) {
    json j = header("sqrt_vector");
    json c = json::object();
    for (const auto& [k, v] : x.coords()) c[std::to_string(k)] = {{"square", rat_str(v.square)}, {"sign", v.sign}};
    j["coords"] = c;
    return j;
}

SqrtVector sqrt_vector_from_json(const json& j) {
    require_kind(j, "sqrt_vector");
    return guarded("sqrt_vector", [&] {
        SqrtVector x;
        for (const auto& [k, v] : j.at("coords").items()) {
            std::int64_t pos = std::stoll(k);
            if (pos < 1) throw Error("sqrt_vector: coordinates start at 1");
            Rat sq = parse_rat(v.at("square").get<std::string>());
            int sign = v.at("sign").get<int>();
            if (sq < 0 || (sign != 1 && sign != -1)) throw Error("sqrt_vector: bad coordinate");
            x.set(pos, sq, sign);
        }
        return x;
    });
}

SqrtVector any_vector_from_json(const json& j) {
    if (j.is_object() && j.contains("kind") && j.at("kind") == "vector")
        return SqrtVector::from_rational(vector_from_json(j));
    return sqrt_vector_from_json(j);
}

json blocks_to_json(const std::vector<SqrtVector>& blocks) {
    json j = header("blocks");
    j["blocks"] = json::array();
    for (const auto& b : blocks) j["blocks"].push_back(sqrt_vector_to_json(b));
    return j;
}

std::vector<SqrtVector> blocks_from_json(const json& j) {
    require_kind(j, "blocks");
    return guarded("blocks", [&] {
        std::vector<SqrtVector> out;
        for (const auto& b : j.at("blocks")) out.push_back(any_vector_from_json(b));
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].is_zero()) throw Error("blocks: zero block");
            if (i > 0 && out[i - 1].max_support() >= out[i].min_support())
                throw Error("blocks: blocks must be successive");
        }
        return out;
    });
}

json read_json(const std::filesystem::path& path) {
    std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": malformed JSON: " + e.what());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace hi::io
