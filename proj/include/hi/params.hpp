#pragma once

#include "hi/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hi {

enum class Mode { PaperFaithful, Toy };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

// The sequences m_i, l_i, f_i (i >= 1) and n_i (i >= 0).
struct ParameterSystem {
    Mode mode = Mode::Toy;
    std::vector<Int> m_;    // m_[i-1] = m_i
    std::vector<Int> ell_;  // ell_[i-1] = l_i
    std::vector<Int> f_;    // f_[i-1] = f_i
    std::vector<Int> n_;    // n_[i] = n_i, n_[0] = 0

    std::size_t length() const { return m_.size(); }
    const Int& m(std::size_t i) const;
    const Int& ell(std::size_t i) const;
    const Int& f(std::size_t i) const;
    const Int& n(std::size_t i) const;

    // Index i with m_i == w, if any.
    std::optional<std::size_t> index_of_weight(const Int& w) const;
    bool is_even_weight(const Int& w) const;
    bool is_odd_weight(const Int& w) const;

    // n_i as a Schreier index, clamped.
    int schreier_n(std::size_t i) const;

    bool operator==(const ParameterSystem&) const = default;
};

struct Overrides {
    std::vector<Int> m, ell, f, n;
};

struct CheckLine {
    std::string name;
    bool pass = true;
    std::string witness;
    std::string str() const;
};

struct ParamReport {
    std::vector<CheckLine> lines;
    bool all_pass() const;
    bool passes(const std::string& name) const;
    std::string str() const;
};

namespace params {

ParameterSystem generate(Mode mode, std::size_t length, const std::optional<Overrides>& overrides = {});

// Maximum of sum rho_i n_i over rho with prod m_i^rho_i < m_j^3, i < j.
Int compute_f(std::size_t j, const ParameterSystem& prefix);

ParamReport validate(const ParameterSystem& p);

// Appends indices using the minimal rules until length() >= length.
void extend(ParameterSystem& p, std::size_t length);

// Smallest l with 2^l > m.
Int minimal_ell(const Int& m);

}  // namespace params

}  // namespace hi
