#pragma once

#include "hi/core.hpp"
#include "hi/params.hpp"
#include "hi/vectors.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace hi {

struct DependentWitness;

// One node record (weight, index set, coefficient) plus its ordered children.
// Weight 0 marks a terminal node.
struct NormingTree {
    Int weight;
    FinSet iset;
    Rat gamma;
    std::vector<NormingTree> children;
    // Present on odd-weight nodes only.
    std::shared_ptr<const DependentWitness> witness;

    static NormingTree leaf(std::int64_t p, const Rat& gamma);
    // Root of the given weight over the union of the children's index sets.
    static NormingTree node(const Int& weight, const Rat& gamma, std::vector<NormingTree> children);

    bool terminal() const { return weight == 0; }
    std::size_t node_count() const;
    std::size_t depth() const;
};

// Certificate that an odd node's children come from a registered dependent chain.
struct DependentWitness {
    std::int64_t k = 0;
    std::int64_t L = 1;
    std::vector<NormingTree> extension;
};

// Child indices from the root; empty path is the root.
using NodePath = std::vector<std::size_t>;
std::string path_str(const NodePath& path);

struct ValidationFailure {
    std::string path;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFailure> failures;
    bool ok() const { return failures.empty(); }
    std::string str() const;
};

// Injective coding of successive tree sequences into even weights.
// Extends the referenced parameter system when it runs out of indices.
class SigmaRegistry {
public:
    explicit SigmaRegistry(ParameterSystem& params);
    // Loads existing entries from the JSON-lines file and appends new ones to it.
    SigmaRegistry(ParameterSystem& params, const std::filesystem::path& file);

    Int register_sequence(const std::vector<NormingTree>& seq);
    std::optional<Int> lookup(const std::vector<NormingTree>& seq) const;

    std::size_t size() const;
    std::vector<std::pair<std::string, Int>> entries() const;
    // FNV-1a over the ordered entries, hex.
    std::string snapshot_hash() const;
    const ParameterSystem& params() const { return *params_; }
    // Largest index whose weight has been assigned, 0 if none.
    std::size_t cursor() const;

private:
    void insert_loaded(const std::string& key, const Int& weight);

    ParameterSystem* params_;
    std::optional<std::filesystem::path> file_;
    mutable std::shared_mutex mu_;
    std::map<std::string, Int> map_;
    std::vector<std::pair<std::string, Int>> log_;
    std::size_t cursor_ = 0;  // largest index i with m_i assigned, 0 if none
};

struct NodeQuantities {
    Int m_of;
    Int n_of;
    Rat gamma_of;
};

struct DecompositionTerm {
    NodePath path;
    int cls = 0;  // 1, 2 or 3
    Rat lambda;
    SparseVector functional;
};

struct DecompositionCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Decomposition {
    std::vector<DecompositionTerm> terms;
    std::vector<DecompositionCheck> checks;
    bool all_pass() const;
};

struct Admissibility {
    Int p;
    bool admissible = false;
};

namespace trees {

// Depth-first (weight, iset, gamma) record; witnesses are not part of the key.
std::string canonical(const NormingTree& t);
std::string canonical(const std::vector<NormingTree>& seq);

// Structural equality on the canonical form.
bool same_tree(const NormingTree& a, const NormingTree& b);

ValidationReport validate(const NormingTree& t, const ParameterSystem& p, const SigmaRegistry& reg);

// Coefficient vector of x*_T; checks the structural invariants.
SparseVector functional(const NormingTree& t);
Rat eval(const NormingTree& t, const SparseVector& x);
std::pair<Rat, Rat> eval_bounds(const NormingTree& t, const SqrtVector& x, unsigned bits = 64);

// Nullopt is the empty tree.
std::optional<NormingTree> restrict(const NormingTree& t, const Interval& iv);
NormingTree negate(const NormingTree& t);
const NormingTree& at(const NormingTree& t, const NodePath& path);
NormingTree subtree(const NormingTree& t, const NodePath& path);

Int sigma_register(const std::vector<NormingTree>& seq, SigmaRegistry& reg);

NodeQuantities node_quantities(const NormingTree& t, const NodePath& path, const ParameterSystem& p);

// Branch cut of a tree with w(T) < m_j into the three classes, with the postconditions evaluated.
Decomposition decompose(const NormingTree& t, std::size_t j, const ParameterSystem& p);

Admissibility incomparable_admissibility(const NormingTree& t, const std::vector<NodePath>& nodes,
                                         const ParameterSystem& p);

// Rational coefficients with sum of squares at most 1, each within tol*|g| of the input.
std::vector<Rat> rationalize(const std::vector<double>& gammas, double tol);

// Sum over terminals of the squared x*_T coefficients.
Rat coefficient_l2_squared(const NormingTree& t);

nlohmann::json to_json(const NormingTree& t);
NormingTree from_json(const nlohmann::json& j);

}  // namespace trees

}  // namespace hi
