#pragma once

#include "hi/averages.hpp"
#include "hi/normengine.hpp"
#include "hi/params.hpp"
#include "hi/trees.hpp"
#include "hi/vectors.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hi {

enum class Side { U, V };

struct YAverage {
    std::size_t index = 0;  // 1-based position in the interleaved list
    Side side = Side::U;
    Rat eps;
    int xi = 0;
    int round = 0;
    SqrtVector y;          // normalized average
    Rat raw_norm_sq;       // squared norm of the average before normalization
    Rat certified_lower;   // certificate value on the raw average
    std::string certificate;
};

struct Selection {
    bool ok = false;
    std::vector<std::size_t> chosen;  // positions into the input list
    std::vector<std::string> log;
};

struct GAverage {
    SqrtVector g;      // y / |y|
    SqrtVector y;      // the squared average of the selected averages
    Rat y_norm_sq;     // exact squared even norm of y
    NormCertificate certificate;  // best certificate found for g
    Int certificate_weight;
    Rat eps;
    bool meets_lower = false;  // |y| >= 1/m_{j0}
};

struct BundleCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct WitnessBundle {
    std::size_t j = 0;  // the odd index is 2j+1
    std::vector<YAverage> ys;
    std::vector<SparseVector> gs;
    std::vector<NormingTree> xstars;
    std::vector<SparseVector> zs;
    std::vector<std::int64_t> t;  // t_i = min supp z_i
    std::vector<Rat> beta_sq;     // squared coefficients of the R-average at t_i
    SparseVector plain;
    SparseVector alternating;
    NormingTree lower_functional;
    std::string registry_hash;
    std::string origin;
    std::vector<std::string> regime_notes;
    std::vector<BundleCheck> checks;

    bool all_pass() const;
    nlohmann::json to_json() const;
    static WitnessBundle from_json(const nlohmann::json& j);
};

namespace witness {

struct Options {
    std::optional<Rat> eps_override;    // eps for the averages y_j; default 1/m_{2j}
    std::optional<Rat> g_eps_override;  // eps for build_g; default 1/m_{j0}^2
    std::size_t budget = 200;           // support limit for exact norm computations
};

// y_1..y_count alternating between u (odd positions) and v (even positions); y_j is a smoothly
// normalized (eps_j, f_{2j}+1) squared average drawn after the previous y.
std::vector<YAverage> build_ys(const std::vector<SqrtVector>& u, const std::vector<SqrtVector>& v, std::size_t count,
                               const ParameterSystem& p, const Options& opt = {});

// Greedy subsequence meeting the tail condition on eps and the l1 growth condition.
// ok requires at least want chosen averages.
Selection select_subsequence(const std::vector<YAverage>& ys, const ParameterSystem& p, std::size_t want = 1);

// Normalized (1/m_{j0}^2, n_{j0}) squared average of the selected averages.
GAverage build_g(const std::vector<YAverage>& ys, std::size_t j0, const ParameterSystem& p, const SigmaRegistry& reg,
                 const Options& opt = {});

// The dependent chain with all conditions checked; throws Error whose message starts with
// "certificate weight mismatch", "sigma conflict" or "admissibility failure".
WitnessBundle build_chain(const std::vector<SqrtVector>& u, const std::vector<SqrtVector>& v, std::size_t j,
                          ParameterSystem& p, SigmaRegistry& reg, std::size_t length, const Options& opt = {});

// Bundle from chain vectors and functionals: z_i, t_i, the R-average coefficients, the two
// combinations and the lower functional; registers the chain prefixes.
WitnessBundle assemble(std::size_t j, const std::vector<SparseVector>& gs, const std::vector<NormingTree>& xstars,
                       const ParameterSystem& p, SigmaRegistry& reg, const std::string& origin);

// Independent re-validation of every bundle invariant.
std::vector<BundleCheck> check_bundle(const WitnessBundle& b, const ParameterSystem& p, const SigmaRegistry& reg);

// Linear toy system with a length-4 chain of two-point functionals.
ParameterSystem toy_params();
WitnessBundle toy_fixture(ParameterSystem& p, SigmaRegistry& reg);
// Paper-faithful system with a length-1 chain at the first coordinate.
ParameterSystem paper_params();
WitnessBundle paper_fixture(ParameterSystem& p, SigmaRegistry& reg);

struct PairReport {
    Rat identity_value;  // (1/m_{2j+1}) sum beta^2
    Rat expected;        // 1/m_{2j+1}
    Rat beta_sum;        // sum beta^2
    bool identity = false;
    Rat tree_lo, tree_hi;  // eval of the lower functional on the plain vector
    bool functional_valid = false;
    std::string validation;
    normengine::ClosureBounds plain;
    normengine::ClosureBounds alternating;
    bool exhaustive = false;
    bool separation = false;  // alternating upper < plain lower
    Rat ratio_sq;             // (plain lower / alternating upper)^2
    Rat target_sq;            // (517 / m_{2j+1})^2
    bool sign_symmetric = false;
    nlohmann::json to_json() const;
};

PairReport hi_pair(const WitnessBundle& b, const ParameterSystem& p, const SigmaRegistry& reg,
                   std::size_t budget = 200);

}  // namespace witness

// ---- estimate validators ----

enum class Verdict { Pass, Fail, Inconclusive, Invalid };
std::string verdict_name(Verdict v);

struct Hypothesis {
    std::string name;
    bool holds = true;
    bool regime = false;  // regime hypotheses downgrade FAIL to INCONCLUSIVE; others invalidate
    std::string detail;
};

struct EstimatePart {
    std::string name;
    Rat lhs_lo, lhs_hi;  // enclosure of the left side
    Rat rhs_lo, rhs_hi;  // enclosure of the right side
    bool holds = false;
    std::string detail;
};

struct EstimateResult {
    std::string estimate;
    std::string instance;
    Verdict verdict = Verdict::Invalid;
    std::vector<Hypothesis> hypotheses;
    std::vector<EstimatePart> parts;
    std::string detail;
    nlohmann::json to_json() const;
};

// Objects an estimate quantifies over; chain indices are 1-based.
struct EstimateInstance {
    std::string name;                  // instance label
    std::optional<NormingTree> functional;  // the single functional x*
    std::vector<NormingTree> members;  // a family (x*_l) of functionals
    std::vector<Rat> coeffs;           // coefficients of the family, or of the vectors
    std::vector<std::size_t> family;   // chain index set V (empty: all)
    std::optional<std::pair<std::size_t, std::size_t>> range;  // interval Q of chain indices
    std::size_t j0 = 0;                // reference index; 0 selects the default of the estimate
    nlohmann::json to_json() const;
    static EstimateInstance from_json(const nlohmann::json& j);
};

namespace estimates {

// Names: family_small, weight_gap, heavy_family, mixed_family, norming_weight, big_weight,
// odd_disjoint, odd_split, combined, separation.
const std::vector<std::string>& names();

EstimateResult validate(const std::string& estimate, const EstimateInstance& inst, const WitnessBundle& b,
                        const ParameterSystem& p, const SigmaRegistry& reg);

struct SuiteEntry {
    std::string estimate;
    EstimateInstance instance;
    bool negative = false;  // a deliberately broken hypothesis that must be detected
};

// Standard positive instances for a bundle plus the negative instances.
std::vector<SuiteEntry> standard_instances(const WitnessBundle& b, const ParameterSystem& p, SigmaRegistry& reg);

}  // namespace estimates

}  // namespace hi
