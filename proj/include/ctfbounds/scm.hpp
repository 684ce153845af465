#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctfbounds/graph.hpp"
#include "ctfbounds/query.hpp"
#include "ctfbounds/rng.hpp"

namespace ctf {

inline constexpr uint64_t kDefaultEnumBudget = 10'000'000;

// Key of one mechanism-table entry: pa-configuration index plus the atom ids
// of the variable's exogenous parents (declaration order). Fixed-size so the
// sampler's hot loops never allocate.
struct MuKey {
    uint64_t pa = 0;
    uint32_t n_exo = 0;
    std::array<uint64_t, 6> atoms{};

    friend bool operator==(const MuKey& a, const MuKey& b) {
        if (a.pa != b.pa || a.n_exo != b.n_exo) return false;
        for (uint32_t i = 0; i < a.n_exo; ++i) {
            if (a.atoms[i] != b.atoms[i]) return false;
        }
        return true;
    }
};

struct MuKeyHash {
    size_t operator()(const MuKey& k) const {
        uint64_t h = 0x9e3779b97f4a7c15ull ^ k.pa;
        for (uint32_t i = 0; i < k.n_exo; ++i) {
            h ^= k.atoms[i] + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xff51afd7ed558ccdull;
        }
        return static_cast<size_t>(h ^ (h >> 33));
    }
};

using MuForcedMap = std::unordered_map<MuKey, int, MuKeyHash>;

// Exogenous distribution over occupied atoms plus an aggregated tail of
// unoccupied ones; tail selections act as fresh atoms with uniform responses.
struct AtomTable {
    std::vector<uint64_t> atom_ids;
    std::vector<double> probs;      // aligned with atom_ids
    double tail_mass = 0.0;
};

struct ThetaSpec {
    bool dense = true;
    std::vector<double> weights;  // dense mode: probability of atom i
    AtomTable atoms;              // sparse mode
};

// Response table for one endogenous variable. Dense mode is a flat array
// indexed by pa_index * u_count + u_index; lazy mode stores only entries
// forced by data, everything else is uniform-at-use, memoized per draw.
struct MuTable {
    bool dense = true;
    std::vector<int32_t> table;
    uint64_t u_count = 1;
    std::vector<uint64_t> u_stride;  // per exo parent, last varying fastest
    MuForcedMap forced;              // lazy mode
};

struct CanonicalSCM {
    const CausalDiagram* diagram = nullptr;
    std::vector<ThetaSpec> theta;  // per exogenous, diagram order
    std::vector<MuTable> mu;       // per endogenous, diagram order

    // Effective atom-domain size per exogenous (dense mode), used for
    // enumeration budgeting.
    std::vector<uint64_t> domain;
};

struct ExoAssignment {
    std::vector<uint64_t> atom;  // per exogenous, diagram order
};

// Per-draw evaluation state: memoized lazy-mu draws and fresh-atom ids for
// tail selections. One context spans one model draw; fresh-atom entries are
// cleared between independent exogenous samples by the evaluators.
class EvalContext {
public:
    explicit EvalContext(uint64_t seed, uint64_t fresh_base = (1ull << 62))
        : rng(seed), fresh_base_(fresh_base), next_fresh_(fresh_base) {}

    Rng rng;

    uint64_t fresh_atom() { return next_fresh_++; }
    bool is_fresh(uint64_t atom) const { return atom >= fresh_base_; }
    void reset_sample() { sample_memo_.clear(); }

    MuForcedMap persistent_memo_;
    MuForcedMap sample_memo_;

private:
    uint64_t fresh_base_;
    uint64_t next_fresh_;
};

// --- model construction -----------------------------------------------------

// Uniform theta, uniform-random dense mu; used by tests and as a base to edit.
CanonicalSCM make_random_scm(const CausalDiagram& d, Rng& rng, uint64_t budget = kDefaultEnumBudget);

// Response-function parametrization for diagrams with exactly one exogenous
// variable: atom u encodes one response index per endogenous variable
// (mixed radix, topological order, first variable least significant).
CanonicalSCM make_response_scm(const CausalDiagram& d, std::vector<double> theta,
                               uint64_t budget = kDefaultEnumBudget);

// Uniform theta variant of the above.
CanonicalSCM make_response_scm_uniform(const CausalDiagram& d, uint64_t budget = kDefaultEnumBudget);

// Decodes atom -> per-variable response index for make_response_scm models.
std::vector<uint64_t> response_indices_of_atom(const CausalDiagram& d, uint64_t atom);

void validate_scm(const CanonicalSCM& m);

std::string save_model(const CanonicalSCM& m);
// Parses a model file; the diagram is embedded. Caller owns the diagram via
// the returned pair (the model points into it).
struct LoadedModel {
    std::unique_ptr<CausalDiagram> diagram;
    CanonicalSCM model;
};
LoadedModel load_model(const std::string& text);

// --- response-function codec ------------------------------------------------

// Index <-> truth-table bijection: the output for the k-th pa-configuration
// (lexicographic) is the k-th base-card digit, least significant first.
int decode_response(int card, uint64_t pa_count, uint64_t index, uint64_t pa_index);
uint64_t encode_response(int card, const std::vector<int>& outputs);

// --- evaluation ---------------------------------------------------------------

// Mechanism output for variable v at (pa_index, exogenous atoms). ctx is
// required for lazy tables and for fresh atoms.
int mu_value(const CanonicalSCM& m, int v, uint64_t pa_index, const ExoAssignment& u,
             EvalContext* ctx);

// Potential response of all endogenous variables under do(intervention),
// written into out (size n_endogenous). intervention[v] = -1 means free.
void eval_all(const CanonicalSCM& m, const ExoAssignment& u, const std::vector<int>& intervention,
              std::vector<int>& out, EvalContext* ctx);

// Name-based wrapper returning only the requested targets.
std::map<std::string, int> potential_response(const CanonicalSCM& m, const ExoAssignment& u,
                                              const std::map<std::string, int>& intervention,
                                              const std::vector<std::string>& targets,
                                              EvalContext* ctx = nullptr);

// Exact summation over the joint exogenous domain.
// Requires dense theta and a joint state count within budget.
double ctf_probability_enumerate(const CanonicalSCM& m, const CtfQuery& q,
                                 uint64_t budget = kDefaultEnumBudget, EvalContext* ctx = nullptr);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    uint64_t samples = 0;
};

McEstimate ctf_probability_mc(const CanonicalSCM& m, const CtfQuery& q, uint64_t n, uint64_t seed);

struct SampledRow {
    std::map<std::string, int> intervention;
    std::vector<int> values;  // diagram order
};

std::vector<SampledRow> forward_sample(const CanonicalSCM& m,
                                       const std::map<std::string, int>& intervention, uint64_t n,
                                       uint64_t seed);

// Joint exogenous state count (saturating); enumeration is feasible when this
// fits the budget and all theta are dense.
uint64_t joint_domain_size(const CanonicalSCM& m);

// Draw one exogenous assignment from the model's theta.
ExoAssignment draw_exo(const CanonicalSCM& m, EvalContext& ctx);

}  // namespace ctf
