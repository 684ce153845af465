#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ctfbounds/data.hpp"
#include "ctfbounds/graph.hpp"
#include "ctfbounds/query.hpp"
#include "ctfbounds/scm.hpp"

namespace ctf {

// Symmetric Dirichlet prior per exogenous: concentration alpha_U spread over
// d_U atoms (per-atom shape alpha_U / d_U). d_U is the canonical cardinality
// or a user override.
struct PriorConfig {
    struct Entry {
        std::string exogenous;
        double alpha = 1.0;
        ExactCount d;
        long double alpha_over_d = 0.0L;  // per-atom shape
        long double d_approx = 0.0L;
    };
    std::vector<Entry> entries;  // diagram exogenous order

    // alpha_U = d_U (uniform over atoms). Requires materializable d_U.
    static PriorConfig flat(const CausalDiagram& d);
    // Explicit concentrations; omitted names default to alpha = 1.
    static PriorConfig with_alphas(const CausalDiagram& d,
                                   const std::map<std::string, double>& alphas);
};

enum class SamplerKind { Blocked, Collapsed };

struct ChainConfig {
    SamplerKind kind = SamplerKind::Blocked;
    uint64_t burnin = 500;
    uint64_t draws = 1;      // kept draws T per chain
    uint64_t thinning = 1;
    int chains = 1;
    uint64_t seed = 0;
    uint64_t mc_samples = 4096;               // per-draw eval when enumeration infeasible
    uint64_t enum_budget = kDefaultEnumBudget;
    uint64_t row_budget = 1'000'000;          // collapsed per-row option combinations
    bool fix_mu_response = false;             // pin mechanisms to the response parametrization
};

struct PosteriorRun {
    std::vector<double> draws;  // length draws * chains, concatenated by chain index
    std::vector<uint64_t> chain_seeds;
    ChainConfig config;
    std::vector<std::string> notes;
    double r_hat = std::numeric_limits<double>::quiet_NaN();
};

// --- blocked Gibbs -----------------------------------------------------------

// Fully materialized theta and mu plus one latent atom per (row, exogenous).
// Requires the joint atom domain and all mechanism tables within budget.
class BlockedSampler {
public:
    BlockedSampler(const Dataset& data, const PriorConfig& prior, uint64_t seed,
                   uint64_t enum_budget = kDefaultEnumBudget, bool fix_mu_response = false);

    // Conflict-free randomized start (random atoms behind a per-tuple
    // fallback), then mu and theta drawn from their complete conditionals.
    void init();

    void step_u();
    void step_mu();
    void step_theta();
    void sweep();

    // Current (theta, mu) draw as a canonical model.
    const CanonicalSCM& model() const { return model_; }
    CanonicalSCM& mutable_model() { return model_; }

    // Normalized conditional over joint atom states for one row (test hook).
    std::vector<double> row_weights(size_t row) const;

    const std::vector<uint64_t>& row_atoms(size_t row) const { return atoms_[row]; }
    std::vector<uint64_t> atom_counts(int exo) const;
    uint64_t joint_states() const { return joint_; }

    void check_invariants() const;

private:
    void weights_for_type(size_t type, std::vector<double>& w) const;

    const Dataset* data_;
    const CausalDiagram* d_;
    PriorConfig prior_;
    Rng rng_;
    bool fix_mu_;

    CanonicalSCM model_;
    std::vector<uint64_t> domain_;
    uint64_t joint_ = 1;

    struct RowType {
        std::vector<int> ivec;
        std::vector<int> values;
        std::vector<int> free_vars;       // not intervened
        std::vector<uint64_t> pa_index;   // per endogenous variable
        std::vector<size_t> rows;
    };
    std::vector<RowType> types_;
    std::vector<size_t> row_type_;
    std::vector<std::vector<uint64_t>> atoms_;  // per row, per exogenous

    std::vector<std::vector<uint8_t>> forced_;  // per endo var, per mu cell; rebuilt each mu step
};

// --- collapsed Gibbs ----------------------------------------------------------

// Parameters integrated out; state is the per-row atom assignment, per-atom
// occupancy and the value table forced by rows.
class CollapsedSampler {
public:
    CollapsedSampler(const Dataset& data, const PriorConfig& prior, uint64_t seed,
                     uint64_t row_budget = 1'000'000);

    // Every row starts with its own fresh atoms (conflict-free by construction).
    void init();

    void step_row(size_t row);
    void sweep();

    // Draws (theta, mu | atoms, data): occupied atoms get Gamma(alpha/d + n)
    // weights, the aggregated tail gets Gamma(alpha (d-K)/d); mu is forced on
    // seen keys and lazy-uniform elsewhere.
    CanonicalSCM finalize(Rng& rng) const;

    // Urn conditional for one row (test hook): options as (atoms per exo,
    // normalized probability). Atom value UINT64_MAX denotes "fresh".
    struct RowOption {
        std::vector<uint64_t> atoms;
        double prob = 0.0;
    };
    std::vector<RowOption> row_options(size_t row);

    size_t occupied_count(int exo) const;
    const std::vector<uint64_t>& row_atoms(size_t row) const { return atoms_[row]; }
    void check_invariants() const;

    // Moves a row onto explicit atom ids (state-preparation hook for tests).
    void reassign_row(size_t row, const std::vector<uint64_t>& atoms);

    static constexpr uint64_t kFresh = std::numeric_limits<uint64_t>::max();

private:
    struct Removed;
    void remove_row(size_t row);
    void restore_row(size_t row, const std::vector<uint64_t>& atoms);
    // Enumerates the joint option grid; fills option atom ids and unnormalized
    // weights. Returns total weight.
    double enumerate_options(size_t row, std::vector<std::vector<uint64_t>>& option_atoms,
                             std::vector<double>& weights) const;

    const Dataset* data_;
    const CausalDiagram* d_;
    PriorConfig prior_;
    Rng rng_;
    uint64_t row_budget_;

    std::vector<std::map<uint64_t, uint64_t>> occupancy_;  // per exo: atom -> count
    std::vector<uint64_t> next_atom_;
    std::vector<std::vector<uint64_t>> atoms_;  // per row, per exo

    struct ForcedVal {
        int value = 0;
        uint32_t refs = 0;
    };
    // per endo var: pa_index -> (atom tuple -> forced value)
    using TupleMap = std::map<std::vector<uint64_t>, ForcedVal>;
    std::vector<std::unordered_map<uint64_t, TupleMap>> forced_;

    std::vector<uint64_t> row_pa_;  // cached pa index per (row, endo var)
};

// Runs burn-in plus draws*thinning sweeps per chain, evaluating theta_ctf
// from each kept draw; chains run in parallel with derived seeds and merge
// by chain index.
PosteriorRun run_chain(const Dataset& data, const CtfQuery& query, const PriorConfig& prior,
                       const ChainConfig& config);

}  // namespace ctf
