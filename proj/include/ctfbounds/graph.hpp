#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctfbounds/bignat.hpp"

namespace ctf {

struct EndogenousSpec {
    std::string name;
    int card = 0;                          // |Omega_V| >= 2
    std::vector<std::string> parents;      // endogenous parents, canonical order (topological position)
    std::vector<std::string> exo_parents;  // exogenous parents, exogenous-declaration order

    friend bool operator==(const EndogenousSpec&, const EndogenousSpec&) = default;
};

// Immutable after construction; all layout tables are precomputed so that
// evaluation-side code can index mechanism tables without string lookups.
//
// Index conventions used throughout:
//   - pa-configuration index: mixed radix over parents in canonical order,
//     last parent varying fastest (lexicographic enumeration of tuples);
//   - u_V-configuration index: mixed radix over exo parents in declaration
//     order, last varying fastest.
class CausalDiagram {
public:
    // Parses and validates the diagram file format (JSON object). Endogenous
    // variables declared without exogenous parents gain a dedicated fresh one.
    static CausalDiagram parse(const std::string& text);

    static CausalDiagram make(std::vector<EndogenousSpec> endogenous,
                              std::vector<std::string> exogenous,
                              std::unordered_map<std::string, uint64_t> exo_card_override = {});

    std::string serialize() const;

    int n_endogenous() const { return static_cast<int>(endo_.size()); }
    int n_exogenous() const { return static_cast<int>(exo_names_.size()); }
    const EndogenousSpec& endogenous(int i) const { return endo_[i]; }
    const std::vector<EndogenousSpec>& endogenous() const { return endo_; }
    const std::vector<std::string>& exogenous() const { return exo_names_; }

    int endo_index(const std::string& name) const;   // -1 when absent
    int exo_index(const std::string& name) const;    // -1 when absent
    bool has_endogenous(const std::string& name) const { return endo_index(name) >= 0; }

    int card(int v) const { return endo_[v].card; }

    // Endogenous indices in topological order (ties broken by declaration order).
    const std::vector<int>& topological_order() const { return topo_; }
    std::vector<std::string> topological_names() const;
    int topo_position(int v) const { return topo_pos_[v]; }

    const std::vector<int>& parent_indices(int v) const { return parent_idx_[v]; }
    const std::vector<int>& exo_parent_indices(int v) const { return exo_idx_[v]; }
    const std::vector<int>& children_of_exo(int u) const { return exo_children_[u]; }

    uint64_t pa_config_count(int v) const { return pa_count_[v]; }
    uint64_t pa_stride(int v, int parent_pos) const { return pa_stride_[v][parent_pos]; }

    // Number of response functions |Omega_PA_V -> Omega_V| = card^pa_config_count.
    ExactCount response_count(int v) const;

    const std::unordered_map<std::string, uint64_t>& exo_card_override() const {
        return override_;
    }

    friend bool operator==(const CausalDiagram& a, const CausalDiagram& b) {
        return a.endo_ == b.endo_ && a.exo_names_ == b.exo_names_ && a.override_ == b.override_;
    }

private:
    CausalDiagram() = default;
    void validate_and_finish();

    std::vector<EndogenousSpec> endo_;
    std::vector<std::string> exo_names_;
    std::unordered_map<std::string, uint64_t> override_;

    std::unordered_map<std::string, int> endo_lookup_;
    std::unordered_map<std::string, int> exo_lookup_;
    std::vector<int> topo_;
    std::vector<int> topo_pos_;
    std::vector<std::vector<int>> parent_idx_;
    std::vector<std::vector<int>> exo_idx_;
    std::vector<std::vector<int>> exo_children_;
    std::vector<uint64_t> pa_count_;
    std::vector<std::vector<uint64_t>> pa_stride_;
};

struct CComponent {
    std::vector<std::string> exogenous;   // declaration order
    std::vector<std::string> endogenous;  // declaration order
};

struct CComponentPartition {
    std::vector<CComponent> components;
    std::unordered_map<std::string, int> exo_component;
    std::unordered_map<std::string, int> endo_component;
};

// Maximal c-components: exogenous variables chained by shared children,
// endogenous set = union of the chained group's children.
CComponentPartition c_components(const CausalDiagram& d);

// Cardinality d_U = prod_{V in C(U)} |Omega_V|^{prod_{P in PA_V} |Omega_P|},
// exact integer arithmetic.
ExactCount exo_cardinality(const CausalDiagram& d, const std::string& exo_name);

// Override when present (user-declared latent cardinality), canonical value otherwise.
ExactCount effective_exo_cardinality(const CausalDiagram& d, const std::string& exo_name);

}  // namespace ctf
