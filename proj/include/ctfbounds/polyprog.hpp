#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctfbounds/data.hpp"
#include "ctfbounds/graph.hpp"
#include "ctfbounds/query.hpp"
#include "ctfbounds/scm.hpp"

namespace ctf {

enum class PolyVarKind { Simplex, Binary };

struct PolyVar {
    std::string name;   // e.g. "theta.U2.7", "mu.Y.x1.u3"
    std::string group;  // e.g. "theta:U2", "mu:Y:x1:u3"
    PolyVarKind kind = PolyVarKind::Simplex;
    int group_id = 0;
    int index_in_group = 0;
};

// Canonical monomial: factors sorted by variable id, powers >= 1.
using Monomial = std::vector<std::pair<int, int>>;

struct PolyTerm {
    double coeff = 0.0;
    Monomial m;
};

using Polynomial = std::vector<PolyTerm>;  // sorted by monomial, coefficients merged

enum class PolyRel { Eq, Le };

struct PolyConstraint {
    Polynomial poly;
    PolyRel rel = PolyRel::Eq;
    double rhs = 0.0;
    std::string tag;
};

struct PolynomialProgram {
    std::vector<PolyVar> variables;
    Polynomial objective;
    std::vector<PolyConstraint> constraints;
    std::string query_text;
    std::vector<std::string> regime_tags;

    int var_id(const std::string& name) const;  // -1 when absent
};

// Reduces (diagram, query, empirical regimes) to an explicit polynomial
// program: the objective expands the counterfactual probability over the
// joint latent domain; one equality row per (regime, configuration);
// indicator rows mu(1-mu)=0 keep mechanism variables 0/1 while the file
// stays consumable by continuous solvers.
PolynomialProgram reduce(const CausalDiagram& diagram, const CtfQuery& query,
                         const std::vector<EmpiricalDistribution>& regimes,
                         uint64_t budget = kDefaultEnumBudget);

// Deterministic serialization (stable ordering, byte-reproducible).
std::string emit(const PolynomialProgram& program);
void emit_file(const PolynomialProgram& program, const std::string& path);
PolynomialProgram parse_program(const std::string& text);

struct PolyEval {
    double objective = 0.0;
    double max_violation = 0.0;
};

PolyEval evaluate(const PolynomialProgram& program, const std::vector<double>& assignment);
PolyEval evaluate(const PolynomialProgram& program,
                  const std::map<std::string, double>& assignment);

// Assignment encoding a dense canonical model (theta weights; mu one-hot).
std::vector<double> encode_assignment(const PolynomialProgram& program, const CanonicalSCM& model);

struct ProgramSolution {
    std::vector<double> assignment;
    double objective = 0.0;
    double max_violation = 0.0;
    int restarts = 0;
};

enum class SolveDirection { Min, Max };

// Multi-start projected local search: exact LP steps over each simplex group
// (others fixed) alternate with greedy one-hot flips of the binary groups.
// Heuristic only; no optimality guarantee. Deterministic given seed.
ProgramSolution local_solve(const PolynomialProgram& program, SolveDirection direction,
                            int restarts, uint64_t seed);

}  // namespace ctf
