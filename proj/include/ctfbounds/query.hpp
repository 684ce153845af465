#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctfbounds/graph.hpp"

namespace ctf {

// One counterfactual term Y@{X=x,...}; an empty intervention is the factual
// variable. Interventions are kept sorted by variable name so that equal
// terms compare equal and aliases are canonical.
struct CtfTerm {
    std::string variable;
    std::map<std::string, int> intervention;

    std::string alias() const;
    friend bool operator==(const CtfTerm&, const CtfTerm&) = default;
};

// Linear form over term values: sum of coeff * term plus a constant.
struct LinearForm {
    std::vector<std::pair<int, int>> coeffs;  // (coefficient, term index)
    long long constant = 0;

    friend bool operator==(const LinearForm&, const LinearForm&) = default;
};

enum class Cmp { Eq, Le, Ge };

struct Comparison {
    LinearForm lhs;
    Cmp cmp = Cmp::Eq;
    long long rhs = 0;

    friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct CtfQuery {
    enum class Kind { Probability, Expectation };

    Kind kind = Kind::Probability;
    std::vector<CtfTerm> terms;            // deduplicated, first-appearance order
    std::vector<Comparison> body;          // Probability: conjunction of comparisons
    LinearForm expectation;                // Expectation: single linear form

    friend bool operator==(const CtfQuery&, const CtfQuery&) = default;
};

// Grammar:
//   query := "P[" conj "]" | "E[" lin "]"
//   conj  := cmp ("&" cmp)*
//   cmp   := lin ("=" | "<=" | ">=" | "<" | ">") int
//   lin   := [k "*"] term (("+" | "-") [k "*"] term)*
//   term  := IDENT [ "@{" IDENT "=" int ("," IDENT "=" int)* "}" ] | int
// Strict comparators are rewritten using integrality (a < b  =>  a <= b-1).
CtfQuery parse_query(const std::string& text);

// Validates variable names and value ranges against a diagram.
CtfQuery parse_query(const std::string& text, const CausalDiagram& diagram);

std::string serialize_query(const CtfQuery& q);

// Probability kind: 1.0 when the conjunction holds, else 0.0.
// Expectation kind: value of the linear form.
double evaluate_event(const CtfQuery& q, const std::vector<int>& term_values);

// Inclusive [lo, hi] range the query value can take: [0,1] for probabilities,
// the linear form's range over term domains for expectations.
std::pair<double, double> query_value_range(const CtfQuery& q, const CausalDiagram& diagram);

}  // namespace ctf
