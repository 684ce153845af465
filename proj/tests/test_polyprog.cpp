#include <doctest.h>

#include <cmath>

#include "ctfbounds/bounds.hpp"
#include "ctfbounds/errors.hpp"
#include "ctfbounds/polyprog.hpp"
#include "ctfbounds/synth.hpp"
#include "fixtures.hpp"

using namespace ctf;

namespace {

EmpiricalDistribution uniform_counts(const CausalDiagram& d, const std::string& tag) {
    std::map<std::string, int> interv = parse_regime_tag(tag);
    std::vector<int> ivec(d.n_endogenous(), -1);
    for (const auto& [name, val] : interv) ivec[d.endo_index(name)] = val;
    EmpiricalDistribution e;
    e.tag = tag;
    uint64_t total_configs = 1;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        if (ivec[v] < 0) total_configs *= static_cast<uint64_t>(d.card(v));
    }
    // enumerate over free variables, one count each
    for (uint64_t k = 0; k < total_configs; ++k) {
        std::vector<int> values(ivec.begin(), ivec.end());
        uint64_t rest = k;
        for (int v = d.n_endogenous() - 1; v >= 0; --v) {
            if (ivec[v] >= 0) continue;
            values[v] = static_cast<int>(rest % static_cast<uint64_t>(d.card(v)));
            rest /= static_cast<uint64_t>(d.card(v));
        }
        e.counts[config_index(d, values)] = 1;
        ++e.total;
    }
    return e;
}

int count_data_rows(const PolynomialProgram& p, const std::string& prefix) {
    int n = 0;
    for (const auto& c : p.constraints) {
        if (c.tag.rfind(prefix, 0) == 0) ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("instrument reduction has the expected shape") {
    CausalDiagram d = fixtures::iv_diagram();
    CtfQuery q = parse_query("P[Y@{X=1}=1 & X=0 & Y=0]", d);
    PolynomialProgram p = reduce(d, q, {uniform_counts(d, "")});
    int theta_u1 = 0, theta_u2 = 0;
    for (const auto& v : p.variables) {
        if (v.group == "theta:U1") ++theta_u1;
        if (v.group == "theta:U2") ++theta_u2;
    }
    CHECK(theta_u1 == 2);
    CHECK(theta_u2 == 16);
    CHECK(count_data_rows(p, "obs:") == 8);
    int indicator_rows = 0, simplex_rows = 0;
    for (const auto& c : p.constraints) {
        if (c.tag.rfind("indicator:", 0) == 0) ++indicator_rows;
        if (c.tag.rfind("simplex-sum:", 0) == 0) ++simplex_rows;
    }
    CHECK(indicator_rows > 0);
    CHECK(simplex_rows == 2);
}

TEST_CASE("bow reduction yields degree-3 mu-mu-theta objective monomials") {
    CausalDiagram d = fixtures::bow_diagram();
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    PolynomialProgram p = reduce(d, q, {uniform_counts(d, "")});
    REQUIRE_FALSE(p.objective.empty());
    for (const auto& term : p.objective) {
        int degree = 0, binary = 0, simplex = 0;
        for (const auto& [var, pow] : term.m) {
            degree += pow;
            if (p.variables[var].kind == PolyVarKind::Binary) ++binary;
            if (p.variables[var].kind == PolyVarKind::Simplex) ++simplex;
        }
        CHECK(degree == 3);
        CHECK(binary == 2);
        CHECK(simplex == 1);
    }
}

TEST_CASE("mixed regimes emit both constraint families") {
    CausalDiagram d = fixtures::chained_diagram();
    CtfQuery q = parse_query("P[Z=0 & X@{Z=1}=1 & Y@{X=0}=1]", d);
    PolynomialProgram p =
        reduce(d, q, {uniform_counts(d, ""), uniform_counts(d, "Z=0"), uniform_counts(d, "Z=1")});
    CHECK(count_data_rows(p, "obs:") == 8);
    CHECK(count_data_rows(p, "do Z=0:") == 4);
    CHECK(count_data_rows(p, "do Z=1:") == 4);
}

TEST_CASE("emitted programs parse back structurally identical") {
    CausalDiagram d = fixtures::bow_diagram();
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    PolynomialProgram p = reduce(d, q, {uniform_counts(d, "")});
    std::string text = emit(p);
    PolynomialProgram back = parse_program(text);
    CHECK(emit(back) == text);
    CHECK(back.variables.size() == p.variables.size());
    CHECK(back.constraints.size() == p.constraints.size());
    CHECK(back.query_text == p.query_text);
}

TEST_CASE("empty-constraint programs serialize fine") {
    PolynomialProgram p;
    PolyVar v;
    v.name = "theta.U.0";
    v.group = "theta:U";
    v.kind = PolyVarKind::Simplex;
    p.variables.push_back(v);
    p.objective.push_back(PolyTerm{1.0, Monomial{{0, 1}}});
    std::string text = emit(p);
    PolynomialProgram back = parse_program(text);
    CHECK(back.constraints.empty());
    CHECK(back.objective.size() == 1);
}

TEST_CASE("emission is deterministic") {
    CausalDiagram d = fixtures::iv_diagram();
    CtfQuery q = parse_query("P[Y@{X=0}=1]", d);
    std::string a = emit(reduce(d, q, {uniform_counts(d, "")}));
    std::string b = emit(reduce(d, q, {uniform_counts(d, "")}));
    CHECK(a == b);
}

TEST_CASE("file evaluation matches in-memory evaluation") {
    CausalDiagram d = fixtures::bow_diagram();
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    PolynomialProgram p = reduce(d, q, {uniform_counts(d, "")});
    PolynomialProgram parsed = parse_program(emit(p));
    Rng rng(7);
    CanonicalSCM m = make_response_scm(d, rng.dirichlet(std::vector<double>(8, 1.0)));
    std::vector<double> x = encode_assignment(p, m);
    PolyEval in_memory = evaluate(p, x);
    PolyEval from_file = evaluate(parsed, encode_assignment(parsed, m));
    CHECK(std::fabs(in_memory.objective - from_file.objective) < 1e-12);
    CHECK(std::fabs(in_memory.max_violation - from_file.max_violation) < 1e-12);
}

TEST_CASE("semantic equivalence: evaluate-after-reduce equals enumeration") {
    struct Instance {
        CausalDiagram diagram;
        const char* query;
    };
    const Instance instances[] = {
        {fixtures::bow_diagram(), "P[Y@{X=1}=1 & Y@{X=0}=0]"},
        {fixtures::iv_diagram(), "P[Y@{X=1}=1 & X=0 & Y=0]"},
        {fixtures::frontdoor_diagram(), "P[Y@{X=0}=1]"},
        {fixtures::chained_diagram(), "P[Z=0 & X@{Z=1}=1 & Y@{X=0}=1]"},
    };
    for (const auto& inst : instances) {
        const CausalDiagram& d = inst.diagram;
        CtfQuery q = parse_query(inst.query, d);
        EmpiricalDistribution dummy = uniform_counts(d, "");
        PolynomialProgram p = reduce(d, q, {dummy});
        Rng rng(1001);
        for (int iter = 0; iter < 100; ++iter) {
            CanonicalSCM m = make_random_scm(d, rng);
            std::vector<double> x = encode_assignment(p, m);
            PolyEval eval = evaluate(p, x);
            double exact = ctf_probability_enumerate(m, q);
            INFO(inst.query << " iter " << iter);
            CHECK(std::fabs(eval.objective - exact) < 1e-9);

            // the largest residual over data rows equals the largest
            // | P_model(v) - P_data(v) | over configurations
            double expected_violation = 0.0;
            for (const auto& [config, count] : dummy.counts) {
                std::vector<int> values = config_values(d, config);
                std::string body;
                for (int v = 0; v < d.n_endogenous(); ++v) {
                    if (v) body += " & ";
                    body += d.endogenous(v).name + "=" + std::to_string(values[v]);
                }
                double model_p = ctf_probability_enumerate(m, parse_query("P[" + body + "]", d));
                expected_violation = std::max(
                    expected_violation,
                    std::fabs(model_p - static_cast<double>(count) / static_cast<double>(dummy.total)));
            }
            CHECK(std::fabs(eval.max_violation - expected_violation) < 1e-9);
        }
    }
}

TEST_CASE("zeroed indicator groups violate their sum row by one") {
    CausalDiagram d = fixtures::bow_diagram();
    CtfQuery q = parse_query("P[Y@{X=0}=1]", d);
    PolynomialProgram p = reduce(d, q, {uniform_counts(d, "")});
    Rng rng(5);
    CanonicalSCM m = make_response_scm(d, rng.dirichlet(std::vector<double>(8, 1.0)));
    std::vector<double> x = encode_assignment(p, m);
    for (size_t i = 0; i < p.variables.size(); ++i) {
        if (p.variables[i].group == "mu:Y:x1:u3") x[i] = 0.0;
    }
    CHECK(evaluate(p, x).max_violation >= 1.0 - 1e-12);
}

TEST_CASE("local search brackets the exact bow bound") {
    SyntheticScm scm(ScmKind::Bow);
    Dataset data = scm.sample({{{}, 1000}}, 77);
    EmpiricalDistribution obs = empirical(data, "");
    CausalDiagram d = fixtures::bow_diagram();
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    BaselineBound lp = lp_exact_bound(d, q, {obs});
    PolynomialProgram p = reduce(d, q, {obs});
    ProgramSolution lo = local_solve(p, SolveDirection::Min, 40, 911);
    ProgramSolution hi = local_solve(p, SolveDirection::Max, 40, 912);
    CHECK(lo.max_violation < 1e-6);
    CHECK(hi.max_violation < 1e-6);
    CHECK(std::fabs(lo.objective - lp.lower) < 0.02);
    CHECK(std::fabs(hi.objective - lp.upper) < 0.02);
    // feasible local values can never escape the exact bound
    CHECK(lo.objective > lp.lower - 1e-6);
    CHECK(hi.objective < lp.upper + 1e-6);
}

TEST_CASE("pinned feasible sets recover identified values") {
    CausalDiagram d = fixtures::bow_diagram();
    EmpiricalDistribution pm;
    pm.tag = "";
    pm.total = 4;
    pm.counts[config_index(d, {1, 1})] = 4;
    CtfQuery q = parse_query("P[Y=1]", d);
    PolynomialProgram p = reduce(d, q, {pm});
    ProgramSolution lo = local_solve(p, SolveDirection::Min, 20, 31);
    ProgramSolution hi = local_solve(p, SolveDirection::Max, 20, 32);
    CHECK(std::fabs(lo.objective - 1.0) < 1e-6);
    CHECK(std::fabs(hi.objective - 1.0) < 1e-6);
}

TEST_CASE("more restarts never hurt and equal seeds replay") {
    CausalDiagram d = fixtures::bow_diagram();
    std::map<std::vector<int>, uint64_t> raw{{{0, 0}, 1}, {{0, 1}, 1}, {{1, 0}, 1}, {{1, 1}, 1}};
    EmpiricalDistribution obs;
    obs.tag = "";
    for (const auto& [vals, c] : raw) {
        obs.counts[config_index(d, vals)] = c;
        obs.total += c;
    }
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    PolynomialProgram p = reduce(d, q, {obs});
    ProgramSolution one = local_solve(p, SolveDirection::Max, 1, 55);
    ProgramSolution many = local_solve(p, SolveDirection::Max, 24, 55);
    CHECK(many.objective >= one.objective - 1e-12);
    ProgramSolution again = local_solve(p, SolveDirection::Max, 24, 55);
    CHECK(again.objective == many.objective);
    CHECK(again.assignment == many.assignment);
}
