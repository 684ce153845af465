#include <doctest.h>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/query.hpp"
#include "ctfbounds/rng.hpp"
#include "fixtures.hpp"

using namespace ctf;

TEST_CASE("simple probability query") {
    CtfQuery q = parse_query("P[Y@{X=0}=1]");
    CHECK(q.kind == CtfQuery::Kind::Probability);
    REQUIRE(q.terms.size() == 1);
    CHECK(q.terms[0].variable == "Y");
    CHECK(q.terms[0].intervention == std::map<std::string, int>{{"X", 0}});
    REQUIRE(q.body.size() == 1);
    CHECK(q.body[0].cmp == Cmp::Eq);
    CHECK(q.body[0].rhs == 1);
}

TEST_CASE("joint necessity-and-sufficiency query") {
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]");
    CHECK(q.terms.size() == 2);
    CHECK(q.body.size() == 2);
    CHECK(evaluate_event(q, {1, 0}) == 1.0);
    CHECK(evaluate_event(q, {1, 1}) == 0.0);
    CHECK(evaluate_event(q, {0, 0}) == 0.0);
}

TEST_CASE("linear threshold query") {
    CtfQuery q = parse_query("P[Z + X@{Z=0} + Y@{X=0} >= 14]");
    REQUIRE(q.terms.size() == 3);
    CHECK(q.terms[0].alias() == "Z");
    CHECK(q.terms[1].alias() == "X@{Z=0}");
    CHECK(q.terms[2].alias() == "Y@{X=0}");
    REQUIRE(q.body.size() == 1);
    CHECK(q.body[0].cmp == Cmp::Ge);
    CHECK(q.body[0].rhs == 14);
    CHECK(evaluate_event(q, {9, 5, 0}) == 1.0);  // boundary inclusive
    CHECK(evaluate_event(q, {9, 4, 0}) == 0.0);
}

TEST_CASE("expectation query evaluates the linear form") {
    CtfQuery q = parse_query("E[Y@{X=1}]");
    CHECK(q.kind == CtfQuery::Kind::Expectation);
    CHECK(evaluate_event(q, {3}) == 3.0);
}

TEST_CASE("strict comparators rewrite by integrality") {
    CtfQuery lt = parse_query("P[Y@{X=0} < 2]");
    REQUIRE(lt.body.size() == 1);
    CHECK(lt.body[0].cmp == Cmp::Le);
    CHECK(lt.body[0].rhs == 1);
    CtfQuery gt = parse_query("P[Y@{X=0} > 2]");
    CHECK(gt.body[0].cmp == Cmp::Ge);
    CHECK(gt.body[0].rhs == 3);
}

TEST_CASE("duplicate terms merge and constants fold to the right side") {
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=1} + 3 >= 4]");
    CHECK(q.terms.size() == 1);
    CHECK(q.body[1].rhs == 1);
}

TEST_CASE("coefficients parse with the k* form") {
    CtfQuery q = parse_query("E[2*Y@{X=1} - Z]");
    REQUIRE(q.expectation.coeffs.size() == 2);
    CHECK(q.expectation.coeffs[0].first == 2);
    CHECK(q.expectation.coeffs[1].first == -1);
    CHECK(evaluate_event(q, {3, 1}) == 5.0);
}

TEST_CASE("syntax errors carry a position") {
    CHECK_THROWS_WITH_AS(parse_query("P[Y@{X=0]"), doctest::Contains("position"), ValidationError);
    CHECK_THROWS_AS(parse_query("Q[Y=1]"), ValidationError);
    CHECK_THROWS_AS(parse_query("P[]"), ValidationError);
    CHECK_THROWS_AS(parse_query("P[Y@{Y=0}=1]"), ValidationError);  // self-intervention
}

TEST_CASE("diagram-checked parsing rejects unknown names and bad values") {
    auto d = fixtures::iv_diagram();
    CHECK_THROWS_WITH_AS(parse_query("P[Q@{X=0}=1]", d), doctest::Contains("unknown variable"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(parse_query("P[Y@{X=7}=1]", d), doctest::Contains("out of range"),
                         ValidationError);
    CHECK_NOTHROW(parse_query("P[Y@{X=1}=1]", d));
}

TEST_CASE("changing an unused alias value never changes the result") {
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Z=0]");
    // a third value beyond the referenced terms is ignored
    CHECK(evaluate_event(q, {1, 0, 5}) == evaluate_event(q, {1, 0, 7}));
}

TEST_CASE("serialize-parse round trip on generated queries") {
    Rng rng(20240817);
    std::vector<std::string> vars = {"A", "B", "C", "D"};
    for (int iter = 0; iter < 200; ++iter) {
        CtfQuery q;
        bool expectation = rng.below(2) == 0;
        q.kind = expectation ? CtfQuery::Kind::Expectation : CtfQuery::Kind::Probability;
        int n_terms = 1 + static_cast<int>(rng.below(3));
        for (int t = 0; t < n_terms; ++t) {
            CtfTerm term;
            term.variable = vars[rng.below(vars.size())];
            for (const auto& v : vars) {
                if (v != term.variable && rng.below(3) == 0) {
                    term.intervention[v] = static_cast<int>(rng.below(3));
                }
            }
            bool dup = false;
            for (const auto& existing : q.terms) dup |= existing == term;
            if (!dup) q.terms.push_back(std::move(term));
        }
        auto random_linear = [&]() {
            // every term referenced with a nonzero coefficient, so the parsed
            // term set matches the generated one
            LinearForm lin;
            for (size_t t = 0; t < q.terms.size(); ++t) {
                int coeff = static_cast<int>(rng.below(4)) - 2;
                if (coeff >= 0) ++coeff;
                lin.coeffs.emplace_back(coeff, static_cast<int>(t));
            }
            return lin;
        };
        if (expectation) {
            q.expectation = random_linear();
            q.expectation.constant = static_cast<int>(rng.below(7)) - 3;
        } else {
            int n_cmp = 1 + static_cast<int>(rng.below(2));
            for (int c = 0; c < n_cmp; ++c) {
                Comparison cmp;
                cmp.lhs = random_linear();
                cmp.cmp = static_cast<Cmp>(rng.below(3));
                cmp.rhs = static_cast<int>(rng.below(9)) - 4;
                q.body.push_back(std::move(cmp));
            }
        }
        CtfQuery parsed = parse_query(serialize_query(q));
        CHECK(parsed == q);
    }
}
