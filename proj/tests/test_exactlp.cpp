#include <doctest.h>

#include "ctfbounds/exactlp.hpp"

using namespace ctf;

TEST_CASE("rational arithmetic normalizes") {
    Rat half(1, 2);
    Rat third(1, 3);
    CHECK((half + third).to_string() == "5/6");
    CHECK((half - half).is_zero());
    CHECK((half * third).to_string() == "1/6");
    CHECK((half / third).to_string() == "3/2");
    CHECK(Rat(-2, 4).to_string() == "-1/2");
    CHECK(Rat(3, -6).to_string() == "-1/2");
    CHECK(Rat::from_double(0.25).to_string() == "1/4");
    CHECK(Rat::from_double(0.1) > Rat());
    CHECK(Rat(1, 3).to_double() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("simplex solves a feasible bounded program") {
    // max x0 + 2 x1 s.t. x0 + x1 <= 1, x >= 0
    LpProblem p;
    p.n_vars = 2;
    p.objective = {Rat(1), Rat(2)};
    LpConstraint c;
    c.coeffs = {Rat(1), Rat(1)};
    c.rel = LpRel::Le;
    c.rhs = Rat(1);
    p.constraints = {c};
    LpResult r = lp_solve(p, true);
    REQUIRE(r.status == LpResult::Status::Optimal);
    CHECK(r.objective == Rat(2));
    CHECK(r.solution[1] == Rat(1));
}

TEST_CASE("simplex reports infeasible systems") {
    // x0 = 2 with x0 <= 1
    LpProblem p;
    p.n_vars = 1;
    p.objective = {Rat(1)};
    LpConstraint eq;
    eq.coeffs = {Rat(1)};
    eq.rel = LpRel::Eq;
    eq.rhs = Rat(2);
    LpConstraint ub;
    ub.coeffs = {Rat(1)};
    ub.rel = LpRel::Le;
    ub.rhs = Rat(1);
    p.constraints = {eq, ub};
    LpResult r = lp_solve(p, false);
    CHECK(r.status == LpResult::Status::Infeasible);
    CHECK(r.max_violation > 0.5);
}

TEST_CASE("simplex detects unbounded directions") {
    LpProblem p;
    p.n_vars = 1;
    p.objective = {Rat(1)};
    LpResult r = lp_solve(p, true);
    CHECK(r.status == LpResult::Status::Unbounded);
}

TEST_CASE("degenerate equality systems with redundant rows still solve") {
    // x0 + x1 = 1 stated twice plus the marginal split
    LpProblem p;
    p.n_vars = 2;
    p.objective = {Rat(1), Rat()};
    auto eq = [](std::vector<Rat> c, Rat rhs) {
        LpConstraint con;
        con.coeffs = std::move(c);
        con.rel = LpRel::Eq;
        con.rhs = rhs;
        return con;
    };
    p.constraints = {eq({Rat(1), Rat(1)}, Rat(1)), eq({Rat(1), Rat(1)}, Rat(1)),
                     eq({Rat(1), Rat()}, Rat(1, 4))};
    LpResult lo = lp_solve(p, false);
    REQUIRE(lo.status == LpResult::Status::Optimal);
    CHECK(lo.objective == Rat(1, 4));
    LpResult hi = lp_solve(p, true);
    REQUIRE(hi.status == LpResult::Status::Optimal);
    CHECK(hi.objective == Rat(1, 4));
}

TEST_CASE("exact solutions on fractions stay exact") {
    // min x0 s.t. x0 + x1 = 1/3, x1 <= 1/7
    LpProblem p;
    p.n_vars = 2;
    p.objective = {Rat(1), Rat()};
    LpConstraint eq;
    eq.coeffs = {Rat(1), Rat(1)};
    eq.rel = LpRel::Eq;
    eq.rhs = Rat(1, 3);
    LpConstraint ub;
    ub.coeffs = {Rat(), Rat(1)};
    ub.rel = LpRel::Le;
    ub.rhs = Rat(1, 7);
    p.constraints = {eq, ub};
    LpResult r = lp_solve(p, false);
    REQUIRE(r.status == LpResult::Status::Optimal);
    CHECK(r.objective == Rat(1, 3) - Rat(1, 7));  // 4/21
    CHECK(r.objective.to_string() == "4/21");
}
