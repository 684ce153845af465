#include <doctest.h>

#include <set>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/graph.hpp"
#include "fixtures.hpp"

using namespace ctf;

TEST_CASE("parse accepts the instrument diagram") {
    CausalDiagram d = CausalDiagram::parse(fixtures::iv_diagram_json());
    CHECK(d.n_endogenous() == 3);
    CHECK(d.n_exogenous() == 2);
    CHECK(d.card(d.endo_index("X")) == 2);
    CHECK(d == fixtures::iv_diagram());
}

TEST_CASE("parse rejects cycles") {
    std::string text = R"({"endogenous":[
        {"name":"X","card":2,"parents":["Y"],"exo_parents":["U"]},
        {"name":"Y","card":2,"parents":["X"],"exo_parents":["U"]}],
        "exogenous":["U"]})";
    CHECK_THROWS_WITH_AS(CausalDiagram::parse(text), doctest::Contains("cycle"), ValidationError);
}

TEST_CASE("variable with no exogenous parent gains a fresh one") {
    std::string text = R"({"endogenous":[{"name":"Z","card":3}],"exogenous":[]})";
    CausalDiagram d = CausalDiagram::parse(text);
    REQUIRE(d.n_exogenous() == 1);
    CHECK(d.exogenous()[0] == "U_Z");
    CHECK(d.endogenous(0).exo_parents == std::vector<std::string>{"U_Z"});
}

TEST_CASE("parse validation errors are distinct") {
    CHECK_THROWS_WITH_AS(
        CausalDiagram::parse(R"({"endogenous":[{"name":"X","card":1}],"exogenous":[]})"),
        doctest::Contains("card"), ValidationError);
    CHECK_THROWS_WITH_AS(
        CausalDiagram::parse(
            R"({"endogenous":[{"name":"X","card":2,"parents":["Q"]}],"exogenous":[]})"),
        doctest::Contains("unknown name"), ValidationError);
    CHECK_THROWS_WITH_AS(
        CausalDiagram::parse(
            R"({"endogenous":[{"name":"X","card":2},{"name":"X","card":2}],"exogenous":[]})"),
        doctest::Contains("duplicate"), ValidationError);
    CHECK_THROWS_WITH_AS(
        CausalDiagram::parse(R"({"endogenous":[{"name":"X","card":2}],"unknown_key":1})"),
        doctest::Contains("unknown key"), ValidationError);
}

TEST_CASE("c-components of the reference diagrams") {
    auto comps_of = [](const CausalDiagram& d) {
        CComponentPartition p = c_components(d);
        std::set<std::set<std::string>> out;
        for (const auto& c : p.components) {
            out.insert(std::set<std::string>(c.endogenous.begin(), c.endogenous.end()));
        }
        return out;
    };
    CHECK(comps_of(fixtures::iv_diagram()) == std::set<std::set<std::string>>{{"Z"}, {"X", "Y"}});
    CHECK(comps_of(fixtures::chained_diagram()) ==
          std::set<std::set<std::string>>{{"X", "Y", "Z"}});
    CHECK(comps_of(fixtures::frontdoor_diagram()) ==
          std::set<std::set<std::string>>{{"X", "Y"}, {"W"}});
    CHECK(comps_of(fixtures::bow_diagram()) == std::set<std::set<std::string>>{{"X", "Y"}});

    CausalDiagram chain = CausalDiagram::make(
        {fixtures::endo("X", 2, {}, {"UX"}), fixtures::endo("Y", 2, {"X"}, {"UY"})}, {"UX", "UY"});
    CHECK(comps_of(chain) == std::set<std::set<std::string>>{{"X"}, {"Y"}});
}

TEST_CASE("latent cardinalities of the reference diagrams") {
    CHECK(exo_cardinality(fixtures::iv_diagram(), "U2").saturated == 16);
    CHECK(exo_cardinality(fixtures::iv_diagram(), "U1").saturated == 2);
    CHECK(exo_cardinality(fixtures::chained_diagram(), "U1").saturated == 32);
    CHECK(exo_cardinality(fixtures::chained_diagram(), "U2").saturated == 32);
    CHECK(exo_cardinality(fixtures::bow_diagram(), "U").saturated == 8);
    CHECK_THROWS_AS(exo_cardinality(fixtures::bow_diagram(), "NOPE"), ValidationError);
}

TEST_CASE("cardinality saturates past 64 bits but stays exact") {
    // card-10 chain: 10 * 10^10 * 10^10 = 10^21
    CausalDiagram d = fixtures::chained_diagram(10);
    ExactCount c = exo_cardinality(d, "U1");
    CHECK_FALSE(c.fits_u64);
    CHECK(c.exact.to_string() == "1000000000000000000000");
    CHECK(c.saturated == UINT64_MAX);
}

TEST_CASE("override wins over the canonical cardinality") {
    CausalDiagram d = CausalDiagram::make(
        {fixtures::endo("X", 2, {}, {"U"}), fixtures::endo("Y", 2, {"X"}, {"U"})}, {"U"},
        {{"U", 4}});
    CHECK(exo_cardinality(d, "U").saturated == 8);
    CHECK(effective_exo_cardinality(d, "U").saturated == 4);
}

TEST_CASE("topological order is deterministic with declaration-order ties") {
    CHECK(fixtures::iv_diagram().topological_names() == std::vector<std::string>{"Z", "X", "Y"});
    CHECK(fixtures::frontdoor_diagram().topological_names() ==
          std::vector<std::string>{"X", "W", "Y"});
    CausalDiagram isolated = CausalDiagram::make(
        {fixtures::endo("B", 2, {}, {"UB"}), fixtures::endo("A", 2, {}, {"UA"})}, {"UB", "UA"});
    CHECK(isolated.topological_names() == std::vector<std::string>{"B", "A"});
}

TEST_CASE("component endogenous sets partition all endogenous variables") {
    for (const CausalDiagram& d : {fixtures::iv_diagram(), fixtures::chained_diagram(),
                                   fixtures::frontdoor_diagram(), fixtures::bow_diagram()}) {
        CComponentPartition p = c_components(d);
        std::set<std::string> seen;
        size_t total = 0;
        for (const auto& c : p.components) {
            for (const auto& name : c.endogenous) {
                CHECK(seen.insert(name).second);
                ++total;
            }
        }
        CHECK(total == static_cast<size_t>(d.n_endogenous()));
    }
}

TEST_CASE("cardinality is declaration-order invariant and component-constant") {
    CausalDiagram a = fixtures::chained_diagram();
    CausalDiagram b = CausalDiagram::make({fixtures::endo("Z", 2, {}, {"U1"}),
                                           fixtures::endo("Y", 2, {"X"}, {"U1", "U2"}),
                                           fixtures::endo("X", 2, {"Z"}, {"U2"})},
                                          {"U2", "U1"});
    CHECK(exo_cardinality(a, "U1").exact == exo_cardinality(b, "U1").exact);
    CHECK(exo_cardinality(a, "U2").exact == exo_cardinality(a, "U1").exact);
}

TEST_CASE("serialized diagrams re-parse to the identical diagram") {
    for (const CausalDiagram& d : {fixtures::iv_diagram(), fixtures::chained_diagram(10),
                                   fixtures::frontdoor_diagram()}) {
        CausalDiagram again = CausalDiagram::parse(d.serialize());
        CHECK(again == d);
        CHECK(again.serialize() == d.serialize());
    }
    CausalDiagram with_override = CausalDiagram::make(
        {fixtures::endo("X", 2, {}, {"U"}), fixtures::endo("Y", 2, {"X"}, {"U"})}, {"U"},
        {{"U", 4}});
    CHECK(CausalDiagram::parse(with_override.serialize()) == with_override);
}
