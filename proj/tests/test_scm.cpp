#include <doctest.h>

#include <cmath>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/scm.hpp"
#include "fixtures.hpp"

using namespace ctf;

namespace {

// Atom of a single-latent response model from per-variable response indices
// (topological order, first variable least significant).
uint64_t atom_of(const CausalDiagram& d, const std::vector<uint64_t>& ridx) {
    uint64_t atom = 0, stride = 1;
    for (int v : d.topological_order()) {
        atom += ridx[v] * stride;
        stride *= d.response_count(v).saturated;
    }
    return atom;
}

}  // namespace

TEST_CASE("response index decodes digit by digit") {
    // binary output, one binary parent: index digits over configs (x=0),(x=1)
    CHECK(decode_response(2, 2, 0, 0) == 0);
    CHECK(decode_response(2, 2, 0, 1) == 0);
    CHECK(decode_response(2, 2, 1, 0) == 1);
    CHECK(decode_response(2, 2, 1, 1) == 0);
    CHECK(decode_response(2, 2, 2, 0) == 0);  // y <- x
    CHECK(decode_response(2, 2, 2, 1) == 1);
    CHECK(decode_response(2, 2, 3, 0) == 1);  // constant 1
    CHECK(decode_response(2, 2, 3, 1) == 1);
    CHECK_THROWS_AS(decode_response(2, 2, 4, 0), ValidationError);
    CHECK_THROWS_AS(decode_response(2, 2, 1, 2), ValidationError);
}

TEST_CASE("decode/encode is a bijection on full response classes") {
    for (auto [card, pa_count] : {std::pair<int, uint64_t>{2, 3}, {3, 4}, {10, 3}, {4, 5}}) {
        uint64_t m = 1;
        for (uint64_t k = 0; k < pa_count; ++k) m *= static_cast<uint64_t>(card);
        REQUIRE(m <= 10000);
        for (uint64_t index = 0; index < m; ++index) {
            std::vector<int> outputs(pa_count);
            for (uint64_t pa = 0; pa < pa_count; ++pa) {
                outputs[pa] = decode_response(card, pa_count, index, pa);
            }
            CHECK(encode_response(card, outputs) == index);
        }
    }
}

TEST_CASE("intervened variables take their assigned value regardless of u") {
    CausalDiagram d = fixtures::bow_diagram();
    Rng rng(7);
    CanonicalSCM m = make_random_scm(d, rng);
    for (uint64_t atom = 0; atom < 8; ++atom) {
        ExoAssignment u{{atom}};
        auto out = potential_response(m, u, {{"Y", 1}}, {"Y"});
        CHECK(out.at("Y") == 1);
    }
}

TEST_CASE("fixed response index y<-x maps do(X=1) to Y=1") {
    CausalDiagram d = fixtures::bow_diagram();
    CanonicalSCM m = make_response_scm_uniform(d);
    for (uint64_t r_x = 0; r_x < 2; ++r_x) {
        uint64_t atom = atom_of(d, {r_x, 2});  // response 2 = y <- x
        ExoAssignment u{{atom}};
        CHECK(potential_response(m, u, {{"X", 1}}, {"Y"}).at("Y") == 1);
        CHECK(potential_response(m, u, {{"X", 0}}, {"Y"}).at("Y") == 0);
    }
}

TEST_CASE("consistency: X(u)=x implies Y_x(u)=Y(u), exhaustively") {
    for (uint64_t seed : {11u, 12u, 13u}) {
        Rng rng(seed);
        CausalDiagram d = fixtures::iv_diagram();
        CanonicalSCM m = make_random_scm(d, rng);
        std::vector<int> no_iv(d.n_endogenous(), -1);
        std::vector<int> factual, counterfactual;
        for (uint64_t a1 = 0; a1 < 2; ++a1) {
            for (uint64_t a2 = 0; a2 < 16; ++a2) {
                ExoAssignment u{{a1, a2}};
                eval_all(m, u, no_iv, factual, nullptr);
                for (int v = 0; v < d.n_endogenous(); ++v) {
                    std::vector<int> ivec(d.n_endogenous(), -1);
                    ivec[v] = factual[v];
                    eval_all(m, u, ivec, counterfactual, nullptr);
                    CHECK(counterfactual == factual);
                }
            }
        }
    }
}

TEST_CASE("enumerated outcome probabilities sum to one") {
    Rng rng(99);
    CausalDiagram d = fixtures::chained_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    double total = 0.0;
    for (int y = 0; y < 2; ++y) {
        total += ctf_probability_enumerate(m, parse_query("P[Y@{X=0}=" + std::to_string(y) + "]", d));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("point-mass response model pins the joint counterfactual") {
    CausalDiagram d = fixtures::bow_diagram();
    uint64_t atom = atom_of(d, {encode_response(2, {1}), 2});  // x <- 1, y <- x
    std::vector<double> theta(8, 0.0);
    theta[atom] = 1.0;
    CanonicalSCM m = make_response_scm(d, theta);
    CtfQuery pns = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    CHECK(ctf_probability_enumerate(m, pns) == doctest::Approx(1.0));
    McEstimate mc = ctf_probability_mc(m, pns, 500, 4);
    CHECK(mc.estimate == 1.0);  // degenerate theta: exactly one
}

TEST_CASE("enumeration matches high-n forward simulation on an override model") {
    CausalDiagram d = ctf::CausalDiagram::make(
        {fixtures::endo("Z", 2, {}, {"U1"}), fixtures::endo("X", 2, {"Z"}, {"U2"}),
         fixtures::endo("Y", 2, {"X"}, {"U1", "U2"})},
        {"U1", "U2"}, {{"U1", 4}, {"U2", 4}});
    Rng rng(2024);
    CanonicalSCM m = make_random_scm(d, rng);
    CtfQuery q = parse_query("P[Z=0 & X@{Z=1}=1 & Y@{X=0}=1]", d);
    double exact = ctf_probability_enumerate(m, q);
    McEstimate sim = ctf_probability_mc(m, q, 1000000, 5);
    CHECK(std::fabs(sim.estimate - exact) < 3e-3);
}

TEST_CASE("mc agrees with enumeration within 4/sqrt(n) on random models") {
    for (uint64_t seed : {21u, 22u, 23u}) {
        Rng rng(seed);
        CausalDiagram d = fixtures::iv_diagram();
        CanonicalSCM m = make_random_scm(d, rng);
        CtfQuery q = parse_query("P[Y@{X=0}=1 & X=1]", d);
        double exact = ctf_probability_enumerate(m, q);
        const uint64_t n = 40000;
        McEstimate mc = ctf_probability_mc(m, q, n, seed + 100);
        CHECK(std::fabs(mc.estimate - exact) < 4.0 / std::sqrt(static_cast<double>(n)));
        CHECK(mc.std_error > 0.0);
    }
}

TEST_CASE("mc is bit-identical for a fixed seed") {
    Rng rng(31);
    CausalDiagram d = fixtures::frontdoor_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    CtfQuery q = parse_query("P[Y@{X=0}=1]", d);
    McEstimate a = ctf_probability_mc(m, q, 20000, 777);
    McEstimate b = ctf_probability_mc(m, q, 20000, 777);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("mc converges to enumeration at 5 sigma with n = 1e6") {
    Rng rng(41);
    CausalDiagram d = fixtures::bow_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    CtfQuery q = parse_query("P[Y@{X=1}=1 & Y@{X=0}=0]", d);
    double exact = ctf_probability_enumerate(m, q);
    McEstimate mc = ctf_probability_mc(m, q, 1000000, 42);
    double sigma = std::sqrt(std::max(exact * (1 - exact), 1e-12) / 1e6);
    CHECK(std::fabs(mc.estimate - exact) < 5.0 * sigma);
}

TEST_CASE("forward sampling basics") {
    Rng rng(51);
    CausalDiagram d = fixtures::bow_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    CHECK(forward_sample(m, {}, 0, 1).empty());

    // point-mass model: all rows identical
    std::vector<double> theta(8, 0.0);
    theta[atom_of(d, {1, 3})] = 1.0;
    CanonicalSCM pm = make_response_scm(d, theta);
    auto rows = forward_sample(pm, {}, 50, 2);
    REQUIRE(rows.size() == 50);
    for (const auto& row : rows) CHECK(row.values == rows[0].values);

    auto tagged = forward_sample(m, {{"X", 1}}, 10, 3);
    for (const auto& row : tagged) {
        CHECK(row.intervention == std::map<std::string, int>{{"X", 1}});
        CHECK(row.values[d.endo_index("X")] == 1);
    }
}

TEST_CASE("forward-sample frequencies converge to enumerated probabilities") {
    Rng rng(61);
    CausalDiagram d = fixtures::iv_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    const uint64_t n = 1000000;
    auto rows = forward_sample(m, {}, n, 9);
    uint64_t hits = 0;
    int xi = d.endo_index("X"), yi = d.endo_index("Y");
    for (const auto& row : rows) {
        if (row.values[xi] == 1 && row.values[yi] == 1) ++hits;
    }
    double expected = ctf_probability_enumerate(m, parse_query("P[X=1 & Y=1]", d));
    CHECK(std::fabs(static_cast<double>(hits) / n - expected) < 4.0 / std::sqrt(n));
}

TEST_CASE("factual and interventional terms factor across c-components") {
    // P(z, x_z') = P(z) P(x_z') whenever Z and X live in different components
    Rng rng(71);
    CausalDiagram d = fixtures::iv_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    for (int z = 0; z < 2; ++z) {
        for (int zv = 0; zv < 2; ++zv) {
            for (int x = 0; x < 2; ++x) {
                std::string zs = std::to_string(z), zvs = std::to_string(zv), xs = std::to_string(x);
                double joint = ctf_probability_enumerate(
                    m, parse_query("P[Z=" + zs + " & X@{Z=" + zvs + "}=" + xs + "]", d));
                double pz = ctf_probability_enumerate(m, parse_query("P[Z=" + zs + "]", d));
                double px = ctf_probability_enumerate(m, parse_query("P[X@{Z=" + zvs + "}=" + xs + "]", d));
                CHECK(joint == doctest::Approx(pz * px).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("enumeration rejects oversized joint domains") {
    CausalDiagram d = fixtures::bow_diagram();
    Rng rng(81);
    CanonicalSCM m = make_random_scm(d, rng);
    CtfQuery q = parse_query("P[Y@{X=0}=1]", d);
    CHECK_THROWS_WITH_AS(ctf_probability_enumerate(m, q, /*budget=*/4),
                         doctest::Contains("ctf_probability_mc"), FeasibilityError);
}

TEST_CASE("model files round-trip") {
    Rng rng(91);
    CausalDiagram d = fixtures::frontdoor_diagram();
    CanonicalSCM m = make_random_scm(d, rng);
    LoadedModel lm = load_model(save_model(m));
    CHECK(*lm.diagram == d);
    CtfQuery q = parse_query("P[Y@{X=0}=1]", d);
    CHECK(ctf_probability_enumerate(lm.model, q) ==
          doctest::Approx(ctf_probability_enumerate(m, q)).epsilon(1e-12));
}
