#include "ctfbounds/synth.hpp"

#include <cmath>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/rng.hpp"
#include "ctfbounds/util.hpp"

namespace ctf {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

EndogenousSpec endo(std::string name, int card, std::vector<std::string> parents,
                    std::vector<std::string> exo_parents) {
    EndogenousSpec s;
    s.name = std::move(name);
    s.card = card;
    s.parents = std::move(parents);
    s.exo_parents = std::move(exo_parents);
    return s;
}

CausalDiagram build_diagram(ScmKind kind) {
    switch (kind) {
        case ScmKind::Frontdoor:
            return CausalDiagram::make(
                {endo("X", 2, {}, {"U1"}), endo("W", 2, {"X"}, {"U2"}), endo("Y", 2, {"W"}, {"U1"})},
                {"U1", "U2"});
        case ScmKind::Bow:
            return CausalDiagram::make({endo("X", 2, {}, {"U"}), endo("Y", 2, {"X"}, {"U"})}, {"U"});
        case ScmKind::Iv:
            return CausalDiagram::make(
                {endo("Z", 2, {}, {"U1"}), endo("X", 2, {"Z"}, {"U2"}), endo("Y", 2, {"X"}, {"U2"})},
                {"U1", "U2"});
        case ScmKind::Napkin:
            return CausalDiagram::make({endo("W", 2, {}, {"U1", "U2"}), endo("Z", 2, {"W"}, {"U3"}),
                                        endo("X", 2, {"Z"}, {"U1"}), endo("Y", 2, {"X"}, {"U2"})},
                                       {"U1", "U2", "U3"});
        case ScmKind::DoubleBow:
            return CausalDiagram::make({endo("Z", 2, {}, {"U1"}), endo("X", 2, {"Z"}, {"U1", "U2"}),
                                        endo("Y", 2, {"X"}, {"U2"})},
                                       {"U1", "U2"});
        case ScmKind::MBd:
            // X's mechanism reads both latents, so both appear as its parents
            return CausalDiagram::make({endo("Z", 2, {}, {"U1", "U2"}),
                                        endo("X", 2, {"Z"}, {"U1", "U2"}),
                                        endo("Y", 2, {"X", "Z"}, {"U2"})},
                                       {"U1", "U2"});
        case ScmKind::TripleBow:
            return CausalDiagram::make({endo("Z", 2, {}, {"U1"}), endo("W", 2, {"Z"}, {"U1", "U2"}),
                                        endo("X", 2, {"W"}, {"U2", "U3"}),
                                        endo("Y", 2, {"X"}, {"U3"})},
                                       {"U1", "U2", "U3"});
        case ScmKind::SeeDo:
            return CausalDiagram::make({endo("Z", 10, {}, {"U1"}), endo("X", 10, {"Z"}, {"U2"}),
                                        endo("Y", 10, {"X"}, {"U1", "U2"})},
                                       {"U1", "U2"});
        case ScmKind::IstIvShape:
            return CausalDiagram::make(
                {endo("Z", 10, {}, {"U1"}), endo("X", 6, {"Z"}, {"U2"}), endo("Y", 4, {"X"}, {"U2"})},
                {"U1", "U2"});
    }
    throw InternalError("unhandled SCM kind");
}

int binomial_from_noise(int trials, double p, const double* noise) {
    int successes = 0;
    for (int i = 0; i < trials; ++i) {
        if (noise[i] < p) ++successes;
    }
    return successes;
}

}  // namespace

ScmKind parse_scm_kind(const std::string& name) {
    for (ScmKind k : {ScmKind::Frontdoor, ScmKind::Bow, ScmKind::Iv, ScmKind::Napkin,
                      ScmKind::DoubleBow, ScmKind::MBd, ScmKind::TripleBow, ScmKind::SeeDo,
                      ScmKind::IstIvShape}) {
        if (scm_kind_name(k) == name) return k;
    }
    throw ValidationError("unknown synthetic SCM kind '" + name + "'");
}

std::string scm_kind_name(ScmKind kind) {
    switch (kind) {
        case ScmKind::Frontdoor: return "frontdoor";
        case ScmKind::Bow: return "bow";
        case ScmKind::Iv: return "iv";
        case ScmKind::Napkin: return "napkin";
        case ScmKind::DoubleBow: return "double_bow";
        case ScmKind::MBd: return "m_bd";
        case ScmKind::TripleBow: return "triple_bow";
        case ScmKind::SeeDo: return "see_do";
        case ScmKind::IstIvShape: return "ist_iv_shape";
    }
    throw InternalError("unhandled SCM kind");
}

std::vector<std::string> scm_kind_names() {
    return {"frontdoor", "bow", "iv", "napkin", "double_bow", "m_bd", "triple_bow", "see_do", "ist_iv_shape"};
}

// Full exogenous state for one unit: the named latent variables plus every
// mechanism's own sampling noise, so that counterfactual terms evaluated
// under different interventions stay coupled through a single draw.
struct SyntheticScm::ExoDraw {
    double u1 = 0, u2 = 0, u3 = 0;
    double e = 0;                 // logistic outcome noise
    double noise[4][9] = {{0}};   // per endogenous variable, uniform draws
};

SyntheticScm::SyntheticScm(ScmKind kind) : kind_(kind), diagram_(build_diagram(kind)) {
    if (kind_ == ScmKind::TripleBow) {
        notes_.push_back(
            "triple_bow: Z follows floor(1.5*u1); the logistic rho_Z variant from the source "
            "parametrization is unused by the equation block and is not implemented");
    }
    if (kind_ == ScmKind::SeeDo) {
        notes_.push_back(
            "see_do: Z is uniform over 0..9 (floor(10*u1)); the min(floor(15*u1), 9) variant "
            "shifts the threshold query to ~0.752 and does not reproduce the reference value");
    }
    if (kind_ == ScmKind::IstIvShape) {
        notes_.push_back(
            "ist_iv_shape: synthetic stand-in mechanisms on the card-10/6/4 instrument diagram; "
            "not derived from any trial dataset");
    }
}

void SyntheticScm::draw_exo(Rng& rng, ExoDraw& exo) const {
    switch (kind_) {
        case ScmKind::Frontdoor:
            exo.u1 = rng.uniform();
            exo.u2 = rng.normal();
            break;
        case ScmKind::Bow:
            exo.u1 = rng.normal();
            exo.e = rng.logistic();
            break;
        case ScmKind::Iv:
        case ScmKind::DoubleBow:
        case ScmKind::MBd:
            exo.u1 = rng.normal();
            exo.u2 = rng.normal();
            break;
        case ScmKind::Napkin:
            exo.u1 = rng.normal();
            exo.u2 = rng.normal();
            exo.u3 = rng.normal();
            break;
        case ScmKind::TripleBow:
            exo.u1 = rng.uniform();
            exo.u2 = rng.normal();
            exo.u3 = rng.normal();
            exo.e = rng.logistic();
            break;
        case ScmKind::SeeDo:
            exo.u1 = rng.uniform();
            exo.u2 = rng.uniform();
            break;
        case ScmKind::IstIvShape:
            exo.u1 = rng.uniform();
            exo.u2 = rng.normal();
            break;
    }
    for (int v = 0; v < 4; ++v) {
        for (int i = 0; i < 9; ++i) exo.noise[v][i] = rng.uniform();
    }
}

void SyntheticScm::eval(const ExoDraw& exo, const std::vector<int>& intervention,
                        std::vector<int>& out) const {
    const CausalDiagram& d = diagram_;
    out.assign(d.n_endogenous(), 0);
    auto value = [&](const char* name) { return out[d.endo_index(name)]; };
    auto assign = [&](const char* name, int free_value) {
        int v = d.endo_index(name);
        out[v] = intervention[v] >= 0 ? intervention[v] : free_value;
    };
    auto bern = [&](int slot, double p) { return binomial_from_noise(1, p, exo.noise[slot]); };

    switch (kind_) {
        case ScmKind::Frontdoor: {
            assign("X", bern(0, exo.u1));
            assign("W", bern(1, sigmoid(value("X") + exo.u2)));
            assign("Y", bern(2, sigmoid(exo.u1 - value("W"))));
            break;
        }
        case ScmKind::Bow: {
            assign("X", bern(0, sigmoid(-exo.u1)));
            assign("Y", (value("X") - exo.u1 + exo.e + 0.1 > 0.0) ? 1 : 0);
            break;
        }
        case ScmKind::Iv: {
            assign("Z", bern(0, sigmoid(exo.u1)));
            assign("X", bern(1, sigmoid(value("Z") + exo.u2)));
            assign("Y", bern(2, sigmoid(exo.u2 - value("X") - 0.5)));
            break;
        }
        case ScmKind::Napkin: {
            assign("W", bern(0, sigmoid(exo.u2 - exo.u1)));
            assign("Z", bern(1, sigmoid(exo.u3 - value("W"))));
            assign("X", bern(2, sigmoid(value("Z") + exo.u1)));
            assign("Y", bern(3, sigmoid(exo.u2 + 0.5 - value("X"))));
            break;
        }
        case ScmKind::DoubleBow: {
            assign("Z", bern(0, sigmoid(exo.u1)));
            assign("X", bern(1, sigmoid(value("Z") + exo.u1 + exo.u2)));
            assign("Y", bern(2, sigmoid(exo.u2 - value("X") - 0.5)));
            break;
        }
        case ScmKind::MBd: {
            assign("Z", bern(0, sigmoid(exo.u1)));
            assign("X", bern(1, sigmoid(value("Z") + exo.u1 + exo.u2)));
            assign("Y", bern(2, sigmoid(value("Z") + exo.u2 - value("X"))));
            break;
        }
        case ScmKind::TripleBow: {
            assign("Z", std::min(static_cast<int>(std::floor(1.5 * exo.u1)), 1));
            assign("W", bern(1, sigmoid(value("Z") + exo.u1 + exo.u2)));
            assign("X", bern(2, sigmoid(value("W") + exo.u2 + exo.u3)));
            assign("Y", (value("X") - exo.u3 + exo.e + 0.1 > 0.0) ? 1 : 0);
            break;
        }
        case ScmKind::SeeDo: {
            // instrument uniform over its card-10 domain; see the generator
            // note for the rejected floor(15*u1) variant
            assign("Z", std::min(static_cast<int>(std::floor(10.0 * exo.u1)), 9));
            assign("X", binomial_from_noise(9, sigmoid(value("Z") + exo.u2), exo.noise[1]));
            assign("Y", binomial_from_noise(9, sigmoid(exo.u1 * exo.u2 - value("X") / 10.0),
                                            exo.noise[2]));
            break;
        }
        case ScmKind::IstIvShape: {
            assign("Z", std::min(static_cast<int>(std::floor(10.0 * exo.u1)), 9));
            assign("X", std::min(static_cast<int>(std::floor(
                            6.0 * sigmoid(exo.u2 / 2.0 + value("Z") / 10.0 - 0.3))),
                        5));
            assign("Y", binomial_from_noise(3, sigmoid(value("X") / 5.0 - exo.u2 / 2.0),
                                            exo.noise[2]));
            break;
        }
    }
}

Dataset SyntheticScm::sample(const std::vector<RegimeSpec>& plan, uint64_t seed) const {
    const CausalDiagram& d = diagram_;
    std::vector<DataRow> rows;
    Rng rng(seed);
    ExoDraw exo;
    std::vector<int> out;
    for (const auto& regime : plan) {
        std::vector<int> ivec(d.n_endogenous(), -1);
        for (const auto& [name, val] : regime.intervention) {
            int v = d.endo_index(name);
            if (v < 0) throw ValidationError("invalid regime: unknown variable '" + name + "'");
            if (val < 0 || val >= d.card(v)) {
                throw ValidationError("invalid regime: value out of range for '" + name + "'");
            }
            ivec[v] = val;
        }
        for (uint64_t i = 0; i < regime.count; ++i) {
            draw_exo(rng, exo);
            eval(exo, ivec, out);
            DataRow row;
            row.intervention = regime.intervention;
            row.values = out;
            rows.push_back(std::move(row));
        }
    }
    return Dataset(d, std::move(rows));
}

GroundTruth SyntheticScm::ground_truth(const CtfQuery& q, uint64_t n, uint64_t seed) const {
    if (n < 10000) throw ValidationError("ground_truth requires n >= 10^4");
    const CausalDiagram& d = diagram_;
    // context per distinct intervention in the query
    std::vector<std::vector<int>> contexts;
    std::vector<std::pair<int, int>> term_src;
    for (const auto& term : q.terms) {
        std::vector<int> ivec(d.n_endogenous(), -1);
        for (const auto& [name, val] : term.intervention) {
            int v = d.endo_index(name);
            if (v < 0) throw ValidationError("unknown variable '" + name + "' in query");
            if (val < 0 || val >= d.card(v)) throw ValidationError("query intervention value out of range");
            ivec[v] = val;
        }
        int ctx_id = -1;
        for (size_t i = 0; i < contexts.size(); ++i) {
            if (contexts[i] == ivec) ctx_id = static_cast<int>(i);
        }
        if (ctx_id < 0) {
            contexts.push_back(std::move(ivec));
            ctx_id = static_cast<int>(contexts.size() - 1);
        }
        int v = d.endo_index(term.variable);
        if (v < 0) throw ValidationError("unknown variable '" + term.variable + "' in query");
        term_src.emplace_back(ctx_id, v);
    }

    constexpr int kShards = 64;
    std::vector<double> shard_sum(kShards, 0.0), shard_sq(kShards, 0.0);
    std::vector<uint64_t> shard_n(kShards, 0);
    for (int s = 0; s < kShards; ++s) {
        shard_n[s] = n / kShards + (static_cast<uint64_t>(s) < n % kShards ? 1 : 0);
    }
    parallel_for(kShards, [&](int s) {
        Rng rng(Rng::derive(seed, static_cast<uint64_t>(s)));
        ExoDraw exo;
        std::vector<std::vector<int>> outs(contexts.size());
        std::vector<int> term_values(q.terms.size());
        KahanSum acc, acc_sq;
        for (uint64_t i = 0; i < shard_n[s]; ++i) {
            draw_exo(rng, exo);
            for (size_t c = 0; c < contexts.size(); ++c) eval(exo, contexts[c], outs[c]);
            for (size_t t = 0; t < q.terms.size(); ++t) {
                term_values[t] = outs[term_src[t].first][term_src[t].second];
            }
            double val = evaluate_event(q, term_values);
            acc.add(val);
            acc_sq.add(val * val);
        }
        shard_sum[s] = acc.value();
        shard_sq[s] = acc_sq.value();
    });

    KahanSum total, total_sq;
    for (int s = 0; s < kShards; ++s) {
        total.add(shard_sum[s]);
        total_sq.add(shard_sq[s]);
    }
    GroundTruth gt;
    gt.query = q;
    gt.samples = n;
    gt.estimate = total.value() / static_cast<double>(n);
    if (q.kind == CtfQuery::Kind::Probability) {
        gt.std_error = std::sqrt(std::max(0.0, gt.estimate * (1.0 - gt.estimate)) /
                                 static_cast<double>(n));
    } else {
        double var = std::max(0.0, total_sq.value() / static_cast<double>(n) - gt.estimate * gt.estimate);
        gt.std_error = std::sqrt(var / static_cast<double>(n));
    }
    return gt;
}

}  // namespace ctf
