#include "ctfbounds/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/exactlp.hpp"
#include "ctfbounds/scm.hpp"

namespace ctf {

namespace {

// Ceiling with a snap tolerance: alpha*T is an exact integer whenever the
// user meant one, but may land at 10.0000000002 in floating point.
uint64_t snapped_ceil(double v) {
    double adjusted = std::ceil(v - 1e-9);
    return adjusted <= 0.0 ? 0 : static_cast<uint64_t>(adjusted);
}

}  // namespace

uint64_t required_draws(double epsilon, double delta) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must be in (0, 1)");
    return snapped_ceil(2.0 / (epsilon * epsilon) * std::log(4.0 / delta));
}

CredibleInterval credible_interval(const std::vector<double>& draws, double alpha) {
    if (draws.empty()) throw ValidationError("credible_interval requires at least one draw");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in [0, 1)");
    std::vector<double> sorted(draws);
    std::sort(sorted.begin(), sorted.end());
    const uint64_t T = sorted.size();
    uint64_t lo = std::clamp<uint64_t>(snapped_ceil(alpha / 2.0 * static_cast<double>(T)), 1, T);
    uint64_t hi = std::clamp<uint64_t>(snapped_ceil((1.0 - alpha / 2.0) * static_cast<double>(T)), 1, T);
    CredibleInterval ci;
    ci.alpha = alpha;
    ci.T = T;
    ci.lower = sorted[lo - 1];
    ci.upper = sorted[hi - 1];
    return ci;
}

namespace {

struct SingleDoQuery {
    int outcome = -1;       // variable index of Y
    int treatment = -1;     // variable index of X
    int x = 0;              // do(X = x)
    int y = 0;              // probability queries: Y = y
    bool expectation = false;
};

SingleDoQuery parse_single_do(const CtfQuery& q, const CausalDiagram& d) {
    SingleDoQuery out;
    if (q.terms.size() != 1) throw ValidationError("unsupported query shape: expected a single counterfactual term");
    const CtfTerm& term = q.terms[0];
    if (term.intervention.size() != 1) {
        throw ValidationError("unsupported query shape: expected exactly one intervened variable");
    }
    out.outcome = d.endo_index(term.variable);
    if (out.outcome < 0) throw ValidationError("unknown variable '" + term.variable + "'");
    out.treatment = d.endo_index(term.intervention.begin()->first);
    if (out.treatment < 0) throw ValidationError("unknown variable '" + term.intervention.begin()->first + "'");
    out.x = term.intervention.begin()->second;
    if (q.kind == CtfQuery::Kind::Expectation) {
        out.expectation = true;
        if (q.expectation.coeffs.size() != 1 || q.expectation.coeffs[0].first != 1 ||
            q.expectation.constant != 0) {
            throw ValidationError("unsupported query shape: expectation must be a bare term");
        }
        return out;
    }
    if (q.body.size() != 1 || q.body[0].cmp != Cmp::Eq || q.body[0].lhs.coeffs.size() != 1 ||
        q.body[0].lhs.coeffs[0].first != 1) {
        throw ValidationError("unsupported query shape: expected P[Y@{X=x}=y]");
    }
    out.y = static_cast<int>(q.body[0].rhs);
    if (out.y < 0 || out.y >= d.card(out.outcome)) {
        throw ValidationError("query outcome value out of range");
    }
    return out;
}

}  // namespace

BaselineBound natural_bounds(const EmpiricalDistribution& obs, const CtfQuery& q,
                             const CausalDiagram& d) {
    SingleDoQuery s = parse_single_do(q, d);
    double p_x = 0.0;
    double p_xy = 0.0;         // P(X=x, Y=y) for probability queries
    double partial_mean = 0.0;  // sum_y y P(x, y) for expectations
    for (const auto& [config, count] : obs.counts) {
        std::vector<int> values = config_values(d, config);
        if (values[s.treatment] != s.x) continue;
        double f = static_cast<double>(count) / static_cast<double>(obs.total);
        p_x += f;
        if (values[s.outcome] == s.y) p_xy += f;
        partial_mean += f * values[s.outcome];
    }
    BaselineBound bound;
    bound.method = "natural";
    if (s.expectation) {
        double y_min = 0.0;
        double y_max = static_cast<double>(d.card(s.outcome) - 1);
        bound.lower = partial_mean + y_min * (1.0 - p_x);
        bound.upper = partial_mean + y_max * (1.0 - p_x);
    } else {
        bound.lower = p_xy;
        bound.upper = p_xy + 1.0 - p_x;
    }
    return bound;
}

BaselineBound frontdoor_estimate(const Dataset& data, const CtfQuery& q) {
    const CausalDiagram& d = data.diagram();
    SingleDoQuery s = parse_single_do(q, d);
    if (s.expectation) throw ValidationError("frontdoor estimate supports probability queries only");
    if (d.n_endogenous() != 3) throw ValidationError("structure mismatch: mediation estimate needs a 3-variable chain");
    // chain X -> W -> Y where X,Y share a latent component and W has its own
    int x_idx = d.topological_order()[0];
    int w_idx = d.topological_order()[1];
    int y_idx = d.topological_order()[2];
    bool chain = d.parent_indices(x_idx).empty() &&
                 d.parent_indices(w_idx) == std::vector<int>{x_idx} &&
                 d.parent_indices(y_idx) == std::vector<int>{w_idx};
    if (!chain || s.treatment != x_idx || s.outcome != y_idx) {
        throw ValidationError("structure mismatch: expected treatment -> mediator -> outcome chain");
    }
    auto part = c_components(d);
    bool split = part.endo_component.at(d.endogenous(x_idx).name) ==
                     part.endo_component.at(d.endogenous(y_idx).name) &&
                 part.endo_component.at(d.endogenous(w_idx).name) !=
                     part.endo_component.at(d.endogenous(x_idx).name);
    if (!split) {
        throw ValidationError("structure mismatch: mediator must be unconfounded with treatment/outcome");
    }
    if (!data.has_regime("")) throw ValidationError("observational regime required");
    EmpiricalDistribution obs = empirical(data, "");

    const int n_x = d.card(x_idx), n_w = d.card(w_idx);
    // joint frequencies
    auto joint = [&](int xv, int wv, int yv) {
        double f = 0.0;
        for (const auto& [config, count] : obs.counts) {
            std::vector<int> values = config_values(d, config);
            if (values[x_idx] == xv && values[w_idx] == wv &&
                (yv < 0 || values[y_idx] == yv)) {
                f += static_cast<double>(count) / static_cast<double>(obs.total);
            }
        }
        return f;
    };
    std::vector<double> p_xm(n_x, 0.0);
    for (int xv = 0; xv < n_x; ++xv) {
        for (int wv = 0; wv < n_w; ++wv) p_xm[xv] += joint(xv, wv, -1);
    }
    if (p_xm[s.x] <= 0.0) {
        throw ValidationError("empty conditioning cell: no observational rows with treatment = " +
                              std::to_string(s.x));
    }
    double total = 0.0;
    for (int wv = 0; wv < n_w; ++wv) {
        double p_w_given_x = joint(s.x, wv, -1) / p_xm[s.x];
        if (p_w_given_x == 0.0) continue;
        // inner adjustment over treatment arms whose (x', w) cell is occupied;
        // the arm weights renormalize over those compatible cells
        double inner = 0.0;
        double compatible_mass = 0.0;
        for (int xv = 0; xv < n_x; ++xv) {
            if (p_xm[xv] <= 0.0) continue;
            double p_xw = joint(xv, wv, -1);
            if (p_xw <= 0.0) continue;
            inner += joint(xv, wv, s.y) / p_xw * p_xm[xv];
            compatible_mass += p_xm[xv];
        }
        if (compatible_mass <= 0.0) {
            throw ValidationError("empty conditioning cell: no treatment arm observes W=" +
                                  std::to_string(wv));
        }
        total += p_w_given_x * inner / compatible_mass;
    }
    BaselineBound bound;
    bound.method = "frontdoor-point";
    bound.lower = bound.upper = total;
    return bound;
}

BaselineBound lp_exact_bound(const CausalDiagram& d, const CtfQuery& q,
                             const std::vector<EmpiricalDistribution>& constraints, double slack) {
    if (d.n_exogenous() != 1) {
        throw ValidationError("lp_exact_bound requires a diagram with exactly one exogenous variable");
    }
    ExactCount dc = effective_exo_cardinality(d, d.exogenous()[0]);
    if (!dc.fits_u64 || dc.saturated > 65536) {
        throw FeasibilityError("latent cardinality too large for the exact LP (" + dc.exact.to_string() + ")");
    }
    const uint64_t dU = dc.saturated;
    CanonicalSCM model = make_response_scm_uniform(d);

    // objective coefficients: event value at each atom
    std::vector<Rat> objective(dU);
    {
        std::vector<std::vector<int>> ivecs;
        std::vector<std::pair<int, int>> term_src;
        for (const auto& term : q.terms) {
            std::vector<int> ivec(d.n_endogenous(), -1);
            for (const auto& [name, val] : term.intervention) ivec[d.endo_index(name)] = val;
            int ctx_id = -1;
            for (size_t i = 0; i < ivecs.size(); ++i) {
                if (ivecs[i] == ivec) ctx_id = static_cast<int>(i);
            }
            if (ctx_id < 0) {
                ivecs.push_back(std::move(ivec));
                ctx_id = static_cast<int>(ivecs.size() - 1);
            }
            term_src.emplace_back(ctx_id, d.endo_index(term.variable));
        }
        std::vector<int> out;
        std::vector<int> term_values(q.terms.size());
        for (uint64_t atom = 0; atom < dU; ++atom) {
            ExoAssignment u;
            u.atom = {atom};
            std::vector<std::vector<int>> per_ctx(ivecs.size());
            for (size_t c = 0; c < ivecs.size(); ++c) eval_all(model, u, ivecs[c], per_ctx[c], nullptr);
            for (size_t t = 0; t < q.terms.size(); ++t) {
                term_values[t] = per_ctx[term_src[t].first][term_src[t].second];
            }
            double val = evaluate_event(q, term_values);
            objective[atom] = Rat(static_cast<int64_t>(std::llround(val)));
        }
    }

    LpProblem lp;
    lp.n_vars = static_cast<int>(dU);
    lp.objective = objective;

    // one equality per (regime, configuration of non-intervened variables)
    Rat slack_rat = Rat::from_double(slack);
    for (const auto& dist : constraints) {
        std::map<std::string, int> interv = parse_regime_tag(dist.tag);
        std::vector<int> ivec(d.n_endogenous(), -1);
        for (const auto& [name, val] : interv) {
            int v = d.endo_index(name);
            if (v < 0) throw ValidationError("unknown variable '" + name + "' in regime tag");
            ivec[v] = val;
        }
        std::vector<int> free_vars;
        uint64_t n_configs = 1;
        for (int v = 0; v < d.n_endogenous(); ++v) {
            if (ivec[v] < 0) {
                free_vars.push_back(v);
                n_configs *= static_cast<uint64_t>(d.card(v));
            }
        }
        if (n_configs > 100000) throw FeasibilityError("too many constraint configurations");

        // model column per atom: realized configuration under this regime
        std::vector<uint64_t> atom_config(dU);
        std::vector<int> out;
        for (uint64_t atom = 0; atom < dU; ++atom) {
            ExoAssignment u;
            u.atom = {atom};
            eval_all(model, u, ivec, out, nullptr);
            atom_config[atom] = config_index(d, out);
        }
        for (uint64_t k = 0; k < n_configs; ++k) {
            std::vector<int> values(ivec.begin(), ivec.end());
            uint64_t rest = k;
            for (size_t i = free_vars.size(); i-- > 0;) {
                int v = free_vars[i];
                values[v] = static_cast<int>(rest % static_cast<uint64_t>(d.card(v)));
                rest /= static_cast<uint64_t>(d.card(v));
            }
            uint64_t config = config_index(d, values);
            LpConstraint con;
            con.coeffs.assign(dU, Rat());
            for (uint64_t atom = 0; atom < dU; ++atom) {
                if (atom_config[atom] == config) con.coeffs[atom] = Rat(1);
            }
            uint64_t count = 0;
            if (auto it = dist.counts.find(config); it != dist.counts.end()) count = it->second;
            Rat rhs = Rat::from_fraction(BigNat(count), BigNat(dist.total));
            if (slack > 0.0) {
                LpConstraint upper = con;
                upper.rel = LpRel::Le;
                upper.rhs = rhs + slack_rat;
                lp.constraints.push_back(std::move(upper));
                con.rel = LpRel::Ge;
                con.rhs = rhs - slack_rat;
                lp.constraints.push_back(std::move(con));
            } else {
                con.rel = LpRel::Eq;
                con.rhs = rhs;
                lp.constraints.push_back(std::move(con));
            }
        }
    }
    {
        LpConstraint norm;
        norm.coeffs.assign(dU, Rat(1));
        norm.rel = LpRel::Eq;
        norm.rhs = Rat(1);
        lp.constraints.push_back(std::move(norm));
    }

    LpResult lo = lp_solve(lp, /*maximize=*/false);
    if (lo.status == LpResult::Status::Infeasible) {
        throw FeasibilityError("empirical distribution lies outside the model polytope; max constraint violation = " +
                               std::to_string(lo.max_violation));
    }
    if (lo.status != LpResult::Status::Optimal) throw InternalError("LP lower bound did not solve");
    LpResult hi = lp_solve(lp, /*maximize=*/true);
    if (hi.status != LpResult::Status::Optimal) throw InternalError("LP upper bound did not solve");

    BaselineBound bound;
    bound.method = "lp-exact";
    bound.lower = lo.objective.to_double();
    bound.upper = hi.objective.to_double();
    return bound;
}

}  // namespace ctf
