#include "ctfbounds/scm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <json.hpp>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/util.hpp"

namespace ctf {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

uint64_t checked_domain(const CausalDiagram& d, int u, uint64_t budget) {
    ExactCount c = effective_exo_cardinality(d, d.exogenous()[u]);
    if (!c.fits_u64 || c.saturated > budget) {
        throw FeasibilityError("exogenous domain for '" + d.exogenous()[u] +
                               "' too large to materialize (" + c.exact.to_string() + ")");
    }
    return c.saturated;
}

void build_mu_layout(const CausalDiagram& d, int v, const std::vector<uint64_t>& domain,
                     MuTable& mu) {
    const auto& exos = d.exo_parent_indices(v);
    if (exos.size() > 6) {
        throw FeasibilityError("variable '" + d.endogenous(v).name +
                               "' has more than 6 exogenous parents");
    }
    // last exo parent varies fastest
    mu.u_stride.assign(exos.size(), 1);
    mu.u_count = 1;
    for (size_t i = exos.size(); i-- > 0;) {
        mu.u_stride[i] = mu.u_count;
        mu.u_count *= domain[exos[i]];
    }
}

}  // namespace

CanonicalSCM make_random_scm(const CausalDiagram& d, Rng& rng, uint64_t budget) {
    CanonicalSCM m;
    m.diagram = &d;
    m.domain.resize(d.n_exogenous());
    m.theta.resize(d.n_exogenous());
    for (int u = 0; u < d.n_exogenous(); ++u) {
        m.domain[u] = checked_domain(d, u, budget);
        m.theta[u].dense = true;
        m.theta[u].weights = rng.dirichlet(std::vector<double>(m.domain[u], 1.0));
    }
    m.mu.resize(d.n_endogenous());
    for (int v = 0; v < d.n_endogenous(); ++v) {
        MuTable& mu = m.mu[v];
        build_mu_layout(d, v, m.domain, mu);
        uint64_t cells = d.pa_config_count(v) * mu.u_count;
        if (cells > budget) {
            throw FeasibilityError("mechanism table for '" + d.endogenous(v).name +
                                   "' exceeds budget");
        }
        mu.dense = true;
        mu.table.resize(cells);
        for (auto& cell : mu.table) {
            cell = static_cast<int32_t>(rng.below(static_cast<uint64_t>(d.card(v))));
        }
    }
    return m;
}

std::vector<uint64_t> response_indices_of_atom(const CausalDiagram& d, uint64_t atom) {
    std::vector<uint64_t> idx(d.n_endogenous());
    for (int v : d.topological_order()) {
        ExactCount mv = d.response_count(v);
        if (!mv.fits_u64) throw FeasibilityError("response class too large for atom decoding");
        idx[v] = atom % mv.saturated;
        atom /= mv.saturated;
    }
    return idx;
}

CanonicalSCM make_response_scm(const CausalDiagram& d, std::vector<double> theta, uint64_t budget) {
    if (d.n_exogenous() != 1) {
        throw ValidationError("response-function parametrization requires exactly one exogenous variable");
    }
    CanonicalSCM m;
    m.diagram = &d;
    uint64_t dU = checked_domain(d, 0, budget);
    if (theta.size() != dU) {
        throw ValidationError("theta length " + std::to_string(theta.size()) +
                              " does not match exogenous cardinality " + std::to_string(dU));
    }
    m.domain = {dU};
    m.theta.resize(1);
    m.theta[0].dense = true;
    m.theta[0].weights = std::move(theta);
    m.mu.resize(d.n_endogenous());
    for (int v = 0; v < d.n_endogenous(); ++v) {
        MuTable& mu = m.mu[v];
        build_mu_layout(d, v, m.domain, mu);
        uint64_t cells = d.pa_config_count(v) * mu.u_count;
        if (cells > budget) throw FeasibilityError("response table exceeds budget");
        mu.dense = true;
        mu.table.resize(cells);
    }
    for (uint64_t atom = 0; atom < dU; ++atom) {
        auto ridx = response_indices_of_atom(d, atom);
        for (int v = 0; v < d.n_endogenous(); ++v) {
            for (uint64_t pa = 0; pa < d.pa_config_count(v); ++pa) {
                m.mu[v].table[pa * m.mu[v].u_count + atom] = static_cast<int32_t>(
                    decode_response(d.card(v), d.pa_config_count(v), ridx[v], pa));
            }
        }
    }
    return m;
}

CanonicalSCM make_response_scm_uniform(const CausalDiagram& d, uint64_t budget) {
    uint64_t dU = checked_domain(d, 0, budget);
    return make_response_scm(d, std::vector<double>(dU, 1.0 / static_cast<double>(dU)), budget);
}

void validate_scm(const CanonicalSCM& m) {
    const CausalDiagram& d = *m.diagram;
    for (int u = 0; u < d.n_exogenous(); ++u) {
        const ThetaSpec& t = m.theta[u];
        KahanSum total;
        if (t.dense) {
            for (double w : t.weights) {
                if (w < 0.0) throw InternalError("negative theta weight for '" + d.exogenous()[u] + "'");
                total.add(w);
            }
        } else {
            for (double w : t.atoms.probs) {
                if (w < 0.0) throw InternalError("negative atom weight for '" + d.exogenous()[u] + "'");
                total.add(w);
            }
            if (t.atoms.tail_mass < -1e-12) throw InternalError("negative tail mass");
            total.add(t.atoms.tail_mass);
        }
        if (std::abs(total.value() - 1.0) > 1e-9) {
            throw InternalError("theta for '" + d.exogenous()[u] + "' sums to " +
                                std::to_string(total.value()));
        }
    }
    for (int v = 0; v < d.n_endogenous(); ++v) {
        const MuTable& mu = m.mu[v];
        if (mu.dense) {
            for (int32_t cell : mu.table) {
                if (cell < 0 || cell >= d.card(v)) {
                    throw InternalError("mu entry out of range for '" + d.endogenous(v).name + "'");
                }
            }
        } else {
            for (const auto& [key, val] : mu.forced) {
                if (val < 0 || val >= d.card(v)) {
                    throw InternalError("forced mu entry out of range for '" + d.endogenous(v).name + "'");
                }
            }
        }
    }
}

int decode_response(int card, uint64_t pa_count, uint64_t index, uint64_t pa_index) {
    if (pa_index >= pa_count) throw ValidationError("pa-configuration index out of range");
    uint64_t digit = index;
    for (uint64_t k = 0; k < pa_index; ++k) digit /= static_cast<uint64_t>(card);
    int value = static_cast<int>(digit % static_cast<uint64_t>(card));
    // range check on the index itself: all higher digits beyond pa_count must be zero
    uint64_t top = index;
    for (uint64_t k = 0; k < pa_count; ++k) top /= static_cast<uint64_t>(card);
    if (top != 0) throw ValidationError("response index out of range");
    return value;
}

uint64_t encode_response(int card, const std::vector<int>& outputs) {
    uint64_t index = 0;
    uint64_t stride = 1;
    for (int out : outputs) {
        index += static_cast<uint64_t>(out) * stride;
        stride *= static_cast<uint64_t>(card);
    }
    return index;
}

int mu_value(const CanonicalSCM& m, int v, uint64_t pa_index, const ExoAssignment& u,
             EvalContext* ctx) {
    const MuTable& mu = m.mu[v];
    const auto& exos = m.diagram->exo_parent_indices(v);
    if (mu.dense) {
        uint64_t u_idx = 0;
        for (size_t i = 0; i < exos.size(); ++i) u_idx += u.atom[exos[i]] * mu.u_stride[i];
        return mu.table[pa_index * mu.u_count + u_idx];
    }
    MuKey key;
    key.pa = pa_index;
    key.n_exo = static_cast<uint32_t>(exos.size());
    bool fresh = false;
    for (size_t i = 0; i < exos.size(); ++i) {
        key.atoms[i] = u.atom[exos[i]];
        if (ctx && ctx->is_fresh(key.atoms[i])) fresh = true;
    }
    if (auto it = mu.forced.find(key); it != mu.forced.end()) return it->second;
    if (!ctx) throw InternalError("lazy mu lookup without evaluation context");
    MuForcedMap& memo = fresh ? ctx->sample_memo_ : ctx->persistent_memo_;
    // memo keys are shared across variables; disambiguate by folding v into pa.
    MuKey memo_key = key;
    memo_key.pa = pa_index * static_cast<uint64_t>(m.diagram->n_endogenous()) +
                  static_cast<uint64_t>(v);
    if (auto it = memo.find(memo_key); it != memo.end()) return it->second;
    int val = static_cast<int>(ctx->rng.below(static_cast<uint64_t>(m.diagram->card(v))));
    memo.emplace(memo_key, val);
    return val;
}

void eval_all(const CanonicalSCM& m, const ExoAssignment& u, const std::vector<int>& intervention,
              std::vector<int>& out, EvalContext* ctx) {
    const CausalDiagram& d = *m.diagram;
    out.resize(d.n_endogenous());
    for (int v : d.topological_order()) {
        if (intervention[v] >= 0) {
            out[v] = intervention[v];
            continue;
        }
        uint64_t pa_index = 0;
        const auto& parents = d.parent_indices(v);
        for (size_t i = 0; i < parents.size(); ++i) {
            pa_index += static_cast<uint64_t>(out[parents[i]]) * d.pa_stride(v, static_cast<int>(i));
        }
        out[v] = mu_value(m, v, pa_index, u, ctx);
    }
}

std::map<std::string, int> potential_response(const CanonicalSCM& m, const ExoAssignment& u,
                                              const std::map<std::string, int>& intervention,
                                              const std::vector<std::string>& targets,
                                              EvalContext* ctx) {
    const CausalDiagram& d = *m.diagram;
    std::vector<int> ivec(d.n_endogenous(), -1);
    for (const auto& [name, val] : intervention) {
        int v = d.endo_index(name);
        if (v < 0) throw ValidationError("unknown variable '" + name + "' in intervention");
        if (val < 0 || val >= d.card(v)) throw ValidationError("intervention value out of range for '" + name + "'");
        ivec[v] = val;
    }
    std::vector<int> values;
    EvalContext local(0);
    eval_all(m, u, ivec, values, ctx ? ctx : &local);
    std::map<std::string, int> out;
    for (const auto& t : targets) {
        int v = d.endo_index(t);
        if (v < 0) throw ValidationError("unknown target variable '" + t + "'");
        out[t] = values[v];
    }
    return out;
}

namespace {

// Distinct intervention contexts of a query; each term reads one variable out
// of one context's full potential response.
struct QueryPlan {
    std::vector<std::vector<int>> contexts;       // intervention vectors
    std::vector<std::pair<int, int>> term_src;    // term -> (context, variable)
};

QueryPlan build_query_plan(const CausalDiagram& d, const CtfQuery& q) {
    QueryPlan plan;
    for (const auto& term : q.terms) {
        std::vector<int> ivec(d.n_endogenous(), -1);
        for (const auto& [name, val] : term.intervention) {
            int v = d.endo_index(name);
            if (v < 0) throw ValidationError("unknown variable '" + name + "' in query intervention");
            if (val < 0 || val >= d.card(v)) {
                throw ValidationError("intervention value out of range for '" + name + "'");
            }
            ivec[v] = val;
        }
        int v = d.endo_index(term.variable);
        if (v < 0) throw ValidationError("unknown variable '" + term.variable + "' in query");
        int ctx_id = -1;
        for (size_t i = 0; i < plan.contexts.size(); ++i) {
            if (plan.contexts[i] == ivec) {
                ctx_id = static_cast<int>(i);
                break;
            }
        }
        if (ctx_id < 0) {
            plan.contexts.push_back(std::move(ivec));
            ctx_id = static_cast<int>(plan.contexts.size() - 1);
        }
        plan.term_src.emplace_back(ctx_id, v);
    }
    return plan;
}

double evaluate_query_at(const CanonicalSCM& m, const CtfQuery& q, const QueryPlan& plan,
                         const ExoAssignment& u, EvalContext* ctx,
                         std::vector<std::vector<int>>& scratch, std::vector<int>& term_values) {
    scratch.resize(plan.contexts.size());
    for (size_t c = 0; c < plan.contexts.size(); ++c) {
        eval_all(m, u, plan.contexts[c], scratch[c], ctx);
    }
    term_values.resize(q.terms.size());
    for (size_t t = 0; t < q.terms.size(); ++t) {
        auto [c, v] = plan.term_src[t];
        term_values[t] = scratch[c][v];
    }
    return evaluate_event(q, term_values);
}

}  // namespace

uint64_t joint_domain_size(const CanonicalSCM& m) {
    uint64_t total = 1;
    for (uint64_t d : m.domain) {
        if (d == 0) return 0;
        if (total > UINT64_MAX / d) return UINT64_MAX;
        total *= d;
    }
    return total;
}

double ctf_probability_enumerate(const CanonicalSCM& m, const CtfQuery& q, uint64_t budget,
                                 EvalContext* ctx) {
    const CausalDiagram& d = *m.diagram;
    for (const auto& t : m.theta) {
        if (!t.dense) {
            throw FeasibilityError("enumeration requires dense exogenous distributions; use ctf_probability_mc");
        }
    }
    uint64_t joint = joint_domain_size(m);
    if (joint > budget) {
        throw FeasibilityError("joint exogenous state count " + std::to_string(joint) +
                               " exceeds enumeration budget " + std::to_string(budget) +
                               "; use ctf_probability_mc");
    }
    QueryPlan plan = build_query_plan(d, q);
    EvalContext local(0);
    EvalContext* use_ctx = ctx ? ctx : &local;

    ExoAssignment u;
    u.atom.assign(d.n_exogenous(), 0);
    KahanSum acc;
    std::vector<std::vector<int>> scratch;
    std::vector<int> term_values;
    for (;;) {
        double w = 1.0;
        for (int i = 0; i < d.n_exogenous(); ++i) w *= m.theta[i].weights[u.atom[i]];
        if (w > 0.0) {
            double val = evaluate_query_at(m, q, plan, u, use_ctx, scratch, term_values);
            if (val != 0.0) acc.add(w * val);
        }
        int pos = d.n_exogenous() - 1;
        while (pos >= 0) {
            if (++u.atom[pos] < m.domain[pos]) break;
            u.atom[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return acc.value();
}

namespace {

struct ExoSampler {
    explicit ExoSampler(const CanonicalSCM& m) : model(&m) {
        cdf.resize(m.theta.size());
        for (size_t u = 0; u < m.theta.size(); ++u) {
            const ThetaSpec& t = m.theta[u];
            const std::vector<double>& src = t.dense ? t.weights : t.atoms.probs;
            cdf[u].resize(src.size());
            double acc = 0.0;
            for (size_t i = 0; i < src.size(); ++i) {
                acc += src[i];
                cdf[u][i] = acc;
            }
        }
    }

    void draw(EvalContext& ctx, ExoAssignment& out) const {
        out.atom.resize(model->theta.size());
        for (size_t u = 0; u < model->theta.size(); ++u) {
            const ThetaSpec& t = model->theta[u];
            double r = ctx.rng.uniform();
            const auto& c = cdf[u];
            size_t idx = std::lower_bound(c.begin(), c.end(), r) - c.begin();
            if (t.dense) {
                out.atom[u] = std::min<uint64_t>(idx, t.weights.size() - 1);
            } else if (idx < t.atoms.atom_ids.size()) {
                out.atom[u] = t.atoms.atom_ids[idx];
            } else {
                out.atom[u] = ctx.fresh_atom();  // tail selection
            }
        }
    }

    const CanonicalSCM* model;
    std::vector<std::vector<double>> cdf;
};

}  // namespace

ExoAssignment draw_exo(const CanonicalSCM& m, EvalContext& ctx) {
    ExoSampler sampler(m);
    ExoAssignment u;
    sampler.draw(ctx, u);
    return u;
}

McEstimate ctf_probability_mc(const CanonicalSCM& m, const CtfQuery& q, uint64_t n, uint64_t seed) {
    if (n < 1) throw ValidationError("ctf_probability_mc requires n >= 1");
    QueryPlan plan = build_query_plan(*m.diagram, q);
    ExoSampler sampler(m);
    EvalContext ctx(seed);
    ExoAssignment u;
    KahanSum acc, acc_sq;
    std::vector<std::vector<int>> scratch;
    std::vector<int> term_values;
    for (uint64_t i = 0; i < n; ++i) {
        ctx.reset_sample();
        sampler.draw(ctx, u);
        double val = evaluate_query_at(m, q, plan, u, &ctx, scratch, term_values);
        acc.add(val);
        acc_sq.add(val * val);
    }
    McEstimate est;
    est.samples = n;
    est.estimate = acc.value() / static_cast<double>(n);
    double var = std::max(0.0, acc_sq.value() / static_cast<double>(n) - est.estimate * est.estimate);
    est.std_error = std::sqrt(var / static_cast<double>(n));
    return est;
}

std::vector<SampledRow> forward_sample(const CanonicalSCM& m,
                                       const std::map<std::string, int>& intervention, uint64_t n,
                                       uint64_t seed) {
    const CausalDiagram& d = *m.diagram;
    std::vector<int> ivec(d.n_endogenous(), -1);
    for (const auto& [name, val] : intervention) {
        int v = d.endo_index(name);
        if (v < 0) throw ValidationError("unknown variable '" + name + "' in intervention");
        if (val < 0 || val >= d.card(v)) throw ValidationError("intervention value out of range for '" + name + "'");
        ivec[v] = val;
    }
    ExoSampler sampler(m);
    EvalContext ctx(seed);
    ExoAssignment u;
    std::vector<SampledRow> rows;
    rows.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        ctx.reset_sample();
        sampler.draw(ctx, u);
        SampledRow row;
        row.intervention = intervention;
        eval_all(m, u, ivec, row.values, &ctx);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string save_model(const CanonicalSCM& m) {
    const CausalDiagram& d = *m.diagram;
    ordered_json j;
    j["diagram"] = json::parse(d.serialize());
    ordered_json theta;
    for (int u = 0; u < d.n_exogenous(); ++u) {
        if (!m.theta[u].dense) throw ValidationError("only dense models serialize to model files");
        theta[d.exogenous()[u]] = m.theta[u].weights;
    }
    j["theta"] = std::move(theta);
    ordered_json mu;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        if (!m.mu[v].dense) throw ValidationError("only dense models serialize to model files");
        mu[d.endogenous(v).name] = m.mu[v].table;
    }
    j["mu"] = std::move(mu);
    return j.dump(2) + "\n";
}

LoadedModel load_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("diagram") || !j.contains("theta") || !j.contains("mu")) {
        throw ValidationError("model file requires 'diagram', 'theta' and 'mu'");
    }
    LoadedModel lm;
    lm.diagram = std::make_unique<CausalDiagram>(CausalDiagram::parse(j["diagram"].dump()));
    const CausalDiagram& d = *lm.diagram;
    CanonicalSCM& m = lm.model;
    m.diagram = lm.diagram.get();
    m.domain.resize(d.n_exogenous());
    m.theta.resize(d.n_exogenous());
    for (int u = 0; u < d.n_exogenous(); ++u) {
        const std::string& name = d.exogenous()[u];
        if (!j["theta"].contains(name)) throw ValidationError("model theta missing '" + name + "'");
        m.theta[u].dense = true;
        m.theta[u].weights = j["theta"][name].get<std::vector<double>>();
        ExactCount c = effective_exo_cardinality(d, name);
        if (!c.fits_u64 || m.theta[u].weights.size() != c.saturated) {
            throw ValidationError("model theta for '" + name + "' has wrong length");
        }
        m.domain[u] = c.saturated;
    }
    m.mu.resize(d.n_endogenous());
    for (int v = 0; v < d.n_endogenous(); ++v) {
        const std::string& name = d.endogenous(v).name;
        if (!j["mu"].contains(name)) throw ValidationError("model mu missing '" + name + "'");
        MuTable& mu = m.mu[v];
        build_mu_layout(d, v, m.domain, mu);
        mu.dense = true;
        std::vector<int64_t> flat = j["mu"][name].get<std::vector<int64_t>>();
        if (flat.size() != d.pa_config_count(v) * mu.u_count) {
            throw ValidationError("model mu for '" + name + "' has wrong length");
        }
        mu.table.assign(flat.begin(), flat.end());
    }
    validate_scm(m);
    return lm;
}

}  // namespace ctf
