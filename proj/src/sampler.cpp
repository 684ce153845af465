#include "ctfbounds/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/util.hpp"

namespace ctf {

namespace {

long double tail_ratio(const PriorConfig::Entry& e, uint64_t K) {
    // (d - K) / d in extended precision; exact when d fits a u64.
    if (e.d.fits_u64) {
        if (K >= e.d.saturated) return 0.0L;
        return static_cast<long double>(e.d.saturated - K) / static_cast<long double>(e.d.saturated);
    }
    long double r = (e.d_approx - static_cast<long double>(K)) / e.d_approx;
    return r < 0.0L ? 0.0L : r;
}

}  // namespace

PriorConfig PriorConfig::flat(const CausalDiagram& d) {
    PriorConfig prior;
    for (const auto& name : d.exogenous()) {
        Entry e;
        e.exogenous = name;
        e.d = effective_exo_cardinality(d, name);
        if (!e.d.fits_u64) {
            throw ValidationError("flat prior needs a materializable cardinality for '" + name +
                                  "' (" + e.d.exact.to_string() + "); set alpha explicitly");
        }
        e.alpha = static_cast<double>(e.d.saturated);
        e.d_approx = e.d.exact.to_long_double();
        e.alpha_over_d = static_cast<long double>(e.alpha) / e.d_approx;
        prior.entries.push_back(std::move(e));
    }
    return prior;
}

PriorConfig PriorConfig::with_alphas(const CausalDiagram& d,
                                     const std::map<std::string, double>& alphas) {
    PriorConfig prior;
    for (const auto& name : d.exogenous()) {
        Entry e;
        e.exogenous = name;
        auto it = alphas.find(name);
        e.alpha = it == alphas.end() ? 1.0 : it->second;
        if (!(e.alpha > 0.0)) throw ValidationError("alpha for '" + name + "' must be > 0");
        e.d = effective_exo_cardinality(d, name);
        e.d_approx = e.d.exact.to_long_double();
        e.alpha_over_d = static_cast<long double>(e.alpha) / e.d_approx;
        prior.entries.push_back(std::move(e));
    }
    return prior;
}

// --- blocked -----------------------------------------------------------------

BlockedSampler::BlockedSampler(const Dataset& data, const PriorConfig& prior, uint64_t seed,
                               uint64_t enum_budget, bool fix_mu_response)
    : data_(&data), d_(&data.diagram()), prior_(prior), rng_(seed), fix_mu_(fix_mu_response) {
    const CausalDiagram& d = *d_;
    if (static_cast<int>(prior_.entries.size()) != d.n_exogenous()) {
        throw ValidationError("prior does not cover every exogenous variable");
    }
    domain_.resize(d.n_exogenous());
    joint_ = 1;
    for (int u = 0; u < d.n_exogenous(); ++u) {
        const auto& e = prior_.entries[u];
        if (!e.d.fits_u64 || e.d.saturated > enum_budget) {
            throw FeasibilityError("latent domain for '" + d.exogenous()[u] +
                                   "' too large for the blocked sampler (" + e.d.exact.to_string() +
                                   "); use the collapsed sampler");
        }
        domain_[u] = e.d.saturated;
        if (joint_ > enum_budget / std::max<uint64_t>(domain_[u], 1)) {
            throw FeasibilityError("joint latent state count exceeds the enumeration budget; use the collapsed sampler");
        }
        joint_ *= domain_[u];
    }

    model_.diagram = d_;
    model_.domain = domain_;
    model_.theta.resize(d.n_exogenous());
    for (int u = 0; u < d.n_exogenous(); ++u) {
        model_.theta[u].dense = true;
        model_.theta[u].weights.assign(domain_[u], 1.0 / static_cast<double>(domain_[u]));
    }
    model_.mu.resize(d.n_endogenous());
    forced_.resize(d.n_endogenous());
    uint64_t total_cells = 0;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        MuTable& mu = model_.mu[v];
        const auto& exos = d.exo_parent_indices(v);
        mu.dense = true;
        mu.u_stride.assign(exos.size(), 1);
        mu.u_count = 1;
        for (size_t i = exos.size(); i-- > 0;) {
            mu.u_stride[i] = mu.u_count;
            mu.u_count *= domain_[exos[i]];
        }
        uint64_t cells = d.pa_config_count(v) * mu.u_count;
        total_cells += cells;
        if (total_cells > enum_budget) {
            throw FeasibilityError("mechanism tables exceed the materialization budget; use the collapsed sampler");
        }
        mu.table.assign(cells, 0);
        forced_[v].assign(cells, 0);
    }

    if (fix_mu_) {
        if (d.n_exogenous() != 1) {
            throw ValidationError("fix_mu_response requires a single exogenous variable");
        }
        CanonicalSCM resp = make_response_scm_uniform(d, enum_budget);
        if (resp.domain != domain_) {
            throw ValidationError("fix_mu_response requires the canonical cardinality (no override)");
        }
        for (int v = 0; v < d.n_endogenous(); ++v) model_.mu[v].table = resp.mu[v].table;
    }

    // group rows by (intervention, values); their conditionals coincide
    std::map<std::pair<std::vector<int>, std::vector<int>>, size_t> index;
    row_type_.resize(data.size());
    for (size_t r = 0; r < data.size(); ++r) {
        const auto& ivec = data.intervention_vector(r);
        const auto& values = data.rows()[r].values;
        auto key = std::make_pair(ivec, values);
        auto [it, fresh] = index.try_emplace(key, types_.size());
        if (fresh) {
            RowType t;
            t.ivec = ivec;
            t.values = values;
            for (int v = 0; v < d.n_endogenous(); ++v) {
                if (ivec[v] < 0) t.free_vars.push_back(v);
                uint64_t pa = 0;
                const auto& parents = d.parent_indices(v);
                for (size_t i = 0; i < parents.size(); ++i) {
                    pa += static_cast<uint64_t>(values[parents[i]]) * d.pa_stride(v, static_cast<int>(i));
                }
                t.pa_index.push_back(pa);
            }
            types_.push_back(std::move(t));
        }
        types_[it->second].rows.push_back(r);
        row_type_[r] = it->second;
    }
    atoms_.assign(data.size(), std::vector<uint64_t>(d.n_exogenous(), 0));
}

void BlockedSampler::init() {
    const CausalDiagram& d = *d_;
    // Conflict-free randomized start. Each row tries a random atom and keeps
    // it when consistent with the value table forced so far; otherwise it
    // falls back to the atom reserved for its children-value tuple (rows
    // sharing a (pa, u_V) key then agree on the forced value by
    // construction). Randomizing the start overdisperses parallel chains.
    std::vector<MuForcedMap> forced(d.n_endogenous());
    auto compatible = [&](size_t r, int u, uint64_t atom) {
        for (int v : d.children_of_exo(u)) {
            if (data_->intervention_vector(r)[v] >= 0) continue;
            const RowType& t = types_[row_type_[r]];
            MuKey key;
            key.pa = t.pa_index[v];
            key.n_exo = 1;
            key.atoms[0] = atom;
            auto it = forced[v].find(key);
            if (it != forced[v].end() && it->second != t.values[v]) return false;
        }
        return true;
    };
    auto force = [&](size_t r, int u, uint64_t atom) {
        for (int v : d.children_of_exo(u)) {
            if (data_->intervention_vector(r)[v] >= 0) continue;
            const RowType& t = types_[row_type_[r]];
            MuKey key;
            key.pa = t.pa_index[v];
            key.n_exo = 1;
            key.atoms[0] = atom;
            forced[v].emplace(key, t.values[v]);
        }
    };
    // Keys above identify atoms of ONE exogenous variable at a time, so the
    // init reserves a distinct id range per tuple only within each u; a
    // variable with several exo parents is handled conservatively through
    // its per-u tuple (shared-parent conflicts fall back as well).
    for (int u = 0; u < d.n_exogenous(); ++u) {
        for (auto& f : forced) f.clear();
        std::map<std::vector<int>, uint64_t> registry;
        const auto& children = d.children_of_exo(u);
        std::vector<uint64_t> fallback(data_->size());
        for (size_t r = 0; r < data_->size(); ++r) {
            std::vector<int> tuple;
            tuple.reserve(children.size());
            for (int v : children) tuple.push_back(data_->rows()[r].values[v]);
            auto [it, fresh] = registry.try_emplace(tuple, registry.size());
            if (fresh && registry.size() > domain_[u]) {
                throw ValidationError("exo_card_override for '" + d.exogenous()[u] +
                                      "' is smaller than the occupied-value count required by the data");
            }
            fallback[r] = it->second;
        }
        // reserved ids [0, T) stay exclusive to their tuple class; random
        // candidates draw from [T, d) so they can never poison a fallback
        const uint64_t reserved = registry.size();
        for (size_t r = 0; r < data_->size(); ++r) {
            uint64_t atom = fallback[r];
            if (domain_[u] > reserved) {
                uint64_t candidate = reserved + rng_.below(domain_[u] - reserved);
                if (compatible(r, u, candidate)) atom = candidate;
            }
            atoms_[r][u] = atom;
            force(r, u, atom);
        }
    }
    step_mu();
    step_theta();
}

void BlockedSampler::weights_for_type(size_t type, std::vector<double>& w) const {
    const CausalDiagram& d = *d_;
    const RowType& t = types_[type];
    w.assign(joint_, 0.0);
    std::vector<uint64_t> atom(d.n_exogenous(), 0);
    for (uint64_t j = 0;; ++j) {
        double weight = 1.0;
        for (int u = 0; u < d.n_exogenous(); ++u) weight *= model_.theta[u].weights[atom[u]];
        if (weight > 0.0) {
            for (int v : t.free_vars) {
                const MuTable& mu = model_.mu[v];
                const auto& exos = d.exo_parent_indices(v);
                uint64_t u_idx = 0;
                for (size_t i = 0; i < exos.size(); ++i) u_idx += atom[exos[i]] * mu.u_stride[i];
                if (mu.table[t.pa_index[v] * mu.u_count + u_idx] != t.values[v]) {
                    weight = 0.0;
                    break;
                }
            }
        }
        w[j] = weight;
        int pos = d.n_exogenous() - 1;
        while (pos >= 0) {
            if (++atom[pos] < domain_[pos]) break;
            atom[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
}

std::vector<double> BlockedSampler::row_weights(size_t row) const {
    std::vector<double> w;
    weights_for_type(row_type_[row], w);
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) {
        throw InternalError("zero conditional mass for a data row: inconsistent sampler state");
    }
    for (double& x : w) x /= total;
    return w;
}

void BlockedSampler::step_u() {
    const CausalDiagram& d = *d_;
    std::vector<double> w, cdf;
    for (size_t type = 0; type < types_.size(); ++type) {
        weights_for_type(type, w);
        cdf.resize(w.size());
        double acc = 0.0;
        for (size_t j = 0; j < w.size(); ++j) {
            acc += w[j];
            cdf[j] = acc;
        }
        if (!(acc > 0.0)) {
            throw InternalError("zero conditional mass for a data row: inconsistent sampler state");
        }
        for (size_t r : types_[type].rows) {
            double target = rng_.uniform() * acc;
            uint64_t j = std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin();
            if (j >= cdf.size()) j = cdf.size() - 1;
            uint64_t rest = j;
            for (int u = d.n_exogenous() - 1; u >= 0; --u) {
                atoms_[r][u] = rest % domain_[u];
                rest /= domain_[u];
            }
        }
    }
}

void BlockedSampler::step_mu() {
    if (fix_mu_) return;
    const CausalDiagram& d = *d_;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        MuTable& mu = model_.mu[v];
        for (auto& cell : mu.table) {
            cell = static_cast<int32_t>(rng_.below(static_cast<uint64_t>(d.card(v))));
        }
        std::fill(forced_[v].begin(), forced_[v].end(), 0);
    }
    for (const auto& t : types_) {
        for (size_t r : t.rows) {
            for (int v : t.free_vars) {
                MuTable& mu = model_.mu[v];
                const auto& exos = d.exo_parent_indices(v);
                uint64_t u_idx = 0;
                for (size_t i = 0; i < exos.size(); ++i) u_idx += atoms_[r][exos[i]] * mu.u_stride[i];
                uint64_t cell = t.pa_index[v] * mu.u_count + u_idx;
                if (forced_[v][cell] && mu.table[cell] != t.values[v]) {
                    throw InternalError("conflicting rows force one mechanism entry: invariant violation");
                }
                mu.table[cell] = t.values[v];
                forced_[v][cell] = 1;
            }
        }
    }
}

void BlockedSampler::step_theta() {
    const CausalDiagram& d = *d_;
    std::vector<double> shapes;
    for (int u = 0; u < d.n_exogenous(); ++u) {
        shapes.assign(domain_[u], static_cast<double>(prior_.entries[u].alpha_over_d));
        for (size_t r = 0; r < data_->size(); ++r) shapes[atoms_[r][u]] += 1.0;
        model_.theta[u].weights = rng_.dirichlet(shapes);
    }
}

void BlockedSampler::sweep() {
    step_u();
    step_mu();
    step_theta();
}

std::vector<uint64_t> BlockedSampler::atom_counts(int exo) const {
    std::vector<uint64_t> counts(domain_[exo], 0);
    for (size_t r = 0; r < data_->size(); ++r) ++counts[atoms_[r][exo]];
    return counts;
}

void BlockedSampler::check_invariants() const {
    validate_scm(model_);
    for (size_t r = 0; r < data_->size(); ++r) {
        for (int u = 0; u < d_->n_exogenous(); ++u) {
            if (atoms_[r][u] >= domain_[u]) throw InternalError("row atom out of range");
        }
    }
}

// --- collapsed ----------------------------------------------------------------

CollapsedSampler::CollapsedSampler(const Dataset& data, const PriorConfig& prior, uint64_t seed,
                                   uint64_t row_budget)
    : data_(&data), d_(&data.diagram()), prior_(prior), rng_(seed), row_budget_(row_budget) {
    const CausalDiagram& d = *d_;
    if (static_cast<int>(prior_.entries.size()) != d.n_exogenous()) {
        throw ValidationError("prior does not cover every exogenous variable");
    }
    occupancy_.resize(d.n_exogenous());
    next_atom_.assign(d.n_exogenous(), 0);
    forced_.resize(d.n_endogenous());
    atoms_.assign(data.size(), std::vector<uint64_t>(d.n_exogenous(), 0));
    row_pa_.assign(data.size() * d.n_endogenous(), 0);
    for (size_t r = 0; r < data.size(); ++r) {
        const auto& values = data.rows()[r].values;
        for (int v = 0; v < d.n_endogenous(); ++v) {
            uint64_t pa = 0;
            const auto& parents = d.parent_indices(v);
            for (size_t i = 0; i < parents.size(); ++i) {
                pa += static_cast<uint64_t>(values[parents[i]]) * d.pa_stride(v, static_cast<int>(i));
            }
            row_pa_[r * d.n_endogenous() + v] = pa;
        }
    }
}

void CollapsedSampler::init() {
    // One atom per distinct children-value tuple: conflict-free, and the
    // occupied count starts at the tuple-class count (<= d_U, since the
    // response-class count of each child is at least its cardinality)
    // instead of N, which keeps the first sweeps inside the
    // per-row option budget.
    const CausalDiagram& d = *d_;
    for (auto& occ : occupancy_) occ.clear();
    for (auto& f : forced_) f.clear();
    std::fill(next_atom_.begin(), next_atom_.end(), 0);
    std::vector<std::map<std::vector<int>, uint64_t>> registry(d.n_exogenous());
    std::vector<uint64_t> atoms(d.n_exogenous());
    for (size_t r = 0; r < data_->size(); ++r) {
        for (int u = 0; u < d.n_exogenous(); ++u) {
            std::vector<int> tuple;
            const auto& children = d.children_of_exo(u);
            tuple.reserve(children.size());
            for (int v : children) tuple.push_back(data_->rows()[r].values[v]);
            auto [it, fresh] = registry[u].try_emplace(tuple, next_atom_[u]);
            if (fresh) {
                ++next_atom_[u];
                const auto& e = prior_.entries[u];
                if (e.d.fits_u64 && registry[u].size() > e.d.saturated) {
                    throw ValidationError("latent domain for '" + d.exogenous()[u] +
                                          "' is smaller than the occupied-value count required by the data");
                }
            }
            atoms[u] = it->second;
        }
        restore_row(r, atoms);
    }
}

void CollapsedSampler::remove_row(size_t row) {
    const CausalDiagram& d = *d_;
    const auto& ivec = data_->intervention_vector(row);
    for (int v = 0; v < d.n_endogenous(); ++v) {
        if (ivec[v] >= 0) continue;
        uint64_t pa = row_pa_[row * d.n_endogenous() + v];
        const auto& exos = d.exo_parent_indices(v);
        std::vector<uint64_t> tuple(exos.size());
        for (size_t i = 0; i < exos.size(); ++i) tuple[i] = atoms_[row][exos[i]];
        auto bucket = forced_[v].find(pa);
        if (bucket == forced_[v].end()) throw InternalError("forced-value bucket missing");
        auto it = bucket->second.find(tuple);
        if (it == bucket->second.end()) throw InternalError("forced-value entry missing");
        if (--it->second.refs == 0) bucket->second.erase(it);
        if (bucket->second.empty()) forced_[v].erase(bucket);
    }
    for (int u = 0; u < d.n_exogenous(); ++u) {
        auto it = occupancy_[u].find(atoms_[row][u]);
        if (it == occupancy_[u].end()) throw InternalError("occupancy entry missing");
        if (--it->second == 0) occupancy_[u].erase(it);
    }
}

void CollapsedSampler::restore_row(size_t row, const std::vector<uint64_t>& atoms) {
    const CausalDiagram& d = *d_;
    atoms_[row] = atoms;
    for (int u = 0; u < d.n_exogenous(); ++u) ++occupancy_[u][atoms[u]];
    const auto& ivec = data_->intervention_vector(row);
    const auto& values = data_->rows()[row].values;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        if (ivec[v] >= 0) continue;
        uint64_t pa = row_pa_[row * d.n_endogenous() + v];
        const auto& exos = d.exo_parent_indices(v);
        std::vector<uint64_t> tuple(exos.size());
        for (size_t i = 0; i < exos.size(); ++i) tuple[i] = atoms[exos[i]];
        auto& entry = forced_[v][pa][tuple];
        if (entry.refs > 0 && entry.value != values[v]) {
            throw InternalError("row restored onto a conflicting forced value: invariant violation");
        }
        entry.value = values[v];
        ++entry.refs;
    }
}

double CollapsedSampler::enumerate_options(size_t row, std::vector<std::vector<uint64_t>>& option_atoms,
                                           std::vector<double>& weights) const {
    const CausalDiagram& d = *d_;
    const size_t n_exo = static_cast<size_t>(d.n_exogenous());
    option_atoms.assign(n_exo, {});
    std::vector<std::vector<double>> urn(n_exo);
    std::vector<std::unordered_map<uint64_t, size_t>> atom_pos(n_exo);
    uint64_t combos = 1;
    for (size_t u = 0; u < n_exo; ++u) {
        const auto& e = prior_.entries[u];
        uint64_t K = occupancy_[u].size();
        option_atoms[u].reserve(K + 1);
        urn[u].reserve(K + 1);
        for (const auto& [atom, count] : occupancy_[u]) {
            atom_pos[u].emplace(atom, option_atoms[u].size());
            option_atoms[u].push_back(atom);
            urn[u].push_back(static_cast<double>(count) + static_cast<double>(e.alpha_over_d));
        }
        double fresh_w = e.alpha * static_cast<double>(tail_ratio(e, K));
        option_atoms[u].push_back(kFresh);
        urn[u].push_back(fresh_w);
        combos *= K + 1;
        if (combos > row_budget_) {
            throw FeasibilityError("per-row option combinations exceed the collapsed-sampler budget");
        }
    }

    // per-variable likelihood grids over this row's exo-parent options
    const auto& ivec = data_->intervention_vector(row);
    const auto& values = data_->rows()[row].values;
    std::vector<std::vector<double>> like(d.n_endogenous());
    std::vector<std::vector<uint64_t>> like_stride(d.n_endogenous());
    std::vector<int> free_vars;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        if (ivec[v] >= 0) continue;
        free_vars.push_back(v);
        const auto& exos = d.exo_parent_indices(v);
        like_stride[v].assign(exos.size(), 1);
        uint64_t cells = 1;
        for (size_t i = exos.size(); i-- > 0;) {
            like_stride[v][i] = cells;
            cells *= option_atoms[exos[i]].size();
        }
        like[v].assign(cells, 1.0 / static_cast<double>(d.card(v)));
        uint64_t pa = row_pa_[row * d.n_endogenous() + v];
        auto bucket = forced_[v].find(pa);
        if (bucket == forced_[v].end()) continue;
        for (const auto& [tuple, forced_val] : bucket->second) {
            uint64_t cell = 0;
            bool live = true;
            for (size_t i = 0; i < exos.size(); ++i) {
                auto it = atom_pos[exos[i]].find(tuple[i]);
                if (it == atom_pos[exos[i]].end()) {
                    live = false;  // cannot happen while refs > 0, but stay safe
                    break;
                }
                cell += it->second * like_stride[v][i];
            }
            if (live) like[v][cell] = forced_val.value == values[v] ? 1.0 : 0.0;
        }
    }

    weights.assign(combos, 0.0);
    std::vector<size_t> opt(n_exo, 0);
    double total = 0.0;
    for (uint64_t j = 0; j < combos; ++j) {
        double w = 1.0;
        for (size_t u = 0; u < n_exo; ++u) w *= urn[u][opt[u]];
        if (w > 0.0) {
            for (int v : free_vars) {
                const auto& exos = d.exo_parent_indices(v);
                uint64_t cell = 0;
                for (size_t i = 0; i < exos.size(); ++i) cell += opt[exos[i]] * like_stride[v][i];
                w *= like[v][cell];
                if (w == 0.0) break;
            }
        }
        weights[j] = w;
        total += w;
        for (size_t pos = n_exo; pos-- > 0;) {
            if (++opt[pos] < option_atoms[pos].size()) break;
            opt[pos] = 0;
        }
    }
    return total;
}

void CollapsedSampler::step_row(size_t row) {
    const CausalDiagram& d = *d_;
    remove_row(row);
    std::vector<std::vector<uint64_t>> option_atoms;
    std::vector<double> weights;
    double total = enumerate_options(row, option_atoms, weights);
    if (!(total > 0.0)) {
        throw InternalError("zero urn mass for a data row: inconsistent sampler state");
    }
    double target = rng_.uniform() * total;
    double acc = 0.0;
    uint64_t chosen = weights.size() - 1;
    for (uint64_t j = 0; j < weights.size(); ++j) {
        acc += weights[j];
        if (target < acc) {
            chosen = j;
            break;
        }
    }
    std::vector<uint64_t> atoms(d.n_exogenous());
    uint64_t rest = chosen;
    for (int u = d.n_exogenous() - 1; u >= 0; --u) {
        size_t opt = rest % option_atoms[u].size();
        rest /= option_atoms[u].size();
        uint64_t atom = option_atoms[u][opt];
        atoms[u] = atom == kFresh ? next_atom_[u]++ : atom;
    }
    restore_row(row, atoms);
}

void CollapsedSampler::sweep() {
    for (size_t r = 0; r < data_->size(); ++r) step_row(r);
}

std::vector<CollapsedSampler::RowOption> CollapsedSampler::row_options(size_t row) {
    std::vector<uint64_t> saved = atoms_[row];
    remove_row(row);
    std::vector<std::vector<uint64_t>> option_atoms;
    std::vector<double> weights;
    double total = enumerate_options(row, option_atoms, weights);
    std::vector<RowOption> out;
    const size_t n_exo = option_atoms.size();
    for (uint64_t j = 0; j < weights.size(); ++j) {
        RowOption opt;
        opt.atoms.resize(n_exo);
        uint64_t rest = j;
        for (size_t u = n_exo; u-- > 0;) {
            opt.atoms[u] = option_atoms[u][rest % option_atoms[u].size()];
            rest /= option_atoms[u].size();
        }
        opt.prob = total > 0.0 ? weights[j] / total : 0.0;
        out.push_back(std::move(opt));
    }
    restore_row(row, saved);
    return out;
}

size_t CollapsedSampler::occupied_count(int exo) const { return occupancy_[exo].size(); }

void CollapsedSampler::reassign_row(size_t row, const std::vector<uint64_t>& atoms) {
    remove_row(row);
    restore_row(row, atoms);
    for (int u = 0; u < d_->n_exogenous(); ++u) {
        next_atom_[u] = std::max(next_atom_[u], atoms[u] + 1);
    }
}

CanonicalSCM CollapsedSampler::finalize(Rng& rng) const {
    const CausalDiagram& d = *d_;
    CanonicalSCM m;
    m.diagram = d_;
    m.domain.resize(d.n_exogenous());
    m.theta.resize(d.n_exogenous());
    for (int u = 0; u < d.n_exogenous(); ++u) {
        const auto& e = prior_.entries[u];
        const uint64_t K = occupancy_[u].size();
        ThetaSpec& t = m.theta[u];
        t.dense = false;
        std::vector<double> lg;
        lg.reserve(K + 1);
        for (const auto& [atom, count] : occupancy_[u]) {
            t.atoms.atom_ids.push_back(atom);
            lg.push_back(rng.log_gamma_draw(static_cast<double>(count) +
                                            static_cast<double>(e.alpha_over_d)));
        }
        double tail_shape = e.alpha * static_cast<double>(tail_ratio(e, K));
        bool has_tail = tail_shape > 0.0;
        if (has_tail) lg.push_back(rng.log_gamma_draw(tail_shape));
        double mx = -INFINITY;
        for (double x : lg) mx = std::max(mx, x);
        double total = 0.0;
        std::vector<double> w(lg.size());
        for (size_t i = 0; i < lg.size(); ++i) {
            w[i] = std::exp(lg[i] - mx);
            total += w[i];
        }
        t.atoms.probs.assign(K, 0.0);
        for (uint64_t i = 0; i < K; ++i) t.atoms.probs[i] = w[i] / total;
        t.atoms.tail_mass = has_tail ? w.back() / total : 0.0;
        m.domain[u] = e.d.fits_u64 ? e.d.saturated : UINT64_MAX;
    }
    m.mu.resize(d.n_endogenous());
    for (int v = 0; v < d.n_endogenous(); ++v) {
        MuTable& mu = m.mu[v];
        mu.dense = false;
        const auto& exos = d.exo_parent_indices(v);
        for (const auto& [pa, tuples] : forced_[v]) {
            for (const auto& [tuple, forced_val] : tuples) {
                MuKey key;
                key.pa = pa;
                key.n_exo = static_cast<uint32_t>(exos.size());
                for (size_t i = 0; i < exos.size(); ++i) key.atoms[i] = tuple[i];
                mu.forced.emplace(key, forced_val.value);
            }
        }
    }
    return m;
}

void CollapsedSampler::check_invariants() const {
    const CausalDiagram& d = *d_;
    // occupancy recount
    std::vector<std::map<uint64_t, uint64_t>> occ(d.n_exogenous());
    for (size_t r = 0; r < data_->size(); ++r) {
        for (int u = 0; u < d.n_exogenous(); ++u) ++occ[u][atoms_[r][u]];
    }
    for (int u = 0; u < d.n_exogenous(); ++u) {
        if (occ[u] != occupancy_[u]) throw InternalError("occupancy counts out of sync");
    }
    // forced-table recount and indicator consistency
    std::vector<std::unordered_map<uint64_t, TupleMap>> want(d.n_endogenous());
    for (size_t r = 0; r < data_->size(); ++r) {
        const auto& ivec = data_->intervention_vector(r);
        const auto& values = data_->rows()[r].values;
        for (int v = 0; v < d.n_endogenous(); ++v) {
            if (ivec[v] >= 0) continue;
            const auto& exos = d.exo_parent_indices(v);
            std::vector<uint64_t> tuple(exos.size());
            for (size_t i = 0; i < exos.size(); ++i) tuple[i] = atoms_[r][exos[i]];
            auto& entry = want[v][row_pa_[r * d.n_endogenous() + v]][tuple];
            if (entry.refs > 0 && entry.value != values[v]) {
                throw InternalError("rows disagree on a forced value: likelihood indicator is 0");
            }
            entry.value = values[v];
            ++entry.refs;
        }
    }
    for (int v = 0; v < d.n_endogenous(); ++v) {
        size_t want_total = 0;
        for (const auto& [pa, tuples] : want[v]) want_total += tuples.size();
        size_t have_total = 0;
        for (const auto& [pa, tuples] : forced_[v]) have_total += tuples.size();
        if (want_total != have_total) throw InternalError("forced-table size out of sync");
        for (const auto& [pa, tuples] : want[v]) {
            auto bucket = forced_[v].find(pa);
            if (bucket == forced_[v].end()) throw InternalError("forced bucket missing");
            for (const auto& [tuple, val] : tuples) {
                auto it = bucket->second.find(tuple);
                if (it == bucket->second.end()) throw InternalError("forced entry missing");
                if (it->second.value != val.value || it->second.refs != val.refs) {
                    throw InternalError("forced entry out of sync");
                }
            }
        }
    }
}

// --- orchestration -------------------------------------------------------------

namespace {

double split_r_hat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::pair<double, double>> halves;  // (mean, var)
    size_t L = SIZE_MAX;
    for (const auto& c : chains) L = std::min(L, c.size());
    L /= 2;
    if (L < 2) return std::numeric_limits<double>::quiet_NaN();
    for (const auto& c : chains) {
        for (int half = 0; half < 2; ++half) {
            double mean = 0.0;
            for (size_t i = 0; i < L; ++i) mean += c[half * L + i];
            mean /= static_cast<double>(L);
            double var = 0.0;
            for (size_t i = 0; i < L; ++i) {
                double dlt = c[half * L + i] - mean;
                var += dlt * dlt;
            }
            var /= static_cast<double>(L - 1);
            halves.emplace_back(mean, var);
        }
    }
    double W = 0.0, grand = 0.0;
    for (const auto& [mean, var] : halves) {
        W += var;
        grand += mean;
    }
    W /= static_cast<double>(halves.size());
    grand /= static_cast<double>(halves.size());
    double B = 0.0;
    for (const auto& [mean, var] : halves) B += (mean - grand) * (mean - grand);
    B *= static_cast<double>(L) / static_cast<double>(halves.size() - 1);
    if (W <= 0.0) return 1.0;
    double var_hat = (static_cast<double>(L - 1) / static_cast<double>(L)) * W + B / static_cast<double>(L);
    return std::sqrt(var_hat / W);
}

}  // namespace

PosteriorRun run_chain(const Dataset& data, const CtfQuery& query, const PriorConfig& prior,
                       const ChainConfig& config) {
    if (config.draws < 1) throw ValidationError("chain config requires draws >= 1");
    if (config.thinning < 1) throw ValidationError("chain config requires thinning >= 1");
    if (config.chains < 1) throw ValidationError("chain config requires chains >= 1");
    const CausalDiagram& d = data.diagram();
    for (const auto& term : query.terms) {
        if (!d.has_endogenous(term.variable)) {
            throw ValidationError("query variable '" + term.variable + "' is not in the diagram");
        }
    }

    PosteriorRun run;
    run.config = config;
    run.chain_seeds.resize(config.chains);
    for (int c = 0; c < config.chains; ++c) run.chain_seeds[c] = Rng::derive(config.seed, c);

    std::vector<std::vector<double>> per_chain(config.chains);
    std::vector<std::string> chain_error(config.chains);

    parallel_for(config.chains, [&](int c) {
        try {
            Rng eval_rng(Rng::derive(run.chain_seeds[c], 0xe7a1));
            std::vector<double>& out = per_chain[c];
            out.reserve(config.draws);
            if (config.kind == SamplerKind::Blocked) {
                BlockedSampler s(data, prior, run.chain_seeds[c], config.enum_budget,
                                 config.fix_mu_response);
                s.init();
                for (uint64_t i = 0; i < config.burnin; ++i) s.sweep();
                for (uint64_t t = 0; t < config.draws; ++t) {
                    for (uint64_t k = 0; k < config.thinning; ++k) s.sweep();
                    if (s.joint_states() <= config.enum_budget) {
                        out.push_back(ctf_probability_enumerate(s.model(), query, config.enum_budget));
                    } else {
                        out.push_back(
                            ctf_probability_mc(s.model(), query, config.mc_samples, eval_rng.next_u64())
                                .estimate);
                    }
                }
            } else {
                CollapsedSampler s(data, prior, run.chain_seeds[c], config.row_budget);
                s.init();
                Rng finalize_rng(Rng::derive(run.chain_seeds[c], 0xf17a));
                for (uint64_t i = 0; i < config.burnin; ++i) s.sweep();
                for (uint64_t t = 0; t < config.draws; ++t) {
                    for (uint64_t k = 0; k < config.thinning; ++k) s.sweep();
                    CanonicalSCM m = s.finalize(finalize_rng);
                    out.push_back(
                        ctf_probability_mc(m, query, config.mc_samples, eval_rng.next_u64()).estimate);
                }
            }
        } catch (const std::exception& e) {
            chain_error[c] = e.what();
        }
    });
    for (int c = 0; c < config.chains; ++c) {
        if (!chain_error[c].empty()) throw FeasibilityError(chain_error[c]);
    }

    for (int c = 0; c < config.chains; ++c) {
        run.draws.insert(run.draws.end(), per_chain[c].begin(), per_chain[c].end());
    }
    run.r_hat = split_r_hat(per_chain);
    run.notes.push_back("sampler=" + std::string(config.kind == SamplerKind::Blocked ? "blocked" : "collapsed"));
    run.notes.push_back("burnin=" + std::to_string(config.burnin) + " draws=" + std::to_string(config.draws) +
                        " thinning=" + std::to_string(config.thinning) + " chains=" + std::to_string(config.chains));
    for (const auto& e : prior.entries) {
        std::string note = "prior " + e.exogenous + ": alpha=" + std::to_string(e.alpha) + " d=" + e.d.exact.to_string();
        if (data.diagram().exo_card_override().count(e.exogenous)) note += " (override)";
        run.notes.push_back(note);
    }
    return run;
}

}  // namespace ctf
