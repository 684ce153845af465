#include "ctfbounds/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>

#include <json.hpp>

#include "ctfbounds/errors.hpp"

namespace ctf {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int CausalDiagram::endo_index(const std::string& name) const {
    auto it = endo_lookup_.find(name);
    return it == endo_lookup_.end() ? -1 : it->second;
}

int CausalDiagram::exo_index(const std::string& name) const {
    auto it = exo_lookup_.find(name);
    return it == exo_lookup_.end() ? -1 : it->second;
}

std::vector<std::string> CausalDiagram::topological_names() const {
    std::vector<std::string> out;
    out.reserve(topo_.size());
    for (int v : topo_) out.push_back(endo_[v].name);
    return out;
}

ExactCount CausalDiagram::response_count(int v) const {
    return ExactCount::from(BigNat::pow(BigNat(static_cast<uint64_t>(endo_[v].card)),
                                        pa_count_[v]));
}

CausalDiagram CausalDiagram::make(std::vector<EndogenousSpec> endogenous,
                                  std::vector<std::string> exogenous,
                                  std::unordered_map<std::string, uint64_t> exo_card_override) {
    CausalDiagram d;
    d.endo_ = std::move(endogenous);
    d.exo_names_ = std::move(exogenous);
    d.override_ = std::move(exo_card_override);
    d.validate_and_finish();
    return d;
}

void CausalDiagram::validate_and_finish() {
    endo_lookup_.clear();
    exo_lookup_.clear();
    for (size_t i = 0; i < endo_.size(); ++i) {
        if (endo_lookup_.count(endo_[i].name)) {
            throw ValidationError("duplicate name: endogenous '" + endo_[i].name + "'");
        }
        endo_lookup_[endo_[i].name] = static_cast<int>(i);
    }
    for (size_t i = 0; i < exo_names_.size(); ++i) {
        if (exo_lookup_.count(exo_names_[i]) || endo_lookup_.count(exo_names_[i])) {
            throw ValidationError("duplicate name: exogenous '" + exo_names_[i] + "'");
        }
        exo_lookup_[exo_names_[i]] = static_cast<int>(i);
    }

    for (auto& spec : endo_) {
        if (spec.card < 2) {
            throw ValidationError("card < 2 for variable '" + spec.name + "'");
        }
        std::set<std::string> seen;
        for (const auto& p : spec.parents) {
            if (p == spec.name) throw ValidationError("cycle detected: self-loop on '" + spec.name + "'");
            if (endo_index(p) < 0) throw ValidationError("unknown name: parent '" + p + "' of '" + spec.name + "'");
            if (!seen.insert(p).second) throw ValidationError("duplicate name: parent '" + p + "' repeated on '" + spec.name + "'");
        }
        seen.clear();
        for (const auto& u : spec.exo_parents) {
            if (exo_index(u) < 0) throw ValidationError("unknown name: exo parent '" + u + "' of '" + spec.name + "'");
            if (!seen.insert(u).second) throw ValidationError("duplicate name: exo parent '" + u + "' repeated on '" + spec.name + "'");
        }
    }
    for (const auto& [name, card] : override_) {
        if (exo_index(name) < 0) throw ValidationError("unknown name: exo_card_override key '" + name + "'");
        if (card < 1) throw ValidationError("exo_card_override for '" + name + "' must be >= 1");
    }

    // Normalization: every mechanism takes an exogenous argument.
    for (auto& spec : endo_) {
        if (!spec.exo_parents.empty()) continue;
        std::string fresh = "U_" + spec.name;
        int k = 2;
        while (exo_lookup_.count(fresh) || endo_lookup_.count(fresh)) {
            fresh = "U_" + spec.name + "_" + std::to_string(k++);
        }
        exo_lookup_[fresh] = static_cast<int>(exo_names_.size());
        exo_names_.push_back(fresh);
        spec.exo_parents.push_back(fresh);
    }

    // Kahn topological order, ties by declaration order.
    const int n = n_endogenous();
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> children(n);
    for (int v = 0; v < n; ++v) {
        for (const auto& p : endo_[v].parents) {
            children[endo_index(p)].push_back(v);
            ++indeg[v];
        }
    }
    topo_.clear();
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int v = 0; v < n; ++v) {
        if (indeg[v] == 0) ready.push(v);
    }
    while (!ready.empty()) {
        int v = ready.top();
        ready.pop();
        topo_.push_back(v);
        for (int c : children[v]) {
            if (--indeg[c] == 0) ready.push(c);
        }
    }
    if (static_cast<int>(topo_.size()) != n) {
        throw ValidationError("cycle detected among endogenous variables");
    }
    topo_pos_.assign(n, 0);
    for (int i = 0; i < n; ++i) topo_pos_[topo_[i]] = i;

    // Canonical parent order (topological position) and layout tables.
    parent_idx_.assign(n, {});
    exo_idx_.assign(n, {});
    pa_count_.assign(n, 1);
    pa_stride_.assign(n, {});
    exo_children_.assign(exo_names_.size(), {});
    for (int v = 0; v < n; ++v) {
        auto& spec = endo_[v];
        std::sort(spec.parents.begin(), spec.parents.end(), [&](const auto& a, const auto& b) {
            return topo_pos_[endo_index(a)] < topo_pos_[endo_index(b)];
        });
        std::sort(spec.exo_parents.begin(), spec.exo_parents.end(), [&](const auto& a, const auto& b) {
            return exo_index(a) < exo_index(b);
        });
        for (const auto& p : spec.parents) parent_idx_[v].push_back(endo_index(p));
        for (const auto& u : spec.exo_parents) {
            exo_idx_[v].push_back(exo_index(u));
            exo_children_[exo_index(u)].push_back(v);
        }
        pa_stride_[v].assign(spec.parents.size(), 1);
        for (int i = static_cast<int>(spec.parents.size()) - 1; i >= 0; --i) {
            if (i + 1 < static_cast<int>(spec.parents.size())) {
                pa_stride_[v][i] =
                    pa_stride_[v][i + 1] * static_cast<uint64_t>(endo_[parent_idx_[v][i + 1]].card);
            }
        }
        for (int p : parent_idx_[v]) pa_count_[v] *= static_cast<uint64_t>(endo_[p].card);
    }
}

CausalDiagram CausalDiagram::parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("diagram file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("diagram file must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "endogenous" && it.key() != "exogenous" && it.key() != "exo_card_override") {
            throw ValidationError("unknown key in diagram file: '" + it.key() + "'");
        }
    }
    if (!j.contains("endogenous") || !j["endogenous"].is_array()) {
        throw ValidationError("diagram file requires an 'endogenous' array");
    }

    std::vector<EndogenousSpec> endos;
    for (const auto& e : j["endogenous"]) {
        if (!e.is_object()) throw ValidationError("endogenous entries must be objects");
        for (auto it = e.begin(); it != e.end(); ++it) {
            if (it.key() != "name" && it.key() != "card" && it.key() != "parents" &&
                it.key() != "exo_parents") {
                throw ValidationError("unknown key in endogenous spec: '" + it.key() + "'");
            }
        }
        EndogenousSpec spec;
        if (!e.contains("name") || !e["name"].is_string()) {
            throw ValidationError("endogenous spec requires a string 'name'");
        }
        spec.name = e["name"].get<std::string>();
        if (!e.contains("card") || !e["card"].is_number_integer()) {
            throw ValidationError("endogenous spec for '" + spec.name + "' requires integer 'card'");
        }
        spec.card = e["card"].get<int>();
        if (e.contains("parents")) spec.parents = e["parents"].get<std::vector<std::string>>();
        if (e.contains("exo_parents")) {
            spec.exo_parents = e["exo_parents"].get<std::vector<std::string>>();
        }
        endos.push_back(std::move(spec));
    }

    std::vector<std::string> exos;
    if (j.contains("exogenous")) exos = j["exogenous"].get<std::vector<std::string>>();
    std::unordered_map<std::string, uint64_t> overrides;
    if (j.contains("exo_card_override")) {
        for (auto it = j["exo_card_override"].begin(); it != j["exo_card_override"].end(); ++it) {
            if (!it.value().is_number_unsigned() && !it.value().is_number_integer()) {
                throw ValidationError("exo_card_override values must be integers");
            }
            overrides[it.key()] = it.value().get<uint64_t>();
        }
    }
    return make(std::move(endos), std::move(exos), std::move(overrides));
}

std::string CausalDiagram::serialize() const {
    ordered_json j;
    j["endogenous"] = ordered_json::array();
    for (const auto& spec : endo_) {
        ordered_json e;
        e["name"] = spec.name;
        e["card"] = spec.card;
        e["parents"] = spec.parents;
        e["exo_parents"] = spec.exo_parents;
        j["endogenous"].push_back(std::move(e));
    }
    j["exogenous"] = exo_names_;
    if (!override_.empty()) {
        std::vector<std::string> keys;
        for (const auto& [k, _] : override_) keys.push_back(k);
        std::sort(keys.begin(), keys.end());
        ordered_json o;
        for (const auto& k : keys) o[k] = override_.at(k);
        j["exo_card_override"] = std::move(o);
    }
    return j.dump(2) + "\n";
}

CComponentPartition c_components(const CausalDiagram& d) {
    const int m = d.n_exogenous();
    std::vector<int> parent(m);
    for (int i = 0; i < m; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

    // Exogenous variables sharing a child belong to the same component.
    for (int v = 0; v < d.n_endogenous(); ++v) {
        const auto& exos = d.exo_parent_indices(v);
        for (size_t i = 1; i < exos.size(); ++i) unite(exos[0], exos[i]);
    }

    CComponentPartition part;
    std::unordered_map<int, int> root_to_comp;
    for (int u = 0; u < m; ++u) {
        int r = find(u);
        auto [it, fresh] = root_to_comp.try_emplace(r, static_cast<int>(part.components.size()));
        if (fresh) part.components.emplace_back();
        part.components[it->second].exogenous.push_back(d.exogenous()[u]);
        part.exo_component[d.exogenous()[u]] = it->second;
    }
    for (int v = 0; v < d.n_endogenous(); ++v) {
        int comp = part.exo_component.at(d.exogenous()[d.exo_parent_indices(v)[0]]);
        part.components[comp].endogenous.push_back(d.endogenous(v).name);
        part.endo_component[d.endogenous(v).name] = comp;
    }
    return part;
}

ExactCount exo_cardinality(const CausalDiagram& d, const std::string& exo_name) {
    if (d.exo_index(exo_name) < 0) throw ValidationError("unknown exogenous name '" + exo_name + "'");
    auto part = c_components(d);
    const auto& comp = part.components[part.exo_component.at(exo_name)];
    BigNat total(1);
    for (const auto& vname : comp.endogenous) {
        int v = d.endo_index(vname);
        total = total * BigNat::pow(BigNat(static_cast<uint64_t>(d.card(v))), d.pa_config_count(v));
    }
    return ExactCount::from(total);
}

ExactCount effective_exo_cardinality(const CausalDiagram& d, const std::string& exo_name) {
    auto it = d.exo_card_override().find(exo_name);
    if (it != d.exo_card_override().end()) return ExactCount::from(BigNat(it->second));
    return exo_cardinality(d, exo_name);
}

}  // namespace ctf
