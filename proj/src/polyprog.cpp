#include "ctfbounds/polyprog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <tuple>

#include <json.hpp>

#include "ctfbounds/errors.hpp"
#include "ctfbounds/exactlp.hpp"
#include "ctfbounds/rng.hpp"
#include "ctfbounds/util.hpp"

namespace ctf {

using ordered_json = nlohmann::ordered_json;

int PolynomialProgram::var_id(const std::string& name) const {
    for (size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

// map-backed polynomial during construction; flushed into the sorted vector form
using PolyMap = std::map<Monomial, double>;

Polynomial to_polynomial(const PolyMap& m) {
    Polynomial p;
    p.reserve(m.size());
    for (const auto& [mono, coeff] : m) {
        if (coeff != 0.0) p.push_back(PolyTerm{coeff, mono});
    }
    return p;
}

struct Builder {
    const CausalDiagram* d = nullptr;
    PolynomialProgram prog;
    std::vector<int> var_group;                // var id -> group id
    std::vector<PolyVarKind> group_kind;
    std::vector<std::vector<int>> group_vars;  // group id -> member ids
    std::vector<uint64_t> domain;
    // theta var ids: per exo, per atom
    std::vector<std::vector<int>> theta_ids;
    // mu var ids: per endo var: flat [pa * u_count + u] -> first var id (value 0)
    std::vector<std::vector<int>> mu_base;
    std::vector<uint64_t> mu_ucount;
    std::vector<std::vector<uint64_t>> mu_ustride;

    int add_group(PolyVarKind kind) {
        group_kind.push_back(kind);
        group_vars.emplace_back();
        return static_cast<int>(group_kind.size()) - 1;
    }

    int add_var(const std::string& name, const std::string& group, PolyVarKind kind, int gid) {
        PolyVar v;
        v.name = name;
        v.group = group;
        v.kind = kind;
        v.group_id = gid;
        v.index_in_group = static_cast<int>(group_vars[gid].size());
        prog.variables.push_back(std::move(v));
        int id = static_cast<int>(prog.variables.size()) - 1;
        var_group.push_back(gid);
        group_vars[gid].push_back(id);
        return id;
    }

    // product of a monomial with a single variable; zero (false) when two
    // distinct members of one indicator group meet. Binary powers stay at 1.
    bool multiply_var(Monomial& m, int var) const {
        bool binary = prog.variables[var].kind == PolyVarKind::Binary;
        for (auto& [v, pow] : m) {
            if (v == var) {
                if (!binary) ++pow;
                return true;
            }
            if (binary && var_group[v] == var_group[var]) return false;
        }
        m.emplace_back(var, 1);
        std::sort(m.begin(), m.end());
        return true;
    }

    PolyMap multiply(const PolyMap& a, const PolyMap& b) const {
        PolyMap out;
        for (const auto& [ma, ca] : a) {
            for (const auto& [mb, cb] : b) {
                Monomial m = ma;
                bool ok = true;
                for (const auto& [v, pow] : mb) {
                    for (int k = 0; k < pow && ok; ++k) ok = multiply_var(m, v);
                    if (!ok) break;
                }
                if (ok) out[m] += ca * cb;
            }
        }
        return out;
    }
};

std::string pa_label(const CausalDiagram& d, int v, uint64_t pa) {
    const auto& parents = d.parent_indices(v);
    if (parents.empty()) return "";
    std::string label;
    std::vector<int> vals(parents.size());
    for (size_t i = parents.size(); i-- > 0;) {
        int card = d.card(parents[i]);
        vals[i] = static_cast<int>(pa % static_cast<uint64_t>(card));
        pa /= static_cast<uint64_t>(card);
    }
    for (size_t i = 0; i < parents.size(); ++i) {
        std::string name = d.endogenous(parents[i]).name;
        for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        label += name + std::to_string(vals[i]);
    }
    return label;
}

std::string u_label(const CausalDiagram& d, int v, uint64_t u_idx,
                    const std::vector<uint64_t>& domain) {
    const auto& exos = d.exo_parent_indices(v);
    std::vector<uint64_t> atoms(exos.size());
    for (size_t i = exos.size(); i-- > 0;) {
        atoms[i] = u_idx % domain[exos[i]];
        u_idx /= domain[exos[i]];
    }
    std::string label = "u";
    for (size_t i = 0; i < atoms.size(); ++i) {
        if (i) label += "_";
        label += std::to_string(atoms[i]);
    }
    return label;
}

}  // namespace

PolynomialProgram reduce(const CausalDiagram& d, const CtfQuery& query,
                         const std::vector<EmpiricalDistribution>& regimes, uint64_t budget) {
    Builder b;
    b.d = &d;
    b.prog.query_text = serialize_query(query);

    b.domain.resize(d.n_exogenous());
    uint64_t joint = 1;
    for (int u = 0; u < d.n_exogenous(); ++u) {
        ExactCount c = effective_exo_cardinality(d, d.exogenous()[u]);
        if (!c.fits_u64 || c.saturated > budget) {
            throw FeasibilityError("latent domain for '" + d.exogenous()[u] + "' exceeds the reduction budget");
        }
        b.domain[u] = c.saturated;
        if (joint > budget / std::max<uint64_t>(1, b.domain[u])) {
            throw FeasibilityError("joint latent domain exceeds the reduction budget");
        }
        joint *= b.domain[u];
    }

    // theta variables
    b.theta_ids.resize(d.n_exogenous());
    for (int u = 0; u < d.n_exogenous(); ++u) {
        const std::string& uname = d.exogenous()[u];
        int gid = b.add_group(PolyVarKind::Simplex);
        for (uint64_t a = 0; a < b.domain[u]; ++a) {
            b.theta_ids[u].push_back(b.add_var("theta." + uname + "." + std::to_string(a),
                                               "theta:" + uname, PolyVarKind::Simplex, gid));
        }
    }
    // mu variables: one indicator group per (V, pa, u_V)
    b.mu_base.resize(d.n_endogenous());
    b.mu_ucount.resize(d.n_endogenous());
    b.mu_ustride.resize(d.n_endogenous());
    for (int v = 0; v < d.n_endogenous(); ++v) {
        const auto& exos = d.exo_parent_indices(v);
        uint64_t u_count = 1;
        b.mu_ustride[v].assign(exos.size(), 1);
        for (size_t i = exos.size(); i-- > 0;) {
            b.mu_ustride[v][i] = u_count;
            u_count *= b.domain[exos[i]];
        }
        b.mu_ucount[v] = u_count;
        uint64_t cells = d.pa_config_count(v) * u_count;
        if (cells > budget) throw FeasibilityError("mechanism variable count exceeds the reduction budget");
        b.mu_base[v].resize(cells);
        const std::string& vname = d.endogenous(v).name;
        for (uint64_t pa = 0; pa < d.pa_config_count(v); ++pa) {
            std::string pl = pa_label(d, v, pa);
            for (uint64_t uu = 0; uu < u_count; ++uu) {
                std::string ul = u_label(d, v, uu, b.domain);
                std::string base = "mu." + vname + "." + (pl.empty() ? "" : pl + ".") + ul;
                std::string group = "mu:" + vname + ":" + (pl.empty() ? "-" : pl) + ":" + ul;
                int gid = b.add_group(PolyVarKind::Binary);
                for (int val = 0; val < d.card(v); ++val) {
                    int id = b.add_var(base + "." + std::to_string(val), group, PolyVarKind::Binary, gid);
                    if (val == 0) b.mu_base[v][pa * u_count + uu] = id;
                }
            }
        }
    }

    auto mu_var = [&](int v, uint64_t pa, const std::vector<uint64_t>& atom, int val) {
        const auto& exos = d.exo_parent_indices(v);
        uint64_t uu = 0;
        for (size_t i = 0; i < exos.size(); ++i) uu += atom[exos[i]] * b.mu_ustride[v][i];
        return b.mu_base[v][pa * b.mu_ucount[v] + uu] + val;
    };

    // ---- objective ----
    PolyMap objective;
    {
        // distinct intervention contexts
        std::vector<std::vector<int>> contexts;
        std::vector<std::pair<int, int>> term_src;
        for (const auto& term : query.terms) {
            std::vector<int> ivec(d.n_endogenous(), -1);
            for (const auto& [name, val] : term.intervention) {
                int vv = d.endo_index(name);
                if (vv < 0) throw ValidationError("unknown variable '" + name + "' in query");
                ivec[vv] = val;
            }
            int cid = -1;
            for (size_t i = 0; i < contexts.size(); ++i) {
                if (contexts[i] == ivec) cid = static_cast<int>(i);
            }
            if (cid < 0) {
                contexts.push_back(std::move(ivec));
                cid = static_cast<int>(contexts.size() - 1);
            }
            term_src.emplace_back(cid, d.endo_index(term.variable));
        }

        uint64_t combo_count = 1;
        for (const auto& term : query.terms) {
            combo_count *= static_cast<uint64_t>(d.card(d.endo_index(term.variable)));
            if (combo_count > 1u << 20) throw FeasibilityError("query value grid exceeds the reduction budget");
        }

        std::vector<uint64_t> atom(d.n_exogenous(), 0);
        std::vector<int> term_values(query.terms.size());
        for (uint64_t j = 0; j < joint; ++j) {
            Monomial theta_mono;
            for (int u = 0; u < d.n_exogenous(); ++u) {
                theta_mono.emplace_back(b.theta_ids[u][atom[u]], 1);
            }
            std::sort(theta_mono.begin(), theta_mono.end());
            PolyMap theta_poly;
            theta_poly[theta_mono] = 1.0;

            // indicator polynomials, memoized per (context, variable, value)
            std::map<std::tuple<int, int, int>, PolyMap> memo;
            std::function<const PolyMap&(int, int, int)> ind = [&](int ctx, int v,
                                                                   int val) -> const PolyMap& {
                auto key = std::make_tuple(ctx, v, val);
                auto it = memo.find(key);
                if (it != memo.end()) return it->second;
                PolyMap out;
                if (contexts[ctx][v] >= 0) {
                    if (contexts[ctx][v] == val) out[Monomial{}] = 1.0;
                } else {
                    const auto& parents = d.parent_indices(v);
                    for (uint64_t pa = 0; pa < d.pa_config_count(v); ++pa) {
                        PolyMap prod;
                        prod[Monomial{{mu_var(v, pa, atom, val), 1}}] = 1.0;
                        uint64_t rest = pa;
                        std::vector<int> pvals(parents.size());
                        for (size_t i = parents.size(); i-- > 0;) {
                            pvals[i] = static_cast<int>(rest % static_cast<uint64_t>(d.card(parents[i])));
                            rest /= static_cast<uint64_t>(d.card(parents[i]));
                        }
                        bool live = true;
                        for (size_t i = 0; i < parents.size() && live; ++i) {
                            const PolyMap& sub = ind(ctx, parents[i], pvals[i]);
                            if (sub.empty()) {
                                live = false;
                                break;
                            }
                            prod = b.multiply(prod, sub);
                            if (prod.empty()) live = false;
                        }
                        if (live) {
                            for (const auto& [m, c] : prod) out[m] += c;
                        }
                    }
                }
                return memo.emplace(key, std::move(out)).first->second;
            };

            for (uint64_t combo = 0; combo < combo_count; ++combo) {
                uint64_t rest = combo;
                for (size_t t = query.terms.size(); t-- > 0;) {
                    int card = d.card(d.endo_index(query.terms[t].variable));
                    term_values[t] = static_cast<int>(rest % static_cast<uint64_t>(card));
                    rest /= static_cast<uint64_t>(card);
                }
                double weight = evaluate_event(query, term_values);
                if (weight == 0.0) continue;
                PolyMap prod = theta_poly;
                bool live = true;
                for (size_t t = 0; t < query.terms.size() && live; ++t) {
                    const PolyMap& sub = ind(term_src[t].first, term_src[t].second, term_values[t]);
                    if (sub.empty()) {
                        live = false;
                        break;
                    }
                    prod = b.multiply(prod, sub);
                    if (prod.empty()) live = false;
                }
                if (live) {
                    for (const auto& [m, c] : prod) objective[m] += weight * c;
                }
            }

            for (int u = d.n_exogenous() - 1; u >= 0; --u) {
                if (++atom[u] < b.domain[u]) break;
                atom[u] = 0;
            }
        }
    }
    b.prog.objective = to_polynomial(objective);

    // ---- data constraints ----
    for (const auto& dist : regimes) {
        b.prog.regime_tags.push_back(dist.tag.empty() ? "obs" : dist.tag);
        std::map<std::string, int> interv = parse_regime_tag(dist.tag);
        std::vector<int> ivec(d.n_endogenous(), -1);
        for (const auto& [name, val] : interv) {
            int vv = d.endo_index(name);
            if (vv < 0) throw ValidationError("unknown variable '" + name + "' in regime tag");
            ivec[vv] = val;
        }
        std::vector<int> free_vars;
        uint64_t n_configs = 1;
        for (int v = 0; v < d.n_endogenous(); ++v) {
            if (ivec[v] < 0) {
                free_vars.push_back(v);
                n_configs *= static_cast<uint64_t>(d.card(v));
            }
        }
        if (n_configs * joint > budget) throw FeasibilityError("constraint family exceeds the reduction budget");
        for (uint64_t k = 0; k < n_configs; ++k) {
            std::vector<int> values(ivec.begin(), ivec.end());
            uint64_t rest = k;
            for (size_t i = free_vars.size(); i-- > 0;) {
                int v = free_vars[i];
                values[v] = static_cast<int>(rest % static_cast<uint64_t>(d.card(v)));
                rest /= static_cast<uint64_t>(d.card(v));
            }
            PolyMap poly;
            std::vector<uint64_t> atom(d.n_exogenous(), 0);
            for (uint64_t j = 0; j < joint; ++j) {
                Monomial m;
                bool ok = true;
                for (int u = 0; u < d.n_exogenous() && ok; ++u) {
                    ok = b.multiply_var(m, b.theta_ids[u][atom[u]]);
                }
                for (int v : free_vars) {
                    uint64_t pa = 0;
                    const auto& parents = d.parent_indices(v);
                    for (size_t i = 0; i < parents.size(); ++i) {
                        pa += static_cast<uint64_t>(values[parents[i]]) *
                              d.pa_stride(v, static_cast<int>(i));
                    }
                    if (!ok) break;
                    ok = b.multiply_var(m, mu_var(v, pa, atom, values[v]));
                }
                if (ok) poly[m] += 1.0;
                for (int u = d.n_exogenous() - 1; u >= 0; --u) {
                    if (++atom[u] < b.domain[u]) break;
                    atom[u] = 0;
                }
            }
            PolyConstraint con;
            con.poly = to_polynomial(poly);
            con.rel = PolyRel::Eq;
            con.rhs = static_cast<double>(dist.frequency(config_index(d, values)));
            std::string assign;
            std::vector<std::pair<std::string, int>> named;
            for (int v = 0; v < d.n_endogenous(); ++v) {
                std::string name = d.endogenous(v).name;
                for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                named.emplace_back(name, values[v]);
            }
            std::sort(named.begin(), named.end());
            for (size_t i = 0; i < named.size(); ++i) {
                if (i) assign += ",";
                assign += named[i].first + "=" + std::to_string(named[i].second);
            }
            con.tag = (dist.tag.empty() ? "obs" : "do " + dist.tag) + ":" + assign;
            b.prog.constraints.push_back(std::move(con));
        }
    }

    // ---- structural rows: group sums, indicator rows, [0,1] bounds ----
    for (size_t g = 0; g < b.group_vars.size(); ++g) {
        const auto& members = b.group_vars[g];
        if (members.empty()) continue;
        const PolyVar& first = b.prog.variables[members[0]];
        PolyConstraint sum;
        for (int id : members) sum.poly.push_back(PolyTerm{1.0, Monomial{{id, 1}}});
        sum.rel = PolyRel::Eq;
        sum.rhs = 1.0;
        sum.tag = (first.kind == PolyVarKind::Simplex ? "simplex-sum:" : "indicator-sum:") + first.group;
        b.prog.constraints.push_back(std::move(sum));
        if (first.kind == PolyVarKind::Binary) {
            for (int id : members) {
                PolyConstraint ind;
                ind.poly.push_back(PolyTerm{1.0, Monomial{{id, 1}}});
                ind.poly.push_back(PolyTerm{-1.0, Monomial{{id, 2}}});
                ind.rel = PolyRel::Eq;
                ind.rhs = 0.0;
                ind.tag = "indicator:" + b.prog.variables[id].name;
                b.prog.constraints.push_back(std::move(ind));
            }
        }
        for (int id : members) {
            PolyConstraint ub;
            ub.poly.push_back(PolyTerm{1.0, Monomial{{id, 1}}});
            ub.rel = PolyRel::Le;
            ub.rhs = 1.0;
            ub.tag = "ub:" + b.prog.variables[id].name;
            b.prog.constraints.push_back(std::move(ub));
            PolyConstraint lb;
            lb.poly.push_back(PolyTerm{-1.0, Monomial{{id, 1}}});
            lb.rel = PolyRel::Le;
            lb.rhs = 0.0;
            lb.tag = "lb:" + b.prog.variables[id].name;
            b.prog.constraints.push_back(std::move(lb));
        }
    }

    return b.prog;
}

std::string emit(const PolynomialProgram& program) {
    ordered_json j;
    j["variables"] = ordered_json::array();
    for (const auto& v : program.variables) {
        ordered_json e;
        e["name"] = v.name;
        e["group"] = v.group;
        e["kind"] = v.kind == PolyVarKind::Simplex ? "simplex" : "binary";
        j["variables"].push_back(std::move(e));
    }
    auto poly_json = [&](const Polynomial& p) {
        ordered_json arr = ordered_json::array();
        for (const auto& term : p) {
            ordered_json t;
            t["c"] = term.coeff;
            ordered_json m = ordered_json::array();
            for (const auto& [var, pow] : term.m) {
                m.push_back(ordered_json::array({program.variables[var].name, pow}));
            }
            t["m"] = std::move(m);
            arr.push_back(std::move(t));
        }
        return arr;
    };
    j["objective"] = poly_json(program.objective);
    j["constraints"] = ordered_json::array();
    for (const auto& c : program.constraints) {
        ordered_json e;
        e["m"] = poly_json(c.poly);
        e["rel"] = c.rel == PolyRel::Eq ? "=" : "<=";
        e["rhs"] = c.rhs;
        e["tag"] = c.tag;
        j["constraints"].push_back(std::move(e));
    }
    ordered_json meta;
    meta["query"] = program.query_text;
    meta["regimes"] = program.regime_tags;
    j["metadata"] = std::move(meta);
    return j.dump(2) + "\n";
}

void emit_file(const PolynomialProgram& program, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write program file '" + path + "'");
    out << emit(program);
}

PolynomialProgram parse_program(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("program file is not valid JSON: ") + e.what());
    }
    PolynomialProgram p;
    std::map<std::string, int> ids;
    std::map<std::string, int> group_ids;
    for (const auto& e : j.at("variables")) {
        PolyVar v;
        v.name = e.at("name").get<std::string>();
        v.group = e.at("group").get<std::string>();
        v.kind = e.at("kind").get<std::string>() == "simplex" ? PolyVarKind::Simplex : PolyVarKind::Binary;
        auto [it, fresh] = group_ids.try_emplace(v.group, static_cast<int>(group_ids.size()));
        v.group_id = it->second;
        ids[v.name] = static_cast<int>(p.variables.size());
        p.variables.push_back(std::move(v));
    }
    std::map<int, int> group_counts;
    for (auto& v : p.variables) v.index_in_group = group_counts[v.group_id]++;
    auto parse_poly = [&](const nlohmann::json& arr) {
        Polynomial poly;
        for (const auto& t : arr) {
            PolyTerm term;
            term.coeff = t.at("c").get<double>();
            for (const auto& f : t.at("m")) {
                auto it = ids.find(f.at(0).get<std::string>());
                if (it == ids.end()) throw ValidationError("program references unknown variable '" + f.at(0).get<std::string>() + "'");
                term.m.emplace_back(it->second, f.at(1).get<int>());
            }
            std::sort(term.m.begin(), term.m.end());
            poly.push_back(std::move(term));
        }
        return poly;
    };
    p.objective = parse_poly(j.at("objective"));
    for (const auto& e : j.at("constraints")) {
        PolyConstraint c;
        c.poly = parse_poly(e.at("m"));
        c.rel = e.at("rel").get<std::string>() == "=" ? PolyRel::Eq : PolyRel::Le;
        c.rhs = e.at("rhs").get<double>();
        c.tag = e.at("tag").get<std::string>();
        p.constraints.push_back(std::move(c));
    }
    if (j.contains("metadata")) {
        p.query_text = j["metadata"].value("query", "");
        if (j["metadata"].contains("regimes")) {
            p.regime_tags = j["metadata"]["regimes"].get<std::vector<std::string>>();
        }
    }
    return p;
}

namespace {

double eval_poly(const Polynomial& p, const std::vector<double>& x) {
    KahanSum acc;
    for (const auto& term : p) {
        double v = term.coeff;
        for (const auto& [var, pow] : term.m) {
            for (int k = 0; k < pow; ++k) v *= x[var];
        }
        acc.add(v);
    }
    return acc.value();
}

}  // namespace

PolyEval evaluate(const PolynomialProgram& program, const std::vector<double>& assignment) {
    if (assignment.size() != program.variables.size()) {
        throw ValidationError("assignment does not cover all program variables");
    }
    PolyEval out;
    out.objective = eval_poly(program.objective, assignment);
    for (const auto& c : program.constraints) {
        double lhs = eval_poly(c.poly, assignment);
        double viol = c.rel == PolyRel::Eq ? std::fabs(lhs - c.rhs) : std::max(0.0, lhs - c.rhs);
        out.max_violation = std::max(out.max_violation, viol);
    }
    return out;
}

PolyEval evaluate(const PolynomialProgram& program, const std::map<std::string, double>& assignment) {
    std::vector<double> x(program.variables.size());
    for (size_t i = 0; i < program.variables.size(); ++i) {
        auto it = assignment.find(program.variables[i].name);
        if (it == assignment.end()) {
            throw ValidationError("assignment missing variable '" + program.variables[i].name + "'");
        }
        x[i] = it->second;
    }
    return evaluate(program, x);
}

std::vector<double> encode_assignment(const PolynomialProgram& program, const CanonicalSCM& model) {
    const CausalDiagram& d = *model.diagram;
    std::vector<double> x(program.variables.size(), 0.0);
    for (size_t i = 0; i < program.variables.size(); ++i) {
        const std::string& name = program.variables[i].name;
        // names: theta.<U>.<atom> or mu.<V>[.<palabel>].u<...>.<value>
        if (name.rfind("theta.", 0) == 0) {
            auto second = name.find('.', 6);
            std::string uname = name.substr(6, second - 6);
            uint64_t atom = std::stoull(name.substr(second + 1));
            int u = d.exo_index(uname);
            if (u < 0) throw ValidationError("program variable references unknown exogenous '" + uname + "'");
            x[i] = model.theta[u].weights.at(atom);
        }
    }
    // mu variables: rebuild by walking tables (names are positional, so walk
    // the same construction order used by reduce)
    for (size_t i = 0; i < program.variables.size(); ++i) {
        const std::string& name = program.variables[i].name;
        if (name.rfind("mu.", 0) != 0) continue;
        // parse: mu.<V>....<value> with u-label carrying atom indices
        size_t p1 = name.find('.', 3);
        std::string vname = name.substr(3, p1 - 3);
        int v = d.endo_index(vname);
        if (v < 0) throw ValidationError("program variable references unknown variable '" + vname + "'");
        size_t last_dot = name.rfind('.');
        int val = std::stoi(name.substr(last_dot + 1));
        // u-label: between the penultimate and final dot
        size_t u_dot = name.rfind('.', last_dot - 1);
        std::string ulabel = name.substr(u_dot + 1, last_dot - u_dot - 1);  // "u3" or "u3_5"
        std::vector<uint64_t> atoms;
        std::string cur;
        for (size_t k = 1; k <= ulabel.size(); ++k) {
            if (k == ulabel.size() || ulabel[k] == '_') {
                atoms.push_back(std::stoull(cur));
                cur.clear();
            } else {
                cur += ulabel[k];
            }
        }
        // pa label: between first and penultimate dot (may be absent)
        uint64_t pa = 0;
        if (u_dot > p1) {
            std::string plabel = name.substr(p1 + 1, u_dot - p1 - 1);
            const auto& parents = d.parent_indices(v);
            size_t pos = 0;
            for (size_t pi = 0; pi < parents.size(); ++pi) {
                std::string pname = d.endogenous(parents[pi]).name;
                for (auto& ch : pname) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                if (plabel.compare(pos, pname.size(), pname) != 0) {
                    throw ValidationError("cannot decode program variable '" + name + "'");
                }
                pos += pname.size();
                size_t start = pos;
                while (pos < plabel.size() && std::isdigit(static_cast<unsigned char>(plabel[pos]))) ++pos;
                int pval = std::stoi(plabel.substr(start, pos - start));
                pa += static_cast<uint64_t>(pval) * d.pa_stride(v, static_cast<int>(pi));
            }
        }
        ExoAssignment u;
        u.atom.assign(d.n_exogenous(), 0);
        const auto& exos = d.exo_parent_indices(v);
        for (size_t k = 0; k < exos.size() && k < atoms.size(); ++k) u.atom[exos[k]] = atoms[k];
        x[i] = mu_value(model, v, pa, u, nullptr) == val ? 1.0 : 0.0;
    }
    return x;
}

namespace {

struct SolverScratch {
    std::vector<std::vector<int>> simplex_groups;
    std::vector<std::vector<int>> binary_groups;
    std::vector<int> var_group;
};

SolverScratch analyze(const PolynomialProgram& p) {
    SolverScratch s;
    int n_groups = 0;
    for (const auto& v : p.variables) n_groups = std::max(n_groups, v.group_id + 1);
    std::vector<std::vector<int>> members(n_groups);
    std::vector<PolyVarKind> kind(n_groups, PolyVarKind::Simplex);
    s.var_group.resize(p.variables.size());
    for (size_t i = 0; i < p.variables.size(); ++i) {
        members[p.variables[i].group_id].push_back(static_cast<int>(i));
        kind[p.variables[i].group_id] = p.variables[i].kind;
        s.var_group[i] = p.variables[i].group_id;
    }
    for (int g = 0; g < n_groups; ++g) {
        if (members[g].empty()) continue;
        if (kind[g] == PolyVarKind::Simplex) {
            s.simplex_groups.push_back(members[g]);
        } else {
            s.binary_groups.push_back(members[g]);
        }
    }
    return s;
}

// Exact LP over one simplex group with all other variables fixed. Equality
// rows get paired slack columns weighted by a large cost, so the step always
// returns the least-violating point for that block.
void lp_step(const PolynomialProgram& p, const std::vector<int>& group,
             std::vector<double>& x, bool maximize) {
    std::vector<int> col_of(p.variables.size(), -1);
    for (size_t i = 0; i < group.size(); ++i) col_of[group[i]] = static_cast<int>(i);
    const int n = static_cast<int>(group.size());

    auto fold = [&](const Polynomial& poly, std::vector<Rat>& coeffs, Rat& constant) {
        coeffs.assign(n, Rat());
        constant = Rat();
        for (const auto& term : poly) {
            double fixed = term.coeff;
            int live_var = -1;
            int live_pow = 0;
            bool dead = false;
            for (const auto& [var, pow] : term.m) {
                if (col_of[var] >= 0) {
                    if (live_var >= 0 && live_var != var) {
                        dead = true;  // quadratic in the block; cannot appear for theta blocks
                        break;
                    }
                    live_var = var;
                    live_pow = pow;
                } else {
                    for (int k = 0; k < pow; ++k) fixed *= x[var];
                }
            }
            if (dead || fixed == 0.0) continue;
            if (live_var < 0) {
                constant = constant + Rat::from_double(fixed);
            } else if (live_pow == 1) {
                coeffs[col_of[live_var]] = coeffs[col_of[live_var]] + Rat::from_double(fixed);
            }
            // higher powers of a simplex variable do not occur in reduce() output
        }
    };

    LpProblem lp;
    std::vector<Rat> obj_coeffs;
    Rat obj_const;
    fold(p.objective, obj_coeffs, obj_const);
    const Rat kPenalty(100000);
    std::vector<Rat> objective = obj_coeffs;
    if (maximize) {
        for (auto& c : objective) c = -c;  // we always minimize below
    }
    int n_cols = n;
    std::vector<LpConstraint> rows;
    for (const auto& con : p.constraints) {
        bool touches = false;
        for (const auto& term : con.poly) {
            for (const auto& [var, pow] : term.m) {
                if (col_of[var] >= 0) touches = true;
            }
        }
        if (!touches) continue;
        std::vector<Rat> coeffs;
        Rat constant;
        fold(con.poly, coeffs, constant);
        LpConstraint row;
        row.coeffs = coeffs;
        row.rhs = Rat::from_double(con.rhs) - constant;
        row.rel = con.rel == PolyRel::Eq ? LpRel::Eq : LpRel::Le;
        if (con.rel == PolyRel::Eq) {
            // slack pair columns appended later
            row.coeffs.resize(n_cols, Rat());
        }
        rows.push_back(std::move(row));
    }
    // append slack pairs for equality rows
    int slack_base = n_cols;
    int n_slacks = 0;
    for (auto& row : rows) {
        if (row.rel == LpRel::Eq) n_slacks += 2;
    }
    int total_cols = n_cols + n_slacks;
    objective.resize(total_cols, Rat());
    int next = slack_base;
    for (auto& row : rows) {
        row.coeffs.resize(total_cols, Rat());
        if (row.rel == LpRel::Eq) {
            row.coeffs[next] = Rat(1);
            row.coeffs[next + 1] = Rat(-1);
            objective[next] = kPenalty;
            objective[next + 1] = kPenalty;
            next += 2;
        }
    }
    lp.n_vars = total_cols;
    lp.objective = objective;
    lp.constraints = rows;
    LpResult res = lp_solve(lp, /*maximize=*/false);
    if (res.status != LpResult::Status::Optimal) return;  // keep current point
    for (int i = 0; i < n; ++i) x[group[i]] = res.solution[i].to_double();
}

struct Candidate {
    double violation = INFINITY;
    double objective = 0.0;
    std::vector<double> x;

    bool better_than(const Candidate& other, bool maximize) const {
        const double tol = 1e-7;
        bool self_feasible = violation <= tol;
        bool other_feasible = other.violation <= tol;
        if (self_feasible != other_feasible) return self_feasible;
        if (!self_feasible) return violation < other.violation - 1e-12;
        double a = maximize ? objective : -objective;
        double b = maximize ? other.objective : -other.objective;
        return a > b + 1e-12;
    }
};

}  // namespace

ProgramSolution local_solve(const PolynomialProgram& program, SolveDirection direction, int restarts,
                            uint64_t seed) {
    if (restarts < 1) throw ValidationError("local_solve requires restarts >= 1");
    SolverScratch scratch = analyze(program);
    const bool maximize = direction == SolveDirection::Max;

    std::vector<Candidate> results(restarts);
    parallel_for(restarts, [&](int r) {
        Rng rng(Rng::derive(seed, static_cast<uint64_t>(r)));
        std::vector<double> x(program.variables.size(), 0.0);
        for (const auto& g : scratch.simplex_groups) {
            std::vector<double> w = rng.dirichlet(std::vector<double>(g.size(), 1.0));
            for (size_t i = 0; i < g.size(); ++i) x[g[i]] = w[i];
        }
        for (const auto& g : scratch.binary_groups) {
            size_t pick = rng.below(g.size());
            for (size_t i = 0; i < g.size(); ++i) x[g[i]] = i == pick ? 1.0 : 0.0;
        }

        auto score = [&](const std::vector<double>& point) {
            PolyEval e = evaluate(program, point);
            Candidate c;
            c.violation = e.max_violation;
            c.objective = e.objective;
            return c;
        };
        Candidate current = score(x);
        current.x = x;
        for (int pass = 0; pass < 40; ++pass) {
            bool improved = false;
            for (const auto& g : scratch.simplex_groups) {
                std::vector<double> trial = current.x;
                lp_step(program, g, trial, maximize);
                Candidate cand = score(trial);
                cand.x = std::move(trial);
                if (cand.better_than(current, maximize)) {
                    current = std::move(cand);
                    improved = true;
                }
            }
            for (const auto& g : scratch.binary_groups) {
                int active = -1;
                for (size_t i = 0; i < g.size(); ++i) {
                    if (current.x[g[i]] > 0.5) active = static_cast<int>(i);
                }
                for (size_t i = 0; i < g.size(); ++i) {
                    if (static_cast<int>(i) == active) continue;
                    std::vector<double> trial = current.x;
                    for (size_t k = 0; k < g.size(); ++k) trial[g[k]] = k == i ? 1.0 : 0.0;
                    Candidate cand = score(trial);
                    cand.x = std::move(trial);
                    if (cand.better_than(current, maximize)) {
                        current = std::move(cand);
                        improved = true;
                    }
                }
            }
            if (!improved) break;
        }
        results[r] = std::move(current);
    });

    int best = 0;
    for (int r = 1; r < restarts; ++r) {
        if (results[r].better_than(results[best], maximize)) best = r;
    }
    ProgramSolution sol;
    sol.assignment = results[best].x;
    sol.objective = results[best].objective;
    sol.max_violation = results[best].violation;
    sol.restarts = restarts;
    return sol;
}

}  // namespace ctf
