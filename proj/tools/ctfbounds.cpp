#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctfbounds/bounds.hpp"
#include "ctfbounds/data.hpp"
#include "ctfbounds/errors.hpp"
#include "ctfbounds/graph.hpp"
#include "ctfbounds/polyprog.hpp"
#include "ctfbounds/query.hpp"
#include "ctfbounds/report.hpp"
#include "ctfbounds/sampler.hpp"
#include "ctfbounds/scm.hpp"
#include "ctfbounds/synth.hpp"
#include "ctfbounds/util.hpp"

namespace {

using ctf::RunManifest;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct BoundArgs {
    std::string graph_path, data_path, query_text, out_path, draws_out;
    std::string sampler = "blocked";
    double alpha = 0.0, epsilon = 0.05, delta = 0.05;
    uint64_t seed = 0, burnin = 500, draws = 0, thin = 1, mc_samples = 4096;
    int chains = 1;
    std::vector<std::string> prior_alphas;  // NAME=VALUE
};

ctf::PriorConfig resolve_prior(const ctf::CausalDiagram& diagram,
                               const std::vector<std::string>& prior_alphas,
                               std::vector<std::string>* notes) {
    if (prior_alphas.empty()) {
        // flat prior when every latent domain is materializable
        bool ok = true;
        for (const auto& name : diagram.exogenous()) {
            if (!ctf::effective_exo_cardinality(diagram, name).fits_u64) ok = false;
        }
        if (ok) {
            notes->push_back("prior: flat (alpha_U = d_U)");
            return ctf::PriorConfig::flat(diagram);
        }
        notes->push_back("prior: alpha_U = 1 (latent domains too large for a flat prior)");
        return ctf::PriorConfig::with_alphas(diagram, {});
    }
    std::map<std::string, double> alphas;
    for (const auto& spec : prior_alphas) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) throw ctf::UsageError("--prior-alpha expects NAME=VALUE");
        alphas[spec.substr(0, eq)] = std::stod(spec.substr(eq + 1));
    }
    for (const auto& [name, alpha] : alphas) {
        notes->push_back("prior: alpha_" + name + " = " + format_double(alpha));
    }
    return ctf::PriorConfig::with_alphas(diagram, alphas);
}

int cmd_bound(const BoundArgs& args) {
    ctf::CausalDiagram diagram = ctf::CausalDiagram::parse(ctf::read_file(args.graph_path));
    ctf::Dataset data = ctf::load_csv_file(args.data_path, diagram);
    ctf::CtfQuery query = ctf::parse_query(args.query_text, diagram);

    RunManifest manifest;
    manifest.command = "bound";
    manifest.flags = {{"graph", args.graph_path},
                      {"data", args.data_path},
                      {"query", args.query_text},
                      {"sampler", args.sampler},
                      {"alpha", format_double(args.alpha)},
                      {"epsilon", format_double(args.epsilon)},
                      {"delta", format_double(args.delta)},
                      {"burnin", std::to_string(args.burnin)},
                      {"thin", std::to_string(args.thin)},
                      {"chains", std::to_string(args.chains)},
                      {"mc_samples", std::to_string(args.mc_samples)}};
    manifest.seeds["base"] = args.seed;
    manifest.input_digests[args.graph_path] = ctf::sha256_file(args.graph_path);
    manifest.input_digests[args.data_path] = ctf::sha256_file(args.data_path);

    ctf::ChainConfig config;
    config.kind = args.sampler == "collapsed" ? ctf::SamplerKind::Collapsed : ctf::SamplerKind::Blocked;
    if (args.sampler != "collapsed" && args.sampler != "blocked") {
        throw ctf::UsageError("--sampler must be 'blocked' or 'collapsed'");
    }
    config.burnin = args.burnin;
    uint64_t required = ctf::required_draws(args.epsilon, args.delta);
    uint64_t per_chain = args.draws > 0 ? args.draws
                                        : (required + args.chains - 1) / static_cast<uint64_t>(args.chains);
    config.draws = per_chain;
    config.thinning = args.thin;
    config.chains = args.chains;
    config.seed = args.seed;
    config.mc_samples = args.mc_samples;
    manifest.flags["draws_per_chain"] = std::to_string(per_chain);
    manifest.notes.push_back("required draws for (epsilon, delta): " + std::to_string(required));

    ctf::PriorConfig prior = resolve_prior(diagram, args.prior_alphas, &manifest.notes);
    ctf::PosteriorRun run = ctf::run_chain(data, query, prior, config);
    ctf::CredibleInterval ci = ctf::credible_interval(run.draws, args.alpha);
    ci.epsilon = args.epsilon;
    ci.delta = args.delta;

    for (int c = 0; c < args.chains; ++c) {
        manifest.seeds["chain_" + std::to_string(c)] = run.chain_seeds[c];
    }
    for (const auto& note : run.notes) manifest.notes.push_back(note);

    std::string draws_path = args.draws_out.empty() ? args.out_path + ".draws.csv" : args.draws_out;
    std::string draws_csv;
    for (double v : run.draws) draws_csv += format_double(v) + "\n";
    ctf::write_file(draws_path, draws_csv);

    double mean = 0.0, mn = run.draws[0], mx = run.draws[0];
    for (double v : run.draws) {
        mean += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    mean /= static_cast<double>(run.draws.size());
    double var = 0.0;
    for (double v : run.draws) var += (v - mean) * (v - mean);
    var = run.draws.size() > 1 ? var / static_cast<double>(run.draws.size() - 1) : 0.0;

    ordered_json report;
    report["manifest"] = manifest.to_json();
    report["query"] = ctf::serialize_query(query);
    report["interval"] = {{"alpha", ci.alpha}, {"lower", ci.lower}, {"upper", ci.upper},
                          {"T", ci.T},         {"epsilon", ci.epsilon}, {"delta", ci.delta}};
    report["summary"] = {{"mean", mean},
                         {"sd", std::sqrt(var)},
                         {"min", mn},
                         {"max", mx},
                         {"r_hat", std::isnan(run.r_hat) ? ordered_json() : ordered_json(run.r_hat)}};
    report["draws_path"] = draws_path;
    report["histogram"] = ctf::histogram_json(ctf::make_histogram(run.draws));
    ctf::write_file(args.out_path, report.dump(2) + "\n");
    std::cout << "interval [" << format_double(ci.lower) << ", " << format_double(ci.upper)
              << "] from " << ci.T << " draws -> " << args.out_path << "\n";
    return 0;
}

struct SimArgs {
    std::string scm, out_path, graph_out;
    uint64_t n = 0, seed = 0;
    std::vector<std::string> regimes;  // "count:tag"
};

int cmd_simulate(const SimArgs& args) {
    ctf::SyntheticScm scm(ctf::parse_scm_kind(args.scm));
    std::vector<ctf::RegimeSpec> plan;
    if (args.n > 0) plan.push_back({{}, args.n});
    for (const auto& spec : args.regimes) {
        auto colon = spec.find(':');
        if (colon == std::string::npos) throw ctf::UsageError("--regime expects COUNT:TAG (TAG empty for observational)");
        ctf::RegimeSpec r;
        r.count = std::stoull(spec.substr(0, colon));
        r.intervention = ctf::parse_regime_tag(spec.substr(colon + 1));
        plan.push_back(std::move(r));
    }
    if (plan.empty()) throw ctf::UsageError("nothing to simulate: give --n or --regime");
    ctf::Dataset data = scm.sample(plan, args.seed);
    ctf::save_csv_file(data, args.out_path);
    if (!args.graph_out.empty()) ctf::write_file(args.graph_out, scm.diagram().serialize());

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.flags = {{"scm", args.scm}, {"out", args.out_path}};
    manifest.seeds["base"] = args.seed;
    manifest.flags["rows"] = std::to_string(data.size());
    for (const auto& note : scm.notes()) manifest.notes.push_back(note);
    manifest.input_digests[args.out_path] = ctf::sha256_file(args.out_path);
    ctf::write_file(args.out_path + ".manifest.json", manifest.to_json().dump(2) + "\n");
    std::cout << "wrote " << data.size() << " rows -> " << args.out_path << "\n";
    return 0;
}

struct TruthArgs {
    std::string scm, model_path, query_text, out_path;
    uint64_t n = 10'000'000, seed = 0;
};

int cmd_truth(const TruthArgs& args) {
    RunManifest manifest;
    manifest.command = "truth";
    manifest.seeds["base"] = args.seed;
    manifest.flags["query"] = args.query_text;
    ordered_json report;
    if (!args.model_path.empty()) {
        ctf::LoadedModel lm = ctf::load_model(ctf::read_file(args.model_path));
        ctf::CtfQuery query = ctf::parse_query(args.query_text, *lm.diagram);
        manifest.flags["model"] = args.model_path;
        manifest.input_digests[args.model_path] = ctf::sha256_file(args.model_path);
        double value = ctf::ctf_probability_enumerate(lm.model, query);
        report["estimate"] = value;
        report["method"] = "enumerate";
    } else {
        ctf::SyntheticScm scm(ctf::parse_scm_kind(args.scm));
        ctf::CtfQuery query = ctf::parse_query(args.query_text, scm.diagram());
        manifest.flags["scm"] = args.scm;
        manifest.flags["n"] = std::to_string(args.n);
        for (const auto& note : scm.notes()) manifest.notes.push_back(note);
        ctf::GroundTruth gt = scm.ground_truth(query, args.n, args.seed);
        report["estimate"] = gt.estimate;
        report["std_error"] = gt.std_error;
        report["n"] = gt.samples;
        report["method"] = "mc";
    }
    report["query"] = args.query_text;
    report["manifest"] = manifest.to_json();
    std::string text = report.dump(2) + "\n";
    if (!args.out_path.empty()) {
        ctf::write_file(args.out_path, text);
    }
    std::cout << text;
    return 0;
}

struct ExactArgs {
    std::string graph_path, data_path, query_text, out_path;
    double slack = 0.0;
};

int cmd_exact(const ExactArgs& args) {
    ctf::CausalDiagram diagram = ctf::CausalDiagram::parse(ctf::read_file(args.graph_path));
    ctf::Dataset data = ctf::load_csv_file(args.data_path, diagram);
    ctf::CtfQuery query = ctf::parse_query(args.query_text, diagram);
    std::vector<ctf::EmpiricalDistribution> dists;
    for (const auto& tag : data.regimes()) dists.push_back(ctf::empirical(data, tag));
    ctf::BaselineBound bound = ctf::lp_exact_bound(diagram, query, dists, args.slack);

    RunManifest manifest;
    manifest.command = "exact";
    manifest.flags = {{"graph", args.graph_path},
                      {"data", args.data_path},
                      {"query", args.query_text},
                      {"slack", format_double(args.slack)}};
    manifest.input_digests[args.graph_path] = ctf::sha256_file(args.graph_path);
    manifest.input_digests[args.data_path] = ctf::sha256_file(args.data_path);
    if (args.slack > 0.0) manifest.notes.push_back("slack tolerance applied to empirical equalities");

    ordered_json report;
    report["manifest"] = manifest.to_json();
    report["query"] = args.query_text;
    report["method"] = bound.method;
    report["lower"] = bound.lower;
    report["upper"] = bound.upper;
    report["max_residual"] = 0.0;  // rational solve: equalities hold exactly
    report["slack"] = args.slack;
    ordered_json regimes = ordered_json::array();
    for (const auto& d : dists) regimes.push_back(d.tag.empty() ? "obs" : d.tag);
    report["regimes"] = std::move(regimes);
    std::string text = report.dump(2) + "\n";
    if (!args.out_path.empty()) ctf::write_file(args.out_path, text);
    std::cout << text;
    return 0;
}

struct PolyArgs {
    std::string graph_path, data_path, query_text, out_path;
    int solve_restarts = 0;  // 0 = emit only
    uint64_t seed = 0;
};

int cmd_emit_polyprog(const PolyArgs& args) {
    ctf::CausalDiagram diagram = ctf::CausalDiagram::parse(ctf::read_file(args.graph_path));
    ctf::Dataset data = ctf::load_csv_file(args.data_path, diagram);
    ctf::CtfQuery query = ctf::parse_query(args.query_text, diagram);
    std::vector<ctf::EmpiricalDistribution> dists;
    for (const auto& tag : data.regimes()) dists.push_back(ctf::empirical(data, tag));
    ctf::PolynomialProgram program = ctf::reduce(diagram, query, dists);
    ctf::emit_file(program, args.out_path);

    RunManifest manifest;
    manifest.command = "emit-polyprog";
    manifest.flags = {{"graph", args.graph_path}, {"data", args.data_path}, {"query", args.query_text}};
    manifest.input_digests[args.graph_path] = ctf::sha256_file(args.graph_path);
    manifest.input_digests[args.data_path] = ctf::sha256_file(args.data_path);
    manifest.seeds["base"] = args.seed;

    ordered_json report;
    report["manifest"] = manifest.to_json();
    report["program_path"] = args.out_path;
    report["variables"] = program.variables.size();
    report["constraints"] = program.constraints.size();
    if (args.solve_restarts > 0) {
        ctf::ProgramSolution lo = ctf::local_solve(program, ctf::SolveDirection::Min, args.solve_restarts, args.seed);
        ctf::ProgramSolution hi = ctf::local_solve(program, ctf::SolveDirection::Max, args.solve_restarts, args.seed);
        report["local_solve"] = {{"min", lo.objective},
                                 {"max", hi.objective},
                                 {"min_violation", lo.max_violation},
                                 {"max_violation", hi.max_violation},
                                 {"restarts", args.solve_restarts}};
    }
    std::string text = report.dump(2) + "\n";
    ctf::write_file(args.out_path + ".report.json", text);
    std::cout << text;
    return 0;
}

struct NaturalArgs {
    std::string graph_path, data_path, query_text, out_path;
};

int cmd_natural(const NaturalArgs& args) {
    ctf::CausalDiagram diagram = ctf::CausalDiagram::parse(ctf::read_file(args.graph_path));
    ctf::Dataset data = ctf::load_csv_file(args.data_path, diagram);
    ctf::CtfQuery query = ctf::parse_query(args.query_text, diagram);
    if (!data.has_regime("")) throw ctf::ValidationError("natural bounds need the observational regime");
    ctf::BaselineBound bound = ctf::natural_bounds(ctf::empirical(data, ""), query, diagram);

    RunManifest manifest;
    manifest.command = "natural";
    manifest.flags = {{"graph", args.graph_path}, {"data", args.data_path}, {"query", args.query_text}};
    manifest.input_digests[args.graph_path] = ctf::sha256_file(args.graph_path);
    manifest.input_digests[args.data_path] = ctf::sha256_file(args.data_path);

    ordered_json report;
    report["manifest"] = manifest.to_json();
    report["query"] = args.query_text;
    report["method"] = bound.method;
    report["lower"] = bound.lower;
    report["upper"] = bound.upper;
    std::string text = report.dump(2) + "\n";
    if (!args.out_path.empty()) ctf::write_file(args.out_path, text);
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual probability bounds from data and a causal diagram"};
    app.require_subcommand(1);

    BoundArgs bound;
    CLI::App* b = app.add_subcommand("bound", "Posterior credible interval for a counterfactual query");
    b->add_option("--graph", bound.graph_path)->required();
    b->add_option("--data", bound.data_path)->required();
    b->add_option("--query", bound.query_text)->required();
    b->add_option("--sampler", bound.sampler, "blocked | collapsed");
    b->add_option("--alpha", bound.alpha, "credible level (0 = full support)");
    b->add_option("--epsilon", bound.epsilon);
    b->add_option("--delta", bound.delta);
    b->add_option("--seed", bound.seed);
    b->add_option("--burnin", bound.burnin);
    b->add_option("--draws", bound.draws, "kept draws per chain (default: from epsilon/delta)");
    b->add_option("--thin", bound.thin);
    b->add_option("--chains", bound.chains);
    b->add_option("--mc-samples", bound.mc_samples);
    b->add_option("--prior-alpha", bound.prior_alphas, "NAME=VALUE, repeatable (default: flat)");
    b->add_option("--out", bound.out_path)->default_val("bound_report.json");
    b->add_option("--draws-out", bound.draws_out);

    SimArgs sim;
    CLI::App* s = app.add_subcommand("simulate", "Sample a dataset from a built-in synthetic SCM");
    s->add_option("--scm", sim.scm)->required();
    s->add_option("--n", sim.n, "observational row count");
    s->add_option("--regime", sim.regimes, "COUNT:TAG rows from do(TAG), repeatable");
    s->add_option("--seed", sim.seed);
    s->add_option("--out", sim.out_path)->required();
    s->add_option("--graph-out", sim.graph_out, "also write the diagram JSON");

    TruthArgs truth;
    CLI::App* t = app.add_subcommand("truth", "Ground-truth query value (synthetic SCM or model file)");
    t->add_option("--scm", truth.scm);
    t->add_option("--model", truth.model_path, "canonical model file (exact enumeration)");
    t->add_option("--query", truth.query_text)->required();
    t->add_option("--n", truth.n);
    t->add_option("--seed", truth.seed);
    t->add_option("--out", truth.out_path);

    ExactArgs exact;
    CLI::App* e = app.add_subcommand("exact", "Exact LP bound for single-latent diagrams");
    e->add_option("--graph", exact.graph_path)->required();
    e->add_option("--data", exact.data_path)->required();
    e->add_option("--query", exact.query_text)->required();
    e->add_option("--slack", exact.slack);
    e->add_option("--out", exact.out_path);

    PolyArgs poly;
    CLI::App* p = app.add_subcommand("emit-polyprog", "Reduce to a polynomial program file");
    p->add_option("--graph", poly.graph_path)->required();
    p->add_option("--data", poly.data_path)->required();
    p->add_option("--query", poly.query_text)->required();
    p->add_option("--out", poly.out_path)->required();
    p->add_option("--solve-restarts", poly.solve_restarts, "also run the local solver");
    p->add_option("--seed", poly.seed);

    NaturalArgs natural;
    CLI::App* n = app.add_subcommand("natural", "Assumption-free bounds from observational data");
    n->add_option("--graph", natural.graph_path)->required();
    n->add_option("--data", natural.data_path)->required();
    n->add_option("--query", natural.query_text)->required();
    n->add_option("--out", natural.out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e2) {
        return app.exit(e2);
    } catch (const CLI::ParseError& e2) {
        app.exit(e2);
        return 2;
    }

    try {
        if (b->parsed()) return cmd_bound(bound);
        if (s->parsed()) return cmd_simulate(sim);
        if (t->parsed()) return cmd_truth(truth);
        if (e->parsed()) return cmd_exact(exact);
        if (p->parsed()) return cmd_emit_polyprog(poly);
        if (n->parsed()) return cmd_natural(natural);
    } catch (const ctf::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return err.exit_code();
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return 5;
    }
    return 2;
}
