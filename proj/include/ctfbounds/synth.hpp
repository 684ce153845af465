#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctfbounds/data.hpp"
#include "ctfbounds/graph.hpp"
#include "ctfbounds/query.hpp"

namespace ctf {

// Built-in continuous-exogenous generators with fixed numeric parameters.
enum class ScmKind {
    Frontdoor,
    Bow,
    Iv,
    Napkin,
    DoubleBow,
    MBd,
    TripleBow,
    SeeDo,
    IstIvShape,
};

ScmKind parse_scm_kind(const std::string& name);
std::string scm_kind_name(ScmKind kind);
std::vector<std::string> scm_kind_names();

struct RegimeSpec {
    std::map<std::string, int> intervention;  // empty = observational
    uint64_t count = 0;
};

struct GroundTruth {
    CtfQuery query;
    double estimate = 0.0;
    uint64_t samples = 0;
    double std_error = 0.0;
};

class SyntheticScm {
public:
    explicit SyntheticScm(ScmKind kind);

    ScmKind kind() const { return kind_; }
    const CausalDiagram& diagram() const { return diagram_; }

    // Forward samples per regime; do-regimes run the mutilated mechanisms
    // with fresh exogenous draws per row.
    Dataset sample(const std::vector<RegimeSpec>& plan, uint64_t seed) const;

    // Monte-Carlo evaluation of the query with all terms sharing each joint
    // exogenous draw (true counterfactual coupling). Shards deterministically.
    GroundTruth ground_truth(const CtfQuery& q, uint64_t n, uint64_t seed) const;

    // Generator caveats worth surfacing in reports (e.g. an unused variant
    // mechanism in the triple-bow parametrization).
    const std::vector<std::string>& notes() const { return notes_; }

private:
    struct ExoDraw;
    void draw_exo(Rng& rng, ExoDraw& exo) const;
    void eval(const ExoDraw& exo, const std::vector<int>& intervention, std::vector<int>& out) const;

    ScmKind kind_;
    CausalDiagram diagram_;
    std::vector<std::string> notes_;
};

}  // namespace ctf
