#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctfbounds/data.hpp"
#include "ctfbounds/graph.hpp"
#include "ctfbounds/query.hpp"

namespace ctf {

struct CredibleInterval {
    double alpha = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    uint64_t T = 0;
    double epsilon = 0.0;  // tolerance parameters echoed by callers
    double delta = 0.0;
};

struct BaselineBound {
    std::string method;  // "natural" | "lp-exact" | "frontdoor-point"
    double lower = 0.0;
    double upper = 0.0;
};

// T = ceil(2 * eps^-2 * ln(4/delta)).
uint64_t required_draws(double epsilon, double delta);

// Order-statistic interval: lower = ceil((alpha/2)T)-th smallest draw, upper
// = ceil((1-alpha/2)T)-th smallest; indices clamped to [1, T] so alpha = 0
// returns the sample min and max.
CredibleInterval credible_interval(const std::vector<double>& draws, double alpha);

// Assumption-free bounds from the observational regime. Supports
// P[Y@{X=x}=y] and E[Y@{X=x}] with a single intervened variable.
BaselineBound natural_bounds(const EmpiricalDistribution& obs, const CtfQuery& q,
                             const CausalDiagram& diagram);

// Mediation ("X -> W -> Y" chain with X,Y confounded, W clean) adjustment:
// sum_w P(w|x) sum_x' P(y|x',w) P(x'). Point estimate.
BaselineBound frontdoor_estimate(const Dataset& data, const CtfQuery& q);

// Exact [min, max] of a counterfactual probability over single-latent
// canonical models matching the given empirical distributions: the model is
// linear in theta once mechanisms are pinned to the response-function
// parametrization, so an exact rational LP applies. slack > 0 relaxes each
// empirical equality to +/- slack.
BaselineBound lp_exact_bound(const CausalDiagram& diagram, const CtfQuery& q,
                             const std::vector<EmpiricalDistribution>& constraints,
                             double slack = 0.0);

}  // namespace ctf
