#pragma once

#include <string>

#include "ctfbounds/graph.hpp"

namespace fixtures {

inline ctf::EndogenousSpec endo(std::string name, int card, std::vector<std::string> parents,
                                std::vector<std::string> exo_parents) {
    ctf::EndogenousSpec s;
    s.name = std::move(name);
    s.card = card;
    s.parents = std::move(parents);
    s.exo_parents = std::move(exo_parents);
    return s;
}

// Z -> X -> Y with U1 -> Z and U2 -> {X, Y} (instrument diagram).
inline ctf::CausalDiagram iv_diagram() {
    return ctf::CausalDiagram::make(
        {endo("Z", 2, {}, {"U1"}), endo("X", 2, {"Z"}, {"U2"}), endo("Y", 2, {"X"}, {"U2"})},
        {"U1", "U2"});
}

// Z -> X -> Y with U1 -> {Z, Y} and U2 -> {X, Y}: one c-component.
inline ctf::CausalDiagram chained_diagram(int card = 2) {
    return ctf::CausalDiagram::make({endo("Z", card, {}, {"U1"}), endo("X", card, {"Z"}, {"U2"}),
                                     endo("Y", card, {"X"}, {"U1", "U2"})},
                                    {"U1", "U2"});
}

// X -> W -> Y with U1 -> {X, Y}, U2 -> W (mediation diagram).
inline ctf::CausalDiagram frontdoor_diagram() {
    return ctf::CausalDiagram::make(
        {endo("X", 2, {}, {"U1"}), endo("W", 2, {"X"}, {"U2"}), endo("Y", 2, {"W"}, {"U1"})},
        {"U1", "U2"});
}

// X -> Y with a shared latent parent.
inline ctf::CausalDiagram bow_diagram() {
    return ctf::CausalDiagram::make({endo("X", 2, {}, {"U"}), endo("Y", 2, {"X"}, {"U"})}, {"U"});
}

inline std::string iv_diagram_json() {
    return R"({
  "endogenous": [
    {"name": "Z", "card": 2, "parents": [], "exo_parents": ["U1"]},
    {"name": "X", "card": 2, "parents": ["Z"], "exo_parents": ["U2"]},
    {"name": "Y", "card": 2, "parents": ["X"], "exo_parents": ["U2"]}
  ],
  "exogenous": ["U1", "U2"]
})";
}

}  // namespace fixtures
