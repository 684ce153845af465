#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctfbounds/graph.hpp"
#include "ctfbounds/scm.hpp"

namespace ctf {

struct DataRow {
    std::map<std::string, int> intervention;  // do(z); empty = observational
    std::vector<int> values;                  // full endogenous assignment, diagram order
};

// Canonical textual tag for a regime: "X=1;Z=0" sorted by variable name,
// empty string for the observational regime.
std::string regime_tag(const std::map<std::string, int>& intervention);
std::map<std::string, int> parse_regime_tag(const std::string& tag);

class Dataset {
public:
    Dataset(const CausalDiagram& diagram, std::vector<DataRow> rows);

    const CausalDiagram& diagram() const { return *diagram_; }
    const std::vector<DataRow>& rows() const { return rows_; }
    size_t size() const { return rows_.size(); }

    // Regime tags in first-appearance order, plus row indices per regime.
    const std::vector<std::string>& regimes() const { return regime_order_; }
    const std::vector<size_t>& regime_rows(const std::string& tag) const;
    bool has_regime(const std::string& tag) const { return regime_index_.count(tag) > 0; }

    // Per-row intervention as an indicator vector (value or -1), cached.
    const std::vector<int>& intervention_vector(size_t row) const { return ivec_[row]; }

private:
    const CausalDiagram* diagram_;
    std::vector<DataRow> rows_;
    std::vector<std::vector<int>> ivec_;
    std::vector<std::string> regime_order_;
    std::unordered_map<std::string, std::vector<size_t>> regime_index_;
};

// CSV format: header = endogenous names in diagram order plus final "__do__";
// integer values; "__do__" holds ';'-separated NAME=value pairs or the empty
// string. UTF-8, LF line endings.
Dataset load_csv(const std::string& text, const CausalDiagram& diagram);
Dataset load_csv_file(const std::string& path, const CausalDiagram& diagram);
std::string save_csv(const Dataset& data);
void save_csv_file(const Dataset& data, const std::string& path);

Dataset from_sampled_rows(const CausalDiagram& diagram, const std::vector<SampledRow>& rows);

struct EmpiricalDistribution {
    std::string tag;
    uint64_t total = 0;
    // joint configuration (mixed radix over endogenous variables in diagram
    // order, last varying fastest) -> count
    std::map<uint64_t, uint64_t> counts;

    double frequency(uint64_t config) const {
        auto it = counts.find(config);
        return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
    }
};

uint64_t config_index(const CausalDiagram& d, const std::vector<int>& values);
std::vector<int> config_values(const CausalDiagram& d, uint64_t config);

// Maximum-likelihood joint frequencies for one regime.
EmpiricalDistribution empirical(const Dataset& data, const std::string& tag);

}  // namespace ctf
