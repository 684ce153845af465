#include "ctfbounds/data.hpp"

#include <fstream>
#include <sstream>

#include "ctfbounds/errors.hpp"

namespace ctf {

std::string regime_tag(const std::map<std::string, int>& intervention) {
    std::string tag;
    for (const auto& [var, val] : intervention) {  // std::map iterates name-sorted
        if (!tag.empty()) tag += ";";
        tag += var + "=" + std::to_string(val);
    }
    return tag;
}

std::map<std::string, int> parse_regime_tag(const std::string& tag) {
    std::map<std::string, int> out;
    if (tag.empty()) return out;
    std::string cur;
    auto flush = [&](const std::string& pair) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) throw ValidationError("malformed regime tag entry '" + pair + "'");
        out[pair.substr(0, eq)] = std::stoi(pair.substr(eq + 1));
    };
    for (char c : tag) {
        if (c == ';') {
            flush(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    flush(cur);
    return out;
}

Dataset::Dataset(const CausalDiagram& diagram, std::vector<DataRow> rows)
    : diagram_(&diagram), rows_(std::move(rows)) {
    const int n = diagram.n_endogenous();
    ivec_.reserve(rows_.size());
    for (size_t r = 0; r < rows_.size(); ++r) {
        const DataRow& row = rows_[r];
        if (static_cast<int>(row.values.size()) != n) {
            throw ValidationError("row " + std::to_string(r + 1) + " has " +
                                  std::to_string(row.values.size()) + " values, expected " +
                                  std::to_string(n));
        }
        std::vector<int> ivec(n, -1);
        for (const auto& [var, val] : row.intervention) {
            int v = diagram.endo_index(var);
            if (v < 0) throw ValidationError("row " + std::to_string(r + 1) + ": unknown intervened variable '" + var + "'");
            if (val < 0 || val >= diagram.card(v)) {
                throw ValidationError("row " + std::to_string(r + 1) + ": intervention value out of range for '" + var + "'");
            }
            if (row.values[v] != val) {
                throw ValidationError("row " + std::to_string(r + 1) + ": stored value of '" + var +
                                      "' (" + std::to_string(row.values[v]) +
                                      ") differs from its intervention value (" + std::to_string(val) + ")");
            }
            ivec[v] = val;
        }
        for (int v = 0; v < n; ++v) {
            if (row.values[v] < 0 || row.values[v] >= diagram.card(v)) {
                throw ValidationError("row " + std::to_string(r + 1) + ": value out of range for '" +
                                      diagram.endogenous(v).name + "'");
            }
        }
        std::string tag = regime_tag(row.intervention);
        auto [it, fresh] = regime_index_.try_emplace(tag);
        if (fresh) regime_order_.push_back(tag);
        it->second.push_back(r);
        ivec_.push_back(std::move(ivec));
    }
}

const std::vector<size_t>& Dataset::regime_rows(const std::string& tag) const {
    auto it = regime_index_.find(tag);
    if (it == regime_index_.end()) throw ValidationError("unknown regime tag '" + tag + "'");
    return it->second;
}

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int parse_int_field(const std::string& field, size_t line_no, const std::string& what) {
    try {
        size_t used = 0;
        int v = std::stoi(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("line " + std::to_string(line_no) + ": cannot parse " + what +
                              " from '" + field + "'");
    }
}

}  // namespace

Dataset load_csv(const std::string& text, const CausalDiagram& diagram) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split(line, ',');
    const int n = diagram.n_endogenous();
    if (static_cast<int>(header.size()) != n + 1 || header.back() != "__do__") {
        throw ValidationError("CSV header mismatch: expected endogenous names in diagram order plus '__do__'");
    }
    for (int v = 0; v < n; ++v) {
        if (header[v] != diagram.endogenous(v).name) {
            throw ValidationError("CSV header mismatch at column " + std::to_string(v + 1) +
                                  ": got '" + header[v] + "', expected '" +
                                  diagram.endogenous(v).name + "'");
        }
    }

    std::vector<DataRow> rows;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split(line, ',');
        if (fields.size() != header.size()) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        DataRow row;
        row.values.resize(n);
        for (int v = 0; v < n; ++v) {
            row.values[v] = parse_int_field(fields[v], line_no, "value of '" + header[v] + "'");
        }
        const std::string& do_field = fields.back();
        if (!do_field.empty()) {
            for (const auto& pair : split(do_field, ';')) {
                auto eq = pair.find('=');
                if (eq == std::string::npos) {
                    throw ValidationError("line " + std::to_string(line_no) +
                                          ": malformed __do__ entry '" + pair + "'");
                }
                std::string var = pair.substr(0, eq);
                int val = parse_int_field(pair.substr(eq + 1), line_no, "intervention value of '" + var + "'");
                if (!row.intervention.emplace(var, val).second) {
                    throw ValidationError("line " + std::to_string(line_no) +
                                          ": variable '" + var + "' intervened twice");
                }
            }
        }
        rows.push_back(std::move(row));
    }
    try {
        return Dataset(diagram, std::move(rows));
    } catch (const ValidationError& e) {
        throw;  // Dataset's messages already carry row numbers (header offset of 1 applies)
    }
}

Dataset load_csv_file(const std::string& path, const CausalDiagram& diagram) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_csv(buf.str(), diagram);
}

std::string save_csv(const Dataset& data) {
    const CausalDiagram& d = data.diagram();
    std::string out;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        out += d.endogenous(v).name;
        out += ",";
    }
    out += "__do__\n";
    for (const auto& row : data.rows()) {
        for (int v = 0; v < d.n_endogenous(); ++v) {
            out += std::to_string(row.values[v]);
            out += ",";
        }
        out += regime_tag(row.intervention);
        out += "\n";
    }
    return out;
}

void save_csv_file(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write dataset file '" + path + "'");
    out << save_csv(data);
}

Dataset from_sampled_rows(const CausalDiagram& diagram, const std::vector<SampledRow>& rows) {
    std::vector<DataRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(DataRow{r.intervention, r.values});
    return Dataset(diagram, std::move(out));
}

uint64_t config_index(const CausalDiagram& d, const std::vector<int>& values) {
    uint64_t idx = 0;
    for (int v = 0; v < d.n_endogenous(); ++v) {
        idx = idx * static_cast<uint64_t>(d.card(v)) + static_cast<uint64_t>(values[v]);
    }
    return idx;
}

std::vector<int> config_values(const CausalDiagram& d, uint64_t config) {
    std::vector<int> values(d.n_endogenous());
    for (int v = d.n_endogenous() - 1; v >= 0; --v) {
        values[v] = static_cast<int>(config % static_cast<uint64_t>(d.card(v)));
        config /= static_cast<uint64_t>(d.card(v));
    }
    return values;
}

EmpiricalDistribution empirical(const Dataset& data, const std::string& tag) {
    const auto& rows = data.regime_rows(tag);
    EmpiricalDistribution dist;
    dist.tag = tag;
    dist.total = rows.size();
    for (size_t r : rows) {
        ++dist.counts[config_index(data.diagram(), data.rows()[r].values)];
    }
    return dist;
}

}  // namespace ctf
