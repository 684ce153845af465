#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctf {

inline constexpr const char* kToolVersion = "0.1.0";

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Every report embeds its manifest; identical manifests must replay to
// byte-identical primary outputs.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> flags;       // resolved values, sorted
    std::map<std::string, uint64_t> seeds;          // resolved seeds
    std::map<std::string, std::string> input_digests;  // path -> sha256
    std::vector<std::string> notes;

    nlohmann::ordered_json to_json() const;
};

struct Histogram {
    std::vector<double> edges;    // bins + 1
    std::vector<uint64_t> counts; // bins
};

Histogram make_histogram(const std::vector<double>& values, int bins = 50);
nlohmann::ordered_json histogram_json(const Histogram& h);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace ctf
