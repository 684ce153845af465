#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ctf {

// Counter-based generator with an explicit 64-bit seed (splitmix64 output
// function). Streams for chains, restarts and shards are derived through
// Rng::derive(seed, index) so that parallel runs are replayable: the i-th
// stream depends only on (seed, i), never on thread scheduling.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Documented splitting function: child seed = mix(seed ^ mix(label)).
    static uint64_t derive(uint64_t seed, uint64_t label) {
        return mix(seed ^ mix(label));
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1]; safe as a log/CDF argument.
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    // Uniform integer in [0, n); n >= 1. Rejection keeps it unbiased.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller on the uniform stream.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_open();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Logistic(0,1) via inverse CDF: log(p / (1-p)).
    double logistic() {
        double p = uniform_open();
        if (p >= 1.0) p = 1.0 - 0x1.0p-53;
        return std::log(p / (1.0 - p));
    }

    double exponential() { return -std::log(uniform_open()); }

    // Marsaglia-Tsang for shape >= 1; the a<1 case goes through the boost
    // G(a) = G(a+1) * U^(1/a).
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // log of a Gamma(shape) draw; stays finite for tiny shapes where the
    // draw itself underflows to zero.
    double log_gamma_draw(double shape) {
        if (shape >= 1.0) return std::log(gamma(shape));
        double u = uniform_open();
        return std::log(gamma(shape + 1.0)) + std::log(u) / shape;
    }

    // Dirichlet with per-component shapes, drawn in log space and normalized
    // by softmax so that near-zero concentrations cannot produce a 0/0.
    std::vector<double> dirichlet(const std::vector<double>& shapes) {
        std::vector<double> lg(shapes.size());
        double mx = -INFINITY;
        for (size_t i = 0; i < shapes.size(); ++i) {
            lg[i] = log_gamma_draw(shapes[i]);
            mx = std::max(mx, lg[i]);
        }
        double total = 0.0;
        std::vector<double> out(shapes.size());
        for (size_t i = 0; i < shapes.size(); ++i) {
            out[i] = std::exp(lg[i] - mx);
            total += out[i];
        }
        for (auto& v : out) v /= total;
        return out;
    }

    // Index draw from unnormalized nonnegative weights. Returns weights.size()
    // when the total mass is zero (caller treats that as an invariant breach).
    size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) return weights.size();
        double t = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (t < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ctf
