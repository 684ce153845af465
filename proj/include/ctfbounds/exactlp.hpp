#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctfbounds/bignat.hpp"

namespace ctf {

// Exact rational: sign * num / den with den > 0 and gcd(num, den) = 1.
class Rat {
public:
    Rat() : neg_(false), num_(0), den_(1) {}
    Rat(int64_t v) : neg_(v < 0), num_(v < 0 ? static_cast<uint64_t>(-(v + 1)) + 1 : static_cast<uint64_t>(v)), den_(1) {}  // NOLINT
    Rat(int64_t num, int64_t den);

    static Rat from_fraction(BigNat num, BigNat den, bool negative = false);
    // Exact binary expansion of the double (no rounding).
    static Rat from_double(double v);

    bool is_zero() const { return num_.is_zero(); }
    bool negative() const { return neg_; }
    int sign() const { return num_.is_zero() ? 0 : (neg_ ? -1 : 1); }

    double to_double() const;
    std::string to_string() const;

    friend Rat operator+(const Rat& a, const Rat& b);
    friend Rat operator-(const Rat& a, const Rat& b);
    friend Rat operator*(const Rat& a, const Rat& b);
    friend Rat operator/(const Rat& a, const Rat& b);
    Rat operator-() const {
        Rat r = *this;
        if (!r.num_.is_zero()) r.neg_ = !r.neg_;
        return r;
    }

    friend bool operator==(const Rat& a, const Rat& b) {
        return a.neg_ == b.neg_ && a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
    friend bool operator<(const Rat& a, const Rat& b) { return (a - b).sign() < 0; }
    friend bool operator<=(const Rat& a, const Rat& b) { return (a - b).sign() <= 0; }
    friend bool operator>(const Rat& a, const Rat& b) { return b < a; }
    friend bool operator>=(const Rat& a, const Rat& b) { return b <= a; }

private:
    void normalize();

    bool neg_;
    BigNat num_;
    BigNat den_;
};

enum class LpRel { Eq, Le, Ge };

struct LpConstraint {
    std::vector<Rat> coeffs;  // dense over variables
    LpRel rel = LpRel::Eq;
    Rat rhs;
};

// min / max  c . x   subject to the constraints and x >= 0.
struct LpProblem {
    int n_vars = 0;
    std::vector<Rat> objective;
    std::vector<LpConstraint> constraints;
};

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded };
    Status status = Status::Optimal;
    Rat objective;
    std::vector<Rat> solution;
    // Infeasible: largest |residual| at the least-infeasible (phase-1) point.
    double max_violation = 0.0;
};

// Two-phase primal simplex with Bland's rule: exact, deterministic,
// cycle-free. Sized for the small polytopes produced by canonical models.
LpResult lp_solve(const LpProblem& problem, bool maximize);

}  // namespace ctf
