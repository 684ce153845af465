#include "ctfbounds/exactlp.hpp"

#include <cmath>

#include "ctfbounds/errors.hpp"

namespace ctf {

Rat::Rat(int64_t num, int64_t den) {
    if (den == 0) throw InternalError("rational with zero denominator");
    neg_ = (num < 0) != (den < 0);
    uint64_t n = num < 0 ? static_cast<uint64_t>(-(num + 1)) + 1 : static_cast<uint64_t>(num);
    uint64_t d = den < 0 ? static_cast<uint64_t>(-(den + 1)) + 1 : static_cast<uint64_t>(den);
    num_ = BigNat(n);
    den_ = BigNat(d);
    normalize();
}

Rat Rat::from_fraction(BigNat num, BigNat den, bool negative) {
    if (den.is_zero()) throw InternalError("rational with zero denominator");
    Rat r;
    r.neg_ = negative;
    r.num_ = std::move(num);
    r.den_ = std::move(den);
    r.normalize();
    return r;
}

Rat Rat::from_double(double v) {
    if (!std::isfinite(v)) throw InternalError("cannot convert non-finite double to rational");
    if (v == 0.0) return Rat();
    bool neg = v < 0.0;
    double a = std::fabs(v);
    int exp = 0;
    double frac = std::frexp(a, &exp);  // a = frac * 2^exp, frac in [0.5, 1)
    uint64_t mant = static_cast<uint64_t>(std::ldexp(frac, 53));
    int e = exp - 53;
    BigNat num(mant), den(1);
    if (e >= 0) {
        num = num * BigNat::pow(BigNat(2), static_cast<uint64_t>(e));
    } else {
        den = BigNat::pow(BigNat(2), static_cast<uint64_t>(-e));
    }
    return from_fraction(std::move(num), std::move(den), neg);
}

void Rat::normalize() {
    if (num_.is_zero()) {
        neg_ = false;
        den_ = BigNat(1);
        return;
    }
    BigNat g = gcd(num_, den_);
    if (!(g == BigNat(1))) {
        num_ = divmod(num_, g, nullptr);
        den_ = divmod(den_, g, nullptr);
    }
}

double Rat::to_double() const {
    // scale down to keep both magnitudes in double range
    long double n = num_.to_long_double();
    long double d = den_.to_long_double();
    double v = static_cast<double>(n / d);
    return neg_ ? -v : v;
}

std::string Rat::to_string() const {
    std::string s = neg_ ? "-" : "";
    s += num_.to_string();
    if (!(den_ == BigNat(1))) s += "/" + den_.to_string();
    return s;
}

Rat operator+(const Rat& a, const Rat& b) {
    // a.num/a.den (+/-) b.num/b.den with signed magnitudes
    BigNat lhs = a.num_ * b.den_;
    BigNat rhs = b.num_ * a.den_;
    BigNat den = a.den_ * b.den_;
    Rat r;
    if (a.neg_ == b.neg_) {
        r = Rat::from_fraction(lhs + rhs, std::move(den), a.neg_);
    } else if (rhs < lhs) {
        r = Rat::from_fraction(lhs - rhs, std::move(den), a.neg_);
    } else {
        r = Rat::from_fraction(rhs - lhs, std::move(den), b.neg_);
    }
    return r;
}

Rat operator-(const Rat& a, const Rat& b) { return a + (-b); }

Rat operator*(const Rat& a, const Rat& b) {
    return Rat::from_fraction(a.num_ * b.num_, a.den_ * b.den_, a.neg_ != b.neg_);
}

Rat operator/(const Rat& a, const Rat& b) {
    if (b.is_zero()) throw InternalError("rational division by zero");
    return Rat::from_fraction(a.num_ * b.den_, a.den_ * b.num_, a.neg_ != b.neg_);
}

namespace {

// Dense simplex tableau over rationals. Columns: structural vars, slacks,
// artificials. Bland's rule everywhere.
class Simplex {
public:
    Simplex(const LpProblem& p, bool maximize) : n_struct_(p.n_vars) {
        // normalize rows to equalities with slack columns
        for (const auto& c : p.constraints) {
            std::vector<Rat> row(c.coeffs);
            row.resize(n_struct_);
            Rat rhs = c.rhs;
            int slack_sign = 0;
            if (c.rel == LpRel::Le) slack_sign = 1;
            if (c.rel == LpRel::Ge) slack_sign = -1;
            rows_.push_back(std::move(row));
            rhs_.push_back(rhs);
            slack_sign_.push_back(slack_sign);
        }
        n_slack_ = 0;
        for (int s : slack_sign_) {
            if (s != 0) ++n_slack_;
        }
        int slack_col = n_struct_;
        for (size_t i = 0; i < rows_.size(); ++i) {
            rows_[i].resize(n_struct_ + n_slack_);
            if (slack_sign_[i] != 0) {
                rows_[i][slack_col] = Rat(slack_sign_[i]);
                ++slack_col;
            }
        }
        // flip rows so rhs >= 0
        for (size_t i = 0; i < rows_.size(); ++i) {
            if (rhs_[i].sign() < 0) {
                for (auto& v : rows_[i]) v = -v;
                rhs_[i] = -rhs_[i];
            }
        }
        obj_.assign(n_struct_ + n_slack_, Rat());
        for (int j = 0; j < n_struct_ && j < static_cast<int>(p.objective.size()); ++j) {
            obj_[j] = maximize ? -p.objective[j] : p.objective[j];
        }
        maximize_ = maximize;
    }

    LpResult solve() {
        const int m = static_cast<int>(rows_.size());
        const int n = n_struct_ + n_slack_;
        // phase 1: artificial basis
        basis_.resize(m);
        for (int i = 0; i < m; ++i) {
            rows_[i].resize(n + m);
            rows_[i][n + i] = Rat(1);
            basis_[i] = n + i;
        }
        std::vector<Rat> phase1(n + m, Rat());
        for (int j = n; j < n + m; ++j) phase1[j] = Rat(1);
        run(phase1, n + m);

        Rat phase1_obj;
        for (int i = 0; i < m; ++i) {
            if (basis_[i] >= n) phase1_obj = phase1_obj + rhs_[i];
        }
        LpResult result;
        if (phase1_obj.sign() > 0) {
            result.status = LpResult::Status::Infeasible;
            // residuals at the least-infeasible point = artificial values
            double worst = 0.0;
            for (int i = 0; i < m; ++i) {
                if (basis_[i] >= n) worst = std::max(worst, std::fabs(rhs_[i].to_double()));
            }
            result.max_violation = worst;
            return result;
        }
        // drive surviving zero-valued artificials out of the basis
        for (int i = 0; i < m; ++i) {
            if (basis_[i] < n) continue;
            int pivot_col = -1;
            for (int j = 0; j < n; ++j) {
                if (!rows_[i][j].is_zero()) {
                    pivot_col = j;
                    break;
                }
            }
            if (pivot_col < 0) {
                mark_redundant(i);
                continue;
            }
            pivot(i, pivot_col);
        }
        // phase 2
        std::vector<Rat> cost(obj_);
        cost.resize(n + m, Rat(0));
        bool bounded = run(cost, n);
        if (!bounded) {
            result.status = LpResult::Status::Unbounded;
            return result;
        }
        result.status = LpResult::Status::Optimal;
        result.solution.assign(n_struct_, Rat());
        for (int i = 0; i < m; ++i) {
            if (redundant_[i]) continue;
            if (basis_[i] < n_struct_) result.solution[basis_[i]] = rhs_[i];
        }
        Rat value;
        for (int j = 0; j < n_struct_; ++j) value = value + obj_[j] * result.solution[j];
        result.objective = maximize_ ? -value : value;
        return result;
    }

private:
    void mark_redundant(int row) {
        if (redundant_.empty()) redundant_.assign(rows_.size(), false);
        redundant_[row] = true;
    }

    // Returns false when unbounded. limit_col restricts entering columns
    // (phase 2 must not re-enter artificials).
    bool run(const std::vector<Rat>& cost, int limit_col) {
        const int m = static_cast<int>(rows_.size());
        if (redundant_.empty()) redundant_.assign(m, false);
        for (;;) {
            // reduced costs: c_j - c_B . B^-1 A_j, computed from the tableau
            int entering = -1;
            for (int j = 0; j < limit_col; ++j) {
                Rat rc = cost[j];
                for (int i = 0; i < m; ++i) {
                    if (redundant_[i]) continue;
                    if (!rows_[i][j].is_zero() && !cost[basis_[i]].is_zero()) {
                        rc = rc - cost[basis_[i]] * rows_[i][j];
                    }
                }
                if (rc.sign() < 0) {
                    entering = j;
                    break;  // Bland: first improving column
                }
            }
            if (entering < 0) return true;
            int leaving = -1;
            Rat best_ratio;
            for (int i = 0; i < m; ++i) {
                if (redundant_[i]) continue;
                if (rows_[i][entering].sign() <= 0) continue;
                Rat ratio = rhs_[i] / rows_[i][entering];
                if (leaving < 0 || ratio < best_ratio ||
                    (ratio == best_ratio && basis_[i] < basis_[leaving])) {
                    leaving = i;
                    best_ratio = ratio;
                }
            }
            if (leaving < 0) return false;  // unbounded
            pivot(leaving, entering);
        }
    }

    void pivot(int row, int col) {
        const int m = static_cast<int>(rows_.size());
        Rat p = rows_[row][col];
        for (auto& v : rows_[row]) v = v / p;
        rhs_[row] = rhs_[row] / p;
        for (int i = 0; i < m; ++i) {
            if (i == row) continue;
            Rat f = rows_[i][col];
            if (f.is_zero()) continue;
            for (size_t j = 0; j < rows_[i].size(); ++j) {
                if (!rows_[row][j].is_zero()) rows_[i][j] = rows_[i][j] - f * rows_[row][j];
            }
            rhs_[i] = rhs_[i] - f * rhs_[row];
        }
        basis_[row] = col;
    }

    int n_struct_;
    int n_slack_ = 0;
    bool maximize_ = false;
    std::vector<std::vector<Rat>> rows_;
    std::vector<Rat> rhs_;
    std::vector<int> slack_sign_;
    std::vector<Rat> obj_;
    std::vector<int> basis_;
    std::vector<bool> redundant_;
};

}  // namespace

LpResult lp_solve(const LpProblem& problem, bool maximize) {
    for (const auto& c : problem.constraints) {
        if (static_cast<int>(c.coeffs.size()) > problem.n_vars) {
            throw InternalError("LP constraint wider than variable count");
        }
    }
    Simplex simplex(problem, maximize);
    return simplex.solve();
}

}  // namespace ctf
