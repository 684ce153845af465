#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ctf {

// Arbitrary-precision unsigned integer. Latent-state cardinalities grow as
// products of |Omega_V|^{|Omega_PA|} and routinely overflow 64 bits, so they
// are carried exactly and only collapsed to double/uint64 at the edges.
class BigNat {
public:
    BigNat() : limbs_{0} {}
    BigNat(uint64_t v) {  // NOLINT: implicit by design
        limbs_.push_back(static_cast<uint32_t>(v & 0xffffffffu));
        if (v >> 32) limbs_.push_back(static_cast<uint32_t>(v >> 32));
    }

    static BigNat pow(const BigNat& base, uint64_t exp) {
        BigNat result(1);
        BigNat b = base;
        while (exp > 0) {
            if (exp & 1) result = result * b;
            b = b * b;
            exp >>= 1;
        }
        return result;
    }

    bool is_zero() const { return limbs_.size() == 1 && limbs_[0] == 0; }

    friend BigNat operator+(const BigNat& a, const BigNat& b) {
        BigNat r;
        r.limbs_.assign(std::max(a.limbs_.size(), b.limbs_.size()) + 1, 0);
        uint64_t carry = 0;
        for (size_t i = 0; i < r.limbs_.size(); ++i) {
            uint64_t s = carry;
            if (i < a.limbs_.size()) s += a.limbs_[i];
            if (i < b.limbs_.size()) s += b.limbs_[i];
            r.limbs_[i] = static_cast<uint32_t>(s & 0xffffffffu);
            carry = s >> 32;
        }
        r.trim();
        return r;
    }

    // Requires a >= b.
    friend BigNat operator-(const BigNat& a, const BigNat& b) {
        BigNat r;
        r.limbs_.assign(a.limbs_.size(), 0);
        int64_t borrow = 0;
        for (size_t i = 0; i < a.limbs_.size(); ++i) {
            int64_t s = static_cast<int64_t>(a.limbs_[i]) - borrow -
                        (i < b.limbs_.size() ? static_cast<int64_t>(b.limbs_[i]) : 0);
            if (s < 0) {
                s += (int64_t{1} << 32);
                borrow = 1;
            } else {
                borrow = 0;
            }
            r.limbs_[i] = static_cast<uint32_t>(s);
        }
        r.trim();
        return r;
    }

    friend BigNat operator*(const BigNat& a, const BigNat& b) {
        BigNat r;
        r.limbs_.assign(a.limbs_.size() + b.limbs_.size(), 0);
        for (size_t i = 0; i < a.limbs_.size(); ++i) {
            uint64_t carry = 0;
            for (size_t j = 0; j < b.limbs_.size(); ++j) {
                uint64_t cur = r.limbs_[i + j] +
                               static_cast<uint64_t>(a.limbs_[i]) * b.limbs_[j] + carry;
                r.limbs_[i + j] = static_cast<uint32_t>(cur & 0xffffffffu);
                carry = cur >> 32;
            }
            size_t k = i + b.limbs_.size();
            while (carry) {
                uint64_t cur = r.limbs_[k] + carry;
                r.limbs_[k] = static_cast<uint32_t>(cur & 0xffffffffu);
                carry = cur >> 32;
                ++k;
            }
        }
        r.trim();
        return r;
    }

    // Long division; returns quotient, stores remainder into *rem if non-null.
    friend BigNat divmod(const BigNat& a, const BigNat& b, BigNat* rem);

    friend bool operator==(const BigNat& a, const BigNat& b) { return a.limbs_ == b.limbs_; }
    friend bool operator!=(const BigNat& a, const BigNat& b) { return !(a == b); }
    friend bool operator<(const BigNat& a, const BigNat& b) {
        if (a.limbs_.size() != b.limbs_.size()) return a.limbs_.size() < b.limbs_.size();
        for (size_t i = a.limbs_.size(); i-- > 0;) {
            if (a.limbs_[i] != b.limbs_[i]) return a.limbs_[i] < b.limbs_[i];
        }
        return false;
    }
    friend bool operator<=(const BigNat& a, const BigNat& b) { return !(b < a); }
    friend bool operator>(const BigNat& a, const BigNat& b) { return b < a; }
    friend bool operator>=(const BigNat& a, const BigNat& b) { return !(a < b); }

    bool fits_u64() const { return limbs_.size() <= 2; }
    uint64_t to_u64_saturating() const {
        if (!fits_u64()) return std::numeric_limits<uint64_t>::max();
        uint64_t v = limbs_[0];
        if (limbs_.size() == 2) v |= static_cast<uint64_t>(limbs_[1]) << 32;
        return v;
    }

    double to_double() const {
        double v = 0.0;
        for (size_t i = limbs_.size(); i-- > 0;) v = v * 4294967296.0 + limbs_[i];
        return v;
    }

    long double to_long_double() const {
        long double v = 0.0L;
        for (size_t i = limbs_.size(); i-- > 0;) v = v * 4294967296.0L + limbs_[i];
        return v;
    }

    std::string to_string() const {
        if (is_zero()) return "0";
        std::vector<uint32_t> work = limbs_;
        std::string digits;
        while (!(work.size() == 1 && work[0] == 0)) {
            uint64_t rem = 0;
            for (size_t i = work.size(); i-- > 0;) {
                uint64_t cur = (rem << 32) | work[i];
                work[i] = static_cast<uint32_t>(cur / 1000000000u);
                rem = cur % 1000000000u;
            }
            while (work.size() > 1 && work.back() == 0) work.pop_back();
            for (int k = 0; k < 9; ++k) {
                digits.push_back(static_cast<char>('0' + rem % 10));
                rem /= 10;
            }
        }
        while (digits.size() > 1 && digits.back() == '0') digits.pop_back();
        std::reverse(digits.begin(), digits.end());
        return digits;
    }

private:
    void trim() {
        while (limbs_.size() > 1 && limbs_.back() == 0) limbs_.pop_back();
    }

    // Little-endian base-2^32 limbs; always at least one limb.
    std::vector<uint32_t> limbs_;

    friend struct BigNatDiv;
};

namespace detail {
inline int bignat_bit_length(const std::vector<uint32_t>& limbs) {
    uint32_t top = limbs.back();
    int bits = static_cast<int>(limbs.size() - 1) * 32;
    while (top) {
        ++bits;
        top >>= 1;
    }
    return bits;
}
}  // namespace detail

// Shift-and-subtract long division. Our quotients stay small (gcd chains on
// probability numerators), so the simple algorithm is adequate.
inline BigNat divmod(const BigNat& a, const BigNat& b, BigNat* rem) {
    if (b.is_zero()) return BigNat(0);  // callers guard; avoid UB
    if (a < b) {
        if (rem) *rem = a;
        return BigNat(0);
    }
    int shift = detail::bignat_bit_length(a.limbs_) - detail::bignat_bit_length(b.limbs_);
    // divisor << shift
    auto shl = [](const BigNat& x, int s) {
        BigNat r = x;
        int words = s / 32, bits = s % 32;
        if (bits) {
            uint32_t carry = 0;
            for (auto& limb : r.limbs_) {
                uint32_t nc = limb >> (32 - bits);
                limb = (limb << bits) | carry;
                carry = nc;
            }
            if (carry) r.limbs_.push_back(carry);
        }
        r.limbs_.insert(r.limbs_.begin(), words, 0);
        r.trim();
        return r;
    };
    BigNat remainder = a;
    BigNat q(0);
    for (int s = shift; s >= 0; --s) {
        BigNat d = shl(b, s);
        if (d <= remainder) {
            remainder = remainder - d;
            q = q + shl(BigNat(1), s);
        }
    }
    if (rem) *rem = remainder;
    return q;
}

inline BigNat gcd(BigNat a, BigNat b) {
    while (!b.is_zero()) {
        BigNat r;
        divmod(a, b, &r);
        a = b;
        b = r;
    }
    return a;
}

// Exact cardinality plus a runtime-friendly saturated view.
struct ExactCount {
    BigNat exact;
    bool fits_u64 = true;
    uint64_t saturated = 0;  // u64 value, or UINT64_MAX when saturated

    static ExactCount from(const BigNat& v) {
        ExactCount c;
        c.exact = v;
        c.fits_u64 = v.fits_u64();
        c.saturated = v.to_u64_saturating();
        return c;
    }
};

}  // namespace ctf
