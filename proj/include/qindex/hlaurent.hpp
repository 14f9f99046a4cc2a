#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>

#include "qindex/rational.hpp"

namespace qindex {

/// Saturating "infinite" bound for truncation windows.
inline constexpr int kWinInf = 1 << 28;

inline int win_add(int a, int b) {
    if (a >= kWinInf || b >= kWinInf) return kWinInf;
    return a + b;
}
inline int win_min(int a, int b) { return a < b ? a : b; }

/// Truncated Laurent series in hbar over Q(i).
///
/// Coefficients with exponent < k_min are exactly zero (valuation floor);
/// coefficients with exponent > k_max are unknown, never assumed zero.
/// Arithmetic shrinks k_max so that every reported coefficient is fully
/// determined by the operands' determined coefficients.
class HLaurent {
public:
    HLaurent() : k_min_(kWinInf), k_max_(kWinInf) {}  // exact zero

    static HLaurent zero() { return HLaurent(); }
    static HLaurent scalar(GaussianRational c, int exponent = 0);

    int k_min() const { return k_min_; }
    int k_max() const { return k_max_; }
    bool exact() const { return k_max_ >= kWinInf; }
    bool is_zero_on_window() const { return c_.empty(); }

    bool determined_at(int k) const { return k <= k_max_; }

    /// Coefficient at hbar^k; throws if k is beyond the determined window.
    GaussianRational coeff(int k) const;

    const std::map<int, GaussianRational>& coeffs() const { return c_; }

    void add_term(int k, const GaussianRational& c);

    HLaurent operator+(const HLaurent& o) const;
    HLaurent operator-(const HLaurent& o) const;
    HLaurent operator*(const HLaurent& o) const;
    HLaurent operator-() const;

    HLaurent scaled(const GaussianRational& c) const;
    HLaurent shifted(int dk) const;  // multiply by hbar^dk
    HLaurent truncated(int new_k_max) const;

    /// Equal as far as both windows reach (compares the common determined part).
    static bool equal_on_common_window(const HLaurent& a, const HLaurent& b);
    /// Both determined at k and coefficients agree.
    static bool equal_at(const HLaurent& a, const HLaurent& b, int k);

    bool operator==(const HLaurent& o) const {
        return k_min_ == o.k_min_ && k_max_ == o.k_max_ && c_ == o.c_;
    }

    /// "c*h^k + ..." ascending in k; "0" when no stored terms.
    std::string str() const;

private:
    friend class HLaurentBuilder;
    int k_min_, k_max_;
    std::map<int, GaussianRational> c_;

    void set_window(int lo, int hi) { k_min_ = lo; k_max_ = hi; }
    void prune();
};

}  // namespace qindex
