#pragma once

#include <array>
#include <map>
#include <string>

#include "qindex/rational.hpp"

namespace qindex {

enum class RingKind { Poly, Fourier };

/// Coefficient function on the chart: a polynomial in x of total degree <= J,
/// or a finite Fourier sum with max|m_i| <= M (period 2*pi per axis).
///
/// Products that would exceed the bound drop the offending terms and set a
/// sticky `truncated` flag; nothing is ever silently treated as exact after
/// a drop.
class ChartFunction {
public:
    using Key = std::array<int, 4>;  // exponents (Poly) or frequencies (Fourier)

    ChartFunction() : kind_(RingKind::Poly), dim_(0), bound_(0) {}

    static ChartFunction zero(RingKind kind, int dim, int bound);
    static ChartFunction constant(RingKind kind, int dim, int bound, GaussianRational c);
    /// c * x^deg (Poly variant).
    static ChartFunction monomial(int dim, int bound, Key deg, GaussianRational c);
    /// c * e^{i m.x} (Fourier variant).
    static ChartFunction mode(int dim, int bound, Key m, GaussianRational c);
    /// amp * cos(m.x), amp * sin(m.x) as real Fourier sums.
    static ChartFunction cosine(int dim, int bound, Key m, Rational amp);
    static ChartFunction sine(int dim, int bound, Key m, Rational amp);

    RingKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int bound() const { return bound_; }
    bool truncated() const { return truncated_; }
    bool is_zero() const { return c_.empty(); }
    bool is_constant() const;

    /// Exact conjugation symmetry c(-m) == conj(c(m)); Fourier only.
    bool reality() const;

    GaussianRational constant_coeff() const;

    const std::map<Key, GaussianRational>& terms() const { return c_; }

    ChartFunction operator+(const ChartFunction& o) const;
    ChartFunction operator-(const ChartFunction& o) const;
    ChartFunction operator-() const;
    ChartFunction operator*(const ChartFunction& o) const;
    ChartFunction scaled(const GaussianRational& c) const;

    /// d/dx^axis, 1-based axis.
    ChartFunction derive(int axis) const;

    /// Normalized torus integral: coefficient of the zero mode. Fourier only.
    GaussianRational average() const;

    ChartFunction conj() const;

    bool operator==(const ChartFunction& o) const;
    bool operator!=(const ChartFunction& o) const { return !(*this == o); }

    std::string str() const;

private:
    RingKind kind_;
    int dim_;
    int bound_;
    bool truncated_ = false;
    std::map<Key, GaussianRational> c_;

    void insert(const Key& k, const GaussianRational& c);
    void check_compat(const ChartFunction& o, const char* op) const;
};

}  // namespace qindex
