#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qindex/chart_function.hpp"
#include "qindex/hlaurent.hpp"

namespace qindex {

/// Requested truncation for recursive constructions.
/// hbar_min is a reporting floor (callers must not request orders below it);
/// hbar_max and max_filtration bound what the recursions keep.
struct TruncationPolicy {
    int hbar_min;
    int hbar_max;
    int max_filtration;   // D, bounds 2k + |y-degree|
    int chart_bound;      // J or M of the coefficient ring

    void validate() const;
};

/// Determined region of a truncated element.
///
/// k_min / f_min are valuation floors (all true terms have hbar-exponent
/// >= k_min and filtration degree >= f_min); k_max / f_max are determined
/// ceilings (terms beyond are unknown, never assumed zero).
struct Window {
    int k_min = kWinInf, k_max = kWinInf;
    int f_min = kWinInf, f_max = kWinInf;

    static Window exact() { return {}; }

    static Window sum(const Window& a, const Window& b) {
        return {win_min(a.k_min, b.k_min), win_min(a.k_max, b.k_max),
                win_min(a.f_min, b.f_min), win_min(a.f_max, b.f_max)};
    }
    static Window product(const Window& a, const Window& b) {
        return {win_add(a.k_min, b.k_min),
                win_min(win_add(a.k_max, b.k_min), win_add(b.k_max, a.k_min)),
                win_add(a.f_min, b.f_min),
                win_min(win_add(a.f_max, b.f_min), win_add(b.f_max, a.f_min))};
    }
    Window hbar_shifted(int dk) const {
        return {win_add(k_min, dk), win_add(k_max, dk),
                win_add(f_min, 2 * dk), win_add(f_max, 2 * dk)};
    }
    Window filtration_shifted(int df) const {
        return {k_min, k_max, win_add(f_min, df), win_add(f_max, df)};
    }
    bool operator==(const Window&) const = default;
};

/// One monomial slot of a graded element: hbar^k y^alpha dx^S E_{row,col},
/// with the x-dependence and scalar held in the mapped ChartFunction.
struct TermKey {
    int16_t hbar = 0;
    std::array<uint8_t, 4> y{};  // y-multidegree, axes beyond dim unused
    uint8_t form = 0;            // bitmask of dx factors, bit i = dx^{i+1}
    uint8_t row = 0, col = 0;    // elementary matrix position, 0-based

    int ydeg() const { return y[0] + y[1] + y[2] + y[3]; }
    int form_deg() const;
    int filtration() const { return 2 * hbar + ydeg(); }

    auto operator<=>(const TermKey&) const = default;
};

/// Merge dx^A dx^B (in this order) into the canonical ascending product.
/// Returns {sign, mask}; sign 0 when the masks overlap.
std::pair<int, uint8_t> form_merge(uint8_t a, uint8_t b);

/// Chart symplectic data: omega_lower = (w_ij), omega_upper = (w^ij),
/// mutually inverse, both antisymmetric.
class SymplecticFrame {
public:
    SymplecticFrame(int dim, std::vector<ChartFunction> lower, std::vector<ChartFunction> upper);

    /// Standard block form on R^{2n} / torus: w_{2a-1,2a} = s, so
    /// omega = 2s (dx1 dx2 + dx3 dx4 + ...).
    static std::shared_ptr<const SymplecticFrame> standard(int n, RingKind kind, int bound,
                                                           const Rational& s);

    int dim() const { return dim_; }
    RingKind ring_kind() const { return lower_[0].kind(); }
    int chart_bound() const { return lower_[0].bound(); }
    const ChartFunction& lower(int i, int j) const { return lower_[i * dim_ + j]; }
    const ChartFunction& upper(int i, int j) const { return upper_[i * dim_ + j]; }
    bool constant() const;

    bool operator==(const SymplecticFrame& o) const {
        return dim_ == o.dim_ && lower_ == o.lower_ && upper_ == o.upper_;
    }

private:
    int dim_;
    std::vector<ChartFunction> lower_, upper_;  // row-major dim x dim
};

using FramePtr = std::shared_ptr<const SymplecticFrame>;

/// N x N matrix of exterior-form-valued Weyl series: a finite canonical sum
/// of terms hbar^k f(x) y^alpha dx^S E_{pq}, with dx factors stored in
/// ascending order. Immutable value semantics; all operations are pure.
class GradedElement {
public:
    GradedElement() : msize_(0) {}
    GradedElement(FramePtr frame, int msize, Window win = Window::exact());

    static GradedElement zero(FramePtr frame, int msize) { return {std::move(frame), msize}; }
    /// c * I_N at hbar^k.
    static GradedElement scalar(FramePtr frame, int msize, GaussianRational c, int hbar = 0);
    static GradedElement identity(FramePtr frame, int msize) {
        return scalar(std::move(frame), msize, GaussianRational(1));
    }
    /// f(x) * I_N.
    static GradedElement from_chart(FramePtr frame, int msize, const ChartFunction& f);
    /// y^i * I_N (1-based).
    static GradedElement y(FramePtr frame, int msize, int i);
    /// dx^i * I_N (1-based).
    static GradedElement dx(FramePtr frame, int msize, int i);
    static GradedElement single(FramePtr frame, int msize, const TermKey& key,
                                const ChartFunction& f);
    /// Matrix of chart functions, row-major msize x msize.
    static GradedElement from_matrix(FramePtr frame, int msize,
                                     const std::vector<ChartFunction>& entries);

    int dim() const { return frame_ ? frame_->dim() : 0; }
    int matrix_size() const { return msize_; }
    const FramePtr& frame() const { return frame_; }
    const Window& window() const { return win_; }
    bool chart_truncated() const { return chart_truncated_; }
    const std::map<TermKey, ChartFunction>& terms() const { return t_; }
    bool is_zero_on_window() const { return t_.empty(); }

    void add_term(const TermKey& key, const ChartFunction& f);

    GradedElement operator+(const GradedElement& o) const;
    GradedElement operator-(const GradedElement& o) const;
    GradedElement operator-() const;
    GradedElement scaled(const GaussianRational& c) const;
    GradedElement scaled(const Rational& c) const { return scaled(GaussianRational(c)); }
    /// Multiply by hbar^dk.
    GradedElement hbar_shifted(int dk) const;
    GradedElement truncated(int k_max, int f_max) const;
    GradedElement truncated(const TruncationPolicy& p) const {
        return truncated(p.hbar_max, p.max_filtration);
    }
    /// Declare construction-guaranteed valuations; throws if stored terms violate them.
    GradedElement with_floors(int k_min, int f_min) const;
    GradedElement with_window(const Window& w) const;

    /// Restriction by form degree q.
    GradedElement form_part(int q) const;
    /// Terms with no y and no dx content (an End_V((hbar)) element).
    bool is_endomorphism() const;
    /// Terms with no y, dx, hbar and constant coefficients.
    bool is_fiber() const;  // constant in x, no dx

    /// Matrix entry (r,c) of the y-free dx-free part as a map k -> ChartFunction.
    std::map<int, ChartFunction> endo_entry(int r, int c) const;
    /// Coefficient of the full top form dx^1..dx^{2n} at E_{rr} summed over r
    /// (the matrix trace), as a map k -> ChartFunction.
    std::map<int, ChartFunction> top_form_trace() const;

    bool operator==(const GradedElement& o) const {
        return msize_ == o.msize_ && win_ == o.win_ && t_ == o.t_;
    }

    /// Deterministic canonical rendering.
    std::string str() const;

private:
    FramePtr frame_;
    int msize_;
    Window win_;
    bool chart_truncated_ = false;
    std::map<TermKey, ChartFunction> t_;

    friend GradedElement moyal(const GradedElement&, const GradedElement&);
    friend void check_compat(const GradedElement&, const GradedElement&, const char*);
};

void check_compat(const GradedElement& a, const GradedElement& b, const char* op);

/// Fiberwise Moyal product with matrix multiplication on the matrix part and
/// exterior product on the form part.
GradedElement moyal(const GradedElement& a, const GradedElement& b);

/// Graded commutator a o b - (-1)^{qa qb} b o a (decomposes by form parity).
GradedElement gcomm(const GradedElement& a, const GradedElement& b);

/// Koszul differential dx^i d/dy^i.
GradedElement koszul_delta(const GradedElement& a);

/// Contracting homotopy of the Koszul differential: a term of y-degree p and
/// form degree q maps to 1/(p+q) times the Euler-type contraction, 0 if p+q=0.
GradedElement koszul_delta_inv(const GradedElement& a);

/// Projection onto y-degree 0, form degree 0.
GradedElement sigma(const GradedElement& a);

/// Coefficient de Rham differential dx^i d/dx^i (new dx multiplies from the left).
GradedElement de_rham(const GradedElement& a);

/// Min over terms of 2k + |alpha|; kWinInf for zero.
int filtration_degree(const GradedElement& a);

/// Zero on the intersection of the determined windows.
bool equal_on_common_window(const GradedElement& a, const GradedElement& b);

}  // namespace qindex
