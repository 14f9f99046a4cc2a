#pragma once

#include "qindex/fedosov.hpp"
#include "qindex/weyl.hpp"

namespace qindex {

// ---- exact rational power series (dense, coefficient of x^m at index m) ----

using RatSeries = std::vector<Rational>;

RatSeries series_mul(const RatSeries& a, const RatSeries& b, int order);
RatSeries series_inv(const RatSeries& a, int order);   // a[0] != 0
RatSeries series_exp(const RatSeries& a, int order);   // a[0] == 0
RatSeries series_log(const RatSeries& a, int order);   // a[0] == 1
/// Square root by Newton iteration; a[0] == 1. Used as the independent
/// route against exp((1/2) log a).
RatSeries series_sqrt_newton(const RatSeries& a, int order);

/// x / sinh(x) as an even series.
RatSeries x_over_sinh(int order);

/// Precomputed data of the adjoint invariant form Q: the even series
/// L(x) = log(x/sinh x) and S(x) = (x/sinh x)^{1/2} up to ahat_order.
class InvariantFormQ {
public:
    explicit InvariantFormQ(int ahat_order);

    int order() const { return order_; }
    const RatSeries& log_coeffs() const { return L_; }   // L(x)
    const RatSeries& sqrt_coeffs() const { return S_; }  // S(x) = exp(L/2)

private:
    int order_;
    RatSeries L_, S_;
};

// ---- the h-equivariant projection and its curvature ----

/// pr(v) = v|_{y=0} + (1/N) sigma_2(tr v) I_N.
GradedElement pr(const GradedElement& v);

/// C(v,w) = [pr v, pr w] - pr([v,w]) with the rescaled fiber bracket
/// (1/h)[.,.] under which the sp quadratics close.
GradedElement curvature_C(const GradedElement& v, const GradedElement& w);

/// Decomposition of an h-valued element into its sp matrix (from the
/// y-quadratic scalar part, via the rescaled adjoint action), the y-free
/// matrix part, and the central piece of the latter.
struct CurvatureData {
    std::vector<GradedElement> sp_matrix;  // dim x dim scalar entries X^k_l
    GradedElement gl_part;
    GradedElement scalar_part;
};
CurvatureData decompose_curvature(const GradedElement& v);

/// Q_n evaluated on h-valued (possibly form-valued) elements, per the printed
/// form of Q: Q1(h) = tr(h_gl)/h; Q2(h,h') = tr(h_gl h'_gl)/(2 h^2)
/// - N tr(X1 X1')/(48 h^2).
GradedElement q_n_eval(const InvariantFormQ& Q, int n, const std::vector<GradedElement>& args);

/// Chern-Weil cocycle chi(Q)(v_1..v_{2j}) = (1/(2j)!) sum_nu sgn(nu)
/// Q(C(v_nu(1), v_nu(2)), ...); one-form arguments are evaluated with the
/// form factors pulled out in slot order.
GradedElement chi_Q(const InvariantFormQ& Q, int j, const std::vector<GradedElement>& args);

// ---- characteristic forms of the base geometry ----

/// End(TM)-valued curvature two-form of the christoffel symbols:
/// R^k_l = d Gamma^k_l + Gamma^k_m Gamma^m_l, as dim x dim scalar elements.
std::vector<GradedElement> base_curvature(const ChartGeometry& geom);

/// det(R/2 / sinh(R/2))^{1/2} = exp((1/2) tr L(R/2)) as an even-form series.
GradedElement ahat_series(const std::vector<GradedElement>& R, const InvariantFormQ& Q,
                          int order);

/// tr exp(R^E) with the Grassmann curvature R^E = q (dq)(dq) of an exact
/// idempotent matrix q (no 2 pi i normalization).
GradedElement chern_character(const GradedElement& q, int order);

/// [ Ahat(M) exp((omega - Omega_h)/h) ch(q) ]_{2n}.
GradedElement rhs_index(const ChartGeometry& geom, const GradedElement& q, int order);

}  // namespace qindex
