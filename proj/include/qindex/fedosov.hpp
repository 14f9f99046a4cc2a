#pragma once

#include "qindex/weyl.hpp"

namespace qindex {

/// Chart geometry feeding the Fedosov construction: symplectic frame,
/// torsion-free symplectic Christoffel symbols, bundle connection one-form,
/// and the closed two-form series Omega_hbar.
class ChartGeometry {
public:
    /// christoffel is indexed [k][i][j] flattened (dim^3), symmetric in (i,j),
    /// with w_km Gamma^m_ij totally symmetric (symplectic compatibility).
    /// gamma_V is an N x N matrix of one-forms; omega_h lies in h*Omega^2[[h]]
    /// and must be d-closed.
    ChartGeometry(FramePtr frame, int msize, std::vector<ChartFunction> christoffel,
                  GradedElement gamma_V, GradedElement omega_h);

    static ChartGeometry flat(FramePtr frame, int msize);

    const FramePtr& frame() const { return frame_; }
    int dim() const { return frame_->dim(); }
    int msize() const { return msize_; }
    const ChartFunction& christoffel(int k, int i, int j) const {
        int d = dim();
        return christoffel_[(k * d + i) * d + j];
    }
    bool flat_christoffel() const;
    const GradedElement& gamma_V() const { return gamma_V_; }
    const GradedElement& omega_h() const { return omega_h_; }

    /// omega = w_ij dx^i dx^j as a scalar two-form element.
    const GradedElement& omega_form() const { return omega_form_; }
    /// hbar * R term of the Weyl curvature, extracted from nabla^2 on y-linear
    /// generators rather than from an index formula.
    const GradedElement& hbar_R() const { return hbar_R_; }
    /// hbar * R^V term (paper normalization: nabla^2 = (1/2)[R + R^V, .]).
    const GradedElement& hbar_RV() const { return hbar_RV_; }

private:
    FramePtr frame_;
    int msize_;
    std::vector<ChartFunction> christoffel_;
    GradedElement gamma_V_;
    GradedElement omega_h_;
    GradedElement omega_form_, hbar_R_, hbar_RV_;

    void validate() const;
    void precompute();
};

/// dx^i d/dx^i - dx^i Gamma^k_ij y^j d/dy^k + [Gamma_V, .]
GradedElement nabla(const ChartGeometry& geom, const GradedElement& a);

/// Christoffel symbols from a generating function: Gamma_{kij} = d^3 phi,
/// raised with omega_upper. Totally symmetric lower symbols are
/// omega-compatible by construction.
std::vector<ChartFunction> christoffel_from_generating(const SymplecticFrame& frame,
                                                       const ChartFunction& phi);

/// Grassmann-type bundle connection one-form q(dq) - (dq)q of an idempotent
/// matrix q; q is flat for d + [., .] with this form.
GradedElement gamma_V_from_q(const GradedElement& q);

/// The solved Fedosov connection: A = -dx^i w_ij y^j + r with delta^{-1} r = 0,
/// r in Omega^1(W^2), Weyl curvature -omega + Omega_h.
class FedosovConnection {
public:
    const ChartGeometry& geometry() const { return *geom_; }
    const GradedElement& r() const { return r_; }
    const GradedElement& A() const { return A_; }
    const GradedElement& A0() const { return A0_; }
    const TruncationPolicy& policy() const { return policy_; }
    const Window& achieved() const { return achieved_; }
    const GradedElement& curvature_cache() const { return curvature_; }
    bool normalized() const { return normalized_; }

    /// D a = nabla a + (1/h)[A, a].
    GradedElement D(const GradedElement& a) const;

    friend FedosovConnection build_connection(std::shared_ptr<const ChartGeometry> geom,
                                              const TruncationPolicy& policy);
    friend FedosovConnection conjugate_connection(const FedosovConnection& conn,
                                                  const GradedElement& U);

private:
    std::shared_ptr<const ChartGeometry> geom_;
    TruncationPolicy policy_{};
    GradedElement A0_, r_, A_;
    GradedElement curvature_;
    Window achieved_;
    bool normalized_ = false;
};

/// Solve r degree-by-degree so that the Weyl curvature equals -omega + Omega_h,
/// with the normalization delta^{-1} r = 0. Post-conditions (curvature value,
/// centrality, D o D = 0 on probes) are checked, not assumed.
FedosovConnection build_connection(std::shared_ptr<const ChartGeometry> geom,
                                   const TruncationPolicy& policy);

/// h(R + R^V) + 2 nabla A + (1/h)[A, A].
GradedElement weyl_curvature(const FedosovConnection& conn);

/// The unique flat section with sigma(lift(a)) = a, for a in End_V((h)).
GradedElement lift(const FedosovConnection& conn, const GradedElement& a);

/// sigma(lift(a) o lift(b)).
GradedElement star(const FedosovConnection& conn, const GradedElement& a, const GradedElement& b);

/// Conjugated connection A~ = U^{-1} o A o U + h U^{-1} o nabla U for
/// U in I_N + Gamma(W^1); the Weyl curvature is unchanged.
FedosovConnection conjugate_connection(const FedosovConnection& conn, const GradedElement& U);

/// Inverse in the circle-algebra of U = I_N + U_1 with filtration(U_1) >= 1,
/// by the Neumann series truncated at the policy window.
GradedElement circle_inverse(const GradedElement& U, const TruncationPolicy& policy);

/// Whether D(q) = 0 for a y-free, dx-free, hbar-free endomorphism q.
bool check_flat_endomorphism(const FedosovConnection& conn, const GradedElement& q);

}  // namespace qindex
