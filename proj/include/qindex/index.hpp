#pragma once

#include <optional>
#include <string>

#include "qindex/chern_weil.hpp"
#include "qindex/ffs.hpp"
#include "qindex/scenario.hpp"

namespace qindex {

/// Star-product idempotent: P * P = P exactly through hbar^order, with
/// P|_{h=0} an exact idempotent of the function ring.
struct QuantumIdempotent {
    GradedElement P;
    int order;
};

/// hbar-adic Newton lifting P <- 3 P*P - 2 P*P*P starting from q; each pass
/// at least doubles the valuation of the defect P*P - P.
QuantumIdempotent lift_idempotent(const FedosovConnection& conn, const GradedElement& q, int K);

/// P|_{h=0}.
GradedElement principal_symbol(const GradedElement& P);

/// Representative top form Psi_D(P).
GradedElement cl(const FedosovConnection& conn, TauEngine& engine, const QuantumIdempotent& P);

/// Explicit exactness witness on star-shaped polynomial charts: returns eta
/// with d eta = alpha for a d-closed alpha of positive form degree.
GradedElement poincare_homotopy(const GradedElement& alpha);

/// hbar-series of torus averages of the top-form coefficient.
HLaurent top_form_average(const GradedElement& form);

/// Both sides of the index identity as exact hbar-series with per-order flags.
struct IndexReport {
    std::string scenario;
    bool fourier = true;
    HLaurent lhs, rhs, difference;          // averages (Fourier) or constants (Poly)
    std::vector<int> orders;
    std::vector<bool> pass;
    std::vector<std::string> notes;          // per order: "", "undetermined (lhs)", ...
    int idempotent_order = 0;

    bool all_pass() const {
        for (bool b : pass)
            if (!b) return false;
        return !pass.empty();
    }
};

/// Build the scenario geometry, lift the declared idempotent through hbar^K,
/// and compare average(Psi_D(P)) against the top component of
/// Ahat exp((omega - Omega_h)/h) ch(q) order-by-order.
IndexReport verify_index(const Scenario& sc, int K);

}  // namespace qindex
