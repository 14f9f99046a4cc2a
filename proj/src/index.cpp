#include "qindex/index.hpp"

namespace qindex {

namespace {

/// Lowest stored hbar exponent, or kWinInf.
int valuation(const GradedElement& a) {
    int v = kWinInf;
    for (auto& [k, f] : a.terms()) v = win_min(v, k.hbar);
    return v;
}

bool zero_through(const GradedElement& a, int K) {
    if (a.window().k_max < K) return false;  // not determined that far
    for (auto& [k, f] : a.terms())
        if (k.hbar <= K) return false;
    return true;
}

}  // namespace

QuantumIdempotent lift_idempotent(const FedosovConnection& conn, const GradedElement& q, int K) {
    for (auto& [k, f] : q.terms())
        if (k.hbar != 0 || k.ydeg() != 0 || k.form != 0)
            throw std::invalid_argument("lift_idempotent: q must be a matrix of chart functions");
    if (!equal_on_common_window(moyal(q, q), q))
        throw std::invalid_argument("lift_idempotent: q q != q in the function ring");
    if (K < 0 || K > conn.policy().hbar_max - 2)
        throw std::invalid_argument(
            "lift_idempotent: requested order exceeds the connection truncation");

    GradedElement P = q;
    for (int pass = 0; pass < 12; ++pass) {
        GradedElement PP = star(conn, P, P);
        GradedElement defect = PP - P;
        if (zero_through(defect, K))
            return {P.truncated(K, conn.policy().max_filtration), K};
        GradedElement PPP = star(conn, P, PP);
        P = (PP.scaled(Rational(3)) - PPP.scaled(Rational(2))).truncated(K, kWinInf);
        if (valuation(P - q) < 1)
            throw std::logic_error("lift_idempotent: correction leaked into h^0");
    }
    throw std::logic_error("lift_idempotent: Newton iteration failed to converge");
}

GradedElement principal_symbol(const GradedElement& P) {
    GradedElement out(P.frame(), P.matrix_size(), Window{0, kWinInf, 0, kWinInf});
    for (auto& [k, f] : P.terms())
        if (k.hbar == 0) out.add_term(k, f);
    return out;
}

GradedElement cl(const FedosovConnection& conn, TauEngine& engine, const QuantumIdempotent& P) {
    return psi(conn, engine, P.P);
}

GradedElement poincare_homotopy(const GradedElement& alpha) {
    if (alpha.frame()->ring_kind() != RingKind::Poly)
        throw std::invalid_argument(
            "poincare_homotopy: only the polynomial chart supports the radial homotopy; "
            "use averages on the torus");
    if (!de_rham(alpha).is_zero_on_window())
        throw std::invalid_argument("poincare_homotopy: input form is not closed");

    GradedElement out(alpha.frame(), alpha.matrix_size(), alpha.window());
    for (auto& [k, f] : alpha.terms()) {
        int q = k.form_deg();
        if (q == 0)
            throw std::invalid_argument("poincare_homotopy: input must have positive form degree");
        // termwise radial homotopy: an x-monomial of degree s in a q-form
        // contracts with the Euler field and picks the factor 1/(s+q)
        for (auto& [deg, c] : f.terms()) {
            int s = 0;
            for (int i = 0; i < alpha.dim(); ++i) s += deg[i];
            Rational inv(1, s + q);
            int pos = 0;
            for (int i = 0; i < alpha.dim(); ++i) {
                uint8_t bit = uint8_t(1u << i);
                if (!(k.form & bit)) continue;
                ChartFunction::Key nd = deg;
                nd[i] += 1;
                TermKey nk = k;
                nk.form = uint8_t(k.form & ~bit);
                int sgn = (pos % 2) ? -1 : 1;
                out.add_term(nk, ChartFunction::monomial(alpha.dim(), f.bound(), nd,
                                                         c * GaussianRational(Rational(sgn) * inv)));
                ++pos;
            }
        }
    }
    return out;
}

HLaurent top_form_average(const GradedElement& form) {
    HLaurent out;
    out = out.truncated(form.window().k_max);
    for (auto& [k, f] : form.top_form_trace()) out.add_term(k, f.average());
    return out;
}

IndexReport verify_index(const Scenario& sc, int K) {
    IndexReport rep;
    rep.scenario = sc.name;
    rep.fourier = sc.frame->ring_kind() == RingKind::Fourier;
    rep.orders = sc.orders;

    FedosovConnection conn = build_connection(sc.geometry, sc.policy);
    TauEngine engine(sc.frame);

    QuantumIdempotent P = lift_idempotent(conn, sc.q, K);
    rep.idempotent_order = P.order;

    GradedElement lhs_form = psi(conn, engine, P.P);
    GradedElement rhs_form = rhs_index(*sc.geometry, sc.q, 2 * sc.n + 2);

    auto series_of = [&](const GradedElement& form) {
        if (rep.fourier) return top_form_average(form);
        // polynomial charts compare the full top coefficient; meaningful for
        // constant-coefficient scenarios (other poly scenarios are pipeline tests)
        HLaurent out;
        out = out.truncated(form.window().k_max);
        for (auto& [k, f] : form.top_form_trace()) {
            if (!f.is_constant())
                throw std::invalid_argument(
                    "verify_index: non-constant top form on a polynomial chart; the index "
                    "comparison is defined for constant-coefficient scenarios only");
            out.add_term(k, f.constant_coeff());
        }
        return out;
    };
    rep.lhs = series_of(lhs_form);
    rep.rhs = series_of(rhs_form);
    rep.difference = rep.lhs - rep.rhs;

    for (int k : sc.orders) {
        std::string note;
        bool ok = false;
        if (!rep.lhs.determined_at(k))
            note = "undetermined at this order (trace density window)";
        else if (!rep.rhs.determined_at(k))
            note = "undetermined at this order (characteristic form window)";
        else {
            ok = rep.lhs.coeff(k) == rep.rhs.coeff(k);
            if (!ok) note = "mismatch";
        }
        rep.pass.push_back(ok);
        rep.notes.push_back(note);
    }
    return rep;
}

}  // namespace qindex
