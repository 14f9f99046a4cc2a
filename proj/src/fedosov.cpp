#include "qindex/fedosov.hpp"

#include <array>

namespace qindex {

namespace {

/// y-degree 0 everywhere and every (hbar, y, form) slice proportional to I_N.
bool is_central(const GradedElement& a) {
    for (auto& [k, f] : a.terms())
        if (k.ydeg() != 0) return false;
    if (a.matrix_size() == 1) return true;
    struct SliceKey {
        int16_t hbar;
        uint8_t form;
        auto operator<=>(const SliceKey&) const = default;
    };
    std::map<SliceKey, std::map<int, ChartFunction>> slices;
    for (auto& [k, f] : a.terms()) {
        if (k.row != k.col) return false;
        slices[{k.hbar, k.form}][k.row] = f;
    }
    for (auto& [sk, diag] : slices) {
        if (int(diag.size()) != a.matrix_size()) return false;
        for (auto& [r, f] : diag)
            if (f != diag.begin()->second) return false;
    }
    return true;
}

GradedElement minus_dx_omega_y(const ChartGeometry& geom) {
    const SymplecticFrame& fr = *geom.frame();
    GradedElement a0(geom.frame(), geom.msize());
    for (int i = 0; i < fr.dim(); ++i)
        for (int j = 0; j < fr.dim(); ++j) {
            const ChartFunction& w = fr.lower(i, j);
            if (w.is_zero()) continue;
            for (int r = 0; r < geom.msize(); ++r) {
                TermKey k;
                k.y[j] = 1;
                k.form = uint8_t(1u << i);
                k.row = k.col = uint8_t(r);
                a0.add_term(k, -w);
            }
        }
    return a0;
}

}  // namespace

ChartGeometry::ChartGeometry(FramePtr frame, int msize, std::vector<ChartFunction> christoffel,
                             GradedElement gamma_V, GradedElement omega_h)
    : frame_(std::move(frame)),
      msize_(msize),
      christoffel_(std::move(christoffel)),
      gamma_V_(std::move(gamma_V)),
      omega_h_(std::move(omega_h)) {
    validate();
    precompute();
}

ChartGeometry ChartGeometry::flat(FramePtr frame, int msize) {
    int d = frame->dim();
    std::vector<ChartFunction> gamma(size_t(d * d * d),
                                     ChartFunction::zero(frame->ring_kind(), d, frame->chart_bound()));
    GradedElement zero = GradedElement::zero(frame, msize);
    return ChartGeometry(frame, msize, std::move(gamma), zero, zero);
}

bool ChartGeometry::flat_christoffel() const {
    for (auto& f : christoffel_)
        if (!f.is_zero()) return false;
    return true;
}

void ChartGeometry::validate() const {
    int d = dim();
    if (christoffel_.size() != size_t(d * d * d))
        throw std::invalid_argument("ChartGeometry: christoffel must have dim^3 entries");
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < i; ++j)
                if (christoffel(k, i, j) != christoffel(k, j, i))
                    throw std::invalid_argument(
                        "ChartGeometry: christoffel symbols must be symmetric in the lower indices");
    // Symplectic compatibility: w_km Gamma^m_ij totally symmetric in (k,i,j).
    auto lowered = [&](int k, int i, int j) {
        ChartFunction s = ChartFunction::zero(frame_->ring_kind(), d, frame_->chart_bound());
        for (int m = 0; m < d; ++m) s = s + frame_->lower(k, m) * christoffel(m, i, j);
        return s;
    };
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (lowered(k, i, j) != lowered(i, k, j))
                    throw std::invalid_argument(
                        "ChartGeometry: connection is not compatible with omega (w Gamma not symmetric)");

    for (auto& [k, f] : gamma_V_.terms())
        if (k.hbar != 0 || k.ydeg() != 0 || k.form_deg() != 1)
            throw std::invalid_argument("ChartGeometry: gamma_V must be an hbar-free matrix of one-forms");

    for (auto& [k, f] : omega_h_.terms()) {
        if (k.ydeg() != 0 || k.form_deg() != 2)
            throw std::invalid_argument("ChartGeometry: omega_h must be a series of two-forms");
        if (k.hbar < 1)
            throw std::invalid_argument("ChartGeometry: omega_h must have no h^0 term");
    }
    if (!is_central(omega_h_))
        throw std::invalid_argument("ChartGeometry: omega_h must be a scalar form");
    if (!de_rham(omega_h_).is_zero_on_window())
        throw std::invalid_argument("ChartGeometry: omega_h must be d-closed");
}

void ChartGeometry::precompute() {
    const SymplecticFrame& fr = *frame_;
    int d = dim();

    // omega = w_ij dx^i dx^j
    omega_form_ = GradedElement::zero(frame_, msize_);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const ChartFunction& w = fr.lower(i, j);
            if (w.is_zero()) continue;
            auto [sgn, mask] = form_merge(uint8_t(1u << i), uint8_t(1u << j));
            if (sgn == 0) continue;
            for (int r = 0; r < msize_; ++r) {
                TermKey k;
                k.form = mask;
                k.row = k.col = uint8_t(r);
                omega_form_.add_term(k, sgn < 0 ? -w : w);
            }
        }

    // h R from nabla^2 on the y-linear generators: with T^c = nabla^2(y^c),
    // h R = sum_c T^c with y^k replaced by y^k y^m w_{cm}.
    hbar_R_ = GradedElement::zero(frame_, msize_);
    for (int c = 0; c < d; ++c) {
        GradedElement yc = GradedElement::y(frame_, msize_, c + 1);
        GradedElement T = nabla(*this, nabla(*this, yc));
        for (auto& [k, f] : T.terms()) {
            if (k.ydeg() != 1)
                throw std::logic_error("ChartGeometry: nabla^2(y^c) is not y-linear");
            for (int m = 0; m < d; ++m) {
                const ChartFunction& w = fr.lower(c, m);
                if (w.is_zero()) continue;
                TermKey nk = k;
                nk.y[m] += 1;
                hbar_R_.add_term(nk, f * w);
            }
        }
    }

    // h R^V = 2h (d Gamma_V + Gamma_V o Gamma_V); nabla^2 = (1/2)[R + R^V, .]
    hbar_RV_ = (de_rham(gamma_V_) + moyal(gamma_V_, gamma_V_)).hbar_shifted(1).scaled(Rational(2));
}

GradedElement nabla(const ChartGeometry& geom, const GradedElement& a) {
    GradedElement res = de_rham(a);
    int d = geom.dim();
    if (!geom.flat_christoffel()) {
        GradedElement part(a.frame(), a.matrix_size(), a.window());
        for (auto& [k, f] : a.terms()) {
            for (int kk = 0; kk < d; ++kk) {
                if (k.y[kk] == 0) continue;
                for (int i = 0; i < d; ++i) {
                    uint8_t di = uint8_t(1u << i);
                    auto [sgn, mask] = form_merge(di, k.form);
                    if (sgn == 0) continue;
                    for (int j = 0; j < d; ++j) {
                        const ChartFunction& g = geom.christoffel(kk, i, j);
                        if (g.is_zero()) continue;
                        TermKey nk = k;
                        nk.y[kk] -= 1;
                        nk.y[j] += 1;
                        nk.form = mask;
                        part.add_term(nk, (f * g).scaled(GaussianRational(
                                              Rational(-sgn * int(k.y[kk])))));
                    }
                }
            }
        }
        res = res + part;
    }
    if (!geom.gamma_V().is_zero_on_window()) res = res + gcomm(geom.gamma_V(), a);
    return res;
}

std::vector<ChartFunction> christoffel_from_generating(const SymplecticFrame& frame,
                                                       const ChartFunction& phi) {
    int d = frame.dim();
    std::vector<ChartFunction> lowered(size_t(d * d * d),
                                       ChartFunction::zero(phi.kind(), d, phi.bound()));
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                lowered[(k * d + i) * d + j] = phi.derive(k + 1).derive(i + 1).derive(j + 1);
    std::vector<ChartFunction> up = lowered;
    for (int m = 0; m < d; ++m)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                ChartFunction s = ChartFunction::zero(phi.kind(), d, phi.bound());
                for (int l = 0; l < d; ++l)
                    s = s + frame.upper(m, l) * lowered[(l * d + i) * d + j];
                up[(m * d + i) * d + j] = s;
            }
    return up;
}

GradedElement gamma_V_from_q(const GradedElement& q) {
    return gcomm(q, de_rham(q));
}

GradedElement FedosovConnection::D(const GradedElement& a) const {
    return nabla(*geom_, a) + gcomm(A_, a).hbar_shifted(-1);
}

FedosovConnection build_connection(std::shared_ptr<const ChartGeometry> geom,
                                   const TruncationPolicy& policy) {
    policy.validate();
    const ChartGeometry& g = *geom;
    GradedElement A0 = minus_dx_omega_y(g);

    GradedElement B0 = (g.hbar_R() + g.hbar_RV() + nabla(g, A0).scaled(Rational(2)) +
                        gcomm(A0, A0).hbar_shifted(-1) + g.omega_form() - g.omega_h())
                           .scaled(Rational(1, 2));

    Window full{0, policy.hbar_max, 2, policy.max_filtration};
    GradedElement r = GradedElement::zero(g.frame(), g.msize()).with_window(full);
    bool converged = false;
    for (int it = 0; it <= policy.max_filtration + 4; ++it) {
        GradedElement src = B0 + nabla(g, r) + gcomm(r, r).hbar_shifted(-1).scaled(Rational(1, 2));
        GradedElement next = koszul_delta_inv(src).truncated(policy).with_window(full);
        if (next == r) {
            converged = true;
            break;
        }
        r = next;
    }
    if (!converged)
        throw std::logic_error("build_connection: recursion failed to stabilize within the policy window");

    // A vanishing fixed point with an exact vanishing source is exact, not
    // merely zero-on-window; keep the infinite window in that case.
    if (r.is_zero_on_window() && B0.window().k_max >= kWinInf && B0.window().f_max >= kWinInf &&
        koszul_delta_inv(B0).is_zero_on_window())
        r = GradedElement::zero(g.frame(), g.msize());

    r = r.with_floors(0, 2);  // construction guarantee, runtime-checked
    if (!koszul_delta_inv(r).is_zero_on_window())
        throw std::logic_error("build_connection: normalization delta^{-1} r = 0 violated");

    FedosovConnection conn;
    conn.geom_ = geom;
    conn.policy_ = policy;
    conn.A0_ = A0;
    conn.r_ = r;
    conn.A_ = A0 + r;
    conn.normalized_ = true;

    // Post-conditions are the specification of correctness: curvature value,
    // centrality, and flatness of D on generators.
    GradedElement cw = weyl_curvature(conn);
    conn.curvature_ = cw;
    conn.achieved_ = cw.window();
    if (!is_central(cw))
        throw std::logic_error("build_connection: Weyl curvature is not a scalar two-form");
    if (!equal_on_common_window(cw, -g.omega_form() + g.omega_h()))
        throw std::logic_error("build_connection: Weyl curvature != -omega + Omega_h");

    std::vector<GradedElement> probes;
    for (int i = 1; i <= g.dim(); ++i) probes.push_back(GradedElement::y(g.frame(), g.msize(), i));
    for (int i = 1; i <= g.dim(); ++i) {
        ChartFunction gen =
            g.frame()->ring_kind() == RingKind::Poly
                ? ChartFunction::monomial(g.dim(), g.frame()->chart_bound(),
                                          [&] { ChartFunction::Key k{}; k[i - 1] = 1; return k; }(),
                                          GaussianRational(1))
                : ChartFunction::mode(g.dim(), g.frame()->chart_bound(),
                                      [&] { ChartFunction::Key k{}; k[i - 1] = 1; return k; }(),
                                      GaussianRational(1));
        probes.push_back(GradedElement::from_chart(g.frame(), g.msize(), gen));
    }
    for (auto& p : probes)
        if (!conn.D(conn.D(p)).is_zero_on_window())
            throw std::logic_error("build_connection: D o D != 0 on a generator");
    return conn;
}

GradedElement weyl_curvature(const FedosovConnection& conn) {
    const ChartGeometry& g = conn.geometry();
    return g.hbar_R() + g.hbar_RV() + nabla(g, conn.A()).scaled(Rational(2)) +
           gcomm(conn.A(), conn.A()).hbar_shifted(-1);
}

GradedElement lift(const FedosovConnection& conn, const GradedElement& a) {
    if (!a.is_endomorphism())
        throw std::invalid_argument("lift: argument must be y-free and dx-free");
    if (a.is_zero_on_window()) return a;

    // C((h))-linearity: shift a nonzero valuation out, lift, shift back.
    int v = a.window().k_min;
    if (v >= kWinInf) {
        int m = kWinInf;
        for (auto& [k, f] : a.terms()) m = win_min(m, k.hbar);
        v = m;
    }
    if (v != 0) return lift(conn, a.hbar_shifted(-v)).hbar_shifted(v);

    const TruncationPolicy& policy = conn.policy();
    Window full{0, policy.hbar_max, 0, policy.max_filtration};
    GradedElement u = a.truncated(policy).with_window(full);
    bool converged = false;
    for (int it = 0; it <= policy.max_filtration + 4; ++it) {
        GradedElement corr = nabla(conn.geometry(), u) + gcomm(conn.r(), u).hbar_shifted(-1);
        GradedElement next = (a + koszul_delta_inv(corr)).truncated(policy).with_window(full);
        if (next == u) {
            converged = true;
            break;
        }
        u = next;
    }
    if (!converged) throw std::logic_error("lift: fixed point failed to stabilize");

    // Determined one step short of the policy in both directions, and never
    // beyond what the argument itself determines.
    Window claim{0, win_min(policy.hbar_max - 1, a.window().k_max), 0,
                 policy.max_filtration - 1};
    u = u.truncated(claim.k_max, claim.f_max).with_window(claim);

    if (!equal_on_common_window(sigma(u), a))
        throw std::logic_error("lift: sigma(lift(a)) != a");
    if (!conn.D(u).is_zero_on_window())
        throw std::logic_error("lift: D(lift(a)) != 0");
    return u;
}

GradedElement star(const FedosovConnection& conn, const GradedElement& a, const GradedElement& b) {
    return sigma(moyal(lift(conn, a), lift(conn, b)));
}

GradedElement circle_inverse(const GradedElement& U, const TruncationPolicy& policy) {
    GradedElement one = GradedElement::identity(U.frame(), U.matrix_size());
    GradedElement V = U - one;
    if (!V.is_zero_on_window() && filtration_degree(V) < 1)
        throw std::invalid_argument("circle_inverse: U must lie in I_N + W^1");
    for (auto& [k, f] : V.terms())
        if (k.form != 0)
            throw std::invalid_argument("circle_inverse: U must be a zero-form");

    // Neumann series: (I + V)^{-1} = sum (-V)^m; V raises filtration, so the
    // truncated series terminates. For exact U the result is correct on the
    // whole policy window (the discarded tail has filtration > D).
    bool exact_in = U.window().k_max >= kWinInf && U.window().f_max >= kWinInf;
    GradedElement acc = one;
    GradedElement pw = one;
    for (int m = 1; m <= policy.max_filtration + 1; ++m) {
        pw = moyal(pw, -V).truncated(policy);
        if (pw.is_zero_on_window()) break;
        acc = acc + pw;
    }
    acc = acc.truncated(policy);
    if (exact_in) {
        Window w = acc.window();
        w.k_max = policy.hbar_max;
        w.f_max = policy.max_filtration;
        acc = acc.with_window(w);
    }
    return acc;
}

FedosovConnection conjugate_connection(const FedosovConnection& conn, const GradedElement& U) {
    const TruncationPolicy& policy = conn.policy();
    GradedElement Uinv = circle_inverse(U, policy);
    GradedElement At = moyal(moyal(Uinv, conn.A()), U) +
                       moyal(Uinv, nabla(conn.geometry(), U)).hbar_shifted(1);
    At = At.truncated(policy);
    GradedElement rt = At - conn.A0();
    if (!rt.is_zero_on_window() && filtration_degree(rt) < 2)
        throw std::logic_error("conjugate_connection: conjugated r leaves Omega^1(W^2)");
    rt = rt.truncated(policy).with_floors(rt.window().k_min, 2);

    FedosovConnection out;
    out.geom_ = conn.geom_;
    out.policy_ = policy;
    out.A0_ = conn.A0_;
    out.r_ = rt;
    out.A_ = out.A0_ + rt;
    out.normalized_ = false;
    GradedElement cw = weyl_curvature(out);
    out.curvature_ = cw;
    out.achieved_ = cw.window();
    if (!equal_on_common_window(cw, conn.curvature_cache()))
        throw std::logic_error("conjugate_connection: Weyl curvature changed under equivalence");
    return out;
}

bool check_flat_endomorphism(const FedosovConnection& conn, const GradedElement& q) {
    if (!q.is_endomorphism())
        throw std::invalid_argument("check_flat_endomorphism: q must be y-free and dx-free");
    for (auto& [k, f] : q.terms())
        if (k.hbar != 0)
            throw std::invalid_argument("check_flat_endomorphism: q must be hbar-free");
    return conn.D(q).is_zero_on_window();
}

}  // namespace qindex
