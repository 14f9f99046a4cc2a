#include "qindex/chern_weil.hpp"

#include <functional>

namespace qindex {

namespace {

Rational factorial(int k) {
    Rational r(1);
    for (int t = 2; t <= k; ++t) r *= Rational(t);
    return r;
}

GradedElement trace_of(const GradedElement& a) {
    GradedElement out(a.frame(), 1, a.window());
    for (auto& [k, f] : a.terms()) {
        if (k.row != k.col) continue;
        TermKey nk = k;
        nk.row = nk.col = 0;
        out.add_term(nk, f);
    }
    return out;
}

GradedElement y_free_part(const GradedElement& a) {
    GradedElement out(a.frame(), a.matrix_size(), a.window());
    for (auto& [k, f] : a.terms())
        if (k.ydeg() == 0) out.add_term(k, f);
    return out;
}

/// exp of a scalar series of even forms with no 0-form part; the sum
/// terminates once the form degree passes dim.
GradedElement exp_even_form(const GradedElement& a) {
    GradedElement out = GradedElement::identity(a.frame(), 1);
    GradedElement pw = GradedElement::identity(a.frame(), 1);
    for (int t = 1; 2 * t <= a.dim(); ++t) {
        pw = moyal(pw, a);
        if (pw.is_zero_on_window() && pw.window().k_max >= kWinInf) break;
        out = out + pw.scaled(GaussianRational(Rational(1) / factorial(t)));
    }
    return out;
}

}  // namespace

RatSeries series_mul(const RatSeries& a, const RatSeries& b, int order) {
    RatSeries r(size_t(order) + 1, Rational(0));
    for (size_t i = 0; i < a.size() && int(i) <= order; ++i) {
        if (a[i].is_zero()) continue;
        for (size_t j = 0; j < b.size() && int(i + j) <= order; ++j) r[i + j] += a[i] * b[j];
    }
    return r;
}

RatSeries series_inv(const RatSeries& a, int order) {
    if (a.empty() || a[0].is_zero())
        throw std::invalid_argument("series_inv: nonzero constant term required");
    RatSeries r(size_t(order) + 1, Rational(0));
    Rational c0inv = Rational(1) / a[0];
    r[0] = c0inv;
    for (int m = 1; m <= order; ++m) {
        Rational s(0);
        for (int i = 1; i <= m && i < int(a.size()); ++i) s += a[size_t(i)] * r[size_t(m - i)];
        r[size_t(m)] = -c0inv * s;
    }
    return r;
}

RatSeries series_exp(const RatSeries& a, int order) {
    if (!a.empty() && !a[0].is_zero())
        throw std::invalid_argument("series_exp: needs zero constant term");
    RatSeries r(size_t(order) + 1, Rational(0));
    r[0] = Rational(1);
    RatSeries pw{Rational(1)};
    for (int k = 1; k <= order; ++k) {
        pw = series_mul(pw, a, order);
        bool all_zero = true;
        Rational invf = Rational(1) / factorial(k);
        for (int m = 0; m <= order; ++m)
            if (m < int(pw.size()) && !pw[size_t(m)].is_zero()) {
                r[size_t(m)] += invf * pw[size_t(m)];
                all_zero = false;
            }
        if (all_zero) break;
    }
    return r;
}

RatSeries series_log(const RatSeries& a, int order) {
    if (a.empty() || !a[0].is_one())
        throw std::invalid_argument("series_log: needs constant term 1");
    RatSeries u = a;
    u[0] = Rational(0);  // a = 1 + u
    RatSeries r(size_t(order) + 1, Rational(0));
    RatSeries pw{Rational(1)};
    for (int k = 1; k <= order; ++k) {
        pw = series_mul(pw, u, order);
        bool all_zero = true;
        Rational c = Rational((k % 2) ? 1 : -1) / Rational(k);
        for (int m = 0; m <= order; ++m)
            if (m < int(pw.size()) && !pw[size_t(m)].is_zero()) {
                r[size_t(m)] += c * pw[size_t(m)];
                all_zero = false;
            }
        if (all_zero) break;
    }
    return r;
}

RatSeries series_sqrt_newton(const RatSeries& a, int order) {
    if (a.empty() || !a[0].is_one())
        throw std::invalid_argument("series_sqrt_newton: needs constant term 1");
    RatSeries y{Rational(1)};
    for (int it = 0; (1 << it) <= 2 * order + 2; ++it) {
        RatSeries ainv_y = series_mul(a, series_inv(y, order), order);
        RatSeries next(size_t(order) + 1, Rational(0));
        for (int m = 0; m <= order; ++m) {
            Rational ym = m < int(y.size()) ? y[size_t(m)] : Rational(0);
            next[size_t(m)] = (ym + ainv_y[size_t(m)]) / Rational(2);
        }
        if (next == y) break;
        y = next;
    }
    return y;
}

RatSeries x_over_sinh(int order) {
    // sinh(x)/x = sum x^{2k} / (2k+1)!
    RatSeries s(size_t(order) + 1, Rational(0));
    for (int k = 0; 2 * k <= order; ++k) s[size_t(2 * k)] = Rational(1) / factorial(2 * k + 1);
    return series_inv(s, order);
}

InvariantFormQ::InvariantFormQ(int ahat_order) : order_(ahat_order) {
    if (ahat_order < 0 || ahat_order > 40)
        throw std::invalid_argument("InvariantFormQ: order out of range");
    L_ = series_log(x_over_sinh(order_), order_);
    RatSeries half = L_;
    for (auto& c : half) c = c / Rational(2);
    S_ = series_exp(half, order_);
}

GradedElement pr(const GradedElement& v) {
    int msize = v.matrix_size();
    GradedElement out(v.frame(), msize, v.window());
    for (auto& [k, f] : v.terms())
        if (k.ydeg() == 0) out.add_term(k, f);  // pr_0

    GradedElement quad(v.frame(), 1, v.window());  // sigma_2(tr v)
    for (auto& [k, f] : v.terms()) {
        if (k.ydeg() != 2 || k.row != k.col) continue;
        TermKey nk = k;
        nk.row = nk.col = 0;
        quad.add_term(nk, f);
    }
    for (auto& [k, f] : quad.terms())
        for (int r = 0; r < msize; ++r) {
            TermKey nk = k;
            nk.row = nk.col = uint8_t(r);
            out.add_term(nk, f.scaled(GaussianRational(Rational(1, msize))));
        }
    return out;
}

GradedElement curvature_C(const GradedElement& v, const GradedElement& w) {
    auto br = [](const GradedElement& x, const GradedElement& y) {
        return gcomm(x, y).hbar_shifted(-1);
    };
    return br(pr(v), pr(w)) - pr(br(v, w));
}

CurvatureData decompose_curvature(const GradedElement& v) {
    int dim = v.dim();
    const SymplecticFrame& fr = *v.frame();
    int N = v.matrix_size();
    CurvatureData out;
    out.gl_part = y_free_part(v);

    // scalar quadratic content q_{kl} y^k y^l, read through the trace
    GradedElement quad(v.frame(), 1, v.window());
    for (auto& [k, f] : v.terms()) {
        if (k.ydeg() == 0) continue;
        if (k.ydeg() != 2)
            throw std::invalid_argument("decompose_curvature: element does not lie in h");
        if (k.row != k.col)
            throw std::invalid_argument("decompose_curvature: quadratic part must be scalar");
        TermKey nk = k;
        nk.row = nk.col = 0;
        quad.add_term(nk, f.scaled(GaussianRational(Rational(1, N))));
    }
    std::vector<GradedElement> q(size_t(dim) * size_t(dim), GradedElement(v.frame(), 1, v.window()));
    for (auto& [k, f] : quad.terms()) {
        int a = -1, b = -1;
        for (int i = 0; i < dim; ++i) {
            if (k.y[i] == 2)
                a = b = i;
            else if (k.y[i] == 1)
                (a < 0 ? a : b) = i;
        }
        TermKey nk = k;
        nk.y = {0, 0, 0, 0};
        if (a == b) {
            q[size_t(a) * dim + size_t(a)].add_term(nk, f);
        } else {
            q[size_t(a) * dim + size_t(b)].add_term(nk, f.scaled(GaussianRational(Rational(1, 2))));
            q[size_t(b) * dim + size_t(a)].add_term(nk, f.scaled(GaussianRational(Rational(1, 2))));
        }
    }

    // sp matrix of the rescaled adjoint action: X^k_c = 2 q_{kl} w^{lc}
    out.sp_matrix.assign(size_t(dim) * size_t(dim), GradedElement(v.frame(), 1, v.window()));
    for (int k = 0; k < dim; ++k)
        for (int c = 0; c < dim; ++c) {
            GradedElement acc(v.frame(), 1, v.window());
            for (int l = 0; l < dim; ++l) {
                const ChartFunction& w = fr.upper(l, c);
                if (w.is_zero()) continue;
                for (auto& [key, f] : q[size_t(k) * dim + size_t(l)].terms())
                    acc.add_term(key, (f * w).scaled(GaussianRational(Rational(2))));
            }
            out.sp_matrix[size_t(k) * dim + size_t(c)] = acc;
        }

    // sp invariant: w_km X^m_l symmetric in (k, l)
    for (int k = 0; k < dim; ++k)
        for (int l = 0; l < k; ++l) {
            GradedElement skl(v.frame(), 1, v.window()), slk(v.frame(), 1, v.window());
            for (int m = 0; m < dim; ++m) {
                for (auto& [key, f] : out.sp_matrix[size_t(m) * dim + size_t(l)].terms())
                    skl.add_term(key, f * fr.lower(k, m));
                for (auto& [key, f] : out.sp_matrix[size_t(m) * dim + size_t(k)].terms())
                    slk.add_term(key, f * fr.lower(l, m));
            }
            if (!equal_on_common_window(skl, slk))
                throw std::invalid_argument(
                    "decompose_curvature: sp part fails the symmetry invariant");
        }

    // central piece of the y-free part
    GradedElement tr = trace_of(out.gl_part).scaled(GaussianRational(Rational(1, N)));
    out.scalar_part = GradedElement(v.frame(), N, out.gl_part.window());
    for (auto& [k, f] : tr.terms())
        for (int r = 0; r < N; ++r) {
            TermKey nk = k;
            nk.row = nk.col = uint8_t(r);
            out.scalar_part.add_term(nk, f);
        }
    return out;
}

GradedElement q_n_eval(const InvariantFormQ& Q, int n, const std::vector<GradedElement>& args) {
    (void)Q;
    if (int(args.size()) != n) throw std::invalid_argument("q_n_eval: expected n arguments");
    if (n == 1) return trace_of(y_free_part(args[0])).hbar_shifted(-1);  // tr(X_2)/h
    if (n != 2) throw std::invalid_argument("q_n_eval: n must be 1 or 2");

    // Q2(h, h') = tr(h_gl h'_gl)/(2 h^2) - N tr(X1 X1')/(48 h^2)
    CurvatureData d1 = decompose_curvature(args[0]);
    CurvatureData d2 = decompose_curvature(args[1]);
    int N = args[0].matrix_size();
    int dim = args[0].dim();
    GradedElement t1 = trace_of(moyal(d1.gl_part, d2.gl_part));
    GradedElement t2(args[0].frame(), 1, Window::product(args[0].window(), args[1].window()));
    bool first = true;
    for (int k = 0; k < dim; ++k)
        for (int m = 0; m < dim; ++m) {
            GradedElement p = moyal(d1.sp_matrix[size_t(k) * dim + size_t(m)],
                                    d2.sp_matrix[size_t(m) * dim + size_t(k)]);
            t2 = first ? p : t2 + p;
            first = false;
        }
    return (t1.scaled(GaussianRational(Rational(1, 2))) -
            t2.scaled(GaussianRational(Rational(N, 48))))
        .hbar_shifted(-2);
}

GradedElement chi_Q(const InvariantFormQ& Q, int j, const std::vector<GradedElement>& args) {
    if (int(args.size()) != 2 * j) throw std::invalid_argument("chi_Q: expected 2j arguments");
    int k = 2 * j;
    const FramePtr& fr = args[0].frame();
    int msize = args[0].matrix_size();

    // split each argument by form component; the cochain antisymmetrization
    // acts on the fiber parts with the forms pulled out in slot order
    struct Piece {
        uint8_t form;
        GradedElement w;
    };
    std::vector<std::vector<Piece>> dec;
    for (auto& v : args) {
        std::map<uint8_t, GradedElement> by_form;
        for (auto& [key, f] : v.terms()) {
            auto [it, fresh] =
                by_form.try_emplace(key.form, GradedElement(v.frame(), msize, v.window()));
            TermKey nk = key;
            nk.form = 0;
            it->second.add_term(nk, f);
        }
        std::vector<Piece> ps;
        for (auto& [m, w] : by_form) ps.push_back({m, std::move(w)});
        dec.push_back(std::move(ps));
    }

    std::vector<std::vector<int>> perms;
    {
        std::vector<int> p(size_t(k), 0);
        for (int i = 0; i < k; ++i) p[size_t(i)] = i;
        do perms.push_back(p);
        while (std::next_permutation(p.begin(), p.end()));
    }
    auto psign = [](const std::vector<int>& p) {
        int inv = 0;
        for (size_t i = 0; i < p.size(); ++i)
            for (size_t jj = i + 1; jj < p.size(); ++jj)
                if (p[i] > p[jj]) ++inv;
        return (inv & 1) ? -1 : 1;
    };
    Rational inv_fact(1);
    for (int t = 2; t <= k; ++t) inv_fact = inv_fact / Rational(t);

    GradedElement out = GradedElement::zero(fr, 1);
    bool out_set = false;
    std::vector<const Piece*> chosen(size_t(k), nullptr);
    std::function<void(int, uint8_t, int)> rec = [&](int s, uint8_t mask, int sgn) {
        if (s == k) {
            for (auto& nu : perms) {
                std::vector<GradedElement> cs;
                for (int t = 0; t < j; ++t)
                    cs.push_back(curvature_C(chosen[size_t(nu[size_t(2 * t)])]->w,
                                             chosen[size_t(nu[size_t(2 * t + 1)])]->w));
                GradedElement qv = q_n_eval(Q, j, cs).scaled(
                    GaussianRational(Rational(sgn * psign(nu)) * inv_fact));
                GradedElement shifted(fr, 1, qv.window());
                for (auto& [key, f] : qv.terms()) {
                    if (key.form != 0) throw std::logic_error("chi_Q: Q produced form content");
                    TermKey nk = key;
                    nk.form = mask;
                    shifted.add_term(nk, f);
                }
                out = out_set ? out + shifted : shifted;
                out_set = true;
            }
            return;
        }
        for (auto& p : dec[size_t(s)]) {
            auto [s2, merged] = form_merge(mask, p.form);
            if (s2 == 0) continue;
            chosen[size_t(s)] = &p;
            rec(s + 1, merged, sgn * s2);
        }
    };
    rec(0, 0, 1);
    return out;
}

std::vector<GradedElement> base_curvature(const ChartGeometry& geom) {
    int dim = geom.dim();
    const FramePtr& fr = geom.frame();
    // Gamma^k_l = Gamma^k_{il} dx^i as scalar one-forms
    std::vector<GradedElement> gamma(size_t(dim) * size_t(dim), GradedElement::zero(fr, 1));
    for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) {
            GradedElement e = GradedElement::zero(fr, 1);
            for (int i = 0; i < dim; ++i) {
                const ChartFunction& g = geom.christoffel(k, i, l);
                if (g.is_zero()) continue;
                TermKey key;
                key.form = uint8_t(1u << i);
                e.add_term(key, g);
            }
            gamma[size_t(k) * dim + size_t(l)] = e;
        }
    std::vector<GradedElement> R(size_t(dim) * size_t(dim), GradedElement::zero(fr, 1));
    for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) {
            GradedElement e = de_rham(gamma[size_t(k) * dim + size_t(l)]);
            for (int m = 0; m < dim; ++m)
                e = e +
                    moyal(gamma[size_t(k) * dim + size_t(m)], gamma[size_t(m) * dim + size_t(l)]);
            R[size_t(k) * dim + size_t(l)] = e;
        }
    return R;
}

GradedElement ahat_series(const std::vector<GradedElement>& R, const InvariantFormQ& Q,
                          int order) {
    if (R.empty()) throw std::invalid_argument("ahat_series: empty curvature");
    if (order > Q.order())
        throw std::invalid_argument("ahat_series: order exceeds the precomputed series");
    int dim = 0;
    while (dim * dim < int(R.size())) ++dim;
    const FramePtr& fr = R[0].frame();

    std::vector<GradedElement> half(R.size(), GradedElement::zero(fr, 1));
    for (size_t i = 0; i < R.size(); ++i) half[i] = R[i].scaled(GaussianRational(Rational(1, 2)));

    // (1/2) tr L(R/2); L is even, and form degrees beyond dim vanish
    GradedElement exponent = GradedElement::zero(fr, 1);
    std::vector<GradedElement> pw = half;
    const RatSeries& L = Q.log_coeffs();
    for (int p = 2; p <= order && 2 * (p - 1) < dim; ++p) {
        std::vector<GradedElement> next(R.size(), GradedElement::zero(fr, 1));
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                GradedElement acc = GradedElement::zero(fr, 1);
                for (int m = 0; m < dim; ++m)
                    acc = acc +
                          moyal(pw[size_t(a) * dim + size_t(m)], half[size_t(m) * dim + size_t(b)]);
                next[size_t(a) * dim + size_t(b)] = acc;
            }
        pw = std::move(next);
        if (p % 2 == 0 && p < int(L.size()) && !L[size_t(p)].is_zero()) {
            GradedElement tr = GradedElement::zero(fr, 1);
            for (int a = 0; a < dim; ++a) tr = tr + pw[size_t(a) * dim + size_t(a)];
            exponent = exponent + tr.scaled(GaussianRational(L[size_t(p)] / Rational(2)));
        }
    }
    return exp_even_form(exponent);
}

GradedElement chern_character(const GradedElement& q, int order) {
    for (auto& [k, f] : q.terms())
        if (k.hbar != 0 || k.ydeg() != 0 || k.form != 0)
            throw std::invalid_argument("chern_character: q must be a matrix of chart functions");
    if (!equal_on_common_window(moyal(q, q), q))
        throw std::invalid_argument("chern_character: q is not idempotent");

    GradedElement dq = de_rham(q);
    GradedElement F = moyal(q, moyal(dq, dq));  // Grassmann curvature q(dq)(dq)
    GradedElement out = trace_of(q);
    GradedElement pw = F;
    for (int k = 1; 2 * k <= q.dim() && k <= order; ++k) {
        out = out + trace_of(pw).scaled(GaussianRational(Rational(1) / factorial(k)));
        pw = moyal(pw, F);
    }
    return out;
}

GradedElement rhs_index(const ChartGeometry& geom, const GradedElement& q, int order) {
    int dim = geom.dim();
    InvariantFormQ Q(std::max(order, dim + 2));
    GradedElement ahat = ahat_series(base_curvature(geom), Q, std::max(order, dim));

    // exp((omega - Omega_h)/h) as a scalar form series
    GradedElement arg = (geom.omega_form() - geom.omega_h()).hbar_shifted(-1);
    GradedElement arg1(geom.frame(), 1, arg.window());
    for (auto& [k, f] : arg.terms())
        if (k.row == 0 && k.col == 0) {
            TermKey nk = k;
            nk.row = nk.col = 0;
            arg1.add_term(nk, f);
        }
    GradedElement expo = exp_even_form(arg1);

    GradedElement ch = chern_character(q, dim / 2);
    return moyal(moyal(ahat, expo), ch).form_part(dim);
}

}  // namespace qindex
