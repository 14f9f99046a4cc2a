// Scenario-driven front end: star products, Fedosov connections, trace
// densities, and index checks over exact-arithmetic scenario files.

#include <chrono>
#include <fstream>
#include <random>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qindex/index.hpp"

using namespace qindex;
using nlohmann::ordered_json;

namespace {

constexpr const char* kEngine = "qindex 0.1.0";

struct Opts {
    std::string scenario;
    std::string output;
    std::string a_text, b_text;
    std::string fixtures = "fixtures";
    int hbar_order = kWinInf;
    int filtration = -1;
    bool slow = false;
    bool corrupt_epsilon = false;
};

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void emit(const ordered_json& report, const Opts& o) {
    if (!o.output.empty()) {
        std::ofstream out(o.output);
        if (!out) throw std::invalid_argument("cannot write output file: " + o.output);
        out << report.dump(2) << "\n";
    }
}

Scenario load(const Opts& o) {
    if (o.scenario.empty()) throw std::invalid_argument("--scenario is required");
    Scenario sc = load_scenario(o.scenario);
    if (o.filtration >= 0) sc.policy.max_filtration = o.filtration;
    if (o.hbar_order < kWinInf) {
        sc.orders.clear();
        for (int k = sc.policy.hbar_min; k <= o.hbar_order; ++k) sc.orders.push_back(k);
        if (sc.policy.hbar_max < o.hbar_order + 3) sc.policy.hbar_max = o.hbar_order + 3;
    }
    sc.policy.validate();
    return sc;
}

ordered_json hl_json(const HLaurent& h) { return ordered_json::parse(hlaurent_json(h)); }
ordered_json ge_json(const GradedElement& e) { return ordered_json::parse(graded_json(e)); }

int cmd_star(const Opts& o) {
    Timer t;
    Scenario sc = load(o);
    if (o.a_text.empty() || o.b_text.empty())
        throw std::invalid_argument("star needs --a and --b element documents");
    GradedElement a = parse_endomorphism(sc, o.a_text);
    GradedElement b = parse_endomorphism(sc, o.b_text);
    FedosovConnection conn = build_connection(sc.geometry, sc.policy);
    GradedElement ab = star(conn, a, b);
    GradedElement comm = ab - star(conn, b, a);

    bool shortfall = false;
    for (int k : sc.orders)
        shortfall = shortfall || !(k <= ab.window().k_max);

    ordered_json rep;
    rep["schema"] = 1;
    rep["engine"] = kEngine;
    rep["command"] = "star";
    rep["scenario"] = sc.name;
    rep["pass"] = !shortfall;
    rep["results"]["a"] = ge_json(a);
    rep["results"]["b"] = ge_json(b);
    rep["results"]["a_star_b"] = ge_json(ab);
    rep["results"]["commutator"] = ge_json(comm);
    rep["results"]["determined_through"] =
        ab.window().k_max >= kWinInf ? ordered_json("inf") : ordered_json(ab.window().k_max);
    emit(rep, o);

    std::cout << "a * b = " << ab.str() << "\n";
    std::cout << "[a, b]_* = " << comm.str() << "\n";
    if (shortfall)
        std::cout << "truncation shortfall: requested orders exceed the determined window\n";
    std::cerr << "elapsed " << t.ms() << " ms\n";
    return shortfall ? 1 : 0;
}

int cmd_connection(const Opts& o) {
    Timer t;
    Scenario sc = load(o);
    ordered_json rep;
    rep["schema"] = 1;
    rep["engine"] = kEngine;
    rep["command"] = "connection";
    rep["scenario"] = sc.name;

    FedosovConnection conn = build_connection(sc.geometry, sc.policy);
    GradedElement target = -sc.geometry->omega_form() + sc.geometry->omega_h();
    bool curv_ok = equal_on_common_window(conn.curvature_cache(), target);
    bool norm_ok = koszul_delta_inv(conn.r()).is_zero_on_window();
    bool filt_ok = conn.r().is_zero_on_window() || filtration_degree(conn.r()) >= 2;

    rep["results"]["r_terms"] = conn.r().terms().size();
    rep["results"]["r"] = ge_json(conn.r());
    rep["results"]["curvature"] = ge_json(conn.curvature_cache());
    rep["results"]["checks"]["weyl_curvature_equals_minus_omega_plus_Omega_h"] = curv_ok;
    rep["results"]["checks"]["normalization_delta_inv_r_zero"] = norm_ok;
    rep["results"]["checks"]["r_filtration_at_least_2"] = filt_ok;
    bool pass = curv_ok && norm_ok && filt_ok;
    rep["pass"] = pass;
    emit(rep, o);

    std::cout << "r: " << conn.r().terms().size() << " terms, "
              << (conn.r().is_zero_on_window() ? "zero" : "nonzero") << "\n";
    std::cout << "C^W = -omega + Omega_h: " << (curv_ok ? "pass" : "FAIL") << "\n";
    std::cout << "delta^{-1} r = 0: " << (norm_ok ? "pass" : "FAIL") << "\n";
    std::cerr << "elapsed " << t.ms() << " ms\n";
    return pass ? 0 : 1;
}

int cmd_trace_density(const Opts& o) {
    Timer t;
    Scenario sc = load(o);
    if (o.a_text.empty()) throw std::invalid_argument("trace-density needs --a");
    GradedElement a = parse_endomorphism(sc, o.a_text);
    FedosovConnection conn = build_connection(sc.geometry, sc.policy);
    TauEngine engine(sc.frame);
    GradedElement tr = psi(conn, engine, a);

    ordered_json rep;
    rep["schema"] = 1;
    rep["engine"] = kEngine;
    rep["command"] = "trace-density";
    rep["scenario"] = sc.name;
    rep["results"]["psi"] = ge_json(tr);

    bool ok = true;
    ordered_json notes = ordered_json::array();
    for (int k : sc.orders)
        if (k > tr.window().k_max) {
            ok = false;
            notes.push_back("undetermined at order " + std::to_string(k));
        }
    if (sc.frame->ring_kind() == RingKind::Fourier) {
        HLaurent avg = top_form_average(tr);
        rep["results"]["average"] = hl_json(avg);
        std::cout << "average(psi(a)) = " << avg.str() << "\n";
    }
    rep["results"]["notes"] = notes;
    rep["pass"] = ok;
    emit(rep, o);

    std::cout << "psi(a) = " << tr.str() << "\n";
    for (auto& njson : notes) std::cout << njson.get<std::string>() << "\n";
    std::cerr << "elapsed " << t.ms() << " ms\n";
    return ok ? 0 : 1;
}

ordered_json index_report_json(const IndexReport& r) {
    ordered_json out;
    out["scenario"] = r.scenario;
    out["lhs_average"] = hl_json(r.lhs);
    out["rhs_average"] = hl_json(r.rhs);
    out["difference"] = hl_json(r.difference);
    out["idempotent_order"] = r.idempotent_order;
    ordered_json table = ordered_json::array();
    for (size_t i = 0; i < r.orders.size(); ++i) {
        ordered_json row;
        row["order"] = r.orders[i];
        row["pass"] = bool(r.pass[i]);
        row["note"] = r.notes[i];
        table.push_back(std::move(row));
    }
    out["orders"] = std::move(table);
    out["pass"] = r.all_pass();
    return out;
}

void print_index_report(const IndexReport& r) {
    std::cout << "scenario " << r.scenario << "\n";
    std::cout << "  lhs = " << r.lhs.str() << "\n";
    std::cout << "  rhs = " << r.rhs.str() << "\n";
    for (size_t i = 0; i < r.orders.size(); ++i)
        std::cout << "  order h^" << r.orders[i] << ": " << (r.pass[i] ? "pass" : "FAIL")
                  << (r.notes[i].empty() ? "" : " (" + r.notes[i] + ")") << "\n";
}

int cmd_index_check(const Opts& o) {
    Timer t;
    Scenario sc = load(o);
    // the trace density window loses n orders against the idempotent's
    int K = 1;
    for (int k : sc.orders) K = std::max(K, k + sc.n);
    IndexReport r = verify_index(sc, K);

    ordered_json rep;
    rep["schema"] = 1;
    rep["engine"] = kEngine;
    rep["command"] = "index-check";
    rep["scenario"] = sc.name;
    rep["results"] = index_report_json(r);
    rep["pass"] = r.all_pass();
    emit(rep, o);

    print_index_report(r);
    std::cerr << "elapsed " << t.ms() << " ms\n";
    return r.all_pass() ? 0 : 1;
}

int cmd_selftest(const Opts& o) {
    Timer timer;
    int failures = 0;
    ordered_json checks = ordered_json::array();
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "pass  " : "FAIL  ") << name << "\n";
        ordered_json c;
        c["name"] = name;
        c["pass"] = ok;
        checks.push_back(std::move(c));
        if (!ok) ++failures;
    };

    // --- algebra property catalog ---
    FramePtr fr = SymplecticFrame::standard(1, RingKind::Poly, 12, Rational(-1));
    std::mt19937 rng(17);
    auto rand_elem = [&](FramePtr f) {
        GradedElement e = GradedElement::zero(f, 1);
        std::uniform_int_distribution<int> hb(0, 1), yd(0, 2), fm(0, 3), cf(-3, 3);
        for (int t = 0; t < 3; ++t) {
            TermKey k;
            k.hbar = int16_t(hb(rng));
            k.y[0] = uint8_t(yd(rng));
            k.y[1] = uint8_t(yd(rng));
            k.form = uint8_t(fm(rng));
            e.add_term(k, ChartFunction::constant(f->ring_kind(), 2, f->chart_bound(),
                                                  GaussianRational(Rational(cf(rng)))));
        }
        return e;
    };
    {
        bool ok = true;
        for (int t = 0; t < 25 && ok; ++t) {
            GradedElement a = rand_elem(fr), b = rand_elem(fr), c = rand_elem(fr);
            ok = moyal(moyal(a, b), c).terms() == moyal(a, moyal(b, c)).terms();
        }
        check("moyal associativity", ok);
    }
    {
        bool ok = true;
        for (int t = 0; t < 25 && ok; ++t) {
            GradedElement a = rand_elem(fr);
            GradedElement h = sigma(a) + koszul_delta(koszul_delta_inv(a)) +
                              koszul_delta_inv(koszul_delta(a));
            ok = h.terms() == a.terms();
        }
        check("hodge identity", ok);
    }
    {
        // b(tau_2) = 0 on a monomial family (the epsilon mutation hook lives here)
        TauEngine eng(1, {{Rational(0), Rational(1)}, {Rational(-1), Rational(0)}});
        if (o.corrupt_epsilon) eng.corrupt_epsilon_sign();
        Cochain tau2 = [&](const std::vector<GradedElement>& args, const GradedElement& a0) {
            return eng.tau(args, a0);
        };
        auto mono = [&](int d1, int d2) {
            TermKey k;
            k.y[0] = uint8_t(d1);
            k.y[1] = uint8_t(d2);
            return GradedElement::single(fr, 1, k,
                                         ChartFunction::constant(RingKind::Poly, 2, 12,
                                                                 GaussianRational(1)));
        };
        bool ok = true;
        // the mutation flips eps, so tau itself changes sign; b(tau) stays a
        // telltale because the dual-module convention mixes orders
        std::vector<GradedElement> ms{mono(0, 0), mono(1, 0), mono(0, 1), mono(1, 1), mono(2, 0)};
        for (auto& a1 : ms)
            for (auto& a2 : ms)
                for (auto& a3 : ms) {
                    HLaurent b = hochschild_b(tau2, 2, {a1, a2, a3}, mono(1, 0));
                    for (auto& [k, c] : b.coeffs()) ok = ok && c.is_zero();
                }
        // a corrupted epsilon must not slip through: also pin the frozen value
        HLaurent v = eng.tau({mono(1, 0), mono(0, 1)}, GradedElement::identity(fr, 1));
        ok = ok && v.coeff(0) == GaussianRational(Rational(-1));
        check("b(tau_2) = 0 and tau_2(y1,y2)(1) = -1", ok);
    }
    {
        InvariantFormQ Q(8);
        RatSeries oracle = series_sqrt_newton(x_over_sinh(8), 8);
        bool ok = true;
        for (int m = 0; m <= 6; ++m) ok = ok && Q.sqrt_coeffs()[size_t(m)] == oracle[size_t(m)];
        ok = ok && Q.sqrt_coeffs()[2] == Rational(-1, 12);
        check("ahat scalar series oracle", ok);
    }

    // --- fixture scenarios ---
    auto fixture_path = [&](const std::string& name) { return o.fixtures + "/" + name + ".json"; };
    auto run_fixture = [&](const std::string& name) {
        Scenario sc = load_scenario(fixture_path(name));
        int K = 1;
        for (int k : sc.orders) K = std::max(K, k + sc.n);
        IndexReport r = verify_index(sc, K);
        check("index check: " + name, r.all_pass());
    };
    run_fixture("flat-r2");
    run_fixture("torus-constant");
    run_fixture("torus-trig-gamma");
    run_fixture("torus-gauge-bundle");
    if (o.slow) run_fixture("flat-r4");
    {
        Scenario sc = load_scenario(fixture_path("poly-gauge"));
        FedosovConnection conn = build_connection(sc.geometry, sc.policy);
        QuantumIdempotent P = lift_idempotent(conn, sc.q, 2);
        GradedElement defect = star(conn, P.P, P.P) - P.P;
        bool ok = defect.window().k_max >= 2;
        for (auto& [k, f] : defect.terms()) ok = ok && k.hbar > 2;
        check("idempotent lift pipeline: poly-gauge", ok);
    }
    {
        Scenario sc = load_scenario(fixture_path("torus-trig-gamma"));
        FedosovConnection conn = build_connection(sc.geometry, sc.policy);
        bool ok = true;
        for (int t = 0; t < 3 && ok; ++t) {
            GradedElement a = rand_elem(sc.frame);
            ok = conn.D(conn.D(a)).is_zero_on_window();
        }
        check("D o D = 0 on random elements (torus-trig)", ok);
    }

    ordered_json rep;
    rep["schema"] = 1;
    rep["engine"] = kEngine;
    rep["command"] = "selftest";
    rep["results"]["checks"] = checks;
    rep["pass"] = failures == 0;
    emit(rep, o);
    std::cout << (failures == 0 ? "selftest: all checks passed\n"
                                : "selftest: " + std::to_string(failures) + " check(s) failed\n");
    std::cerr << "elapsed " << timer.ms() << " ms\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact Fedosov star products, FFS trace densities, and local index checks"};
    app.require_subcommand(1);
    Opts o;

    auto add_common = [&](CLI::App* sub, bool needs_scenario) {
        if (needs_scenario) sub->add_option("--scenario", o.scenario, "scenario JSON path");
        sub->add_option("--hbar-order", o.hbar_order, "report through this hbar order");
        sub->add_option("--filtration", o.filtration, "override the filtration bound D");
        sub->add_option("--output", o.output, "write the machine-readable report here");
        sub->add_flag("--slow", o.slow, "enable the n=2 fixtures");
    };

    CLI::App* s_star = app.add_subcommand("star", "star-multiply two endomorphisms");
    add_common(s_star, true);
    s_star->add_option("--a", o.a_text, "left element (JSON)");
    s_star->add_option("--b", o.b_text, "right element (JSON)");

    CLI::App* s_conn = app.add_subcommand("connection", "build and verify the Fedosov connection");
    add_common(s_conn, true);

    CLI::App* s_tr = app.add_subcommand("trace-density", "evaluate the trace density of an element");
    add_common(s_tr, true);
    s_tr->add_option("--a", o.a_text, "element (JSON)");

    CLI::App* s_idx = app.add_subcommand("index-check", "verify the index identity for a scenario");
    add_common(s_idx, true);

    CLI::App* s_self = app.add_subcommand("selftest", "run the property catalog and fixtures");
    add_common(s_self, false);
    s_self->add_option("--fixtures", o.fixtures, "fixture directory");
    s_self->add_flag("--corrupt-epsilon", o.corrupt_epsilon)->group("");  // debug hook

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (s_star->parsed()) return cmd_star(o);
        if (s_conn->parsed()) return cmd_connection(o);
        if (s_tr->parsed()) return cmd_trace_density(o);
        if (s_idx->parsed()) return cmd_index_check(o);
        if (s_self->parsed()) return cmd_selftest(o);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "check failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
