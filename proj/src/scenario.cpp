#include "qindex/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qindex {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---- scenario JSON schema (version 1) ----
//
// {
//   "schema": 1, "name": "...", "n": 1,
//   "ring": {"variant": "fourier"|"poly", "bound": 16},
//   "omega": {"standard_scale": "1/2"}            // block frame w_{2a-1,2a} = s
//          | {"lower": [fn x dim^2], "upper": [fn x dim^2]},
//   "christoffel": {"kind": "zero"}
//               | {"kind": "generating", "phi": fn}
//               | {"kind": "explicit", "entries": [{"k":1,"i":1,"j":1,"f": fn}]},
//   "bundle": {"N": 1, "gamma_V": {"kind": "zero"|"from_q"}
//                               | {"kind": "explicit", "entries": [{"i":1,"r":1,"c":1,"f": fn}]}},
//   "omega_h": [{"k": 1, "i": 1, "j": 2, "f": fn}],
//   "q": {"kind": "identity"} | {"kind": "explicit", "entries": [fn x N^2]},
//   "truncation": {"k_min": -2, "k_max": 4, "D": 6},
//   "orders": [-1, 0, 1]
// }
//
// fn = {"terms": [ {"key": [..], "re": "p/q", "im": "p/q"}
//                | {"const": "p/q"}
//                | {"cos": [..], "amp": "p/q"} | {"sin": [..], "amp": "p/q"} ]}
// Rationals are "p/q" strings ("/q" omitted when 1); keys/frequencies are
// integer arrays of length dim.

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
    throw std::invalid_argument(origin + ": " + what);
}

Rational rat(const json& j, const std::string& origin) {
    if (j.is_number_integer()) return Rational(j.get<long>());
    if (j.is_string()) return Rational::parse(j.get<std::string>());
    fail(origin, "expected a rational as \"p/q\" string or integer, got " + j.dump());
}

ChartFunction::Key key_of(const json& j, int dim, const std::string& origin) {
    if (!j.is_array() || int(j.size()) != dim)
        fail(origin, "expected an integer array of length " + std::to_string(dim));
    ChartFunction::Key k{};
    for (int i = 0; i < dim; ++i) k[size_t(i)] = j[size_t(i)].get<int>();
    return k;
}

ChartFunction fn_of(const json& j, RingKind kind, int dim, int bound, const std::string& origin) {
    if (!j.is_object() || !j.contains("terms"))
        fail(origin, "expected a chart function object {\"terms\": [...]}");
    ChartFunction f = ChartFunction::zero(kind, dim, bound);
    for (auto& t : j.at("terms")) {
        if (t.contains("const")) {
            f = f + ChartFunction::constant(kind, dim, bound,
                                            GaussianRational(rat(t.at("const"), origin)));
        } else if (t.contains("cos")) {
            if (kind != RingKind::Fourier) fail(origin, "\"cos\" terms need the fourier ring");
            f = f + ChartFunction::cosine(dim, bound, key_of(t.at("cos"), dim, origin),
                                          rat(t.at("amp"), origin));
        } else if (t.contains("sin")) {
            if (kind != RingKind::Fourier) fail(origin, "\"sin\" terms need the fourier ring");
            f = f + ChartFunction::sine(dim, bound, key_of(t.at("sin"), dim, origin),
                                        rat(t.at("amp"), origin));
        } else if (t.contains("key")) {
            GaussianRational c(t.contains("re") ? rat(t.at("re"), origin) : Rational(0),
                               t.contains("im") ? rat(t.at("im"), origin) : Rational(0));
            ChartFunction::Key k = key_of(t.at("key"), dim, origin);
            f = f + (kind == RingKind::Poly ? ChartFunction::monomial(dim, bound, k, c)
                                            : ChartFunction::mode(dim, bound, k, c));
        } else {
            fail(origin, "unknown chart function term " + t.dump());
        }
    }
    return f;
}

GradedElement q_of(const json& j, const FramePtr& frame, int msize, const std::string& origin) {
    std::string kind = j.value("kind", "identity");
    if (kind == "identity") return GradedElement::identity(frame, msize);
    if (kind != "explicit") fail(origin, "q kind must be \"identity\" or \"explicit\"");
    const json& entries = j.at("entries");
    if (int(entries.size()) != msize * msize)
        fail(origin, "q needs N^2 entries, row-major");
    std::vector<ChartFunction> m;
    for (auto& e : entries)
        m.push_back(fn_of(e, frame->ring_kind(), frame->dim(), frame->chart_bound(), origin));
    return GradedElement::from_matrix(frame, msize, m);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(origin, std::string("JSON parse error: ") + e.what());
    }
    if (j.value("schema", 0) != 1) fail(origin, "unsupported or missing \"schema\" (need 1)");

    Scenario sc;
    sc.name = j.value("name", origin);
    sc.n = j.at("n").get<int>();
    if (sc.n != 1 && sc.n != 2) fail(origin, "n must be 1 or 2");
    int dim = 2 * sc.n;

    const json& ring = j.at("ring");
    std::string variant = ring.at("variant").get<std::string>();
    RingKind kind;
    if (variant == "poly")
        kind = RingKind::Poly;
    else if (variant == "fourier")
        kind = RingKind::Fourier;
    else
        fail(origin, "ring variant must be \"poly\" or \"fourier\"");
    int bound = ring.at("bound").get<int>();

    const json& om = j.at("omega");
    if (om.contains("standard_scale")) {
        sc.frame = SymplecticFrame::standard(sc.n, kind, bound, rat(om.at("standard_scale"), origin));
    } else {
        auto mat = [&](const json& arr) {
            if (int(arr.size()) != dim * dim) fail(origin, "omega matrices need dim^2 entries");
            std::vector<ChartFunction> m;
            for (auto& e : arr) m.push_back(fn_of(e, kind, dim, bound, origin));
            return m;
        };
        sc.frame = std::make_shared<SymplecticFrame>(dim, mat(om.at("lower")), mat(om.at("upper")));
    }

    const json& bundle = j.at("bundle");
    int msize = bundle.at("N").get<int>();
    if (msize < 1 || msize > 4) fail(origin, "bundle N must be in 1..4");

    sc.q = q_of(j.at("q"), sc.frame, msize, origin);

    // christoffel symbols
    std::vector<ChartFunction> gamma(size_t(dim * dim * dim),
                                     ChartFunction::zero(kind, dim, bound));
    const json& chr = j.at("christoffel");
    std::string ck = chr.at("kind").get<std::string>();
    if (ck == "zero") {
    } else if (ck == "generating") {
        gamma = christoffel_from_generating(*sc.frame,
                                            fn_of(chr.at("phi"), kind, dim, bound, origin));
    } else if (ck == "explicit") {
        for (auto& e : chr.at("entries")) {
            int k = e.at("k").get<int>(), i = e.at("i").get<int>(), jj = e.at("j").get<int>();
            if (k < 1 || k > dim || i < 1 || i > dim || jj < 1 || jj > dim)
                fail(origin, "christoffel index out of range");
            ChartFunction f = fn_of(e.at("f"), kind, dim, bound, origin);
            gamma[size_t(((k - 1) * dim + (i - 1)) * dim + (jj - 1))] = f;
            gamma[size_t(((k - 1) * dim + (jj - 1)) * dim + (i - 1))] = f;
        }
    } else {
        fail(origin, "christoffel kind must be zero|generating|explicit");
    }

    // bundle connection
    GradedElement gv = GradedElement::zero(sc.frame, msize);
    const json& gvj = bundle.at("gamma_V");
    std::string gk = gvj.at("kind").get<std::string>();
    if (gk == "zero") {
    } else if (gk == "from_q") {
        gv = gamma_V_from_q(sc.q);
        sc.gamma_v_from_q = true;
    } else if (gk == "explicit") {
        for (auto& e : gvj.at("entries")) {
            int i = e.at("i").get<int>(), r = e.at("r").get<int>(), c = e.at("c").get<int>();
            if (i < 1 || i > dim || r < 1 || r > msize || c < 1 || c > msize)
                fail(origin, "gamma_V index out of range");
            TermKey k;
            k.form = uint8_t(1u << (i - 1));
            k.row = uint8_t(r - 1);
            k.col = uint8_t(c - 1);
            gv.add_term(k, fn_of(e.at("f"), kind, dim, bound, origin));
        }
    } else {
        fail(origin, "gamma_V kind must be zero|from_q|explicit");
    }

    // Omega_h
    GradedElement oh = GradedElement::zero(sc.frame, msize);
    if (j.contains("omega_h")) {
        for (auto& e : j.at("omega_h")) {
            int k = e.at("k").get<int>(), i = e.at("i").get<int>(), jj = e.at("j").get<int>();
            if (i < 1 || i > dim || jj < 1 || jj > dim || i == jj)
                fail(origin, "omega_h needs distinct one-based form indices");
            ChartFunction f = fn_of(e.at("f"), kind, dim, bound, origin);
            auto [sgn, mask] = form_merge(uint8_t(1u << (i - 1)), uint8_t(1u << (jj - 1)));
            for (int r = 0; r < msize; ++r) {
                TermKey tk;
                tk.hbar = int16_t(k);
                tk.form = mask;
                tk.row = tk.col = uint8_t(r);
                oh.add_term(tk, sgn < 0 ? -f : f);
            }
        }
    }

    try {
        sc.geometry = std::make_shared<ChartGeometry>(sc.frame, msize, std::move(gamma), gv, oh);
    } catch (const std::invalid_argument& e) {
        fail(origin, std::string("geometry rejected: ") + e.what());
    }

    // q q = q at load
    if (!equal_on_common_window(moyal(sc.q, sc.q), sc.q))
        fail(origin, "declared q is not idempotent in the function ring");

    const json& tr = j.at("truncation");
    sc.policy = TruncationPolicy{tr.at("k_min").get<int>(), tr.at("k_max").get<int>(),
                                 tr.at("D").get<int>(), bound};
    try {
        sc.policy.validate();
    } catch (const std::invalid_argument& e) {
        fail(origin, e.what());
    }

    if (j.contains("orders"))
        for (auto& o : j.at("orders")) sc.orders.push_back(o.get<int>());
    for (int o : sc.orders)
        if (o < sc.policy.hbar_min || o > sc.policy.hbar_max)
            fail(origin, "requested order outside the declared hbar window");
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

GradedElement parse_endomorphism(const Scenario& sc, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("element parse error: ") + e.what());
    }
    int msize = sc.geometry->msize();
    if (j.is_array()) {
        json wrap;
        wrap["kind"] = "explicit";
        wrap["entries"] = j;
        return q_of(wrap, sc.frame, msize, "element");
    }
    return q_of(j, sc.frame, msize, "element");
}

std::string hlaurent_json(const HLaurent& h) {
    ordered_json out;
    out["k_max"] = h.k_max() >= kWinInf ? json("inf") : json(h.k_max());
    ordered_json terms = ordered_json::array();
    for (auto& [k, c] : h.coeffs())
        terms.push_back(ordered_json::array({k, c.re.str(), c.im.str()}));
    out["terms"] = std::move(terms);
    return out.dump();
}

std::string graded_json(const GradedElement& e) {
    ordered_json out;
    out["k_max"] = e.window().k_max >= kWinInf ? json("inf") : json(e.window().k_max);
    out["f_max"] = e.window().f_max >= kWinInf ? json("inf") : json(e.window().f_max);
    ordered_json terms = ordered_json::array();
    for (auto& [k, f] : e.terms()) {
        ordered_json t;
        t["h"] = k.hbar;
        ordered_json y = ordered_json::array();
        for (int i = 0; i < e.dim(); ++i) y.push_back(int(k.y[size_t(i)]));
        t["y"] = std::move(y);
        ordered_json dx = ordered_json::array();
        for (int i = 0; i < e.dim(); ++i)
            if (k.form & (1u << i)) dx.push_back(i + 1);
        t["dx"] = std::move(dx);
        t["E"] = ordered_json::array({int(k.row) + 1, int(k.col) + 1});
        ordered_json fns = ordered_json::array();
        for (auto& [key, c] : f.terms()) {
            ordered_json kk = ordered_json::array();
            for (int i = 0; i < e.dim(); ++i) kk.push_back(key[size_t(i)]);
            fns.push_back(ordered_json::array({std::move(kk), c.re.str(), c.im.str()}));
        }
        t["f"] = std::move(fns);
        terms.push_back(std::move(t));
    }
    out["terms"] = std::move(terms);
    return out.dump();
}

}  // namespace qindex
