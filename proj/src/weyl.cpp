#include "qindex/weyl.hpp"

#include <bit>
#include <sstream>

namespace qindex {

void TruncationPolicy::validate() const {
    if (max_filtration < 0) throw std::invalid_argument("TruncationPolicy: D must be >= 0");
    if (hbar_min > hbar_max) throw std::invalid_argument("TruncationPolicy: empty hbar window");
    if (chart_bound < 0) throw std::invalid_argument("TruncationPolicy: negative chart bound");
}

int TermKey::form_deg() const { return std::popcount(form); }

std::pair<int, uint8_t> form_merge(uint8_t a, uint8_t b) {
    if (a & b) return {0, 0};
    // Inversions between the sorted sequences: pairs (i in a, j in b) with i > j.
    int inv = 0;
    for (int i = 0; i < 8; ++i)
        if (a & (1u << i)) inv += std::popcount(uint8_t(b & ((1u << i) - 1u)));
    return {(inv & 1) ? -1 : 1, uint8_t(a | b)};
}

SymplecticFrame::SymplecticFrame(int dim, std::vector<ChartFunction> lower,
                                 std::vector<ChartFunction> upper)
    : dim_(dim), lower_(std::move(lower)), upper_(std::move(upper)) {
    if (dim != 2 && dim != 4)
        throw std::invalid_argument("SymplecticFrame: dim must be 2 or 4 (n in {1,2})");
    if (lower_.size() != size_t(dim * dim) || upper_.size() != size_t(dim * dim))
        throw std::invalid_argument("SymplecticFrame: matrices must be dim x dim");
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            if (lower_[i * dim + j] != -lower_[j * dim + i] ||
                upper_[i * dim + j] != -upper_[j * dim + i])
                throw std::invalid_argument("SymplecticFrame: omega matrices must be antisymmetric");
        }
    // w_ik w^kj = delta_i^j within the declared truncation
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            ChartFunction s = ChartFunction::zero(ring_kind(), dim, chart_bound());
            for (int k = 0; k < dim; ++k) s = s + lower_[i * dim + k] * upper_[k * dim + j];
            ChartFunction expect = ChartFunction::constant(ring_kind(), dim, chart_bound(),
                                                           GaussianRational(i == j ? 1 : 0));
            if (s != expect)
                throw std::invalid_argument("SymplecticFrame: omega_lower * omega_upper != id");
        }
}

std::shared_ptr<const SymplecticFrame> SymplecticFrame::standard(int n, RingKind kind, int bound,
                                                                 const Rational& s) {
    if (s.is_zero()) throw std::invalid_argument("SymplecticFrame::standard: s must be nonzero");
    int dim = 2 * n;
    std::vector<ChartFunction> lo(dim * dim, ChartFunction::zero(kind, dim, bound));
    std::vector<ChartFunction> up = lo;
    Rational inv = Rational(1) / s;
    for (int a = 0; a < n; ++a) {
        int i = 2 * a, j = 2 * a + 1;
        lo[i * dim + j] = ChartFunction::constant(kind, dim, bound, GaussianRational(s));
        lo[j * dim + i] = ChartFunction::constant(kind, dim, bound, GaussianRational(-s));
        up[i * dim + j] = ChartFunction::constant(kind, dim, bound, GaussianRational(-inv));
        up[j * dim + i] = ChartFunction::constant(kind, dim, bound, GaussianRational(inv));
    }
    return std::make_shared<SymplecticFrame>(dim, std::move(lo), std::move(up));
}

bool SymplecticFrame::constant() const {
    for (auto& f : lower_)
        if (!f.is_constant()) return false;
    for (auto& f : upper_)
        if (!f.is_constant()) return false;
    return true;
}

GradedElement::GradedElement(FramePtr frame, int msize, Window win)
    : frame_(std::move(frame)), msize_(msize), win_(win) {
    if (!frame_) throw std::invalid_argument("GradedElement: null frame");
    if (msize_ < 1 || msize_ > 4)
        throw std::invalid_argument("GradedElement: matrix size must be in 1..4");
}

GradedElement GradedElement::scalar(FramePtr frame, int msize, GaussianRational c, int hbar) {
    GradedElement e(std::move(frame), msize);
    for (int r = 0; r < msize; ++r) {
        TermKey k;
        k.hbar = int16_t(hbar);
        k.row = k.col = uint8_t(r);
        e.add_term(k, ChartFunction::constant(e.frame_->ring_kind(), e.dim(),
                                              e.frame_->chart_bound(), c));
    }
    return e;
}

GradedElement GradedElement::from_chart(FramePtr frame, int msize, const ChartFunction& f) {
    GradedElement e(std::move(frame), msize);
    for (int r = 0; r < msize; ++r) {
        TermKey k;
        k.row = k.col = uint8_t(r);
        e.add_term(k, f);
    }
    return e;
}

GradedElement GradedElement::y(FramePtr frame, int msize, int i) {
    GradedElement e(std::move(frame), msize);
    if (i < 1 || i > e.dim()) throw std::invalid_argument("GradedElement::y: index out of range");
    for (int r = 0; r < msize; ++r) {
        TermKey k;
        k.y[i - 1] = 1;
        k.row = k.col = uint8_t(r);
        e.add_term(k, ChartFunction::constant(e.frame_->ring_kind(), e.dim(),
                                              e.frame_->chart_bound(), GaussianRational(1)));
    }
    return e;
}

GradedElement GradedElement::dx(FramePtr frame, int msize, int i) {
    GradedElement e(std::move(frame), msize);
    if (i < 1 || i > e.dim()) throw std::invalid_argument("GradedElement::dx: index out of range");
    for (int r = 0; r < msize; ++r) {
        TermKey k;
        k.form = uint8_t(1u << (i - 1));
        k.row = k.col = uint8_t(r);
        e.add_term(k, ChartFunction::constant(e.frame_->ring_kind(), e.dim(),
                                              e.frame_->chart_bound(), GaussianRational(1)));
    }
    return e;
}

GradedElement GradedElement::single(FramePtr frame, int msize, const TermKey& key,
                                    const ChartFunction& f) {
    GradedElement e(std::move(frame), msize);
    e.add_term(key, f);
    return e;
}

GradedElement GradedElement::from_matrix(FramePtr frame, int msize,
                                         const std::vector<ChartFunction>& entries) {
    if (entries.size() != size_t(msize * msize))
        throw std::invalid_argument("GradedElement::from_matrix: need msize^2 entries");
    GradedElement e(std::move(frame), msize);
    for (int r = 0; r < msize; ++r)
        for (int c = 0; c < msize; ++c) {
            TermKey k;
            k.row = uint8_t(r);
            k.col = uint8_t(c);
            e.add_term(k, entries[r * msize + c]);
        }
    return e;
}

void GradedElement::add_term(const TermKey& key, const ChartFunction& f) {
    chart_truncated_ = chart_truncated_ || f.truncated();
    if (f.is_zero()) return;
    if (key.hbar > win_.k_max || key.filtration() > win_.f_max) return;
    if (key.row >= msize_ || key.col >= msize_)
        throw std::invalid_argument("GradedElement: matrix position out of range");
    // Stored content can only lower the valuation floors.
    win_.k_min = win_min(win_.k_min, key.hbar);
    win_.f_min = win_min(win_.f_min, key.filtration());
    auto [it, fresh] = t_.try_emplace(key, f);
    if (!fresh) {
        ChartFunction s = it->second + f;
        chart_truncated_ = chart_truncated_ || s.truncated();
        if (s.is_zero())
            t_.erase(it);
        else
            it->second = s;
    }
}

void check_compat(const GradedElement& a, const GradedElement& b, const char* op) {
    if (!a.frame_ || !b.frame_)
        throw std::invalid_argument(std::string("GradedElement: uninitialized operand in ") + op);
    if (a.frame_ != b.frame_ && !(*a.frame_ == *b.frame_))
        throw std::invalid_argument(std::string("GradedElement: incompatible frames in ") + op);
    if (a.msize_ != b.msize_)
        throw std::invalid_argument(std::string("GradedElement: matrix size mismatch in ") + op);
}

GradedElement GradedElement::operator+(const GradedElement& o) const {
    check_compat(*this, o, "+");
    GradedElement r(frame_, msize_, Window::sum(win_, o.win_));
    r.chart_truncated_ = chart_truncated_ || o.chart_truncated_;
    for (auto& [k, f] : t_) r.add_term(k, f);
    for (auto& [k, f] : o.t_) r.add_term(k, f);
    return r;
}

GradedElement GradedElement::operator-() const {
    GradedElement r = *this;
    for (auto& [k, f] : r.t_) f = -f;
    return r;
}

GradedElement GradedElement::operator-(const GradedElement& o) const { return *this + (-o); }

GradedElement GradedElement::scaled(const GaussianRational& c) const {
    GradedElement r(frame_, msize_, win_);
    r.chart_truncated_ = chart_truncated_;
    if (c.is_zero()) return r;
    for (auto& [k, f] : t_) r.t_[k] = f.scaled(c);
    return r;
}

GradedElement GradedElement::hbar_shifted(int dk) const {
    GradedElement r(frame_, msize_, win_.hbar_shifted(dk));
    r.chart_truncated_ = chart_truncated_;
    for (auto& [k, f] : t_) {
        TermKey nk = k;
        nk.hbar = int16_t(k.hbar + dk);
        r.t_[nk] = f;
    }
    return r;
}

GradedElement GradedElement::truncated(int k_max, int f_max) const {
    Window w = win_;
    w.k_max = win_min(w.k_max, k_max);
    w.f_max = win_min(w.f_max, f_max);
    // Valuation claims never extend past the determined region.
    w.k_min = win_min(w.k_min, win_add(w.k_max, 1));
    w.f_min = win_min(w.f_min, win_add(w.f_max, 1));
    GradedElement r(frame_, msize_, w);
    r.chart_truncated_ = chart_truncated_;
    for (auto& [k, f] : t_) r.add_term(k, f);
    return r;
}

GradedElement GradedElement::with_floors(int k_min, int f_min) const {
    for (auto& [k, f] : t_)
        if (k.hbar < k_min || k.filtration() < f_min)
            throw std::logic_error(
                "GradedElement::with_floors: stored term violates the declared valuation; "
                "recursion produced out-of-space content (sign error)");
    GradedElement r = *this;
    r.win_.k_min = k_min;
    r.win_.f_min = f_min;
    return r;
}

GradedElement GradedElement::with_window(const Window& w) const {
    GradedElement r = *this;
    r.win_ = w;
    return r;
}

GradedElement GradedElement::form_part(int q) const {
    GradedElement r(frame_, msize_, win_);
    r.chart_truncated_ = chart_truncated_;
    for (auto& [k, f] : t_)
        if (k.form_deg() == q) r.t_[k] = f;
    return r;
}

bool GradedElement::is_endomorphism() const {
    for (auto& [k, f] : t_)
        if (k.ydeg() != 0 || k.form != 0) return false;
    return true;
}

bool GradedElement::is_fiber() const {
    for (auto& [k, f] : t_)
        if (k.form != 0 || !f.is_constant()) return false;
    return true;
}

std::map<int, ChartFunction> GradedElement::endo_entry(int r, int c) const {
    std::map<int, ChartFunction> out;
    for (auto& [k, f] : t_) {
        if (k.ydeg() != 0 || k.form != 0 || k.row != r || k.col != c) continue;
        auto [it, fresh] = out.try_emplace(k.hbar, f);
        if (!fresh) it->second = it->second + f;
    }
    return out;
}

std::map<int, ChartFunction> GradedElement::top_form_trace() const {
    uint8_t top = uint8_t((1u << dim()) - 1u);
    std::map<int, ChartFunction> out;
    for (auto& [k, f] : t_) {
        if (k.form != top || k.ydeg() != 0 || k.row != k.col) continue;
        auto [it, fresh] = out.try_emplace(k.hbar, f);
        if (!fresh) it->second = it->second + f;
    }
    return out;
}

std::string GradedElement::str() const {
    if (t_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto& [k, f] : t_) {
        if (!first) os << "  +  ";
        first = false;
        os << "[" << f.str() << "]";
        if (k.hbar != 0) os << " h^" << k.hbar;
        for (int i = 0; i < 4; ++i)
            if (k.y[i]) {
                os << " y" << (i + 1);
                if (k.y[i] > 1) os << "^" << int(k.y[i]);
            }
        if (k.form) {
            os << " dx{";
            bool fi = true;
            for (int i = 0; i < 8; ++i)
                if (k.form & (1u << i)) {
                    os << (fi ? "" : ",") << (i + 1);
                    fi = false;
                }
            os << "}";
        }
        if (msize_ > 1) os << " E" << int(k.row + 1) << int(k.col + 1);
    }
    return os.str();
}

GradedElement moyal(const GradedElement& a, const GradedElement& b) {
    check_compat(a, b, "moyal");
    const SymplecticFrame& fr = *a.frame_;
    const int dim = fr.dim();
    GradedElement res(a.frame_, a.msize_, Window::product(a.win_, b.win_));
    res.chart_truncated_ = a.chart_truncated_ || b.chart_truncated_;

    // Nonzero Poisson tensor entries, scanned once.
    struct UpEntry { int i, j; const ChartFunction* w; };
    std::vector<UpEntry> up;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (!fr.upper(i, j).is_zero()) up.push_back({i, j, &fr.upper(i, j)});

    struct BiTerm { ChartFunction c; std::array<uint8_t, 4> a1, a2; };

    const Window& rw = res.window();
    for (auto& [ka, fa] : a.terms()) {
        for (auto& [kb, fb] : b.terms()) {
            if (ka.col != kb.row) continue;
            // Filtration is invariant under the contraction order and the hbar
            // exponent only grows with it, so pairs landing beyond the window
            // at j = 0 never contribute.
            if (ka.hbar + kb.hbar > rw.k_max) continue;
            if (ka.filtration() + kb.filtration() > rw.f_max) continue;
            auto [sgn, mask] = form_merge(ka.form, kb.form);
            if (sgn == 0) continue;

            ChartFunction base = fa * fb;
            if (sgn < 0) base = -base;

            std::vector<BiTerm> level{{base, ka.y, kb.y}};
            Rational fact(1);  // (1/2)^j / j!
            for (int j = 0; !level.empty() && ka.hbar + kb.hbar + j <= rw.k_max; ++j) {
                if (j > 0) fact = fact / Rational(2 * j);
                for (auto& bt : level) {
                    TermKey nk;
                    nk.hbar = int16_t(ka.hbar + kb.hbar + j);
                    for (int u = 0; u < 4; ++u) nk.y[u] = uint8_t(bt.a1[u] + bt.a2[u]);
                    nk.form = mask;
                    nk.row = ka.row;
                    nk.col = kb.col;
                    res.add_term(nk, bt.c.scaled(GaussianRational(fact)));
                }
                std::vector<BiTerm> next;
                for (auto& bt : level) {
                    for (auto& e : up) {
                        if (bt.a1[e.i] == 0 || bt.a2[e.j] == 0) continue;
                        BiTerm nb;
                        nb.c = (bt.c * (*e.w))
                                   .scaled(GaussianRational(Rational(bt.a1[e.i]) * Rational(bt.a2[e.j])));
                        nb.a1 = bt.a1;
                        nb.a2 = bt.a2;
                        nb.a1[e.i] -= 1;
                        nb.a2[e.j] -= 1;
                        next.push_back(std::move(nb));
                    }
                }
                level = std::move(next);
            }
        }
    }
    return res;
}

GradedElement gcomm(const GradedElement& a, const GradedElement& b) {
    check_compat(a, b, "gcomm");
    GradedElement even_a(a.frame(), a.matrix_size(), a.window());
    GradedElement odd_a = even_a, even_b(b.frame(), b.matrix_size(), b.window()), odd_b = even_b;
    for (auto& [k, f] : a.terms()) (k.form_deg() % 2 ? odd_a : even_a).add_term(k, f);
    for (auto& [k, f] : b.terms()) (k.form_deg() % 2 ? odd_b : even_b).add_term(k, f);

    GradedElement r = moyal(even_a, even_b) - moyal(even_b, even_a);
    r = r + moyal(even_a, odd_b) - moyal(odd_b, even_a);
    r = r + moyal(odd_a, even_b) - moyal(even_b, odd_a);
    r = r + moyal(odd_a, odd_b) + moyal(odd_b, odd_a);
    return r;
}

GradedElement koszul_delta(const GradedElement& a) {
    GradedElement r(a.frame(), a.matrix_size(), a.window().filtration_shifted(-1));
    for (auto& [k, f] : a.terms()) {
        for (int i = 0; i < a.dim(); ++i) {
            if (k.y[i] == 0) continue;
            uint8_t di = uint8_t(1u << i);
            auto [sgn, mask] = form_merge(di, k.form);
            if (sgn == 0) continue;
            TermKey nk = k;
            nk.y[i] -= 1;
            nk.form = mask;
            r.add_term(nk, f.scaled(GaussianRational(Rational(sgn * int(k.y[i])))));
        }
    }
    return r;
}

GradedElement koszul_delta_inv(const GradedElement& a) {
    GradedElement r(a.frame(), a.matrix_size(), a.window().filtration_shifted(+1));
    for (auto& [k, f] : a.terms()) {
        int p = k.ydeg(), q = k.form_deg();
        if (p + q == 0) continue;
        Rational inv(1, p + q);
        int pos = 0;
        for (int i = 0; i < a.dim(); ++i) {
            uint8_t bit = uint8_t(1u << i);
            if (!(k.form & bit)) continue;
            TermKey nk = k;
            nk.y[i] += 1;
            nk.form = uint8_t(k.form & ~bit);
            int sgn = (pos % 2) ? -1 : 1;
            r.add_term(nk, f.scaled(GaussianRational(Rational(sgn) * inv)));
            ++pos;
        }
    }
    return r;
}

GradedElement sigma(const GradedElement& a) {
    GradedElement r(a.frame(), a.matrix_size(), a.window());
    for (auto& [k, f] : a.terms())
        if (k.ydeg() == 0 && k.form == 0) r.add_term(k, f);
    return r;
}

GradedElement de_rham(const GradedElement& a) {
    GradedElement r(a.frame(), a.matrix_size(), a.window());
    for (auto& [k, f] : a.terms()) {
        for (int i = 0; i < a.dim(); ++i) {
            ChartFunction df = f.derive(i + 1);
            if (df.is_zero() && !df.truncated()) continue;
            uint8_t di = uint8_t(1u << i);
            auto [sgn, mask] = form_merge(di, k.form);
            if (sgn == 0) continue;
            TermKey nk = k;
            nk.form = mask;
            r.add_term(nk, sgn < 0 ? -df : df);
        }
    }
    return r;
}

int filtration_degree(const GradedElement& a) {
    int m = kWinInf;
    for (auto& [k, f] : a.terms()) m = win_min(m, k.filtration());
    return m;
}

bool equal_on_common_window(const GradedElement& a, const GradedElement& b) {
    GradedElement d = a - b;
    for (auto& [k, f] : d.terms())
        if (!f.is_zero()) return false;
    return true;
}

}  // namespace qindex
