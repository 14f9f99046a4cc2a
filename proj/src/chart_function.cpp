#include "qindex/chart_function.hpp"

#include <cstdlib>
#include <sstream>

namespace qindex {

namespace {

bool key_in_bound(RingKind kind, int dim, int bound, const ChartFunction::Key& k) {
    if (kind == RingKind::Poly) {
        int total = 0;
        for (int i = 0; i < dim; ++i) {
            if (k[i] < 0) throw std::invalid_argument("ChartFunction: negative exponent in Poly variant");
            total += k[i];
        }
        return total <= bound;
    }
    for (int i = 0; i < dim; ++i)
        if (std::abs(k[i]) > bound) return false;
    return true;
}

ChartFunction::Key negated(const ChartFunction::Key& k) {
    ChartFunction::Key r{};
    for (size_t i = 0; i < k.size(); ++i) r[i] = -k[i];
    return r;
}

}  // namespace

ChartFunction ChartFunction::zero(RingKind kind, int dim, int bound) {
    ChartFunction f;
    f.kind_ = kind;
    f.dim_ = dim;
    f.bound_ = bound;
    return f;
}

ChartFunction ChartFunction::constant(RingKind kind, int dim, int bound, GaussianRational c) {
    ChartFunction f = zero(kind, dim, bound);
    f.insert(Key{}, c);
    return f;
}

ChartFunction ChartFunction::monomial(int dim, int bound, Key deg, GaussianRational c) {
    ChartFunction f = zero(RingKind::Poly, dim, bound);
    if (!key_in_bound(RingKind::Poly, dim, bound, deg))
        throw std::invalid_argument("ChartFunction::monomial: degree exceeds J");
    f.insert(deg, c);
    return f;
}

ChartFunction ChartFunction::mode(int dim, int bound, Key m, GaussianRational c) {
    ChartFunction f = zero(RingKind::Fourier, dim, bound);
    if (!key_in_bound(RingKind::Fourier, dim, bound, m))
        throw std::invalid_argument("ChartFunction::mode: frequency exceeds M");
    f.insert(m, c);
    return f;
}

ChartFunction ChartFunction::cosine(int dim, int bound, Key m, Rational amp) {
    // amp*cos(m.x) = (amp/2) e^{im.x} + (amp/2) e^{-im.x}
    GaussianRational half(amp / Rational(2));
    ChartFunction f = mode(dim, bound, m, half);
    f.insert(negated(m), half);
    return f;
}

ChartFunction ChartFunction::sine(int dim, int bound, Key m, Rational amp) {
    // amp*sin(m.x) = -(amp/2)i e^{im.x} + (amp/2)i e^{-im.x}
    Rational half = amp / Rational(2);
    ChartFunction f = mode(dim, bound, m, GaussianRational(Rational(0), -half));
    f.insert(negated(m), GaussianRational(Rational(0), half));
    return f;
}

void ChartFunction::insert(const Key& k, const GaussianRational& c) {
    if (c.is_zero()) return;
    if (!key_in_bound(kind_, dim_, bound_, k)) {
        truncated_ = true;
        return;
    }
    auto [it, fresh] = c_.try_emplace(k, c);
    if (!fresh) {
        it->second += c;
        if (it->second.is_zero()) c_.erase(it);
    }
}

void ChartFunction::check_compat(const ChartFunction& o, const char* op) const {
    if (kind_ != o.kind_)
        throw std::invalid_argument(std::string("ChartFunction: variant mismatch in ") + op);
    if (dim_ != o.dim_)
        throw std::invalid_argument(std::string("ChartFunction: dimension mismatch in ") + op);
    if (bound_ != o.bound_)
        throw std::invalid_argument(std::string("ChartFunction: truncation bound mismatch in ") + op);
}

bool ChartFunction::is_constant() const {
    if (c_.empty()) return true;
    return c_.size() == 1 && c_.begin()->first == Key{};
}

bool ChartFunction::reality() const {
    if (kind_ != RingKind::Fourier) return false;
    for (auto& [m, c] : c_) {
        auto it = c_.find(negated(m));
        if (it == c_.end() || it->second != c.conj()) return false;
    }
    return true;
}

GaussianRational ChartFunction::constant_coeff() const {
    auto it = c_.find(Key{});
    return it == c_.end() ? GaussianRational() : it->second;
}

ChartFunction ChartFunction::operator+(const ChartFunction& o) const {
    check_compat(o, "+");
    ChartFunction r = *this;
    r.truncated_ = truncated_ || o.truncated_;
    for (auto& [k, c] : o.c_) r.insert(k, c);
    return r;
}

ChartFunction ChartFunction::operator-() const {
    ChartFunction r = *this;
    for (auto& [k, c] : r.c_) c = -c;
    return r;
}

ChartFunction ChartFunction::operator-(const ChartFunction& o) const { return *this + (-o); }

ChartFunction ChartFunction::operator*(const ChartFunction& o) const {
    check_compat(o, "*");
    if (is_constant() || o.is_constant()) {
        const ChartFunction& var = is_constant() ? o : *this;
        const ChartFunction& cst = is_constant() ? *this : o;
        ChartFunction r = var.scaled(cst.constant_coeff());
        r.truncated_ = truncated_ || o.truncated_;
        return r;
    }
    ChartFunction r = zero(kind_, dim_, bound_);
    r.truncated_ = truncated_ || o.truncated_;
    for (auto& [ka, ca] : c_)
        for (auto& [kb, cb] : o.c_) {
            Key k{};
            for (int i = 0; i < dim_; ++i) k[i] = ka[i] + kb[i];
            r.insert(k, ca * cb);
        }
    return r;
}

ChartFunction ChartFunction::scaled(const GaussianRational& s) const {
    ChartFunction r = zero(kind_, dim_, bound_);
    r.truncated_ = truncated_;
    if (s.is_zero()) return r;
    for (auto& [k, c] : c_) r.c_[k] = c * s;
    return r;
}

ChartFunction ChartFunction::derive(int axis) const {
    if (axis < 1 || axis > dim_)
        throw std::invalid_argument("ChartFunction::derive: axis out of range");
    int a = axis - 1;
    ChartFunction r = zero(kind_, dim_, bound_);
    r.truncated_ = truncated_;
    for (auto& [k, c] : c_) {
        if (kind_ == RingKind::Poly) {
            if (k[a] == 0) continue;
            Key nk = k;
            nk[a] -= 1;
            r.insert(nk, Rational(k[a]) * c);
        } else {
            if (k[a] == 0) continue;
            // d/dx (e^{i m.x}) = i m_a e^{i m.x}
            r.insert(k, GaussianRational(Rational(0), Rational(k[a])) * c);
        }
    }
    return r;
}

GaussianRational ChartFunction::average() const {
    if (kind_ != RingKind::Fourier)
        throw std::invalid_argument("ChartFunction::average: defined for the Fourier variant only");
    return constant_coeff();
}

ChartFunction ChartFunction::conj() const {
    ChartFunction r = zero(kind_, dim_, bound_);
    r.truncated_ = truncated_;
    for (auto& [k, c] : c_) {
        // conj(e^{i m.x}) = e^{-i m.x}; x-monomials are real
        Key nk = (kind_ == RingKind::Fourier) ? negated(k) : k;
        r.insert(nk, c.conj());
    }
    return r;
}

bool ChartFunction::operator==(const ChartFunction& o) const {
    return kind_ == o.kind_ && dim_ == o.dim_ && c_ == o.c_;
}

std::string ChartFunction::str() const {
    if (c_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto& [k, c] : c_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.str() << ")";
        if (kind_ == RingKind::Poly) {
            for (int i = 0; i < dim_; ++i) {
                if (k[i] == 0) continue;
                os << "*x" << (i + 1);
                if (k[i] > 1) os << "^" << k[i];
            }
        } else {
            bool any = false;
            for (int i = 0; i < dim_; ++i) any = any || k[i] != 0;
            if (any) {
                os << "*f[";
                for (int i = 0; i < dim_; ++i) os << (i ? "," : "") << k[i];
                os << "]";
            }
        }
    }
    if (truncated_) os << " (~truncated)";
    return os.str();
}

}  // namespace qindex
