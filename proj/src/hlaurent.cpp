#include "qindex/hlaurent.hpp"

#include <sstream>

namespace qindex {

HLaurent HLaurent::scalar(GaussianRational c, int exponent) {
    HLaurent h;
    if (c.is_zero()) return h;
    h.k_min_ = exponent;
    h.k_max_ = kWinInf;
    h.c_[exponent] = std::move(c);
    return h;
}

GaussianRational HLaurent::coeff(int k) const {
    if (!determined_at(k))
        throw std::domain_error("HLaurent: coefficient at h^" + std::to_string(k) +
                                " lies beyond the determined window");
    auto it = c_.find(k);
    return it == c_.end() ? GaussianRational() : it->second;
}

void HLaurent::add_term(int k, const GaussianRational& c) {
    if (c.is_zero()) return;
    if (k > k_max_) return;  // beyond determined region
    if (k < k_min_) k_min_ = k;
    auto [it, fresh] = c_.try_emplace(k, c);
    if (!fresh) {
        it->second += c;
        if (it->second.is_zero()) c_.erase(it);
    }
}

void HLaurent::prune() {
    for (auto it = c_.begin(); it != c_.end();) {
        if (it->second.is_zero() || it->first > k_max_)
            it = c_.erase(it);
        else
            ++it;
    }
}

HLaurent HLaurent::operator+(const HLaurent& o) const {
    HLaurent r;
    r.set_window(win_min(k_min_, o.k_min_), win_min(k_max_, o.k_max_));
    for (auto& [k, c] : c_)
        if (k <= r.k_max_) r.c_[k] = c;
    for (auto& [k, c] : o.c_) {
        if (k > r.k_max_) continue;
        auto [it, fresh] = r.c_.try_emplace(k, c);
        if (!fresh) it->second += c;
    }
    r.prune();
    return r;
}

HLaurent HLaurent::operator-() const {
    HLaurent r = *this;
    for (auto& [k, c] : r.c_) c = -c;
    return r;
}

HLaurent HLaurent::operator-(const HLaurent& o) const { return *this + (-o); }

HLaurent HLaurent::operator*(const HLaurent& o) const {
    HLaurent r;
    // Unknown terms of one factor meet known terms of the other no lower
    // than k_max + other's valuation; everything below is determined.
    r.set_window(win_add(k_min_, o.k_min_),
                 win_min(win_add(k_max_, o.k_min_), win_add(o.k_max_, k_min_)));
    for (auto& [ka, ca] : c_)
        for (auto& [kb, cb] : o.c_) {
            int k = ka + kb;
            if (k > r.k_max_) continue;
            GaussianRational p = ca * cb;
            auto [it, fresh] = r.c_.try_emplace(k, p);
            if (!fresh) it->second += p;
        }
    r.prune();
    return r;
}

HLaurent HLaurent::scaled(const GaussianRational& c) const {
    if (c.is_zero()) return HLaurent();
    HLaurent r = *this;
    for (auto& [k, v] : r.c_) v *= c;
    return r;
}

HLaurent HLaurent::shifted(int dk) const {
    HLaurent r;
    r.set_window(win_add(k_min_, dk), win_add(k_max_, dk));
    for (auto& [k, c] : c_) r.c_[k + dk] = c;
    return r;
}

HLaurent HLaurent::truncated(int new_k_max) const {
    HLaurent r = *this;
    r.k_max_ = win_min(r.k_max_, new_k_max);
    // A valuation claim never extends past the determined region.
    r.k_min_ = win_min(r.k_min_, win_add(r.k_max_, 1));
    r.prune();
    return r;
}

bool HLaurent::equal_on_common_window(const HLaurent& a, const HLaurent& b) {
    int hi = win_min(a.k_max_, b.k_max_);
    HLaurent d = a - b;
    for (auto& [k, c] : d.c_)
        if (k <= hi && !c.is_zero()) return false;
    return true;
}

bool HLaurent::equal_at(const HLaurent& a, const HLaurent& b, int k) {
    if (!a.determined_at(k) || !b.determined_at(k)) return false;
    return a.coeff(k) == b.coeff(k);
}

std::string HLaurent::str() const {
    if (c_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto& [k, c] : c_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.str() << ")";
        if (k != 0) os << "*h^" << k;
    }
    return os.str();
}

}  // namespace qindex
