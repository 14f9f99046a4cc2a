#include "qindex/ffs.hpp"

#include <algorithm>
#include <numeric>

namespace qindex {

namespace {

int floordiv2(int x) { return x >= 0 ? x / 2 : -((-x + 1) / 2); }
int ceildiv2(int x) { return floordiv2(x + 1); }

std::vector<std::vector<int>> permutations(int k) {
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 0);
    std::vector<std::vector<int>> out;
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return out;
}

int perm_sign(const std::vector<int>& p) {
    int inv = 0;
    for (size_t i = 0; i < p.size(); ++i)
        for (size_t j = i + 1; j < p.size(); ++j)
            if (p[i] > p[j]) ++inv;
    return (inv & 1) ? -1 : 1;
}

/// Determined hbar window of a fully contracted multilinear evaluation.
/// Exponents add along the hbar route, and the output exponent equals half
/// the total filtration, so an unknown region of one slot pollutes only
/// beyond both bounds.
std::pair<int, int> combine_slot_windows(const std::vector<Window>& ws) {
    int ksum = 0, fsum = 0;
    bool inf = false;
    for (auto& w : ws) {
        ksum = win_add(ksum, w.k_min);
        fsum = win_add(fsum, w.f_min);
        inf = inf || w.k_min >= kWinInf;
    }
    int lo = inf ? kWinInf : std::max(ksum, ceildiv2(fsum));
    int hi = kWinInf;
    for (auto& w : ws) {
        int k_route = (w.k_max >= kWinInf || ksum >= kWinInf)
                          ? kWinInf
                          : w.k_max + (ksum - w.k_min);
        int f_route = (w.f_max >= kWinInf || fsum >= kWinInf)
                          ? kWinInf
                          : floordiv2(w.f_max + (fsum - w.f_min));
        hi = win_min(hi, win_min(k_route, f_route));
    }
    return {lo, hi};
}

struct FiberMono {
    int k;
    std::array<uint8_t, 4> y;
    uint8_t row, col;
    GaussianRational c;
};

std::vector<FiberMono> fiber_monomials(const GradedElement& a, const char* who) {
    std::vector<FiberMono> out;
    for (auto& [key, f] : a.terms()) {
        if (key.form != 0 || !f.is_constant())
            throw std::invalid_argument(std::string(who) +
                                        ": argument must be a fiber Weyl element");
        out.push_back({key.hbar, key.y, key.row, key.col, f.constant_coeff()});
    }
    return out;
}

}  // namespace

LiouvilleTensor::LiouvilleTensor(int dim, std::vector<Rational> dense)
    : dim_(dim), c_(std::move(dense)) {}

const Rational& LiouvilleTensor::component(const std::vector<int>& idx) const {
    if (int(idx.size()) != dim_)
        throw std::invalid_argument("LiouvilleTensor: index tuple must have length 2n");
    size_t flat = 0;
    for (int i : idx) {
        if (i < 0 || i >= dim_) throw std::invalid_argument("LiouvilleTensor: index out of range");
        flat = flat * size_t(dim_) + size_t(i);
    }
    return c_[flat];
}

LiouvilleTensor liouville_eps(const std::vector<std::vector<Rational>>& B) {
    int dim = int(B.size());
    if (dim != 2 && dim != 4) throw std::invalid_argument("liouville_eps: dim must be 2 or 4");
    for (int i = 0; i < dim; ++i) {
        if (int(B[i].size()) != dim) throw std::invalid_argument("liouville_eps: B must be square");
        for (int j = 0; j < dim; ++j)
            if (B[i][j] != -B[j][i])
                throw std::invalid_argument("liouville_eps: B must be antisymmetric");
    }
    int n = dim / 2;

    size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= size_t(dim);
    std::vector<Rational> dense(total, Rational(0));

    auto perms = permutations(dim);
    Rational pref = Rational((n % 2) ? -1 : 1);
    for (int t = 2; t <= n; ++t) pref = pref / Rational(t);  // (-1)^n / n!

    std::vector<int> idx(dim, 0);
    for (size_t flat = 0; flat < total; ++flat) {
        size_t rest = flat;
        for (int i = dim - 1; i >= 0; --i) {
            idx[i] = int(rest % size_t(dim));
            rest /= size_t(dim);
        }
        bool distinct = true;
        for (int i = 0; i < dim && distinct; ++i)
            for (int j = i + 1; j < dim; ++j)
                if (idx[i] == idx[j]) {
                    distinct = false;
                    break;
                }
        if (!distinct) continue;  // repeated indices vanish by antisymmetry
        Rational sum(0);
        for (auto& nu : perms) {
            Rational prod(1);
            for (int t = 0; t < n; ++t) prod *= B[idx[nu[2 * t]]][idx[nu[2 * t + 1]]];
            sum += Rational(perm_sign(nu)) * prod;
        }
        dense[flat] = pref * sum;
    }
    LiouvilleTensor eps(dim, std::move(dense));
    std::vector<int> ladder(dim);
    std::iota(ladder.begin(), ladder.end(), 0);
    if (eps.component(ladder).is_zero())
        throw std::invalid_argument("liouville_eps: B is singular");
    return eps;
}

Rational simplex_integral(const std::vector<int>& powers) {
    for (int p : powers)
        if (p < 0) throw std::invalid_argument("simplex_integral: powers must be non-negative");
    // Iterated one-dimensional integration: the state after integrating
    // u_1..u_t is a monomial c * u^q in the next upper limit.
    Rational c(1);
    int q = 0;
    for (int p : powers) {
        q += p;
        c = c / Rational(q + 1);
        q += 1;
    }
    return c;
}

const Rational& SimplexCache::integral(const std::vector<int>& powers) {
    auto it = memo_.find(powers);
    if (it != memo_.end()) return it->second;
    return memo_.emplace(powers, simplex_integral(powers)).first->second;
}

TauEngine::TauEngine(const FramePtr& frame)
    : TauEngine(frame->dim() / 2, [&] {
          if (!frame->constant())
              throw std::invalid_argument(
                  "TauEngine: the fiber form requires a constant-coefficient frame");
          int d = frame->dim();
          std::vector<std::vector<Rational>> B(d, std::vector<Rational>(d, Rational(0)));
          for (int i = 0; i < d; ++i)
              for (int j = 0; j < d; ++j) {
                  GaussianRational c = frame->upper(i, j).constant_coeff();
                  if (!c.is_real())
                      throw std::invalid_argument("TauEngine: omega_upper must be real rational");
                  B[i][j] = c.re;
              }
          return B;
      }()) {}

TauEngine::TauEngine(int n, std::vector<std::vector<Rational>> B)
    : n_(n), B_(std::move(B)), eps_(liouville_eps(B_)) {}

void TauEngine::corrupt_epsilon_sign() {
    // Flip only the components whose first two indices descend. A global sign
    // flip would cancel out of every linear identity; breaking antisymmetry
    // instead makes the cocycle check fail, which is the point of the hook.
    int dim = 2 * n_;
    std::vector<int> idx(dim, 0);
    for (size_t flat = 0; flat < eps_.c_.size(); ++flat) {
        size_t rest = flat;
        for (int i = dim - 1; i >= 0; --i) {
            idx[i] = int(rest % size_t(dim));
            rest /= size_t(dim);
        }
        if (idx[0] > idx[1]) eps_.c_[flat] = -eps_.c_[flat];
    }
    tau_memo_.clear();
}

void TauEngine::wick_rec(std::vector<uint8_t>& degs, size_t pair_idx, int level,
                         const std::vector<std::pair<int, int>>& pairs,
                         std::map<std::vector<uint8_t>, Rational>& upoly, const Rational& coeff,
                         int m, std::map<int, Rational>& out) {
    int dim = 2 * n_;
    if (pair_idx == pairs.size()) {
        for (uint8_t d : degs)
            if (d) return;  // mu evaluates every slot at y = 0
        for (auto& [mono, uc] : upoly) {
            std::vector<int> p(dim);
            for (int i = 0; i < dim; ++i) p[i] = mono[i];
            Rational v = coeff * uc * simplex_.integral(p);
            auto [it, fresh] = out.try_emplace(m, v);
            if (!fresh) it->second += v;
        }
        return;
    }
    auto [b, c] = pairs[pair_idx];

    // Slot b is never touched after its last pair; prune dead branches when
    // advancing.
    bool last_for_b = (pair_idx + 1 == pairs.size()) || (pairs[pair_idx + 1].first != b);
    bool b_done = std::all_of(degs.begin() + b * 4, degs.begin() + b * 4 + 4,
                              [](uint8_t d) { return d == 0; });
    if (!last_for_b || b_done)
        wick_rec(degs, pair_idx + 1, 0, pairs, upoly, coeff, m, out);

    // Apply exp((h/2) lambda_bc B_bc) one more order.
    for (int i = 0; i < dim; ++i) {
        if (degs[size_t(b) * 4 + i] == 0) continue;
        for (int j = 0; j < dim; ++j) {
            if (degs[size_t(c) * 4 + j] == 0 || B_[i][j].is_zero()) continue;
            Rational nc = coeff * B_[i][j] * Rational(degs[size_t(b) * 4 + i]) *
                          Rational(degs[size_t(c) * 4 + j]) / Rational(2 * (level + 1));
            // multiply the u-polynomial by lambda_bc = 1 + 2u_b - 2u_c, u_0 = 0
            std::map<std::vector<uint8_t>, Rational> nu;
            auto add = [&](const std::vector<uint8_t>& key, const Rational& v) {
                auto [it, fresh] = nu.try_emplace(key, v);
                if (!fresh) it->second += v;
            };
            for (auto& [mono, uc] : upoly) {
                add(mono, uc);
                if (b >= 1) {
                    std::vector<uint8_t> mb = mono;
                    mb[size_t(b - 1)] += 1;
                    add(mb, Rational(2) * uc);
                }
                std::vector<uint8_t> mc = mono;
                mc[size_t(c - 1)] += 1;
                add(mc, Rational(-2) * uc);
            }
            degs[size_t(b) * 4 + i] -= 1;
            degs[size_t(c) * 4 + j] -= 1;
            wick_rec(degs, pair_idx, level + 1, pairs, nu, nc, m + 1, out);
            degs[size_t(b) * 4 + i] += 1;
            degs[size_t(c) * 4 + j] += 1;
        }
    }
}

const std::map<int, Rational>& TauEngine::wick(const MonoKey& degs) {
    auto it = wick_memo_.find(degs);
    if (it != wick_memo_.end()) return it->second;

    std::map<int, Rational> out;
    int total = 0;
    for (uint8_t d : degs) total += d;
    if (total % 2 == 0) {
        std::vector<std::pair<int, int>> pairs;
        for (int b = 0; b <= 2 * n_; ++b)
            for (int c = b + 1; c <= 2 * n_; ++c) pairs.push_back({b, c});
        std::map<std::vector<uint8_t>, Rational> upoly;
        upoly[std::vector<uint8_t>(4, 0)] = Rational(1);
        std::vector<uint8_t> work = degs;
        wick_rec(work, 0, 0, pairs, upoly, Rational(1), 0, out);
        for (auto itm = out.begin(); itm != out.end();)
            itm = itm->second.is_zero() ? out.erase(itm) : std::next(itm);
    }
    return wick_memo_.emplace(degs, std::move(out)).first->second;
}

const std::map<int, Rational>& TauEngine::tau_monomials(const MonoKey& slots_y) {
    auto it = tau_memo_.find(slots_y);
    if (it != tau_memo_.end()) return it->second;

    int dim = 2 * n_;
    std::map<int, Rational> out;
    auto perms = permutations(dim);
    std::vector<int> idx(dim);
    for (auto& nu : perms) {
        // pi_2n differentiates slot t by y^{nu[t-1]}; slot 0 is untouched
        Rational factor(1);
        MonoKey reduced = slots_y;
        bool ok = true;
        for (int t = 1; t <= dim; ++t) {
            int axis = nu[t - 1];
            uint8_t& d = reduced[size_t(t) * 4 + axis];
            if (d == 0) {
                ok = false;
                break;
            }
            factor *= Rational(d);
            d -= 1;
            idx[t - 1] = axis;
        }
        if (!ok) continue;
        const Rational& e = eps_.component(idx);
        if (e.is_zero()) continue;
        Rational pre = e * factor;
        for (auto& [m, v] : wick(reduced)) {
            Rational add = pre * v;
            auto [itv, fresh] = out.try_emplace(m, add);
            if (!fresh) itv->second += add;
        }
    }
    for (auto itm = out.begin(); itm != out.end();)
        itm = itm->second.is_zero() ? out.erase(itm) : std::next(itm);
    return tau_memo_.emplace(slots_y, std::move(out)).first->second;
}

HLaurent TauEngine::tau(const std::vector<GradedElement>& args, const GradedElement& a0) {
    int dim = 2 * n_;
    if (int(args.size()) != dim) throw std::invalid_argument("tau: expected 2n arguments");
    if (a0.matrix_size() != 1)
        throw std::invalid_argument("tau: the scalar cocycle needs N = 1 (use theta)");
    std::vector<std::vector<FiberMono>> slots;
    slots.push_back(fiber_monomials(a0, "tau"));
    std::vector<Window> ws{a0.window()};
    for (auto& a : args) {
        if (a.matrix_size() != 1)
            throw std::invalid_argument("tau: the scalar cocycle needs N = 1 (use theta)");
        slots.push_back(fiber_monomials(a, "tau"));
        ws.push_back(a.window());
    }
    auto [lo, hi] = combine_slot_windows(ws);
    (void)lo;

    HLaurent built;
    built = built.truncated(hi);
    bool any_empty = false;
    for (auto& s : slots) any_empty = any_empty || s.empty();
    if (any_empty) return built;

    std::vector<size_t> pick(slots.size(), 0);
    while (true) {
        MonoKey key(size_t(dim + 1) * 4, 0);
        GaussianRational cprod(Rational(1));
        int ksum = 0;
        for (size_t s = 0; s < slots.size(); ++s) {
            const FiberMono& t = slots[s][pick[s]];
            for (int i = 0; i < 4; ++i) key[s * 4 + i] = t.y[i];
            cprod *= t.c;
            ksum += t.k;
        }
        for (auto& [m, v] : tau_monomials(key)) built.add_term(ksum + m, v * cprod);
        size_t s = 0;
        while (s < slots.size() && ++pick[s] == slots[s].size()) {
            pick[s] = 0;
            ++s;
        }
        if (s == slots.size()) break;
    }
    return built;
}

HLaurent TauEngine::theta(const std::vector<GradedElement>& margs, const GradedElement& m0) {
    int dim = 2 * n_;
    if (int(margs.size()) != dim) throw std::invalid_argument("theta: expected 2n arguments");
    std::vector<std::vector<FiberMono>> slots;
    slots.push_back(fiber_monomials(m0, "theta"));
    std::vector<Window> ws{m0.window()};
    for (auto& a : margs) {
        slots.push_back(fiber_monomials(a, "theta"));
        ws.push_back(a.window());
    }
    auto [lo, hi] = combine_slot_windows(ws);
    (void)lo;
    auto perms = permutations(dim);
    Rational inv_fact(1);
    for (int t = 2; t <= dim; ++t) inv_fact = inv_fact / Rational(t);

    HLaurent built;
    built = built.truncated(hi);
    bool any_empty = false;
    for (auto& s : slots) any_empty = any_empty || s.empty();
    if (any_empty) return built;

    std::vector<size_t> pick(slots.size(), 0);
    while (true) {
        const FiberMono& t0 = slots[0][pick[0]];
        GaussianRational cprod = t0.c;
        int ksum = t0.k;
        int ytotal = t0.y[0] + t0.y[1] + t0.y[2] + t0.y[3];
        std::vector<const FiberMono*> ts(size_t(dim), nullptr);
        for (int s = 1; s <= dim; ++s) {
            ts[size_t(s - 1)] = &slots[size_t(s)][pick[size_t(s)]];
            const FiberMono& t = *ts[size_t(s - 1)];
            cprod *= t.c;
            ksum += t.k;
            ytotal += t.y[0] + t.y[1] + t.y[2] + t.y[3];
        }
        if (ytotal % 2 == 0 && ksum <= hi) {
            for (auto& nu : perms) {
                uint8_t prev = t0.col;  // tr(M0 M_nu(1) ... M_nu(2n))
                bool ok = true;
                for (int s = 0; s < dim && ok; ++s) {
                    ok = ts[size_t(nu[s])]->row == prev;
                    prev = ts[size_t(nu[s])]->col;
                }
                if (!ok || prev != t0.row) continue;
                MonoKey key(size_t(dim + 1) * 4, 0);
                for (int i = 0; i < 4; ++i) key[i] = t0.y[i];
                for (int s = 0; s < dim; ++s)
                    for (int i = 0; i < 4; ++i)
                        key[size_t(s + 1) * 4 + i] = ts[size_t(nu[s])]->y[i];
                Rational sgn = Rational(perm_sign(nu)) * inv_fact;
                for (auto& [m, v] : tau_monomials(key))
                    built.add_term(ksum + m, (sgn * v) * cprod);
            }
        }
        size_t s = 0;
        while (s < slots.size() && ++pick[s] == slots[s].size()) {
            pick[s] = 0;
            ++s;
        }
        if (s == slots.size()) break;
    }
    return built;
}

HLaurent hochschild_b(const Cochain& psi_c, int arity, const std::vector<GradedElement>& args,
                      const GradedElement& a0) {
    if (int(args.size()) != arity + 1)
        throw std::invalid_argument("hochschild_b: need arity+1 arguments");

    std::vector<GradedElement> rest(args.begin() + 1, args.end());
    HLaurent out = psi_c(rest, moyal(a0, args[0]));

    for (int i = 1; i <= arity; ++i) {
        std::vector<GradedElement> merged;
        for (int j = 0; j < int(args.size()); ++j) {
            if (j == i - 1) {
                merged.push_back(moyal(args[size_t(j)], args[size_t(j + 1)]));
                ++j;
            } else {
                merged.push_back(args[size_t(j)]);
            }
        }
        HLaurent v = psi_c(merged, a0);
        out = out + ((i % 2) ? -v : v);
    }

    std::vector<GradedElement> head(args.begin(), args.end() - 1);
    HLaurent last = psi_c(head, moyal(args.back(), a0));
    out = out + (((arity + 1) % 2) ? -last : last);
    return out;
}

HLaurent phi_N(const Cochain& psi_c, int arity, const std::vector<GradedElement>& margs,
               const GradedElement& m0) {
    if (int(margs.size()) != arity)
        throw std::invalid_argument("phi_N: argument count must match the arity");
    int N = m0.matrix_size();

    // Decompose by elementary-matrix position; multilinearity handles
    // non-decomposable inputs.
    auto entries = [&](const GradedElement& a) {
        std::vector<std::tuple<int, int, GradedElement>> out;
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) {
                GradedElement e(a.frame(), 1, a.window());
                for (auto& [k, f] : a.terms())
                    if (k.row == r && k.col == c) {
                        TermKey nk = k;
                        nk.row = nk.col = 0;
                        e.add_term(nk, f);
                    }
                if (!e.is_zero_on_window()) out.push_back({r, c, std::move(e)});
            }
        return out;
    };

    std::vector<std::vector<std::tuple<int, int, GradedElement>>> dec;
    for (auto& a : margs) dec.push_back(entries(a));
    auto dec0 = entries(m0);

    auto perms = permutations(arity);
    Rational inv_fact(1);
    for (int t = 2; t <= arity; ++t) inv_fact = inv_fact / Rational(t);

    HLaurent out;
    bool first = true;
    bool any_empty = dec0.empty();
    for (auto& d : dec) any_empty = any_empty || d.empty();
    if (any_empty) return out;

    for (auto& [r0, c0, e0] : dec0) {
        std::vector<size_t> pick(margs.size(), 0);
        while (true) {
            for (auto& nu : perms) {
                int prev = c0;
                bool ok = true;
                for (int s = 0; s < arity && ok; ++s) {
                    auto& [r, c, e] = dec[size_t(nu[s])][pick[size_t(nu[s])]];
                    ok = (r == prev);
                    prev = c;
                }
                if (!ok || prev != r0) continue;
                std::vector<GradedElement> scalar_args;
                for (int s = 0; s < arity; ++s)
                    scalar_args.push_back(std::get<2>(dec[size_t(nu[s])][pick[size_t(nu[s])]]));
                HLaurent v = psi_c(scalar_args, e0)
                                 .scaled(GaussianRational(Rational(perm_sign(nu)) * inv_fact));
                out = first ? v : out + v;
                first = false;
            }
            size_t s = 0;
            while (s < pick.size() && ++pick[s] == dec[s].size()) {
                pick[s] = 0;
                ++s;
            }
            if (s == pick.size()) break;
        }
    }
    return out;
}

GradedElement psi(const FedosovConnection& conn, TauEngine& engine, const GradedElement& a) {
    const ChartGeometry& g = conn.geometry();
    int dim = g.dim();
    int n = dim / 2;
    if (engine.n() != n) throw std::invalid_argument("psi: engine dimension mismatch");
    if (!g.frame()->constant())
        throw std::invalid_argument("psi: the trace density needs a constant-coefficient frame");

    GradedElement lam = lift(conn, a);
    const GradedElement& A = conn.A();

    struct Slot {
        int k;
        std::array<uint8_t, 4> y;
        uint8_t form, row, col;
        const ChartFunction* f;
    };
    std::vector<Slot> at;
    for (auto& [k, f] : A.terms()) {
        if (k.form_deg() != 1)
            throw std::logic_error("psi: the connection one-form must be homogeneous of form degree 1");
        at.push_back({k.hbar, k.y, k.form, k.row, k.col, &f});
    }
    std::vector<Slot> m0;
    for (auto& [k, f] : lam.terms()) {
        if (k.form != 0) throw std::logic_error("psi: lift produced dx content");
        m0.push_back({k.hbar, k.y, k.form, k.row, k.col, &f});
    }

    std::vector<Window> ws(size_t(dim), A.window());
    ws.push_back(lam.window());
    auto [lo, hi] = combine_slot_windows(ws);
    lo = win_add(lo, -n);
    hi = win_add(hi, -n);
    Window outw{lo, hi, win_add(lo, lo), win_add(hi, hi)};
    GradedElement out(A.frame(), 1, outw);

    auto perms = permutations(dim);
    Rational inv_fact(1);
    for (int t = 2; t <= dim; ++t) inv_fact = inv_fact / Rational(t);

    // Ordered tuples of A-terms with pairwise-disjoint dx factors, pulled out
    // in slot order; the cochain antisymmetrization acts on the fiber parts.
    std::vector<const Slot*> chosen(size_t(dim), nullptr);
    std::function<void(int, uint8_t, int)> rec = [&](int s, uint8_t mask, int sgn) {
        if (s == dim) {
            for (auto& t0 : m0) {
                int ytotal = t0.y[0] + t0.y[1] + t0.y[2] + t0.y[3];
                int ksum = t0.k;
                for (auto* c : chosen) {
                    ytotal += c->y[0] + c->y[1] + c->y[2] + c->y[3];
                    ksum += c->k;
                }
                if (ytotal % 2) continue;
                if (ksum - n > hi) continue;  // contractions only raise the exponent

                std::map<int, Rational> coeffs;  // contraction order -> coefficient
                for (auto& nu : perms) {
                    uint8_t prev = t0.col;
                    bool ok = true;
                    for (int t = 0; t < dim && ok; ++t) {
                        ok = chosen[size_t(nu[t])]->row == prev;
                        prev = chosen[size_t(nu[t])]->col;
                    }
                    if (!ok || prev != t0.row) continue;
                    TauEngine::MonoKey key(size_t(dim + 1) * 4, 0);
                    for (int i = 0; i < 4; ++i) key[i] = t0.y[i];
                    for (int t = 0; t < dim; ++t)
                        for (int i = 0; i < 4; ++i)
                            key[size_t(t + 1) * 4 + i] = chosen[size_t(nu[t])]->y[i];
                    Rational s0 = Rational(perm_sign(nu)) * inv_fact;
                    for (auto& [m, v] : engine.tau_monomials(key)) {
                        Rational add = s0 * v;
                        auto [it, fresh] = coeffs.try_emplace(m, add);
                        if (!fresh) it->second += add;
                    }
                }
                if (coeffs.empty()) continue;

                ChartFunction fx = *t0.f;
                for (auto* c : chosen) fx = fx * (*c->f);
                if (sgn < 0) fx = -fx;
                for (auto& [m, v] : coeffs) {
                    if (v.is_zero()) continue;
                    TermKey nk;
                    nk.hbar = int16_t(ksum + m - n);
                    nk.form = mask;
                    out.add_term(nk, fx.scaled(GaussianRational(v)));
                }
            }
            return;
        }
        for (auto& t : at) {
            auto [s2, merged] = form_merge(mask, t.form);
            if (s2 == 0) continue;
            chosen[size_t(s)] = &t;
            rec(s + 1, merged, sgn * s2);
        }
    };
    rec(0, 0, 1);
    return out;
}

}  // namespace qindex
