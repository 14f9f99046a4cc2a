#pragma once

#include <functional>
#include <vector>

#include "qindex/fedosov.hpp"
#include "qindex/weyl.hpp"

namespace qindex {

/// Completely antisymmetric Liouville tensor of a constant symplectic form B:
/// eps^{i1..i2n} = ((-1)^n / n!) sum_nu sgn(nu) B^{i_nu(1) i_nu(2)} ...
class LiouvilleTensor {
public:
    LiouvilleTensor(int dim, std::vector<Rational> dense);

    int dim() const { return dim_; }
    const Rational& component(const std::vector<int>& idx) const;  // 0-based indices

private:
    int dim_;
    std::vector<Rational> c_;  // dense, row-major over index tuples
    friend LiouvilleTensor liouville_eps(const std::vector<std::vector<Rational>>& B);
    friend class TauEngine;
};

/// Build the Liouville tensor from an invertible antisymmetric rational B.
LiouvilleTensor liouville_eps(const std::vector<std::vector<Rational>>& B);

/// Exact integral of u1^p1 ... um^pm over {0 <= u1 <= ... <= um <= 1},
/// by iterated one-dimensional integration.
Rational simplex_integral(const std::vector<int>& powers);

/// Memo table in front of simplex_integral.
class SimplexCache {
public:
    const Rational& integral(const std::vector<int>& powers);

private:
    std::map<std::vector<int>, Rational> memo_;
};

/// Evaluator for the FFS cocycle machinery over a fixed constant fiber form B.
/// Holds the Liouville tensor, the simplex table and the contraction memos.
class TauEngine {
public:
    /// B taken from the constant omega_upper of the frame.
    explicit TauEngine(const FramePtr& frame);
    TauEngine(int n, std::vector<std::vector<Rational>> B);

    int n() const { return n_; }
    const LiouvilleTensor& eps() const { return eps_; }

    /// The 2n-th Hochschild cocycle tau_2n(a1 x ... x a2n)(a0) on scalar
    /// (N = 1) fiber elements, polynomial in y.
    HLaurent tau(const std::vector<GradedElement>& args, const GradedElement& a0);

    /// Theta^N_2n = phi^N(tau_2n) on matrix fiber elements.
    HLaurent theta(const std::vector<GradedElement>& margs, const GradedElement& m0);

    /// Test hook: flips the sign of the Liouville tensor (selftest mutation).
    void corrupt_epsilon_sign();

    // Core contraction sum on y-monomial slots (slot 0 = a0); exposed for the
    // trace density evaluation. Result maps contraction count m to the exact
    // coefficient of (hbar^m); callers add sum of slot hbar exponents.
    using MonoKey = std::vector<uint8_t>;
    const std::map<int, Rational>& tau_monomials(const MonoKey& slots_y);

private:
    int n_;
    std::vector<std::vector<Rational>> B_;
    LiouvilleTensor eps_;
    SimplexCache simplex_;
    std::map<MonoKey, std::map<int, Rational>> wick_memo_, tau_memo_;

    const std::map<int, Rational>& wick(const MonoKey& degs);
    void wick_rec(std::vector<uint8_t>& degs, size_t pair_idx, int level,
                  const std::vector<std::pair<int, int>>& pairs,
                  std::map<std::vector<uint8_t>, Rational>& upoly, const Rational& coeff, int m,
                  std::map<int, Rational>& out);
};

/// Hochschild cochain of fixed arity on scalar fiber elements, valued in the
/// dual module: psi(a1 x ... x ak)(a0).
using Cochain =
    std::function<HLaurent(const std::vector<GradedElement>&, const GradedElement&)>;

/// Standard Hochschild differential for dual-module cochains:
/// (b psi)(a1..a_{k+1})(a0) = psi(a2..)(a0 o a1)
///   + sum_i (-1)^i psi(.. a_i o a_{i+1} ..)(a0)
///   + (-1)^{k+1} psi(a1..ak)(a_{k+1} o a0).
HLaurent hochschild_b(const Cochain& psi, int arity, const std::vector<GradedElement>& args,
                      const GradedElement& a0);

/// Chain map into Lie algebra cochains:
/// phi^N(psi)(M1 a1, .., Mk ak)(M0 a0)
///   = (1/k!) sum_nu sgn(nu) psi(a_nu(1) x ..)(a0) tr(M0 M_nu(1) .. M_nu(k)),
/// extended to non-decomposable arguments by multilinearity.
HLaurent phi_N(const Cochain& psi, int arity, const std::vector<GradedElement>& margs,
               const GradedElement& m0);

/// FFS trace density: Psi_D(a) = h^{-n} Theta^N_2n(A, ..., A, lift(a)),
/// evaluated by multilinear extension over the one-form slots (form factors
/// pulled out in slot order). Output: scalar 2n-form series.
GradedElement psi(const FedosovConnection& conn, TauEngine& engine, const GradedElement& a);

}  // namespace qindex
