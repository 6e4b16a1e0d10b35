// Copyright 2026 The dyrep authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dyrep/modulus.hpp"
#include "dyrep/quadrature.hpp"
#include "dyrep/simplefn.hpp"

namespace dyrep {

enum class KernelType { hilbert, power };

namespace detail {

// Marginal density of |x_i - y_i| for x_i in [a,b), y_i in [c,d): the
// reflected trapezoid phi(u) = dens(u) + dens(-u) with
// dens(z) = |[a,b) cap [c+z, d+z)|.  Piecewise linear; kinks only at
// {|a-c|, |a-d|, |b-c|, |b-d|} and 0.
struct AxisPair {
    real a, b, c, d;

    real phi(real u) const {
        auto dens = [&](real z) {
            return std::max<real>(0, std::min(b, d + z) - std::max(a, c + z));
        };
        return dens(u) + dens(-u);
    }

    void breakpoints(std::vector<real>& out) const {
        out.push_back(0);
        out.push_back(std::fabs(a - c));
        out.push_back(std::fabs(a - d));
        out.push_back(std::fabs(b - c));
        out.push_back(std::fabs(b - d));
    }
};

} // namespace detail

// Pointwise Calderon-Zygmund kernel together with its declared size constant
// and modulus of continuity (both verified by sampling, not assumed).
//
// Built-ins:
//   hilbert: d=1, K(x,y) = 1/(x-y), principal-value pairing rule on any
//            rectangle pair.  Declared modulus 4t: the summed two-sided
//            smoothness quantity equals 2t/(1-t), which reaches 4t at t=1/2,
//            so the often-quoted 2t fails the sampled bound near t=1/2.
//   power:   K(x,y) = |x-y|_inf^{-d}, no overlap rule.  Pairings have an
//            exact piecewise closed form through the marginal densities of
//            |x_i-y_i|, valid whenever |R cap S| = 0 (touching allowed).
//            Declared modulus d 2^{d+2} t^delta for any delta in (0,1],
//            dominating the true Lipschitz bound d 2^{d+2} t on t <= 1/2.
class Kernel {
public:
    static Kernel hilbert() {
        return Kernel(KernelType::hilbert, 1, 1.0L, Modulus::power(4.0L, 1.0L));
    }
    static Kernel power(int d, real delta) {
        if (d < 1 || d > 2) throw Error("Kernel::power: dimension must be 1 or 2");
        real c = real(d) * std::pow(2.0L, real(d) + 2);
        return Kernel(KernelType::power, d, 1.0L, Modulus::power(c, delta));
    }

    KernelType type() const { return type_; }
    int dim() const { return d_; }
    real c_K() const { return c_k_; }
    const Modulus& modulus() const { return modulus_; }
    bool has_overlap_rule() const { return type_ == KernelType::hilbert; }

    real eval(const real* x, const real* y) const {
        if (type_ == KernelType::hilbert) return 1.0L / (x[0] - y[0]);
        real u = 0;
        for (int i = 0; i < d_; ++i) u = std::max(u, std::fabs(x[i] - y[i]));
        real p = u;
        for (int i = 1; i < d_; ++i) p *= u;
        return 1.0L / p;
    }

    // Pairing over a rectangle pair: integral over x in S, y in R of K(x,y).
    // R is the first (y) slot.  Hilbert accepts any rectangles (principal
    // value); power requires |R cap S| = 0.
    real pair_rect(const Rect& R, const Rect& S) const {
        if (int(R.lo.size()) != d_ || int(S.lo.size()) != d_)
            throw Error("pair_rect: dimension mismatch");
        if (R.empty() || S.empty()) return 0;
        if (type_ == KernelType::hilbert) return pair_hilbert(R, S);
        if (!rect_intersect(R, S).empty())
            throw Error("pair_rect: overlap rule unavailable for this kernel");
        return d_ == 1 ? pair_power_1d(R, S) : pair_power_2d(R, S);
    }

private:
    Kernel(KernelType t, int d, real ck, Modulus m) : type_(t), d_(d), c_k_(ck), modulus_(m) {}

    // Antiderivative iterated twice: G(u) = u ln|u| - u, G(0) = 0.
    static real G(real u) {
        if (u == 0) return 0;
        return u * (std::log(std::fabs(u)) - 1);
    }

    real pair_hilbert(const Rect& R, const Rect& S) const {
        real r0 = R.lo[0].to_real(), r1 = R.hi[0].to_real();
        real s0 = S.lo[0].to_real(), s1 = S.hi[0].to_real();
        CompensatedSum acc;
        acc.add(G(s1 - r0));
        acc.add(-G(s1 - r1));
        acc.add(-G(s0 - r0));
        acc.add(G(s0 - r1));
        return acc.value();
    }

    detail::AxisPair axis_pair(const Rect& R, const Rect& S, int i) const {
        return detail::AxisPair{R.lo[size_t(i)].to_real(), R.hi[size_t(i)].to_real(),
                                S.lo[size_t(i)].to_real(), S.hi[size_t(i)].to_real()};
    }

    real pair_power_1d(const Rect& R, const Rect& S) const {
        detail::AxisPair ax = axis_pair(R, S, 0);
        std::vector<real> grid;
        ax.breakpoints(grid);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        CompensatedSum acc;
        for (size_t j = 0; j + 1 < grid.size(); ++j) {
            real s = grid[j], t = grid[j + 1];
            if (!(t > s)) continue;
            real fs = ax.phi(s), ft = ax.phi(t);
            real beta = (ft - fs) / (t - s);
            real alpha = fs - beta * s;
            // integral of (alpha + beta u)/u; alpha = phi(0) = 0 on the cell
            // at zero because |R cap S| = 0.
            if (alpha != 0) acc.add(alpha * std::log(t / s));
            acc.add(beta * (t - s));
        }
        return acc.value();
    }

    real pair_power_2d(const Rect& R, const Rect& S) const {
        detail::AxisPair ax1 = axis_pair(R, S, 0);
        detail::AxisPair ax2 = axis_pair(R, S, 1);
        std::vector<real> grid;
        ax1.breakpoints(grid);
        ax2.breakpoints(grid);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

        // integral over (u,v) of max(u,v)^{-2} phi1(u) phi2(v):
        // per cell of the common grid, the larger variable contributes
        // u^{-2} phi against the full mass of the smaller cells (prefix) plus
        // the triangle where both sit in the same cell.
        CompensatedSum acc;
        real psi1 = 0, psi2 = 0;  // prefix masses
        for (size_t j = 0; j + 1 < grid.size(); ++j) {
            real s = grid[j], t = grid[j + 1];
            if (!(t > s)) continue;
            real f1s = ax1.phi(s), f1t = ax1.phi(t);
            real f2s = ax2.phi(s), f2t = ax2.phi(t);
            real beta1 = (f1t - f1s) / (t - s), alpha1 = f1s - beta1 * s;
            real beta2 = (f2t - f2s) / (t - s), alpha2 = f2s - beta2 * s;

            if (psi2 != 0) acc.add(cell_inv2(alpha1, beta1, s, t) * psi2);
            if (psi1 != 0) acc.add(cell_inv2(alpha2, beta2, s, t) * psi1);
            if ((alpha1 != 0 || beta1 != 0) && (alpha2 != 0 || beta2 != 0)) {
                acc.add(diag_triangle(alpha1, beta1, alpha2, beta2, s, t));
                acc.add(diag_triangle(alpha2, beta2, alpha1, beta1, s, t));
            }

            psi1 += (f1s + f1t) / 2 * (t - s);
            psi2 += (f2s + f2t) / 2 * (t - s);
        }
        return acc.value();
    }

    // integral over [s,t] of (alpha + beta u) u^{-2}; caller guarantees s > 0.
    static real cell_inv2(real alpha, real beta, real s, real t) {
        real out = 0;
        if (alpha != 0) out += alpha * (1 / s - 1 / t);
        if (beta != 0) out += beta * std::log(t / s);
        return out;
    }

    // integral over s <= v <= u <= t of u^{-2} (a1 + b1 u)(a2 + b2 v).
    // The inner integral is A + B u + C u^2 with A = -a2 s - b2 s^2/2, which
    // vanishes at s = 0; the remaining log coefficient a1*a2 vanishes too
    // because a positive-overlap pair in both axes is rejected upfront.
    static real diag_triangle(real a1, real b1, real a2, real b2, real s, real t) {
        real A = -a2 * s - b2 * s * s / 2;
        real B = a2;
        real C = b2 / 2;
        real c_m2 = a1 * A;
        real c_m1 = a1 * B + b1 * A;
        real c_0 = a1 * C + b1 * B;
        real c_1 = b1 * C;
        real out = 0;
        if (c_m2 != 0) out += c_m2 * (1 / s - 1 / t);
        if (c_m1 != 0) out += c_m1 * std::log(t / s);
        out += c_0 * (t - s) + c_1 * (t * t - s * s) / 2;
        return out;
    }

    KernelType type_;
    int d_;
    real c_k_;
    Modulus modulus_;
};

// Pairing restricted to |R cap S| = 0 (checked exactly).
inline real pairing_disjoint(const Kernel& k, const Rect& R, const Rect& S) {
    if (!(rect_intersect(R, S).measure() == DyadicRational(0)))
        throw Error("pairing_disjoint: rectangles overlap");
    return k.pair_rect(R, S);
}

// Pairing under the kernel's overlap rule; errors when the kernel has none
// and the rectangles overlap.
inline real pairing_full(const Kernel& k, const Rect& R, const Rect& S) {
    return k.pair_rect(R, S);
}

// Independent tensor Gauss cross-check for pairings of separated rectangles.
// The order is chosen from the Bernstein-ellipse parameter of the smallest
// separation-to-side ratio; throws when the rectangles touch.
inline real pairing_quadrature(const Kernel& k, const Rect& R, const Rect& S,
                               real tol = 1e-10L) {
    DyadicRational dist = rect_linf_distance(R, S);
    if (!(DyadicRational(0) < dist))
        throw Error("pairing_quadrature: rectangles must be separated");
    int d = k.dim();
    real ell = 0;
    for (int i = 0; i < d; ++i) {
        ell = std::max(ell, (R.hi[size_t(i)] - R.lo[size_t(i)]).to_real());
        ell = std::max(ell, (S.hi[size_t(i)] - S.lo[size_t(i)]).to_real());
    }
    real chi = 1 + 2 * dist.to_real() / ell;
    real rho = chi + std::sqrt(chi * chi - 1);
    int n = int(std::ceil(std::log(1 / tol) / (2 * std::log(rho)))) + 4;
    n = std::clamp(n, 8, 64);

    std::vector<real> lo, hi;
    for (int i = 0; i < d; ++i) {
        lo.push_back(R.lo[size_t(i)].to_real());
        hi.push_back(R.hi[size_t(i)].to_real());
    }
    for (int i = 0; i < d; ++i) {
        lo.push_back(S.lo[size_t(i)].to_real());
        hi.push_back(S.hi[size_t(i)].to_real());
    }
    return gl_integrate_box(
        [&](const real* pt) { return k.eval(pt + d, pt); }, lo.data(), hi.data(), 2 * d, n);
}

struct BoundCheck {
    real max_size_ratio = 0;    // |K| * |x-y|^d / c_K
    real max_smooth_ratio = 0;  // summed difference * |x-y|^d / omega(t)
};

// Sampled verification of the declared size and smoothness bounds.
inline BoundCheck verify_standard_bounds(const Kernel& k, std::uint64_t seed, int samples) {
    BoundCheck out;
    int d = k.dim();
    std::vector<real> x(size_t(d), 0), y(size_t(d), 0), xp(size_t(d), 0);
    for (int i = 0; i < samples; ++i) {
        for (int a = 0; a < d; ++a) {
            x[size_t(a)] = 16 * derive_unit(seed, 101 + std::uint64_t(a), std::uint64_t(i)) - 8;
            y[size_t(a)] = 16 * derive_unit(seed, 201 + std::uint64_t(a), std::uint64_t(i)) - 8;
        }
        real u = 0;
        for (int a = 0; a < d; ++a) u = std::max(u, std::fabs(x[size_t(a)] - y[size_t(a)]));
        if (u < 1e-3L) continue;
        real ud = u;
        for (int a = 1; a < d; ++a) ud *= u;

        out.max_size_ratio =
            std::max(out.max_size_ratio, std::fabs(k.eval(x.data(), y.data())) * ud / k.c_K());

        // Admissible perturbation |x-x'| < u/2 along a random direction.
        real t = 0.499L * derive_unit(seed, 301, std::uint64_t(i));
        if (t == 0) continue;
        real step = 0;
        for (int a = 0; a < d; ++a) {
            real r = 2 * derive_unit(seed, 401 + std::uint64_t(a), std::uint64_t(i)) - 1;
            xp[size_t(a)] = r;
            step = std::max(step, std::fabs(r));
        }
        if (step == 0) continue;
        for (int a = 0; a < d; ++a)
            xp[size_t(a)] = x[size_t(a)] + xp[size_t(a)] / step * (t * u);
        real diff = std::fabs(k.eval(x.data(), y.data()) - k.eval(xp.data(), y.data())) +
                    std::fabs(k.eval(y.data(), x.data()) - k.eval(y.data(), xp.data()));
        real bound = k.modulus()(t);
        if (bound > 0)
            out.max_smooth_ratio = std::max(out.max_smooth_ratio, diff * ud / bound);
    }
    return out;
}

} // namespace dyrep
