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

#include "dyrep/kernel.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

using namespace dyrep;

namespace {

Rect iv(long long lo, long long hi, unsigned e = 0) {
    return Rect{{DyadicRational(bigint(lo), e)}, {DyadicRational(bigint(hi), e)}};
}

Rect box2(long long x0, long long x1, long long y0, long long y1, unsigned e = 0) {
    return Rect{{DyadicRational(bigint(x0), e), DyadicRational(bigint(y0), e)},
                {DyadicRational(bigint(x1), e), DyadicRational(bigint(y1), e)}};
}

// Random interval with endpoints on the 1/8 grid in [-32, 32), width >= 1/8.
Rect random_iv(std::uint64_t seed, std::uint64_t i) {
    long long a = (long long)(derive_u64(seed, 11, i) % 480) - 256;
    long long w = 1 + (long long)(derive_u64(seed, 12, i) % 64);
    return iv(a, a + w, 3);
}

Rect shift_rect(const Rect& r, const DyadicRational& dx, int axis = 0) {
    Rect out = r;
    out.lo[size_t(axis)] = out.lo[size_t(axis)] + dx;
    out.hi[size_t(axis)] = out.hi[size_t(axis)] + dx;
    return out;
}

Rect scale_rect(const Rect& r, int log2_lambda) {
    Rect out = r;
    DyadicRational lam = DyadicRational::pow2(log2_lambda);
    for (auto& x : out.lo) x = x * lam;
    for (auto& x : out.hi) x = x * lam;
    return out;
}

const real kLn2 = std::log(2.0L);
const real kLn3 = std::log(3.0L);

// Independent reference evaluator for d=2 power pairings.  Reduces to the
// marginal densities of |x_i - y_i| and integrates the (u,v) plane cell by
// cell numerically, with a Duffy split along the max kink u = v.  Shares no
// antiderivative code with the library implementation.
real power2_reference(const Rect& R, const Rect& S) {
    auto phi = [](const Rect& r, const Rect& s, int axis) {
        real a = r.lo[size_t(axis)].to_real(), b = r.hi[size_t(axis)].to_real();
        real c = s.lo[size_t(axis)].to_real(), d = s.hi[size_t(axis)].to_real();
        return [=](real u) {
            auto seg = [&](real z) {
                return std::max<real>(0, std::min(b, d + z) - std::max(a, c + z));
            };
            return seg(u) + seg(-u);
        };
    };
    auto f1 = phi(R, S, 0), f2 = phi(R, S, 1);
    std::vector<real> grid{0};
    for (int axis = 0; axis < 2; ++axis) {
        real a = R.lo[size_t(axis)].to_real(), b = R.hi[size_t(axis)].to_real();
        real c = S.lo[size_t(axis)].to_real(), d = S.hi[size_t(axis)].to_real();
        for (real v : {a - c, a - d, b - c, b - d}) grid.push_back(std::fabs(v));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    // Geometric refinement keeps the 1/u^2 weight resolvable: each positive
    // cell [s,t] is split at 2s, 4s, ... so the pole distance stays
    // comparable to the cell width.
    std::vector<real> refined;
    for (size_t j = 0; j + 1 < grid.size(); ++j) {
        refined.push_back(grid[j]);
        if (grid[j] > 0)
            for (real m = 2 * grid[j]; m < grid[j + 1]; m *= 2) refined.push_back(m);
    }
    refined.push_back(grid.back());
    grid = refined;

    CompensatedSum acc;
    const int n = 20;
    for (size_t j = 0; j + 1 < grid.size(); ++j) {
        real s = grid[j], t = grid[j + 1];
        if (!(t > s)) continue;
        // same-cell triangles via Duffy: v = s + (u - s) w keeps the
        // integrand bounded even when s = 0.
        real lo[2] = {s, 0}, hi[2] = {t, 1};
        acc.add(gl_integrate_box(
            [&](const real* p) {
                real u = p[0], w = p[1];
                real v = s + (u - s) * w;
                return f1(u) * f2(v) * (u - s) / (u * u);
            },
            lo, hi, 2, n));
        acc.add(gl_integrate_box(
            [&](const real* p) {
                real v = p[0], w = p[1];
                real u = s + (v - s) * w;
                return f1(u) * f2(v) * (v - s) / (v * v);
            },
            lo, hi, 2, n));
        // cross cells: the larger variable owns the kernel weight.
        for (size_t m = 0; m + 1 < j + 1; ++m) {
            real ms = grid[m], mt = grid[m + 1];
            if (!(mt > ms)) continue;
            real blo[2] = {s, ms}, bhi[2] = {t, mt};
            acc.add(gl_integrate_box(
                [&](const real* p) { return f1(p[0]) * f2(p[1]) / (p[0] * p[0]); },
                blo, bhi, 2, n));
            acc.add(gl_integrate_box(
                [&](const real* p) { return f1(p[1]) * f2(p[0]) / (p[0] * p[0]); },
                blo, bhi, 2, n));
        }
    }
    return acc.value();
}

} // namespace

TEST_CASE("Hilbert pairing closed form on reference pairs", "[kernel]") {
    Kernel h = Kernel::hilbert();
    real sep = h.pair_rect(iv(0, 1), iv(2, 3));
    REQUIRE(std::fabs(double(sep - (3 * kLn3 - 4 * kLn2))) < 1e-15);
    REQUIRE(std::fabs(double(sep - 0.5232481437645479L)) < 1e-15);

    // Antisymmetry of the kernel flips the slots.
    REQUIRE(std::fabs(double(h.pair_rect(iv(2, 3), iv(0, 1)) + sep)) < 1e-15);

    // Adjacent intervals: integrable log singularity.
    REQUIRE(std::fabs(double(h.pair_rect(iv(0, 1), iv(1, 2)) - 2 * kLn2)) < 1e-15);

    // Equal intervals cancel in the principal value.
    REQUIRE(h.pair_rect(iv(0, 1), iv(0, 1)) == 0.0L);

    // Overlapping pair, value derivable by splitting into the cases above:
    // tau([0,2),[1,3)) = 2ln2 + (3ln3-4ln2) + 0 + 2ln2 = 3ln3.
    REQUIRE(std::fabs(double(h.pair_rect(iv(0, 2), iv(1, 3)) - 3 * kLn3)) < 1e-14);
}

TEST_CASE("Hilbert pairing algebra on random pairs", "[kernel]") {
    Kernel h = Kernel::hilbert();
    for (std::uint64_t i = 0; i < 50; ++i) {
        Rect r = random_iv(1001, 2 * i), s = random_iv(1001, 2 * i + 1);
        real v = h.pair_rect(r, s);
        // Antisymmetry including overlapping pairs.
        REQUIRE(std::fabs(double(h.pair_rect(s, r) + v)) < 1e-12);
        // Translation invariance.
        DyadicRational dx(bigint(7), 2);
        REQUIRE(std::fabs(double(h.pair_rect(shift_rect(r, dx), shift_rect(s, dx)) - v)) < 1e-12);
        // Homogeneity: K of degree -1 in d=1 scales pairings by lambda.
        REQUIRE(std::fabs(double(h.pair_rect(scale_rect(r, 1), scale_rect(s, 1)) - 2 * v)) <
                1e-12);
        // Additivity when splitting the first slot at its midpoint.
        DyadicRational mid = (r.lo[0] + r.hi[0]) * DyadicRational(bigint(1), 1);
        Rect rl = r, rr = r;
        rl.hi[0] = mid;
        rr.lo[0] = mid;
        REQUIRE(std::fabs(double(h.pair_rect(rl, s) + h.pair_rect(rr, s) - v)) < 1e-12);
    }
}

TEST_CASE("closed forms agree with tensor Gauss quadrature", "[kernel]") {
    Kernel h = Kernel::hilbert();
    int checked = 0;
    for (std::uint64_t i = 0; checked < 100; ++i) {
        Rect r = random_iv(2002, 2 * i), s = random_iv(2002, 2 * i + 1);
        DyadicRational dist = rect_linf_distance(r, s);
        DyadicRational side = std::max(r.hi[0] - r.lo[0], s.hi[0] - s.lo[0]);
        if (dist.to_rational() * 2 < side.to_rational()) continue;
        ++checked;
        real cf = h.pair_rect(r, s);
        real q = pairing_quadrature(h, r, s, 1e-11L);
        REQUIRE(std::fabs(double((cf - q) / cf)) < 1e-8);
    }

    Kernel p2 = Kernel::power(2, 0.5L);
    checked = 0;
    for (std::uint64_t i = 0; checked < 30; ++i) {
        long long ax = (long long)(derive_u64(3003, 21, i) % 48) - 24;
        long long ay = (long long)(derive_u64(3003, 22, i) % 48) - 24;
        long long bx = (long long)(derive_u64(3003, 23, i) % 48) - 24;
        long long by = (long long)(derive_u64(3003, 24, i) % 48) - 24;
        long long w1 = 1 + (long long)(derive_u64(3003, 25, i) % 8);
        long long h1 = 1 + (long long)(derive_u64(3003, 26, i) % 8);
        long long w2 = 1 + (long long)(derive_u64(3003, 27, i) % 8);
        long long h2 = 1 + (long long)(derive_u64(3003, 28, i) % 8);
        Rect r = box2(ax, ax + w1, ay, ay + h1, 2);
        Rect s = box2(bx, bx + w2, by, by + h2, 2);
        DyadicRational dist = rect_linf_distance(r, s);
        long long side = std::max(std::max(w1, h1), std::max(w2, h2));
        if (dist.to_rational() * 2 < bigrat(side, 4)) continue;
        ++checked;
        real cf = p2.pair_rect(r, s);
        REQUIRE(std::fabs(double((cf - power2_reference(r, s)) / cf)) < 1e-9);
        if (checked <= 5) {
            // Raw 4-dim tensor Gauss smears the max-norm kink, so it only
            // validates the marginal reduction at modest accuracy.
            real q = pairing_quadrature(p2, r, s, 1e-11L);
            REQUIRE(std::fabs(double((cf - q) / cf)) < 2e-4);
        }
    }

    REQUIRE_THROWS_AS(pairing_quadrature(h, iv(0, 1), iv(1, 2)), Error);
}

TEST_CASE("power kernel in one dimension matches |Hilbert| off support", "[kernel]") {
    Kernel h = Kernel::hilbert();
    Kernel p1 = Kernel::power(1, 1.0L);
    for (std::uint64_t i = 0; i < 40; ++i) {
        Rect r = random_iv(4004, 2 * i), s = random_iv(4004, 2 * i + 1);
        if (!rect_intersect(r, s).empty()) continue;
        real hv = h.pair_rect(r, s);
        real pv = p1.pair_rect(r, s);
        REQUIRE(pv > 0);
        REQUIRE(std::fabs(double(pv - std::fabs(hv))) < 1e-12);
    }
    // Touching intervals: same integrable-singularity value 2 ln 2.
    REQUIRE(std::fabs(double(p1.pair_rect(iv(0, 1), iv(1, 2)) - 2 * kLn2)) < 1e-15);
}

TEST_CASE("power kernel d=2: separable oracle and structure", "[kernel]") {
    Kernel p2 = Kernel::power(2, 0.5L);

    // Axis 1 fully dominates axis 2 (u1 >= 3 > 1 >= u2), so the pairing
    // factors: [integral of phi1(u)/u^2] x [mass of phi2] = ln(16/15) * 1.
    real v = p2.pair_rect(box2(0, 1, 0, 1), box2(4, 5, 0, 1));
    REQUIRE(std::fabs(double(v - std::log(16.0L / 15.0L))) < 1e-15);
    REQUIRE(std::fabs(double(v - 0.06453852113757118L)) < 1e-15);

    // Symmetry in the slots, translation invariance, homogeneity lambda^d.
    for (std::uint64_t i = 0; i < 25; ++i) {
        long long ax = (long long)(derive_u64(5005, 31, i) % 24) - 12;
        long long ay = (long long)(derive_u64(5005, 32, i) % 24) - 12;
        long long w = 1 + (long long)(derive_u64(5005, 33, i) % 6);
        long long hh = 1 + (long long)(derive_u64(5005, 34, i) % 6);
        Rect r = box2(ax, ax + w, ay, ay + hh, 1);
        long long bx = ax + w + (long long)(derive_u64(5005, 35, i) % 8);
        Rect s = box2(bx, bx + 2, ay - 1, ay + 1, 1);
        if (!rect_intersect(r, s).empty()) continue;
        real v0 = p2.pair_rect(r, s);
        REQUIRE(std::fabs(double(p2.pair_rect(s, r) - v0)) < 1e-15);
        DyadicRational dx(bigint(-3), 2);
        REQUIRE(std::fabs(double(p2.pair_rect(shift_rect(r, dx, 1), shift_rect(s, dx, 1)) - v0)) <
                1e-13);
        REQUIRE(std::fabs(double(p2.pair_rect(scale_rect(r, 1), scale_rect(s, 1)) - 4 * v0)) <
                1e-12);
    }
}

TEST_CASE("power kernel d=2: touching pairs via separated exhaustion", "[kernel]") {
    Kernel p2 = Kernel::power(2, 0.5L);
    Rect r = box2(0, 1, 0, 1);

    // Edge-touching neighbour, decomposed into dyadic slabs receding from the
    // shared face.  Finite additivity must reproduce the direct value, and
    // the near-face residual must vanish (linearly up to a log).
    real direct = p2.pair_rect(r, box2(1, 2, 0, 1));
    CompensatedSum acc;
    for (int j = 0; j < 44; ++j) {
        Rect slab{{DyadicRational(1) + DyadicRational(bigint(1), unsigned(j + 1)),
                   DyadicRational(0)},
                  {DyadicRational(1) + DyadicRational(bigint(1), unsigned(j)), DyadicRational(1)}};
        real sv = p2.pair_rect(r, slab);
        acc.add(sv);
        if (j < 6) REQUIRE(std::fabs(double((sv - power2_reference(r, slab)) / sv)) < 1e-9);
    }
    Rect residual{{DyadicRational(1), DyadicRational(0)},
                  {DyadicRational(1) + DyadicRational(bigint(1), 44), DyadicRational(1)}};
    real res = p2.pair_rect(r, residual);
    REQUIRE(std::fabs(double(res)) < 1e-11);
    REQUIRE(std::fabs(double(direct - acc.value() - res)) < 1e-13);

    // Corner-touching neighbour is finite and positive.
    real corner = p2.pair_rect(r, box2(1, 2, 1, 2));
    REQUIRE(corner > 0);
    REQUIRE(corner < direct);
}

TEST_CASE("pairings reject overlap without a rule", "[kernel]") {
    Kernel p2 = Kernel::power(2, 0.5L);
    Kernel p1 = Kernel::power(1, 1.0L);
    Kernel h = Kernel::hilbert();
    REQUIRE_THROWS_AS(p2.pair_rect(box2(0, 2, 0, 2), box2(1, 3, 1, 3)), Error);
    REQUIRE_THROWS_AS(p1.pair_rect(iv(0, 2), iv(1, 3)), Error);
    REQUIRE_THROWS_AS(pairing_disjoint(h, iv(0, 2), iv(1, 3)), Error);
    // Touching is fine for pairing_disjoint: the intersection has measure 0.
    REQUIRE(std::fabs(double(pairing_disjoint(h, iv(0, 1), iv(1, 2)) - 2 * kLn2)) < 1e-15);
    REQUIRE(pairing_full(h, iv(0, 2), iv(1, 3)) > 0);
}

TEST_CASE("declared size and smoothness bounds hold on samples", "[kernel]") {
    BoundCheck hb = verify_standard_bounds(Kernel::hilbert(), 42, 10000);
    REQUIRE(hb.max_size_ratio <= 1.0L + 1e-12L);
    REQUIRE(hb.max_size_ratio > 0.99L);  // |K| |x-y| = 1 identically
    REQUIRE(hb.max_smooth_ratio <= 1.0L + 1e-9L);

    for (int d : {1, 2}) {
        BoundCheck pb = verify_standard_bounds(Kernel::power(d, 0.5L), 43, 10000);
        REQUIRE(pb.max_size_ratio <= 1.0L + 1e-12L);
        REQUIRE(pb.max_smooth_ratio <= 1.0L + 1e-9L);
        REQUIRE(pb.max_smooth_ratio > 0);
    }
}

TEST_CASE("Dini norms match closed forms", "[kernel]") {
    Modulus lin = Modulus::power(1.0L, 1.0L);
    REQUIRE(std::fabs(double(lin.dini_norm(0) - 0.5L)) < 1e-12);
    REQUIRE(std::fabs(double(lin.dini_norm(1) - (0.5L + 0.5L * kLn2))) < 1e-12);
    REQUIRE(std::fabs(double(lin.dini_norm(1) - 0.8465735902799727L)) < 1e-12);

    // s = 1/2 by parts: e^{-L} sqrt(L) + (sqrt(pi)/2) erfc(sqrt(L)), L = ln 2.
    real expect_half = std::exp(-kLn2) * std::sqrt(kLn2) +
                       std::sqrt(real(M_PI)) / 2 * std::erfc(std::sqrt(kLn2));
    REQUIRE(std::fabs(double(lin.dini_norm(0.5L) - expect_half)) < 1e-12);

    // Fractional exponent: integral of c u^{delta-1} du and its log variant.
    Modulus half = Modulus::power(1.0L, 0.5L);
    REQUIRE(std::fabs(double(half.dini_norm(0) - std::sqrt(2.0L))) < 1e-12);
    real expect1 = std::pow(0.5L, 0.5L) * (kLn2 / 0.5L + 1.0L / 0.25L);
    REQUIRE(std::fabs(double(half.dini_norm(1) - expect1)) < 1e-12);

    // Continuity in s.
    REQUIRE(std::fabs(double(lin.dini_norm(0.5L) - lin.dini_norm(0.5L + 1e-7L))) < 1e-6);

    REQUIRE(Modulus::zero().dini_norm(0) == 0.0L);
    REQUIRE(Modulus::zero()(0.25L) == 0.0L);
    REQUIRE_THROWS_AS(Modulus::power(1.0L, 0.0L), Error);
    REQUIRE_THROWS_AS(Modulus::power(-1.0L, 1.0L), Error);
}

TEST_CASE("tail sums of the shift series weights", "[kernel]") {
    Modulus lin = Modulus::power(1.0L, 1.0L);
    for (int K : {5, 10, 14}) {
        // Geometric closed forms: sum 2^{-k} = 2^{-K}, sum k 2^{-k} = (K+2)2^{-K}.
        real t0 = lin.tail_sum(K, 0);
        real t1 = lin.tail_sum(K, 1);
        real p = std::pow(0.5L, real(K));
        REQUIRE(std::fabs(double(t0 - p)) < 1e-16);
        REQUIRE(std::fabs(double(t1 - (K + 2) * p)) < 1e-15);
        // 1 <= 1 + log k <= 1 + k brackets the log-weighted tail.
        real tl = lin.tail_sum_log(K);
        REQUIRE(tl >= t0);
        REQUIRE(tl <= t0 + t1);
        // Direct partial-sum cross-check.
        CompensatedSum ref;
        for (int k = K + 1; k < K + 220; ++k)
            ref.add(std::pow(0.5L, real(k)) * (1 + std::log(real(k))));
        REQUIRE(std::fabs(double(tl - ref.value())) < 1e-15);
    }
    REQUIRE(Modulus::zero().tail_sum(3, 0.5L) == 0.0L);
}

TEST_CASE("Gauss rules integrate polynomials and smooth functions", "[kernel]") {
    REQUIRE(std::fabs(double(gl_integrate([](real u) { return u * u * u * u * u * u * u * u * u; },
                                          0.0L, 1.0L, 8) -
                             0.1L)) < 1e-17);
    REQUIRE(std::fabs(double(gl_integrate([](real u) { return std::sin(u); }, 0.0L,
                                          real(M_PI), 24) -
                             2.0L)) < 1e-15);
    real lo[2] = {0, 0}, hi[2] = {1, 1};
    real v = gl_integrate_box([](const real* p) { return p[0] * p[1]; }, lo, hi, 2, 6);
    REQUIRE(std::fabs(double(v - 0.25L)) < 1e-17);
}
