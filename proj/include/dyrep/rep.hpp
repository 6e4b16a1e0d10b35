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

#include "dyrep/bcr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <thread>
#include <utility>
#include <vector>

namespace dyrep {

// Reorganization of the window form tau_{a,b} by relative cube position.
// Per generation, the pair sum splits into a diagonal part (same cube:
// Haar multiplier plus two paraproducts) and banded parts indexed by
// gamma in {(0,1),(1,0),(1,1)} and a band k >= 2 grouping same-generation
// pairs with |z_P - z_Q|_inf / l(P) in (2^(k-3), 2^(k-2)].  Restricting a
// band to pairs whose first cube sits in the concentric half of its k-fold
// ancestor S ("good") and weighting by N_k turns it into a sum of localized
// block forms over shift cubes S; averaging over the lattice shift removes
// the restriction exactly, which is what the Monte-Carlo checks verify.

// Which factor of a banded pair carries a martingale difference: 1 keeps
// D on that side, 0 replaces it with the average mismatch between the two
// cubes.  (0,0) is the diagonal and is never a block.
using Gamma = std::pair<int, int>;

inline const std::array<Gamma, 3>& gamma_all() {
    static const std::array<Gamma, 3> g{{Gamma{0, 1}, Gamma{1, 0}, Gamma{1, 1}}};
    return g;
}

inline void check_gamma(const Gamma& c) {
    if ((c.first != 0 && c.first != 1) || (c.second != 0 && c.second != 1) ||
        (c.first == 0 && c.second == 0))
        throw Error("gamma: must be one of (0,1), (1,0), (1,1)");
}

// Normalization of a block form: `statement` uses N_k = 2^d / omega(2^-k)
// so that E[band] = omega(2^-k) E[blocks]; `proof` drops the 2^d, moving it
// into the averaging identity E[band] = 2^d omega(2^-k) E[blocks].
enum class ShiftScaling { statement, proof };

namespace detail {

// Per-generation view of a simple function: the cubes meeting its support
// in index order, their averages, and the martingale difference on the
// cubes where the function is not constant.
struct GenLayer {
    std::vector<DyadicCube> sup;
    std::vector<bigrat> avg;
    std::vector<int> diff_pos;  // index into diff, -1 where uniform
    std::vector<SimpleFunction> diff;

    std::optional<size_t> find(const DyadicCube& q) const {
        auto it = std::lower_bound(sup.begin(), sup.end(), q);
        if (it == sup.end() || !(*it == q)) return std::nullopt;
        return size_t(it - sup.begin());
    }
    bigrat avg_of(const DyadicCube& q) const {
        auto pos = find(q);
        return pos ? avg[*pos] : bigrat(0);
    }
};

inline GenLayer gen_layer(const SimpleFunction& f, int gen, const ShiftSequence& theta) {
    GenLayer L;
    L.sup = support_cubes(f, gen, theta);
    L.avg.reserve(L.sup.size());
    L.diff_pos.assign(L.sup.size(), -1);
    for (size_t i = 0; i < L.sup.size(); ++i) {
        L.avg.push_back(fn_average(f, L.sup[i], theta));
        if (!fn_uniform_on(f, cube_rect(L.sup[i], theta))) {
            L.diff_pos[i] = int(L.diff.size());
            L.diff.push_back(D_op(f, L.sup[i], theta));
        }
    }
    return L;
}

// Chebyshev index radii of band k: the pair (P, P + delta) lies in band k
// exactly when |delta|_inf is in [band_radius_lo(k), band_radius_hi(k)].
inline bigint band_radius_hi(int k) { return bigint(1) << (k - 2); }
inline bigint band_radius_lo(int k) {
    return k == 2 ? bigint(1) : (bigint(1) << (k - 3)) + 1;
}

// Realized rectangle of the index box [lo, hi] at a generation: half-open
// per axis, translated by the generation's shift offset.
inline Rect index_box_rect(int gen, const std::vector<bigint>& lo,
                           const std::vector<bigint>& hi, const ShiftSequence& theta) {
    Point off = shift_offset(theta, gen);
    DyadicRational len = DyadicRational::pow2(-gen);
    Rect r;
    r.lo.resize(lo.size());
    r.hi.resize(lo.size());
    for (size_t a = 0; a < lo.size(); ++a) {
        r.lo[a] = DyadicRational(lo[a]) * len + off[a];
        r.hi[a] = DyadicRational(hi[a] + 1) * len + off[a];
    }
    return r;
}

// Disjoint index boxes covering outer minus inner.  The inner box, when
// nonempty, must be contained in the outer one; two slabs are peeled per
// axis and the core shrinks onto the inner box.
template <typename Visit>
inline void peel_box_difference(std::vector<bigint> olo, std::vector<bigint> ohi,
                                const std::vector<bigint>& ilo,
                                const std::vector<bigint>& ihi, Visit&& visit) {
    size_t d = olo.size();
    for (size_t a = 0; a < d; ++a) {
        if (ilo[a] > ihi[a]) {
            visit(olo, ohi);
            return;
        }
    }
    for (size_t a = 0; a < d; ++a) {
        if (olo[a] < ilo[a]) {
            std::vector<bigint> lo2 = olo, hi2 = ohi;
            hi2[a] = ilo[a] - 1;
            visit(lo2, hi2);
        }
        if (ihi[a] < ohi[a]) {
            std::vector<bigint> lo2 = olo, hi2 = ohi;
            lo2[a] = ihi[a] + 1;
            visit(lo2, hi2);
        }
        olo[a] = ilo[a];
        ohi[a] = ihi[a];
    }
}

// Shift bits (gen-k, gen] as a child-lattice offset per axis; subtracting it
// aligns raw indices with the k-fold ancestor lattice (see cube_ancestor).
inline std::vector<bigint> path_shift(int d, int gen, int k, const ShiftSequence& theta) {
    std::vector<bigint> c(size_t(d), bigint(0));
    for (int axis = 0; axis < d; ++axis)
        for (int j = gen - k + 1; j <= gen; ++j)
            c[size_t(axis)] += bigint(theta.bit(j, axis)) << (gen - j);
    return c;
}

// Good index box of one ancestor cell: cubes in the concentric half.
inline void good_box_of_cell(const std::vector<bigint>& cell, int k,
                             const std::vector<bigint>& shift,
                             std::vector<bigint>& glo, std::vector<bigint>& ghi) {
    bigint q = bigint(1) << (k - 2);
    size_t d = cell.size();
    glo.resize(d);
    ghi.resize(d);
    for (size_t a = 0; a < d; ++a) {
        bigint base = (cell[a] << k) + shift[a];
        glo[a] = base + q;
        ghi[a] = base + 3 * q - 1;
    }
}

// Visit the (unclipped) good boxes of every k-ancestor cell meeting the
// index box [blo, bhi] at generation gen.
template <typename Visit>
inline void visit_good_cells(int gen, int k, const ShiftSequence& theta,
                             const std::vector<bigint>& blo,
                             const std::vector<bigint>& bhi, Visit&& visit) {
    size_t d = blo.size();
    std::vector<bigint> shift = path_shift(int(d), gen, k, theta);
    std::vector<bigint> clo(d), chi(d);
    for (size_t a = 0; a < d; ++a) {
        clo[a] = floor_div_pow2(blo[a] - shift[a], k);
        chi[a] = floor_div_pow2(bhi[a] - shift[a], k);
    }
    std::vector<bigint> cur = clo;
    for (;;) {
        std::vector<bigint> glo, ghi;
        good_box_of_cell(cur, k, shift, glo, ghi);
        visit(glo, ghi);
        size_t a = 0;
        while (a < d) {
            cur[a] += 1;
            if (cur[a] <= chi[a]) break;
            cur[a] = clo[a];
            ++a;
        }
        if (a == d) break;
    }
}

inline bool clip_box(std::vector<bigint>& lo, std::vector<bigint>& hi,
                     const std::vector<bigint>& blo, const std::vector<bigint>& bhi) {
    for (size_t a = 0; a < lo.size(); ++a) {
        if (blo[a] > lo[a]) lo[a] = blo[a];
        if (bhi[a] < hi[a]) hi[a] = bhi[a];
        if (lo[a] > hi[a]) return false;
    }
    return true;
}

inline void check_inputs(const WeakForm& form, const SimpleFunction& f,
                         const SimpleFunction& g, const ShiftSequence& theta) {
    if (f.d != g.d || f.d != form.kernel().dim() || f.d != theta.dim())
        throw Error("rep: dimension mismatch");
}

}  // namespace detail

// Cubes of one generation where the function fails to be constant, i.e.
// where its martingale difference does not vanish.
inline std::vector<DyadicCube> nonuniform_cubes(const SimpleFunction& f, int gen,
                                                const ShiftSequence& theta) {
    std::vector<DyadicCube> out;
    for (const DyadicCube& q : support_cubes(f, gen, theta))
        if (!fn_uniform_on(f, cube_rect(q, theta))) out.push_back(q);
    return out;
}

// Upper bound on the band index of any same-generation pair of cubes that
// meet supp f and supp g respectively, over generations below b.  Whenever
// no cube meets both supports, every block coefficient couples the two
// supports directly, so blocks with k > rep_horizon vanish identically.
inline int rep_horizon(const SimpleFunction& f, const SimpleFunction& g, int b) {
    auto bf = fn_bbox(f);
    auto bg = fn_bbox(g);
    if (!bf || !bg) return 1;
    DyadicRational diam(0);
    for (size_t a = 0; a < bf->lo.size(); ++a) {
        DyadicRational lo = bf->lo[a] < bg->lo[a] ? bf->lo[a] : bg->lo[a];
        DyadicRational hi = bg->hi[a] < bf->hi[a] ? bf->hi[a] : bg->hi[a];
        if (diam < hi - lo) diam = hi - lo;
    }
    if (!(DyadicRational(0) < diam)) return 2;
    // index distance at the finest generation: floor(diam 2^(b-1)) + 1
    bigint dmax = diam.floor_scaled(b - 1) + 1;
    return 2 + ceil_log2(dmax);
}

// Diagonal model operators over generations [a, b).

inline real haar_multiplier(const WeakForm& form, const SimpleFunction& f,
                            const SimpleFunction& g, int a, int b,
                            const ShiftSequence& theta) {
    detail::check_inputs(form, f, g, theta);
    if (a > b) throw Error("haar_multiplier: a must not exceed b");
    CompensatedSum acc;
    for (int i = a; i < b; ++i) {
        detail::GenLayer Lf = detail::gen_layer(f, i, theta);
        detail::GenLayer Lg = detail::gen_layer(g, i, theta);
        for (size_t p = 0; p < Lf.sup.size(); ++p) {
            if (Lf.diff_pos[p] < 0) continue;
            auto q = Lg.find(Lf.sup[p]);
            if (!q || Lg.diff_pos[*q] < 0) continue;
            acc.add(form.tau(Lf.diff[size_t(Lf.diff_pos[p])], Lg.diff[size_t(Lg.diff_pos[*q])]));
        }
    }
    return acc.value();
}

// sum_P <f>_P tau(1, D_P g): the coefficient pairs the renormalized constant
// functional against the difference on P, so only cubes where g is not
// constant and f has a nonzero average contribute.
inline real paraproduct(const WeakForm& form, const SimpleFunction& f,
                        const SimpleFunction& g, int a, int b,
                        const ShiftSequence& theta, real tol = 1e-9L) {
    detail::check_inputs(form, f, g, theta);
    if (a > b) throw Error("paraproduct: a must not exceed b");
    CompensatedSum acc;
    for (int i = a; i < b; ++i) {
        for (const DyadicCube& p : nonuniform_cubes(g, i, theta)) {
            bigrat fp = fn_average(f, p, theta);
            if (fp == 0) continue;
            acc.add(to_real(fp) * form.tau_one(D_op(g, p, theta), cube_rect(p, theta), tol));
        }
    }
    return acc.value();
}

// sum_P tau(D_P f, 1) <g>_P, the adjoint-side paraproduct.
inline real paraproduct_adj(const WeakForm& form, const SimpleFunction& f,
                            const SimpleFunction& g, int a, int b,
                            const ShiftSequence& theta, real tol = 1e-9L) {
    detail::check_inputs(form, f, g, theta);
    if (a > b) throw Error("paraproduct_adj: a must not exceed b");
    CompensatedSum acc;
    for (int i = a; i < b; ++i) {
        for (const DyadicCube& p : nonuniform_cubes(f, i, theta)) {
            bigrat gp = fn_average(g, p, theta);
            if (gp == 0) continue;
            acc.add(form.tau_one_left(D_op(f, p, theta), cube_rect(p, theta), tol) * to_real(gp));
        }
    }
    return acc.value();
}

// Single-pass diagonal part: Haar multiplier plus both paraproducts, one
// evaluation per (theta, P).
inline real diag_term(const WeakForm& form, const SimpleFunction& f,
                      const SimpleFunction& g, int a, int b,
                      const ShiftSequence& theta, real tol = 1e-9L) {
    detail::check_inputs(form, f, g, theta);
    if (a > b) throw Error("diag_term: a must not exceed b");
    CompensatedSum acc;
    for (int i = a; i < b; ++i) {
        detail::GenLayer Lf = detail::gen_layer(f, i, theta);
        detail::GenLayer Lg = detail::gen_layer(g, i, theta);
        // union of the two nonuniform cube lists, both in index order
        size_t pf = 0, pg = 0;
        while (pf < Lf.sup.size() || pg < Lg.sup.size()) {
            while (pf < Lf.sup.size() && Lf.diff_pos[pf] < 0) ++pf;
            while (pg < Lg.sup.size() && Lg.diff_pos[pg] < 0) ++pg;
            const SimpleFunction* df = nullptr;
            const SimpleFunction* dg = nullptr;
            DyadicCube cube;
            if (pf < Lf.sup.size() && pg < Lg.sup.size() && Lf.sup[pf] == Lg.sup[pg]) {
                cube = Lf.sup[pf];
                df = &Lf.diff[size_t(Lf.diff_pos[pf])];
                dg = &Lg.diff[size_t(Lg.diff_pos[pg])];
                ++pf, ++pg;
            } else if (pg >= Lg.sup.size() ||
                       (pf < Lf.sup.size() && Lf.sup[pf] < Lg.sup[pg])) {
                if (pf >= Lf.sup.size()) break;
                cube = Lf.sup[pf];
                df = &Lf.diff[size_t(Lf.diff_pos[pf])];
                ++pf;
            } else {
                cube = Lg.sup[pg];
                dg = &Lg.diff[size_t(Lg.diff_pos[pg])];
                ++pg;
            }
            Rect pr = cube_rect(cube, theta);
            if (df && dg) acc.add(form.tau(*df, *dg));
            if (dg) {
                bigrat fp = fn_average(f, cube, theta);
                if (fp != 0) acc.add(to_real(fp) * form.tau_one(*dg, pr, tol));
            }
            if (df) {
                bigrat gp = fn_average(g, cube, theta);
                if (gp != 0) acc.add(form.tau_one_left(*df, pr, tol) * to_real(gp));
            }
        }
    }
    return acc.value();
}

// One banded part: same-generation pairs (P, Q) over generations [a, b)
// whose index distance falls in band k.  The P = Q diagonal is structurally
// excluded (band indices start at 2, ring radii at 1).  Far rings are
// grouped into exactly tiled index slabs so the cost tracks the supports,
// not the ring cardinality.
inline real offdiag_block(const WeakForm& form, const SimpleFunction& f,
                          const SimpleFunction& g, int a, int b, const Gamma& gamma,
                          int k, const ShiftSequence& theta) {
    detail::check_inputs(form, f, g, theta);
    check_gamma(gamma);
    if (a > b) throw Error("offdiag_block: a must not exceed b");
    if (k < 2) throw Error("offdiag_block: band index must be >= 2");
    bigint rhi = detail::band_radius_hi(k);
    bigint rlo = detail::band_radius_lo(k);
    CompensatedSum acc;
    for (int i = a; i < b; ++i) {
        detail::GenLayer Lf = detail::gen_layer(f, i, theta);
        detail::GenLayer Lg = detail::gen_layer(g, i, theta);
        if (gamma == Gamma{1, 1}) {
            for (size_t p = 0; p < Lf.sup.size(); ++p) {
                if (Lf.diff_pos[p] < 0) continue;
                const SimpleFunction& df = Lf.diff[size_t(Lf.diff_pos[p])];
                for (size_t q = 0; q < Lg.sup.size(); ++q) {
                    if (Lg.diff_pos[q] < 0) continue;
                    if (band_index(Lf.sup[p], Lg.sup[q]) != k) continue;
                    acc.add(form.tau(df, Lg.diff[size_t(Lg.diff_pos[q])]));
                }
            }
        } else if (gamma == Gamma{1, 0}) {
            // tau(D_P f, (<g>_Q - <g>_P) 1_Q) over the band ring of P; the
            // <g>_Q part is sparse, the -<g>_P part sums over the full ring.
            for (size_t p = 0; p < Lf.sup.size(); ++p) {
                if (Lf.diff_pos[p] < 0) continue;
                const SimpleFunction& df = Lf.diff[size_t(Lf.diff_pos[p])];
                const DyadicCube& P = Lf.sup[p];
                for (size_t q = 0; q < Lg.sup.size(); ++q) {
                    if (Lg.avg[q] == 0) continue;
                    if (band_index(P, Lg.sup[q]) != k) continue;
                    acc.add(to_real(Lg.avg[q]) *
                            form.tau(df, indicator(cube_rect(Lg.sup[q], theta))));
                }
                bigrat gp = Lg.avg_of(P);
                if (gp == 0) continue;
                std::vector<bigint> olo(P.index), ohi(P.index), ilo(P.index), ihi(P.index);
                for (size_t ax = 0; ax < olo.size(); ++ax) {
                    olo[ax] -= rhi;
                    ohi[ax] += rhi;
                    ilo[ax] -= rlo - 1;
                    ihi[ax] += rlo - 1;
                }
                real c = to_real(gp);
                detail::peel_box_difference(
                    olo, ohi, ilo, ihi,
                    [&](const std::vector<bigint>& lo2, const std::vector<bigint>& hi2) {
                        acc.add(-c * form.tau(df, indicator(detail::index_box_rect(
                                                  i, lo2, hi2, theta))));
                    });
            }
        } else {
            // mirrored: tau((<f>_P - <f>_Q) 1_P, D_Q g) over the ring of Q
            for (size_t q = 0; q < Lg.sup.size(); ++q) {
                if (Lg.diff_pos[q] < 0) continue;
                const SimpleFunction& dg = Lg.diff[size_t(Lg.diff_pos[q])];
                const DyadicCube& Q = Lg.sup[q];
                for (size_t p = 0; p < Lf.sup.size(); ++p) {
                    if (Lf.avg[p] == 0) continue;
                    if (band_index(Lf.sup[p], Q) != k) continue;
                    acc.add(to_real(Lf.avg[p]) *
                            form.tau(indicator(cube_rect(Lf.sup[p], theta)), dg));
                }
                bigrat fq = Lf.avg_of(Q);
                if (fq == 0) continue;
                std::vector<bigint> olo(Q.index), ohi(Q.index), ilo(Q.index), ihi(Q.index);
                for (size_t ax = 0; ax < olo.size(); ++ax) {
                    olo[ax] -= rhi;
                    ohi[ax] += rhi;
                    ilo[ax] -= rlo - 1;
                    ihi[ax] += rlo - 1;
                }
                real c = to_real(fq);
                detail::peel_box_difference(
                    olo, ohi, ilo, ihi,
                    [&](const std::vector<bigint>& lo2, const std::vector<bigint>& hi2) {
                        acc.add(-c * form.tau(indicator(detail::index_box_rect(
                                                  i, lo2, hi2, theta)),
                                              dg));
                    });
            }
        }
    }
    return acc.value();
}

// Localized block form on one shift cube S: band-k pairs at generation
// gen(S) + k whose first cube is good and descends from S, normalized by
// N_k.  Goodness of the first cube forces the whole band ring inside S, so
// the second cube shares the ancestor; this is asserted, not assumed.
inline real shift_form(const WeakForm& form, const SimpleFunction& f,
                       const SimpleFunction& g, const DyadicCube& S, const Gamma& gamma,
                       int k, const ShiftSequence& theta,
                       ShiftScaling scaling = ShiftScaling::statement) {
    detail::check_inputs(form, f, g, theta);
    check_gamma(gamma);
    if (k < 2) throw Error("shift_form: band index must be >= 2");
    real omega_k = form.kernel().modulus()(std::ldexp(1.0L, -k));
    if (!(omega_k > 0)) throw Error("shift_form: degenerate modulus");
    const int d = f.d;
    real n_k = (scaling == ShiftScaling::statement ? std::ldexp(1.0L, d) : 1.0L) / omega_k;
    const int i = S.gen + k;
    bigint rhi = detail::band_radius_hi(k);
    bigint rlo = detail::band_radius_lo(k);
    Rect srect = cube_rect(S, theta);

    auto assert_in_s = [&](const DyadicCube& q, const char* side) {
        if (!(cube_ancestor(q, k, theta) == S))
            throw Error(std::string("shift_form: ") + side +
                        " cube escapes the shift cube");
    };
    auto assert_rect_in_s = [&](const Rect& r) {
        for (size_t ax = 0; ax < r.lo.size(); ++ax)
            if (r.lo[ax] < srect.lo[ax] || srect.hi[ax] < r.hi[ax])
                throw Error("shift_form: band ring escapes the shift cube");
    };

    detail::GenLayer Lf = detail::gen_layer(f, i, theta);
    detail::GenLayer Lg = detail::gen_layer(g, i, theta);
    CompensatedSum acc;
    if (gamma == Gamma{1, 1}) {
        for (size_t p = 0; p < Lf.sup.size(); ++p) {
            if (Lf.diff_pos[p] < 0) continue;
            const DyadicCube& P = Lf.sup[p];
            if (!(cube_ancestor(P, k, theta) == S) || !is_good(P, k, theta)) continue;
            const SimpleFunction& df = Lf.diff[size_t(Lf.diff_pos[p])];
            for (size_t q = 0; q < Lg.sup.size(); ++q) {
                if (Lg.diff_pos[q] < 0) continue;
                if (band_index(P, Lg.sup[q]) != k) continue;
                assert_in_s(Lg.sup[q], "second");
                acc.add(form.tau(df, Lg.diff[size_t(Lg.diff_pos[q])]));
            }
        }
    } else if (gamma == Gamma{1, 0}) {
        for (size_t p = 0; p < Lf.sup.size(); ++p) {
            if (Lf.diff_pos[p] < 0) continue;
            const DyadicCube& P = Lf.sup[p];
            if (!(cube_ancestor(P, k, theta) == S) || !is_good(P, k, theta)) continue;
            const SimpleFunction& df = Lf.diff[size_t(Lf.diff_pos[p])];
            for (size_t q = 0; q < Lg.sup.size(); ++q) {
                if (Lg.avg[q] == 0) continue;
                if (band_index(P, Lg.sup[q]) != k) continue;
                assert_in_s(Lg.sup[q], "second");
                acc.add(to_real(Lg.avg[q]) *
                        form.tau(df, indicator(cube_rect(Lg.sup[q], theta))));
            }
            bigrat gp = Lg.avg_of(P);
            if (gp == 0) continue;
            std::vector<bigint> olo(P.index), ohi(P.index), ilo(P.index), ihi(P.index);
            for (size_t ax = 0; ax < olo.size(); ++ax) {
                olo[ax] -= rhi;
                ohi[ax] += rhi;
                ilo[ax] -= rlo - 1;
                ihi[ax] += rlo - 1;
            }
            real c = to_real(gp);
            detail::peel_box_difference(
                olo, ohi, ilo, ihi,
                [&](const std::vector<bigint>& lo2, const std::vector<bigint>& hi2) {
                    Rect r = detail::index_box_rect(i, lo2, hi2, theta);
                    assert_rect_in_s(r);
                    acc.add(-c * form.tau(df, indicator(r)));
                });
        }
    } else {
        // first (good) cube runs over the band ring of each nonuniform Q;
        // the good cubes descending from S form one index box, so the far
        // part reduces to clipped box differences.
        std::vector<bigint> shift = detail::path_shift(d, i, k, theta);
        std::vector<bigint> glo, ghi;
        detail::good_box_of_cell(S.index, k, shift, glo, ghi);
        for (size_t q = 0; q < Lg.sup.size(); ++q) {
            if (Lg.diff_pos[q] < 0) continue;
            const DyadicCube& Q = Lg.sup[q];
            if (!(cube_ancestor(Q, k, theta) == S)) continue;
            const SimpleFunction& dg = Lg.diff[size_t(Lg.diff_pos[q])];
            for (size_t p = 0; p < Lf.sup.size(); ++p) {
                if (Lf.avg[p] == 0) continue;
                const DyadicCube& P = Lf.sup[p];
                if (band_index(P, Q) != k || !is_good(P, k, theta)) continue;
                assert_in_s(P, "first");
                acc.add(to_real(Lf.avg[p]) *
                        form.tau(indicator(cube_rect(P, theta)), dg));
            }
            bigrat fq = Lf.avg_of(Q);
            if (fq == 0) continue;
            std::vector<bigint> blo(Q.index), bhi(Q.index), slo(Q.index), shi(Q.index);
            for (size_t ax = 0; ax < blo.size(); ++ax) {
                blo[ax] -= rhi;
                bhi[ax] += rhi;
                slo[ax] -= rlo - 1;
                shi[ax] += rlo - 1;
            }
            std::vector<bigint> b1lo = glo, b1hi = ghi;
            if (!detail::clip_box(b1lo, b1hi, blo, bhi)) continue;
            std::vector<bigint> b2lo = glo, b2hi = ghi;
            bool inner = detail::clip_box(b2lo, b2hi, slo, shi);
            if (!inner) {
                // force a strictly empty inner box; copying the outer corners
                // would fake a one-cube hole whenever b1 has width one
                b2lo = b1lo;
                b2hi = b1lo;
                b2hi[0] -= 1;
            }
            real c = to_real(fq);
            detail::peel_box_difference(
                b1lo, b1hi, b2lo, b2hi,
                [&](const std::vector<bigint>& lo2, const std::vector<bigint>& hi2) {
                    Rect r = detail::index_box_rect(i, lo2, hi2, theta);
                    assert_rect_in_s(r);
                    acc.add(-c * form.tau(indicator(r), dg));
                });
        }
    }
    return n_k * acc.value();
}

// All block forms of one (gamma, k) over the shift cubes with band pairs at
// generations [a, b), i.e. S in generations [a-k, b-k).
struct ShiftBlock {
    Gamma gamma{1, 1};
    int k = 2;
    std::map<DyadicCube, real> values;
    real total = 0;
};

inline ShiftBlock shift_blocks(const WeakForm& form, const SimpleFunction& f,
                               const SimpleFunction& g, const Gamma& gamma, int k,
                               int a, int b, const ShiftSequence& theta,
                               ShiftScaling scaling = ShiftScaling::statement) {
    detail::check_inputs(form, f, g, theta);
    check_gamma(gamma);
    if (a > b) throw Error("shift_blocks: a must not exceed b");
    if (k < 2) throw Error("shift_blocks: band index must be >= 2");
    ShiftBlock blk;
    blk.gamma = gamma;
    blk.k = k;
    // every contributing pair has its good first cube on the f side for
    // gamma_1 = 1 and on the ring of a nonuniform g cube otherwise; either
    // way the shift cube is the k-fold ancestor of a nonuniform cube.
    const SimpleFunction& anchor = gamma == Gamma{0, 1} ? g : f;
    std::set<DyadicCube> shifts;
    for (int i = a; i < b; ++i)
        for (const DyadicCube& p : nonuniform_cubes(anchor, i, theta))
            shifts.insert(cube_ancestor(p, k, theta));
    CompensatedSum total;
    for (const DyadicCube& s : shifts) {
        real v = shift_form(form, f, g, s, gamma, k, theta, scaling);
        blk.values.emplace(s, v);
        total.add(v);
    }
    blk.total = total.value();
    return blk;
}

inline real shift_sum(const WeakForm& form, const SimpleFunction& f,
                      const SimpleFunction& g, const Gamma& gamma, int k, int a, int b,
                      const ShiftSequence& theta,
                      ShiftScaling scaling = ShiftScaling::statement) {
    return shift_blocks(form, f, g, gamma, k, a, b, theta, scaling).total;
}

// Size diagnostic of one (1,1) block: |value| over <|f|>_S int_S |g|.
// Logged, never asserted; a degenerate denominator yields nothing.
inline std::optional<real> shift_size_ratio(const WeakForm& form, const SimpleFunction& f,
                                            const SimpleFunction& g, const DyadicCube& S,
                                            int k, const ShiftSequence& theta,
                                            ShiftScaling scaling = ShiftScaling::statement) {
    real v = shift_form(form, f, g, S, Gamma{1, 1}, k, theta, scaling);
    Rect srect = cube_rect(S, theta);
    bigrat favg = fn_average(fn_abs(fn_normalized(f)), S, theta);
    bigrat gint = fn_integral(fn_restrict(fn_abs(fn_normalized(g)), srect));
    real denom = to_real(favg) * to_real(gint);
    if (!(denom > 0)) return std::nullopt;
    return std::fabs(v) / denom;
}

// Monte-Carlo average over the lattice shift.  Sample i draws its own
// shift from derive_u64(seed, 11, i), so the estimate is independent of
// the thread count: values land in an index-addressed buffer and both
// reduction passes run in index order.
struct McEstimate {
    real mean = 0;
    real std_error = 0;
    long long samples = 0;
    std::uint64_t seed = 0;
};

inline McEstimate mc_expect(const std::function<real(const ShiftSequence&)>& fn, int d,
                            int j_lo, int j_hi, std::uint64_t seed, long long samples,
                            int threads = 1) {
    if (samples <= 0) throw Error("mc_expect: samples must be positive");
    if (threads < 1) threads = 1;
    if (threads > samples) threads = int(samples);
    std::vector<real> vals(size_t(samples), 0);
    auto run = [&](long long lo, long long hi, std::exception_ptr& err) {
        try {
            for (long long i = lo; i < hi; ++i) {
                ShiftSequence theta =
                    sample_theta(d, j_lo, j_hi, derive_u64(seed, 11, std::uint64_t(i)));
                vals[size_t(i)] = fn(theta);
            }
        } catch (...) {
            err = std::current_exception();
        }
    };
    std::vector<std::exception_ptr> errs(static_cast<size_t>(threads));
    if (threads == 1) {
        run(0, samples, errs[0]);
    } else {
        std::vector<std::thread> pool;
        long long chunk = (samples + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            long long lo = t * chunk;
            long long hi = std::min(samples, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run, lo, hi, std::ref(errs[size_t(t)]));
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    CompensatedSum sum;
    for (real v : vals) sum.add(v);
    McEstimate est;
    est.samples = samples;
    est.seed = seed;
    est.mean = sum.value() / real(samples);
    if (samples > 1) {
        CompensatedSum sq;
        for (real v : vals) sq.add((v - est.mean) * (v - est.mean));
        est.std_error = std::sqrt(sq.value() / real(samples - 1) / real(samples));
    }
    return est;
}

// Empirical goodness frequency and its independence from position.  Cubes
// at generation 0 with uniformly drawn indices; the exact frequency is
// 2^-d for every k >= 2, and the indicator is uncorrelated with position.
struct GoodnessStats {
    int d = 0, k = 0;
    long long samples = 0;
    real freq = 0;
    real freq_expected = 0;
    real freq_sigma = 0;  // binomial sigma of the mean
    real corr = 0;
    real corr_sigma = 0;
    bool pass = false;
};

inline GoodnessStats goodness_stats(int d, int k, long long samples, std::uint64_t seed) {
    if (d < 1) throw Error("goodness_stats: dimension must be positive");
    if (k < 2) throw Error("goodness_stats: requires k >= 2");
    if (samples < 2) throw Error("goodness_stats: needs at least two samples");
    GoodnessStats st;
    st.d = d;
    st.k = k;
    st.samples = samples;
    std::vector<double> pos(static_cast<size_t>(samples), 0.0);
    std::vector<double> good(static_cast<size_t>(samples), 0.0);
    const std::int64_t span = std::int64_t(1) << 20;
    for (long long i = 0; i < samples; ++i) {
        std::uint64_t si = derive_u64(seed, 21, std::uint64_t(i));
        ShiftSequence theta = sample_theta(d, -k - 1, 0, derive_u64(si, 1, 0));
        DyadicCube q;
        q.gen = 0;
        q.index.resize(size_t(d));
        for (int ax = 0; ax < d; ++ax) {
            std::uint64_t u = derive_u64(si, 2, std::uint64_t(ax));
            q.index[size_t(ax)] = bigint(std::int64_t(u % (2 * std::uint64_t(span))) - span);
        }
        pos[size_t(i)] = double(q.index[0].convert_to<std::int64_t>());
        good[size_t(i)] = is_good(q, k, theta) ? 1.0 : 0.0;
    }
    CompensatedSum s;
    for (double v : good) s.add(real(v));
    st.freq = s.value() / real(samples);
    st.freq_expected = std::ldexp(1.0L, -d);
    st.freq_sigma =
        std::sqrt(st.freq_expected * (1 - st.freq_expected) / real(samples));
    st.corr = real(pearson(pos, good));
    st.corr_sigma = 1 / std::sqrt(real(samples));
    st.pass = std::fabs(st.freq - st.freq_expected) <= 3 * st.freq_sigma &&
              std::fabs(st.corr) <= 3 * st.corr_sigma;
    return st;
}

// Two-sided Monte-Carlo test of the averaging identity
//   E[band part] = scale * omega(2^-k) * E[block sum]
// with independent shift streams on both sides; scale is 1 under the
// statement normalization and 2^d under the proof normalization.
struct AveragingReport {
    Gamma gamma{1, 1};
    int k = 2;
    real omega_k = 0;
    real scale = 1;
    McEstimate lhs;  // E tau^(gamma,k)
    McEstimate rhs;  // E sum_S block
    real gap = 0;
    real tol = 0;
    bool pass = false;
};

inline AveragingReport averaging_check(const WeakForm& form, const SimpleFunction& f,
                                       const SimpleFunction& g, const Gamma& gamma, int k,
                                       int a, int b, std::uint64_t seed, long long samples,
                                       int threads = 1,
                                       ShiftScaling scaling = ShiftScaling::statement) {
    check_gamma(gamma);
    if (k < 2) throw Error("averaging_check: band index must be >= 2");
    if (a > b) throw Error("averaging_check: a must not exceed b");
    AveragingReport rep;
    rep.gamma = gamma;
    rep.k = k;
    rep.omega_k = form.kernel().modulus()(std::ldexp(1.0L, -k));
    rep.scale = scaling == ShiftScaling::statement ? 1.0L : std::ldexp(1.0L, f.d);
    int lo = default_window_lo(a, k);
    int hi = default_window_hi(b);
    rep.lhs = mc_expect(
        [&](const ShiftSequence& theta) {
            return offdiag_block(form, f, g, a, b, gamma, k, theta);
        },
        f.d, lo, hi, derive_u64(seed, 1, 0), samples, threads);
    rep.rhs = mc_expect(
        [&](const ShiftSequence& theta) {
            return shift_sum(form, f, g, gamma, k, a, b, theta, scaling);
        },
        f.d, lo, hi, derive_u64(seed, 2, 0), samples, threads);
    real w = rep.scale * rep.omega_k;
    rep.gap = std::fabs(rep.lhs.mean - w * rep.rhs.mean);
    rep.tol = 3 * std::sqrt(rep.lhs.std_error * rep.lhs.std_error +
                            w * w * rep.rhs.std_error * rep.rhs.std_error);
    rep.pass = rep.gap <= rep.tol;
    return rep;
}

// Remaining band weight after truncating the block series at k_max.
inline real k_tail_budget(const Modulus& om, int k_max) {
    CompensatedSum s;
    for (int k = k_max + 1; k <= k_max + 4000; ++k) {
        real w = om(std::ldexp(1.0L, -k));
        if (w == 0) break;
        real term = w * (1 + std::log(real(k)));
        s.add(term);
        if (term < 1e-24L * (std::fabs(s.value()) + 1e-300L)) break;
    }
    return s.value();
}

// Same tail with the k^(1 - 1/max(p, p')) weight of the L^p block bounds.
inline real k_tail_budget_p(const Modulus& om, int k_max, double p) {
    if (!(p > 1)) throw Error("k_tail_budget_p: requires p > 1");
    double pc = p / (p - 1);
    real expo = real(1) - real(1) / real(std::max(p, pc));
    CompensatedSum s;
    for (int k = k_max + 1; k <= k_max + 4000; ++k) {
        real w = om(std::ldexp(1.0L, -k));
        if (w == 0) break;
        real term = w * std::pow(real(k), expo);
        s.add(term);
        if (term < 1e-24L * (std::fabs(s.value()) + 1e-300L)) break;
    }
    return s.value();
}

// One draw of the randomized representation: diagonal part plus every band
// k <= k_max with the good-cube restriction and the constant per-pair
// weight 2^d = omega(2^-k) N_k.  Equals diag + sum_k omega(2^-k) *
// shift_sum(k) for the same shift; grouping per pair here avoids the
// per-cube ancestor bookkeeping inside the sampling loop.
inline real rep_sample(const WeakForm& form, const SimpleFunction& f,
                       const SimpleFunction& g, int a, int b, int k_max,
                       const ShiftSequence& theta, real tol = 1e-9L) {
    detail::check_inputs(form, f, g, theta);
    if (a > b) throw Error("rep_sample: a must not exceed b");
    real two_d = std::ldexp(1.0L, f.d);
    CompensatedSum acc;
    acc.add(diag_term(form, f, g, a, b, theta, tol));
    for (int i = a; i < b; ++i) {
        detail::GenLayer Lf = detail::gen_layer(f, i, theta);
        detail::GenLayer Lg = detail::gen_layer(g, i, theta);
        // both-difference pairs
        for (size_t p = 0; p < Lf.sup.size(); ++p) {
            if (Lf.diff_pos[p] < 0) continue;
            const DyadicCube& P = Lf.sup[p];
            const SimpleFunction& df = Lf.diff[size_t(Lf.diff_pos[p])];
            for (size_t q = 0; q < Lg.sup.size(); ++q) {
                if (Lg.diff_pos[q] < 0) continue;
                int k = band_index(P, Lg.sup[q]);
                if (k < 2 || k > k_max || !is_good(P, k, theta)) continue;
                acc.add(two_d * form.tau(df, Lg.diff[size_t(Lg.diff_pos[q])]));
            }
        }
        // difference against average mismatch, good cube on the f side
        for (size_t p = 0; p < Lf.sup.size(); ++p) {
            if (Lf.diff_pos[p] < 0) continue;
            const DyadicCube& P = Lf.sup[p];
            const SimpleFunction& df = Lf.diff[size_t(Lf.diff_pos[p])];
            for (size_t q = 0; q < Lg.sup.size(); ++q) {
                if (Lg.avg[q] == 0) continue;
                int k = band_index(P, Lg.sup[q]);
                if (k < 2 || k > k_max || !is_good(P, k, theta)) continue;
                acc.add(two_d * to_real(Lg.avg[q]) *
                        form.tau(df, indicator(cube_rect(Lg.sup[q], theta))));
            }
            bigrat gp = Lg.avg_of(P);
            if (gp == 0) continue;
            real c = two_d * to_real(gp);
            for (int k = 2; k <= k_max; ++k) {
                if (!is_good(P, k, theta)) continue;
                bigint rhi = detail::band_radius_hi(k);
                bigint rlo = detail::band_radius_lo(k);
                std::vector<bigint> olo(P.index), ohi(P.index), ilo(P.index), ihi(P.index);
                for (size_t ax = 0; ax < olo.size(); ++ax) {
                    olo[ax] -= rhi;
                    ohi[ax] += rhi;
                    ilo[ax] -= rlo - 1;
                    ihi[ax] += rlo - 1;
                }
                detail::peel_box_difference(
                    olo, ohi, ilo, ihi,
                    [&](const std::vector<bigint>& lo2, const std::vector<bigint>& hi2) {
                        acc.add(-c * form.tau(df, indicator(detail::index_box_rect(
                                                  i, lo2, hi2, theta))));
                    });
            }
        }
        // average mismatch against difference, good cube still on the f side
        for (size_t q = 0; q < Lg.sup.size(); ++q) {
            if (Lg.diff_pos[q] < 0) continue;
            const DyadicCube& Q = Lg.sup[q];
            const SimpleFunction& dg = Lg.diff[size_t(Lg.diff_pos[q])];
            for (size_t p = 0; p < Lf.sup.size(); ++p) {
                if (Lf.avg[p] == 0) continue;
                int k = band_index(Lf.sup[p], Q);
                if (k < 2 || k > k_max || !is_good(Lf.sup[p], k, theta)) continue;
                acc.add(two_d * to_real(Lf.avg[p]) *
                        form.tau(indicator(cube_rect(Lf.sup[p], theta)), dg));
            }
            bigrat fq = Lf.avg_of(Q);
            if (fq == 0) continue;
            real c = two_d * to_real(fq);
            for (int k = 2; k <= k_max; ++k) {
                bigint rhi = detail::band_radius_hi(k);
                bigint rlo = detail::band_radius_lo(k);
                std::vector<bigint> blo(Q.index), bhi(Q.index), slo(Q.index), shi(Q.index);
                for (size_t ax = 0; ax < blo.size(); ++ax) {
                    blo[ax] -= rhi;
                    bhi[ax] += rhi;
                    slo[ax] -= rlo - 1;
                    shi[ax] += rlo - 1;
                }
                detail::visit_good_cells(
                    i, k, theta, blo, bhi,
                    [&](const std::vector<bigint>& glo, const std::vector<bigint>& ghi) {
                        std::vector<bigint> b1lo = glo, b1hi = ghi;
                        if (!detail::clip_box(b1lo, b1hi, blo, bhi)) return;
                        std::vector<bigint> b2lo = glo, b2hi = ghi;
                        if (!detail::clip_box(b2lo, b2hi, slo, shi)) {
                            b2lo = b1lo;
                            b2hi = b1lo;
                            b2hi[0] -= 1;  // strictly empty inner box
                        }
                        detail::peel_box_difference(
                            b1lo, b1hi, b2lo, b2hi,
                            [&](const std::vector<bigint>& lo2,
                                const std::vector<bigint>& hi2) {
                                acc.add(-c * form.tau(indicator(detail::index_box_rect(
                                                          i, lo2, hi2, theta)),
                                                      dg));
                            });
                    });
            }
        }
    }
    return acc.value();
}

// Randomized evaluation of the full representation against the direct
// pairing.  The declared truncation budget has two parts: the mean window
// error (subsampled with its own stream) and the modulus tail of the
// dropped bands.
struct RepReport {
    int a = 0, b = 0, k_max = 0;
    real reference = 0;
    McEstimate estimate;
    real error_mean = 0;  // window error, signed
    real error_se = 0;
    real k_tail = 0;
    real budget = 0;
    real tol = 0;
    real gap = 0;
    bool pass = false;
};

inline RepReport representation_check(const WeakForm& form, const SimpleFunction& f,
                                      const SimpleFunction& g, int a, int b, int k_max,
                                      long long samples, std::uint64_t seed,
                                      int threads = 1) {
    if (a > b) throw Error("representation_check: a must not exceed b");
    if (k_max < 2) throw Error("representation_check: k_max must be >= 2");
    RepReport rep;
    rep.a = a;
    rep.b = b;
    rep.k_max = k_max;
    rep.reference = form.tau(f, g);
    int lo = default_window_lo(a, k_max);
    int hi = default_window_hi(b);
    rep.estimate = mc_expect(
        [&](const ShiftSequence& theta) {
            return rep_sample(form, f, g, a, b, k_max, theta);
        },
        f.d, lo, hi, derive_u64(seed, 1, 0), samples, threads);
    long long err_samples = std::max<long long>(100, samples / 100);
    McEstimate err = mc_expect(
        [&](const ShiftSequence& theta) {
            return error_term_sparse(form, f, g, a, b, theta);
        },
        f.d, lo, hi, derive_u64(seed, 3, 0), err_samples, threads);
    rep.error_mean = err.mean;
    rep.error_se = err.std_error;
    rep.k_tail = k_tail_budget(form.kernel().modulus(), k_max);
    rep.budget = 3 * rep.estimate.std_error + std::fabs(rep.error_mean) +
                 3 * rep.error_se + rep.k_tail;
    rep.tol = std::max(real(0.05L) * std::fabs(rep.reference), rep.budget);
    rep.gap = std::fabs(rep.estimate.mean - rep.reference);
    rep.pass = rep.gap <= rep.tol;
    return rep;
}

// Growth exponent of the block norms in the band index, by type and
// exponent p: (1,1) stays square-root, the mixed types pick up the
// conjugate-exponent power.
inline real gamma_delta(const Gamma& gamma, double p) {
    if (!(p > 1)) throw Error("gamma_delta: requires p > 1");
    check_gamma(gamma);
    double pc = p / (p - 1);
    if (gamma == Gamma{1, 1}) return 0.5L;
    if (gamma == Gamma{1, 0}) return real(std::max(0.5, 1.0 / p));
    return real(std::max(0.5, 1.0 / pc));
}

// Randomized lower estimates of the block-sum norms across band indices,
// against the (1 + log k)^delta envelope.  Diagnostic only: the probe
// reports how the observed growth compares, it asserts nothing.
struct ShiftNormRow {
    int k = 0;
    real raw = 0;         // max |blocks(f,g)| / (|f|_p |g|_p')
    real normalized = 0;  // raw relative to the first row
    real envelope = 0;    // (1 + log k)^delta relative to the first row
};

inline std::vector<ShiftNormRow> shift_norm_probe(const WeakForm& form, const Gamma& gamma,
                                                  const std::vector<int>& k_list, double p,
                                                  std::uint64_t seed, int trials = 32) {
    check_gamma(gamma);
    if (!(p > 1)) throw Error("shift_norm_probe: requires p > 1");
    if (trials < 1) throw Error("shift_norm_probe: needs at least one trial");
    const int d = form.kernel().dim();
    const int a = 0, b = 3;
    const double pc = p / (p - 1);
    real delta = gamma_delta(gamma, p);
    std::vector<ShiftNormRow> rows;
    for (int k : k_list) {
        if (k < 2) throw Error("shift_norm_probe: band index must be >= 2");
        ShiftNormRow row;
        row.k = k;
        for (int t = 0; t < trials; ++t) {
            std::uint64_t s =
                derive_u64(seed, 31, (std::uint64_t(std::uint32_t(k)) << 20) +
                                         std::uint64_t(t));
            ShiftSequence theta = sample_theta(d, default_window_lo(a, k),
                                               default_window_hi(b), derive_u64(s, 1, 0));
            auto make = [&](std::uint64_t fs) {
                SimpleFunction h;
                h.d = d;
                for (int j = 0; j < 3; ++j) {
                    std::uint64_t u = derive_u64(fs, 5, std::uint64_t(j));
                    int gen = int(u % 5);
                    Rect r;
                    r.lo.resize(size_t(d));
                    r.hi.resize(size_t(d));
                    for (int ax = 0; ax < d; ++ax) {
                        std::uint64_t v = derive_u64(fs, 7, std::uint64_t(j * 8 + ax));
                        bigint m = bigint(v % (std::uint64_t(8) << gen));
                        r.lo[size_t(ax)] = DyadicRational(m) * DyadicRational::pow2(-gen);
                        r.hi[size_t(ax)] =
                            DyadicRational(m + 1) * DyadicRational::pow2(-gen);
                    }
                    h = fn_add(h, indicator(r, bigrat(u % 2 == 0 ? 1 : -1)));
                }
                return fn_normalized(h);
            };
            SimpleFunction f = make(derive_u64(s, 2, 0));
            SimpleFunction g = make(derive_u64(s, 3, 0));
            real nf = fn_lp_norm(f, p);
            real ng = fn_lp_norm(g, pc);
            if (!(nf > 0) || !(ng > 0)) continue;
            real v = std::fabs(shift_sum(form, f, g, gamma, k, a, b, theta)) / (nf * ng);
            if (v > row.raw) row.raw = v;
        }
        row.envelope = std::pow(1 + std::log(real(k)), delta);
        rows.push_back(row);
    }
    if (!rows.empty() && rows.front().raw > 0 && rows.front().envelope > 0) {
        real raw0 = rows.front().raw;
        real env0 = rows.front().envelope;
        for (auto& r : rows) {
            r.normalized = r.raw / raw0;
            r.envelope /= env0;
        }
    }
    return rows;
}

}  // namespace dyrep
