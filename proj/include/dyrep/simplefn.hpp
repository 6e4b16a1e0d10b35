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

#include "dyrep/grid.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace dyrep {

// Half-open axis-parallel box [lo_1,hi_1) x ... x [lo_d,hi_d).
struct Rect {
    Point lo, hi;

    int dim() const { return int(lo.size()); }
    bool empty() const {
        for (int i = 0; i < dim(); ++i)
            if (!(lo[size_t(i)] < hi[size_t(i)])) return true;
        return false;
    }
    DyadicRational measure() const {
        if (empty()) return DyadicRational(0);
        DyadicRational m(1);
        for (int i = 0; i < dim(); ++i) m = m * (hi[size_t(i)] - lo[size_t(i)]);
        return m;
    }
    bool operator==(const Rect& o) const { return lo == o.lo && hi == o.hi; }
};

inline Rect rect_intersect(const Rect& a, const Rect& b) {
    Rect r;
    r.lo.resize(a.lo.size());
    r.hi.resize(a.hi.size());
    for (size_t i = 0; i < a.lo.size(); ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::min(a.hi[i], b.hi[i]);
    }
    return r;
}

// l^inf distance between two rectangles (0 when they touch or overlap).
inline DyadicRational rect_linf_distance(const Rect& a, const Rect& b) {
    DyadicRational dist(0);
    for (size_t i = 0; i < a.lo.size(); ++i) {
        DyadicRational gap = std::max(a.lo[i] - b.hi[i], b.lo[i] - a.hi[i]);
        if (dist < gap) dist = gap;
    }
    return dist;
}

inline Rect cube_rect(const DyadicCube& q, const ShiftSequence& theta) {
    Rect r;
    r.lo = cube_corner(q, theta);
    r.hi = r.lo;
    DyadicRational len = cube_length(q);
    for (auto& x : r.hi) x = x + len;
    return r;
}

// Finite linear combination of box indicators.  Representations may overlap;
// values add.  Coefficients are exact rationals end-to-end.
struct SimpleFunction {
    struct Term {
        Rect rect;
        bigrat coeff;
    };
    int d = 1;
    std::vector<Term> terms;

    bool trivially_zero() const {
        for (const auto& t : terms)
            if (t.coeff != 0 && !t.rect.empty()) return false;
        return true;
    }
};

inline SimpleFunction indicator(const Rect& r, bigrat c = bigrat(1)) {
    SimpleFunction f;
    f.d = r.dim();
    f.terms.push_back({r, std::move(c)});
    return f;
}

inline SimpleFunction fn_add(const SimpleFunction& a, const SimpleFunction& b) {
    if (a.d != b.d) throw Error("fn_add: dimension mismatch");
    SimpleFunction out = a;
    out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
    return out;
}

inline SimpleFunction fn_scale(const SimpleFunction& a, const bigrat& c) {
    SimpleFunction out = a;
    for (auto& t : out.terms) t.coeff *= c;
    return out;
}

inline SimpleFunction fn_sub(const SimpleFunction& a, const SimpleFunction& b) {
    return fn_add(a, fn_scale(b, bigrat(-1)));
}

// Restriction f * 1_R.
inline SimpleFunction fn_restrict(const SimpleFunction& f, const Rect& r) {
    SimpleFunction out;
    out.d = f.d;
    for (const auto& t : f.terms) {
        Rect c = rect_intersect(t.rect, r);
        if (!c.empty() && t.coeff != 0) out.terms.push_back({c, t.coeff});
    }
    return out;
}

inline std::optional<Rect> fn_bbox(const SimpleFunction& f) {
    std::optional<Rect> box;
    for (const auto& t : f.terms) {
        if (t.coeff == 0 || t.rect.empty()) continue;
        if (!box) {
            box = t.rect;
            continue;
        }
        for (size_t i = 0; i < box->lo.size(); ++i) {
            box->lo[i] = std::min(box->lo[i], t.rect.lo[i]);
            box->hi[i] = std::max(box->hi[i], t.rect.hi[i]);
        }
    }
    return box;
}

inline bigrat fn_integral(const SimpleFunction& f) {
    bigrat s = 0;
    for (const auto& t : f.terms)
        if (!t.rect.empty()) s += t.coeff * t.rect.measure().to_rational();
    return s;
}

// L^2-type pairing integral f g (no kernel).
inline bigrat fn_dot(const SimpleFunction& f, const SimpleFunction& g) {
    if (f.d != g.d) throw Error("fn_dot: dimension mismatch");
    bigrat s = 0;
    for (const auto& a : f.terms)
        for (const auto& b : g.terms) {
            Rect c = rect_intersect(a.rect, b.rect);
            if (!c.empty()) s += a.coeff * b.coeff * c.measure().to_rational();
        }
    return s;
}

inline bigrat fn_value_at(const SimpleFunction& f, const Point& x) {
    bigrat v = 0;
    for (const auto& t : f.terms) {
        bool in = !t.rect.empty();
        for (size_t i = 0; in && i < x.size(); ++i)
            in = !(x[i] < t.rect.lo[i]) && x[i] < t.rect.hi[i];
        if (in) v += t.coeff;
    }
    return v;
}

// Mean value over a realized cube.
inline bigrat fn_average(const SimpleFunction& f, const DyadicCube& q,
                         const ShiftSequence& theta) {
    Rect qr = cube_rect(q, theta);
    bigrat integral = 0;
    for (const auto& t : f.terms) {
        Rect c = rect_intersect(t.rect, qr);
        if (!c.empty()) integral += t.coeff * c.measure().to_rational();
    }
    return integral / qr.measure().to_rational();
}

// --- martingale operators ----------------------------------------------------

// Cubes of the generation that meet supp f (via its bounding box).
inline std::vector<DyadicCube> support_cubes(const SimpleFunction& f, int gen,
                                             const ShiftSequence& theta) {
    auto box = fn_bbox(f);
    if (!box) return {};
    return cubes_meeting(box->lo, box->hi, gen, theta);
}

// True when f restricted to the cube is a single constant taken directly from
// the representation (every term rect either contains the cube or misses it).
// A false return may still be a constant restriction for overlapping
// representations; callers only use this to skip provably uniform cubes.
inline bool fn_uniform_on(const SimpleFunction& f, const Rect& qr) {
    for (const auto& t : f.terms) {
        if (t.coeff == 0 || t.rect.empty()) continue;
        Rect c = rect_intersect(t.rect, qr);
        if (c.empty()) continue;
        if (!(c == qr)) return false;
    }
    return true;
}

// Conditional expectation onto the generation: sum of <f>_Q 1_Q over cubes
// meeting the support.
inline SimpleFunction E_op(const SimpleFunction& f, int gen, const ShiftSequence& theta) {
    SimpleFunction out;
    out.d = f.d;
    for (const auto& q : support_cubes(f, gen, theta)) {
        bigrat avg = fn_average(f, q, theta);
        if (avg != 0) out.terms.push_back({cube_rect(q, theta), avg});
    }
    return out;
}

// Detail at finer scales: F_gen f = f - E_gen f, materialized sparsely (only
// cubes where the representation is non-uniform contribute).
inline SimpleFunction F_op(const SimpleFunction& f, int gen, const ShiftSequence& theta) {
    SimpleFunction out;
    out.d = f.d;
    for (const auto& q : support_cubes(f, gen, theta)) {
        Rect qr = cube_rect(q, theta);
        if (fn_uniform_on(f, qr)) continue;
        for (const auto& t : f.terms) {
            Rect c = rect_intersect(t.rect, qr);
            if (!c.empty() && t.coeff != 0) out.terms.push_back({c, t.coeff});
        }
        bigrat avg = fn_average(f, q, theta);
        if (avg != 0) out.terms.push_back({qr, -avg});
    }
    return out;
}

// Martingale difference of one cube: children averages minus the parent's.
inline SimpleFunction D_op(const SimpleFunction& f, const DyadicCube& p,
                           const ShiftSequence& theta) {
    SimpleFunction out;
    out.d = f.d;
    bigrat pavg = fn_average(f, p, theta);
    bool nontrivial = false;
    for (const auto& c : cube_children(p, theta)) {
        bigrat cavg = fn_average(f, c, theta);
        if (cavg != pavg) nontrivial = true;
        if (cavg != 0) out.terms.push_back({cube_rect(c, theta), cavg});
    }
    if (!nontrivial) return SimpleFunction{f.d, {}};
    if (pavg != 0) out.terms.push_back({cube_rect(p, theta), -pavg});
    return out;
}

// Sum of D_P over the generation; only non-uniform cubes contribute.
inline SimpleFunction D_gen(const SimpleFunction& f, int gen, const ShiftSequence& theta) {
    SimpleFunction out;
    out.d = f.d;
    for (const auto& q : support_cubes(f, gen, theta)) {
        if (fn_uniform_on(f, cube_rect(q, theta))) continue;
        out = fn_add(out, D_op(f, q, theta));
    }
    return out;
}

// Two-cube difference (<f>_P - <f>_Q) 1_P.
inline SimpleFunction D_pq(const SimpleFunction& f, const DyadicCube& p, const DyadicCube& q,
                           const ShiftSequence& theta) {
    bigrat c = fn_average(f, p, theta) - fn_average(f, q, theta);
    if (c == 0) return SimpleFunction{f.d, {}};
    return indicator(cube_rect(p, theta), c);
}

// Depth-k descendants of s that meet supp f.  Depth 0 is s itself.
inline std::vector<DyadicCube> block_cubes(const SimpleFunction& f, const DyadicCube& s, int k,
                                           const ShiftSequence& theta) {
    if (k == 0) return {s};
    std::vector<DyadicCube> out;
    for (const auto& q : support_cubes(f, s.gen + k, theta))
        if (cube_ancestor(q, k, theta) == s) out.push_back(q);
    return out;
}

// Block martingale difference: sum of D_P over depth-k descendants P of s.
inline SimpleFunction D_block(const SimpleFunction& f, const DyadicCube& s, int k,
                              const ShiftSequence& theta) {
    SimpleFunction out;
    out.d = f.d;
    for (const auto& q : block_cubes(f, s, k, theta)) {
        if (fn_uniform_on(f, cube_rect(q, theta))) continue;
        out = fn_add(out, D_op(f, q, theta));
    }
    return out;
}

// Depth-k conditional expectation below s: sum of <f>_P 1_P over descendants.
inline SimpleFunction E_block(const SimpleFunction& f, const DyadicCube& s, int k,
                              const ShiftSequence& theta) {
    SimpleFunction out;
    out.d = f.d;
    for (const auto& q : block_cubes(f, s, k, theta)) {
        bigrat avg = fn_average(f, q, theta);
        if (avg != 0) out.terms.push_back({cube_rect(q, theta), avg});
    }
    return out;
}

// Half-open block difference E_s^(k) - E_s, supported on s.
inline SimpleFunction D_halfopen(const SimpleFunction& f, const DyadicCube& s, int k,
                                 const ShiftSequence& theta) {
    SimpleFunction out = E_block(f, s, k, theta);
    bigrat avg = fn_average(f, s, theta);
    if (avg != 0) out.terms.push_back({cube_rect(s, theta), -avg});
    return out;
}

// --- canonical decomposition / decidable equality ---------------------------

namespace detail {
inline std::vector<std::vector<DyadicRational>> axis_breakpoints(
    const std::vector<const SimpleFunction*>& fs, int d) {
    std::vector<std::vector<DyadicRational>> cuts(static_cast<size_t>(d));
    for (const auto* f : fs)
        for (const auto& t : f->terms) {
            if (t.rect.empty() || t.coeff == 0) continue;
            for (int i = 0; i < d; ++i) {
                cuts[size_t(i)].push_back(t.rect.lo[size_t(i)]);
                cuts[size_t(i)].push_back(t.rect.hi[size_t(i)]);
            }
        }
    for (auto& c : cuts) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    return cuts;
}
} // namespace detail

// Canonical disjoint representation over the arrangement of all endpoints.
inline SimpleFunction fn_normalized(const SimpleFunction& f) {
    SimpleFunction out;
    out.d = f.d;
    auto cuts = detail::axis_breakpoints({&f}, f.d);
    for (const auto& c : cuts)
        if (c.size() < 2) return out; // zero function
    std::vector<size_t> idx(size_t(f.d), 0);
    for (;;) {
        Rect cell;
        cell.lo.resize(size_t(f.d));
        cell.hi.resize(size_t(f.d));
        for (int i = 0; i < f.d; ++i) {
            cell.lo[size_t(i)] = cuts[size_t(i)][idx[size_t(i)]];
            cell.hi[size_t(i)] = cuts[size_t(i)][idx[size_t(i)] + 1];
        }
        bigrat v = 0;
        for (const auto& t : f.terms) {
            if (t.rect.empty()) continue;
            bool contains = true;
            for (int i = 0; contains && i < f.d; ++i)
                contains = !(cell.lo[size_t(i)] < t.rect.lo[size_t(i)]) &&
                           !(t.rect.hi[size_t(i)] < cell.hi[size_t(i)]);
            if (contains) v += t.coeff;
        }
        if (v != 0) out.terms.push_back({cell, v});
        int axis = f.d - 1;
        while (axis >= 0) {
            if (++idx[size_t(axis)] + 1 < cuts[size_t(axis)].size()) break;
            idx[size_t(axis)] = 0;
            --axis;
        }
        if (axis < 0) break;
    }
    return out;
}

// Decidable pointwise equality via the common refinement.
inline bool fn_equivalent(const SimpleFunction& f, const SimpleFunction& g) {
    if (f.d != g.d) return false;
    SimpleFunction diff = fn_normalized(fn_sub(f, g));
    return diff.terms.empty();
}

inline SimpleFunction fn_abs(const SimpleFunction& f) {
    SimpleFunction out = fn_normalized(f);
    for (auto& t : out.terms)
        if (t.coeff < 0) t.coeff = -t.coeff;
    return out;
}

inline real fn_lp_norm(const SimpleFunction& f, double p) {
    if (p < 1) throw Error("fn_lp_norm: p must be >= 1");
    SimpleFunction n = fn_normalized(f);
    CompensatedSum s;
    for (const auto& t : n.terms)
        s.add(std::pow(std::fabs(to_real(t.coeff)), real(p)) * t.rect.measure().to_real());
    return std::pow(s.value(), real(1) / real(p));
}

} // namespace dyrep
