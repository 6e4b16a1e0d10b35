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

#include "dyrep/dyadic.hpp"

#include <cassert>
#include <cstdint>
#include <vector>

namespace dyrep {

// Randomly shifted dyadic system, truncated to a finite window of shift
// levels [j_lo, j_hi].  Levels outside the window carry the zero shift; the
// truncated system is itself a valid shifted system, so downstream identities
// hold exactly (truncation is not an approximation).
class ShiftSequence {
  public:
    ShiftSequence(int d, int j_lo, int j_hi)
        : d_(d), j_lo_(j_lo), j_hi_(j_hi), bits_(size_t(j_hi - j_lo + 1), 0) {
        if (d < 1 || d > 16) throw Error("ShiftSequence: dimension out of range");
        if (j_lo > j_hi) throw Error("ShiftSequence: empty window");
    }

    int dim() const { return d_; }
    int window_lo() const { return j_lo_; }
    int window_hi() const { return j_hi_; }

    // theta_j in {0,1}^d; zero outside the window.
    int bit(int j, int axis) const {
        if (j < j_lo_ || j > j_hi_) return 0;
        return (bits_[size_t(j - j_lo_)] >> axis) & 1u;
    }
    void set_bit(int j, int axis, int v) {
        if (j < j_lo_ || j > j_hi_) throw Error("ShiftSequence::set_bit: level outside window");
        std::uint32_t& w = bits_[size_t(j - j_lo_)];
        w = (w & ~(1u << axis)) | (std::uint32_t(v & 1) << axis);
    }

  private:
    int d_, j_lo_, j_hi_;
    std::vector<std::uint32_t> bits_;
};

// Counter-based sampling: bit (j, axis) is a pure function of (seed, j, axis),
// so enlarging the window never perturbs bits already in it and sample i of a
// run can be regenerated in isolation.
inline ShiftSequence sample_theta(int d, int j_lo, int j_hi, std::uint64_t seed) {
    ShiftSequence theta(d, j_lo, j_hi);
    for (int j = j_lo; j <= j_hi; ++j)
        for (int axis = 0; axis < d; ++axis) {
            std::uint64_t ctr = (std::uint64_t(std::int64_t(j)) << 8) | std::uint64_t(axis);
            theta.set_bit(j, axis, int(derive_u64(seed, 0xA11CE5u, ctr) & 1u));
        }
    return theta;
}

inline int default_window_lo(int a, int k_max) { return a - k_max - 1; }
inline int default_window_hi(int b, int extra = 0) { return b + extra; }

// Cube of generation `gen` with integer corner index; side length 2^-gen.
// The realized position additionally carries the shift offset of its system.
struct DyadicCube {
    int gen = 0;
    std::vector<bigint> index;

    int dim() const { return int(index.size()); }

    bool operator==(const DyadicCube& o) const { return gen == o.gen && index == o.index; }
    bool operator<(const DyadicCube& o) const {
        if (gen != o.gen) return gen < o.gen;
        return index < o.index;
    }
};

// Sum of 2^-j theta_j over window levels j > gen: the realized translation of
// generation-gen cubes of the shifted system.
inline Point shift_offset(const ShiftSequence& theta, int gen) {
    Point off(size_t(theta.dim()), DyadicRational(0));
    for (int j = std::max(gen + 1, theta.window_lo()); j <= theta.window_hi(); ++j)
        for (int axis = 0; axis < theta.dim(); ++axis)
            if (theta.bit(j, axis))
                off[size_t(axis)] = off[size_t(axis)] + DyadicRational::pow2(-j);
    return off;
}

inline DyadicRational cube_length(const DyadicCube& q) { return DyadicRational::pow2(-q.gen); }

inline Point cube_corner(const DyadicCube& q, const ShiftSequence& theta) {
    Point c = shift_offset(theta, q.gen);
    DyadicRational len = cube_length(q);
    for (int axis = 0; axis < q.dim(); ++axis)
        c[size_t(axis)] = c[size_t(axis)] + len * DyadicRational(q.index[size_t(axis)]);
    return c;
}

inline Point cube_center(const DyadicCube& q, const ShiftSequence& theta) {
    Point c = cube_corner(q, theta);
    DyadicRational half = DyadicRational::pow2(-q.gen - 1);
    for (auto& x : c) x = x + half;
    return c;
}

// Children in the realized system.  The parent's shift carries the bit at
// level gen+1 that the children's shift does not, so the child lattice is
// offset by theta_{gen+1} per axis: indices 2m + theta_{gen+1} + {0,1}.
inline std::vector<DyadicCube> cube_children(const DyadicCube& q, const ShiftSequence& theta) {
    int d = q.dim();
    std::vector<DyadicCube> out;
    out.reserve(size_t(1) << d);
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        DyadicCube c;
        c.gen = q.gen + 1;
        c.index.resize(size_t(d));
        for (int axis = 0; axis < d; ++axis)
            c.index[size_t(axis)] = (q.index[size_t(axis)] << 1) +
                                    bigint(theta.bit(q.gen + 1, axis)) + ((mask >> axis) & 1u);
        out.push_back(std::move(c));
    }
    return out;
}

inline bigint floor_div_pow2(const bigint& a, int k) {
    bigint div = bigint(1) << k;
    bigint q = a / div;
    if (a < 0 && q * div != a) --q;
    return q;
}

// k-fold ancestor in the shifted system.  The shift levels (gen-k, gen] decide
// which coarse cube contains this one; they must lie inside the stored window.
inline DyadicCube cube_ancestor(const DyadicCube& q, int k, const ShiftSequence& theta) {
    if (k < 1) throw Error("cube_ancestor: k must be >= 1");
    if (q.gen - k < theta.window_lo() - 1)
        throw Error("cube_ancestor: window exhausted (ancestor generation below window)");
    DyadicCube a;
    a.gen = q.gen - k;
    a.index.resize(size_t(q.dim()));
    for (int axis = 0; axis < q.dim(); ++axis) {
        bigint v = 0;
        for (int j = q.gen - k + 1; j <= q.gen; ++j)
            v += bigint(theta.bit(j, axis)) << (q.gen - j);
        a.index[size_t(axis)] = floor_div_pow2(q.index[size_t(axis)] - v, k);
    }
    return a;
}

// Position of q inside its k-fold ancestor, in child-lattice units [0, 2^k)^d.
inline std::vector<bigint> relative_position(const DyadicCube& q, int k,
                                             const ShiftSequence& theta) {
    DyadicCube a = cube_ancestor(q, k, theta);
    std::vector<bigint> r(size_t(q.dim()));
    for (int axis = 0; axis < q.dim(); ++axis) {
        bigint v = 0;
        for (int j = q.gen - k + 1; j <= q.gen; ++j)
            v += bigint(theta.bit(j, axis)) << (q.gen - j);
        r[size_t(axis)] = q.index[size_t(axis)] - v - (a.index[size_t(axis)] << k);
    }
    return r;
}

// (k, theta)-goodness: the realized cube sits inside the concentric half of
// its k-fold ancestor.  Equivalent integer test: every relative coordinate
// lies in [2^(k-2), 3*2^(k-2) - 1].
inline bool is_good(const DyadicCube& q, int k, const ShiftSequence& theta) {
    if (k < 2) throw Error("is_good: requires k >= 2");
    std::vector<bigint> r = relative_position(q, k, theta);
    bigint lo = bigint(1) << (k - 2);
    bigint hi = 3 * lo - 1;
    for (const bigint& ri : r)
        if (ri < lo || ri > hi) return false;
    return true;
}

// Same predicate via exact rational geometry; used to cross-check is_good.
inline bool is_good_geometric(const DyadicCube& q, int k, const ShiftSequence& theta) {
    if (k < 2) throw Error("is_good_geometric: requires k >= 2");
    DyadicCube anc = cube_ancestor(q, k, theta);
    Point qc = cube_corner(q, theta);
    Point ac = cube_corner(anc, theta);
    DyadicRational ql = cube_length(q);
    DyadicRational quarter = DyadicRational::pow2(-anc.gen - 2);
    for (int axis = 0; axis < q.dim(); ++axis) {
        DyadicRational lo = ac[size_t(axis)] + quarter;
        DyadicRational hi = ac[size_t(axis)] + quarter * DyadicRational(3);
        if (qc[size_t(axis)] < lo) return false;
        if (hi < qc[size_t(axis)] + ql) return false;
    }
    return true;
}

// All generation-gen cubes of the shifted system whose intersection with the
// open box (lo, hi) has positive measure, in lexicographic index order.
inline std::vector<DyadicCube> cubes_meeting(const Point& lo, const Point& hi, int gen,
                                             const ShiftSequence& theta) {
    int d = theta.dim();
    if (int(lo.size()) != d || int(hi.size()) != d)
        throw Error("cubes_meeting: dimension mismatch");
    Point off = shift_offset(theta, gen);
    std::vector<bigint> mn(static_cast<size_t>(d));
    std::vector<bigint> mx(static_cast<size_t>(d));
    for (int axis = 0; axis < d; ++axis) {
        if (!(lo[size_t(axis)] < hi[size_t(axis)])) return {};
        mn[size_t(axis)] = (lo[size_t(axis)] - off[size_t(axis)]).floor_scaled(gen);
        mx[size_t(axis)] = (hi[size_t(axis)] - off[size_t(axis)]).ceil_scaled(gen) - 1;
        if (mx[size_t(axis)] < mn[size_t(axis)]) return {};
    }
    std::vector<DyadicCube> out;
    std::vector<bigint> cur = mn;
    for (;;) {
        out.push_back(DyadicCube{gen, cur});
        int axis = d - 1;
        while (axis >= 0) {
            cur[size_t(axis)] += 1;
            if (cur[size_t(axis)] <= mx[size_t(axis)]) break;
            cur[size_t(axis)] = mn[size_t(axis)];
            --axis;
        }
        if (axis < 0) break;
    }
    return out;
}

inline int ceil_log2(const bigint& s) {
    assert(s > 0);
    unsigned b = boost::multiprecision::msb(s);
    bool pow2 = (s & (s - 1)) == 0;
    return int(b) + (pow2 ? 0 : 1);
}

// Band index of a same-generation pair: the k >= 2 with
// 2^(k-3) < |z_P - z_Q|_inf / l(P) <= 2^(k-2); 0 on the diagonal P == Q.
// Same-generation centers differ by an exact integer multiple of the side.
inline int band_index(const DyadicCube& p, const DyadicCube& q) {
    if (p.gen != q.gen) throw Error("band_index: generations differ");
    bigint s = 0;
    for (int axis = 0; axis < p.dim(); ++axis) {
        bigint d = p.index[size_t(axis)] - q.index[size_t(axis)];
        if (d < 0) d = -d;
        if (d > s) s = d;
    }
    if (s == 0) return 0;
    return 2 + ceil_log2(s);
}

} // namespace dyrep
