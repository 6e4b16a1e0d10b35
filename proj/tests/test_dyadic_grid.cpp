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

#include "dyrep/grid.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

using namespace dyrep;

namespace {

DyadicRational dy(long long m, unsigned e) { return DyadicRational(bigint(m), e); }

DyadicCube mk(int gen, std::initializer_list<long long> idx) {
    DyadicCube q;
    q.gen = gen;
    for (long long v : idx) q.index.push_back(bigint(v));
    return q;
}

} // namespace

TEST_CASE("dyadic rational arithmetic and canonical form", "[dyadic]") {
    DyadicRational a = dy(6, 3); // 6/8 = 3/4 canonically
    REQUIRE(a.mantissa() == 3);
    REQUIRE(a.exponent() == 2);
    REQUIRE((a + dy(1, 2)) == DyadicRational(1));
    REQUIRE((a - dy(3, 2)) == DyadicRational(0));
    REQUIRE((a * dy(1, 1)) == dy(3, 3));
    REQUIRE(dy(-5, 1) < dy(-4, 1));
    REQUIRE(DyadicRational::pow2(-3) == dy(1, 3));
    REQUIRE(DyadicRational::pow2(4) == DyadicRational(16));

    // floor/ceil at scale: floor(3/4 * 2) = 1, ceil = 2; negatives round down.
    REQUIRE(a.floor_scaled(1) == 1);
    REQUIRE(a.ceil_scaled(1) == 2);
    REQUIRE(dy(-3, 2).floor_scaled(0) == -1);
    REQUIRE(dy(-3, 2).ceil_scaled(0) == 0);
    REQUIRE(dy(-3, 2).floor_scaled(2) == -3);

    REQUIRE(a.to_rational() == bigrat(3, 4));
    REQUIRE(a.to_real() == 0.75L);
}

TEST_CASE("dyadic rational text form round trips bit-exactly", "[dyadic]") {
    for (auto s : {std::pair{3LL, 2u}, {-17LL, 5u}, {0LL, 0u}, {1LL, 20u}, {12345LL, 0u}}) {
        DyadicRational v = dy(s.first, s.second);
        REQUIRE(DyadicRational::parse(v.str()) == v);
    }
    REQUIRE(DyadicRational::parse("5").mantissa() == 5);
    REQUIRE(DyadicRational::parse("-3/2^1") == dy(-3, 1));
    REQUIRE_THROWS_AS(DyadicRational::parse("1/3"), Error);
    REQUIRE_THROWS_AS(DyadicRational::parse("x/2^1"), Error);
    REQUIRE_THROWS_AS(DyadicRational::parse(""), Error);

    REQUIRE(parse_rational("3/6") == bigrat(1, 2));
    REQUIRE(rational_str(bigrat(-1, 3)) == "-1/3");
    REQUIRE_THROWS_AS(parse_rational("1/0"), Error);
}

TEST_CASE("shift offsets are binary sums of window bits", "[grid]") {
    // theta_1 = theta_2 = 1 in d=1: offsets 3/4 at gen 0, 1/4 at gen 1, 0 at gen 2.
    ShiftSequence theta(1, -2, 4);
    theta.set_bit(1, 0, 1);
    theta.set_bit(2, 0, 1);
    REQUIRE(shift_offset(theta, 0)[0] == dy(3, 2));
    REQUIRE(shift_offset(theta, 1)[0] == dy(1, 2));
    REQUIRE(shift_offset(theta, 2)[0] == DyadicRational(0));
    // Coarse-level bits contribute integer translations.
    theta.set_bit(-1, 0, 1);
    REQUIRE(shift_offset(theta, -2)[0] == (DyadicRational(2) + dy(3, 2)));

    ShiftSequence zero(2, -3, 5);
    for (int g = -3; g <= 5; ++g)
        for (int axis = 0; axis < 2; ++axis)
            REQUIRE(shift_offset(zero, g)[size_t(axis)] == DyadicRational(0));
}

TEST_CASE("realized cube geometry", "[grid]") {
    ShiftSequence theta(1, -2, 4);
    theta.set_bit(1, 0, 1);
    theta.set_bit(2, 0, 1);
    DyadicCube q = mk(0, {5});
    REQUIRE(cube_corner(q, theta)[0] == (DyadicRational(5) + dy(3, 2)));
    REQUIRE(cube_center(q, theta)[0] == (DyadicRational(5) + dy(3, 2) + dy(1, 1)));
    REQUIRE(cube_length(q) == DyadicRational(1));

    // theta_1 = 1 offsets the child lattice: children of index 5 are 11 and 12.
    auto kids = cube_children(q, theta);
    REQUIRE(kids.size() == 2);
    REQUIRE(kids[0].index[0] == 11);
    REQUIRE(kids[1].index[0] == 12);
    REQUIRE(cube_ancestor(kids[0], 1, theta) == q);
    REQUIRE(cube_ancestor(kids[1], 1, theta) == q);
    // Children tile the parent: corners at parent corner and parent corner + 1/2.
    REQUIRE(cube_corner(kids[0], theta)[0] == cube_corner(q, theta)[0]);
    REQUIRE(cube_corner(kids[1], theta)[0] == (cube_corner(q, theta)[0] + dy(1, 1)));

    DyadicCube q2 = mk(3, {-5, 7});
    ShiftSequence z2(2, -2, 6);
    REQUIRE(cube_corner(q2, z2)[0] == dy(-5, 3));
    REQUIRE(cube_corner(q2, z2)[1] == dy(7, 3));
}

TEST_CASE("ancestor respects the realized containment", "[grid]") {
    // Unshifted: plain floor division of indices.
    ShiftSequence zero(1, -4, 4);
    REQUIRE(cube_ancestor(mk(1, {3}), 1, zero).index[0] == 1);
    REQUIRE(cube_ancestor(mk(1, {-3}), 1, zero).index[0] == -2);

    // Shifted: theta_1 = 1 moves generation-0 cubes by 1/2, so [0,1/2) falls
    // into the realized cube [-1/2, 1/2).
    ShiftSequence theta(1, -4, 4);
    theta.set_bit(1, 0, 1);
    REQUIRE(cube_ancestor(mk(1, {0}), 1, theta).index[0] == -1);
    REQUIRE(cube_ancestor(mk(1, {1}), 1, theta).index[0] == 0);

    // Containment property on random shifts, checked with exact geometry.
    for (std::uint64_t s = 0; s < 40; ++s) {
        ShiftSequence t = sample_theta(2, -6, 6, 1000 + s);
        DyadicCube q = mk(3, {(long long)(derive_u64(s, 1, 0) % 33) - 16,
                              (long long)(derive_u64(s, 2, 0) % 33) - 16});
        for (int k = 1; k <= 5; ++k) {
            DyadicCube a = cube_ancestor(q, k, t);
            REQUIRE(a.gen == q.gen - k);
            Point qc = cube_corner(q, t);
            Point ac = cube_corner(a, t);
            for (int axis = 0; axis < 2; ++axis) {
                REQUIRE(!(qc[size_t(axis)] < ac[size_t(axis)]));
                REQUIRE(qc[size_t(axis)] + cube_length(q) <=
                        ac[size_t(axis)] + cube_length(a));
            }
        }
        // Ancestors compose: anc(anc(q,2),1) == anc(q,3).
        REQUIRE(cube_ancestor(cube_ancestor(q, 2, t), 1, t) == cube_ancestor(q, 3, t));
    }

    REQUIRE_THROWS_AS(cube_ancestor(mk(0, {0}), 6, zero), Error); // window exhausted
}

TEST_CASE("goodness: integer test matches exact geometry", "[grid]") {
    for (std::uint64_t s = 0; s < 60; ++s) {
        ShiftSequence t = sample_theta(2, -8, 6, 77 + s);
        DyadicCube q = mk(2, {(long long)(derive_u64(s, 3, 0) % 17) - 8,
                              (long long)(derive_u64(s, 4, 0) % 17) - 8});
        for (int k = 2; k <= 5; ++k)
            REQUIRE(is_good(q, k, t) == is_good_geometric(q, k, t));
    }
    ShiftSequence zero(1, -6, 4);
    REQUIRE_THROWS_AS(is_good(mk(0, {0}), 1, zero), Error);

    // Unshifted k=2: relative position of index m is m mod 4; good iff in {1,2}.
    for (long long m = -8; m < 8; ++m) {
        bool good = is_good(mk(0, {m}), 2, zero);
        long long r = ((m % 4) + 4) % 4;
        REQUIRE(good == (r == 1 || r == 2));
    }
}

TEST_CASE("goodness frequency is 2^-d and independent of position", "[grid][mc]") {
    const int N = 20000;
    for (int d = 1; d <= 2; ++d) {
        for (int k : {2, 3, 5}) {
            int good = 0;
            std::vector<double> pos, ind;
            for (int i = 0; i < N; ++i) {
                ShiftSequence t = sample_theta(d, -k - 2, 8, derive_u64(42, 17, std::uint64_t(i)));
                DyadicCube q = mk(0, {});
                q.index.assign(size_t(d), bigint(3));
                bool g = is_good(q, k, t);
                good += g ? 1 : 0;
                pos.push_back(shift_offset(t, 0)[0].to_real());
                ind.push_back(g ? 1.0 : 0.0);
            }
            double p = std::pow(2.0, -d);
            double sigma = std::sqrt(p * (1 - p) / N);
            REQUIRE(std::fabs(double(good) / N - p) <= 3 * sigma);
            REQUIRE(std::fabs(pearson(pos, ind)) <= 3.0 / std::sqrt(double(N)));
        }
    }
}

TEST_CASE("good cubes share the k-ancestor with all band partners", "[grid]") {
    // Exhaustive over every shift pattern on a small window, d=1.
    for (int k : {2, 3}) {
        int levels = k + 3; // window [-k-1, 1]
        for (unsigned pat = 0; pat < (1u << levels); ++pat) {
            ShiftSequence t(1, -k - 1, 1);
            for (int b = 0; b < levels; ++b) t.set_bit(-k - 1 + b, 0, int((pat >> b) & 1u));
            for (long long m = -6; m <= 6; ++m) {
                DyadicCube p = mk(0, {m});
                if (!is_good(p, k, t)) continue;
                for (long long dm = -(1 << (k - 2)); dm <= (1 << (k - 2)); ++dm) {
                    DyadicCube q = mk(0, {m + dm});
                    REQUIRE(cube_ancestor(p, k, t) == cube_ancestor(q, k, t));
                }
            }
        }
    }
}

TEST_CASE("cubes_meeting enumerates exactly the positive-overlap cubes", "[grid]") {
    ShiftSequence zero(1, -4, 6);
    auto got = cubes_meeting({DyadicRational(0)}, {DyadicRational(1)}, 2, zero);
    REQUIRE(got.size() == 4);
    for (int i = 0; i < 4; ++i) REQUIRE(got[size_t(i)].index[0] == i);

    // Shifted by 1/2 at generation 0: [0,1) meets the two realized cubes
    // [-1/2,1/2) and [1/2,3/2), indices -1 and 0.
    ShiftSequence t(1, -4, 6);
    t.set_bit(1, 0, 1);
    got = cubes_meeting({DyadicRational(0)}, {DyadicRational(1)}, 0, t);
    REQUIRE(got.size() == 2);
    REQUIRE(got[0].index[0] == -1);
    REQUIRE(got[1].index[0] == 0);

    // Aligned endpoints: a boundary touch is not positive overlap.
    got = cubes_meeting({DyadicRational(1)}, {DyadicRational(2)}, 0, zero);
    REQUIRE(got.size() == 1);
    REQUIRE(got[0].index[0] == 1);

    // d=2 lexicographic order.
    ShiftSequence z2(2, -4, 6);
    auto g2 = cubes_meeting({DyadicRational(0), DyadicRational(0)},
                            {DyadicRational(1), dy(3, 1)}, 1, z2);
    REQUIRE(g2.size() == 6);
    REQUIRE(g2[0].index == std::vector<bigint>{0, 0});
    REQUIRE(g2[1].index == std::vector<bigint>{0, 1});
    REQUIRE(g2[2].index == std::vector<bigint>{0, 2});
    REQUIRE(g2[3].index == std::vector<bigint>{1, 0});

    // Degenerate box.
    REQUIRE(cubes_meeting({DyadicRational(1)}, {DyadicRational(1)}, 0, zero).empty());

    // Every enumerated cube genuinely overlaps; neighbours outside don't.
    for (std::uint64_t s = 0; s < 25; ++s) {
        ShiftSequence rt = sample_theta(1, -6, 8, 500 + s);
        DyadicRational lo = dy((long long)(derive_u64(s, 5, 0) % 64) - 32, 3);
        DyadicRational hi = lo + dy((long long)(derive_u64(s, 6, 0) % 24) + 1, 3);
        for (int gen : {-1, 0, 2, 4}) {
            auto cs = cubes_meeting({lo}, {hi}, gen, rt);
            REQUIRE(!cs.empty());
            Point off = shift_offset(rt, gen);
            for (const auto& c : cs) {
                DyadicRational c0 = cube_corner(c, rt)[0];
                REQUIRE(c0 < hi);
                REQUIRE(lo < c0 + cube_length(c));
            }
            // Flanking cubes fail the overlap test.
            DyadicCube before{gen, {cs.front().index[0] - 1}};
            DyadicCube after{gen, {cs.back().index[0] + 1}};
            REQUIRE(!(lo < cube_corner(before, rt)[0] + cube_length(before)));
            REQUIRE(!(cube_corner(after, rt)[0] < hi));
            (void)off;
        }
    }
}

TEST_CASE("band index brackets the center distance", "[grid]") {
    REQUIRE(band_index(mk(0, {3}), mk(0, {3})) == 0);
    REQUIRE(band_index(mk(0, {3}), mk(0, {4})) == 2);
    REQUIRE(band_index(mk(0, {3}), mk(0, {1})) == 3);
    REQUIRE(band_index(mk(0, {0}), mk(0, {3})) == 4);
    REQUIRE(band_index(mk(0, {0}), mk(0, {4})) == 4);
    REQUIRE(band_index(mk(0, {0}), mk(0, {5})) == 5);
    REQUIRE(band_index(mk(2, {0, 0}), mk(2, {2, -3})) == 4);
    REQUIRE_THROWS_AS(band_index(mk(0, {0}), mk(1, {0})), Error);

    // 2^(k-3) < s <= 2^(k-2) for the computed k.
    for (long long s = 1; s <= 200; ++s) {
        int k = band_index(mk(0, {0}), mk(0, {s}));
        REQUIRE(k >= 2);
        REQUIRE((k == 2 ? 0.5 : std::pow(2.0, k - 3)) < double(s));
        REQUIRE(double(s) <= std::pow(2.0, k - 2));
    }
}

TEST_CASE("theta sampling is deterministic and window-extension invariant", "[grid]") {
    ShiftSequence a = sample_theta(2, -5, 7, 12345);
    ShiftSequence b = sample_theta(2, -5, 7, 12345);
    ShiftSequence wide = sample_theta(2, -9, 10, 12345);
    ShiftSequence other = sample_theta(2, -5, 7, 54321);
    int diffs = 0;
    for (int j = -5; j <= 7; ++j)
        for (int axis = 0; axis < 2; ++axis) {
            REQUIRE(a.bit(j, axis) == b.bit(j, axis));
            REQUIRE(a.bit(j, axis) == wide.bit(j, axis));
            diffs += a.bit(j, axis) != other.bit(j, axis) ? 1 : 0;
        }
    REQUIRE(diffs > 0);
    REQUIRE(a.bit(-100, 0) == 0); // outside window reads zero
    REQUIRE_THROWS_AS(ShiftSequence(1, 3, 2), Error);
}
