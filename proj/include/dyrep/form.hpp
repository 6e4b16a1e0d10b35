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

#include "dyrep/kernel.hpp"
#include "dyrep/simplefn.hpp"

#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dyrep {

struct ProbeStats {
    real max_ratio = 0;
    long samples = 0;
};

// Diagnostics for the same-generation sum tau(D_P f, 1): the enumerated
// absolute mass and its ratio against (wbp + c_K + Dini) * ||D_P f||_1.
struct TauD1Stats {
    real value = 0;
    real abs_sum = 0;
    real bound_constant = 0;
    int annuli = 0;
};

namespace detail {

inline std::string rect_key(const Rect& r) {
    std::string s;
    for (int i = 0; i < r.dim(); ++i) {
        s += r.lo[size_t(i)].str();
        s += ',';
        s += r.hi[size_t(i)].str();
        s += ';';
    }
    return s;
}

// Decomposition of outer \ inner into at most 2d disjoint boxes; inner must
// be contained in outer.
inline std::vector<Rect> annulus_rects(const Rect& outer, const Rect& inner) {
    std::vector<Rect> out;
    Rect cur = outer;
    for (int a = 0; a < outer.dim(); ++a) {
        Rect left = cur;
        left.hi[size_t(a)] = inner.lo[size_t(a)];
        if (!left.empty()) out.push_back(left);
        Rect right = cur;
        right.lo[size_t(a)] = inner.hi[size_t(a)];
        if (!right.empty()) out.push_back(right);
        cur.lo[size_t(a)] = inner.lo[size_t(a)];
        cur.hi[size_t(a)] = inner.hi[size_t(a)];
    }
    return out;
}

inline Rect concentric_scale(const Rect& q, int factor) {
    // [z - f(z-lo), z + f(hi-z)) with z the centre; factor 3 gives 3Q.
    Rect out = q;
    DyadicRational half = DyadicRational::pow2(-1);
    for (int a = 0; a < q.dim(); ++a) {
        DyadicRational z = (q.lo[size_t(a)] + q.hi[size_t(a)]) * half;
        DyadicRational rad = (q.hi[size_t(a)] - q.lo[size_t(a)]) * half * DyadicRational(factor);
        out.lo[size_t(a)] = z - rad;
        out.hi[size_t(a)] = z + rad;
    }
    return out;
}

} // namespace detail

// The bilinear form tau(f, g) = integral of K(x,y) f(y) g(x), extended
// bilinearly over indicator terms.  The first slot is the y variable, the
// second the x variable.  Rectangle pairings are memoized by their exact
// dyadic coordinates; everything else is derived from them.
class WeakForm {
public:
    explicit WeakForm(Kernel k) : kernel_(std::move(k)) {}

    const Kernel& kernel() const { return kernel_; }

    // Short-circuit tau(1,h) = tau(h,1) = 0.  Only meaningful for kernels
    // with vanishing T(1) functionals; callers enable it after the generic
    // path has been validated against the constant.
    void set_t1_fast_path(bool on) { t1_fast_ = on; }
    bool t1_fast_path() const { return t1_fast_; }

    // Monte-Carlo loops draw a fresh shift per sample, so pairings never
    // recur; disabling the memo keeps memory flat over long runs.
    void set_pair_cache(bool on) { cache_enabled_ = on; }
    bool pair_cache_enabled() const { return cache_enabled_; }

    real pair(const Rect& R, const Rect& S) const {
        if (!cache_enabled_) return kernel_.pair_rect(R, S);
        std::string key = detail::rect_key(R) + '|' + detail::rect_key(S);
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) {
                ++hits_;
                return it->second;
            }
        }
        real v = kernel_.pair_rect(R, S);
        std::lock_guard<std::mutex> lk(mu_);
        cache_.emplace(std::move(key), v);
        return v;
    }

    real tau(const SimpleFunction& f, const SimpleFunction& g) const {
        if (f.d != g.d || f.d != kernel_.dim()) throw Error("tau: dimension mismatch");
        // Bulk products (fine-generation averages against each other) would
        // flood the memo with keys that never repeat; pair them directly.
        bool bulk = f.terms.size() * g.terms.size() > 4096;
        CompensatedSum acc;
        for (const auto& tf : f.terms) {
            if (tf.coeff == 0 || tf.rect.empty()) continue;
            for (const auto& tg : g.terms) {
                if (tg.coeff == 0 || tg.rect.empty()) continue;
                real v = bulk ? kernel_.pair_rect(tf.rect, tg.rect) : pair(tf.rect, tg.rect);
                acc.add(to_real(tf.coeff * tg.coeff) * v);
            }
        }
        return acc.value();
    }

    // tau(1, h) for mean-zero h supported in the cube Q: the overlapping
    // near part tau(1_{3Q}, h) plus far contributions summed over doubling
    // annuli until the Dini remainder bound certifies the tail below tol.
    // The centred-kernel subtraction that makes the far integral absolutely
    // convergent integrates to zero against h, so each annulus contributes
    // its plain pairings.
    real tau_one(const SimpleFunction& h, const Rect& Q, real tol = 1e-9L) const {
        return t1_generic(h, Q, tol, /*one_in_first_slot=*/true);
    }

    // tau(h, 1), same construction with the slots exchanged.
    real tau_one_left(const SimpleFunction& h, const Rect& Q, real tol = 1e-9L) const {
        return t1_generic(h, Q, tol, /*one_in_first_slot=*/false);
    }

    // tau(D_P f, 1) as the same-generation sum over cubes Q of gen(P).
    // Rings 0..7 are paired cube by cube; beyond that, absolute convergence
    // lets rings be grouped into doubling annuli (each exactly tiled by
    // same-generation cubes, so finite additivity preserves the sum) and the
    // remainder is certified by the Dini tail bound.
    TauD1Stats tau_D1_stats(const SimpleFunction& f, const DyadicCube& P,
                            const ShiftSequence& theta, real tol = 1e-9L) const {
        TauD1Stats st;
        SimpleFunction h = D_op(f, P, theta);
        if (h.trivially_zero()) return st;
        const int d = kernel_.dim();
        real l1 = fn_lp_norm(h, 1.0);
        Rect pr = cube_rect(P, theta);
        DyadicRational len = cube_length(P);

        CompensatedSum val, abs_acc;
        // Individual cubes out to ring 7: offsets n with max_a |n_a| <= 7.
        const int kNear = 7;
        std::vector<int> n(size_t(d), -kNear);
        for (;;) {
            Rect qr = pr;
            for (int a = 0; a < d; ++a) {
                DyadicRational off = DyadicRational(n[size_t(a)]) * len;
                qr.lo[size_t(a)] = qr.lo[size_t(a)] + off;
                qr.hi[size_t(a)] = qr.hi[size_t(a)] + off;
            }
            real t = tau(h, indicator(qr));
            val.add(t);
            abs_acc.add(std::fabs(t));
            int a = 0;
            while (a < d && ++n[size_t(a)] > kNear) {
                n[size_t(a)] = -kNear;
                ++a;
            }
            if (a == d) break;
        }

        // Doubling boxes of same-generation cubes: spans S, 2S+1, ...
        std::vector<real> z(size_t(d), 0);
        {
            Point zc = cube_center(P, theta);
            for (int a = 0; a < d; ++a) z[size_t(a)] = zc[size_t(a)].to_real();
        }
        long S = kNear;
        Rect inner = pr;
        for (int a = 0; a < d; ++a) {
            DyadicRational off = DyadicRational(bigint(S)) * len;
            inner.lo[size_t(a)] = inner.lo[size_t(a)] - off;
            inner.hi[size_t(a)] = inner.hi[size_t(a)] + off;
        }
        for (int m = 0; m < 200; ++m) {
            // Remainder beyond span S: |x - z_P| >= (S + 1/2) l(P), so the
            // proof's bound is ||h||_1 d 2^d int_{u < 1/(2S+1)} omega(u)/u du.
            real u = 1.0L / real(2 * S + 1);
            real rem = l1 * real(d) * std::pow(real(2), real(d)) *
                       kernel_.modulus().dini_integral_below(u);
            if (rem < tol) {
                st.value = val.value();
                st.abs_sum = abs_acc.value();
                st.annuli = m;
                real denom = (wbp_stats_.max_ratio + kernel_.c_K() +
                              kernel_.modulus().dini_norm(0)) * l1;
                st.bound_constant = denom > 0 ? st.abs_sum / denom : 0;
                return st;
            }
            long S2 = 2 * S + 1;
            Rect outer = pr;
            for (int a = 0; a < d; ++a) {
                DyadicRational off = DyadicRational(bigint(S2)) * len;
                outer.lo[size_t(a)] = outer.lo[size_t(a)] - off;
                outer.hi[size_t(a)] = outer.hi[size_t(a)] + off;
            }
            for (const auto& A : detail::annulus_rects(outer, inner)) {
                real t = centered_far(A, h, z, /*one_in_first_slot=*/false);
                val.add(t);
                abs_acc.add(std::fabs(t));
            }
            inner = outer;
            S = S2;
        }
        throw Error("tau_D1: tail bound did not certify");
    }

    real tau_D1(const SimpleFunction& f, const DyadicCube& P, const ShiftSequence& theta,
                real tol = 1e-9L) const {
        return tau_D1_stats(f, P, theta, tol).value;
    }

    // sup |tau(1_Q, 1_Q)| / |Q| over the given cubes.
    real wbp_probe(const std::vector<Rect>& cubes) const {
        real best = 0;
        for (const auto& q : cubes) {
            real ratio = std::fabs(pair(q, q)) / q.measure().to_real();
            if (ratio > best) best = ratio;
        }
        std::lock_guard<std::mutex> lk(mu_);
        wbp_stats_.samples += long(cubes.size());
        if (best > wbp_stats_.max_ratio) wbp_stats_.max_ratio = best;
        return best;
    }

    real swbp_value(const Rect& R, const Rect& S, const Rect& Q) const {
        for (int a = 0; a < Q.dim(); ++a) {
            if (R.lo[size_t(a)] < Q.lo[size_t(a)] || Q.hi[size_t(a)] < R.hi[size_t(a)] ||
                S.lo[size_t(a)] < Q.lo[size_t(a)] || Q.hi[size_t(a)] < S.hi[size_t(a)])
                throw Error("swbp_value: rectangles must lie inside Q");
        }
        real ratio = std::fabs(pair(R, S)) / Q.measure().to_real();
        std::lock_guard<std::mutex> lk(mu_);
        ++swbp_stats_.samples;
        if (ratio > swbp_stats_.max_ratio) swbp_stats_.max_ratio = ratio;
        return ratio;
    }

    // sup |tau(1_R, 1_S)| / |Q| over randomly sampled rectangles R, S inside
    // random dyadic cubes Q.  Kernels without an overlap rule only see
    // interior-disjoint pairs.
    real swbp_probe(uint64_t seed, int samples) const {
        const int d = kernel_.dim();
        real best = 0;
        int done = 0;
        for (uint64_t i = 0; done < samples && i < uint64_t(samples) * 64; ++i) {
            int j = int(derive_u64(seed, 1, i) % 5) - 2;
            DyadicRational side = DyadicRational::pow2(-j);
            Rect Q;
            Q.lo.resize(size_t(d));
            Q.hi.resize(size_t(d));
            Rect R = Q, S = Q;
            for (int a = 0; a < d; ++a) {
                long c = long(derive_u64(seed, 2 + uint64_t(a), i) % 17) - 8;
                DyadicRational lo = DyadicRational(bigint(c)) * side * DyadicRational::pow2(-2);
                Q.lo[size_t(a)] = lo;
                Q.hi[size_t(a)] = lo + side;
                auto frac = [&](uint64_t tag, uint64_t lim) {
                    return DyadicRational(bigint(long(derive_u64(seed, tag, i) % lim)));
                };
                DyadicRational eighth = side * DyadicRational::pow2(-3);
                DyadicRational r0 = frac(10 + uint64_t(a), 8), r1 = frac(20 + uint64_t(a), 8);
                if (r1 < r0) std::swap(r0, r1);
                R.lo[size_t(a)] = lo + r0 * eighth;
                R.hi[size_t(a)] = lo + (r1 + DyadicRational(1)) * eighth;
                DyadicRational s0 = frac(30 + uint64_t(a), 8), s1 = frac(40 + uint64_t(a), 8);
                if (s1 < s0) std::swap(s0, s1);
                S.lo[size_t(a)] = lo + s0 * eighth;
                S.hi[size_t(a)] = lo + (s1 + DyadicRational(1)) * eighth;
            }
            if (!kernel_.has_overlap_rule() &&
                !(rect_intersect(R, S).measure() == DyadicRational(0)))
                continue;
            real ratio = swbp_value(R, S, Q);
            if (ratio > best) best = ratio;
            ++done;
        }
        return best;
    }

    ProbeStats wbp_stats() const {
        std::lock_guard<std::mutex> lk(mu_);
        return wbp_stats_;
    }
    ProbeStats swbp_stats() const {
        std::lock_guard<std::mutex> lk(mu_);
        return swbp_stats_;
    }
    size_t pair_cache_size() const {
        std::lock_guard<std::mutex> lk(mu_);
        return cache_.size();
    }
    size_t pair_cache_hits() const {
        std::lock_guard<std::mutex> lk(mu_);
        return hits_;
    }

private:
    // Far-field contribution of one annulus box A: the centred integrand
    // [K(x,y) - K(z,y)] h (or its slot-exchanged twin) integrated over
    // A x supp-term.  The subtracted term integrates to zero against the
    // mean-zero h, so this equals the plain pairing sum; evaluating the
    // difference directly avoids the catastrophic cancellation the raw
    // closed forms hit once the annulus coordinates grow to ~2^30.
    real centered_far(const Rect& A, const SimpleFunction& h, const std::vector<real>& z,
                      bool one_in_first_slot) const {
        const int d = kernel_.dim();
        CompensatedSum acc;
        std::vector<real> lo(size_t(2 * d), 0), hi(size_t(2 * d), 0);
        for (const auto& t : h.terms) {
            if (t.coeff == 0 || t.rect.empty()) continue;
            const Rect& ybox = one_in_first_slot ? A : t.rect;
            const Rect& xbox = one_in_first_slot ? t.rect : A;
            for (int a = 0; a < d; ++a) {
                lo[size_t(a)] = ybox.lo[size_t(a)].to_real();
                hi[size_t(a)] = ybox.hi[size_t(a)].to_real();
                lo[size_t(d + a)] = xbox.lo[size_t(a)].to_real();
                hi[size_t(d + a)] = xbox.hi[size_t(a)].to_real();
            }
            real v = gl_integrate_box(
                [&](const real* pt) {
                    return one_in_first_slot
                               ? kernel_.eval(pt + d, pt) - kernel_.eval(z.data(), pt)
                               : kernel_.eval(pt + d, pt) - kernel_.eval(pt + d, z.data());
                },
                lo.data(), hi.data(), 2 * d, 20);
            acc.add(to_real(t.coeff) * v);
        }
        return acc.value();
    }

    real t1_generic(const SimpleFunction& h, const Rect& Q, real tol,
                    bool one_in_first_slot) const {
        const int d = kernel_.dim();
        if (h.d != d || Q.dim() != d) throw Error("tau_one: dimension mismatch");
        if (fn_integral(h) != 0) throw Error("tau_one: h must have zero mean");
        DyadicRational side = Q.hi[0] - Q.lo[0];
        for (int a = 1; a < d; ++a)
            if (!(Q.hi[size_t(a)] - Q.lo[size_t(a)] == side))
                throw Error("tau_one: Q must be a cube");
        auto box = fn_bbox(h);
        if (box) {
            for (int a = 0; a < d; ++a)
                if (box->lo[size_t(a)] < Q.lo[size_t(a)] || Q.hi[size_t(a)] < box->hi[size_t(a)])
                    throw Error("tau_one: supp h must lie inside Q");
        }
        if (t1_fast_ && kernel_.type() == KernelType::hilbert) return 0;

        std::vector<real> z(size_t(d), 0);
        DyadicRational half = DyadicRational::pow2(-1);
        for (int a = 0; a < d; ++a)
            z[size_t(a)] = ((Q.lo[size_t(a)] + Q.hi[size_t(a)]) * half).to_real();

        Rect inner = detail::concentric_scale(Q, 3);
        CompensatedSum acc;
        {
            SimpleFunction near = indicator(inner);
            acc.add(one_in_first_slot ? tau(near, h) : tau(h, near));
        }

        real l1 = fn_lp_norm(h, 1.0);
        for (int m = 0; m < 200; ++m) {
            // Remainder beyond the current box of half-side (3/2) 2^m l(Q):
            // ||h||_1 d 2^d int_{u < 2^{-m}/3} omega(u)/u du.
            real u = 1.0L / (3 * std::pow(real(2), real(m)));
            real rem = l1 * real(d) * std::pow(real(2), real(d)) *
                       kernel_.modulus().dini_integral_below(u);
            if (rem < tol) return acc.value();
            Rect outer = detail::concentric_scale(inner, 2);
            for (const auto& A : detail::annulus_rects(outer, inner))
                acc.add(centered_far(A, h, z, one_in_first_slot));
            inner = outer;
        }
        throw Error("tau_one: tail bound did not certify");
    }

    Kernel kernel_;
    bool t1_fast_ = false;
    bool cache_enabled_ = true;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, real> cache_;
    mutable size_t hits_ = 0;
    mutable ProbeStats wbp_stats_;
    mutable ProbeStats swbp_stats_;
};

} // namespace dyrep
