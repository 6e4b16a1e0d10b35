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

#include <cmath>
#include <sstream>
#include <string>

#include "dyrep/quadrature.hpp"

namespace dyrep {

// Modulus of continuity omega(t) = c t^delta (or identically zero).
// Nonnegative and nondecreasing on [0, 1/2] by construction.
class Modulus {
public:
    static Modulus power(real c, real delta) {
        if (c < 0) throw Error("Modulus: coefficient must be nonnegative");
        if (delta <= 0 || delta > 1) throw Error("Modulus: exponent must lie in (0, 1]");
        return Modulus(c, delta);
    }
    static Modulus zero() { return Modulus(0, 1); }

    bool is_zero() const { return c_ == 0; }
    real coefficient() const { return c_; }
    real exponent() const { return delta_; }

    real operator()(real t) const {
        if (t < 0) throw Error("Modulus: negative argument");
        if (c_ == 0 || t == 0) return 0;
        return c_ * std::pow(t, delta_);
    }

    // integral over (0, 1/2] of omega(u) log^s(1/u) du/u, absolute error
    // well below 1e-10.  Substituting u = e^{-t} turns it into
    // c * integral over [ln 2, inf) of e^{-delta t} t^s dt; panels of width
    // 4/delta keep the Gauss error negligible and the dropped tail is bounded
    // by 2 c e^{-delta T} T^s / delta once delta T >= 2s.
    real dini_norm(real s) const {
        if (s < 0) throw Error("dini_norm: s must be nonnegative");
        if (c_ == 0) return 0;
        const real L = std::log(2.0L);
        const real width = 4.0L / delta_;
        CompensatedSum acc;
        real t0 = L;
        for (int panel = 0; panel < 100000; ++panel) {
            real t1 = t0 + width;
            acc.add(gl_integrate(
                [&](real t) { return c_ * std::exp(-delta_ * t) * std::pow(t, s); }, t0, t1, 32));
            t0 = t1;
            if (delta_ * t0 >= 2 * s + 4) {
                real tail = 2 * c_ * std::exp(-delta_ * t0) * std::pow(t0, s) / delta_;
                if (tail < 1e-14L) return acc.value();
            }
        }
        throw Error("dini_norm: quadrature did not converge; partial value " +
                    std::to_string(double(acc.value())));
    }

    // integral over (0, u0] of omega(u) du/u = c u0^delta / delta, the
    // far-field remainder weight; exact antiderivative, no quadrature.
    real dini_integral_below(real u0) const {
        if (u0 < 0) throw Error("dini_integral_below: negative argument");
        if (c_ == 0 || u0 == 0) return 0;
        return c_ * std::pow(u0, delta_) / delta_;
    }

    // Sum over k > k_max of omega(2^{-k}) k^s.
    real tail_sum(int k_max, real s) const {
        if (c_ == 0) return 0;
        const real r = std::pow(0.5L, delta_);
        CompensatedSum acc;
        real pw = c_ * std::pow(r, real(k_max + 1));
        for (int k = k_max + 1; k < 2000000; ++k) {
            real term = pw * std::pow(real(k), s);
            acc.add(term);
            pw *= r;
            // Once the term ratio is safely below 1, a geometric bound closes
            // the remainder; stop when it cannot move the sum at 1e-17.
            real ratio = r * std::pow(1.0L + 1.0L / real(k), s);
            if (ratio < 0.999L && term * ratio / (1 - ratio) < 1e-17L * std::fabs(acc.value()))
                return acc.value();
        }
        throw Error("tail_sum: series did not settle");
    }

    // Sum over k > k_max of omega(2^{-k}) (1 + log k).
    real tail_sum_log(int k_max) const {
        if (c_ == 0) return 0;
        const real r = std::pow(0.5L, delta_);
        CompensatedSum acc;
        real pw = c_ * std::pow(r, real(k_max + 1));
        for (int k = k_max + 1; k < 2000000; ++k) {
            real term = pw * (1 + std::log(real(k)));
            acc.add(term);
            pw *= r;
            real ratio = r * (1 + std::log(real(k + 1))) / (1 + std::log(real(k)));
            if (ratio < 0.999L && term * ratio / (1 - ratio) < 1e-17L * std::fabs(acc.value()))
                return acc.value();
        }
        throw Error("tail_sum_log: series did not settle");
    }

    std::string describe() const {
        if (is_zero()) return "zero";
        std::ostringstream os;
        os << "power c=" << double(c_) << " delta=" << double(delta_);
        return os.str();
    }

private:
    Modulus(real c, real delta) : c_(c), delta_(delta) {}
    real c_;
    real delta_;
};

} // namespace dyrep
