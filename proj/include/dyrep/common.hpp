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

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyrep {

// All kernel-side arithmetic runs in 80-bit extended precision.  The algebraic
// identity checks cancel thousands of closed-form log evaluations against each
// other; 64-bit roundoff would eat the whole 1e-12 tolerance budget.
using real = long double;

using bigint = boost::multiprecision::cpp_int;
using bigrat = boost::multiprecision::cpp_rational;

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline real to_real(const bigint& v) { return v.convert_to<real>(); }
inline real to_real(const bigrat& v) { return v.convert_to<real>(); }

// Neumaier-compensated accumulator; reduction results do not depend on how
// the summands were produced being grouped by the caller.
class CompensatedSum {
  public:
    void add(real x) {
        real t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    real value() const { return sum_ + comp_; }

  private:
    real sum_ = 0;
    real comp_ = 0;
};

// --- deterministic counter-based bit streams -------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stateless stream: value i of stream (seed, tag).  Used so that Monte-Carlo
// sample s never depends on how many draws sample s-1 consumed.
inline std::uint64_t derive_u64(std::uint64_t seed, std::uint64_t tag, std::uint64_t i) {
    return splitmix64(splitmix64(seed ^ (0x517cc1b727220a95ULL * tag)) + i);
}

inline double derive_unit(std::uint64_t seed, std::uint64_t tag, std::uint64_t i) {
    return (derive_u64(seed, tag, i) >> 11) * 0x1.0p-53;
}

// --- tiny statistics helpers ------------------------------------------------

struct LineFit {
    double slope = 0;
    double intercept = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("fit_line: need >= 2 points");
    double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    if (den == 0) throw Error("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("pearson: need >= 2 points");
    double n = double(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double cxy = 0, cxx = 0, cyy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        cxy += (x[i] - mx) * (y[i] - my);
        cxx += (x[i] - mx) * (x[i] - mx);
        cyy += (y[i] - my) * (y[i] - my);
    }
    if (cxx == 0 || cyy == 0) return 0;
    return cxy / std::sqrt(cxx * cyy);
}

} // namespace dyrep
