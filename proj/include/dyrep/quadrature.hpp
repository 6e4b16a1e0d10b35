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
#include <map>
#include <mutex>
#include <vector>

#include "dyrep/common.hpp"

namespace dyrep {

// Gauss-Legendre nodes and weights on [-1, 1].
struct GLRule {
    std::vector<real> x;
    std::vector<real> w;
};

namespace detail {

inline GLRule make_gl_rule(int n) {
    GLRule rule;
    rule.x.resize(size_t(n));
    rule.w.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        // Tricomi initial guess, then Newton on the three-term recurrence.
        real x = std::cos(real(M_PI) * (real(i) + 0.75L) / (real(n) + 0.5L));
        real dp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            real p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                real pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / real(k);
                p0 = p1;
                p1 = pk;
            }
            dp = real(n) * (x * p1 - p0) / (x * x - 1);
            real dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-19L) break;
        }
        rule.x[size_t(i)] = x;
        rule.w[size_t(i)] = 2.0L / ((1 - x * x) * dp * dp);
    }
    return rule;
}

} // namespace detail

inline const GLRule& gl_rule(int n) {
    if (n < 1) throw Error("gl_rule: order must be positive");
    static std::map<int, GLRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::make_gl_rule(n)).first;
    return it->second;
}

template <class F>
real gl_integrate(F&& f, real a, real b, int n) {
    const GLRule& r = gl_rule(n);
    real mid = (a + b) / 2, half = (b - a) / 2;
    CompensatedSum acc;
    for (size_t i = 0; i < r.x.size(); ++i) acc.add(r.w[i] * f(mid + half * r.x[i]));
    return acc.value() * half;
}

// Tensor-product rule over a box, same order on every axis.  dim <= 8.
template <class F>
real gl_integrate_box(F&& f, const real* lo, const real* hi, int dim, int n) {
    const GLRule& r = gl_rule(n);
    std::vector<int> idx(size_t(dim), 0);
    std::vector<real> pt(size_t(dim), 0);
    real scale = 1;
    for (int a = 0; a < dim; ++a) scale *= (hi[a] - lo[a]) / 2;
    CompensatedSum acc;
    for (;;) {
        real w = 1;
        for (int a = 0; a < dim; ++a) {
            size_t i = size_t(idx[size_t(a)]);
            pt[size_t(a)] = (lo[a] + hi[a]) / 2 + (hi[a] - lo[a]) / 2 * r.x[i];
            w *= r.w[i];
        }
        acc.add(w * f(pt.data()));
        int a = dim - 1;
        while (a >= 0 && ++idx[size_t(a)] == n) idx[size_t(a--)] = 0;
        if (a < 0) break;
    }
    return acc.value() * scale;
}

} // namespace dyrep
