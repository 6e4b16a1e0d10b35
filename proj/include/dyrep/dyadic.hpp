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

#include "dyrep/common.hpp"

#include <algorithm>
#include <compare>
#include <string>
#include <vector>

namespace dyrep {

// Exact dyadic rational m / 2^e.  Canonical form: m odd, or e == 0.
// All grid geometry lives in this type; nothing here ever rounds.
class DyadicRational {
  public:
    DyadicRational() : m_(0), e_(0) {}
    DyadicRational(bigint m, unsigned e) : m_(std::move(m)), e_(e) { normalize(); }
    DyadicRational(long long v) : m_(v), e_(0) {}  // NOLINT: implicit by design
    DyadicRational(const bigint& v) : m_(v), e_(0) {}

    static DyadicRational pow2(int k) {
        // 2^k for k of either sign.
        if (k >= 0) return DyadicRational(bigint(1) << k, 0);
        return DyadicRational(1, unsigned(-k));
    }

    const bigint& mantissa() const { return m_; }
    unsigned exponent() const { return e_; }
    bool is_zero() const { return m_ == 0; }
    bool is_integer() const { return e_ == 0; }

    DyadicRational operator-() const { return DyadicRational(-m_, e_); }

    DyadicRational operator+(const DyadicRational& o) const {
        unsigned e = std::max(e_, o.e_);
        return DyadicRational((m_ << (e - e_)) + (o.m_ << (e - o.e_)), e);
    }
    DyadicRational operator-(const DyadicRational& o) const { return *this + (-o); }
    DyadicRational operator*(const DyadicRational& o) const {
        return DyadicRational(m_ * o.m_, e_ + o.e_);
    }

    std::strong_ordering operator<=>(const DyadicRational& o) const {
        unsigned e = std::max(e_, o.e_);
        bigint a = m_ << (e - e_);
        bigint b = o.m_ << (e - o.e_);
        if (a < b) return std::strong_ordering::less;
        if (a > b) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }
    bool operator==(const DyadicRational& o) const { return (*this <=> o) == 0; }

    // floor(value * 2^g), exact.
    bigint floor_scaled(int g) const {
        int sh = g - int(e_);
        if (sh >= 0) return m_ << sh;
        bigint div = bigint(1) << (-sh);
        bigint q = m_ / div;
        if (m_ < 0 && q * div != m_) --q;
        return q;
    }
    // ceil(value * 2^g), exact.
    bigint ceil_scaled(int g) const { return -((-*this).floor_scaled(g)); }

    bigrat to_rational() const { return bigrat(m_, bigint(1) << e_); }
    real to_real() const { return dyrep::to_real(m_) * std::pow(real(2), -real(e_)); }

    // Canonical text form "m/2^e" (kept even for e == 0, so round trips are
    // trivially bit-exact).
    std::string str() const {
        return m_.str() + "/2^" + std::to_string(e_);
    }
    static DyadicRational parse(const std::string& s);

  private:
    void normalize() {
        if (m_ == 0) {
            e_ = 0;
            return;
        }
        while (e_ > 0 && (m_ & 1) == 0) {
            m_ >>= 1;
            --e_;
        }
    }
    bigint m_;
    unsigned e_;
};

inline DyadicRational DyadicRational::parse(const std::string& s) {
    auto bad = [&] { throw Error("DyadicRational::parse: malformed \"" + s + "\""); };
    std::string t = s;
    size_t slash = t.find('/');
    std::string mant = t.substr(0, slash);
    unsigned e = 0;
    if (slash != std::string::npos) {
        std::string den = t.substr(slash + 1);
        if (den.size() < 3 || den[0] != '2' || den[1] != '^') bad();
        try {
            e = unsigned(std::stoul(den.substr(2)));
        } catch (...) {
            bad();
        }
    }
    if (mant.empty()) bad();
    for (size_t i = 0; i < mant.size(); ++i)
        if (!(std::isdigit((unsigned char)mant[i]) || (i == 0 && mant[i] == '-'))) bad();
    if (mant == "-") bad();
    return DyadicRational(bigint(mant), e);
}

using Point = std::vector<DyadicRational>;

inline std::string rational_str(const bigrat& r) {
    return numerator(r).str() + "/" + denominator(r).str();
}

inline bigrat parse_rational(const std::string& s) {
    auto bad = [&] { throw Error("parse_rational: malformed \"" + s + "\""); };
    size_t slash = s.find('/');
    std::string num = s.substr(0, slash);
    std::string den = slash == std::string::npos ? "1" : s.substr(slash + 1);
    if (num.empty() || den.empty()) bad();
    auto check = [&](const std::string& v) {
        for (size_t i = 0; i < v.size(); ++i)
            if (!(std::isdigit((unsigned char)v[i]) || (i == 0 && v[i] == '-'))) bad();
        if (v == "-") bad();
    };
    check(num);
    check(den);
    bigint q(den);
    if (q == 0) bad();
    return bigrat(bigint(num), q);
}

} // namespace dyrep
