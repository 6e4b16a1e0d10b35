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

// Serialization and experiment plumbing: JSON round trips for simple
// functions, key=value run configs with provenance hashing, named input
// presets, seeded random instances, and CSV emission.  Everything here is
// deterministic: identical config and seed reproduce identical bytes.

#pragma once

#include "dyrep/rep.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dyrep {

// --- simple function JSON ----------------------------------------------------

// {"d": int, "terms": [{"rect": [[lo, hi], ...], "coeff": "p/q"}]} with
// endpoints as dyadic strings "m/2^e"; the round trip is bit exact.
inline nlohmann::json fn_to_json(const SimpleFunction& f) {
    nlohmann::json j;
    j["d"] = f.d;
    j["terms"] = nlohmann::json::array();
    for (const auto& t : f.terms) {
        nlohmann::json rect = nlohmann::json::array();
        for (size_t ax = 0; ax < t.rect.lo.size(); ++ax)
            rect.push_back({t.rect.lo[ax].str(), t.rect.hi[ax].str()});
        j["terms"].push_back({{"rect", rect}, {"coeff", rational_str(t.coeff)}});
    }
    return j;
}

inline SimpleFunction fn_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("d") || !j.contains("terms"))
        throw Error("fn_from_json: expected {\"d\", \"terms\"}");
    SimpleFunction f;
    f.d = j.at("d").get<int>();
    if (f.d < 1) throw Error("fn_from_json: dimension must be positive");
    for (const auto& tj : j.at("terms")) {
        const auto& rj = tj.at("rect");
        if (int(rj.size()) != f.d)
            throw Error("fn_from_json: rect arity differs from d");
        Rect r;
        for (const auto& side : rj) {
            if (side.size() != 2) throw Error("fn_from_json: rect side needs [lo, hi]");
            r.lo.push_back(DyadicRational::parse(side.at(0).get<std::string>()));
            r.hi.push_back(DyadicRational::parse(side.at(1).get<std::string>()));
        }
        f.terms.push_back({r, parse_rational(tj.at("coeff").get<std::string>())});
    }
    return f;
}

inline SimpleFunction fn_from_json_text(const std::string& text) {
    return fn_from_json(nlohmann::json::parse(text));
}

// --- run configuration ---------------------------------------------------------

struct RunConfig {
    std::string kernel;   // "", "hilbert", or "power"; "" defers to the preset
    double delta = 0.5;   // power-kernel exponent
    std::string f = "hilbert-standard";
    std::string g;        // empty: taken from the preset, else same as f
    int a = -4;
    int b = 8;
    int k_max = 10;
    long long samples = 20000;
    std::uint64_t seed = 1;
    double p = 2.0;
    int threads = 1;
    int d = 1;            // goodness-stats dimension
    int k = 3;            // goodness-stats band index
    std::string omega = "power:1";  // dini modulus spec
    double s = 0.0;       // dini weight exponent
    std::string out = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// One value in an assignment list: bare token up to the next comma, a quoted
// string, or a balanced JSON object.
inline std::string take_value(const std::string& s, size_t& pos) {
    if (pos < s.size() && s[pos] == '"') {
        size_t close = s.find('"', pos + 1);
        if (close == std::string::npos) throw Error("config: unterminated string");
        std::string v = s.substr(pos + 1, close - pos - 1);
        pos = close + 1;
        return v;
    }
    if (pos < s.size() && s[pos] == '{') {
        int depth = 0;
        bool in_str = false;
        for (size_t i = pos; i < s.size(); ++i) {
            char c = s[i];
            if (in_str) {
                if (c == '"') in_str = false;
                continue;
            }
            if (c == '"') in_str = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                std::string v = s.substr(pos, i - pos + 1);
                pos = i + 1;
                return v;
            }
        }
        throw Error("config: unbalanced braces");
    }
    size_t comma = s.find(',', pos);
    size_t end = comma == std::string::npos ? s.size() : comma;
    std::string v = trim(s.substr(pos, end - pos));
    pos = end;
    return v;
}

inline long long to_ll(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        long long r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw Error("config: bad integer for " + key + ": \"" + v + "\"");
    }
}

inline double to_dbl(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw Error("config: bad number for " + key + ": \"" + v + "\"");
    }
}

}  // namespace detail

inline void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "kernel") cfg.kernel = value;
    else if (key == "delta") cfg.delta = detail::to_dbl(key, value);
    else if (key == "f") cfg.f = value;
    else if (key == "g") cfg.g = value;
    else if (key == "a") cfg.a = int(detail::to_ll(key, value));
    else if (key == "b") cfg.b = int(detail::to_ll(key, value));
    else if (key == "k-max" || key == "k_max") cfg.k_max = int(detail::to_ll(key, value));
    else if (key == "samples") cfg.samples = detail::to_ll(key, value);
    else if (key == "seed") cfg.seed = std::uint64_t(detail::to_ll(key, value));
    else if (key == "p") cfg.p = detail::to_dbl(key, value);
    else if (key == "threads") cfg.threads = int(detail::to_ll(key, value));
    else if (key == "d") cfg.d = int(detail::to_ll(key, value));
    else if (key == "k") cfg.k = int(detail::to_ll(key, value));
    else if (key == "omega") cfg.omega = value;
    else if (key == "s") cfg.s = detail::to_dbl(key, value);
    else if (key == "out") cfg.out = value;
    else throw Error("config: unknown key \"" + key + "\"");
}

// key = value assignments, comma separable on one line; '#' starts a
// full-line comment.  Values may be bare, quoted, or JSON objects.
inline void parse_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t pos = 0;
        while (pos < t.size()) {
            while (pos < t.size() && (t[pos] == ',' || t[pos] == ' ' || t[pos] == '\t'))
                ++pos;
            if (pos >= t.size()) break;
            size_t eq = t.find('=', pos);
            if (eq == std::string::npos)
                throw Error("config: expected key=value in \"" + t + "\"");
            std::string key = detail::trim(t.substr(pos, eq - pos));
            pos = eq + 1;
            while (pos < t.size() && (t[pos] == ' ' || t[pos] == '\t')) ++pos;
            config_set(cfg, key, detail::take_value(t, pos));
        }
    }
}

inline void parse_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    parse_config_text(cfg, buf.str());
}

// Canonical one-line echo of every result-affecting field.  The output
// directory and worker count are deliberately absent: results are invariant
// under both, and the echo is hashed into every artifact.
inline std::string config_echo(const RunConfig& cfg) {
    std::ostringstream o;
    o << "kernel=" << (cfg.kernel.empty() ? "auto" : cfg.kernel) << ";delta=" << cfg.delta
      << ";f=" << cfg.f << ";g=" << cfg.g << ";a=" << cfg.a << ";b=" << cfg.b
      << ";k_max=" << cfg.k_max << ";samples=" << cfg.samples << ";seed=" << cfg.seed
      << ";p=" << cfg.p << ";d=" << cfg.d << ";k=" << cfg.k << ";omega=" << cfg.omega
      << ";s=" << cfg.s;
    return o.str();
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// --- presets and instances -----------------------------------------------------

struct Instance {
    Kernel kernel = Kernel::hilbert();
    SimpleFunction f, g;
};

namespace detail {

inline Rect unit_box(int d, const std::vector<long long>& lo) {
    Rect r;
    for (int ax = 0; ax < d; ++ax) {
        r.lo.push_back(DyadicRational(bigint(lo[size_t(ax)]), 0u));
        r.hi.push_back(DyadicRational(bigint(lo[size_t(ax)] + 1), 0u));
    }
    return r;
}

inline std::optional<Instance> preset_instance(const std::string& name, double delta) {
    if (name == "hilbert-standard") {
        Instance inst;
        inst.kernel = Kernel::hilbert();
        inst.f = indicator(unit_box(1, {0}));
        inst.g = indicator(unit_box(1, {2}));
        return inst;
    }
    if (name == "hilbert-meanzero") {
        Instance inst;
        inst.kernel = Kernel::hilbert();
        inst.f = fn_sub(indicator(unit_box(1, {0})), indicator(unit_box(1, {1})));
        inst.g = inst.f;
        return inst;
    }
    if (name == "d2-power") {
        Instance inst;
        inst.kernel = Kernel::power(2, real(delta));
        inst.f = indicator(unit_box(2, {0, 0}));
        inst.g = indicator(unit_box(2, {2, 0}));
        return inst;
    }
    return std::nullopt;
}

inline SimpleFunction load_fn(const std::string& spec) {
    if (!spec.empty() && spec[0] == '{') return fn_from_json_text(spec);
    std::ifstream in(spec);
    if (!in) throw Error("config: \"" + spec + "\" is neither a preset, JSON, nor a file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return fn_from_json_text(buf.str());
}

}  // namespace detail

// Resolve kernel and input pair.  `f` may name a preset, carry inline JSON,
// or point at a JSON file; `g` defaults to the preset partner (or to f).
// An explicit kernel setting overrides the preset's choice.
inline Instance make_instance(const RunConfig& cfg) {
    Instance inst;
    std::optional<Instance> preset = detail::preset_instance(cfg.f, cfg.delta);
    if (preset) {
        inst = *preset;
    } else {
        inst.f = detail::load_fn(cfg.f);
        inst.g = inst.f;
        inst.kernel = inst.f.d == 1 ? Kernel::hilbert()
                                    : Kernel::power(inst.f.d, real(cfg.delta));
    }
    if (!cfg.g.empty()) {
        std::optional<Instance> gp = detail::preset_instance(cfg.g, cfg.delta);
        inst.g = gp ? gp->g : detail::load_fn(cfg.g);
    }
    if (cfg.kernel == "hilbert") inst.kernel = Kernel::hilbert();
    else if (cfg.kernel == "power") inst.kernel = Kernel::power(inst.f.d, real(cfg.delta));
    else if (!cfg.kernel.empty())
        throw Error("config: unknown kernel \"" + cfg.kernel + "\"");
    if (inst.f.d != inst.g.d) throw Error("config: f and g dimensions differ");
    if (inst.f.d != inst.kernel.dim())
        throw Error("config: kernel dimension does not match the inputs");
    return inst;
}

// --- random instances ------------------------------------------------------------

// Piecewise-rational function with endpoints on the eighth-integer lattice
// inside [base8, base8+span8)/8 per axis.
inline SimpleFunction random_simple_fn(int d, std::uint64_t seed, long long base8,
                                       long long span8, int max_terms = 3) {
    if (span8 < 16) throw Error("random_simple_fn: span too small");
    SimpleFunction f;
    f.d = d;
    int terms = 1 + int(derive_u64(seed, 1, 0) % std::uint64_t(max_terms));
    for (int t = 0; t < terms; ++t) {
        Rect r;
        for (int ax = 0; ax < d; ++ax) {
            std::uint64_t u = derive_u64(seed, 2, std::uint64_t(t * 64 + ax));
            long long w = 2 + (long long)(u % 10);
            long long lo =
                base8 + (long long)(derive_u64(seed, 3, std::uint64_t(t * 64 + ax)) %
                                    std::uint64_t(span8 - w));
            r.lo.push_back(DyadicRational(bigint(lo), 3u));
            r.hi.push_back(DyadicRational(bigint(lo + w), 3u));
        }
        long long num = (long long)(derive_u64(seed, 4, std::uint64_t(t)) % 9) - 4;
        if (num == 0) num = 2;
        f.terms.push_back({r, bigrat(num, 2)});
    }
    return f;
}

// Input pair whose supports sit farther apart (in sup distance) than the
// coarsest window cube, so every window cube meets at most one support and
// the band reorganization truncates exactly at the pair's horizon.
inline std::pair<SimpleFunction, SimpleFunction> random_separated_pair(int d, int a,
                                                                       std::uint64_t seed) {
    if (a > 0) throw Error("random_separated_pair: expected a <= 0");
    long long off = (8ll << (-a)) + 8;  // coarse side in eighths, plus margin
    SimpleFunction f = random_simple_fn(d, derive_u64(seed, 5, 0), -off - 48, 48);
    SimpleFunction g = random_simple_fn(d, derive_u64(seed, 6, 0), 0, 48);
    return {f, g};
}

// --- CSV --------------------------------------------------------------------

inline std::string format_real(real v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17Lg", v);
    return buf;
}

inline std::string csv_quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// Comma separation with RFC-4180 quoting, '.' decimals, '\n' line ends;
// every file opens with provenance comments (config hash, seed, echo).
class CsvWriter {
  public:
    CsvWriter(std::ostream& os, const std::string& echo, std::uint64_t seed) : os_(os) {
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx",
                      (unsigned long long)fnv1a64(echo));
        os_ << "# config_hash=" << hex << " seed=" << seed << "\n";
        os_ << "# config: " << echo << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << csv_quote(cells[i]);
        }
        os_ << '\n';
    }

  private:
    std::ostream& os_;
};

// --- reports -----------------------------------------------------------------

inline nlohmann::json report_json(const RepReport& r) {
    nlohmann::json j;
    j["reference"] = double(r.reference);
    j["estimate"] = double(r.estimate.mean);
    j["stderr"] = double(r.estimate.std_error);
    j["samples"] = r.estimate.samples;
    j["truncation"] = {{"error_term", double(r.error_mean)},
                       {"k_tail", double(r.k_tail)}};
    j["verdict"] = r.pass ? "pass" : "fail";
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write \"" + path.string() + "\"");
    out << text;
}

}  // namespace dyrep
