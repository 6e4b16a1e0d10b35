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

// Experiment driver.  Every subcommand runs one verification, writes a CSV
// (plus scripts or JSON reports where useful) into --out, and prints one
// PASS/FAIL verdict line per checked property.  Exit code: 0 all verdicts
// pass, 1 some verdict failed, 2 configuration error.

#include "dyrep/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace dyrep;

namespace {

struct Verdicts {
    bool all = true;

    void line(const std::string& cmd, bool pass, const std::string& detail) {
        all = all && pass;
        std::printf("%s: %s %s\n", cmd.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
    }

    void info(const std::string& cmd, const std::string& detail) {
        std::printf("%s: %s\n", cmd.c_str(), detail.c_str());
    }
};

std::ofstream open_csv(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out);
    std::filesystem::path p = std::filesystem::path(cfg.out) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write \"" + p.string() + "\"");
    return out;
}

std::string fmt(real v) { return format_real(v); }
std::string fmt_int(long long v) { return std::to_string(v); }

real bcr_tolerance(const Kernel& kernel) {
    return kernel.type() == KernelType::hilbert ? 1e-12L : 1e-8L;
}

// Direct witness that the renormalized constant functional vanishes for this
// kernel; gates the closed-form shortcut used in the sampling loops.
bool t1_witness_zero(WeakForm& form) {
    if (form.kernel().type() != KernelType::hilbert) return false;
    SimpleFunction h;
    h.d = 1;
    Rect left, right, box;
    left.lo = {DyadicRational(bigint(0), 1u)};
    left.hi = {DyadicRational(bigint(1), 1u)};
    right.lo = {DyadicRational(bigint(1), 1u)};
    right.hi = {DyadicRational(bigint(2), 1u)};
    box.lo = {DyadicRational(bigint(-2), 0u)};
    box.hi = {DyadicRational(bigint(2), 0u)};
    h = fn_sub(indicator(left), indicator(right));
    form.set_t1_fast_path(false);
    real probe = form.tau_one(h, box);
    return std::fabs(double(probe)) < 1e-6;
}

// --- verify-bcr ---------------------------------------------------------------

bool run_verify_bcr(const RunConfig& cfg, Verdicts& v) {
    Instance inst = make_instance(cfg);
    WeakForm form(inst.kernel);
    real tol = bcr_tolerance(inst.kernel);
    long long n = std::min<long long>(cfg.samples, 50);
    std::ofstream os = open_csv(cfg, "verify_bcr.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"theta", "a", "b", "reference", "window_sum", "window_error",
             "reconstruction", "defect", "verdict"});
    real worst = 0;
    for (long long i = 0; i < n; ++i) {
        ShiftSequence theta = sample_theta(inst.f.d, cfg.a - 1, cfg.b + 1,
                                           derive_u64(cfg.seed, 31, std::uint64_t(i)));
        BcrReport r = bcr_check(form, inst.f, inst.g, cfg.a, cfg.b, theta);
        worst = std::max(worst, r.defect);
        csv.row({fmt_int(i), fmt_int(cfg.a), fmt_int(cfg.b), fmt(r.reference),
                 fmt(r.main), fmt(r.error), fmt(r.reconstruction), fmt(r.defect),
                 r.defect <= tol ? "pass" : "fail"});
    }
    v.line("verify-bcr", worst <= tol,
           "max_defect=" + fmt(worst) + " tol=" + fmt(tol) + " n=" + fmt_int(n));
    return worst <= tol;
}

// --- error-decay ----------------------------------------------------------------

const char* kDecayPlot =
    "# Plot script for error_decay.csv (gnuplot).\n"
    "set datafile separator ','\n"
    "set key autotitle columnhead\n"
    "set logscale y 2\n"
    "set xlabel 'window half-width n  (window [-n, n])'\n"
    "set ylabel 'window error (sup over shifts)'\n"
    "plot 'error_decay.csv' using 2:3 with linespoints title 'total', \\\n"
    "     'error_decay.csv' using 2:4 with linespoints title 'coarse', \\\n"
    "     'error_decay.csv' using 2:5 with linespoints title 'fine1', \\\n"
    "     'error_decay.csv' using 2:6 with linespoints title 'fine2'\n";

// Symmetric windows [-n, n]: the error is dominated by the coarse cutoff
// (one power per step in a) while the fine pieces shrink with b, so one
// diagonal family exhibits both fitted rates.
bool run_error_decay(const RunConfig& cfg, Verdicts& v) {
    Instance inst = make_instance(cfg);
    WeakForm form(inst.kernel);
    int n_max = std::min(-cfg.a, cfg.b);
    if (n_max < 4) throw Error("error-decay: need a <= -4 and b >= 4 for the fit");
    int n_theta = int(std::min<long long>(cfg.samples, 256));
    std::vector<std::pair<int, int>> diag;
    for (int n = 1; n <= n_max; ++n) diag.emplace_back(-n, n);
    DecayTable t = decay_scan_pairs(form, inst.f, inst.g, diag, cfg.seed, n_theta);

    std::ofstream os = open_csv(cfg, "error_decay.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"a", "b", "E_total", "E_coarse", "E_fine1", "E_fine2", "slope_a",
             "slope_b"});
    for (const DecayRow& r : t.rows)
        csv.row({fmt_int(r.a), fmt_int(r.b), fmt(r.e_total), fmt(r.e_coarse),
                 fmt(r.e_fine1), fmt(r.e_fine2), fmt(real(t.slope_a)),
                 fmt(real(t.slope_b))});
    write_text_file(std::filesystem::path(cfg.out) / "error_decay.gnuplot", kDecayPlot);

    bool mono = true;
    for (size_t i = 2; i < t.rows.size(); ++i)
        mono = mono && t.rows[i].e_total < t.rows[i - 1].e_total;
    bool sb = std::fabs(t.slope_b + 1.0) <= 0.3;
    bool sa = std::fabs(t.slope_a - 1.0) <= 0.3;
    v.line("error-decay", mono, "symmetric-window errors decreasing from n=3");
    v.line("error-decay", sb, "slope_b=" + fmt(real(t.slope_b)) + " target -1+-0.3");
    v.line("error-decay", sa, "slope_a=" + fmt(real(t.slope_a)) + " target +1+-0.3");
    return mono && sb && sa;
}

// --- verify-split ---------------------------------------------------------------

bool run_verify_split(const RunConfig& cfg, Verdicts& v) {
    Instance base = make_instance(cfg);
    WeakForm form(base.kernel);
    if (base.kernel.dim() != 1)
        throw Error("verify-split: implemented for one-dimensional kernels");
    long long n = std::min<long long>(cfg.samples, 50);
    std::ofstream os = open_csv(cfg, "verify_split.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"instance", "a", "b", "horizon", "window_sum", "reconstruction",
             "defect", "verdict"});
    const real tol = 1e-12L;
    real worst = 0;
    for (long long i = 0; i < n; ++i) {
        std::uint64_t si = derive_u64(cfg.seed, 41, std::uint64_t(i));
        int a = -2 - int(derive_u64(si, 1, 0) % 3);
        int b = 3 + int(derive_u64(si, 2, 0) % 3);
        auto [f, g] = random_separated_pair(1, a, si);
        ShiftSequence theta = sample_theta(1, a - 1, b + 1, derive_u64(si, 3, 0));
        real main = main_term(form, f, g, a, b, theta);
        int kh = rep_horizon(f, g, b);
        CompensatedSum recon;
        recon.add(diag_term(form, f, g, a, b, theta));
        for (const Gamma& gamma : gamma_all())
            for (int k = 2; k <= kh; ++k)
                recon.add(offdiag_block(form, f, g, a, b, gamma, k, theta));
        real defect = std::fabs(recon.value() - main);
        worst = std::max(worst, defect);
        csv.row({fmt_int(i), fmt_int(a), fmt_int(b), fmt_int(kh), fmt(main),
                 fmt(recon.value()), fmt(defect), defect <= tol ? "pass" : "fail"});
    }
    v.line("verify-split", worst <= tol,
           "max_defect=" + fmt(worst) + " tol=" + fmt(tol) + " n=" + fmt_int(n));
    return worst <= tol;
}

// --- goodness-stats --------------------------------------------------------------

bool run_goodness_stats(const RunConfig& cfg, Verdicts& v) {
    GoodnessStats st = goodness_stats(cfg.d, cfg.k, cfg.samples, cfg.seed);
    std::ofstream os = open_csv(cfg, "goodness_stats.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"d", "k", "samples", "freq", "freq_expected", "freq_sigma", "corr",
             "corr_sigma", "verdict"});
    csv.row({fmt_int(st.d), fmt_int(st.k), fmt_int(st.samples), fmt(st.freq),
             fmt(st.freq_expected), fmt(st.freq_sigma), fmt(st.corr),
             fmt(st.corr_sigma), st.pass ? "pass" : "fail"});
    v.line("goodness-stats", st.pass,
           "freq=" + fmt(st.freq) + " expected=" + fmt(st.freq_expected) +
               " corr=" + fmt(st.corr) + " n=" + fmt_int(st.samples));
    return st.pass;
}

// --- verify-averaging -------------------------------------------------------------

std::string gamma_label(const Gamma& g) {
    return std::to_string(g.first) + std::to_string(g.second);
}

bool run_verify_averaging(const RunConfig& cfg, Verdicts& v) {
    Instance inst = make_instance(cfg);
    WeakForm form(inst.kernel);
    form.set_pair_cache(false);
    std::ofstream os = open_csv(cfg, "verify_averaging.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"gamma", "k", "omega_k", "scale", "lhs_mean", "lhs_stderr", "rhs_mean",
             "rhs_stderr", "gap", "tol", "verdict"});
    bool all = true;
    for (const Gamma& gamma : gamma_all()) {
        for (int k = 2; k <= std::min(cfg.k_max, 4); ++k) {
            AveragingReport r = averaging_check(
                form, inst.f, inst.g, gamma, k, cfg.a, cfg.b,
                derive_u64(cfg.seed, 51, std::uint64_t(k * 8 + gamma.first * 2 +
                                                       gamma.second)),
                cfg.samples, cfg.threads);
            all = all && r.pass;
            csv.row({gamma_label(gamma), fmt_int(k), fmt(r.omega_k), fmt(r.scale),
                     fmt(r.lhs.mean), fmt(r.lhs.std_error), fmt(r.rhs.mean),
                     fmt(r.rhs.std_error), fmt(r.gap), fmt(r.tol),
                     r.pass ? "pass" : "fail"});
            v.line("verify-averaging", r.pass,
                   "gamma=" + gamma_label(gamma) + " k=" + fmt_int(k) +
                       " gap=" + fmt(r.gap) + " tol=" + fmt(r.tol));
        }
    }
    return all;
}

// --- verify-representation ---------------------------------------------------------

bool run_verify_representation(const RunConfig& cfg, Verdicts& v) {
    Instance inst = make_instance(cfg);
    WeakForm form(inst.kernel);
    form.set_pair_cache(false);
    bool fast = t1_witness_zero(form);
    form.set_t1_fast_path(fast);
    v.info("verify-representation",
           std::string("constant-functional shortcut ") + (fast ? "on" : "off") +
               " (witness checked)");
    RepReport r = representation_check(form, inst.f, inst.g, cfg.a, cfg.b, cfg.k_max,
                                       cfg.samples, cfg.seed, cfg.threads);
    std::ofstream os = open_csv(cfg, "verify_representation.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"reference", "estimate", "stderr", "samples", "error_term",
             "error_stderr", "k_tail", "budget", "tol", "gap", "verdict"});
    csv.row({fmt(r.reference), fmt(r.estimate.mean), fmt(r.estimate.std_error),
             fmt_int(r.estimate.samples), fmt(r.error_mean), fmt(r.error_se),
             fmt(r.k_tail), fmt(r.budget), fmt(r.tol), fmt(r.gap),
             r.pass ? "pass" : "fail"});
    write_text_file(std::filesystem::path(cfg.out) / "verify_representation.json",
                    report_json(r).dump(2) + "\n");
    v.line("verify-representation", r.pass,
           "estimate=" + fmt(r.estimate.mean) + " reference=" + fmt(r.reference) +
               " gap=" + fmt(r.gap) + " tol=" + fmt(r.tol));
    return r.pass;
}

// --- shift-norms -------------------------------------------------------------------

const char* kNormsPlot =
    "# Plot script for shift_norms.csv (gnuplot).\n"
    "set datafile separator ','\n"
    "set key autotitle columnhead\n"
    "set logscale x 2\n"
    "set xlabel 'band index k'\n"
    "set ylabel 'normalized size'\n"
    "plot 'shift_norms.csv' using 2:4 with linespoints title 'probe', \\\n"
    "     'shift_norms.csv' using 2:5 with linespoints title 'log envelope'\n";

bool run_shift_norms(const RunConfig& cfg, Verdicts& v) {
    Instance inst = make_instance(cfg);
    WeakForm form(inst.kernel);
    if (inst.kernel.dim() != 1)
        throw Error("shift-norms: implemented for one-dimensional kernels");

    // cancellation identities under block projections
    real cancel_worst = 0;
    for (int i = 0; i < 10; ++i) {
        std::uint64_t si = derive_u64(cfg.seed, 61, std::uint64_t(i));
        SimpleFunction f = random_simple_fn(1, derive_u64(si, 1, 0), -24, 72);
        SimpleFunction g = random_simple_fn(1, derive_u64(si, 2, 0), -24, 72);
        for (int k = 2; k <= 3; ++k) {
            ShiftSequence theta = sample_theta(1, default_window_lo(0, k),
                                               default_window_hi(3), derive_u64(si, 3, 0));
            ShiftBlock blk = shift_blocks(form, f, g, Gamma{1, 1}, k, 0, 3, theta);
            for (const auto& [S, val] : blk.values) {
                SimpleFunction fb = D_block(f, S, k, theta);
                SimpleFunction gb = D_block(g, S, k, theta);
                SimpleFunction fh = D_halfopen(f, S, k, theta);
                SimpleFunction gh = D_halfopen(g, S, k, theta);
                cancel_worst = std::max(
                    cancel_worst,
                    std::fabs(val - shift_form(form, fb, gb, S, Gamma{1, 1}, k, theta)));
                cancel_worst = std::max(
                    cancel_worst,
                    std::fabs(shift_form(form, f, g, S, Gamma{1, 0}, k, theta) -
                              shift_form(form, fb, gh, S, Gamma{1, 0}, k, theta)));
                cancel_worst = std::max(
                    cancel_worst,
                    std::fabs(shift_form(form, f, g, S, Gamma{0, 1}, k, theta) -
                              shift_form(form, fh, gb, S, Gamma{0, 1}, k, theta)));
            }
        }
    }
    bool cancel_ok = cancel_worst <= 1e-12L;
    v.line("shift-norms", cancel_ok,
           "cancellation max_defect=" + fmt(cancel_worst) + " tol=1e-12");

    // size ratios over random inputs: one value per input, the largest
    // normalized block, so vanishing blocks cannot drown the statistic
    std::ofstream ros = open_csv(cfg, "shift_ratios.csv");
    CsvWriter rcsv(ros, config_echo(cfg), cfg.seed);
    rcsv.row({"instance", "shift_gen", "ratio"});
    std::vector<double> ratios;
    for (int i = 0; i < 100; ++i) {
        std::uint64_t si = derive_u64(cfg.seed, 62, std::uint64_t(i));
        SimpleFunction f = random_simple_fn(1, derive_u64(si, 1, 0), -24, 72);
        SimpleFunction g = random_simple_fn(1, derive_u64(si, 2, 0), -24, 72);
        ShiftSequence theta = sample_theta(1, default_window_lo(0, 2),
                                           default_window_hi(3), derive_u64(si, 3, 0));
        ShiftBlock blk = shift_blocks(form, f, g, Gamma{1, 1}, 2, 0, 3, theta);
        double best = -1;
        int best_gen = 0;
        for (const auto& [S, val] : blk.values) {
            auto ratio = shift_size_ratio(form, f, g, S, 2, theta);
            if (ratio && double(*ratio) > best) {
                best = double(*ratio);
                best_gen = S.gen;
            }
        }
        if (best < 0) continue;
        ratios.push_back(best);
        rcsv.row({fmt_int(i), fmt_int(best_gen), fmt(real(best))});
    }
    bool ratio_ok = ratios.size() >= 50;
    for (double r : ratios) ratio_ok = ratio_ok && std::isfinite(r);
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted.empty() ? 0 : sorted[sorted.size() / 2];
    double peak = sorted.empty() ? 0 : sorted.back();
    ratio_ok = ratio_ok && median > 0 && peak / median < 50.0;
    v.line("shift-norms", ratio_ok,
           "size ratios n=" + fmt_int((long long)ratios.size()) +
               " median=" + fmt(real(median)) + " max=" + fmt(real(peak)));

    // diagnostic envelope table; informational, no verdict
    std::ofstream os = open_csv(cfg, "shift_norms.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"gamma", "k", "raw", "normalized", "envelope"});
    for (const Gamma& gamma : gamma_all()) {
        std::vector<ShiftNormRow> rows =
            shift_norm_probe(form, gamma, {2, 4, 8, 16, 32}, cfg.p,
                             derive_u64(cfg.seed, 63, 0), 16);
        for (const ShiftNormRow& r : rows)
            csv.row({gamma_label(gamma), fmt_int(r.k), fmt(r.raw), fmt(r.normalized),
                     fmt(r.envelope)});
    }
    write_text_file(std::filesystem::path(cfg.out) / "shift_norms.gnuplot", kNormsPlot);
    return cancel_ok && ratio_ok;
}

// --- dini --------------------------------------------------------------------------

Modulus parse_omega(const std::string& spec) {
    if (spec.rfind("power:", 0) == 0) {
        double delta = detail::to_dbl("omega", spec.substr(6));
        if (!(delta > 0)) throw Error("dini: modulus exponent must be positive");
        return Modulus::power(1.0L, real(delta));
    }
    throw Error("dini: unknown modulus \"" + spec + "\" (expected power:<delta>)");
}

bool run_dini(const RunConfig& cfg, Verdicts& v) {
    Modulus om = parse_omega(cfg.omega);
    real value = om.dini_norm(real(cfg.s));
    real tail = k_tail_budget_p(om, cfg.k_max, cfg.p);
    std::ofstream os = open_csv(cfg, "dini.csv");
    CsvWriter csv(os, config_echo(cfg), cfg.seed);
    csv.row({"omega", "s", "dini_norm", "k_max", "p", "k_tail"});
    csv.row({cfg.omega, fmt(real(cfg.s)), fmt(value), fmt_int(cfg.k_max),
             fmt(real(cfg.p)), fmt(tail)});
    bool ok = std::isfinite(double(value)) && std::isfinite(double(tail));
    v.line("dini", ok,
           "norm(s=" + fmt(real(cfg.s)) + ")=" + fmt(value) + " k_tail(p=" +
               fmt(real(cfg.p)) + ",k_max=" + fmt_int(cfg.k_max) + ")=" + fmt(tail));
    return ok;
}

void validate(const RunConfig& cfg) {
    if (cfg.a > cfg.b) throw Error("config: a must not exceed b");
    if (cfg.k_max < 2) throw Error("config: k-max must be at least 2");
    if (cfg.samples < 1) throw Error("config: samples must be positive");
    if (cfg.threads < 1) throw Error("config: threads must be positive");
    if (!(cfg.p > 1)) throw Error("config: p must exceed 1");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyadic shift decomposition verifier"};
    app.require_subcommand(1);

    std::string config_path;
    RunConfig flags;
    app.add_option("--config", config_path, "key=value config file");
    auto* o_kernel = app.add_option("--kernel", flags.kernel, "kernel name (hilbert, power)");
    auto* o_delta = app.add_option("--delta", flags.delta, "power kernel exponent");
    auto* o_f = app.add_option("--f", flags.f, "first input: preset, JSON, or file");
    auto* o_g = app.add_option("--g", flags.g, "second input: preset, JSON, or file");
    auto* o_a = app.add_option("--a", flags.a, "coarse generation cutoff");
    auto* o_b = app.add_option("--b", flags.b, "fine generation cutoff");
    auto* o_kmax = app.add_option("--k-max", flags.k_max, "largest band index");
    auto* o_samples = app.add_option("--samples", flags.samples, "Monte-Carlo samples");
    auto* o_seed = app.add_option("--seed", flags.seed, "master seed");
    auto* o_p = app.add_option("--p", flags.p, "integrability exponent for diagnostics");
    auto* o_threads = app.add_option("--threads", flags.threads, "worker cap");
    auto* o_d = app.add_option("--d", flags.d, "dimension (goodness-stats)");
    auto* o_k = app.add_option("--k", flags.k, "band index (goodness-stats)");
    auto* o_omega = app.add_option("--omega", flags.omega, "modulus spec (dini)");
    auto* o_s = app.add_option("--s", flags.s, "weight exponent (dini)");
    auto* o_out = app.add_option("--out", flags.out, "output directory");

    const char* names[] = {"verify-bcr",         "error-decay",    "verify-split",
                           "goodness-stats",     "verify-averaging", "verify-representation",
                           "shift-norms",        "dini"};
    const char* descs[] = {
        "window decomposition defect against direct pairing",
        "window error decay in the generation cutoffs",
        "diagonal plus banded blocks against the window sum",
        "goodness frequency and position independence",
        "band expectation against weighted block expectation",
        "Monte-Carlo estimate against the reference pairing",
        "cancellation, size ratios, and envelope diagnostics",
        "modulus integrals and band tail budgets"};
    for (size_t i = 0; i < 8; ++i) app.add_subcommand(names[i], descs[i])->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) parse_config_file(cfg, config_path);
        if (o_kernel->count()) cfg.kernel = flags.kernel;
        if (o_delta->count()) cfg.delta = flags.delta;
        if (o_f->count()) cfg.f = flags.f;
        if (o_g->count()) cfg.g = flags.g;
        if (o_a->count()) cfg.a = flags.a;
        if (o_b->count()) cfg.b = flags.b;
        if (o_kmax->count()) cfg.k_max = flags.k_max;
        if (o_samples->count()) cfg.samples = flags.samples;
        if (o_seed->count()) cfg.seed = flags.seed;
        if (o_p->count()) cfg.p = flags.p;
        if (o_threads->count()) cfg.threads = flags.threads;
        if (o_d->count()) cfg.d = flags.d;
        if (o_k->count()) cfg.k = flags.k;
        if (o_omega->count()) cfg.omega = flags.omega;
        if (o_s->count()) cfg.s = flags.s;
        if (o_out->count()) cfg.out = flags.out;
        validate(cfg);

        std::string cmd = app.get_subcommands().front()->get_name();
        Verdicts v;
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx",
                      (unsigned long long)fnv1a64(config_echo(cfg)));
        v.info(cmd, "config_hash=" + std::string(hex) + " seed=" +
                        std::to_string(cfg.seed));
        bool ok = false;
        if (cmd == "verify-bcr") ok = run_verify_bcr(cfg, v);
        else if (cmd == "error-decay") ok = run_error_decay(cfg, v);
        else if (cmd == "verify-split") ok = run_verify_split(cfg, v);
        else if (cmd == "goodness-stats") ok = run_goodness_stats(cfg, v);
        else if (cmd == "verify-averaging") ok = run_verify_averaging(cfg, v);
        else if (cmd == "verify-representation") ok = run_verify_representation(cfg, v);
        else if (cmd == "shift-norms") ok = run_shift_norms(cfg, v);
        else if (cmd == "dini") ok = run_dini(cfg, v);
        return ok && v.all ? 0 : 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
