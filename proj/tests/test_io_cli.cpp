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

#include <catch2/catch_amalgamated.hpp>

#include "dyrep/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace dyrep;

namespace {

bool fn_identical(const SimpleFunction& x, const SimpleFunction& y) {
    if (x.d != y.d || x.terms.size() != y.terms.size()) return false;
    for (size_t i = 0; i < x.terms.size(); ++i) {
        if (!(x.terms[i].coeff == y.terms[i].coeff)) return false;
        if (!(x.terms[i].rect == y.terms[i].rect)) return false;
    }
    return true;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(DYREP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

std::filesystem::path fresh_dir(const std::string& tag) {
    std::filesystem::path p =
        std::filesystem::temp_directory_path() / ("dyrep_test_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("simple function json round trip is bit exact") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        int d = 1 + int(s % 2);
        SimpleFunction f = random_simple_fn(d, 1000 + s, -40, 80);
        std::string text = fn_to_json(f).dump();
        SimpleFunction back = fn_from_json_text(text);
        REQUIRE(fn_identical(f, back));
    }
    // fractional endpoints and coefficients survive exactly
    SimpleFunction h;
    h.d = 1;
    Rect r;
    r.lo = {DyadicRational(bigint(-7), 5u)};
    r.hi = {DyadicRational(bigint(13), 3u)};
    h.terms.push_back({r, bigrat(22, 7)});
    REQUIRE(fn_identical(h, fn_from_json_text(fn_to_json(h).dump())));

    REQUIRE_THROWS_AS(fn_from_json_text("{\"d\": 1}"), Error);
    REQUIRE_THROWS_AS(fn_from_json_text(
                          "{\"d\": 2, \"terms\": [{\"rect\": [[\"0/2^0\", \"1/2^0\"]],"
                          " \"coeff\": \"1/1\"}]}"),
                      Error);
}

TEST_CASE("config text: assignments, comments, json values, errors") {
    RunConfig cfg;
    parse_config_text(cfg,
                      "# experiment\n"
                      "kernel = \"power\", delta = 0.25\n"
                      "a = -3\n"
                      "b=5\n"
                      "k-max = 7\n"
                      "samples = 123, seed = 99\n"
                      "f = {\"d\": 1, \"terms\": [{\"rect\": [[\"0/2^0\", \"1/2^0\"]],"
                      " \"coeff\": \"3/2\"}]}\n"
                      "out = runs\n");
    REQUIRE(cfg.kernel == "power");
    REQUIRE(cfg.delta == 0.25);
    REQUIRE(cfg.a == -3);
    REQUIRE(cfg.b == 5);
    REQUIRE(cfg.k_max == 7);
    REQUIRE(cfg.samples == 123);
    REQUIRE(cfg.seed == 99);
    REQUIRE(cfg.out == "runs");
    SimpleFunction f = fn_from_json_text(cfg.f);
    REQUIRE(f.terms.size() == 1);
    REQUIRE(f.terms[0].coeff == bigrat(3, 2));

    RunConfig bad;
    REQUIRE_THROWS_AS(parse_config_text(bad, "unknown = 1\n"), Error);
    REQUIRE_THROWS_AS(parse_config_text(bad, "a = ten\n"), Error);
    REQUIRE_THROWS_AS(parse_config_text(bad, "just a line\n"), Error);

    // echo is canonical: independent of assignment order
    RunConfig c1, c2;
    parse_config_text(c1, "a = -2\nseed = 5\n");
    parse_config_text(c2, "seed = 5\na = -2\n");
    REQUIRE(config_echo(c1) == config_echo(c2));
}

TEST_CASE("fnv1a64 matches the reference vectors") {
    REQUIRE(fnv1a64("") == 14695981039346656037ull);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    REQUIRE(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("presets and instance resolution") {
    RunConfig cfg;
    cfg.f = "hilbert-standard";
    Instance std_inst = make_instance(cfg);
    REQUIRE(std_inst.kernel.type() == KernelType::hilbert);
    REQUIRE(std_inst.f.d == 1);
    REQUIRE(to_real(fn_integral(std_inst.f)) == 1.0L);
    REQUIRE(to_real(fn_integral(std_inst.g)) == 1.0L);
    REQUIRE(fn_value_at(std_inst.g, {DyadicRational(bigint(5), 1u)}) == bigrat(1));

    cfg.f = "hilbert-meanzero";
    Instance mz = make_instance(cfg);
    REQUIRE(to_real(fn_integral(mz.f)) == 0.0L);
    REQUIRE(fn_identical(mz.f, mz.g));

    cfg.f = "d2-power";
    cfg.delta = 0.5;
    Instance d2 = make_instance(cfg);
    REQUIRE(d2.kernel.dim() == 2);
    REQUIRE(d2.f.d == 2);
    REQUIRE(rect_linf_distance(d2.f.terms[0].rect, d2.g.terms[0].rect) >=
            DyadicRational(bigint(1), 0u));

    // explicit g overrides the preset partner
    cfg.f = "hilbert-standard";
    cfg.g = "{\"d\": 1, \"terms\": [{\"rect\": [[\"4/2^0\", \"5/2^0\"]],"
            " \"coeff\": \"1/1\"}]}";
    Instance ov = make_instance(cfg);
    REQUIRE(fn_value_at(ov.g, {DyadicRational(bigint(9), 1u)}) == bigrat(1));

    RunConfig bad;
    bad.kernel = "cauchy";
    REQUIRE_THROWS_AS(make_instance(bad), Error);
    RunConfig mismatch;
    mismatch.f = "d2-power";
    mismatch.kernel = "hilbert";
    REQUIRE_THROWS_AS(make_instance(mismatch), Error);
}

TEST_CASE("random separated pairs clear the coarse scale") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        int a = -2 - int(s % 3);
        auto [f, g] = random_separated_pair(1, a, 4200 + s);
        auto bf = fn_bbox(f), bg = fn_bbox(g);
        REQUIRE(bf.has_value());
        REQUIRE(bg.has_value());
        DyadicRational gap = rect_linf_distance(*bf, *bg);
        DyadicRational side = DyadicRational::pow2(-a);
        INFO("a=" << a << " gap=" << gap.str());
        REQUIRE(side < gap);
    }
}

TEST_CASE("csv writer: provenance header and quoting") {
    std::ostringstream os;
    CsvWriter csv(os, "kernel=hilbert;seed=7", 7);
    csv.row({"plain", "with,comma", "with\"quote"});
    std::string text = os.str();
    REQUIRE(text.find("# config_hash=") == 0);
    REQUIRE(text.find("seed=7") != std::string::npos);
    REQUIRE(text.find("# config: kernel=hilbert;seed=7\n") != std::string::npos);
    REQUIRE(text.find("plain,\"with,comma\",\"with\"\"quote\"\n") != std::string::npos);

    std::ostringstream os2;
    CsvWriter csv2(os2, "kernel=hilbert;seed=7", 7);
    csv2.row({"plain", "with,comma", "with\"quote"});
    REQUIRE(os.str() == os2.str());
}

TEST_CASE("representation report json carries the contract keys") {
    RepReport r;
    r.reference = 0.5L;
    r.estimate.mean = 0.49L;
    r.estimate.std_error = 0.01L;
    r.estimate.samples = 1000;
    r.error_mean = 0.001L;
    r.k_tail = 0.002L;
    r.pass = true;
    nlohmann::json j = report_json(r);
    REQUIRE(j.at("reference").get<double>() == 0.5);
    REQUIRE(j.at("estimate").get<double>() == 0.49);
    REQUIRE(j.at("stderr").get<double>() == 0.01);
    REQUIRE(j.at("samples").get<long long>() == 1000);
    REQUIRE(j.at("truncation").at("error_term").get<double>() == 0.001);
    REQUIRE(j.at("truncation").at("k_tail").get<double>() == 0.002);
    REQUIRE(j.at("verdict").get<std::string>() == "pass");
}

TEST_CASE("cli: dini oracle, exit codes, and byte-identical reruns") {
    std::filesystem::path d1 = fresh_dir("dini1");
    std::filesystem::path d2 = fresh_dir("dini2");
    REQUIRE(run_cli("dini --omega power:1 --s 0 --out " + d1.string()) == 0);
    REQUIRE(run_cli("dini --omega power:1 --s 0 --out " + d2.string()) == 0);
    std::string c1 = slurp(d1 / "dini.csv");
    REQUIRE(c1 == slurp(d2 / "dini.csv"));
    {
        // last line: omega,s,dini_norm,...; the s=0 norm of the linear
        // modulus integrates to one half exactly
        std::istringstream in(c1);
        std::string line, last;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#' && line.rfind("omega", 0) != 0)
                last = line;
        std::istringstream cells(last);
        std::string cell;
        std::getline(cells, cell, ',');
        std::getline(cells, cell, ',');
        std::getline(cells, cell, ',');
        REQUIRE(std::fabs(std::stod(cell) - 0.5) < 1e-10);
    }

    std::filesystem::path gd = fresh_dir("good");
    REQUIRE(run_cli("goodness-stats --d 1 --k 2 --samples 3000 --seed 7 --out " +
                    gd.string()) == 0);
    std::string gc = slurp(gd / "goodness_stats.csv");
    REQUIRE(gc.find("freq") != std::string::npos);

    // config file drives the run the same way flags do
    std::filesystem::path cd = fresh_dir("cfg");
    write_text_file(cd / "run.cfg", "omega = power:1\ns = 1\nout = " +
                                        (cd / "out").string() + "\n");
    REQUIRE(run_cli("dini --config " + (cd / "run.cfg").string()) == 0);
    REQUIRE(slurp(cd / "out" / "dini.csv").find("power:1") != std::string::npos);

    REQUIRE(run_cli("verify-bcr --a 3 --b 1") == 2);         // invalid config
    REQUIRE(run_cli("dini --omega exp:1") == 2);             // unknown modulus
    REQUIRE(run_cli("no-such-command") == 2);                // parse error
    REQUIRE(run_cli("verify-bcr --f hilbert-standard --a -2 --b 3 --samples 3") == 0);
}
