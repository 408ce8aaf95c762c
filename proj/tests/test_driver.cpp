#include <doctest.h>

#include <cmath>

#include "ktune/builtin.hpp"
#include "ktune/driver.hpp"
#include "ktune/rng.hpp"
#include "ktune/util.hpp"
#include "test_helpers.hpp"

using namespace ktune;
using namespace ktune::testing;

TEST_SUITE_BEGIN("driver");

namespace {

KernelCommand script_command(const std::string& path, double timeout = 10.0) {
    KernelCommand cmd;
    cmd.executable = path;
    cmd.timeout_sec = timeout;
    return cmd;
}

Configuration demo_config() { return Configuration{{2000.0, 8LL, std::string("blocked")}}; }

} // namespace

TEST_CASE("objective is parsed from the last stdout line") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "echo some log line\necho 0.0123");
    auto rec = evaluate(script_command(tmp.file("k.sh")), demo_space(), demo_config(), {});
    CHECK(rec.status == SampleStatus::Ok);
    CHECK(rec.objective == doctest::Approx(0.0123));
    CHECK(rec.wall_time > 0.0);
}

TEST_CASE("named flags reach the kernel in space order") {
    TempDir tmp;
    // echoes the value of --T=
    write_script(tmp.file("k.sh"),
                 "for a in \"$@\"; do case \"$a\" in --T=*) echo \"${a#--T=}\";; esac; done");
    auto rec = evaluate(script_command(tmp.file("k.sh")), demo_space(), demo_config(), {});
    CHECK(rec.status == SampleStatus::Ok);
    CHECK(rec.objective == 8.0);
}

TEST_CASE("positional style passes values in space order") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "echo \"$2\"");
    auto cmd = script_command(tmp.file("k.sh"));
    cmd.arg_style = ArgStyle::Positional;
    auto rec = evaluate(cmd, demo_space(), demo_config(), {});
    CHECK(rec.status == SampleStatus::Ok);
    CHECK(rec.objective == 8.0);
}

TEST_CASE("env-vars style exports parameter values") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "echo \"$T\"");
    auto cmd = script_command(tmp.file("k.sh"));
    cmd.arg_style = ArgStyle::EnvVars;
    auto rec = evaluate(cmd, demo_space(), demo_config(), {});
    CHECK(rec.status == SampleStatus::Ok);
    CHECK(rec.objective == 8.0);
}

TEST_CASE("nonzero exit becomes a failed sample with the penalty objective") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "echo 1.0\nexit 3");
    SubprocessKernel kernel(script_command(tmp.file("k.sh")));
    EvalOptions opts;
    opts.penalty = 123.0;
    auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
    CHECK(rec.status == SampleStatus::Failed);
    CHECK(rec.objective == 123.0);
}

TEST_CASE("failed runs take the clip value when a clip is set") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "exit 1");
    SubprocessKernel kernel(script_command(tmp.file("k.sh")));
    EvalOptions opts;
    opts.clip = 2.5;
    auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
    CHECK(rec.status == SampleStatus::Failed);
    CHECK(rec.objective == 2.5);
}

TEST_CASE("malformed output becomes a failed sample") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "echo not-a-number");
    SubprocessKernel kernel(script_command(tmp.file("k.sh")));
    auto rec = evaluate(kernel, demo_space(), demo_config(), {});
    CHECK(rec.status == SampleStatus::Failed);
}

TEST_CASE("values above the clip bound are recorded as clipped") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "echo 5.0");
    SubprocessKernel kernel(script_command(tmp.file("k.sh")));
    EvalOptions opts;
    opts.clip = 1.0;
    auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
    CHECK(rec.status == SampleStatus::Clipped);
    CHECK(rec.objective == 1.0);
}

TEST_CASE("timeouts are killed and recorded") {
    TempDir tmp;
    write_script(tmp.file("k.sh"), "sleep 30\necho 1.0");
    SubprocessKernel kernel(script_command(tmp.file("k.sh"), 0.2));
    EvalOptions opts;
    opts.penalty = 9.0;
    auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
    CHECK(rec.status == SampleStatus::Timeout);
    CHECK(rec.objective == 9.0);
    CHECK(rec.wall_time < 5.0);
}

TEST_CASE("missing executable is a hard error, not a sample") {
    SubprocessKernel kernel(script_command("/nonexistent/kernel"));
    CHECK_THROWS_AS(evaluate(kernel, demo_space(), demo_config(), {}), std::runtime_error);
}

TEST_CASE("repeats aggregate with min by default") {
    TempDir tmp;
    // value depends on a counter file, so repeats see 3, then 1, then 2
    write_script(tmp.file("k.sh"),
                 "f=\"$0.count\"\n"
                 "c=$(cat \"$f\" 2>/dev/null || echo 0)\n"
                 "c=$((c+1)); echo \"$c\" > \"$f\"\n"
                 "case $c in 1) echo 3;; 2) echo 1;; *) echo 2;; esac");
    auto cmd = script_command(tmp.file("k.sh"));
    cmd.repeats = 3;
    SubprocessKernel kernel(cmd);
    EvalOptions opts;
    opts.repeats = 3;
    SUBCASE("min") {
        auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
        CHECK(rec.objective == 1.0);
    }
    SUBCASE("median") {
        opts.aggregate = Aggregate::Median;
        auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
        CHECK(rec.objective == 2.0);
    }
    SUBCASE("mean") {
        opts.aggregate = Aggregate::Mean;
        auto rec = evaluate(kernel, demo_space(), demo_config(), opts);
        CHECK(rec.objective == doctest::Approx(2.0));
    }
}

TEST_CASE("no record is ever ok with an objective above the clip") {
    auto space = builtin_space("cliff");
    BuiltinKernel kernel("cliff");
    Rng rng(91);
    for (int trial = 0; trial < 100; ++trial) {
        EvalOptions opts;
        opts.clip = rng.uniform(1.0, 10.0);
        Configuration c{{rng.uniform_int(256, 4096), rng.uniform_int(1, 32),
                         std::string(space.param(2).categories[rng.below(5)])}};
        auto rec = evaluate(kernel, space, c, opts);
        if (rec.status == SampleStatus::Ok) CHECK(rec.objective <= *opts.clip);
        if (rec.status == SampleStatus::Clipped) CHECK(rec.objective == *opts.clip);
    }
}

TEST_CASE("evaluate_batch keeps input order and ignores parallelism") {
    auto space = builtin_space("quad");
    BuiltinKernel kernel("quad");
    std::vector<Configuration> configs;
    Rng rng(3);
    for (int i = 0; i < 10; ++i)
        configs.push_back(Configuration{
            {rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()}});

    auto serial = evaluate_batch(kernel, space, configs, 1, {});
    auto parallel = evaluate_batch(kernel, space, configs, 8, {});
    REQUIRE(serial.size() == 10);
    REQUIRE(parallel.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(serial[i].config == configs[i]);
        CHECK(parallel[i].config == configs[i]);
        CHECK(serial[i].objective == parallel[i].objective);
        CHECK(serial[i].status == parallel[i].status);
    }
}

TEST_CASE("evaluate_batch on an empty list returns an empty list") {
    auto space = builtin_space("quad");
    BuiltinKernel kernel("quad");
    CHECK(evaluate_batch(kernel, space, {}, 4, {}).empty());
}

TEST_CASE("store persists and reloads 1000 records bit-exactly") {
    TempDir tmp;
    auto space = demo_space();
    SampleStore store(space);
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        SampleRecord r;
        r.config = Configuration{{rng.uniform(1000, 5000), rng.uniform_int(1, 64),
                                  std::string(rng.below(2) ? "blocked" : "flat")}};
        r.objective = rng.uniform(0, 10) * std::pow(10.0, static_cast<double>(rng.below(7)) - 3);
        r.status = i % 97 == 0 ? SampleStatus::Clipped : SampleStatus::Ok;
        r.wall_time = rng.uniform01();
        store.append(std::move(r));
    }
    persist(store, tmp.file("samples.csv"));
    auto loaded = load_store(tmp.file("samples.csv"), space);
    CHECK(loaded == store);
}

TEST_CASE("loading against a different space is a fingerprint error") {
    TempDir tmp;
    auto space = demo_space();
    SampleStore store(space);
    SampleRecord r;
    r.config = demo_config();
    r.objective = 1.0;
    store.append(r);
    persist(store, tmp.file("samples.csv"));

    ParameterSpace other({
        ParameterSpec::real("n", ParamRole::Input, 1000, 5001),
        ParameterSpec::integer("T", ParamRole::Design, 1, 64),
        ParameterSpec::categorical("algo", ParamRole::Design, {"flat", "blocked"}),
    });
    CHECK_THROWS_WITH_AS(load_store(tmp.file("samples.csv"), other),
                         doctest::Contains("fingerprint"), ConfigError);
}

TEST_CASE("malformed rows are reported with their line number") {
    TempDir tmp;
    auto space = demo_space();
    SampleStore store(space);
    SampleRecord r;
    r.config = demo_config();
    r.objective = 1.0;
    store.append(r);
    persist(store, tmp.file("samples.csv"));

    auto text = read_text(tmp.file("samples.csv"));
    write_text(tmp.file("bad.csv"), text + "2000,8,blocked,oops,ok,0.1\n");
    CHECK_THROWS_WITH_AS(load_store(tmp.file("bad.csv"), space), doctest::Contains(":4:"),
                         ConfigError);
}

TEST_CASE("store rejects ok records with non-finite objectives") {
    SampleStore store(demo_space());
    SampleRecord r;
    r.config = demo_config();
    r.objective = INFINITY;
    CHECK_THROWS_AS(store.append(r), ConfigError);
}

TEST_SUITE_END();
