#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "semcom/csv.hpp"
#include "semcom/harness.hpp"

using namespace semcom;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("minimal config parses and round-trips through canonical form") {
    const std::string text =
        "experiment = dps_conjugate\n"
        "seeds = 1\n";
    const ExperimentConfig cfg = ExperimentConfig::from_text(text);
    const std::string canon = cfg.canonical_text();
    const ExperimentConfig back = ExperimentConfig::from_text(canon);
    CHECK(back.canonical_text() == canon);
}

TEST_CASE("unknown keys are fatal and name the key") {
    const std::string text =
        "experiment = dps_conjugate\n"
        "seeds = 1\n"
        "[decoder]\n"
        "gamm = 1.0\n";
    try {
        ExperimentConfig::from_text(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("gamm") != std::string::npos);
    }
}

TEST_CASE("type errors name the key and expected type") {
    const std::string text =
        "experiment = diffcom_sweep\n"
        "seeds = 1\n"
        "[channel]\n"
        "snr_db = abc\n";
    try {
        ExperimentConfig::from_text(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("snr_db") != std::string::npos);
        CHECK(what.find("number") != std::string::npos);
    }
}

TEST_CASE("syntax errors carry line numbers") {
    try {
        ConfigDoc::parse("experiment = x\nbroken line\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(ConfigDoc::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text("experiment = nope\nseeds = 1\n"),
                    ConfigError);
}

TEST_CASE("csv writer basics: header + row, inf sentinel, byte-identical rewrite") {
    ReportTable t;
    t.header = {"a", "b"};
    t.rows.push_back({format_number(1.5), format_number(std::numeric_limits<double>::infinity())});
    const std::string path = "csv_test.csv";
    write_csv(path, t);
    const std::string first = slurp(path);
    CHECK(first == "a,b\n1.5,inf\n");
    write_csv(path, t);
    CHECK(slurp(path) == first);
    std::remove(path.c_str());

    CHECK_THROWS_AS(write_csv(path, ReportTable{{"a"}, {}}), std::invalid_argument);
    ReportTable bad;
    bad.header = {"a", "b"};
    bad.rows.push_back({"1"});
    CHECK_THROWS_AS(write_csv(path, bad), std::invalid_argument);
}

TEST_CASE("diffcom_sweep emits the full cross product deterministically") {
    const std::string text =
        "experiment = diffcom_sweep\n"
        "seeds = 1 2 3\n"
        "runs = 1\n"
        "[source]\n"
        "means = -2 ; 2\n"
        "cov_diag = 0.5 ; 0.5\n"
        "[schedule]\n"
        "steps = 200\n"
        "[encoder]\n"
        "kind = identity\n"
        "dim = 1\n"
        "[channel]\n"
        "snr_db = 0 5 10 15 20\n"
        "[decoder]\n"
        "chains = 4\n"
        "gamma_mode = exact_gaussian\n";
    const ExperimentConfig cfg = ExperimentConfig::from_text(text);
    const RunOutput out = run_experiment(cfg);
    CHECK(out.data.rows.size() == 15);
    CHECK(out.data.header ==
          std::vector<std::string>{"experiment", "seed", "snr_db", "mse", "psnr",
                                   "residual"});

    const std::string path = "sweep_test.csv";
    write_csv(path, out.data);
    const std::string first = slurp(path);
    const RunOutput again = run_experiment(cfg);
    write_csv(path, again.data);
    CHECK(slurp(path) == first);
    std::remove(path.c_str());
}

TEST_CASE("dps_conjugate preset emits oracle error columns") {
    const std::string text =
        "experiment = dps_conjugate\n"
        "seeds = 1\n"
        "runs = 500\n"
        "[schedule]\n"
        "steps = 300\n"
        "[decoder]\n"
        "gamma_mode = exact_gaussian\n";
    const RunOutput out = run_experiment(ExperimentConfig::from_text(text));
    REQUIRE(out.data.rows.size() == 1);
    CHECK(out.data.header ==
          std::vector<std::string>{"experiment", "seed", "runs", "gamma_mode",
                                   "mean_abs_err", "var_abs_err"});
    // loose sanity at 500 runs; the acceptance suite runs the full benchmark
    CHECK(std::stod(out.data.rows[0][4]) <= 0.15);
    CHECK(std::stod(out.data.rows[0][5]) <= 0.15);
}

TEST_CASE("csv schemas are stable per experiment (golden headers)") {
    CHECK(run_experiment(ExperimentConfig::from_text(
                             "experiment = flow_transport\nseeds = 1\nsamples = 2000\n"))
              .data.header ==
          std::vector<std::string>{"experiment", "seed", "samples", "endpoint_var", "w1"});

    const std::string conv =
        "experiment = solver_convergence\nseeds = 1\npoints = 8\nref_steps = 512\n"
        "steps_list = 25 50\n"
        "[source]\nmeans = -2 ; 2\ncov_diag = 0.5 ; 0.5\n"
        "[schedule]\nsteps = 200\n";
    CHECK(run_experiment(ExperimentConfig::from_text(conv)).data.header ==
          std::vector<std::string>{"experiment", "seed", "method", "steps", "endpoint_err"});
}

TEST_CASE("seed and out overrides plus resolved output path") {
    ExperimentConfig cfg = ExperimentConfig::from_text(
        "experiment = dps_conjugate\nseeds = 1\nout = custom.csv\n");
    CHECK(cfg.resolved_out() == "custom.csv");
    cfg.out.clear();
    setenv("SEMCOM_OUT_DIR", "/tmp/semcom_test_out", 1);
    CHECK(cfg.resolved_out() == "/tmp/semcom_test_out/dps_conjugate.csv");
    unsetenv("SEMCOM_OUT_DIR");
}
