#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qosc/experiment.hpp"
#include "qosc/observables.hpp"

using namespace qosc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("qosc_exp_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file ", path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CsvRow {
    double t = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    long n_excluded = 0;
};

std::vector<CsvRow> read_csv(const fs::path& path) {
    const std::string text = slurp(path);
    CHECK(text.find('\r') == std::string::npos);
    std::istringstream in(text);
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "t,value,std_error,n_samples,n_excluded");
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        CsvRow row;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%ld,%ld", &row.t, &row.value,
                            &row.std_error, &row.n_samples, &row.n_excluded) == 5);
        rows.push_back(row);
    }
    return rows;
}

const char* kMomentsConfig = R"(# quartic moment run
[experiment]
kind = moments
t_grid = 0.1,0.2
orders = 1,2
which = x

[model]
m = 1
hbar = 1
omega_sq = constant:1
lambda = constant:0.2

[packet]
sigma = 1
a = 0.4
k = 0.3

[noise]
n_traj = 400
seed = 11
dt = 0.0005
)";

}  // namespace

TEST_CASE("configs survive a serialize and reparse cycle") {
    const ExperimentConfig a = parse_config(kMomentsConfig);
    const ExperimentConfig b = parse_config(serialize_config(a));
    CHECK(b.kind == a.kind);
    CHECK(b.t_grid == a.t_grid);
    CHECK(b.orders == a.orders);
    CHECK(b.want_x == a.want_x);
    CHECK(b.want_p == a.want_p);
    CHECK(b.n_traj == a.n_traj);
    CHECK(b.seed == a.seed);
    CHECK(b.dt == a.dt);
    CHECK(b.model.m == a.model.m);
    CHECK(b.model.lambda(0.3) == a.model.lambda(0.3));
    CHECK(b.packet.sigma == a.packet.sigma);
    CHECK(b.packet.a == a.packet.a);
    CHECK(b.packet.k == a.packet.k);
    CHECK(serialize_config(b) == serialize_config(a));
}

TEST_CASE("range lists and schedule tables parse") {
    std::string text = kMomentsConfig;
    const auto at = [&](const std::string& from, const std::string& to) {
        const auto pos = text.find(from);
        REQUIRE(pos != std::string::npos);
        text = text.substr(0, pos) + to + text.substr(pos + from.size());
    };
    at("t_grid = 0.1,0.2", "t_grid = 0.1:0.1:0.4");
    at("lambda = constant:0.2", "lambda = table:0,0.1;1,0.3");
    const ExperimentConfig c = parse_config(text);
    REQUIRE(c.t_grid.size() == 4);
    CHECK(c.t_grid[3] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(c.model.lambda(0.5) == doctest::Approx(0.2).epsilon(1e-12));
    const ExperimentConfig d = parse_config(serialize_config(c));
    CHECK(d.model.lambda(0.5) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("bad configs are refused with the field named") {
    const auto rejects = [](std::string text, const std::string& from, const std::string& to,
                            const std::string& needle) {
        if (!from.empty()) {
            const auto pos = text.find(from);
            REQUIRE(pos != std::string::npos);
            text = text.substr(0, pos) + to + text.substr(pos + from.size());
        }
        try {
            parse_config(text);
            FAIL_CHECK("accepted: ", needle);
        } catch (const std::invalid_argument& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                          "message '", e.what(), "' lacks '", needle, "'");
        }
    };
    rejects(kMomentsConfig, "sigma = 1", "", "[packet] sigma");
    rejects(kMomentsConfig, "n_traj = 400", "", "[noise] n_traj");
    rejects(kMomentsConfig, "dt = 0.0005", "", "[noise] dt");
    rejects(kMomentsConfig, "seed = 11", "typo = 1", "unknown key");
    rejects(kMomentsConfig, "seed = 11", "seed = 11\nseed = 12", "duplicate key");
    rejects(kMomentsConfig, "lambda = constant:0.2", "lambda = constant:-0.2", "lambda");
    rejects(kMomentsConfig, "t_grid = 0.1,0.2", "t_grid = 0.1,0.10005", "step grid");
    rejects(kMomentsConfig, "t_grid = 0.1,0.2", "t_grid = 0.2,0.1", "ascending");
    rejects(kMomentsConfig, "orders = 1,2", "orders = 1.5", "integers");
    rejects(kMomentsConfig, "kind = moments", "kind = momentz", "unknown experiment");
    rejects(kMomentsConfig, "m = 1", "m = -2", "m");
    rejects(kMomentsConfig, "which = x", "which = sideways", "which");

    try {
        load_config("/nonexistent/qosc.ini");
        FAIL_CHECK("opened a missing file");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("cannot open") != std::string::npos);
    }
}

TEST_CASE("validate echo reports the resolved run and its cost") {
    const std::string echo = describe_config(parse_config(kMomentsConfig));
    CHECK(echo.find("kind: moments") != std::string::npos);
    CHECK(echo.find("lambda=constant:0.2") != std::string::npos);
    CHECK(echo.find("n_traj=400") != std::string::npos);
    CHECK(echo.find("cost: n_traj x n_steps = 400 x 400") != std::string::npos);
}

TEST_CASE("manifest reruns reproduce the csv bytes") {
    const fs::path dir_a = fresh_dir("manifest_a");
    const fs::path dir_b = fresh_dir("manifest_b");

    RunOptions opts;
    opts.threads = 2;
    opts.out_dir = dir_a.string();
    opts.code_version = "test";
    const auto written = run_experiment(parse_config(kMomentsConfig), opts);
    CHECK(written.size() >= 3);

    const std::string manifest = slurp(dir_a / "manifest.ini");
    CHECK(manifest.find("code_version = test") != std::string::npos);
    CHECK(manifest.find("seed_used = 11") != std::string::npos);

    RunOptions rerun;
    rerun.threads = 1;
    rerun.out_dir = dir_b.string();
    run_experiment(parse_config(manifest), rerun);

    for (const char* name : {"moments_x1.csv", "moments_x2.csv"}) {
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
        CHECK(!read_csv(dir_a / name).empty());
    }
    CHECK(fs::exists(dir_a / "moments_x1.svg"));
}

TEST_CASE("worker count and plot flags never change the csv bytes") {
    const fs::path dir_a = fresh_dir("threads_1");
    const fs::path dir_b = fresh_dir("threads_4");
    const ExperimentConfig config = parse_config(kMomentsConfig);

    RunOptions one;
    one.threads = 1;
    one.out_dir = dir_a.string();
    run_experiment(config, one);

    RunOptions four;
    four.threads = 4;
    four.no_plots = true;
    four.out_dir = dir_b.string();
    run_experiment(config, four);

    CHECK(slurp(dir_a / "moments_x1.csv") == slurp(dir_b / "moments_x1.csv"));
    CHECK(slurp(dir_a / "moments_x2.csv") == slurp(dir_b / "moments_x2.csv"));
    CHECK(!fs::exists(dir_b / "moments_x1.svg"));

    const auto rows = read_csv(dir_a / "moments_x1.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].n_samples + rows[0].n_excluded == 400);
    // 17 significant digits in every numeric column.
    const std::string text = slurp(dir_a / "moments_x1.csv");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    const auto comma = line.find(',');
    const auto second = line.find(',', comma + 1);
    CHECK(second - comma >= 17);
}

TEST_CASE("seed overrides reach the estimate and the manifest") {
    const fs::path dir_a = fresh_dir("seed_a");
    const fs::path dir_b = fresh_dir("seed_b");
    const ExperimentConfig config = parse_config(kMomentsConfig);

    RunOptions base;
    base.out_dir = dir_a.string();
    run_experiment(config, base);

    RunOptions override_seed;
    override_seed.out_dir = dir_b.string();
    override_seed.has_seed = true;
    override_seed.seed = 99;
    run_experiment(config, override_seed);

    CHECK(slurp(dir_a / "moments_x1.csv") != slurp(dir_b / "moments_x1.csv"));
    CHECK(slurp(dir_b / "manifest.ini").find("seed_used = 99") != std::string::npos);
    CHECK(slurp(dir_b / "manifest.ini").find("seed = 99") != std::string::npos);
}

TEST_CASE("harmonic runs write matching closed form companions") {
    const char* config_text = R"(
[experiment]
kind = harmonic
t_grid = 0.05,0.1
orders = 1,2
which = x

[model]
omega_sq = constant:1
lambda = constant:0

[packet]
sigma = 1
a = 0.3
k = 0.5

[noise]
n_traj = 2000
seed = 3
dt = 0.001

[output]
plots = false
)";
    const fs::path dir = fresh_dir("harmonic");
    RunOptions opts;
    opts.threads = 2;
    opts.out_dir = dir.string();
    run_experiment(parse_config(config_text), opts);

    for (int order : {1, 2}) {
        const auto mc = read_csv(dir / ("moments_x" + std::to_string(order) + ".csv"));
        const auto exact = read_csv(dir / ("harmonic_x" + std::to_string(order) + ".csv"));
        REQUIRE(mc.size() == 2);
        REQUIRE(exact.size() == 2);
        for (std::size_t i = 0; i < mc.size(); ++i) {
            CHECK(mc[i].t == exact[i].t);
            CHECK(std::abs(mc[i].value - exact[i].value) <
                  5.0 * mc[i].std_error + 2e-3);
        }
    }
}

TEST_CASE("wigner runs tabulate the grid cumulants") {
    const char* config_text = R"(
[experiment]
kind = wigner
t_grid = 0.1,0.2

[model]
omega_sq = constant:1
lambda = constant:0

[packet]
sigma = 1
a = 0.5
k = 0

[grid]
x_min = -8
x_max = 8
n_points = 257
dt = 0.001
p_min = -5
p_max = 5
n_p = 21

[output]
plots = false
)";
    const fs::path dir = fresh_dir("wigner");
    RunOptions opts;
    opts.out_dir = dir.string();
    const auto written = run_experiment(parse_config(config_text), opts);
    CHECK(written.size() == 7);

    const auto mass = read_csv(dir / "wigner_mass.csv");
    const auto mean_x = read_csv(dir / "wigner_mean_x.csv");
    REQUIRE(mass.size() == 2);
    REQUIRE(mean_x.size() == 2);
    for (const auto& row : mass) CHECK(row.value == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(mean_x[0].value == doctest::Approx(0.5 * std::cos(0.1)).epsilon(2e-2));
    CHECK(mean_x[1].value == doctest::Approx(0.5 * std::cos(0.2)).epsilon(2e-2));
}

TEST_CASE("environment variables feed the run options") {
    setenv("THREADS", "3", 1);
    setenv("SEED", "77", 1);
    RunOptions opts = options_from_environment();
    CHECK(opts.threads == 3);
    CHECK(opts.has_seed);
    CHECK(opts.seed == 77);

    setenv("THREADS", "zero", 1);
    CHECK_THROWS_AS(options_from_environment(), std::invalid_argument);

    unsetenv("THREADS");
    unsetenv("SEED");
    opts = options_from_environment();
    CHECK(opts.threads >= 1);
    CHECK(!opts.has_seed);
}
