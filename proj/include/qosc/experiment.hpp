#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qosc/model.hpp"

namespace qosc {

enum class ExperimentKind {
    moments,
    commuting,
    harmonic,
    first_passage,
    propagator,
    dyson,
    semiclassical_g,
    partition,
    wigner,
};

const char* kind_name(ExperimentKind kind);

// Parsed and validated run description. Schedules keep their source text so
// a serialized config reparses to the identical run.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::moments;

    ModelParams model;
    std::string omega_spec = "constant:1";
    std::string lambda_spec = "constant:0";
    GaussianPacket packet;

    long n_traj = 10000;
    std::uint64_t seed = 1;
    double dt = 1e-4;

    std::vector<double> t_grid;

    std::vector<int> orders{1, 2};
    bool want_x = true;
    bool want_p = false;

    double x = 0.0;
    double x0 = 0.0;
    int branches = 1;
    int n_grid = 2000;

    int dim = 64;
    int lead_cols = 4;
    int order_max = 2;
    std::vector<double> lambdas;

    double horizon = 50.0;

    std::vector<double> beta_grid;
    double x_cutoff = 8.0;
    long n_quad = 4000;

    double grid_x_min = -8.0;
    double grid_x_max = 8.0;
    int grid_points = 1921;
    double grid_dt = 1e-3;
    double p_min = -5.0;
    double p_max = 5.0;
    int n_p = 41;

    std::string out_dir = ".";
    bool plots = true;
};

// Parses the INI text (sections in brackets, key = value, # or ; comment
// lines). Unknown sections or keys, malformed values, and configurations
// that cannot run are reported with the line number or the [section] key
// at fault.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical INI form; parse_config(serialize_config(c)) describes the same
// run, so a manifest doubles as a rerun config.
std::string serialize_config(const ExperimentConfig& config);

// Human-readable echo of the resolved parameters plus the estimated cost,
// printed by the validate subcommand.
std::string describe_config(const ExperimentConfig& config);

struct RunOptions {
    std::string out_dir;  // empty keeps the config directory
    bool no_plots = false;
    int threads = 0;  // 0 resolves to a single worker
    bool has_seed = false;
    std::uint64_t seed = 0;
    std::string code_version = "untracked";
};

// THREADS and SEED environment overrides.
RunOptions options_from_environment();

// Executes the experiment and writes one CSV per observable, a manifest,
// and (unless disabled) one best-effort SVG per CSV. Returns the paths
// written. CSV bytes depend only on the config and seed, never on the
// worker count.
std::vector<std::string> run_experiment(const ExperimentConfig& config,
                                        const RunOptions& options);

}  // namespace qosc
