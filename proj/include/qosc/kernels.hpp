#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qosc/model.hpp"

namespace qosc::kern {

// Per-step coefficients shared by every trajectory of a run:
// om2[k] = omega^2(t_k), kick[k] = sqrt(lambda(t_k) hbar dt), t_k = k dt.
struct StepTable {
    double dt = 0.0;
    std::vector<double> om2;
    std::vector<double> kick;
    long n_steps() const { return static_cast<long>(om2.size()); }
};
StepTable build_step_table(const ModelParams& params, double dt, long n_steps);

// Forward/backward (alpha, beta, gamma) pairs, structure-of-arrays so the
// vector kernel can load four lanes at a time. f* = forward, b* = backward;
// suffix r/i = real/imaginary plane.
struct PairBatch {
    long n = 0;
    std::vector<double> afr, afi, bfr, bfi, gfr, gfi;
    std::vector<double> abr, abi, bbr, bbi, gbr, gbi;
    std::vector<std::uint8_t> alive;
    std::vector<double> t_gamma;   // valid where alive == 0
    std::vector<long> blow_step;   // step index of the freeze
    void init(long n_lanes, double inv_sigma_sq);
};

// Square roots tracked for branch continuity, refreshed every `cadence`
// steps: rx ~ sqrt(beta), rp ~ sqrt(-i beta/gamma) forward and
// sqrt(+i beta/gamma) backward.
struct PairRoots {
    std::vector<complex> rxf, rxb, rpf, rpb;
    void init(long n_lanes, double sigma);
};

struct PairRunConfig {
    const StepTable* table = nullptr;
    double m = 1.0;
    std::uint64_t seed = 1;
    long first_pair = 0;  // lane l draws from streams 2(first_pair+l), +1
    long cadence = 500;
    const std::vector<long>* sample_steps = nullptr;  // ascending step indices
};

// Called at each requested step for every lane, after root refresh;
// reads the batch and roots captured by the caller.
using PairSink = std::function<void(long lane, long sample_ordinal)>;

using PairKernelFn = void (*)(PairBatch&, PairRoots&, const PairRunConfig&, const PairSink&);

void run_pairs_scalar(PairBatch& batch, PairRoots& roots, const PairRunConfig& cfg,
                      const PairSink& sink);

// Throws when the binary was built without the vector kernel; check
// avx2_kernel_available() first.
void run_pairs_avx2(PairBatch& batch, PairRoots& roots, const PairRunConfig& cfg,
                    const PairSink& sink);
bool avx2_kernel_available();

// Runtime selection: the widest kernel this build and CPU support. Both
// kernels produce bit-identical trajectories.
PairKernelFn pair_kernel();
const char* pair_kernel_name();

// Forward-gamma-only integrator for first-passage statistics. Each
// trajectory j draws from stream (seed, first_index + j). Times are
// censored at the horizon: t = min(t_gamma, n_steps dt).
struct FirstPassage {
    std::vector<double> t_exit;
    std::vector<std::uint8_t> crossed;
};
FirstPassage run_first_passage(const StepTable& table, double m, std::uint64_t seed,
                               long first_index, long n_traj, double inv_sigma_sq);

// Single-direction group-parameter trajectories for propagator averages.
// State per lane: xi_plus, xi_z, exp(xi_z) (integrated alongside to avoid
// a per-step exponential), xi_minus.
struct XiBatch {
    long n = 0;
    std::vector<double> pr, pi, zr, zi, er, ei, mr, mi;
    std::vector<std::uint8_t> alive;
    void init(long n_lanes);
};

struct XiRoots {  // tracked branch of sqrt(-xi_minus)
    std::vector<complex> rm;
    std::vector<std::uint8_t> seeded;
    void init(long n_lanes);
};

struct XiRunConfig {
    const StepTable* table = nullptr;
    double m = 1.0;
    std::uint64_t seed = 1;
    long first_traj = 0;  // lane l draws from stream first_traj + l
    long cadence = 500;
    const std::vector<long>* sample_steps = nullptr;
};

using XiSink = std::function<void(long lane, long sample_ordinal)>;

void run_xi_scalar(XiBatch& batch, XiRoots& roots, const XiRunConfig& cfg, const XiSink& sink);

}  // namespace qosc::kern
