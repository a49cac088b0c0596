#pragma once

#include <cstdint>
#include <vector>

#include "qosc/disentangle.hpp"
#include "qosc/model.hpp"

namespace qosc {

struct MomentRequest {
    int order = 1;
    Which which = Which::position;
};

struct MCConfig {
    long n_traj = 10000;
    std::uint64_t seed = 1;
    double dt = 1e-4;
    // Closed-form wide-mass sampler instead of the stepping kernel.
    bool commuting = false;
    // 0 resolves to a single worker. Results are identical for any value.
    int n_threads = 0;
};

struct MomentEstimate {
    complex value{0.0, 0.0};
    double std_error = 0.0;
    double std_error_imag = 0.0;
    long n_used = 0;
    long n_excluded = 0;
};

// Physicists' Hermite polynomial, complex argument.
complex hermite(int n, complex x);

// One-trajectory estimate of <x^n> or <p^n> from the forward/backward
// Gaussian-form triples. Branch roots are taken principal; the estimator
// overload below carries continuity-tracked roots instead.
complex moment_sample(const AbgState& fwd, const AbgState& bwd, const GaussianPacket& packet,
                      int order, Which which);
complex moment_sample(const AbgState& fwd, const AbgState& bwd, const GaussianPacket& packet,
                      int order, Which which, complex root_product);

// Monte Carlo moments at the given times (each must sit on the step grid
// when the stepping kernel is used). Returns [request][time]. Pairs whose
// trajectory has blown up by a sample time are excluded there and counted.
std::vector<std::vector<MomentEstimate>> estimate_moments(
    const ModelParams& params, const GaussianPacket& packet,
    const std::vector<MomentRequest>& requests, const std::vector<double>& t_grid,
    const MCConfig& cfg);

// Closed-form harmonic expectation value of x^n or p^n, for lambda = 0 and
// constant positive omega^2 only.
double harmonic_moment(const ModelParams& params, const GaussianPacket& packet, double t,
                       int order, Which which);

// One-trajectory propagator estimate G(x, x0; t) from the group parameters.
// Principal root of -xi_minus, or a continuity-tracked root.
complex propagator_sample(const XiState& xi, double x, double x0, double hbar);
complex propagator_sample(const XiState& xi, complex minus_xi_minus_root, double x,
                          double x0, double hbar);

// Monte Carlo propagator estimate at time t (on the step grid).
MomentEstimate estimate_propagator(const ModelParams& params, double x, double x0, double t,
                                   const MCConfig& cfg);

// Exact harmonic propagator, valid for 0 < t < pi/omega.
complex harmonic_propagator(const ModelParams& params, double x, double x0, double t);

}  // namespace qosc
