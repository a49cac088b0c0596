#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "qosc/model.hpp"

namespace qosc {

// Group-parameter state of the factorized evolution operator.
struct XiState {
    complex xi_plus{0.0, 0.0};
    complex xi_z{0.0, 0.0};
    complex xi_minus{0.0, 0.0};
    double t = 0.0;
};

// Gaussian-form state (alpha, beta, gamma) obtained by projecting the
// factorized evolution onto an initial Gaussian packet. Before blow-up
// every trajectory keeps Re(gamma) > 0.
struct AbgState {
    complex alpha{0.0, 0.0};
    complex beta{0.0, 0.0};
    complex gamma{0.0, 0.0};
    double t = 0.0;
};

struct NoiseConfig {
    double dt = 1e-4;
    long n_steps = 0;
    std::uint64_t seed = 1;
    long trajectory_index = 0;
};

// One integrated forward/backward pair. blown is set at the first step
// where Re(gamma) <= 0 in either direction (or a state stops being
// finite); the states are frozen there and t_gamma records the time.
struct TrajectoryOutcome {
    AbgState forward;
    AbgState backward;
    bool blown = false;
    std::optional<double> t_gamma;
};

// omega^2(t) + 2 sqrt(i lambda(t)) phi / m with sqrt(i) = exp(i pi/4).
complex effective_frequency_sq(const ModelParams& params, double t, double phi);

// One explicit Euler step, all right-hand sides at the old state.
XiState step_xi(const XiState& state, complex omega_sq_eff, double m, double dt);
AbgState step_abg(const AbgState& state, complex omega_sq_eff, double m, double dt);

TrajectoryOutcome integrate_trajectory(const ModelParams& params, const GaussianPacket& packet,
                                       const NoiseConfig& noise);

// Noiseless closed forms: xi_plus = -i m w tan(wt), xi_z = -log cos^2(wt),
// xi_minus = -i tan(wt)/(m w). Throws near the focal divergences.
XiState harmonic_xi(const ModelParams& params, double t);

// Zero-kinetic-term limit: xi_minus = xi_z = 0 and xi_plus collects the
// accumulated drive plus the rotated Gaussian noise integral W_rot.
XiState commuting_xi(double W_rot, const ModelParams& params, double t);

// Auxiliary pair X = xi_minus e^{-xi_z/2} / i, Y = e^{-xi_z/2}; both obey
// the harmonic equation with the effective frequency along any trajectory.
std::pair<complex, complex> xy_variables(const XiState& xi, double m);

}  // namespace qosc
