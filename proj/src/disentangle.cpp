#include "qosc/disentangle.hpp"

#include <cmath>
#include <numbers>

#include "qosc/kernels.hpp"

namespace qosc {

namespace {
constexpr double kPi = std::numbers::pi;
}

complex effective_frequency_sq(const ModelParams& params, double t, double phi) {
    const double lam = params.lambda_at(t);
    const complex root_i_lam = std::sqrt(complex(0.0, lam));  // e^{i pi/4} sqrt(lam)
    return params.omega_sq(t) + 2.0 * root_i_lam * phi / params.m;
}

XiState step_xi(const XiState& state, complex omega_sq_eff, double m, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_xi: dt must be positive");
    const complex i1(0.0, 1.0);
    XiState next;
    next.xi_plus = state.xi_plus - i1 * dt * (m * omega_sq_eff - state.xi_plus * state.xi_plus / m);
    next.xi_z = state.xi_z + i1 * dt * 2.0 * state.xi_plus / m;
    next.xi_minus = state.xi_minus - i1 * dt * std::exp(state.xi_z) / m;
    next.t = state.t + dt;
    return next;
}

AbgState step_abg(const AbgState& state, complex omega_sq_eff, double m, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_abg: dt must be positive");
    const complex i1(0.0, 1.0);
    AbgState next;
    next.gamma = state.gamma + dt * (-i1 * state.gamma * state.gamma / m + i1 * m * omega_sq_eff);
    next.beta = state.beta + dt * (-i1 * state.beta * state.gamma / m);
    next.alpha = state.alpha + dt * (-i1 * state.beta * state.beta / m);
    next.t = state.t + dt;
    return next;
}

TrajectoryOutcome integrate_trajectory(const ModelParams& params, const GaussianPacket& packet,
                                       const NoiseConfig& noise) {
    packet.validate();
    const double inv_s2 = 1.0 / (packet.sigma * packet.sigma);
    kern::StepTable table = kern::build_step_table(params, noise.dt, noise.n_steps);
    kern::PairBatch batch;
    batch.init(1, inv_s2);
    kern::PairRoots roots;
    roots.init(1, packet.sigma);
    kern::PairRunConfig cfg;
    cfg.table = &table;
    cfg.m = params.m;
    cfg.seed = noise.seed;
    cfg.first_pair = noise.trajectory_index;
    kern::run_pairs_scalar(batch, roots, cfg, kern::PairSink{});

    TrajectoryOutcome out;
    const double t_end = batch.alive[0] ? noise.dt * static_cast<double>(noise.n_steps)
                                        : batch.t_gamma[0];
    out.forward = {complex(batch.afr[0], batch.afi[0]), complex(batch.bfr[0], batch.bfi[0]),
                   complex(batch.gfr[0], batch.gfi[0]), t_end};
    out.backward = {complex(batch.abr[0], batch.abi[0]), complex(batch.bbr[0], batch.bbi[0]),
                    complex(batch.gbr[0], batch.gbi[0]), t_end};
    out.blown = !batch.alive[0];
    if (out.blown) out.t_gamma = batch.t_gamma[0];
    return out;
}

XiState harmonic_xi(const ModelParams& params, double t) {
    params.validate();
    if (!params.lambda.is_constant() || params.lambda(0.0) != 0.0)
        throw std::invalid_argument("harmonic_xi: requires lambda identically zero");
    if (!params.omega_sq.is_constant())
        throw std::invalid_argument("harmonic_xi: requires constant omega^2");
    const double om2 = params.omega_sq(0.0);
    if (!(om2 > 0.0)) throw std::invalid_argument("harmonic_xi: requires omega^2 > 0");
    const double w = std::sqrt(om2);
    const double c = std::cos(w * t);
    if (std::abs(c) < 1e-9)
        throw std::domain_error("harmonic_xi: focal divergence, cos(w t) ~ 0");
    const double tn = std::tan(w * t);
    // xi_z continues -2 Log(cos(w t)) across focal points; each zero of the
    // cosine crossed contributes -2 pi i (damping regularization picks the
    // lower half-plane branch).
    const double crossings = std::floor(w * t / kPi + 0.5);
    XiState xi;
    xi.xi_plus = complex(0.0, -params.m * w * tn);
    xi.xi_z = complex(-std::log(c * c), -2.0 * kPi * crossings);
    xi.xi_minus = complex(0.0, -tn / (params.m * w));
    xi.t = t;
    return xi;
}

XiState commuting_xi(double W_rot, const ModelParams& params, double t) {
    params.validate();
    double drive;
    if (params.omega_sq.is_constant()) {
        drive = params.omega_sq(0.0) * t;
    } else {
        // Simpson rule; only exercised off the hot path.
        const int n = 512;
        const double h = t / n;
        drive = params.omega_sq(0.0) + params.omega_sq(t);
        for (int j = 1; j < n; ++j)
            drive += params.omega_sq(h * j) * (j % 2 ? 4.0 : 2.0);
        drive *= h / 3.0;
    }
    XiState xi;
    xi.xi_plus = std::sqrt(2.0) * complex(1.0, -1.0) * W_rot - complex(0.0, params.m * drive);
    xi.xi_z = complex(0.0, 0.0);
    xi.xi_minus = complex(0.0, 0.0);
    xi.t = t;
    return xi;
}

std::pair<complex, complex> xy_variables(const XiState& xi, [[maybe_unused]] double m) {
    const complex y = std::exp(-0.5 * xi.xi_z);
    const complex x = complex(0.0, -1.0) * xi.xi_minus * y;
    return {x, y};
}

}  // namespace qosc
