#include "qosc/reference.hpp"

#include <cmath>

namespace qosc {

GridState init_packet(const GaussianPacket& packet, const Grid& grid) {
    packet.validate();
    grid.validate();
    if (packet.a - 6.0 * packet.sigma < grid.x_min || packet.a + 6.0 * packet.sigma > grid.x_max)
        throw std::invalid_argument("init_packet: packet does not fit in the grid");

    GridState state;
    state.t = 0.0;
    state.psi.resize(grid.n_points);
    const double s2 = packet.sigma * packet.sigma;
    for (int j = 0; j < grid.n_points; ++j) {
        const double d = grid.x(j) - packet.a;
        state.psi[j] = std::exp(complex(-d * d / (2.0 * s2), packet.k * d));
    }
    const double norm = std::sqrt(state.psi.squaredNorm() * grid.dx());
    state.psi /= norm;
    return state;
}

namespace {

double norm_on_grid(const GridState& s, const Grid& g) {
    return s.psi.squaredNorm() * g.dx();
}

void check_health(const GridState& s, const Grid& g, long steps_done) {
    const int n = g.n_points;
    const double edge = std::max(std::abs(s.psi[1]), std::abs(s.psi[n - 2]));
    if (edge > 1e-8)
        throw std::runtime_error("cn_evolve: wavefunction reached the box wall; widen the grid");
    const double budget = 1e-8 * (1.0 + static_cast<double>(steps_done) / 1e4);
    if (std::abs(norm_on_grid(s, g) - 1.0) > budget)
        throw std::runtime_error("cn_evolve: norm drift beyond tolerance");
}

// One Cayley step (1 + i dt H / 2hbar) psi' = (1 - i dt H / 2hbar) psi on the
// interior nodes; the walls stay pinned at zero.
void cn_step(Eigen::VectorXcd& psi, const Grid& grid, const ModelParams& params,
             double t_half, double dt, std::vector<complex>& diag,
             std::vector<complex>& scratch_c, std::vector<complex>& scratch_d) {
    const int n = grid.n_points;
    const double dx = grid.dx();
    const double hb = params.hbar;
    const double kin = hb * hb / (params.m * dx * dx);
    const double om2 = params.omega_sq(t_half);
    const double lam = params.lambda_at(t_half);
    const complex half_i_dt(0.0, 0.5 * dt / hb);
    const complex off = half_i_dt * (-0.5 * kin);

    for (int j = 1; j < n - 1; ++j) {
        const double x = grid.x(j);
        const double x2 = x * x;
        const double v = 0.5 * params.m * om2 * x2 + 0.25 * lam * x2 * x2;
        diag[j] = half_i_dt * (kin + v);
    }

    // Right-hand side (1 - i dt H / 2hbar) psi, then Thomas elimination.
    scratch_d[1] = (1.0 - diag[1]) * psi[1] - off * psi[2];
    for (int j = 2; j < n - 2; ++j)
        scratch_d[j] = (1.0 - diag[j]) * psi[j] - off * (psi[j - 1] + psi[j + 1]);
    scratch_d[n - 2] = (1.0 - diag[n - 2]) * psi[n - 2] - off * psi[n - 3];

    complex denom = 1.0 + diag[1];
    scratch_c[1] = off / denom;
    scratch_d[1] /= denom;
    for (int j = 2; j < n - 1; ++j) {
        denom = (1.0 + diag[j]) - off * scratch_c[j - 1];
        scratch_c[j] = off / denom;
        scratch_d[j] = (scratch_d[j] - off * scratch_d[j - 1]) / denom;
    }
    psi[n - 2] = scratch_d[n - 2];
    for (int j = n - 3; j >= 1; --j) psi[j] = scratch_d[j] - scratch_c[j] * psi[j + 1];
    psi[0] = complex(0.0, 0.0);
    psi[n - 1] = complex(0.0, 0.0);
}

}  // namespace

GridState cn_evolve(GridState state, const Grid& grid, const ModelParams& params,
                    double t_final) {
    grid.validate();
    params.validate();
    if (t_final < state.t) throw std::invalid_argument("cn_evolve: t_final precedes state.t");
    if (static_cast<int>(state.psi.size()) != grid.n_points)
        throw std::invalid_argument("cn_evolve: state does not match grid");

    const int n = grid.n_points;
    std::vector<complex> diag(n), sc(n), sd(n);
    long steps_done = 0;
    while (state.t < t_final - 1e-12) {
        const double dt = std::min(grid.dt, t_final - state.t);
        cn_step(state.psi, grid, params, state.t + 0.5 * dt, dt, diag, sc, sd);
        state.t += dt;
        ++steps_done;
        if (steps_done % 200 == 0) check_health(state, grid, steps_done);
    }
    check_health(state, grid, steps_done);
    return state;
}

double grid_moment(const GridState& state, const Grid& grid, int n, Which which,
                   double hbar) {
    if (n < 0 || n > 4)
        throw std::invalid_argument("grid_moment: only n <= 4 is supported");
    const int np = grid.n_points;
    const double dx = grid.dx();

    if (which == Which::position) {
        double acc = 0.0;
        for (int j = 0; j < np; ++j)
            acc += std::pow(grid.x(j), n) * std::norm(state.psi[j]);
        return acc * dx;
    }

    Eigen::VectorXcd d = state.psi;
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXcd next(np);
        for (int j = 0; j < np; ++j) {
            const complex hi = (j + 1 < np) ? d[j + 1] : complex(0.0, 0.0);
            const complex lo = (j - 1 >= 0) ? d[j - 1] : complex(0.0, 0.0);
            next[j] = complex(0.0, -hbar) * (hi - lo) / (2.0 * dx);
        }
        d.swap(next);
    }
    complex acc(0.0, 0.0);
    for (int j = 0; j < np; ++j) acc += std::conj(state.psi[j]) * d[j];
    return acc.real() * dx;
}

std::vector<double> spectrum(const ModelParams& params, int dim) {
    params.validate();
    if (dim < 1) throw std::invalid_argument("spectrum: dim must be positive");
    if (!params.omega_sq.is_constant() || !params.lambda.is_constant())
        throw std::invalid_argument("spectrum: requires time-independent coefficients");

    const double om2 = params.omega_sq(0.0);
    const double basis_freq = (om2 > 1e-12) ? std::sqrt(om2) : 1.0;

    auto low_levels = [&](int basis_dim) {
        auto ops = build_operators(basis_dim, params, basis_freq);
        Eigen::MatrixXd h = ops.h.real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
        std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + dim);
        return ev;
    };

    const int max_basis = 4096;
    int basis = std::max(2 * dim, 64);
    std::vector<double> prev = low_levels(basis);
    while (basis < max_basis) {
        basis = std::min(2 * basis, max_basis);
        std::vector<double> cur = low_levels(basis);
        double worst = 0.0;
        for (int i = 0; i < dim; ++i)
            worst = std::max(worst, std::abs(cur[i] - prev[i]) / std::max(1.0, std::abs(cur[i])));
        if (worst < 1e-10) return cur;
        prev = std::move(cur);
    }
    throw std::runtime_error("spectrum: eigenvalues not converged at maximum basis size");
}

}  // namespace qosc
