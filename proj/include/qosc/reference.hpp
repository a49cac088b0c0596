#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qosc/model.hpp"

namespace qosc {

// Uniform spatial grid for the Schroedinger solver. The box must be wide
// enough that the wavefunction never reaches the edges; cn_evolve checks.
struct Grid {
    double x_min = -10.0;
    double x_max = 10.0;
    int n_points = 1024;
    double dt = 1e-3;

    void validate() const {
        if (n_points < 64) throw std::invalid_argument("Grid: n_points must be >= 64");
        if (!(x_max > x_min)) throw std::invalid_argument("Grid: x_max must exceed x_min");
        if (!(dt > 0.0)) throw std::invalid_argument("Grid: dt must be positive");
    }
    double dx() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
    double x(int j) const { return x_min + dx() * static_cast<double>(j); }
};

struct GridState {
    Eigen::VectorXcd psi;
    double t = 0.0;
};

// Discretized Gaussian packet, renormalized on the grid.
GridState init_packet(const GaussianPacket& packet, const Grid& grid);

// Crank-Nicolson evolution to t_final with Dirichlet walls. The potential
// m w^2(t) x^2/2 + lambda(t) x^4/4 is evaluated at the half step. Throws
// when probability reaches the walls or the norm drifts.
GridState cn_evolve(GridState state, const Grid& grid, const ModelParams& params,
                    double t_final);

// <x^n> by quadrature, or <p^n> via central-difference derivatives (n <= 4).
double grid_moment(const GridState& state, const Grid& grid, int n, Which which,
                   double hbar = 1.0);

// Lowest `dim` eigenvalues of the truncated-basis Hamiltonian, basis size
// doubled until they are stable to 1e-10.
std::vector<double> spectrum(const ModelParams& params, int dim);

}  // namespace qosc
