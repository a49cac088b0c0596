#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qosc/model.hpp"

namespace qosc {

// Dense propagators in the truncated harmonic ladder basis of the constant
// quadratic part. All functions require constant schedules; the basis
// frequency is sqrt(omega_sq).

// Full propagator e^{-i H t / hbar} by diagonalization.
Eigen::MatrixXcd u_exact(const ModelParams& params, int dim, double t);

// Order-n term of the time-ordered coupling expansion around the quadratic
// propagator: U0 for order 0, (-i lambda / 4 hbar)^n U0(t) I_n otherwise,
// with the nested integrals I_n evaluated by trapezoid on n_time panels.
// Orders 0 through 2 are implemented.
Eigen::MatrixXcd dyson_term(const ModelParams& params, int dim, double t, int order,
                            int n_time = 240);

// Partial sums of the expansion through max_order.
Eigen::MatrixXcd dyson_sum(const ModelParams& params, int dim, double t, int max_order,
                           int n_time = 240);

// Truncation residual ||u_exact - partial sum|| as a function of the
// coupling, restricted to the leading lead_cols columns of the propagator
// (per-column RMS: Frobenius / sqrt(lead_cols)); lead_cols = 0 keeps the
// whole matrix. slopes[n] is the least-squares slope of log residual vs
// log lambda for the order-n partial sum; the exact series gives n + 1.
struct ResidualScaling {
    std::vector<double> lambdas;
    std::vector<std::vector<double>> residuals;  // [order][lambda index]
    std::vector<double> slopes;                  // [order]
};

ResidualScaling residual_scaling(const ModelParams& params, int dim, double t,
                                 const std::vector<double>& lambdas, int max_order,
                                 int lead_cols, int n_time = 240);

}  // namespace qosc
