#pragma once

#include <vector>

#include "qosc/model.hpp"

namespace qosc {

// Boundary-value solution of m x'' = -m w^2(tau) x - lambda(tau) x^3 found by
// shooting on the initial velocity. Samples sit on a uniform tau grid with
// n panels over [0, t].
struct ClassicalPath {
    double x_i = 0.0;
    double x_f = 0.0;
    double t = 0.0;
    double v0 = 0.0;
    double action = 0.0;
    double energy = 0.0;
    std::vector<double> x;
    std::vector<double> v;
};

// Solves the boundary value problem. Candidate initial velocities are found
// by bracketing sign changes of the endpoint miss over a scan window, then
// refined by secant iteration to |miss| < 1e-10 * max(1, |x_f|); `branch`
// indexes the solutions in increasing initial speed, so the direct path is
// branch 0. Throws when the requested branch does not exist or refinement
// stalls.
ClassicalPath classical_trajectory(const ModelParams& params, double x_i, double x_f,
                                   double t, int n_grid, int branch = 0);

// Lagrangian quadrature along the path (Simpson, matching the path grid).
double classical_action(const ClassicalPath& path, const ModelParams& params);

// Linearized flows around the path, both started with value 0 and slope 1:
// `jacobi` uses the second-variation frequency w^2 + 3 lambda x^2 / m and
// controls the path density; `stationary` uses the stationary-field
// frequency w^2 + lambda x^2 / m and normalizes the fluctuation
// determinant, det = jacobi / stationary. conjugate_points counts the
// interior zeros of the jacobi solution.
struct FluctuationDet {
    double jacobi = 0.0;
    double stationary = 0.0;
    int conjugate_points = 0;
};

FluctuationDet gelfand_yaglom(const ClassicalPath& path, const ModelParams& params);

// Sum over boundary-value solutions of
// sqrt(m / (2 pi hbar |F_k|)) exp(i S_k / hbar - i pi/4 - i pi n_k / 2),
// n_k the conjugate-point count. Solutions enter in order of increasing
// action magnitude and the sum is truncated after `branches` of them, so
// branches = 1 keeps the dominant saddle. Throws when no branch converges
// or the endpoint sits on a caustic.
complex semiclassical_propagator(const ModelParams& params, double x_i, double x_f,
                                 double t, int branches, int n_grid = 2000);

// Thermal traces. The classical estimate is
//   (1/hbar) sqrt(m / (2 pi beta)) Int e^{-beta V(x)} dx,
// and the corrected one multiplies the integrand by
//   1 + (hbar^2 beta^2 / 12 m) [beta V'(x)^2 / 2 - V''(x)].
// Simpson quadrature over [-x_cutoff, x_cutoff]; throws when the integrand
// has not decayed to 1e-12 of its peak at the cutoff.
double partition_classical(const ModelParams& params, double beta, double x_cutoff,
                           long n_quad);
double partition_semiclassical(const ModelParams& params, double beta, double x_cutoff,
                               long n_quad);

// Sum of e^{-beta E_n} over the converged low spectrum; throws when the
// truncated tail is not negligible.
double partition_spectral(const ModelParams& params, double beta, int dim);

// Closed forms of the imaginary-time group parameters at order hbar^0 with
// the integrated auxiliary field supplied as w_int = int_0^beta phi:
// with c = -(m w^2 + 2 w_int / beta),
//   f1 = c beta, f3 = c^2 beta^3 / 3m, g2 = c beta^2 / m,
//   l1 = -beta / m, l3 = -c beta^3 / 3 m^2.
struct ImaginaryTimeCoefficients {
    double f1 = 0.0;
    double f3 = 0.0;
    double g2 = 0.0;
    double l1 = 0.0;
    double l3 = 0.0;
};

ImaginaryTimeCoefficients imaginary_time_coefficients(const ModelParams& params, double beta,
                                                      double w_int);

}  // namespace qosc
