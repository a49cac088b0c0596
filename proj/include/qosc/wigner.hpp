#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "qosc/model.hpp"
#include "qosc/reference.hpp"

namespace qosc {

// Gaussian phase-space density: sqrt(det P)/(2 pi) exp(-(v-c)^T P (v-c)/2)
// with center c = (mean_x, mean_p) and symmetric precision matrix P.
struct GaussianWigner {
    double mean_x = 0.0;
    double mean_p = 0.0;
    double pxx = 1.0;
    double pxp = 0.0;
    double ppp = 1.0;

    void validate() const;
    double det_precision() const { return pxx * ppp - pxp * pxp; }
    double cov_xx() const { return ppp / det_precision(); }
    double cov_xp() const { return -pxp / det_precision(); }
    double cov_pp() const { return pxx / det_precision(); }
    // sqrt(det Sigma); hbar/2 for any pure Gaussian state.
    double uncertainty_area() const { return 1.0 / std::sqrt(det_precision()); }
    double value(double x, double p) const;
};

// Wigner density of the initial packet: centered at (a, hbar k) with
// covariance diag(sigma^2/2, hbar^2/(2 sigma^2)).
GaussianWigner wigner_from_packet(const GaussianPacket& packet, double hbar = 1.0);

// Phase-space pushforward of the unitaries generated by the group operators,
// each parametrized by a real weight w:
//   apply_plus:  e^{i w x^2 / 2 hbar}, momentum shear  p -> p + w x
//   apply_z:     dilation,  x -> e^{-w/2} x,  p -> e^{w/2} p
//   apply_minus: e^{i w p^2 / 2 hbar}, position shear  x -> x - w p
// All three preserve phase-space area, so uncertainty_area is invariant.
GaussianWigner apply_plus(const GaussianWigner& wf, double w);
GaussianWigner apply_z(const GaussianWigner& wf, double w);
GaussianWigner apply_minus(const GaussianWigner& wf, double w);

// Discrete Wigner transform sampled at every grid point in x and at the
// given momenta. Values are stored row-major as w[i * p.size() + j].
struct WignerTable {
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> w;
    double at(std::size_t i, std::size_t j) const { return w[i * p.size() + j]; }
};

WignerTable grid_wigner(const Eigen::VectorXcd& psi, const Grid& grid,
                        const std::vector<double>& momenta, double hbar = 1.0);

// Zeroth through second moments of a table by the rectangle rule. Momenta
// must be uniformly spaced.
struct WignerCumulants {
    double mass = 0.0;
    double mean_x = 0.0;
    double mean_p = 0.0;
    double cov_xx = 0.0;
    double cov_xp = 0.0;
    double cov_pp = 0.0;
};

WignerCumulants cumulants(const WignerTable& table);

}  // namespace qosc
