#include "qosc/wigner.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace qosc {

namespace {

constexpr double kPi = std::numbers::pi;

// Shared pushforward through a unit-determinant map M: centers move with M,
// the precision matrix with M^{-T} P M^{-1}. Arguments are the entries of
// M^{-1} = [[a, b], [c, d]].
GaussianWigner pushed(const GaussianWigner& wf, double m00, double m01, double m10,
                      double m11) {
    const double a = m11;
    const double b = -m01;
    const double c = -m10;
    const double d = m00;
    GaussianWigner out;
    out.mean_x = m00 * wf.mean_x + m01 * wf.mean_p;
    out.mean_p = m10 * wf.mean_x + m11 * wf.mean_p;
    out.pxx = a * a * wf.pxx + 2.0 * a * c * wf.pxp + c * c * wf.ppp;
    out.pxp = a * b * wf.pxx + (a * d + b * c) * wf.pxp + c * d * wf.ppp;
    out.ppp = b * b * wf.pxx + 2.0 * b * d * wf.pxp + d * d * wf.ppp;
    return out;
}

}  // namespace

void GaussianWigner::validate() const {
    if (!(pxx > 0.0) || !(det_precision() > 0.0))
        throw std::invalid_argument("GaussianWigner: precision must be positive definite");
}

double GaussianWigner::value(double x, double p) const {
    const double dx = x - mean_x;
    const double dp = p - mean_p;
    const double quad = pxx * dx * dx + 2.0 * pxp * dx * dp + ppp * dp * dp;
    return std::sqrt(det_precision()) / (2.0 * kPi) * std::exp(-0.5 * quad);
}

GaussianWigner wigner_from_packet(const GaussianPacket& packet, double hbar) {
    packet.validate();
    if (!(hbar > 0.0)) throw std::invalid_argument("wigner_from_packet: hbar must be positive");
    const double s2 = packet.sigma * packet.sigma;
    GaussianWigner wf;
    wf.mean_x = packet.a;
    wf.mean_p = hbar * packet.k;
    wf.pxx = 2.0 / s2;
    wf.pxp = 0.0;
    wf.ppp = 2.0 * s2 / (hbar * hbar);
    return wf;
}

GaussianWigner apply_plus(const GaussianWigner& wf, double w) {
    return pushed(wf, 1.0, 0.0, w, 1.0);
}

GaussianWigner apply_z(const GaussianWigner& wf, double w) {
    return pushed(wf, std::exp(-0.5 * w), 0.0, 0.0, std::exp(0.5 * w));
}

GaussianWigner apply_minus(const GaussianWigner& wf, double w) {
    return pushed(wf, 1.0, -w, 0.0, 1.0);
}

WignerTable grid_wigner(const Eigen::VectorXcd& psi, const Grid& grid,
                        const std::vector<double>& momenta, double hbar) {
    grid.validate();
    if (!(hbar > 0.0)) throw std::invalid_argument("grid_wigner: hbar must be positive");
    if (psi.size() != grid.n_points)
        throw std::invalid_argument("grid_wigner: psi size does not match the grid");
    const int n = grid.n_points;
    const double dx = grid.dx();
    const std::size_t np = momenta.size();

    WignerTable table;
    table.x.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) table.x[static_cast<std::size_t>(i)] = grid.x(i);
    table.p = momenta;
    table.w.assign(static_cast<std::size_t>(n) * np, 0.0);

    // W(x_i, p) = (dx / pi hbar) sum_l e^{-2 i p y_l / hbar}
    //             psi(x_i + y_l) conj(psi(x_i - y_l)),  y_l = l dx,
    // truncated where either argument leaves the box. The l <-> -l pairing
    // makes the sum real; accumulate the l > 0 half with doubled real part.
    for (int i = 0; i < n; ++i) {
        const int reach = std::min(i, n - 1 - i);
        const double wx = std::abs(psi[i]) * std::abs(psi[i]);
        for (std::size_t j = 0; j < np; ++j) {
            const double phase_step = -2.0 * momenta[j] * dx / hbar;
            // e^{i l phase_step} by recurrence over l.
            const complex rot(std::cos(phase_step), std::sin(phase_step));
            complex phase = rot;
            double acc = wx;
            for (int l = 1; l <= reach; ++l) {
                const complex cross = psi[i + l] * std::conj(psi[i - l]);
                acc += 2.0 * (phase * cross).real();
                phase *= rot;
            }
            table.w[static_cast<std::size_t>(i) * np + j] = acc * dx / (kPi * hbar);
        }
    }
    return table;
}

WignerCumulants cumulants(const WignerTable& table) {
    if (table.x.size() < 2 || table.p.size() < 2)
        throw std::invalid_argument("cumulants: need at least a 2x2 table");
    const double dx = table.x[1] - table.x[0];
    const double dp = table.p[1] - table.p[0];
    if (!(dx > 0.0) || !(dp > 0.0))
        throw std::invalid_argument("cumulants: axes must be increasing");

    WignerCumulants c;
    double sx = 0.0, sp = 0.0, sxx = 0.0, sxp = 0.0, spp = 0.0;
    for (std::size_t i = 0; i < table.x.size(); ++i)
        for (std::size_t j = 0; j < table.p.size(); ++j) {
            const double w = table.at(i, j);
            c.mass += w;
            sx += w * table.x[i];
            sp += w * table.p[j];
            sxx += w * table.x[i] * table.x[i];
            sxp += w * table.x[i] * table.p[j];
            spp += w * table.p[j] * table.p[j];
        }
    const double cell = dx * dp;
    c.mass *= cell;
    if (!(std::abs(c.mass) > 0.0)) throw std::domain_error("cumulants: zero total mass");
    c.mean_x = sx * cell / c.mass;
    c.mean_p = sp * cell / c.mass;
    c.cov_xx = sxx * cell / c.mass - c.mean_x * c.mean_x;
    c.cov_xp = sxp * cell / c.mass - c.mean_x * c.mean_p;
    c.cov_pp = spp * cell / c.mass - c.mean_p * c.mean_p;
    return c;
}

}  // namespace qosc
