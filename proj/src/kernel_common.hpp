#pragma once

// Euler-Maruyama step formulas shared by the scalar and vector kernels.
// The vector kernel mirrors these expression trees operation for
// operation; any change here must be mirrored there or the bit-identity
// test fails. No fused multiply-adds anywhere (builds use
// -ffp-contract=off), so both kernels round identically.

#include <cmath>

#include "qosc/kernels.hpp"

namespace qosc::kern {

// Forward triple: d gamma = dt (-i gamma^2/m + i m w^2) + (-1+i) kick z,
// d beta = dt (-i beta gamma / m), d alpha = dt (-i beta^2 / m).
inline void step_forward(double& ar, double& ai, double& br, double& bi, double& gr,
                         double& gi, double om2, double kick, double z, double dt,
                         double m, double inv_m) {
    const double g2r = gr * gr - gi * gi;
    const double g2i = 2.0 * gr * gi;
    const double bgr = br * gr - bi * gi;
    const double bgi = br * gi + bi * gr;
    const double b2r = br * br - bi * bi;
    const double b2i = 2.0 * br * bi;
    const double ngr = gr + dt * (g2i * inv_m) - kick * z;
    const double ngi = gi + dt * (m * om2 - g2r * inv_m) + kick * z;
    const double nbr = br + dt * (bgi * inv_m);
    const double nbi = bi - dt * (bgr * inv_m);
    const double nar = ar + dt * (b2i * inv_m);
    const double nai = ai - dt * (b2r * inv_m);
    gr = ngr; gi = ngi; br = nbr; bi = nbi; ar = nar; ai = nai;
}

// Backward triple: complex conjugate dynamics with its own noise path.
inline void step_backward(double& ar, double& ai, double& br, double& bi, double& gr,
                          double& gi, double om2, double kick, double z, double dt,
                          double m, double inv_m) {
    const double g2r = gr * gr - gi * gi;
    const double g2i = 2.0 * gr * gi;
    const double bgr = br * gr - bi * gi;
    const double bgi = br * gi + bi * gr;
    const double b2r = br * br - bi * bi;
    const double b2i = 2.0 * br * bi;
    const double ngr = gr - dt * (g2i * inv_m) - kick * z;
    const double ngi = gi + dt * (g2r * inv_m - m * om2) - kick * z;
    const double nbr = br - dt * (bgi * inv_m);
    const double nbi = bi + dt * (bgr * inv_m);
    const double nar = ar - dt * (b2i * inv_m);
    const double nai = ai + dt * (b2r * inv_m);
    gr = ngr; gi = ngi; br = nbr; bi = nbi; ar = nar; ai = nai;
}

// Forward gamma alone (first-passage scans).
inline void step_gamma_forward(double& gr, double& gi, double om2, double kick, double z,
                               double dt, double m, double inv_m) {
    const double g2r = gr * gr - gi * gi;
    const double g2i = 2.0 * gr * gi;
    const double ngr = gr + dt * (g2i * inv_m) - kick * z;
    const double ngi = gi + dt * (m * om2 - g2r * inv_m) + kick * z;
    gr = ngr; gi = ngi;
}

// Group parameters: d xi+ = dt (i xi+^2/m - i m w^2) + (1-i) kick z,
// d xi_z = dt (2 i xi+ / m), d e^{xi_z} = dt (2 i xi+ / m) e^{xi_z},
// d xi- = dt (-i e^{xi_z} / m).
inline void step_xi_lane(double& pr, double& pi_, double& zr, double& zi, double& er,
                         double& ei, double& mr, double& mi, double om2, double kick,
                         double z, double dt, double m, double inv_m) {
    const double p2r = pr * pr - pi_ * pi_;
    const double p2i = 2.0 * pr * pi_;
    const double npr = pr - dt * (p2i * inv_m) + kick * z;
    const double npi = pi_ + dt * (p2r * inv_m - m * om2) - kick * z;
    const double nzr = zr - dt * (2.0 * pi_ * inv_m);
    const double nzi = zi + dt * (2.0 * pr * inv_m);
    const double ner = er - dt * ((pi_ * er + pr * ei) * (2.0 * inv_m));
    const double nei = ei + dt * ((pr * er - pi_ * ei) * (2.0 * inv_m));
    const double nmr = mr + dt * (ei * inv_m);
    const double nmi = mi - dt * (er * inv_m);
    pr = npr; pi_ = npi; zr = nzr; zi = nzi; er = ner; ei = nei; mr = nmr; mi = nmi;
}

inline bool gamma_healthy(double gfr, double gfi, double gbr, double gbi) {
    return gfr > 0.0 && gbr > 0.0 && std::isfinite(gfr) && std::isfinite(gfi) &&
           std::isfinite(gbr) && std::isfinite(gbi);
}

// Continuity-tracked square root: take the principal value, flip sign if
// the previous tracked value sits closer to the opposite branch.
inline complex tracked_sqrt(complex target, complex prev) {
    complex r = std::sqrt(target);
    const double keep_re = r.real() - prev.real();
    const double keep_im = r.imag() - prev.imag();
    const double flip_re = r.real() + prev.real();
    const double flip_im = r.imag() + prev.imag();
    if (keep_re * keep_re + keep_im * keep_im > flip_re * flip_re + flip_im * flip_im)
        return -r;
    return r;
}

// Refresh all four tracked roots of one pair lane.
inline void refresh_pair_roots(PairBatch& b, PairRoots& r, long l) {
    const complex bf(b.bfr[l], b.bfi[l]);
    const complex gf(b.gfr[l], b.gfi[l]);
    const complex bb(b.bbr[l], b.bbi[l]);
    const complex gb(b.gbr[l], b.gbi[l]);
    r.rxf[l] = tracked_sqrt(bf, r.rxf[l]);
    r.rxb[l] = tracked_sqrt(bb, r.rxb[l]);
    r.rpf[l] = tracked_sqrt(complex(0.0, -1.0) * bf / gf, r.rpf[l]);
    r.rpb[l] = tracked_sqrt(complex(0.0, 1.0) * bb / gb, r.rpb[l]);
}

// Shared stepping skeleton: sample emission and root cadence must behave
// identically in every kernel.
template <typename Advance>
inline void drive_pairs(PairBatch& b, PairRoots& roots, const PairRunConfig& cfg,
                        const PairSink& sink, Advance&& advance_step) {
    const StepTable& table = *cfg.table;
    const long n_steps = table.n_steps();
    const long n = b.n;
    static const std::vector<long> no_samples;
    const std::vector<long>& samples = cfg.sample_steps ? *cfg.sample_steps : no_samples;
    std::size_t si = 0;
    while (si < samples.size() && samples[si] == 0) {
        for (long l = 0; l < n; ++l) sink(l, static_cast<long>(si));
        ++si;
    }
    for (long k = 0; k < n_steps; ++k) {
        advance_step(k);
        const long s = k + 1;
        const bool sampling = si < samples.size() && samples[si] == s;
        if (sampling || s % cfg.cadence == 0)
            for (long l = 0; l < n; ++l)
                if (b.alive[l]) refresh_pair_roots(b, roots, l);
        while (si < samples.size() && samples[si] == s) {
            for (long l = 0; l < n; ++l) sink(l, static_cast<long>(si));
            ++si;
        }
    }
}

}  // namespace qosc::kern
