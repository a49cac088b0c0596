#include "qosc/model.hpp"

#include <algorithm>
#include <cmath>

namespace qosc {

Schedule Schedule::constant(double c) { return Schedule(Kind::Constant, c); }

Schedule Schedule::sin_squared(double amplitude) { return Schedule(Kind::SinSquared, amplitude); }

Schedule Schedule::tabulated(std::vector<double> times, std::vector<double> values) {
    if (times.size() < 2 || times.size() != values.size())
        throw std::invalid_argument("Schedule: table needs >= 2 matching (t, value) rows");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("Schedule: table times must be strictly increasing");
    Schedule s(Kind::Tabulated, 0.0);
    s.times_ = std::move(times);
    s.values_ = std::move(values);
    return s;
}

double Schedule::operator()(double t) const {
    switch (kind_) {
        case Kind::Constant:
            return c_;
        case Kind::SinSquared: {
            double s = std::sin(t);
            return c_ * s * s;
        }
        case Kind::Tabulated: {
            if (t < times_.front() || t > times_.back())
                throw std::domain_error("Schedule: evaluation outside tabulated range");
            auto it = std::upper_bound(times_.begin(), times_.end(), t);
            if (it == times_.end()) return values_.back();
            std::size_t hi = static_cast<std::size_t>(it - times_.begin());
            std::size_t lo = hi - 1;
            double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
            return values_[lo] + w * (values_[hi] - values_[lo]);
        }
    }
    return 0.0;
}

OperatorSet build_operators(int dim, const ModelParams& params, double basis_frequency) {
    params.validate();
    if (dim < 4) throw std::invalid_argument("build_operators: dim must be >= 4");
    if (!(basis_frequency > 0.0))
        throw std::invalid_argument("build_operators: basis_frequency must be positive");

    const double x0 = std::sqrt(params.hbar / (params.m * basis_frequency));
    const double p0 = params.hbar / x0;

    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    Eigen::MatrixXcd ad = a.adjoint();

    OperatorSet ops;
    ops.dim = dim;
    ops.x = (x0 / std::sqrt(2.0)) * (a + ad);
    ops.p = complex(0.0, 1.0) * (p0 / std::sqrt(2.0)) * (ad - a);

    Eigen::MatrixXcd x2 = ops.x * ops.x;
    Eigen::MatrixXcd p2 = ops.p * ops.p;
    ops.s_plus = x2 / (2.0 * params.hbar);
    ops.s_minus = p2 / (2.0 * params.hbar);
    ops.s_z = complex(0.0, 1.0) * (ops.x * ops.p + ops.p * ops.x) / (4.0 * params.hbar);

    const double om2 = params.omega_sq(0.0);
    const double lam = params.lambda_at(0.0);
    ops.h = p2 / (2.0 * params.m) + 0.5 * params.m * om2 * x2 + 0.25 * lam * x2 * x2;
    return ops;
}

namespace {

// Trapezoid quadrature of exp(i tau (phi^2/lam - x^2 phi)/hbar - eps phi^2)
// over [-cutoff, cutoff]. The damper makes the tail negligible, so the rule
// converges spectrally once the chirp is resolved.
complex damped_integral(double x, double tau, double lam, double hbar, double eps,
                        double cutoff, long n) {
    const double qa = tau / (lam * hbar);
    const double qb = tau * x * x / hbar;
    const double h = 2.0 * cutoff / static_cast<double>(n);
    complex acc(0.0, 0.0);
    for (long j = 0; j <= n; ++j) {
        const double phi = -cutoff + h * static_cast<double>(j);
        const double theta = qa * phi * phi - qb * phi;
        const double damp = std::exp(-eps * phi * phi);
        complex f(damp * std::cos(theta), damp * std::sin(theta));
        acc += (j == 0 || j == n) ? 0.5 * f : f;
    }
    return acc * h;
}

// Polynomial extrapolation of (eps_i, y_i) samples to eps = 0.
complex neville_to_zero(const std::vector<double>& eps, std::vector<complex> y) {
    const std::size_t n = eps.size();
    for (std::size_t level = 1; level < n; ++level)
        for (std::size_t i = 0; i + level < n; ++i) {
            const double e0 = eps[i], e1 = eps[i + level];
            y[i] = (e0 * y[i + 1] - e1 * y[i]) / (e0 - e1);
        }
    return y[0];
}

}  // namespace

complex hst_quadrature_estimate(double x, double tau, double lam, double cutoff,
                                long n_quad, double hbar) {
    if (!(lam > 0.0)) throw std::invalid_argument("hst_scalar_identity: lam must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("hst_scalar_identity: tau must be positive");
    if (!(cutoff > 0.0) || n_quad < 16)
        throw std::invalid_argument("hst_scalar_identity: bad quadrature parameters");

    // exp(i a phi^2) integrates to sqrt(i pi / a) * Gaussian factor, so the
    // normalisation sqrt(tau / (i lam hbar pi)) makes the identity exact.
    const complex norm =
        std::sqrt(complex(0.0, 1.0) * tau / (lam * hbar * M_PI)) / complex(0.0, 1.0);

    const std::vector<double> eps = {1e-2, 1e-3, 1e-4};
    std::vector<complex> vals;
    vals.reserve(eps.size());
    for (double e : eps) vals.push_back(damped_integral(x, tau, lam, hbar, e, cutoff, n_quad));
    return norm * neville_to_zero(eps, std::move(vals));
}

std::pair<complex, complex> hst_scalar_identity(double x, double tau, double lam,
                                                double cutoff, long n_quad, double hbar) {
    const complex lhs = std::exp(complex(0.0, -tau * lam * std::pow(x, 4) / (4.0 * hbar)));
    const complex coarse = hst_quadrature_estimate(x, tau, lam, cutoff, n_quad, hbar);
    const complex fine = hst_quadrature_estimate(x, tau, lam, cutoff, 2 * n_quad, hbar);
    if (std::abs(fine - coarse) > 1e-4)
        throw std::runtime_error("hst_scalar_identity: quadrature not converged; "
                                 "increase n_quad or cutoff");
    return {lhs, fine};
}

}  // namespace qosc
